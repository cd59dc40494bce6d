import numpy as np
import pytest

from gaugepec.mitigation import (
    DenseInverse,
    NonInvertibleChannelError,
    QuasiProbPlan,
    gamma_table,
    inverse_quasiprob_dense,
    inverse_quasiprob_factored,
    inverse_quasiprob_subgroup,
    pec_expectation_exact,
    pec_sample,
)
from gaugepec.models import GaugeVector
from gaugepec.paulis import (
    Pauli,
    PauliChannel,
    anticommutation_table,
    anticommutes_index,
    label_to_index,
)
from gaugepec.quasilocal import ChannelParams, FactorSet, GeneratorSet
from gaugepec.simulate import EntanglingLayer, circuit, exact_pauli_expectation, single_layer

from conftest import noiseless_model, random_full_model
from gaugepec.paulis import CliffordLayer

LD2 = {"cx": CliffordLayer.cnots(2, [(0, 1)])}
K1 = GeneratorSet.from_factor_set(FactorSet.full(1))
K2 = GeneratorSet.from_factor_set(FactorSet.full(2))


def bell_circuit(depth=1):
    mid = [single_layer(["H", "I"])]
    for _ in range(depth):
        mid.append(EntanglingLayer("cx"))
    return circuit(2, "00", mid, "XZ" if depth % 2 == 0 else "XX")


class TestDenseInverse:
    def test_identity(self):
        inv = inverse_quasiprob_dense(PauliChannel.identity(2))
        assert inv.gamma == 1.0
        assert inv.p_star[0] == 1.0

    def test_dephasing_gamma(self):
        ch = PauliChannel.from_eigenvalues(1, [1, 0.9, 1.0, 0.9])
        assert inverse_quasiprob_dense(ch).gamma == pytest.approx(1 / 0.9)

    def test_uniform_half(self):
        ch = PauliChannel.from_eigenvalues(1, [1, 0.5, 0.5, 0.5])
        inv = inverse_quasiprob_dense(ch)
        assert inv.gamma == pytest.approx(np.abs(inv.p_star).sum())
        assert inv.gamma > 1

    def test_inverse_composes_to_identity(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 3):
            p = rng.dirichlet(np.ones(4**n) * 0.3) * 0.25
            p[0] += 0.75
            ch = PauliChannel.from_rates(n, p)
            inv = inverse_quasiprob_dense(ch)
            signs = 1.0 - 2.0 * anticommutation_table(n).astype(float)
            lam_inv = signs.T @ inv.p_star
            assert np.max(np.abs(lam_inv * ch.eigenvalues - 1)) < 1e-12
            assert inv.p_star.sum() == pytest.approx(1.0, abs=1e-12)
            assert inv.q.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(inv.q >= 0)

    def test_nonpositive_rejected(self):
        lam = np.ones(16)
        lam[5] = 0.0
        with pytest.raises(NonInvertibleChannelError):
            inverse_quasiprob_dense(PauliChannel.from_eigenvalues(2, lam))

    def test_size_cap(self):
        with pytest.raises(ValueError):
            inverse_quasiprob_dense(PauliChannel.identity(7))


class TestFactoredInverse:
    def test_zero_tau(self):
        inv = inverse_quasiprob_factored(ChannelParams.from_tau("t", K1, [0, 0, 0]))
        assert inv.gamma == 1.0

    def test_single_positive_generator_matches_dense(self):
        params = ChannelParams.from_tau("t", K1, [0, 0, -np.log(0.9)])
        ff = inverse_quasiprob_factored(params)
        fd = inverse_quasiprob_dense(params.dense_channel())
        assert ff.gamma == pytest.approx(1 / 0.9)
        assert ff.gamma == pytest.approx(fd.gamma, abs=1e-12)

    def test_negative_generator_costs_nothing(self):
        inv = inverse_quasiprob_factored(ChannelParams.from_tau("t", K1, [0.1, -0.2, 0]))
        assert inv.gamma == pytest.approx(np.exp(0.1))

    def test_same_map_as_dense(self):
        rng = np.random.default_rng(1)
        params = ChannelParams.from_tau("t", K2, rng.uniform(0, 0.1, len(K2)))
        ff = inverse_quasiprob_factored(params)
        fd = inverse_quasiprob_dense(params.dense_channel())
        for b in range(16):
            o = Pauli.from_index(2, b)
            assert ff.insertion_multiplier(o) == pytest.approx(
                fd.insertion_multiplier(o), abs=1e-12)
        # one-norms need not agree for anticommuting generators; the factored
        # decomposition can only cost more
        assert ff.gamma >= fd.gamma - 1e-12


class TestSubgroupInverse:
    def test_cancels_on_subgroup(self):
        lam = {label_to_index("IZ"): 0.99, label_to_index("ZZ"): 0.95,
               label_to_index("ZI"): 0.94}
        inv = inverse_quasiprob_subgroup(2, lam)
        for lab, lv in lam.items():
            s = sum(p * (1 - 2 * anticommutes_index(2, int(a), lab))
                    for a, p in zip(inv.labels, inv.p_star))
            assert s * lv == pytest.approx(1.0, abs=1e-12)

    def test_dual_insertions_are_x_type(self):
        lam = {label_to_index("IZ"): 0.99, label_to_index("ZZ"): 0.95,
               label_to_index("ZI"): 0.94}
        inv = inverse_quasiprob_subgroup(2, lam)
        from gaugepec.paulis import index_to_label

        assert sorted(index_to_label(2, int(a)) for a in inv.labels) == [
            "II", "IX", "XI", "XX"]

    def test_non_closed_set_rejected(self):
        # {IZ, ZI} without their product ZZ is not a subgroup
        with pytest.raises(NonInvertibleChannelError):
            inverse_quasiprob_subgroup(
                2, {label_to_index("IZ"): 0.9, label_to_index("ZI"): 0.9})

    def test_non_abelian_rejected(self):
        with pytest.raises(NonInvertibleChannelError):
            inverse_quasiprob_subgroup(
                1, {label_to_index("X"): 0.9, label_to_index("Y"): 0.9,
                    label_to_index("Z"): 0.9})


class TestPecExact:
    def test_learned_equals_truth_restores_ideal(self):
        truth = random_full_model(2, seed=4)
        clean = noiseless_model(2, LD2)
        c = bell_circuit(1)
        obs = Pauli.from_label("XX")
        ideal = exact_pauli_expectation(c, clean, obs)
        assert abs(ideal) == 1.0
        got = pec_expectation_exact(c, truth, truth, obs)
        assert got == pytest.approx(ideal, abs=1e-10)

    def test_theorem_gauge_equivalent_model_unbiased(self):
        rng = np.random.default_rng(7)
        clean = noiseless_model(2, LD2)
        for k in range(8):
            truth = random_full_model(2, seed=40 + k)
            eta = GaugeVector(2, per_pattern={
                1: rng.normal(0, 0.01), 2: rng.normal(0, 0.01), 3: rng.normal(0, 0.01)})
            learned = truth.apply_gauge(eta)
            c = bell_circuit(1 + k % 3)
            obs = Pauli.from_label("XX" if (1 + k % 3) % 2 else "XZ")
            ideal = exact_pauli_expectation(c, clean, obs)
            got = pec_expectation_exact(c, truth, learned, obs)
            assert got == pytest.approx(ideal, abs=1e-10)

    def test_inconsistent_baseline_is_biased(self, pair_ansatz, pair_design):
        from gaugepec.experiments import (
            build_design_matrix, exact_dataset, fit_inconsistent_baseline, harvest_b)

        settings = pair_ansatz.plan((0, 2, 4))
        design = build_design_matrix(settings, pair_ansatz)
        truth = pair_ansatz.truth_model(seed=5, lam={"ZI": 0.94, "IZ": 0.99, "ZZ": 0.95})
        harv = harvest_b(settings, design, exact_dataset(settings, truth))
        baseline = fit_inconsistent_baseline(pair_ansatz, settings, design, harv)
        c = pair_ansatz.target_settings([1])[0].to_circuit()
        obs = Pauli.from_label("IZ")
        got = pec_expectation_exact(c, truth, baseline, obs)
        ideal = 1.0  # CNOT flips |11> to |10>, so <IZ> is +1
        # bias is the closed-form split ratio of the conjugate pair
        assert got / ideal == pytest.approx(np.sqrt(0.95 / 0.99), abs=1e-10)

    def test_nonstabilizer_returns_zero(self):
        truth = random_full_model(2, seed=1)
        c = circuit(2, "00", [], "XX")
        assert pec_expectation_exact(c, truth, truth, Pauli.from_label("XX")) == 0.0


class TestGammaProperties:
    def test_gamma_is_gauge_dependent(self):
        # the overhead only moves when the gauge pushes some generator rate
        # through zero (the positive-part kink); a large shift does that
        truth = random_full_model(2, seed=4)
        c = bell_circuit(1)
        g0 = QuasiProbPlan.for_circuit(c, truth).gamma
        eta = GaugeVector(2, per_pattern={1: 0.2, 2: -0.15, 3: 0.1})
        g1 = QuasiProbPlan.for_circuit(c, truth.apply_gauge(eta)).gamma
        assert abs(g0 - g1) > 1e-6

    def test_gamma_table(self):
        truth = random_full_model(2, seed=4)
        table = gamma_table(truth)
        assert set(table) == {"prep", "meas", "cx"}
        assert all(g >= 1.0 for g in table.values())


class TestPecSampling:
    def test_noiseless_reduces_to_plain_sampling(self):
        clean = noiseless_model(2, LD2)
        c = bell_circuit(1)
        obs = Pauli.from_label("XX")
        est, diag = pec_sample(c, clean, clean, obs, samples=4000, seed=3)
        assert diag.gamma == pytest.approx(1.0)
        assert est.value == pytest.approx(1.0)
        assert diag.negative_fraction == 0.0

    def test_converges_to_exact(self):
        truth = random_full_model(2, seed=12)
        eta = GaugeVector(2, per_pattern={1: 0.005, 2: -0.004, 3: 0.008})
        learned = truth.apply_gauge(eta)
        c = bell_circuit(2)
        obs = Pauli.from_label("XZ")
        ideal = pec_expectation_exact(c, truth, learned, obs)
        est, diag = pec_sample(c, truth, learned, obs, samples=300_000, seed=5)
        assert abs(est.value - ideal) < 4 * est.stderr

    def test_sign_flip_frequency_matches_plan(self):
        truth = random_full_model(2, seed=13)
        c = bell_circuit(1)
        obs = Pauli.from_label("XX")
        est, diag = pec_sample(c, truth, truth, obs, samples=200_000, seed=8)
        sigma = np.sqrt(diag.expected_negative_fraction / 200_000)
        assert abs(diag.negative_fraction - diag.expected_negative_fraction) < 5 * sigma

    def test_determinism(self):
        truth = random_full_model(2, seed=14)
        c = bell_circuit(1)
        obs = Pauli.from_label("XX")
        e1, _ = pec_sample(c, truth, truth, obs, samples=20_000, seed=21)
        e2, _ = pec_sample(c, truth, truth, obs, samples=20_000, seed=21)
        assert e1.value == e2.value
