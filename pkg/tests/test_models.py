import json

import numpy as np
import pytest

from gaugepec.models import (
    GateSetNoiseModel,
    GaugeDimensionError,
    GaugeVector,
    LabelChannel,
    PatternChannel,
    QuasiLocalChannel,
    gauge_kernel_basis,
    pattern_from_label,
    pattern_label,
)
from gaugepec.paulis import CliffordLayer, Pauli
from gaugepec.quasilocal import ChannelParams, FactorSet, GeneratorSet
from gaugepec.ring import RingAnsatz
from gaugepec.simulate import EntanglingLayer, circuit, exact_pauli_expectation, single_layer

from conftest import random_full_model


class TestGaugeVector:
    def test_pattern_label_roundtrip(self):
        assert pattern_label(4, pattern_from_label("0110")) == "0110"

    def test_empty_pattern_zero(self):
        eta = GaugeVector(2, per_pattern={1: 0.3})
        assert eta.of_pattern(0) == 0.0
        with pytest.raises(ValueError):
            GaugeVector(2, per_pattern={0: 0.1})

    def test_per_qubit_additive(self):
        eta = GaugeVector.qubit([0.1, 0.2, 0.4])
        assert eta.of_pattern(0b101) == pytest.approx(0.5)

    def test_exactly_one_flavor(self):
        with pytest.raises(ValueError):
            GaugeVector(2, per_qubit=np.zeros(2), per_pattern={1: 0.0})


class TestApplyGauge:
    def test_identity_gauge_is_noop(self):
        m = random_full_model(2, seed=0)
        eta = GaugeVector(2, per_pattern={})
        m2 = m.apply_gauge(eta)
        for a in range(1, 16):
            p = Pauli.from_index(2, a)
            for slot in ("prep", "meas", "cx"):
                assert m2.x_of(slot, p) == pytest.approx(m.x_of(slot, p), abs=1e-15)

    def test_gauge_and_inverse_cancel(self):
        m = random_full_model(2, seed=1)
        eta = GaugeVector(2, per_pattern={1: 0.02, 2: -0.01, 3: 0.015})
        m2 = m.apply_gauge(eta).apply_gauge(eta.negated())
        for a in range(1, 16):
            p = Pauli.from_index(2, a)
            for slot in ("prep", "meas", "cx"):
                assert m2.x_of(slot, p) == pytest.approx(m.x_of(slot, p), abs=1e-12)

    def test_single_pattern_shift(self):
        m = random_full_model(2, seed=2)
        eta = GaugeVector(2, per_pattern={2: 0.05})  # pattern "01"
        m2 = m.apply_gauge(eta)
        for a in range(1, 16):
            p = Pauli.from_index(2, a)
            expected = m.x_of("prep", p) + (0.05 if p.pattern == 2 else 0.0)
            assert m2.x_of("prep", p) == pytest.approx(expected, abs=1e-12)
            expected_m = m.x_of("meas", p) - (0.05 if p.pattern == 2 else 0.0)
            assert m2.x_of("meas", p) == pytest.approx(expected_m, abs=1e-12)

    def test_spam_stays_generalized_depolarizing(self):
        m = random_full_model(3, seed=3, layer_defs={"cx": CliffordLayer.cnots(3, [(0, 1)])})
        rng = np.random.default_rng(7)
        eta = GaugeVector(3, per_pattern={pt: rng.normal(0, 0.01) for pt in range(1, 8)})
        m2 = m.apply_gauge(eta)
        for slot in ("prep", "meas"):
            by_pattern = {}
            for a in range(1, 64):
                p = Pauli.from_index(3, a)
                by_pattern.setdefault(p.pattern, []).append(m2.x_of(slot, p))
            for vals in by_pattern.values():
                assert np.ptp(vals) < 1e-12

    def test_gauge_invariance_of_expectations(self):
        # the operational content: no experiment distinguishes the models
        rng = np.random.default_rng(11)
        layer_defs = {"cx01": CliffordLayer.cnots(3, [(0, 1)]),
                      "cx12": CliffordLayer.cnots(3, [(1, 2)])}
        from gaugepec.paulis import CLIFFORD_1Q

        names = list(CLIFFORD_1Q)
        for trial in range(12):
            m = random_full_model(3, seed=100 + trial, layer_defs=layer_defs)
            eta = GaugeVector(3, per_pattern={pt: rng.normal(0, 0.02) for pt in range(1, 8)})
            m2 = m.apply_gauge(eta)
            depth = rng.integers(0, 6)
            mid = []
            for _ in range(depth):
                mid.append(single_layer(rng.choice(names, size=3)))
                mid.append(EntanglingLayer(str(rng.choice(["cx01", "cx12"]))))
            basis = "".join(rng.choice(list("XYZ"), size=3))
            c = circuit(3, int(rng.integers(0, 8)), mid, basis)
            supp = [i for i in range(3) if rng.random() < 0.8] or [1]
            obs = Pauli.from_label("".join(basis[i] if i in supp else "I" for i in range(3)))
            e1 = exact_pauli_expectation(c, m, obs)
            e2 = exact_pauli_expectation(c, m2, obs)
            assert e1 == pytest.approx(e2, abs=1e-10)

    def test_per_qubit_model_rejects_wrong_class(self):
        az = RingAnsatz(4)
        truth = az.truth_model(seed=0)
        with pytest.raises(GaugeDimensionError):
            truth.apply_gauge(GaugeVector(4, per_pattern={1: 0.1}))
        truth.apply_gauge(GaugeVector.qubit([0.01, 0.0, -0.01, 0.02]))  # fine

    def test_gauged_model_flagged_nonphysical(self):
        m = random_full_model(2, seed=5)
        assert m.physical
        assert not m.apply_gauge(GaugeVector(2, per_pattern={1: 0.01})).physical


class TestSerialization:
    def test_roundtrip_bit_exact(self):
        m = random_full_model(2, seed=8)
        text = m.to_json()
        m2 = GateSetNoiseModel.from_json(text, m.layer_defs)
        assert m2.to_json() == text
        for a in range(1, 16):
            p = Pauli.from_index(2, a)
            for slot in ("prep", "meas", "cx"):
                assert m2.x_of(slot, p) == m.x_of(slot, p)

    def test_restricted_channels_roundtrip(self):
        prep = PatternChannel(2, {1: 0.004, 2: 0.006, 3: 0.012})
        gate = LabelChannel.from_label_dict(2, {"IZ": 0.01, "ZZ": 0.05, "ZI": 0.02})
        m = GateSetNoiseModel(2, prep, prep, {"cx": gate},
                              {"cx": CliffordLayer.cnots(2, [(0, 1)])})
        text = m.to_json()
        m2 = GateSetNoiseModel.from_json(text, m.layer_defs)
        assert m2.to_json() == text


class TestGaugeKernelBasis:
    def test_ring_sizes(self):
        assert len(gauge_kernel_basis(RingAnsatz(12))) == 12
        assert len(gauge_kernel_basis(RingAnsatz(92))) == 92

    def test_pair_size(self, pair_ansatz):
        assert len(gauge_kernel_basis(pair_ansatz)) == 3

    def test_annihilated_by_design(self, pair_ansatz, pair_design):
        _, design = pair_design
        for y in gauge_kernel_basis(pair_ansatz):
            assert np.linalg.norm(design.matrix @ y) < 1e-12
