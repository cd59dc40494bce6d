from collections import Counter

import numpy as np
import pytest

from gaugepec.experiments import (
    build_design_matrix,
    exact_dataset,
    fit_inconsistent_baseline,
    fit_self_consistent,
    harvest_b,
)
from gaugepec.models import MEAS, PREP, GaugeVector, gauge_kernel_basis
from gaugepec.paulis import Pauli
from gaugepec.ring import DEPTH1_BASES, RingAnsatz, _repeat, ring_layers
from gaugepec.simulate import backpropagate_observable, exact_pauli_expectation

FAMILIES = {
    "F1": {"IZ", "ZZ"}, "F2": {"XI", "XX"},
    "F3": {"ZY", "IY"}, "F4": {"YX", "YI"},
}


class TestPlan:
    def test_multiple_of_four_required(self):
        with pytest.raises(ValueError):
            RingAnsatz(10)

    def test_setting_count(self, ring12):
        plan = ring12.plan((4, 12, 24))
        assert len(plan) == 1 + 2 * 17 + 2 * 3 * 9 == 89
        tags = Counter(s.tag.split(":")[0] for s in plan)
        assert tags == {"spam": 1, "depth-1": 34, "depth-even": 54}

    def test_depth1_bases_consistent_with_conjugation(self, ring12):
        # output basis supports the conjugated input label
        layer = ring12.layer_defs["even"]
        for unit_in, unit_out in DEPTH1_BASES:
            basis_in = _repeat(unit_in, 12)
            image = layer.conjugate(Pauli.from_label(basis_in))
            out = _repeat(unit_out, 12)
            for i, c in enumerate(image.label):
                if c != "I":
                    assert out[i] == c

    def test_param_count_28n(self, ring12):
        assert len(ring12.param_index()) == 28 * 12

    def test_rank_and_kernel(self, ring12_design):
        _, design = ring12_design
        assert design.rank() == 27 * 12
        assert design.kernel_dim() == 12

    def test_gauge_basis_annihilated(self, ring12, ring12_design):
        _, design = ring12_design
        basis = gauge_kernel_basis(ring12)
        assert len(basis) == 12
        for y in basis:
            assert np.linalg.norm(design.matrix @ y) < 1e-9

    def test_92q_param_count(self):
        az = RingAnsatz(92)
        assert len(az.param_index()) == 28 * 92 == 2576
        assert az.gauge_dim == 92


class TestStaircase:
    def test_ideal_values(self, ring12):
        circ = ring12.staircase_circuit(4)
        for q in range(12):
            obs = Pauli.from_label("".join("Z" if i == q else "I" for i in range(12)))
            _, ideal = backpropagate_observable(circ, obs, ring12.layer_defs)
            assert ideal == 1.0

    def test_weight1_propagation(self, ring12):
        # every Z observable stays weight 1 between blocks
        circ = ring12.staircase_circuit(2)
        obs = Pauli.from_label("Z" + "I" * 11)
        records, _ = backpropagate_observable(circ, obs, ring12.layer_defs)
        assert records[0][1].weight == 1  # preparation label

    def test_all_four_families_over_four_blocks(self, ring12):
        circ = ring12.staircase_circuit(4)
        for q in range(12):
            obs = Pauli.from_label("".join("Z" if i == q else "I" for i in range(12)))
            records, _ = backpropagate_observable(circ, obs, ring12.layer_defs)
            fams = set()
            for ref, lab in records:
                if ref.kind in (PREP, MEAS):
                    continue
                for c, t in ring12.layer_defs[ref.kind].cnot_pairs:
                    sub = lab.label[c] + lab.label[t]
                    for fam, members in FAMILIES.items():
                        if sub in members:
                            fams.add(fam)
            assert fams == {"F1", "F2", "F3", "F4"}

    def test_prep_and_meas_on_different_qubits(self, ring12):
        circ = ring12.staircase_circuit(1)
        obs = Pauli.from_label("Z" + "I" * 11)
        records, _ = backpropagate_observable(circ, obs, ring12.layer_defs)
        prep_label = records[0][1]
        assert prep_label.pattern != obs.pattern


class TestLearning:
    def test_exact_recovery_of_learnable_projections(self, ring12, ring12_design):
        settings, design = ring12_design
        truth = ring12.truth_model(seed=3, magnitude=0.015, asymmetry=0.02)
        harv = harvest_b(settings, design, exact_dataset(settings, truth))
        basis = gauge_kernel_basis(ring12)
        fit = fit_self_consistent(design, harv, gauge_dim=12, gauge_basis=basis)
        assert fit.residual < 1e-9
        truth_r = _truth_params(ring12, design, truth)
        g = np.array(basis)
        q, _ = np.linalg.qr(g.T)
        proj = lambda v: v - q @ (q.T @ v)
        assert np.max(np.abs(proj(fit.params) - proj(truth_r))) < 1e-10

    def test_staircase_bias_comparison(self, ring12, ring12_design):
        settings, design = ring12_design
        truth = ring12.truth_model(seed=3, magnitude=0.015, asymmetry=0.02)
        harv = harvest_b(settings, design, exact_dataset(settings, truth))
        fit = fit_self_consistent(design, harv, gauge_dim=12)
        fitted = ring12.model_from_params(fit.params)
        baseline = fit_inconsistent_baseline(ring12, settings, design, harv)
        bias_c, bias_b = [], []
        for name, circ, obs in ring12.targets((4,)):
            unmit = exact_pauli_expectation(circ, truth, obs)
            bias_c.append(abs(unmit / exact_pauli_expectation(circ, fitted, obs) - 1))
            bias_b.append(abs(unmit / exact_pauli_expectation(circ, baseline, obs) - 1))
        assert np.median(bias_c) < np.median(bias_b)
        assert np.median(bias_c) < 1e-10

    def test_gauge_transformed_model_same_predictions(self, ring12):
        truth = ring12.truth_model(seed=5, magnitude=0.01, asymmetry=0.01)
        eta = GaugeVector.qubit(np.linspace(-0.004, 0.004, 12))
        gauged = truth.apply_gauge(eta)
        for name, circ, obs in ring12.targets((2,))[:6]:
            assert exact_pauli_expectation(circ, truth, obs) == pytest.approx(
                exact_pauli_expectation(circ, gauged, obs), abs=1e-10)


def _truth_params(az, design, truth):
    out = np.zeros(len(design.param_index))
    prep_r = {int(p): r for p, r in zip(az.K.patterns, truth.prep.params.r)}
    meas_r = {int(p): r for p, r in zip(az.K.patterns, truth.meas.params.r)}
    for (ch, key), col in design.param_index.items():
        if ch == PREP:
            out[col] = prep_r[key]
        elif ch == MEAS:
            out[col] = meas_r[key]
        else:
            out[col] = truth.layers[ch].params.r[az.K.position[key]]
    return out


@pytest.mark.slow
def test_92q_design_shape():
    az = RingAnsatz(92)
    design = build_design_matrix(az.plan(), az)
    assert design.shape[1] == 2576
    assert np.array_equal(design.matrix, np.round(design.matrix))
