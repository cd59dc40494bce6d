import warnings

import numpy as np
import pytest

from gaugepec.experiments import (
    build_design_matrix,
    exact_dataset,
    harvest_b,
    sampled_dataset,
)
from gaugepec.gaugeopt import (
    GaugeOptResult,
    InfeasibleEpsilonError,
    gamma_of_params,
    gauge_optimize,
    gauge_optimize_two_step,
    pseudo_inverse_point,
)
from gaugepec.ring import RingAnsatz


@pytest.fixture(scope="module")
def ring4_exact():
    az = RingAnsatz(4)
    settings = az.plan((2, 4))
    design = build_design_matrix(settings, az)
    truth = az.truth_model(seed=2, magnitude=0.02, asymmetry=0.03)
    harv = harvest_b(settings, design, exact_dataset(settings, truth))
    return az, design, harv


@pytest.fixture(scope="module")
def ring4_noisy():
    az = RingAnsatz(4)
    settings = az.plan((2, 4))
    design = build_design_matrix(settings, az)
    truth = az.truth_model(seed=2, magnitude=0.02, asymmetry=0.03)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data = sampled_dataset(settings, truth, shots=4000, twirls=5, seed=77)
    harv = harvest_b(settings, design, data)
    return az, design, harv


class TestOneStep:
    def test_noiseless_epsilon_zero(self):
        az = RingAnsatz(4)
        settings = az.plan((2,))
        design = build_design_matrix(settings, az)
        truth = az.truth_model(seed=0, magnitude=0.0, asymmetry=0.0)
        harv = harvest_b(settings, design, exact_dataset(settings, truth))
        res = gauge_optimize(design, harv, az, epsilon=0.0)
        assert res.gamma_star == pytest.approx(1.0, abs=1e-6)
        assert np.max(np.abs(res.r_star)) < 1e-6

    def test_monotone_in_epsilon(self, ring4_noisy):
        az, design, harv = ring4_noisy
        _, ls = pseudo_inverse_point(design, harv)
        gammas = [gauge_optimize(design, harv, az, epsilon=f * ls).gamma_star
                  for f in (1.0, 1.05, 1.5, 3.0)]
        for a, b in zip(gammas, gammas[1:]):
            assert b <= a + 1e-6

    def test_residual_certificate(self, ring4_noisy):
        az, design, harv = ring4_noisy
        res = gauge_optimize(design, harv, az)
        assert res.residual <= res.epsilon_used + 1e-9
        assert res.objective_trace[1] <= res.objective_trace[0] + 1e-9

    def test_infeasible_epsilon(self, ring4_noisy):
        az, design, harv = ring4_noisy
        _, ls = pseudo_inverse_point(design, harv)
        with pytest.raises(InfeasibleEpsilonError):
            gauge_optimize(design, harv, az, epsilon=0.5 * ls)

    def test_dump_format(self, ring4_noisy):
        az, design, harv = ring4_noisy
        res = gauge_optimize(design, harv, az)
        text = res.dump()
        assert "gamma_star" in text and "epsilon" in text


class TestTwoStep:
    def test_ordering(self, ring4_noisy):
        az, design, harv = ring4_noisy
        r0, ls = pseudo_inverse_point(design, harv)
        g0 = gamma_of_params(design, az, r0)
        two = gauge_optimize_two_step(design, harv, az)
        one = gauge_optimize(design, harv, az, epsilon=ls)
        assert two.gamma_star <= g0 + 1e-7
        assert one.gamma_star <= two.gamma_star + 1e-7

    def test_two_step_keeps_residual(self, ring4_noisy):
        az, design, harv = ring4_noisy
        _, ls = pseudo_inverse_point(design, harv)
        two = gauge_optimize_two_step(design, harv, az)
        assert two.residual == pytest.approx(ls, rel=1e-9)

    def test_zero_kernel_returns_pseudo_inverse(self, ring4_exact):
        az, design, harv = ring4_exact

        class NoGauge:
            layer_order = az.layer_order
            K = az.K

            @staticmethod
            def elementary_gauge_vectors():
                return []

            @staticmethod
            def param_shift_for_gauge(eta):  # pragma: no cover
                raise AssertionError

        ng = NoGauge()
        r0, ls = pseudo_inverse_point(design, harv)
        res = gauge_optimize_two_step(design, harv, ng)
        assert np.allclose(res.r_star, r0)
        assert res.gamma_star == pytest.approx(gamma_of_params(design, az, r0))

    def test_comparison_point_invariant(self, ring4_exact):
        # one-step at the LS residual minimizes over a superset of the
        # two-step feasible set
        az, design, harv = ring4_exact
        two = gauge_optimize_two_step(design, harv, az)
        one = gauge_optimize(design, harv, az, epsilon=two.epsilon_used)
        assert one.gamma_star <= two.gamma_star + 1e-7
