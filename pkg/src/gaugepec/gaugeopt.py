"""Gauge optimization of the mitigation overhead.

The learned parameters are only determined up to the gauge kernel of the
design matrix, and the quasi-local overhead ``gamma = exp(sum of positive
gate generator rates)`` is *not* gauge invariant.  Minimizing
``sum max(tau, 0)`` over the gate layers is a convex piecewise-linear
problem; two strategies are provided:

* one-step: minimize over the full parameter vector subject to a residual
  ball ``||F r - b|| <= epsilon`` chosen a priori;
* two-step: pseudo-inverse first, then minimize along the gauge kernel only
  (the residual stays pinned at its least-squares value).  This is the
  weaker baseline: its feasible set is a subset of the one-step set at
  ``epsilon`` equal to the least-squares residual.

SPAM channels contribute to the residual but are excluded from the
objective: their errors are mitigated once per circuit, while gate errors
accumulate with depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .experiments import DesignMatrix, HarvestResult
from .models import MEAS, PREP, gauge_kernel_basis


class InfeasibleEpsilonError(RuntimeError):
    pass


SOLVER_TOL = 1e-9


@dataclass
class GaugeOptResult:
    r_star: np.ndarray
    gamma_star: float
    residual: float
    epsilon_used: float
    iterations: int
    objective_trace: tuple[float, float]  # (objective at start point, at optimum)

    def dump(self) -> str:
        lines = [
            f"gamma_star {self.gamma_star!r}",
            f"objective_start {self.objective_trace[0]!r}",
            f"objective_end {self.objective_trace[1]!r}",
            f"residual {self.residual!r}",
            f"epsilon {self.epsilon_used!r}",
            f"solver_iterations {self.iterations}",
        ]
        return "\n".join(lines)


def _solve(problem: "cp.Problem"):
    """Solve to a clean optimum, falling back across cone solvers when the
    first one only certifies an inaccurate solution."""
    import warnings

    last = None
    for solver, kwargs in ((cp.CLARABEL, {}), (cp.ECOS, {"abstol": 1e-9}),
                           (cp.SCS, {"eps": 1e-9})):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                problem.solve(solver=solver, **kwargs)
        except cp.error.SolverError:
            continue
        last = problem.status
        if problem.status == cp.OPTIMAL:
            return
        if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            raise InfeasibleEpsilonError(f"solver status {problem.status}")
    if last == cp.OPTIMAL_INACCURATE:
        return  # accepted: all solvers agree up to their tolerance
    raise InfeasibleEpsilonError(f"solver status {last}")


def _gate_tau_maps(design: DesignMatrix, ansatz):
    """One (selector, tau_from_r) pair per gate layer: tau = T r[cols]."""
    K = ansatz.K
    t_local = K.tau_from_x_matrix @ K.x_from_r_matrix
    maps = []
    for lid in ansatz.layer_order:
        cols = [design.param_index[(lid, int(idx))] for idx in K.members]
        maps.append((np.array(cols), t_local))
    return maps


def _weighted_system(design: DesignMatrix, harvest: HarvestResult):
    f = design.matrix[harvest.kept]
    b = harvest.b
    if harvest.stderr.size and np.any(harvest.stderr > 0):
        pos = harvest.stderr[harvest.stderr > 0]
        w = 1.0 / np.where(harvest.stderr > 0, harvest.stderr, pos.min())
        return f * w[:, None], b * w
    return f, b


def pseudo_inverse_point(design: DesignMatrix, harvest: HarvestResult):
    """Minimum-norm least-squares solution and its residual in the (weighted)
    norm used by the optimizer."""
    fw, bw = _weighted_system(design, harvest)
    r0, *_ = np.linalg.lstsq(fw, bw, rcond=1e-10)
    return r0, float(np.linalg.norm(fw @ r0 - bw))


def gamma_of_params(design: DesignMatrix, ansatz, r: np.ndarray) -> float:
    """Gate-layer overhead at a parameter point."""
    total = 0.0
    for cols, t_local in _gate_tau_maps(design, ansatz):
        tau = t_local @ r[cols]
        total += np.clip(tau, 0.0, None).sum()
    return float(np.exp(total))


def gauge_optimize(design: DesignMatrix, harvest: HarvestResult, ansatz,
                   epsilon: float | None = None,
                   epsilon_factor: float = 1.05) -> GaugeOptResult:
    """One-step overhead minimization under a residual-norm ball.

    ``epsilon`` defaults to ``epsilon_factor`` times the least-squares
    residual: a slightly looser fit bought for a much smaller overhead.
    """
    fw, bw = _weighted_system(design, harvest)
    r0, ls_residual = pseudo_inverse_point(design, harvest)
    if epsilon is None:
        epsilon = epsilon_factor * ls_residual
    if epsilon < ls_residual * (1.0 - 1e-12):
        raise InfeasibleEpsilonError(
            f"epsilon {epsilon} below the least-squares residual {ls_residual}"
        )
    r = cp.Variable(design.matrix.shape[1])
    objective = 0
    for cols, t_local in _gate_tau_maps(design, ansatz):
        objective += cp.sum(cp.pos(t_local @ r[cols]))
    constraints = [cp.norm2(fw @ r - bw) <= epsilon]
    problem = cp.Problem(cp.Minimize(objective), constraints)
    _solve(problem)
    r_star = np.asarray(r.value)
    residual = float(np.linalg.norm(fw @ r_star - bw))
    obj_start = float(np.log(gamma_of_params(design, ansatz, r0)))
    obj_end = float(problem.value)
    result = GaugeOptResult(
        r_star=r_star,
        gamma_star=float(np.exp(obj_end)),
        residual=residual,
        epsilon_used=float(epsilon),
        iterations=int(problem.solver_stats.num_iters or 0),
        objective_trace=(obj_start, obj_end),
    )
    if result.residual > result.epsilon_used + 1e-9:
        raise InfeasibleEpsilonError(
            f"solver returned infeasible point: residual {result.residual} "
            f"> epsilon {result.epsilon_used}"
        )
    return result


def gauge_optimize_two_step(design: DesignMatrix, harvest: HarvestResult,
                            ansatz) -> GaugeOptResult:
    """Pseudo-inverse followed by minimization along the gauge kernel only."""
    fw, bw = _weighted_system(design, harvest)
    r0, ls_residual = pseudo_inverse_point(design, harvest)
    kernel = gauge_kernel_basis(ansatz)
    if not kernel:
        gamma0 = gamma_of_params(design, ansatz, r0)
        return GaugeOptResult(r0, gamma0, ls_residual, ls_residual, 0,
                              (float(np.log(gamma0)),) * 2)
    s = np.array(kernel).T  # params x n_gauge
    eta = cp.Variable(s.shape[1])
    objective = 0
    for cols, t_local in _gate_tau_maps(design, ansatz):
        objective += cp.sum(cp.pos(t_local @ (r0[cols] + s[cols] @ eta)))
    problem = cp.Problem(cp.Minimize(objective))
    _solve(problem)
    r_star = r0 + s @ np.asarray(eta.value)
    residual = float(np.linalg.norm(fw @ r_star - bw))
    obj_start = float(np.log(gamma_of_params(design, ansatz, r0)))
    return GaugeOptResult(
        r_star=r_star,
        gamma_star=float(np.exp(problem.value)),
        residual=residual,
        epsilon_used=ls_residual,
        iterations=int(problem.solver_stats.num_iters or 0),
        objective_trace=(obj_start, float(problem.value)),
    )
