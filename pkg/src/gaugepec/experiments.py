"""Experiment planning, design matrices, expectation harvesting, and model
fitting.

Rows of a design matrix come from back-propagating each harvested observable
through its setting's circuit: every noise slot contributes integer
coefficients on the parameters that make up that slot's log-eigenvalue.
Two parameter bases are supported:

* ``x`` basis (restricted ansatzes): one column per (channel, Pauli label),
  SPAM channels collapsed to one column per support pattern.
* ``r`` basis (quasi-local ansatzes): one column per (layer, generator),
  with SPAM channels collapsed to one column per factor-set pattern.  The
  subset-lattice expansion keeps all coefficients integral.

``fit_self_consistent`` solves the joint system by minimum-norm (weighted)
least squares; any gauge representative is an acceptable solution, so
downstream consumers must be gauge-covariant.  ``fit_inconsistent_baseline``
reproduces the symmetric/TREX approach: even-depth rows only, conjugate
eigenvalue pairs tied together, and the prepare-zero reference folded into
the measurement channel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .models import (
    MEAS,
    PREP,
    GateSetNoiseModel,
    GaugeVector,
    pattern_label,
)
from .paulis import CliffordLayer, Pauli, clifford_mapping, index_to_label
from .simulate import (
    Circuit,
    EntanglingLayer,
    ExpectationEstimate,
    MeasureBasis,
    PrepareComputational,
    SingleQubitLayer,
    backpropagate_observable,
    exact_pauli_expectation,
    sample_counts,
)

LAMBDA_FLOOR = 1e-6


class IncompletePlanError(RuntimeError):
    """The design matrix is rank deficient beyond the gauge dimension."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotHarvestableError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Experiment settings.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSetting:
    """One learning circuit plus the observables read out from it."""

    n: int
    prep_basis: tuple[tuple[str, int], ...]  # per-qubit (char, eigen-sign)
    layer_sequence: tuple[str, ...]
    meas_basis: tuple[str, ...]
    harvested_observables: tuple[str, ...]
    tag: str = ""

    def __post_init__(self):
        for obs in self.harvested_observables:
            for i, ch in enumerate(obs):
                if ch != "I" and ch != self.meas_basis[i]:
                    raise NotHarvestableError(
                        f"{obs} is not site-wise commuting with measurement "
                        f"basis {''.join(self.meas_basis)}"
                    )

    @property
    def depth(self) -> int:
        return len(self.layer_sequence)

    def to_circuit(self) -> Circuit:
        prep_rot = tuple(
            clifford_mapping("Z", {"X": 1, "Z": 2, "Y": 3}[ch], sign)
            for ch, sign in self.prep_basis
        )
        ops = [PrepareComputational(0), SingleQubitLayer(prep_rot)]
        ops.extend(EntanglingLayer(lid) for lid in self.layer_sequence)
        ops.append(MeasureBasis(self.meas_basis))
        return Circuit(self.n, tuple(ops))

    def describe(self) -> str:
        prep = "".join(("-" if s < 0 else "") + c for c, s in self.prep_basis)
        return (
            f"[{self.tag or 'setting'}] prep={prep} layers={','.join(self.layer_sequence) or '-'} "
            f"meas={''.join(self.meas_basis)} obs={','.join(self.harvested_observables)}"
        )


def plain_prep(basis: str) -> tuple[tuple[str, int], ...]:
    return tuple((c, 1) for c in basis)


def dump_plan(settings) -> str:
    return "\n".join(f"{j:4d} {s.describe()}" for j, s in enumerate(settings))


# ---------------------------------------------------------------------------
# Design matrices.
# ---------------------------------------------------------------------------

ParamKey = tuple  # (channel_key, int key): label index for gates, pattern mask for SPAM


@dataclass
class DesignMatrix:
    matrix: np.ndarray  # integer-valued
    row_meta: list[tuple[int, str]]  # (setting index, observable label)
    param_index: dict[ParamKey, int]
    basis: str
    n: int
    layer_defs: dict[str, CliffordLayer] = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def rank(self, tol: float = 1e-9) -> int:
        return int(np.linalg.matrix_rank(self.matrix, tol=tol))

    def kernel_dim(self) -> int:
        return self.matrix.shape[1] - self.rank()

    def column_label(self, key: ParamKey) -> str:
        ch, k = key
        if ch in (PREP, MEAS):
            return f"{ch}:{pattern_label(self.n, k)}"
        return f"{ch}:{index_to_label(self.n, k)}"

    def dump(self) -> str:
        """Structured text dump, golden-file friendly."""
        cols = {v: k for k, v in self.param_index.items()}
        lines = [
            f"basis {self.basis}  rows {self.matrix.shape[0]}  cols {self.matrix.shape[1]}",
            "columns: " + " ".join(self.column_label(cols[j]) for j in range(len(cols))),
        ]
        for i, (js, obs) in enumerate(self.row_meta):
            terms = []
            for j in np.nonzero(self.matrix[i])[0]:
                c = self.matrix[i, j]
                coef = "" if c == 1 else f"{int(c)}*"
                terms.append(f"{coef}{self.column_label(cols[j])}")
            lines.append(f"row {i:4d} setting {js:4d} obs {obs}: " + " + ".join(terms))
        return "\n".join(lines)


def build_design_matrix(settings, ansatz, basis: str | None = None) -> DesignMatrix:
    """One row per (setting, harvested observable); integer coefficients over
    the ansatz's parameter index."""
    basis = basis or ansatz.basis
    if basis != ansatz.basis:
        raise ValueError(f"ansatz {ansatz.name} builds {ansatz.basis}-basis matrices")
    pindex = ansatz.param_index()
    rows = []
    meta = []
    expand_memo: dict[tuple, dict] = {}
    for js, setting in enumerate(settings):
        circ = setting.to_circuit()
        for obs in setting.harvested_observables:
            records, ideal = backpropagate_observable(
                circ, Pauli.from_label(obs), ansatz.layer_defs
            )
            if ideal == 0.0:
                raise NotHarvestableError(
                    f"observable {obs} has no deterministic ideal value in "
                    f"setting {js}"
                )
            row = np.zeros(len(pindex))
            for ref, lab in records:
                memo_key = (ref.kind, lab.x, lab.z)
                terms = expand_memo.get(memo_key)
                if terms is None:
                    terms = ansatz.expand(ref.kind, lab)
                    expand_memo[memo_key] = terms
                for key, coef in terms.items():
                    row[pindex[key]] += coef
            rows.append(row)
            meta.append((js, obs))
    return DesignMatrix(np.array(rows), meta, pindex, basis, ansatz.n, ansatz.layer_defs)


# ---------------------------------------------------------------------------
# Harvesting.
# ---------------------------------------------------------------------------


@dataclass
class HarvestResult:
    b: np.ndarray
    stderr: np.ndarray
    kept: list[int]      # surviving row indices into the design matrix
    dropped: list[tuple[int, str, float]]  # (row index, observable, estimate)


def harvest_b(settings, design: DesignMatrix, data,
              lambda_floor: float = LAMBDA_FLOOR) -> HarvestResult:
    """Log-transform expectation estimates into the right-hand side.

    ``data`` maps (setting index, observable label) to an
    ``ExpectationEstimate`` or a float (exact mode).  Estimates are
    sign-corrected by the setting's ideal value before the log; entries at or
    below the floor are dropped with a warning record instead of clamped.
    """
    b, se, kept, dropped = [], [], [], []
    ideal_cache: dict[tuple[int, str], float] = {}
    for i, (js, obs) in enumerate(design.row_meta):
        key = (js, obs)
        if key not in ideal_cache:
            circ = settings[js].to_circuit()
            _, ideal = backpropagate_observable(circ, Pauli.from_label(obs), design.layer_defs)
            ideal_cache[key] = ideal
        est = data[key]
        if isinstance(est, ExpectationEstimate):
            value, err = est.value, est.stderr
        else:
            value, err = float(est), 0.0
        corrected = value * ideal_cache[key]
        if corrected <= lambda_floor:
            dropped.append((i, obs, corrected))
            continue
        b.append(-np.log(corrected))
        se.append(err / corrected)
        kept.append(i)
    if dropped:
        warnings.warn(
            f"dropped {len(dropped)} rows with estimates at or below the "
            f"{lambda_floor} floor", RuntimeWarning, stacklevel=2,
        )
    return HarvestResult(np.array(b), np.array(se), kept, dropped)


# ---------------------------------------------------------------------------
# Fits.
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    params: np.ndarray
    residual: float
    rank: int
    kernel_dim: int
    covariance_diag: np.ndarray
    basis: str


def fit_self_consistent(design: DesignMatrix, harvest: HarvestResult,
                        gauge_dim: int | None = None,
                        gauge_basis=None) -> FitResult:
    """Minimum-norm (weighted) least squares over all kept rows.

    The kernel of a complete plan is exactly the gauge space, so the returned
    point is one arbitrary gauge representative.  If the kernel is larger
    than the declared gauge dimension the plan is incomplete and the extra
    null direction is reported as a witness.
    """
    f = design.matrix[harvest.kept]
    b = harvest.b
    if harvest.stderr.size and np.any(harvest.stderr > 0):
        w = 1.0 / np.where(harvest.stderr > 0, harvest.stderr, harvest.stderr[harvest.stderr > 0].min())
        fw = f * w[:, None]
        bw = b * w
    else:
        fw, bw = f, b
    sol, _, rank, sing = np.linalg.lstsq(fw, bw, rcond=1e-10)
    kernel_dim = f.shape[1] - rank
    if gauge_dim is not None and kernel_dim > gauge_dim:
        witness = _missing_direction(fw, gauge_basis)
        raise IncompletePlanError(
            f"plan incomplete: kernel dimension {kernel_dim} exceeds gauge "
            f"dimension {gauge_dim}", witness=witness,
        )
    residual = float(np.linalg.norm(f @ sol - b))
    gram = fw.T @ fw
    cov = np.linalg.pinv(gram, rcond=1e-12).diagonal().copy()
    return FitResult(sol, residual, int(rank), int(kernel_dim), cov, design.basis)


def _missing_direction(f: np.ndarray, gauge_basis):
    _, s, vt = np.linalg.svd(f)
    null = vt[np.sum(s > 1e-9 * s[0]):]
    if gauge_basis is None or not len(gauge_basis):
        return null[0] if len(null) else None
    g = np.array(gauge_basis, dtype=float)
    for v in null:
        w = v - g.T @ np.linalg.lstsq(g.T, v, rcond=None)[0]
        if np.linalg.norm(w) > 1e-6:
            return w / np.linalg.norm(w)
    return None


def fit_inconsistent_baseline(ansatz, settings, design: DesignMatrix,
                              harvest: HarvestResult) -> GateSetNoiseModel:
    """Symmetric / TREX baseline fit.

    Uses even-depth rows only.  The prepare-zero reference rows give combined
    SPAM values per pattern, which are subtracted from the even-depth rows
    (readout-error extinction: state-preparation error is silently attributed
    to measurement).  Gate parameters are fitted with conjugate orbits tied,
    splitting every learnable pair product evenly.
    """
    spam_s: dict[int, list[float]] = {}
    even_rows = []
    kept_pos = {row_i: pos for pos, row_i in enumerate(harvest.kept)}
    for row_i, (js, obs) in enumerate(design.row_meta):
        if row_i not in kept_pos:
            continue
        setting = settings[js]
        bval = harvest.b[kept_pos[row_i]]
        if setting.depth == 0:
            pt = Pauli.from_label(obs).pattern
            spam_s.setdefault(pt, []).append(bval)
        elif setting.depth % 2 == 0:
            even_rows.append((row_i, js, obs, bval))
    if not spam_s:
        raise ValueError("baseline needs a prepare-zero SPAM reference")
    s_of = {pt: float(np.mean(v)) for pt, v in spam_s.items()}

    orbit_cols, orbit_of = ansatz.symmetric_orbits()
    rows, rhs = [], []
    for row_i, js, obs, bval in even_rows:
        pt = Pauli.from_label(obs).pattern
        if pt not in s_of:
            raise ValueError(
                f"no SPAM reference for pattern {pattern_label(ansatz.n, pt)}"
            )
        coeffs = np.zeros(len(orbit_cols))
        circ = settings[js].to_circuit()
        records, _ = backpropagate_observable(circ, Pauli.from_label(obs), ansatz.layer_defs)
        for ref, lab in records:
            if ref.kind in (PREP, MEAS):
                continue
            for key, coef in ansatz.gate_symmetric_expand(ref.kind, lab).items():
                coeffs[orbit_of[key]] += coef
        rows.append(coeffs)
        rhs.append(bval - s_of[pt])
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=1e-10)
    return ansatz.model_from_baseline(dict(zip(orbit_cols, sol)), s_of)


# ---------------------------------------------------------------------------
# Data sources.
# ---------------------------------------------------------------------------


def exact_dataset(settings, truth: GateSetNoiseModel) -> dict:
    data = {}
    for js, setting in enumerate(settings):
        circ = setting.to_circuit()
        for obs in setting.harvested_observables:
            data[(js, obs)] = exact_pauli_expectation(circ, truth, Pauli.from_label(obs))
    return data


def sampled_dataset(settings, truth: GateSetNoiseModel, shots: int,
                    twirls: int, seed: int) -> dict:
    data = {}
    for js, setting in enumerate(settings):
        circ = setting.to_circuit()
        est, _ = sample_counts(
            circ, truth, shots=shots, twirls=twirls, seed=seed + 7919 * js,
            observables=list(setting.harvested_observables),
        )
        for obs in setting.harvested_observables:
            data[(js, obs)] = est[obs]
    return data
