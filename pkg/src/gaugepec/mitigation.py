"""Probabilistic error cancellation with a learned gate-set model.

A channel inverse ``Lambda^-1`` is a quasi-probability mixture of Pauli
insertions: sample ``P_a`` with probability ``q_a = |p*_a| / gamma`` and
multiply the estimator by ``gamma * sign(p*_a)``.  Per-slot plans come in
three shapes:

* dense      -- p* over all 4^n labels (inverse transform of 1/lambda);
* subgroup   -- same construction restricted to a multiplicatively closed
                label set (restricted models such as the Z-only pair);
* factored   -- per-generator inversion of a quasi-local channel; factors
                with tau <= 0 are proper channels and cost nothing, the rest
                contribute exp(tau) to the overhead.

Self-consistency means every slot's plan comes from the *same* learned model
(one gauge representative across preparation, layers, and measurement); the
estimator is then unbiased regardless of which representative was learned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import (
    MEAS,
    PREP,
    GateSetNoiseModel,
    LabelChannel,
    PatternChannel,
    QuasiLocalChannel,
)
from .paulis import (
    Pauli,
    PauliChannel,
    anticommutes_index,
    eigenvalues_to_rates,
    index_to_label,
    label_to_index,
)
from .quasilocal import ChannelParams
from .simulate import (
    Circuit,
    ExpectationEstimate,
    SamplingError,
    _check_observable,
    _CompiledCircuit,
    _error_sampler,
    _popcount_array,
    backpropagate_observable,
)

MAX_DENSE_INVERSE_QUBITS = 6


class NonInvertibleChannelError(ValueError):
    pass


@dataclass
class DenseInverse:
    """Quasi-probability representation of Lambda^-1 over an explicit label
    set (the full 4^n labels, or a closed subgroup of them)."""

    n: int
    labels: np.ndarray       # dense label indices
    p_star: np.ndarray
    sgn: np.ndarray
    q: np.ndarray
    gamma: float

    def insertion_multiplier(self, observable: Pauli) -> float:
        """Exact sum over insertions: sum_a p*_a (-1)^<a, o>."""
        total = 0.0
        for a, p in zip(self.labels, self.p_star):
            s = -1.0 if anticommutes_index(self.n, int(a), observable.index) else 1.0
            total += p * s
        return float(total)


@dataclass
class FactoredInverse:
    """Per-generator inverse of a quasi-local channel."""

    n: int
    gen_labels: np.ndarray   # dense label indices of the generators
    taus: np.ndarray
    omegas: np.ndarray
    gamma: float

    def insertion_multiplier(self, observable: Pauli) -> float:
        total = 1.0
        obs_idx = observable.index
        for g, w in zip(self.gen_labels, self.omegas):
            s = -1.0 if anticommutes_index(self.n, int(g), obs_idx) else 1.0
            p_id = (1.0 - w) / (1.0 - 2.0 * w)
            p_g = -w / (1.0 - 2.0 * w)
            total *= p_id + p_g * s
        return float(total)


def inverse_quasiprob_dense(ch: PauliChannel) -> DenseInverse:
    """Dense inverse: ``p*_a = 4^-n sum_b (-1)^<a,b> / lambda_b``."""
    if ch.n > MAX_DENSE_INVERSE_QUBITS:
        raise ValueError(
            f"dense inversion limited to {MAX_DENSE_INVERSE_QUBITS} qubits"
        )
    if not ch.strictly_positive:
        raise NonInvertibleChannelError("channel has non-positive eigenvalues")
    inv = PauliChannel.from_eigenvalues(ch.n, 1.0 / ch.eigenvalues)
    p_star = eigenvalues_to_rates(inv).rates
    gamma = float(np.abs(p_star).sum())
    return DenseInverse(
        n=ch.n,
        labels=np.arange(4**ch.n),
        p_star=p_star,
        sgn=np.where(p_star < 0, -1, 1).astype(np.int8),
        q=np.abs(p_star) / gamma,
        gamma=gamma,
    )


def inverse_quasiprob_subgroup(n: int, lam: dict[int, float]) -> DenseInverse:
    """Inverse of a channel known only on an abelian, multiplicatively closed
    label set S (identity implied): insertions are drawn from a dual set of
    Paulis whose commutation pairing with S's generators is the identity
    matrix, so the signed mixture scales every S eigenvalue by 1/lambda.
    Labels outside S are affected arbitrarily; this restricted inverse is
    only valid for observables whose noise path stays inside S.
    """
    labels = sorted(set(lam) - {0})
    lam_full = {0: 1.0, **lam}
    if any(v <= 0 for v in lam_full.values()):
        raise NonInvertibleChannelError("channel has non-positive eigenvalues")
    gens = _independent_generators(n, labels)
    if (1 << len(gens)) != len(labels) + 1:
        raise NonInvertibleChannelError("label set is not a closed subgroup")
    for a in labels:
        for b in labels:
            if anticommutes_index(n, a, b):
                raise NonInvertibleChannelError("label set is not abelian")
    duals = _dual_basis(n, gens)
    members = sorted(labels + [0])
    dual_group = []
    for mask in range(1 << len(duals)):
        x = z = 0
        for i, d in enumerate(duals):
            if (mask >> i) & 1:
                p = Pauli.from_index(n, d)
                x ^= p.x
                z ^= p.z
        dual_group.append(Pauli(n, x, z, 1).index)
    order = len(members)
    p_star = np.empty(order)
    for i, d in enumerate(dual_group):
        total = 0.0
        for s in members:
            sign = -1.0 if anticommutes_index(n, d, s) else 1.0
            total += sign / lam_full[s]
        p_star[i] = total / order
    gamma = float(np.abs(p_star).sum())
    return DenseInverse(
        n=n,
        labels=np.array(dual_group),
        p_star=p_star,
        sgn=np.where(p_star < 0, -1, 1).astype(np.int8),
        q=np.abs(p_star) / gamma,
        gamma=gamma,
    )


def _independent_generators(n: int, labels) -> list[int]:
    """Greedy GF(2)-independent generating subset of the label set."""
    basis: list[int] = []
    vecs: list[int] = []  # (x | z << n) bit vectors, row-reduced
    for lab in labels:
        p = Pauli.from_index(n, lab)
        v = p.x | (p.z << n)
        w = v
        for b in vecs:
            w = min(w, w ^ b)
        if w:
            vecs.append(w)
            vecs.sort(reverse=True)
            basis.append(lab)
    return basis


def _dual_basis(n: int, gens: list[int]) -> list[int]:
    """Paulis d_i with <d_i, s_j> = delta_ij over GF(2)."""
    k = len(gens)
    rows = []
    for s in gens:
        p = Pauli.from_index(n, s)
        rows.append((p.z, p.x))  # <d, s> = d.x . s.z + d.z . s.x
    duals = []
    for i in range(k):
        sol = _solve_gf2(n, rows, [1 if j == i else 0 for j in range(k)])
        if sol is None:
            raise NonInvertibleChannelError("no dual insertion basis exists")
        duals.append(Pauli(n, sol[0], sol[1], 1).index)
    return duals


def _solve_gf2(n: int, rows, rhs):
    """Solve <d, s_j> = rhs_j for the masks of d by GF(2) elimination.

    The unknown is encoded as ``v = d.x | (d.z << n)``; each equation's
    coefficient vector is ``s.z | (s.x << n)`` so that the commutation parity
    is ``popcount(v & coef) mod 2``.
    """
    system = [(sz | (sx << n), r) for (sz, sx), r in zip(rows, rhs)]
    pivot_rows: list[tuple[int, int, int]] = []  # (pivot column, vec, rhs)
    for vec, r in system:
        for col, pvec, prhs in pivot_rows:
            if (vec >> col) & 1:
                vec ^= pvec
                r ^= prhs
        if vec == 0:
            if r:
                return None
            continue
        pivot_rows.append((vec.bit_length() - 1, vec, r))
    x = 0
    for col, vec, r in sorted(pivot_rows, reverse=True):
        acc = r
        v = vec & ~(1 << col)
        while v:
            c = v.bit_length() - 1
            acc ^= (x >> c) & 1
            v ^= 1 << c
        if acc:
            x |= 1 << col
    return x & ((1 << n) - 1), x >> n


def inverse_quasiprob_factored(params: ChannelParams) -> FactoredInverse:
    """Factor-wise inverse: omega_a = (1 - exp(-tau_a)) / 2 per generator;
    overhead exp(sum of positive taus)."""
    taus = params.tau
    omegas = (1.0 - np.exp(-taus)) / 2.0
    gamma = float(np.exp(np.clip(taus, 0.0, None).sum()))
    return FactoredInverse(
        n=params.K.n,
        gen_labels=np.array(params.K.members),
        taus=taus,
        omegas=omegas,
        gamma=gamma,
    )


def channel_inverse(chan, n: int, mode: str = "auto"):
    """Build the inverse plan entry for one model channel."""
    if isinstance(chan, QuasiLocalChannel) and mode in ("auto", "factored"):
        return inverse_quasiprob_factored(chan.params)
    if isinstance(chan, LabelChannel):
        return inverse_quasiprob_subgroup(
            n, {idx: float(np.exp(-v)) for idx, v in chan.x.items()}
        )
    if hasattr(chan, "dense_channel"):
        return inverse_quasiprob_dense(chan.dense_channel())
    raise TypeError(f"no inverse construction for {type(chan).__name__}")


@dataclass
class QuasiProbPlan:
    """Per-slot inverse plans for one circuit plus the total overhead."""

    entries: list  # (SlotRef, DenseInverse | FactoredInverse)
    gamma: float

    @classmethod
    def for_circuit(cls, circ: Circuit, model: GateSetNoiseModel,
                    mode: str = "auto") -> "QuasiProbPlan":
        comp = _CompiledCircuit(circ, model.layer_defs)
        entries = []
        gamma = 1.0
        for ref, _ in comp.slots:
            chan = model.channel(ref.kind if ref.kind in (PREP, MEAS) else ref.kind)
            entry = channel_inverse(chan, circ.n, mode)
            entries.append((ref, entry))
            gamma *= entry.gamma
        return cls(entries, gamma)


def pec_expectation_exact(circ: Circuit, truth: GateSetNoiseModel,
                          learned: GateSetNoiseModel, observable: Pauli,
                          mode: str = "auto") -> float:
    """Exact expectation of the self-consistent PEC estimator.

    Pauli insertions commute with the Clifford structure, so the full sum
    over insertion tuples factorizes into one exact insertion sum per noise
    slot (each evaluated by explicit enumeration over that slot's plan),
    multiplied by the truth model's un-inserted noisy expectation.
    """
    records, ideal = backpropagate_observable(circ, observable, truth.layer_defs)
    if ideal == 0.0:
        return 0.0
    base = ideal * observable.sign
    plan = QuasiProbPlan.for_circuit(circ, learned, mode)
    slot_obs = {str(ref): lab for ref, lab in records}
    value = base
    for ref, lab in records:
        value *= truth.eigenvalue(ref.kind, lab)
    for ref, entry in plan.entries:
        value *= entry.insertion_multiplier(slot_obs[str(ref)])
    return float(value)


@dataclass
class PecDiagnostics:
    gamma: float
    negative_fraction: float          # samples whose total sign was negative
    expected_negative_fraction: float # from the plan's q distributions
    sample_variance: float


def pec_sample(circ: Circuit, truth: GateSetNoiseModel,
               learned: GateSetNoiseModel, observable: Pauli, samples: int,
               seed: int, mode: str = "auto", measurement_twirl: bool = True,
               batch: int = 1 << 17):
    """Monte Carlo self-consistent PEC: one shot per sample, insertions drawn
    from the learned model's plan, noise drawn from the truth model.

    Returns (ExpectationEstimate, PecDiagnostics).  The empirical mean
    converges to the noiseless expectation; the variance scales with the
    squared overhead ``gamma^2`` relative to unmitigated sampling.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    _check_observable(circ, observable)
    comp = _CompiledCircuit(circ, truth.layer_defs)
    pushes = comp.push_maps()
    err_samplers = {
        ref: _error_sampler(truth.channel(ref.kind), circ.n)
        for ref, _ in comp.slots
    }
    plan = QuasiProbPlan.for_circuit(circ, learned, mode)
    zmask = observable.pattern
    n = circ.n

    total = 0.0
    total_sq = 0.0
    neg = 0
    done = 0
    batch_idx = 0
    while done < samples:
        m = min(batch, samples - done)
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=seed, spawn_key=(batch_idx,))
        ))
        ideal = np.searchsorted(comp.ideal_cdf, rng.random(m))
        weight = np.full(m, plan.gamma)
        sign = np.ones(m)
        xtot = np.zeros(m, dtype=np.int64)
        for (ref, entry) in plan.entries:
            ex, ez, sg = _draw_insertions(entry, rng, m)
            px, _ = pushes[ref](ex, ez)
            xtot ^= px
            sign *= sg
        for ref, _ in comp.slots:
            ex, ez = err_samplers[ref](rng, m)
            px, _ = pushes[ref](ex, ez)
            xtot ^= px
        raw = ideal ^ xtot
        if measurement_twirl:
            # the postprocessing correction undoes the flip exactly; draw it
            # anyway so seeds stay stable when toggling the option
            rng.integers(0, 1 << n, size=m, dtype=np.int64)
        meas = 1.0 - 2.0 * (_popcount_array(raw & zmask) & 1).astype(np.float64)
        vals = meas * weight * sign * observable.sign
        total += vals.sum()
        total_sq += (vals**2).sum()
        neg += int((sign < 0).sum())
        done += m
        batch_idx += 1

    mean = total / samples
    var = total_sq / samples - mean**2
    stderr = float(np.sqrt(max(var, 0.0) / samples))
    est = ExpectationEstimate(float(mean), stderr, samples, 1)
    expected_neg = _expected_negative_fraction(plan)
    diag = PecDiagnostics(plan.gamma, neg / samples, expected_neg, float(var))
    return est, diag


def _draw_insertions(entry, rng: np.random.Generator, m: int):
    if isinstance(entry, DenseInverse):
        cdf = np.cumsum(entry.q)
        pick = np.searchsorted(cdf, rng.random(m))
        lx = np.empty(len(entry.labels), dtype=np.int64)
        lz = np.empty(len(entry.labels), dtype=np.int64)
        for i, a in enumerate(entry.labels):
            p = Pauli.from_index(entry.n, int(a))
            lx[i], lz[i] = p.x, p.z
        return lx[pick], lz[pick], entry.sgn[pick].astype(np.float64)
    # factored: one Bernoulli per generator; tau > 0 factors carry sign -1
    xs = np.zeros(m, dtype=np.int64)
    zs = np.zeros(m, dtype=np.int64)
    sg = np.ones(m)
    for g, w, tau in zip(entry.gen_labels, entry.omegas, entry.taus):
        if w == 0.0:
            continue
        gamma_f = np.exp(max(tau, 0.0))
        p_id = (1.0 - w) / (1.0 - 2.0 * w)
        q_flip = abs(-w / (1.0 - 2.0 * w)) / gamma_f if tau > 0 else max(
            -w / (1.0 - 2.0 * w), 0.0
        )
        hit = rng.random(m) < q_flip
        if not np.any(hit):
            continue
        p = Pauli.from_index(entry.n, int(g))
        xs[hit] ^= p.x
        zs[hit] ^= p.z
        if tau > 0:
            sg[hit] = -sg[hit]
    return xs, zs, sg


def _expected_negative_fraction(plan: QuasiProbPlan) -> float:
    """Probability that the product of per-slot signs is negative."""
    p_total = 0.0  # probability of odd number of negative draws
    for _, entry in plan.entries:
        if isinstance(entry, DenseInverse):
            p_neg = float(entry.q[entry.sgn < 0].sum())
        else:
            p_neg = 0.0
            for w, tau in zip(entry.omegas, entry.taus):
                if tau > 0:
                    q_flip = (w / (1.0 - 2.0 * w)) / np.exp(tau)
                    p_neg = p_neg * (1 - q_flip) + (1 - p_neg) * q_flip
        p_total = p_total * (1 - p_neg) + (1 - p_total) * p_neg
    return p_total


def gamma_table(model: GateSetNoiseModel) -> dict[str, float]:
    """Per-channel one-norm overheads of the model's inverse plans."""
    out = {}
    for slot in (PREP, MEAS, *sorted(model.layers)):
        chan = model.channel(slot)
        try:
            out[slot] = channel_inverse(chan, model.n).gamma
        except (ValueError, TypeError, NonInvertibleChannelError):
            out[slot] = float("nan")
    return out
