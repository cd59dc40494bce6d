"""Ground-truth simulation of noisy Clifford circuits under a gate-set noise
model: exact Pauli-observable expectations via Heisenberg back-propagation,
and finite-shot sampling with Pauli twirling and measurement twirling.

Noise placement follows the gate-set convention: noisy preparation
``Lambda_prep(|bits>)``, noisy entangling layer ``U . Lambda_layer`` (noise
acts first in time), noisy measurement ``measure . Lambda_meas``.
Single-qubit layers and explicit Pauli insertions are noiseless.

For a Clifford circuit and a Pauli observable the noisy expectation is a
single monomial: the ideal (+-1 or 0) value times one eigenvalue per noise
slot, evaluated at the label the back-propagated observable presents to that
slot.  ``backpropagate_observable`` returns those (slot, label) pairs;
``exact_pauli_expectation`` multiplies them out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .models import MEAS, PREP, GateSetNoiseModel, QuasiLocalChannel
from .paulis import CliffordLayer, Pauli, SingleQubitClifford, clifford_mapping

# ---------------------------------------------------------------------------
# Circuit structure.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrepareComputational:
    bits: int  # bit i = initial value of qubit i


@dataclass(frozen=True)
class SingleQubitLayer:
    cliffords: tuple[SingleQubitClifford, ...]

    def as_layer(self, n: int) -> CliffordLayer:
        return CliffordLayer(n, (), self.cliffords)


@dataclass(frozen=True)
class EntanglingLayer:
    layer_id: str


@dataclass(frozen=True)
class PauliInsertion:
    pauli: Pauli


@dataclass(frozen=True)
class MeasureBasis:
    basis: tuple[str, ...]  # per-qubit 'X' | 'Y' | 'Z'


@dataclass(frozen=True)
class Circuit:
    """Ordered Clifford circuit: one preparation first, one measurement last."""

    n: int
    ops: tuple

    def __post_init__(self):
        if not self.ops or not isinstance(self.ops[0], PrepareComputational):
            raise ValueError("circuit must start with a computational preparation")
        if not isinstance(self.ops[-1], MeasureBasis):
            raise ValueError("circuit must end with a basis measurement")
        for op in self.ops[1:-1]:
            if isinstance(op, (PrepareComputational, MeasureBasis)):
                raise ValueError("preparation/measurement only at the boundaries")

    @property
    def meas_basis(self) -> tuple[str, ...]:
        return self.ops[-1].basis

    def layer_ids(self) -> list[str]:
        return [op.layer_id for op in self.ops if isinstance(op, EntanglingLayer)]

    def with_insertions(self, insertions: dict[int, Pauli]) -> "Circuit":
        """New circuit with extra Pauli gates at noise-slot positions
        (0 = right after preparation, k>=1 = right before the k-th entangling
        layer, last = right before measurement)."""
        slots = self._slot_positions()
        ops = list(self.ops)
        for slot_idx in sorted(insertions, reverse=True):
            ops.insert(slots[slot_idx], PauliInsertion(insertions[slot_idx]))
        return Circuit(self.n, tuple(ops))

    def _slot_positions(self) -> list[int]:
        pos = [1]  # after preparation
        for i, op in enumerate(self.ops):
            if isinstance(op, EntanglingLayer):
                pos.append(i)
        pos.append(len(self.ops) - 1)  # before measurement
        return pos


def circuit(n: int, bits: int | str, mid_ops, meas_basis: str) -> Circuit:
    """Convenience builder.  ``bits`` may be a bit mask or a '0'/'1' string
    (qubit 0 leftmost); ``meas_basis`` a string over XYZ."""
    if isinstance(bits, str):
        bits = sum(1 << i for i, c in enumerate(bits) if c == "1")
    ops = [PrepareComputational(bits), *mid_ops, MeasureBasis(tuple(meas_basis))]
    return Circuit(n, tuple(ops))


def single_layer(names_or_cliffords) -> SingleQubitLayer:
    from .paulis import CLIFFORD_1Q

    els = tuple(
        CLIFFORD_1Q[c] if isinstance(c, str) else c for c in names_or_cliffords
    )
    return SingleQubitLayer(els)


@dataclass(frozen=True)
class SlotRef:
    """Identifies one noise slot of a circuit."""

    kind: str  # 'prep' | 'meas' | layer id
    occurrence: int = 0

    def __str__(self):
        if self.kind in (PREP, MEAS):
            return self.kind
        return f"layer:{self.kind}#{self.occurrence}"


@dataclass
class ExpectationEstimate:
    value: float
    stderr: float
    shots: int
    twirls: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if abs(self.value) > 1.0 + 5.0 * self.stderr:
            raise ValueError("estimate outside physical range")


# ---------------------------------------------------------------------------
# Back-propagation and exact expectations.
# ---------------------------------------------------------------------------


def _measurement_rotation(basis: tuple[str, ...]) -> CliffordLayer:
    """Single-qubit layer whose conjugation maps each basis operator to +Z."""
    els = tuple(clifford_mapping(ch, 2, 1) for ch in basis)
    return CliffordLayer(len(basis), (), els)


def _check_observable(circ: Circuit, observable: Pauli):
    if observable.n != circ.n:
        raise ValueError("observable qubit count mismatch")
    for i in observable.support:
        if circ.meas_basis[i] != observable.label[i]:
            raise ValueError(
                f"observable {observable.label} not measurable in basis "
                f"{''.join(circ.meas_basis)} (qubit {i})"
            )


def backpropagate_observable(circ: Circuit, observable: Pauli,
                             layer_defs: dict[str, CliffordLayer]):
    """Trace the observable backwards and collect the Pauli label each noise
    slot sees.

    Returns ``(records, ideal)`` where records is a list of
    ``(SlotRef, Pauli)`` in forward slot order (prep first) and ``ideal`` is
    the noiseless expectation (+1, -1, or 0).
    """
    _check_observable(circ, observable)
    rot = _measurement_rotation(circ.meas_basis)
    zpat = Pauli(circ.n, 0, observable.pattern, 1)
    backward = [(MEAS, zpat.unsigned())]
    cur = rot.conjugate_adjoint(zpat)
    for op in reversed(circ.ops[1:-1]):
        if isinstance(op, SingleQubitLayer):
            cur = op.as_layer(circ.n).conjugate_adjoint(cur)
        elif isinstance(op, EntanglingLayer):
            cur = layer_defs[op.layer_id].conjugate_adjoint(cur)
            backward.append((op.layer_id, cur.unsigned()))
        elif isinstance(op, PauliInsertion):
            if (bin(cur.x & op.pauli.z).count("1") + bin(cur.z & op.pauli.x).count("1")) % 2:
                cur = Pauli(cur.n, cur.x, cur.z, -cur.sign)
        else:  # pragma: no cover
            raise TypeError(f"unknown op {op!r}")
    backward.append((PREP, cur.unsigned()))
    records = []
    seen: dict[str, int] = {}
    for kind, lab in reversed(backward):
        if kind in (PREP, MEAS):
            records.append((SlotRef(kind), lab))
        else:
            k = seen.get(kind, 0)
            seen[kind] = k + 1
            records.append((SlotRef(kind, k), lab))
    if cur.x:
        return records, 0.0
    bits = circ.ops[0].bits
    ideal = cur.sign * (-1) ** bin(bits & cur.pattern).count("1")
    return records, float(ideal)


def exact_pauli_expectation(circ: Circuit, model: GateSetNoiseModel,
                            observable: Pauli) -> float:
    """Noisy expectation of a Pauli observable: ideal value times one
    eigenvalue per noise slot."""
    records, ideal = backpropagate_observable(circ, observable, model.layer_defs)
    if ideal == 0.0:
        return 0.0
    value = ideal * observable.sign
    for ref, lab in records:
        slot = ref.kind if ref.kind in (PREP, MEAS) else ref.kind
        value *= model.eigenvalue(slot, lab)
    return float(value)


# ---------------------------------------------------------------------------
# Finite-shot sampling.
# ---------------------------------------------------------------------------


class SamplingError(RuntimeError):
    pass


def _require_samplable(model: GateSetNoiseModel):
    if not model.physical:
        raise SamplingError(
            "model is flagged non-physical (quasi-probability); "
            "only exact evaluation or the PEC machinery applies"
        )


def _apply_1q(psi: np.ndarray, n: int, qubit: int, mat: np.ndarray) -> np.ndarray:
    psi = psi.reshape((2,) * n)
    psi = np.tensordot(mat, psi, axes=([1], [qubit]))
    return np.moveaxis(psi, 0, qubit).reshape(-1)


def _apply_cnot(psi: np.ndarray, n: int, c: int, t: int) -> np.ndarray:
    psi = psi.reshape((2,) * n).copy()
    idx_ctrl = [slice(None)] * n
    idx_ctrl[c] = 1
    sub = psi[tuple(idx_ctrl)]
    t_axis = t if t < c else t - 1
    psi[tuple(idx_ctrl)] = np.flip(sub, axis=t_axis)
    return psi.reshape(-1)


class _CompiledCircuit:
    """Pre-processed circuit: ideal outcome distribution plus, per noise
    slot, the symplectic push-through map to the measurement."""

    def __init__(self, circ: Circuit, layer_defs: dict[str, CliffordLayer]):
        self.circ = circ
        self.n = circ.n
        self.layer_defs = layer_defs
        rot = _measurement_rotation(circ.meas_basis)

        # forward unitary sequence (layers resolved), with slot markers
        seq: list[CliffordLayer] = []
        slot_at: list[tuple[SlotRef, int]] = []  # (ref, index into seq where noise enters)
        occ: dict[str, int] = {}
        slot_at.append((SlotRef(PREP), 0))
        for op in circ.ops[1:-1]:
            if isinstance(op, SingleQubitLayer):
                seq.append(op.as_layer(circ.n))
            elif isinstance(op, EntanglingLayer):
                k = occ.get(op.layer_id, 0)
                occ[op.layer_id] = k + 1
                slot_at.append((SlotRef(op.layer_id, k), len(seq)))
                seq.append(layer_defs[op.layer_id])
            elif isinstance(op, PauliInsertion):
                seq.append(_pauli_as_layer(op.pauli))
        seq.append(rot)
        slot_at.append((SlotRef(MEAS), len(seq)))
        self.slots = slot_at
        self.seq = seq

        # ideal distribution over outcome integers (bit i = qubit i)
        self.ideal_dist = self._ideal_distribution_from_seq()
        self.ideal_cdf = np.cumsum(self.ideal_dist)

    def _ideal_distribution_from_seq(self) -> np.ndarray:
        n = self.n
        psi = np.zeros(1 << n, dtype=complex)
        start = 0
        bits = self.circ.ops[0].bits
        for i in range(n):
            if (bits >> i) & 1:
                start |= 1 << (n - 1 - i)
        psi[start] = 1.0
        from .paulis import PAULI_MATS_1Q

        for layer in self.seq:
            if layer.singles:
                for i, el in enumerate(layer.singles):
                    psi = _apply_1q(psi, n, i, el.matrix)
            for c, t in layer.cnot_pairs:
                psi = _apply_cnot(psi, n, c, t)
        probs = np.abs(psi) ** 2
        # flat index uses qubit 0 as most significant axis; re-index so that
        # bit i of the outcome integer is qubit i
        out = np.zeros_like(probs)
        for flat in range(1 << n):
            o = 0
            for i in range(n):
                if (flat >> (n - 1 - i)) & 1:
                    o |= 1 << i
            out[o] = probs[flat]
        return out

    def push_maps(self) -> dict[SlotRef, callable]:
        """For each slot, a vectorized map (xs, zs) -> (xs', zs') pushing a
        Pauli inserted at that slot to the measurement."""
        maps = {}
        for ref, start in self.slots:
            tail = self.seq[start:]
            maps[ref] = _make_push(tail, self.n)
        return maps


def _pauli_as_layer(p: Pauli) -> CliffordLayer:
    from .paulis import CLIFFORD_1Q

    names = {0: "I", 1: "X", 2: "Z", 3: "Y"}
    els = tuple(
        CLIFFORD_1Q[names[((p.x >> i) & 1) + 2 * ((p.z >> i) & 1)]]
        for i in range(p.n)
    )
    return CliffordLayer(p.n, (), els)


def _make_push(tail: list[CliffordLayer], n: int):
    # Precompute per-layer vectorized conjugation; signs are irrelevant for
    # outcome statistics (only the x mask flips measured bits).
    steps = []
    for layer in tail:
        steps.append(_vector_conj(layer, n))

    def push(xs: np.ndarray, zs: np.ndarray):
        for step in steps:
            xs, zs = step(xs, zs)
        return xs, zs

    return push


def _vector_conj(layer: CliffordLayer, n: int):
    singles = layer.singles
    pairs = layer.cnot_pairs

    if singles:
        # per-qubit digit remap tables
        digit_map = np.zeros((n, 4), dtype=np.int8)
        for i, el in enumerate(singles):
            for d in range(4):
                digit_map[i, d] = el.conj_digit(d)[0]

    def step(xs: np.ndarray, zs: np.ndarray):
        if singles:
            nxs = np.zeros_like(xs)
            nzs = np.zeros_like(zs)
            for i in range(n):
                d = ((xs >> i) & 1) + 2 * ((zs >> i) & 1)
                nd = digit_map[i][d]
                nxs |= (nd & 1) << i
                nzs |= (nd >> 1) << i
            xs, zs = nxs, nzs
        for c, t in pairs:
            xc = (xs >> c) & 1
            zt = (zs >> t) & 1
            xs = xs ^ (xc << t)
            zs = zs ^ (zt << c)
        return xs, zs

    return step


def _slot_channel(model: GateSetNoiseModel, ref: SlotRef):
    if ref.kind in (PREP, MEAS):
        return model.channel(ref.kind)
    return model.channel(ref.kind)


def _error_sampler(chan, n: int):
    """Returns f(rng, shots) -> (xs, zs) error masks drawn from the channel's
    error rates."""
    if isinstance(chan, QuasiLocalChannel):
        params = chan.params
        omegas = params.omegas
        if np.any(omegas < -1e-12):
            raise SamplingError("negative generator rate; channel not samplable")
        omegas = np.clip(omegas, 0.0, None)
        gens = [Pauli.from_index(n, idx) for idx in params.K.members]
        gx = np.array([g.x for g in gens], dtype=np.int64)
        gz = np.array([g.z for g in gens], dtype=np.int64)

        def sample(rng: np.random.Generator, shots: int):
            xs = np.zeros(shots, dtype=np.int64)
            zs = np.zeros(shots, dtype=np.int64)
            for k in range(len(gens)):
                if omegas[k] == 0.0:
                    continue
                cnt = rng.binomial(shots, omegas[k])
                if cnt == 0:
                    continue
                pos = rng.choice(shots, size=cnt, replace=False)
                xs[pos] ^= gx[k]
                zs[pos] ^= gz[k]
            return xs, zs

        return sample

    # dense path: PatternChannel or anything exposing dense_channel()
    if not hasattr(chan, "dense_channel"):
        raise SamplingError(
            f"channel of type {type(chan).__name__} has no error-rate "
            "representation to sample from"
        )
    dense = chan.dense_channel()
    from .paulis import eigenvalues_to_rates

    rates = eigenvalues_to_rates(dense).rates
    if np.any(rates < -1e-12):
        raise SamplingError("channel has negative error rates; not samplable")
    rates = np.clip(rates, 0.0, None)
    rates = rates / rates.sum()
    cdf = np.cumsum(rates)
    idx = np.arange(4**n)
    lx = np.zeros(4**n, dtype=np.int64)
    lz = np.zeros(4**n, dtype=np.int64)
    for a in range(4**n):
        p = Pauli.from_index(n, a)
        lx[a], lz[a] = p.x, p.z

    def sample(rng: np.random.Generator, shots: int):
        labels = np.searchsorted(cdf, rng.random(shots))
        return lx[labels], lz[labels]

    return sample


def sample_counts(circ: Circuit, model: GateSetNoiseModel, shots: int,
                  twirls: int, seed: int, observables=None,
                  measurement_twirl: bool = True, gate_twirl: bool = True):
    """Monte Carlo estimates of Pauli observables plus the raw outcome
    histogram.

    ``shots`` counts repetitions per twirl; estimates pool all
    ``shots * twirls`` samples.  Deterministic for a fixed seed: each twirl
    owns an independent counter-based RNG stream, and the reduction order is
    fixed.  With exactly-Pauli injected noise the gate twirl leaves the
    outcome distribution invariant (the dressing commutes with the sampled
    errors up to signs that never reach the measured bits); the streams are
    still drawn so seeds remain stable when toggling it.
    """
    if shots < 1 or twirls < 1:
        raise ValueError("shots and twirls must be >= 1")
    _require_samplable(model)
    if observables is None:
        observables = []
    observables = [
        Pauli.from_label(o) if isinstance(o, str) else o for o in observables
    ]
    for o in observables:
        _check_observable(circ, o)

    comp = _CompiledCircuit(circ, model.layer_defs)
    pushes = comp.push_maps()
    samplers = {ref: _error_sampler(_slot_channel(model, ref), circ.n) for ref, _ in comp.slots}
    zmasks = [(o, o.pattern) for o in observables]

    n = circ.n
    counts: dict[int, int] = {}
    acc = {o.label: [] for o in observables}
    for t in range(twirls):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(t,)))
        )
        if gate_twirl:
            # one dressing Pauli per entangling-layer occurrence; see docstring
            n_gate_slots = sum(1 for ref, _ in comp.slots if ref.kind not in (PREP, MEAS))
            rng.integers(0, 4**n, size=n_gate_slots)
        ideal = np.searchsorted(comp.ideal_cdf, rng.random(shots))
        total_x = np.zeros(shots, dtype=np.int64)
        for ref, _ in comp.slots:
            ex, ez = samplers[ref](rng, shots)
            px, _ = pushes[ref](ex, ez)
            total_x ^= px
        raw = ideal ^ total_x
        if measurement_twirl:
            flip = rng.integers(0, 1 << n, size=shots, dtype=np.int64)
            raw = raw ^ flip
            corrected = raw ^ flip
        else:
            corrected = raw
        vals, cnts = np.unique(raw, return_counts=True)
        for v, c in zip(vals, cnts):
            counts[int(v)] = counts.get(int(v), 0) + int(c)
        for o, zm in zmasks:
            par = _popcount_array(corrected & zm) & 1
            acc[o.label].append(1.0 - 2.0 * par.astype(np.float64))

    estimates = {}
    for o, _ in zmasks:
        samples = np.concatenate(acc[o.label])
        mean = float(samples.mean())
        stderr = float(samples.std(ddof=1) / np.sqrt(samples.size)) if samples.size > 1 else 0.0
        estimates[o.label] = ExpectationEstimate(mean, stderr, shots, twirls)
    return estimates, counts


def _popcount_array(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    w = v.copy()
    while np.any(w):
        out += w & 1
        w >>= 1
    return out


def export_counts(circ: Circuit, counts: dict[int, int]) -> str:
    """Bitstring histogram as a structured text document."""
    doc = {
        "n": circ.n,
        "counts": {
            "".join(str((k >> i) & 1) for i in range(circ.n)): v
            for k, v in sorted(counts.items())
        },
    }
    return json.dumps(doc, indent=1, sort_keys=True)
