"""Gate-set noise models: per-channel parameters, gauge transformations, and
gauge kernel bases.

A model holds one noise channel per gate-set component: state preparation,
measurement, and each entangling layer.  Channels come in three flavors:

* ``QuasiLocalChannel`` -- a :class:`~gaugepec.quasilocal.ChannelParams`
  wrapper with x over a generator set K as canonical storage.  SPAM channels
  additionally carry the pattern-symmetric constraint (generalized
  depolarizing).
* ``PatternChannel``    -- per-support-pattern log-eigenvalues; the natural
  storage for generalized depolarizing SPAM on restricted models.
* ``LabelChannel``      -- explicit log-eigenvalues on a finite label set;
  used by restricted gate models where only back-propagated labels matter.

A gauge transformation is a generalized depolarizing map ``D`` with
log-eigenvalue ``eta(pt(a))`` on label ``a``.  It rewires the gate set as
``prep -> D . prep``, ``meas -> meas . D^-1``, and per entangling layer
``layer -> D' . layer . D^-1`` with ``D' = U^-1 . D . U``; in log-eigenvalue
space the shifts are ``x_prep(a) += eta(pt(a))``, ``x_meas(a) -= eta(pt(a))``,
and ``x_layer(a) += eta(pt(U(a))) - eta(pt(a))``.  Every experiment's
expectation value is invariant under these shifts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .paulis import (
    CliffordLayer,
    Pauli,
    PauliChannel,
    index_to_label,
    label_to_index,
    pattern_of_index,
)
from .quasilocal import ChannelParams, FactorSet, GeneratorSet


class GaugeDimensionError(ValueError):
    """Gauge vector does not match the model's declared gauge class."""


@dataclass(frozen=True)
class GaugeVector:
    """Gauge parameters: one entry per support pattern (general class) or one
    per qubit (quasi-local class, extended additively over patterns)."""

    n: int
    per_qubit: np.ndarray | None = None
    per_pattern: dict[int, float] | None = None

    def __post_init__(self):
        if (self.per_qubit is None) == (self.per_pattern is None):
            raise ValueError("provide exactly one of per_qubit / per_pattern")
        if self.per_qubit is not None:
            object.__setattr__(self, "per_qubit", np.asarray(self.per_qubit, float))
            if self.per_qubit.shape != (self.n,):
                raise GaugeDimensionError("per-qubit gauge needs n entries")
        else:
            if self.per_pattern.get(0, 0.0) != 0.0:
                raise ValueError("eta at the empty pattern must be 0")

    @classmethod
    def qubit(cls, values) -> "GaugeVector":
        values = np.asarray(values, float)
        return cls(len(values), per_qubit=values)

    @classmethod
    def pattern(cls, n: int, values: dict) -> "GaugeVector":
        vals = {}
        for key, v in values.items():
            mask = key if isinstance(key, int) else int(key[::-1], 2)
            vals[mask] = float(v)
        return cls(n, per_pattern=vals)

    @property
    def is_per_qubit(self) -> bool:
        return self.per_qubit is not None

    def of_pattern(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        if self.per_qubit is not None:
            return float(sum(self.per_qubit[i] for i in range(self.n) if (mask >> i) & 1))
        return self.per_pattern.get(mask, 0.0)

    def negated(self) -> "GaugeVector":
        if self.per_qubit is not None:
            return GaugeVector(self.n, per_qubit=-self.per_qubit)
        return GaugeVector(self.n, per_pattern={k: -v for k, v in self.per_pattern.items()})


# ---------------------------------------------------------------------------
# Channel flavors.
# ---------------------------------------------------------------------------


@dataclass
class PatternChannel:
    """Generalized depolarizing channel: x depends only on the support
    pattern.  ``x[pattern mask] -> log-eigenvalue``; patterns absent from
    the table raise, which flags a model/circuit mismatch early."""

    n: int
    x: dict[int, float]

    def x_of(self, p: Pauli) -> float:
        pt = p.pattern
        if pt == 0:
            return 0.0
        try:
            return self.x[pt]
        except KeyError:
            raise KeyError(
                f"pattern {pattern_label(self.n, pt)} not covered by this channel"
            ) from None

    def gauge_shifted(self, eta: GaugeVector, direction: int) -> "PatternChannel":
        return PatternChannel(
            self.n, {pt: v + direction * eta.of_pattern(pt) for pt, v in self.x.items()}
        )

    def dense_channel(self) -> PauliChannel:
        lam = np.ones(4**self.n)
        for a in range(1, 4**self.n):
            lam[a] = np.exp(-self.x_of(Pauli.from_index(self.n, a)))
        return PauliChannel.from_eigenvalues(self.n, lam)

    def to_dict(self) -> dict:
        return {
            "type": "pattern",
            "x": {pattern_label(self.n, pt): v for pt, v in sorted(self.x.items())},
        }


@dataclass
class LabelChannel:
    """Log-eigenvalues on an explicit label set (restricted gate channels)."""

    n: int
    x: dict[int, float]  # dense label index -> x

    @classmethod
    def from_label_dict(cls, n: int, x: dict[str, float]) -> "LabelChannel":
        return cls(n, {label_to_index(lab): float(v) for lab, v in x.items()})

    def x_of(self, p: Pauli) -> float:
        if p.pattern == 0:
            return 0.0
        try:
            return self.x[p.unsigned().index]
        except KeyError:
            raise KeyError(f"label {p.label} not covered by this channel") from None

    def gauge_shifted_gate(self, eta: GaugeVector, layer: CliffordLayer) -> "LabelChannel":
        out = {}
        for idx, v in self.x.items():
            p = Pauli.from_index(self.n, idx)
            q = layer.conjugate(p)
            out[idx] = v + eta.of_pattern(q.pattern) - eta.of_pattern(p.pattern)
        return LabelChannel(self.n, out)

    def to_dict(self) -> dict:
        return {
            "type": "label",
            "x": {index_to_label(self.n, i): v for i, v in sorted(self.x.items())},
        }


@dataclass
class QuasiLocalChannel:
    """ChannelParams wrapper implementing the common channel protocol."""

    params: ChannelParams

    @property
    def n(self) -> int:
        return self.params.K.n

    def x_of(self, p: Pauli) -> float:
        if p.pattern == 0:
            return 0.0
        return self.params.x_of(p)

    def to_dict(self) -> dict:
        return {
            "type": "quasi_local",
            "pattern_symmetric": self.params.pattern_symmetric,
            "K": list(self.params.K.labels),
            "x": [float(v) for v in self.params.x],
        }


@dataclass
class DenseChannel:
    """Full 4^n Pauli channel (small n); the go-to flavor for truth models
    that must be samplable but are not quasi-local-positive."""

    channel: PauliChannel

    @property
    def n(self) -> int:
        return self.channel.n

    def x_of(self, p: Pauli) -> float:
        if p.pattern == 0:
            return 0.0
        lam = self.channel.eigenvalues[p.unsigned().index]
        if lam <= 0:
            raise ValueError(f"eigenvalue at {p.label} is not positive")
        return float(-np.log(lam))

    def dense_channel(self) -> PauliChannel:
        return self.channel

    def gauge_shifted(self, eta: GaugeVector, direction: int) -> "DenseChannel":
        lam = self.channel.eigenvalues.copy()
        for a in range(1, lam.size):
            pt = pattern_of_index(self.n, a)
            lam[a] *= np.exp(-direction * eta.of_pattern(pt))
        return DenseChannel(PauliChannel.from_eigenvalues(self.n, lam))

    def gauge_shifted_gate(self, eta: GaugeVector, layer: CliffordLayer) -> "DenseChannel":
        lam = self.channel.eigenvalues.copy()
        for a in range(1, lam.size):
            p = Pauli.from_index(self.n, a)
            q = layer.conjugate(p)
            lam[a] *= np.exp(-(eta.of_pattern(q.pattern) - eta.of_pattern(p.pattern)))
        return DenseChannel(PauliChannel.from_eigenvalues(self.n, lam))

    def to_dict(self) -> dict:
        return {"type": "dense", "eigenvalues": [float(v) for v in self.channel.eigenvalues]}


def pattern_label(n: int, mask: int) -> str:
    """Pattern mask as a 0/1 string, qubit 0 leftmost (e.g. ``"01"``)."""
    return "".join("1" if (mask >> i) & 1 else "0" for i in range(n))


def pattern_from_label(s: str) -> int:
    return sum(1 << i for i, c in enumerate(s) if c == "1")


# ---------------------------------------------------------------------------
# The gate-set model.
# ---------------------------------------------------------------------------

PREP = "prep"
MEAS = "meas"


@dataclass
class GateSetNoiseModel:
    """Noise channels for a full gate set plus the layer definitions needed
    to transport gauge transformations through the entangling gates.

    ``gauge_class`` declares which gauge vectors the ansatz supports
    ("per_qubit" or "per_pattern").  ``physical`` is a bookkeeping flag:
    gauge-transformed or fitted models may be legitimate quasi-probability
    (non-CP) models, which are fine for prediction and mitigation but cannot
    be sampled from directly.
    """

    n: int
    prep: object
    meas: object
    layers: dict[str, object]
    layer_defs: dict[str, CliffordLayer]
    gauge_class: str = "per_pattern"
    physical: bool = True

    def channel(self, slot: str):
        if slot == PREP:
            return self.prep
        if slot == MEAS:
            return self.meas
        return self.layers[slot]

    def x_of(self, slot: str, p: Pauli) -> float:
        return self.channel(slot).x_of(p)

    def eigenvalue(self, slot: str, p: Pauli) -> float:
        return float(np.exp(-self.x_of(slot, p)))

    # -- gauge action -------------------------------------------------------

    def apply_gauge(self, eta: GaugeVector) -> "GateSetNoiseModel":
        """Return the gauge-equivalent model under D_eta (see module docs)."""
        if eta.n != self.n:
            raise GaugeDimensionError(f"eta has {eta.n} qubits, model has {self.n}")
        if self.gauge_class == "per_qubit" and not eta.is_per_qubit:
            raise GaugeDimensionError("this model only supports per-qubit gauges")
        prep = _shift_spam(self.prep, eta, +1)
        meas = _shift_spam(self.meas, eta, -1)
        layers = {
            lid: _shift_gate(ch, eta, self.layer_defs[lid])
            for lid, ch in self.layers.items()
        }
        return replace(self, prep=prep, meas=meas, layers=layers, physical=False)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "gauge_class": self.gauge_class,
            "physical": self.physical,
            "channels": {
                "prep": self.prep.to_dict(),
                "meas": self.meas.to_dict(),
                **{f"layer:{lid}": ch.to_dict() for lid, ch in sorted(self.layers.items())},
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict, layer_defs: dict[str, CliffordLayer],
                  generator_sets: dict[str, GeneratorSet] | None = None) -> "GateSetNoiseModel":
        n = doc["n"]

        def load(chdoc):
            if chdoc["type"] == "pattern":
                return PatternChannel(
                    n, {pattern_from_label(k): v for k, v in chdoc["x"].items()}
                )
            if chdoc["type"] == "label":
                return LabelChannel.from_label_dict(n, chdoc["x"])
            if chdoc["type"] == "dense":
                return DenseChannel(PauliChannel.from_eigenvalues(n, chdoc["eigenvalues"]))
            K = GeneratorSet.from_labels(n, chdoc["K"])
            params = ChannelParams.from_x(
                "loaded", K, chdoc["x"], pattern_symmetric=chdoc["pattern_symmetric"]
            )
            return QuasiLocalChannel(params)

        chs = doc["channels"]
        layers = {
            key.split(":", 1)[1]: load(val)
            for key, val in chs.items()
            if key.startswith("layer:")
        }
        return cls(
            n=n,
            prep=load(chs["prep"]),
            meas=load(chs["meas"]),
            layers=layers,
            layer_defs=layer_defs,
            gauge_class=doc["gauge_class"],
            physical=doc["physical"],
        )

    @classmethod
    def from_json(cls, text: str, layer_defs: dict[str, CliffordLayer]) -> "GateSetNoiseModel":
        return cls.from_dict(json.loads(text), layer_defs)


def _shift_spam(ch, eta: GaugeVector, direction: int):
    if isinstance(ch, (PatternChannel, DenseChannel)):
        return ch.gauge_shifted(eta, direction)
    if isinstance(ch, QuasiLocalChannel):
        K = ch.params.K
        delta = np.array(
            [direction * eta.of_pattern(int(pt)) for pt in K.patterns], dtype=float
        )
        _require_closed_shift(ch.params, delta, "SPAM")
        return QuasiLocalChannel(ch.params.shifted_x(delta))
    raise TypeError(f"cannot gauge-shift channel of type {type(ch)}")


def _shift_gate(ch, eta: GaugeVector, layer: CliffordLayer):
    if isinstance(ch, (LabelChannel, DenseChannel)):
        return ch.gauge_shifted_gate(eta, layer)
    if isinstance(ch, QuasiLocalChannel):
        K = ch.params.K
        delta = np.empty(len(K))
        for k, idx in enumerate(K.members):
            p = Pauli.from_index(K.n, idx)
            q = layer.conjugate(p)
            delta[k] = eta.of_pattern(q.pattern) - eta.of_pattern(p.pattern)
        _require_closed_shift(ch.params, delta, "gate", check_symmetry=False)
        return QuasiLocalChannel(
            ChannelParams(ch.params.kind, K, ch.params.x + delta, pattern_symmetric=False)
        )
    raise TypeError(f"cannot gauge-shift channel of type {type(ch)}")


def _require_closed_shift(params: ChannelParams, delta_x: np.ndarray, what: str,
                          check_symmetry: bool = True):
    # Quasi-local closure: the shifted full x-function must still be generated
    # by the shifted x over K.  For per-qubit gauges on nearest-neighbor
    # layers this holds exactly; the check below catches misuse (e.g. a
    # per-pattern gauge on a restricted factor set).
    if check_symmetry and params.pattern_symmetric:
        K = params.K
        for pt, ks in K.pattern_classes.items():
            vals = delta_x[ks]
            if np.max(np.abs(vals - vals[0])) > 1e-12:
                raise GaugeDimensionError(
                    f"gauge shift breaks the generalized-depolarizing form of {what}"
                )


# ---------------------------------------------------------------------------
# Gauge kernel bases over an ansatz's parameter indexing.
# ---------------------------------------------------------------------------


def gauge_kernel_basis(ansatz) -> list[np.ndarray]:
    """Basis of parameter-space directions along which every experiment is
    invariant, in the ansatz's canonical parameter indexing.

    For per-qubit gauge classes this returns exactly n vectors; for
    per-pattern classes it returns one vector per independent pattern
    direction restricted to the ansatz's parameters.
    """
    directions = ansatz.elementary_gauge_vectors()
    vecs = [np.asarray(ansatz.param_shift_for_gauge(eta), float) for eta in directions]
    # keep the first independent subset in the given order (stable, unlike
    # pivoted QR); the kept vectors are the raw eta directions themselves
    basis: list[np.ndarray] = []
    ortho: list[np.ndarray] = []
    for v in vecs:
        w = v.copy()
        for b in ortho:
            w -= (w @ b) / (b @ b) * b
        if np.linalg.norm(w) > 1e-9 * max(1.0, np.linalg.norm(v)):
            basis.append(v)
            ortho.append(w)
    return basis
