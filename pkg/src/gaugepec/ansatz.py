"""Ansatz definitions: parameter indexing, gauge directions, truth-model
generation, and experiment plans for each supported gate-set family.

Two parameter bases exist (see :mod:`gaugepec.experiments`):

* ``RestrictedAnsatz`` (x basis) tracks explicit gate labels and SPAM
  patterns; suited to experiments designed around one target observable.
* ``QuasiLocalAnsatz`` (r basis) tracks generator sets; suited to complete
  learning of nearest-neighbor noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .models import (
    MEAS,
    PREP,
    DenseChannel,
    GateSetNoiseModel,
    GaugeVector,
    LabelChannel,
    PatternChannel,
    QuasiLocalChannel,
    pattern_label,
)
from .paulis import CliffordLayer, Pauli, index_to_label, label_to_index, pattern_of_index
from .quasilocal import ChannelParams, FactorSet, GeneratorSet
from .experiments import ExperimentSetting, plain_prep


def _pattern_sort(masks):
    return tuple(sorted(set(masks), key=lambda m: (bin(m).count("1"), m)))


def _label_sort(n, idxs):
    return tuple(sorted(set(idxs), key=lambda i: (
        bin(pattern_of_index(n, i)).count("1"), index_to_label(n, i))))


class RestrictedAnsatz:
    """x-basis ansatz over explicit gate labels and SPAM patterns."""

    basis = "x"
    gauge_class = "per_pattern"

    def __init__(self, name: str, n: int, layer_defs: dict[str, CliffordLayer],
                 gate_labels: dict[str, tuple[int, ...]],
                 spam_patterns: tuple[int, ...]):
        self.name = name
        self.n = n
        self.layer_defs = layer_defs
        self.gate_labels = {
            lid: _label_sort(n, idxs) for lid, idxs in gate_labels.items()
        }
        self.spam_patterns = _pattern_sort(spam_patterns)

    @cached_property
    def layer_order(self):
        return tuple(sorted(self.gate_labels))

    def param_index(self):
        index = {}
        for ch in (PREP, MEAS):
            for pt in self.spam_patterns:
                index[(ch, pt)] = len(index)
        for lid in self.layer_order:
            for idx in self.gate_labels[lid]:
                index[(lid, idx)] = len(index)
        return index

    def expand(self, channel_key: str, lab: Pauli):
        if channel_key in (PREP, MEAS):
            pt = lab.pattern
            if pt == 0:
                return {}
            if pt not in set(self.spam_patterns):
                raise KeyError(
                    f"SPAM pattern {pattern_label(self.n, pt)} outside ansatz "
                    f"{self.name}"
                )
            return {(channel_key, pt): 1.0}
        idx = lab.unsigned().index
        if idx not in set(self.gate_labels[channel_key]):
            raise KeyError(
                f"gate label {lab.label} of layer {channel_key} outside "
                f"ansatz {self.name}"
            )
        return {(channel_key, idx): 1.0}

    # -- gauge ---------------------------------------------------------------

    @cached_property
    def _relevant_patterns(self):
        pats = set(self.spam_patterns)
        for lid, idxs in self.gate_labels.items():
            layer = self.layer_defs[lid]
            for idx in idxs:
                p = Pauli.from_index(self.n, idx)
                pats.add(p.pattern)
                pats.add(layer.conjugate(p).pattern)
        return _pattern_sort(pats)

    def elementary_gauge_vectors(self):
        return [
            GaugeVector(self.n, per_pattern={pt: 1.0})
            for pt in self._relevant_patterns
        ]

    def param_shift_for_gauge(self, eta: GaugeVector) -> np.ndarray:
        index = self.param_index()
        shift = np.zeros(len(index))
        for (ch, key), col in index.items():
            if ch == PREP:
                shift[col] = eta.of_pattern(key)
            elif ch == MEAS:
                shift[col] = -eta.of_pattern(key)
            else:
                p = Pauli.from_index(self.n, key)
                q = self.layer_defs[ch].conjugate(p)
                shift[col] = eta.of_pattern(q.pattern) - eta.of_pattern(p.pattern)
        return shift

    @cached_property
    def gauge_dim(self) -> int:
        from .models import gauge_kernel_basis

        return len(gauge_kernel_basis(self))

    # -- models ----------------------------------------------------------------

    def model_from_params(self, params: np.ndarray) -> GateSetNoiseModel:
        index = self.param_index()
        prep_x, meas_x = {}, {}
        gates: dict[str, dict[int, float]] = {lid: {} for lid in self.layer_order}
        for (ch, key), col in index.items():
            v = float(params[col])
            if ch == PREP:
                prep_x[key] = v
            elif ch == MEAS:
                meas_x[key] = v
            else:
                gates[ch][key] = v
        return GateSetNoiseModel(
            self.n,
            PatternChannel(self.n, prep_x),
            PatternChannel(self.n, meas_x),
            {lid: LabelChannel(self.n, gates[lid]) for lid in self.layer_order},
            self.layer_defs,
            gauge_class=self.gauge_class,
            physical=False,
        )

    # -- symmetric baseline ------------------------------------------------------

    def symmetric_orbits(self):
        """Conjugate orbits of gate labels: list of orbit keys plus a map
        (layer, label) -> orbit position."""
        orbit_of = {}
        orbit_keys = []
        for lid in self.layer_order:
            layer = self.layer_defs[lid]
            for idx in self.gate_labels[lid]:
                p = Pauli.from_index(self.n, idx)
                mate = layer.conjugate(p).unsigned().index
                key = (lid, min(idx, mate))
                if key not in orbit_keys:
                    orbit_keys.append(key)
                orbit_of[(lid, idx)] = orbit_keys.index(key)
        return orbit_keys, orbit_of

    def gate_symmetric_expand(self, channel_key: str, lab: Pauli):
        layer = self.layer_defs[channel_key]
        idx = lab.unsigned().index
        mate = layer.conjugate(lab.unsigned()).unsigned().index
        return {(channel_key, min(idx, mate)): 1.0}

    def model_from_baseline(self, merged: dict, spam_s: dict) -> GateSetNoiseModel:
        gates = {}
        for lid in self.layer_order:
            layer = self.layer_defs[lid]
            x = {}
            for idx in self.gate_labels[lid]:
                p = Pauli.from_index(self.n, idx)
                mate = layer.conjugate(p).unsigned().index
                x[idx] = float(merged[(lid, min(idx, mate))])
            gates[lid] = LabelChannel(self.n, x)
        prep = PatternChannel(self.n, {pt: 0.0 for pt in self.spam_patterns})
        meas_x = {pt: float(spam_s.get(pt, 0.0)) for pt in self.spam_patterns}
        return GateSetNoiseModel(
            self.n, prep, PatternChannel(self.n, meas_x), gates,
            self.layer_defs, gauge_class=self.gauge_class, physical=False,
        )


class QuasiLocalAnsatz:
    """r-basis ansatz: quasi-local channels over a shared factor set."""

    basis = "r"
    gauge_class = "per_qubit"

    def __init__(self, name: str, n: int, layer_defs: dict[str, CliffordLayer],
                 factor_set: FactorSet):
        self.name = name
        self.n = n
        self.layer_defs = layer_defs
        self.factor_set = factor_set
        self.K = GeneratorSet.from_factor_set(factor_set)

    @cached_property
    def layer_order(self):
        return tuple(sorted(self.layer_defs))

    @cached_property
    def spam_patterns(self):
        return self.factor_set.nonempty_masks

    def param_index(self):
        index = {}
        for ch in (PREP, MEAS):
            for pt in self.spam_patterns:
                index[(ch, pt)] = len(index)
        for lid in self.layer_order:
            for idx in self.K.members:
                index[(lid, idx)] = len(index)
        return index

    def expand(self, channel_key: str, lab: Pauli):
        if lab.pattern == 0:
            return {}
        if channel_key in (PREP, MEAS):
            # pattern-symmetric channel: one column per factor-set pattern,
            # coefficient 1 for every pattern inside the label's support
            out = {}
            for pt in self.spam_patterns:
                if pt & ~lab.pattern == 0:
                    out[(channel_key, pt)] = 1.0
            return out
        mask = self.K.sub_restriction_of(lab.unsigned())
        return {
            (channel_key, int(self.K.members[k])): 1.0
            for k in np.nonzero(mask)[0]
        }

    # -- gauge ---------------------------------------------------------------

    def elementary_gauge_vectors(self):
        eyes = np.eye(self.n)
        return [GaugeVector(self.n, per_qubit=eyes[i]) for i in range(self.n)]

    def param_shift_for_gauge(self, eta: GaugeVector) -> np.ndarray:
        index = self.param_index()
        shift = np.zeros(len(index))
        K = self.K
        # SPAM: additive pattern shifts Moebius-invert to weight-1 patterns only
        for pt in self.spam_patterns:
            if bin(pt).count("1") == 1:
                shift[index[(PREP, pt)]] = eta.of_pattern(pt)
                shift[index[(MEAS, pt)]] = -eta.of_pattern(pt)
        for lid in self.layer_order:
            layer = self.layer_defs[lid]
            dx = np.empty(len(K))
            for k, idx in enumerate(K.members):
                p = Pauli.from_index(self.n, idx)
                q = layer.conjugate(p)
                dx[k] = eta.of_pattern(q.pattern) - eta.of_pattern(p.pattern)
            dr = K.r_from_x_matrix @ dx
            for k, idx in enumerate(K.members):
                shift[index[(lid, int(idx))]] = dr[k]
        return shift

    @cached_property
    def gauge_dim(self) -> int:
        return self.n

    # -- models ---------------------------------------------------------------

    def model_from_params(self, params: np.ndarray) -> GateSetNoiseModel:
        index = self.param_index()
        prep_r = {pt: params[index[(PREP, pt)]] for pt in self.spam_patterns}
        meas_r = {pt: params[index[(MEAS, pt)]] for pt in self.spam_patterns}
        layers = {}
        for lid in self.layer_order:
            r = np.array([params[index[(lid, int(idx))]] for idx in self.K.members])
            layers[lid] = QuasiLocalChannel(ChannelParams.from_r("fit", self.K, r))
        return GateSetNoiseModel(
            self.n,
            self._spam_from_pattern_r(prep_r),
            self._spam_from_pattern_r(meas_r),
            layers,
            self.layer_defs,
            gauge_class=self.gauge_class,
            physical=False,
        )

    def _spam_from_pattern_r(self, pattern_r: dict) -> QuasiLocalChannel:
        r = np.empty(len(self.K))
        for k, pt in enumerate(self.K.patterns):
            r[k] = pattern_r[int(pt)]
        params = ChannelParams.from_r("spam", self.K, r, pattern_symmetric=True)
        return QuasiLocalChannel(params)

    def truth_model(self, seed: int, magnitude: float = 0.01,
                    asymmetry: float = 0.0) -> GateSetNoiseModel:
        """Random physical model: uniform tau in [0, magnitude] with
        conjugate-pair eigenvalue asymmetry injected in x space."""
        rng = np.random.default_rng(seed)
        K = self.K
        prep = QuasiLocalChannel(ChannelParams.from_pattern_tau(
            "prep", K,
            {pt: rng.uniform(0.1, 1.0) * magnitude / 4 for pt in K.pattern_classes},
        ))
        meas = QuasiLocalChannel(ChannelParams.from_pattern_tau(
            "meas", K,
            {pt: rng.uniform(0.1, 1.0) * magnitude / 3 for pt in K.pattern_classes},
        ))
        layers = {}
        for lid in self.layer_order:
            tau = rng.uniform(0.0, magnitude, len(K)) / K.weights
            ch = ChannelParams.from_tau("gate", K, tau)
            if asymmetry:
                ch = self._inject_asymmetry(ch, self.layer_defs[lid], asymmetry)
            layers[lid] = QuasiLocalChannel(ch)
        return GateSetNoiseModel(
            self.n, prep, meas, layers, self.layer_defs,
            gauge_class=self.gauge_class, physical=True,
        )

    def _inject_asymmetry(self, ch: ChannelParams, layer: CliffordLayer,
                          delta: float) -> ChannelParams:
        """Shift x antisymmetrically on every conjugate label pair of the
        layer's coupled qubit pairs, keeping the pair product fixed."""
        K = ch.K
        dx = np.zeros(len(K))
        pos = K.position
        for k, idx in enumerate(K.members):
            p = Pauli.from_index(self.n, idx)
            q = layer.conjugate(p).unsigned()
            if q.index == idx or q.index not in pos:
                continue
            if idx < q.index:
                dx[k] += delta / 2
                dx[pos[q.index]] -= delta / 2
        new = ChannelParams.from_x(ch.kind, K, ch.x + dx)
        if np.any(new.tau < 0):
            # asymmetry pushed a generator negative; rebalance by uniform lift
            lift = -new.tau.min() + 1e-6
            new = ChannelParams.from_tau(ch.kind, K, new.tau + lift)
        return new

    # -- symmetric baseline ------------------------------------------------------

    def symmetric_orbits(self):
        orbit_keys = []
        orbit_of = {}
        pos = self.K.position
        for lid in self.layer_order:
            layer = self.layer_defs[lid]
            for idx in self.K.members:
                p = Pauli.from_index(self.n, idx)
                mate = layer.conjugate(p).unsigned().index
                canon = min(idx, mate) if mate in pos else idx
                key = (lid, canon)
                if key not in orbit_keys:
                    orbit_keys.append(key)
                orbit_of[(lid, int(idx))] = orbit_keys.index(key)
        return orbit_keys, orbit_of

    def gate_symmetric_expand(self, channel_key: str, lab: Pauli):
        """Row coefficients over merged tau parameters (anticommutation
        expansion keeps them integral)."""
        anti = self.K.anticommutation_with(lab.unsigned()).astype(float)
        out = {}
        layer = self.layer_defs[channel_key]
        pos = self.K.position
        for k, idx in enumerate(self.K.members):
            if not anti[k]:
                continue
            p = Pauli.from_index(self.n, idx)
            mate = layer.conjugate(p).unsigned().index
            canon = min(idx, mate) if mate in pos else idx
            key = (channel_key, canon)
            out[key] = out.get(key, 0.0) + 1.0
        return out

    def model_from_baseline(self, merged: dict, spam_s: dict) -> GateSetNoiseModel:
        layers = {}
        for lid in self.layer_order:
            layer = self.layer_defs[lid]
            pos = self.K.position
            tau = np.empty(len(self.K))
            for k, idx in enumerate(self.K.members):
                p = Pauli.from_index(self.n, idx)
                mate = layer.conjugate(p).unsigned().index
                canon = min(idx, mate) if mate in pos else idx
                tau[k] = float(merged[(lid, canon)])
            layers[lid] = QuasiLocalChannel(ChannelParams.from_tau("sym", self.K, tau))
        prep_x = np.zeros(len(self.K))
        meas_x = np.empty(len(self.K))
        for k, pt in enumerate(self.K.patterns):
            meas_x[k] = float(spam_s.get(int(pt), 0.0))
        return GateSetNoiseModel(
            self.n,
            QuasiLocalChannel(ChannelParams.from_x("prep", self.K, prep_x, pattern_symmetric=True)),
            QuasiLocalChannel(ChannelParams.from_x("meas", self.K, meas_x, pattern_symmetric=True)),
            layers, self.layer_defs, gauge_class=self.gauge_class, physical=False,
        )


# ---------------------------------------------------------------------------
# Two-qubit Z-restricted ansatz (single CNOT gate set).
# ---------------------------------------------------------------------------


class PairZAnsatz(RestrictedAnsatz):
    """Two qubits, one CNOT, everything restricted to Z-type labels.

    Nine parameters: prep/meas at patterns 10, 01, 11 and the gate at
    ZI, IZ, ZZ; six of them learnable.
    """

    def __init__(self):
        layer = CliffordLayer.cnots(2, [(0, 1)])
        labels = tuple(label_to_index(l) for l in ("ZI", "IZ", "ZZ"))
        super().__init__(
            "pair-z", 2, {"cx": layer},
            gate_labels={"cx": labels},
            spam_patterns=(0b01, 0b10, 0b11),
        )

    def plan(self, depths=(0, 1, 2)) -> list[ExperimentSetting]:
        """Z-basis settings, one per depth, harvesting IZ, ZI, ZZ."""
        settings = []
        for d in depths:
            tag = "spam" if d == 0 else ("depth-1" if d == 1 else
                                         ("depth-even" if d % 2 == 0 else "depth-odd"))
            settings.append(ExperimentSetting(
                n=2,
                prep_basis=plain_prep("ZZ"),
                layer_sequence=("cx",) * d,
                meas_basis=("Z", "Z"),
                harvested_observables=("IZ", "ZI", "ZZ"),
                tag=tag,
            ))
        return settings

    def truth_model(self, seed: int = 0, lam: dict | None = None,
                    prep_x: float = 0.006,
                    meas_rate: float = 0.012) -> GateSetNoiseModel:
        """Completely positive, samplable truth.

        The gate channel realizes the requested Z-type eigenvalues (defaults:
        the asymmetric conjugate pair 0.99 / 0.95) from explicit X-type error
        rates; realizability requires lam_ZZ >= lam_IZ + lam_ZI - 1.  State
        preparation noise is pattern-uniform so the symmetric baseline's only
        odd-depth bias is the conjugate-pair split; measurement noise is an
        arbitrary per-qubit product.
        """
        from .paulis import PauliChannel, label_to_index as l2i

        rng = np.random.default_rng(seed)
        lam = lam or {"ZI": 0.94, "IZ": 0.99, "ZZ": 0.95}
        q = {k: (1.0 - v) / 2.0 for k, v in lam.items()}
        s = (q["IZ"] + q["ZI"] + q["ZZ"]) / 2.0
        weights = {"IX": s - q["ZI"], "XI": s - q["IZ"], "XX": s - q["ZZ"]}
        if min(weights.values()) < 0:
            raise ValueError(
                "eigenvalues not realizable by a CP channel: need "
                "lam_ZZ >= lam_IZ + lam_ZI - 1 (and permutations)"
            )
        rates = {"II": 1.0 - sum(weights.values()), **weights}
        gate = DenseChannel(PauliChannel.from_rate_dict(2, rates))
        prep = PatternChannel(2, {pt: prep_x for pt in self.spam_patterns})
        xi = meas_rate * rng.uniform(0.5, 1.5, 2)
        meas = PatternChannel(2, {
            pt: float(sum(xi[i] for i in range(2) if (pt >> i) & 1))
            for pt in self.spam_patterns
        })
        return GateSetNoiseModel(
            2, prep, meas, {"cx": gate}, self.layer_defs,
            gauge_class="per_pattern", physical=True,
        )

    def target_settings(self, depths) -> list[ExperimentSetting]:
        """Mitigation targets: prepare |11>, measure Z-basis observables."""
        return [
            ExperimentSetting(
                n=2,
                prep_basis=(("Z", -1), ("Z", -1)),
                layer_sequence=("cx",) * d,
                meas_basis=("Z", "Z"),
                harvested_observables=("IZ", "ZI", "ZZ"),
                tag=f"target-d{d}",
            )
            for d in depths
        ]

    def targets(self, depths=(1, 2, 3, 4, 5, 6, 7, 8)):
        out = []
        for s in self.target_settings(depths):
            circ = s.to_circuit()
            for obs in s.harvested_observables:
                out.append((f"{s.tag}:{obs}", circ, Pauli.from_label(obs)))
        return out
