"""GHZ-state preparation from two fixed entangling-layer templates, the
restricted noise ansatz for mitigating its full-weight stabilizer, and the
21-qubit learning-design fixture.

Template ``a`` couples even-indexed pairs, template ``b`` odd-indexed pairs,
on a line of N qubits.  A GHZ state on qubits 0..n-1 is grown one qubit per
layer by alternating the two templates with per-instance single-qubit
dressing: the frontier pair applies a plain CNOT, interior pairs are turned
into CZs (Hadamard sandwich on the target qubit) which preserve the GHZ
state up to a Z correction, and idle pairs act on |00> trivially.  The
weight of the back-propagated X stabilizer grows 1 -> n, one unit per layer.

The noise model is *restricted*: only the gate labels this family of
circuits actually exposes are tracked, with no locality assumption, so the
gauge freedom keeps its general per-pattern form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np

from .ansatz import RestrictedAnsatz
from .experiments import DesignMatrix, ExperimentSetting
from .models import MEAS, PREP, GaugeVector, PatternChannel, LabelChannel, GateSetNoiseModel
from .paulis import CLIFFORD_1Q, CliffordLayer, Pauli, label_to_index, index_to_label
from .simulate import (
    Circuit,
    EntanglingLayer,
    MeasureBasis,
    PrepareComputational,
    SingleQubitLayer,
    backpropagate_observable,
)

DEFAULT_N = 21
DEFAULT_SIZES = tuple(range(3, 22, 2))


def ghz_templates(n_qubits: int) -> dict[str, CliffordLayer]:
    a = CliffordLayer.cnots(n_qubits, [(i, i + 1) for i in range(0, n_qubits - 1, 2)])
    b = CliffordLayer.cnots(n_qubits, [(i, i + 1) for i in range(1, n_qubits - 1, 2)])
    return {"a": a, "b": b}


def _template_for_step(t: int) -> str:
    return "a" if t % 2 == 1 else "b"


def ghz_target_circuit(n: int, n_qubits: int = DEFAULT_N) -> Circuit:
    """Prepare GHZ on qubits 0..n-1 with n-1 alternating template layers and
    measure the full-weight X stabilizer's basis.

    Interior ("hold") pairs dress the template CNOT into CZ.(S x S), which
    fixes |00> and |11> with a common phase (state preserved, no corrections)
    and maps X x X to itself exactly, so the back-propagated stabilizer keeps
    its clean one-qubit-per-layer growth.
    """
    if not 2 <= n <= n_qubits:
        raise ValueError("need 2 <= n <= total qubit count")
    templates = ghz_templates(n_qubits)
    ident = CLIFFORD_1Q["I"]
    ops: list = [PrepareComputational(0)]
    pending = [ident] * n_qubits
    pending[0] = CLIFFORD_1Q["H"]
    for t in range(1, n):
        lid = _template_for_step(t)
        holds = [(i, j) for i, j in templates[lid].cnot_pairs if j <= t - 1]
        for i, j in holds:
            # pre-dressing of CZ.(S x S) as a dressed CNOT: S on the control,
            # S then H on the target
            pending[i] = CLIFFORD_1Q["S"].compose(pending[i])
            pending[j] = CLIFFORD_1Q["H"].compose(CLIFFORD_1Q["S"]).compose(pending[j])
        ops.append(SingleQubitLayer(tuple(pending)))
        ops.append(EntanglingLayer(lid))
        pending = [ident] * n_qubits
        for _, j in holds:
            pending[j] = CLIFFORD_1Q["H"]
    ops.append(SingleQubitLayer(tuple(pending)))
    ops.append(MeasureBasis(tuple("X" * n + "Z" * (n_qubits - n))))
    return Circuit(n_qubits, tuple(ops))


def ghz_observable(n: int, n_qubits: int = DEFAULT_N) -> Pauli:
    return Pauli.from_label("X" * n + "I" * (n_qubits - n))


# ---------------------------------------------------------------------------
# Restricted ansatz for the GHZ sweep.
# ---------------------------------------------------------------------------


class GhzAnsatz(RestrictedAnsatz):
    """Restricted model covering every label the GHZ sweep's back-propagated
    stabilizer presents to the two templates, plus conjugate partners."""

    def __init__(self, n_qubits: int = DEFAULT_N, sizes=DEFAULT_SIZES):
        self.n_qubits = n_qubits
        self.sizes = tuple(sizes)
        layer_defs = ghz_templates(n_qubits)
        target_labels: dict[str, list[int]] = {"a": [], "b": []}
        patterns: set[int] = set()
        self._target_records = {}
        for n in self.sizes:
            circ = ghz_target_circuit(n, n_qubits)
            records, ideal = backpropagate_observable(
                circ, ghz_observable(n, n_qubits), layer_defs
            )
            if ideal != 1.0:
                raise AssertionError(f"GHZ-{n} stabilizer back-prop broke (ideal={ideal})")
            self._target_records[n] = records
            for ref, lab in records:
                if ref.kind in (PREP, MEAS):
                    patterns.add(lab.pattern)
                else:
                    target_labels[ref.kind].append(lab.unsigned().index)
        gate_labels = {}
        self._target_seen = {}
        for lid, idxs in target_labels.items():
            seen = tuple(dict.fromkeys(idxs))
            mates = tuple(layer_defs[lid].conjugate(Pauli.from_index(n_qubits, i)).unsigned().index
                          for i in seen)
            gate_labels[lid] = seen + mates
            self._target_seen[lid] = seen
            for i in seen + mates:
                patterns.add(Pauli.from_index(n_qubits, i).pattern)
        super().__init__(
            f"ghz-{n_qubits}", n_qubits, layer_defs,
            gate_labels=gate_labels,
            spam_patterns=tuple(patterns),
        )

    # -- plan -----------------------------------------------------------------

    def plan(self, depths=(2, 4, 8)) -> list[ExperimentSetting]:
        """SPAM reference, grouped depth-1 settings, and depth-even settings
        per conjugate pair."""
        n = self.n
        settings = [ExperimentSetting(
            n=n,
            prep_basis=tuple(("Z", 1) for _ in range(n)),
            layer_sequence=(),
            meas_basis=tuple("Z" * n),
            harvested_observables=tuple(
                _z_string(n, pt) for pt in self.spam_patterns
            ),
            tag="spam",
        )]
        for lid in self.layer_order:
            layer = self.layer_defs[lid]
            groups: list[dict] = []
            for idx in self._target_seen[lid]:
                a = Pauli.from_index(n, idx)
                mate = layer.conjugate(a).unsigned()
                placed = False
                for g in groups:
                    # greedy grouping over the combined prep+meas string
                    mp = _merge_partial(g["prep"], a.label)
                    mm = _merge_partial(g["meas"], mate.label)
                    if mp is not None and mm is not None:
                        g["prep"], g["meas"] = mp, mm
                        g["harvest"].append(mate.label)
                        placed = True
                        break
                if not placed:
                    groups.append({"prep": a.label, "meas": mate.label,
                                   "harvest": [mate.label]})
            for g in groups:
                settings.append(ExperimentSetting(
                    n=n,
                    prep_basis=tuple((c, 1) for c in _pad_basis(g["prep"])),
                    layer_sequence=(lid,),
                    meas_basis=tuple(_pad_basis(g["meas"])),
                    harvested_observables=tuple(g["harvest"]),
                    tag=f"depth-1:{lid}",
                ))
            done_pairs = set()
            for idx in self._target_seen[lid]:
                a = Pauli.from_index(n, idx)
                mate = layer.conjugate(a).unsigned().index
                if min(idx, mate) in done_pairs:
                    continue
                done_pairs.add(min(idx, mate))
                basis = _pad_basis(a.label)
                for d in depths:
                    if d % 2:
                        raise ValueError("repetition depths must be even")
                    settings.append(ExperimentSetting(
                        n=n,
                        prep_basis=tuple((c, 1) for c in basis),
                        layer_sequence=(lid,) * d,
                        meas_basis=tuple(basis),
                        harvested_observables=(a.label,),
                        tag=f"depth-even:{lid}:{d}",
                    ))
        return settings

    # -- truth and targets ------------------------------------------------------

    def truth_model(self, seed: int = 0, qubit_rate: float = 0.004,
                    asymmetry: float = 0.01,
                    spam_rate: tuple[float, float] = (0.002, 0.004)) -> GateSetNoiseModel:
        """Synthetic truth: per-label x proportional to label weight, with a
        fixed conjugate-pair eigenvalue ratio (1 + asymmetry) oriented so the
        symmetric model's bias compounds along the target circuit.  SPAM is
        additive per qubit, so nested supports order their error strengths.
        """
        rng = np.random.default_rng(seed)
        delta = np.log1p(asymmetry)
        gates = {}
        for lid in self.layer_order:
            layer = self.layer_defs[lid]
            x: dict[int, float] = {}
            for idx in self._target_seen[lid]:
                a = Pauli.from_index(self.n, idx)
                mate = layer.conjugate(a).unsigned().index
                base = a.weight * qubit_rate * rng.uniform(0.5, 1.5)
                x[idx] = base - delta / 2
                x[mate] = base + delta / 2
            gates[lid] = LabelChannel(self.n, x)
        channels = []
        for rate in spam_rate:
            xi = rate * rng.uniform(0.5, 1.5, self.n)
            channels.append(PatternChannel(self.n, {
                pt: float(sum(xi[i] for i in range(self.n) if (pt >> i) & 1))
                for pt in self.spam_patterns
            }))
        return GateSetNoiseModel(
            self.n, channels[0], channels[1], gates, self.layer_defs,
            gauge_class="per_pattern", physical=True,
        )

    def targets(self):
        return [
            (f"ghz-{n}", ghz_target_circuit(n, self.n), ghz_observable(n, self.n))
            for n in self.sizes
        ]


def _z_string(n: int, pattern: int) -> str:
    return "".join("Z" if (pattern >> i) & 1 else "I" for i in range(n))


def _pad_basis(label: str) -> str:
    return "".join(c if c != "I" else "Z" for c in label)


def _merge_partial(p: str, q: str) -> str | None:
    """Union of two partial labels ('I' = unconstrained), None on conflict."""
    out = []
    for a, b in zip(p, q):
        if a == "I":
            out.append(b)
        elif b == "I" or a == b:
            out.append(a)
        else:
            return None
    return "".join(out)


# ---------------------------------------------------------------------------
# 21-qubit fixture design (56 observables x 46 parameters).
# ---------------------------------------------------------------------------


@dataclass
class FixtureDesign:
    """Learning design shipped as data: the two SAT-synthesized GHZ template
    layers are not reconstructible from their labels alone, so the row set is
    carried verbatim and conjugate partners are inferred from the paired
    depth-even rows."""

    design: DesignMatrix
    row_tags: list[str]
    partner: dict[tuple[str, int], tuple[str, int]]

    @property
    def n(self) -> int:
        return self.design.n

    def param_index(self):
        return self.design.param_index

    def elementary_gauge_vectors(self):
        pats = sorted(
            {key for ch, key in self.design.param_index if ch in (PREP, MEAS)},
            key=lambda m: (bin(m).count("1"), m),
        )
        return [GaugeVector(self.n, per_pattern={pt: 1.0}) for pt in pats]

    def param_shift_for_gauge(self, eta: GaugeVector) -> np.ndarray:
        index = self.design.param_index
        shift = np.zeros(len(index))
        for (ch, key), col in index.items():
            if ch == PREP:
                shift[col] = eta.of_pattern(key)
            elif ch == MEAS:
                shift[col] = -eta.of_pattern(key)
            else:
                mate_ch, mate_key = self.partner[(ch, key)]
                pt = Pauli.from_index(self.n, key).pattern
                mate_pt = Pauli.from_index(self.n, mate_key).pattern
                shift[col] = eta.of_pattern(mate_pt) - eta.of_pattern(pt)
        return shift


def load_fixture_design(n_qubits: int = DEFAULT_N) -> FixtureDesign:
    text = resources.files("gaugepec.data").joinpath("ghz21_design.txt").read_text()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        typ, *terms = line.split()
        parsed = []
        for term in terms:
            coef, rest = term.split("*", 1)
            ch, lab = rest.split(":", 1)
            parsed.append((int(coef), ch, lab))
        rows.append((typ, parsed))

    params: dict[tuple, None] = {}
    for _, parsed in rows:
        for _, ch, lab in parsed:
            if ch in (PREP, MEAS):
                params[(ch, Pauli.from_label(lab).pattern)] = None
            else:
                params[(ch, label_to_index(lab))] = None

    def sort_key(key):
        ch, k = key
        order = {PREP: 0, MEAS: 1}.get(ch, 2)
        lab = index_to_label(n_qubits, k) if order == 2 else None
        wt = bin(k).count("1") if order != 2 else sum(c != "I" for c in lab)
        return (order, ch, wt, lab or k)

    index = {key: i for i, key in enumerate(sorted(params, key=sort_key))}
    matrix = np.zeros((len(rows), len(index)))
    meta, tags = [], []
    partner: dict[tuple, tuple] = {}
    for i, (typ, parsed) in enumerate(rows):
        gate_terms = []
        for coef, ch, lab in parsed:
            if ch in (PREP, MEAS):
                key = (ch, Pauli.from_label(lab).pattern)
            else:
                key = (ch, label_to_index(lab))
                gate_terms.append(key)
            matrix[i, index[key]] += coef
        meta.append((i, typ))
        tags.append(typ)
        if typ == "depth-even" and len(gate_terms) == 2:
            x, y = gate_terms
            partner[x] = y
            partner[y] = x
    for key in list(index):
        ch, k = key
        if ch not in (PREP, MEAS):
            partner.setdefault(key, key)  # pattern-preserving label
    design = DesignMatrix(matrix, meta, index, "x", n_qubits, {})
    return FixtureDesign(design, tags, partner)
