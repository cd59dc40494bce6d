"""Ring ansatz: two brickwork CNOT layers on a closed loop of n qubits
(n a multiple of four), fully quasi-local noise (28n parameters, n of them
gauge), a size-independent learning plan, and the "staircase" target
circuits that probe every degenerate eigenvalue pair of every CNOT.

The learning bases repeat with period four around the ring.  A depth-1
setting prepares a product eigenbasis, applies one layer, and measures in a
basis aligned with the conjugated input; depth-even settings use one basis
for both ends.  Harvested observables are all weight-1 and nearest-neighbor
weight-2 restrictions of the measurement basis (plus the full string) whose
back-propagated preparation label the input basis supports.

Each staircase block applies one template layer twice with single-qubit
dressing chosen so the block swaps Z_i and Z_{i+1} exactly while the noise
slots see labels from two *different* degenerate families; alternating two
block types over four block layers covers all four families of every CNOT.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .ansatz import QuasiLocalAnsatz
from .experiments import ExperimentSetting
from .models import GateSetNoiseModel
from .paulis import CLIFFORD_1Q, CliffordLayer, Pauli, clifford_from_gates
from .quasilocal import FactorSet
from .simulate import (
    Circuit,
    EntanglingLayer,
    MeasureBasis,
    PrepareComputational,
    SingleQubitLayer,
)

# Depth-1 learning bases for the even layer, one period (4 qubits); the odd
# layer uses the same bases rotated right by one qubit.  'I' in an output
# basis is a free slot (padded with Z).
DEPTH1_BASES = (
    ("YZYZ", "XYXY"),
    ("YYYY", "XZXZ"),
    ("XZXZ", "YYYY"),
    ("XYXY", "YZYZ"),
    ("ZYXX", "ZYXX"),
    ("XXZY", "XXZY"),
    ("ZYYX", "IYYI"),
    ("YXZY", "YIIY"),
    ("ZZXX", "IZXI"),
    ("XXZZ", "XIIZ"),
    ("ZZYX", "IZYI"),
    ("YXZZ", "YIIZ"),
    ("XXXX", "XXXX"),
    ("YXYX", "YXYX"),
    ("ZXZX", "ZXZX"),
    ("ZYZY", "ZYZY"),
    ("ZZZZ", "ZZZZ"),
)

DEPTH_EVEN_BASES = ("XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ")

# Staircase block dressings, (control, target) per coupled pair.  Type 1
# exposes the IZ/ZZ and XI/XX families, type 2 the ZY/IY and YX/YI families.
_BLOCK_DRESSING = {
    1: (("H", "I"), ("H", "H"), ("H", "I")),
    2: (("SXDG", "SXDG"), ("SXDG", "S"), ("SXDG", "SXDG")),
}


def ring_layers(n: int) -> dict[str, CliffordLayer]:
    even = CliffordLayer.cnots(n, [(i, i + 1) for i in range(0, n, 2)])
    odd = CliffordLayer.cnots(n, [(i, (i + 1) % n) for i in range(1, n, 2)])
    return {"even": even, "odd": odd}


def _repeat(unit: str, n: int) -> str:
    return (unit * (n // len(unit) + 1))[:n]


def _rot(s: str, k: int) -> str:
    return s[-k:] + s[:-k]


class RingAnsatz(QuasiLocalAnsatz):
    def __init__(self, n: int):
        if n % 4:
            raise ValueError("ring size must be a multiple of four")
        super().__init__(f"ring-{n}", n, ring_layers(n), FactorSet.two_local_ring(n))

    # -- plan -------------------------------------------------------------------

    def plan(self, depths=(4, 12, 24)) -> list[ExperimentSetting]:
        n = self.n
        settings = [self._setting("Z" * n, (), "Z" * n, "spam")]
        for lid in self.layer_order:
            rot = 0 if lid == "even" else 1
            for unit_in, unit_out in DEPTH1_BASES:
                basis_in = _repeat(_rot(unit_in, rot), n)
                basis_out = _repeat(_rot(unit_out, rot), n).replace("I", "Z")
                settings.append(self._setting(basis_in, (lid,), basis_out, f"depth-1:{lid}"))
            for unit in DEPTH_EVEN_BASES:
                basis = _repeat(unit, n)
                for d in depths:
                    if d % 2:
                        raise ValueError("repetition depths must be even")
                    settings.append(
                        self._setting(basis, (lid,) * d, basis, f"depth-even:{lid}:{d}")
                    )
        return settings

    def _setting(self, basis_in: str, seq, basis_out: str, tag: str) -> ExperimentSetting:
        harvested = self._harvest(basis_in, seq, basis_out)
        return ExperimentSetting(
            n=self.n,
            prep_basis=tuple((c, 1) for c in basis_in),
            layer_sequence=tuple(seq),
            meas_basis=tuple(basis_out),
            harvested_observables=harvested,
            tag=tag,
        )

    def _harvest(self, basis_in: str, seq, basis_out: str) -> tuple[str, ...]:
        """Contiguous restrictions of the output basis up to width 3, plus the
        full string, kept when the back-propagated preparation label sits
        inside the input basis.  Width 3 is required to saturate the 27n
        learnable directions; widths 1 and 2 alone leave the plan rank short.
        """
        n = self.n
        candidates = []
        for w in (1, 2, 3):
            for i in range(n):
                sup = [(i + k) % n for k in range(w)]
                candidates.append({q: basis_out[q] for q in sup})
        candidates.append({i: c for i, c in enumerate(basis_out)})
        out = []
        for cand in candidates:
            label = "".join(cand.get(i, "I") for i in range(n))
            back = Pauli.from_label(label)
            for lid in reversed(seq):
                back = self.layer_defs[lid].conjugate_adjoint(back)
            if all(label_c == "I" or basis_in[i] == label_c
                   for i, label_c in enumerate(back.label)):
                if label not in out:
                    out.append(label)
        return tuple(out)

    # -- staircase targets -------------------------------------------------------

    def staircase_circuit(self, blocks: int) -> Circuit:
        """`blocks` block layers; block t acts on the even (t odd) or odd
        (t even) sublattice with dressing type 1,1,2,2,1,1,... so that four
        consecutive blocks probe all four degenerate families per CNOT."""
        n = self.n
        ops: list = [PrepareComputational(0)]
        for t in range(1, blocks + 1):
            lid = "even" if t % 2 == 1 else "odd"
            btype = 1 if ((t - 1) // 2) % 2 == 0 else 2
            d0, d1, d2 = (self._dressing_layer(lid, names) for names in _BLOCK_DRESSING[btype])
            ops.extend([d0, EntanglingLayer(lid), d1, EntanglingLayer(lid), d2])
        ops.append(MeasureBasis(tuple("Z" * n)))
        return Circuit(n, tuple(ops))

    def _dressing_layer(self, lid: str, names: tuple[str, str]) -> SingleQubitLayer:
        els = [CLIFFORD_1Q["I"]] * self.n
        for c, t in self.layer_defs[lid].cnot_pairs:
            els[c] = CLIFFORD_1Q[names[0]]
            els[t] = CLIFFORD_1Q[names[1]]
        return SingleQubitLayer(tuple(els))

    def targets(self, block_depths=(1, 2, 3, 4)):
        out = []
        for d in block_depths:
            circ = self.staircase_circuit(d)
            for q in range(self.n):
                obs = Pauli.from_label("".join("Z" if i == q else "I" for i in range(self.n)))
                out.append((f"z{q}@b{d}", circ, obs))
        return out
