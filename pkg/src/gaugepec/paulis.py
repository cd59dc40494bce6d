"""Exact algebra of n-qubit Pauli operators, Pauli channels, and Clifford-layer
conjugation.

Conventions
-----------
* A Pauli operator is stored in symplectic form: two length-n bit masks
  ``x`` and ``z`` (bit ``i`` refers to qubit ``i``) plus a sign in {+1, -1}.
  Qubit 0 is the *leftmost* character of the text label, so ``"IZ"`` has
  Z on qubit 1.
* Unsigned labels are indexed densely by ``sum_i digit_i * 4**i`` where the
  per-qubit digit is ``x + 2*z`` (I=0, X=1, Z=2, Y=3).  Dense channel arrays
  use this ordering.
* Pauli channels are diagonal maps: eigenvalue ``lam[a]`` scales Pauli
  ``P_a``.  Error rates ``p`` and eigenvalues ``lam`` are related by a
  Walsh-Hadamard-type transform whose kernel is the commutation parity.
* ``CliffordLayer`` unitaries act as ``U = CNOTs . singles`` (single-qubit
  part first in time).  Dense enumeration is capped at 12 qubits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_DENSE_QUBITS = 12

_CHARS = "IXZY"  # digit order: x + 2*z
_CHAR_TO_DIGIT = {"I": 0, "X": 1, "Z": 2, "Y": 3}

# Per-qubit commutation parity between digits (1 = anticommute).
_ANTI = np.zeros((4, 4), dtype=np.uint8)
for _a in range(1, 4):
    for _b in range(1, 4):
        if _a != _b:
            _ANTI[_a, _b] = 1

# Kernel of the rates<->eigenvalues transform, one qubit: (-1)**anticommute.
_WHT_KERNEL_1Q = 1.0 - 2.0 * _ANTI.astype(np.float64)

# Single-qubit Pauli products: _MUL_DIGIT[a,b] is the digit of P_a P_b and
# _MUL_PHASE[a,b] the exponent k of i in P_a P_b = i^k P_c.
_MUL_DIGIT = np.zeros((4, 4), dtype=np.uint8)
_MUL_PHASE = np.zeros((4, 4), dtype=np.int8)
_XZ_OF_DIGIT = {0: (0, 0), 1: (1, 0), 2: (0, 1), 3: (1, 1)}


def _mul_1q(a: int, b: int) -> tuple[int, int]:
    ax, az = _XZ_OF_DIGIT[a]
    bx, bz = _XZ_OF_DIGIT[b]
    # P(x,z) := i^{x z} X^x Z^z; track the i-exponent of the product.
    phase = (ax * az + bx * bz) % 4
    phase = (phase + 2 * (az * bx)) % 4  # commute Z^az past X^bx
    cx, cz = (ax + bx) % 2, (az + bz) % 2
    phase = (phase - cx * cz) % 4
    return cx + 2 * cz, phase


for _a in range(4):
    for _b in range(4):
        _MUL_DIGIT[_a, _b], _MUL_PHASE[_a, _b] = _mul_1q(_a, _b)


class DimensionMismatchError(ValueError):
    """Operands act on different qubit counts."""


@dataclass(frozen=True)
class Pauli:
    """Signed n-qubit Pauli operator in symplectic (x, z) form."""

    n: int
    x: int
    z: int
    sign: int = 1

    def __post_init__(self):
        if not 0 <= self.x < (1 << self.n) or not 0 <= self.z < (1 << self.n):
            raise ValueError("bit masks exceed qubit count")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def from_label(cls, label: str) -> "Pauli":
        """Parse a text label such as ``"-XIZ"`` (qubit 0 leftmost)."""
        sign = 1
        if label and label[0] in "+-":
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        x = z = 0
        for i, ch in enumerate(label):
            try:
                d = _CHAR_TO_DIGIT[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli character {ch!r}") from None
            x |= (d & 1) << i
            z |= (d >> 1) << i
        return cls(len(label), x, z, sign)

    @classmethod
    def identity(cls, n: int) -> "Pauli":
        return cls(n, 0, 0, 1)

    @classmethod
    def from_index(cls, n: int, index: int, sign: int = 1) -> "Pauli":
        x = z = 0
        for i in range(n):
            d = (index >> (2 * i)) & 3
            x |= (d & 1) << i
            z |= (d >> 1) << i
        return cls(n, x, z, sign)

    @property
    def index(self) -> int:
        """Dense label index (base-4 digits, qubit 0 least significant)."""
        idx = 0
        for i in range(self.n):
            d = ((self.x >> i) & 1) + 2 * ((self.z >> i) & 1)
            idx += d << (2 * i)
        return idx

    @property
    def label(self) -> str:
        """Unsigned text label."""
        return "".join(
            _CHARS[((self.x >> i) & 1) + 2 * ((self.z >> i) & 1)]
            for i in range(self.n)
        )

    @property
    def pattern(self) -> int:
        """Support pattern as a bit mask (bit i set iff qubit i non-identity)."""
        return self.x | self.z

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if (self.pattern >> i) & 1)

    @property
    def weight(self) -> int:
        return bin(self.pattern).count("1")

    def unsigned(self) -> "Pauli":
        return Pauli(self.n, self.x, self.z, 1)

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "+") + self.label


def symplectic_product(a: Pauli, b: Pauli) -> int:
    """0 iff the two Paulis commute, 1 otherwise."""
    if a.n != b.n:
        raise DimensionMismatchError(f"{a.n} vs {b.n} qubits")
    return (bin(a.x & b.z).count("1") + bin(a.z & b.x).count("1")) % 2


def anticommutes_index(n: int, ia: int, ib: int) -> int:
    """Commutation parity between two dense label indices."""
    out = 0
    for i in range(n):
        out ^= _ANTI[(ia >> (2 * i)) & 3, (ib >> (2 * i)) & 3]
    return int(out)


def pattern_of_index(n: int, index: int) -> int:
    pt = 0
    for i in range(n):
        if (index >> (2 * i)) & 3:
            pt |= 1 << i
    return pt


def weight_of_index(n: int, index: int) -> int:
    return bin(pattern_of_index(n, index)).count("1")


def index_to_label(n: int, index: int) -> str:
    return "".join(_CHARS[(index >> (2 * i)) & 3] for i in range(n))


def label_to_index(label: str) -> int:
    idx = 0
    for i, ch in enumerate(label):
        idx += _CHAR_TO_DIGIT[ch] << (2 * i)
    return idx


def all_labels(n: int):
    """Iterate all 4**n labels in dense index order."""
    _check_dense(n)
    return (index_to_label(n, i) for i in range(4**n))


def _check_dense(n: int):
    if n > MAX_DENSE_QUBITS:
        raise ValueError(
            f"dense enumeration limited to {MAX_DENSE_QUBITS} qubits, got {n}"
        )


@lru_cache(maxsize=32)
def anticommutation_table(n: int) -> np.ndarray:
    """(4^n, 4^n) uint8 matrix of commutation parities between label indices."""
    _check_dense(n)
    idx = np.arange(4**n)
    t = np.zeros((4**n, 4**n), dtype=np.uint8)
    for i in range(n):
        d = (idx >> (2 * i)) & 3
        t ^= _ANTI[np.ix_(d, d)]
    return t


# ---------------------------------------------------------------------------
# Single-qubit Clifford group (24 elements) via images of X and Z.
# ---------------------------------------------------------------------------

_SIGNED = [(d, s) for d in (1, 2, 3) for s in (1, -1)]


@dataclass(frozen=True)
class SingleQubitClifford:
    """One of the 24 single-qubit Cliffords, identified by its conjugation
    action ``P -> U P U^dag`` on X and Z."""

    img_x: tuple[int, int]  # (digit, sign)
    img_z: tuple[int, int]

    def __post_init__(self):
        if _ANTI[self.img_x[0], self.img_z[0]] != 1:
            raise ValueError("images of X and Z must anticommute")

    @property
    def img_y(self) -> tuple[int, int]:
        # Y = i X Z, so U Y U^dag = i (U X U^dag)(U Z U^dag).
        dx, sx = self.img_x
        dz, sz = self.img_z
        d = int(_MUL_DIGIT[dx, dz])
        k = int(_MUL_PHASE[dx, dz])  # P_dx P_dz = i^k P_d with k odd here
        # i * i^k = i^(k+1); for anticommuting dx != dz, k is 1 or 3.
        s = 1 if (k + 1) % 4 == 0 else -1
        return d, s * sx * sz

    def conj_digit(self, d: int) -> tuple[int, int]:
        if d == 0:
            return 0, 1
        return {1: self.img_x, 2: self.img_z, 3: self.img_y}[d]

    def compose(self, other: "SingleQubitClifford") -> "SingleQubitClifford":
        """Action of (self after other): P -> self(other(P))."""

        def push(img):
            d, s = img
            d2, s2 = self.conj_digit(d)
            return d2, s * s2

        return SingleQubitClifford(push(other.img_x), push(other.img_z))

    def inverse(self) -> "SingleQubitClifford":
        imgs = {1: self.img_x, 2: self.img_z, 3: self.img_y}
        inv = {}
        for src, (d, s) in imgs.items():
            inv[d] = (src, s)
        return SingleQubitClifford(inv[1], inv[2])

    @property
    def matrix(self) -> np.ndarray:
        """A 2x2 unitary with this conjugation action (global phase arbitrary)."""
        return _clifford_1q_matrix(self.img_x, self.img_z)


def _clifford_1q_matrix(img_x, img_z) -> np.ndarray:
    target_x = img_x[1] * PAULI_MATS_1Q[img_x[0]]
    target_z = img_z[1] * PAULI_MATS_1Q[img_z[0]]
    for mat in _CLIFFORD_MATRIX_POOL:
        if np.allclose(mat @ PAULI_MATS_1Q[1] @ mat.conj().T, target_x) and np.allclose(
            mat @ PAULI_MATS_1Q[2] @ mat.conj().T, target_z
        ):
            return mat
    raise RuntimeError("no matrix found for Clifford element")  # pragma: no cover


PAULI_MATS_1Q = {
    0: np.eye(2, dtype=complex),
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[1, 0], [0, -1]], dtype=complex),
    3: np.array([[0, -1j], [1j, 0]], dtype=complex),
}

_H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S_MAT = np.array([[1, 0], [0, 1j]], dtype=complex)


def _matrix_pool():
    pool = [np.eye(2, dtype=complex)]
    frontier = [np.eye(2, dtype=complex)]
    def canon(m):
        # strip global phase for dedup
        idx = np.argmax(np.abs(m))
        ph = m.flat[idx] / abs(m.flat[idx])
        return np.round(m / ph, 9)
    seen = {canon(pool[0]).tobytes()}
    while frontier:
        new = []
        for m in frontier:
            for g in (_H_MAT, _S_MAT):
                cand = g @ m
                key = canon(cand).tobytes()
                if key not in seen:
                    seen.add(key)
                    pool.append(cand)
                    new.append(cand)
        frontier = new
    return pool


_CLIFFORD_MATRIX_POOL = _matrix_pool()

ID_1Q = SingleQubitClifford((1, 1), (2, 1))
H_1Q = SingleQubitClifford((2, 1), (1, 1))
S_1Q = SingleQubitClifford((3, 1), (2, 1))  # X -> Y, Z -> Z
SDG_1Q = S_1Q.inverse()
X_1Q = SingleQubitClifford((1, 1), (2, -1))
Y_1Q = SingleQubitClifford((1, -1), (2, -1))
Z_1Q = SingleQubitClifford((1, -1), (2, 1))
SX_1Q = SingleQubitClifford((1, 1), (3, -1))  # X -> X, Z -> -Y
SXDG_1Q = SX_1Q.inverse()
HS_1Q = H_1Q.compose(S_1Q)

CLIFFORD_1Q = {
    "I": ID_1Q,
    "X": X_1Q,
    "Y": Y_1Q,
    "Z": Z_1Q,
    "H": H_1Q,
    "S": S_1Q,
    "SDG": SDG_1Q,
    "SX": SX_1Q,
    "SXDG": SXDG_1Q,
}


def clifford_from_gates(*names: str) -> SingleQubitClifford:
    """Compose named gates in time order (first name acts first)."""
    out = ID_1Q
    for name in names:
        out = CLIFFORD_1Q[name.upper()].compose(out)
    return out


def clifford_mapping(src: str, dst_digit: int, dst_sign: int = 1) -> SingleQubitClifford:
    """Some single-qubit Clifford whose conjugation sends ``src`` to the signed
    destination digit (search over the group, deterministic)."""
    src_d = _CHAR_TO_DIGIT[src]
    for el in all_single_qubit_cliffords():
        d, s = el.conj_digit(src_d)
        if (d, s) == (dst_digit, dst_sign):
            return el
    raise ValueError("no Clifford with requested action")  # pragma: no cover


@lru_cache(maxsize=1)
def all_single_qubit_cliffords() -> tuple[SingleQubitClifford, ...]:
    out = []
    for img_x in _SIGNED:
        for img_z in _SIGNED:
            if _ANTI[img_x[0], img_z[0]] == 1:
                out.append(SingleQubitClifford(img_x, img_z))
    assert len(out) == 24
    return tuple(out)


# ---------------------------------------------------------------------------
# Clifford layers: disjoint CNOTs plus single-qubit Cliffords.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CliffordLayer:
    """Layer of disjoint CNOTs preceded by single-qubit Cliffords.

    The layer unitary is ``U = (product of CNOTs) . (tensor of singles)``,
    i.e. the single-qubit part acts first in time.
    """

    n: int
    cnot_pairs: tuple[tuple[int, int], ...] = ()
    singles: tuple[SingleQubitClifford, ...] = ()

    def __post_init__(self):
        used = set()
        for c, t in self.cnot_pairs:
            if c == t or not (0 <= c < self.n and 0 <= t < self.n):
                raise ValueError(f"bad CNOT pair ({c},{t})")
            if c in used or t in used:
                raise ValueError("qubit appears in more than one CNOT pair")
            used.update((c, t))
        if self.singles and len(self.singles) != self.n:
            raise ValueError("need one single-qubit Clifford per qubit")

    @classmethod
    def cnots(cls, n: int, pairs) -> "CliffordLayer":
        return cls(n, tuple((int(c), int(t)) for c, t in pairs))

    @property
    def is_cnot_only(self) -> bool:
        return not self.singles or all(s == ID_1Q for s in self.singles)

    def _conj_singles(self, p: Pauli, adjoint: bool) -> Pauli:
        if not self.singles:
            return p
        x = z = 0
        sign = p.sign
        for i in range(self.n):
            d = ((p.x >> i) & 1) + 2 * ((p.z >> i) & 1)
            el = self.singles[i].inverse() if adjoint else self.singles[i]
            d2, s = el.conj_digit(d)
            sign *= s
            x |= (d2 & 1) << i
            z |= (d2 >> 1) << i
        return Pauli(p.n, x, z, sign)

    def _conj_cnots(self, p: Pauli) -> Pauli:
        x, z, sign = p.x, p.z, p.sign
        for c, t in self.cnot_pairs:
            xc, zc = (x >> c) & 1, (z >> c) & 1
            xt, zt = (x >> t) & 1, (z >> t) & 1
            if xc & zt & (1 ^ xt ^ zc):
                sign = -sign
            x ^= xc << t
            z ^= zt << c
        return Pauli(p.n, x, z, sign)

    def conjugate(self, p: Pauli) -> Pauli:
        """Forward conjugation ``U P U^dag``."""
        if p.n != self.n:
            raise DimensionMismatchError(f"{p.n} vs {self.n} qubits")
        return self._conj_cnots(self._conj_singles(p, adjoint=False))

    def conjugate_adjoint(self, p: Pauli) -> Pauli:
        """Heisenberg direction ``U^dag P U`` (used for back-propagation)."""
        if p.n != self.n:
            raise DimensionMismatchError(f"{p.n} vs {self.n} qubits")
        return self._conj_singles(self._conj_cnots(p), adjoint=True)

    def conjugate_index(self, index: int) -> int:
        return self.conjugate(Pauli.from_index(self.n, index)).index

    @lru_cache(maxsize=None)
    def index_permutation(self) -> np.ndarray:
        """perm[a] = index of U P_a U^dag, with signs in a companion array."""
        _check_dense(self.n)
        perm = np.empty(4**self.n, dtype=np.int64)
        signs = np.empty(4**self.n, dtype=np.int8)
        for a in range(4**self.n):
            q = self.conjugate(Pauli.from_index(self.n, a))
            perm[a] = q.index
            signs[a] = q.sign
        return perm, signs

    def unitary(self) -> np.ndarray:
        """Dense 2^n x 2^n unitary (n small; for oracle-style checks)."""
        _check_dense(self.n)
        dim = 1 << self.n
        u = np.eye(dim, dtype=complex)
        if self.singles:
            m = np.array([[1.0 + 0j]])
            # qubit 0 is the most significant axis in kron order below, so
            # build with qubit 0 first to match basis index b0 b1 ... b_{n-1}
            for i in range(self.n):
                m = np.kron(m, self.singles[i].matrix)
            u = m @ u
        for c, t in self.cnot_pairs:
            cx = _cnot_matrix(self.n, c, t)
            u = cx @ u
        return u


def _cnot_matrix(n: int, c: int, t: int) -> np.ndarray:
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    for b in range(dim):
        # basis index uses qubit 0 as most significant bit
        bc = (b >> (n - 1 - c)) & 1
        out = b ^ (bc << (n - 1 - t))
        m[out, b] = 1.0
    return m


def conjugate(layer: CliffordLayer, p: Pauli) -> Pauli:
    """Module-level alias for ``layer.conjugate(p)``."""
    return layer.conjugate(p)


# ---------------------------------------------------------------------------
# Dense Pauli channels and the rates <-> eigenvalues transform.
# ---------------------------------------------------------------------------


def _tensor_wht(v: np.ndarray, n: int) -> np.ndarray:
    """Apply the factorized (-1)^<a,b> kernel along every qubit axis."""
    w = v.reshape((4,) * n)
    for axis in range(n):
        w = np.tensordot(_WHT_KERNEL_1Q, w, axes=([1], [axis]))
        w = np.moveaxis(w, 0, axis)
    return w.reshape(-1)


@dataclass
class PauliChannel:
    """Diagonal n-qubit noise map stored densely over all 4^n labels.

    ``eigenvalues[a]`` scales ``P_a``; ``rates`` is the corresponding error
    distribution when populated.  The identity eigenvalue must be exactly 1.
    Non-positive eigenvalues and negative rates are representable (the class
    reports physicality instead of enforcing it); operations that need strict
    positivity check it themselves.
    """

    n: int
    eigenvalues: np.ndarray
    rates: np.ndarray | None = None

    def __post_init__(self):
        _check_dense(self.n)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        if self.eigenvalues.shape != (4**self.n,):
            raise ValueError("eigenvalue vector has wrong length")
        if self.eigenvalues[0] != 1.0:
            raise ValueError("identity eigenvalue must equal 1 exactly")
        if self.rates is not None:
            self.rates = np.asarray(self.rates, dtype=np.float64)
            if self.rates.shape != (4**self.n,):
                raise ValueError("rate vector has wrong length")
            if abs(self.rates.sum() - 1.0) > 1e-9:
                raise ValueError("rates must sum to 1")
            lam = _tensor_wht(self.rates, self.n)
            if np.max(np.abs(lam - self.eigenvalues)) > 1e-12:
                raise ValueError("rates and eigenvalues are inconsistent")

    @classmethod
    def identity(cls, n: int) -> "PauliChannel":
        lam = np.ones(4**n)
        p = np.zeros(4**n)
        p[0] = 1.0
        return cls(n, lam, p)

    @classmethod
    def from_rates(cls, n: int, rates) -> "PauliChannel":
        rates = np.asarray(rates, dtype=np.float64)
        if abs(rates.sum() - 1.0) > 1e-9:
            raise ValueError("rates must sum to 1")
        lam = _tensor_wht(rates, n)
        lam[0] = 1.0  # exact by trace preservation; kill float summation dust
        return cls(n, lam, rates)

    @classmethod
    def from_rate_dict(cls, n: int, rates: dict) -> "PauliChannel":
        vec = np.zeros(4**n)
        for label, p in rates.items():
            vec[label_to_index(label)] = p
        return cls.from_rates(n, vec)

    @classmethod
    def from_eigenvalues(cls, n: int, lam) -> "PauliChannel":
        return cls(n, np.asarray(lam, dtype=np.float64))

    @property
    def basis(self) -> tuple[str, ...]:
        """Ordered labels the channel is diagonal over (dense index order)."""
        return tuple(all_labels(self.n))

    def eigenvalue(self, label: str) -> float:
        return float(self.eigenvalues[label_to_index(label)])

    def rate(self, label: str) -> float:
        if self.rates is None:
            raise ValueError("rates not populated")
        return float(self.rates[label_to_index(label)])

    @property
    def is_physical(self) -> bool:
        """True when the rates form a proper distribution."""
        r = self.rates if self.rates is not None else _inverse_wht(self.eigenvalues, self.n)
        return bool(np.all(r >= -1e-12))

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.eigenvalues > 0))

    def compose(self, other: "PauliChannel") -> "PauliChannel":
        if other.n != self.n:
            raise DimensionMismatchError(f"{other.n} vs {self.n} qubits")
        return PauliChannel(self.n, self.eigenvalues * other.eigenvalues)

    def conjugated(self, layer: CliffordLayer) -> "PauliChannel":
        """Channel ``U . Lambda . U^dag`` for a Clifford layer U."""
        perm, _ = layer.index_permutation()
        lam = np.empty_like(self.eigenvalues)
        lam[perm] = self.eigenvalues
        return PauliChannel(self.n, lam)


def _inverse_wht(lam: np.ndarray, n: int) -> np.ndarray:
    return _tensor_wht(lam, n) / 4**n


def rates_to_eigenvalues(ch: PauliChannel) -> PauliChannel:
    """Populate eigenvalues from rates: ``lam_b = sum_a p_a (-1)^<a,b>``."""
    if ch.rates is None:
        raise ValueError("rates not populated")
    return PauliChannel.from_rates(ch.n, ch.rates)


def eigenvalues_to_rates(ch: PauliChannel) -> PauliChannel:
    """Populate rates: ``p_a = 4^-n sum_b lam_b (-1)^<a,b>``.

    Rates may come out negative for non-completely-positive inputs; that is
    permitted and only reported through ``is_physical``.
    """
    rates = _inverse_wht(ch.eigenvalues, ch.n)
    return PauliChannel(ch.n, ch.eigenvalues.copy(), rates)
