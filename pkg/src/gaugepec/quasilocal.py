"""Quasi-local Pauli channels: factor sets, generator sets, and the linear
maps between generator rates tau, log-eigenvalues x, and the subset-lattice
parameters r.

A channel is a composition of single-Pauli factors ``(1-w_a) id + w_a P_a .
P_a`` over a generator set K derived from a downward-closed family of qubit
subsets.  With ``tau_a = -log(1 - 2 w_a)`` the log-eigenvalue of an arbitrary
Pauli ``P_c`` is ``x_c = sum_{b in K} <c,b> tau_b``; restricted to K this map
is invertible, as is the subset-lattice (Moebius) transform between x and r.
All three parameterizations are therefore interchangeable views.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .paulis import (
    DimensionMismatchError,
    Pauli,
    index_to_label,
    label_to_index,
    pattern_of_index,
)


class InvalidGeneratorSetError(ValueError):
    """Generator set is not derived from a downward-closed factor set."""


def _subsets(mask: int):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


@dataclass(frozen=True)
class FactorSet:
    """Downward-closed collection of qubit subsets, stored as bit masks.

    The empty subset is always a member and is kept implicitly.
    """

    n: int
    subsets: frozenset[int]

    def __post_init__(self):
        for s in self.subsets:
            if s >> self.n:
                raise ValueError("subset exceeds qubit count")
            for sub in _subsets(s):
                if sub and sub not in self.subsets:
                    raise ValueError(
                        f"not downward closed: missing subset {sub:#x} of {s:#x}"
                    )

    @classmethod
    def from_masks(cls, n: int, masks) -> "FactorSet":
        closed = set()
        for m in masks:
            for sub in _subsets(int(m)):
                if sub:
                    closed.add(sub)
        return cls(n, frozenset(closed))

    @classmethod
    def full(cls, n: int) -> "FactorSet":
        return cls.from_masks(n, [(1 << n) - 1])

    @classmethod
    def two_local_ring(cls, n: int) -> "FactorSet":
        pairs = [(1 << i) | (1 << ((i + 1) % n)) for i in range(n)]
        return cls.from_masks(n, pairs)

    @classmethod
    def two_local_line(cls, n: int) -> "FactorSet":
        pairs = [(1 << i) | (1 << (i + 1)) for i in range(n - 1)]
        return cls.from_masks(n, pairs + [1 << (n - 1)])

    @property
    def nonempty_masks(self) -> tuple[int, ...]:
        """All non-empty member subsets, sorted by (size, mask)."""
        return tuple(sorted(self.subsets, key=lambda m: (bin(m).count("1"), m)))

    def __contains__(self, mask: int) -> bool:
        return mask == 0 or mask in self.subsets


@dataclass(frozen=True)
class GeneratorSet:
    """All non-identity Pauli labels supported on a factor set, in a fixed
    deterministic order (weight, then lexicographic label)."""

    factor_set: FactorSet
    members: tuple[int, ...]  # dense label indices

    @classmethod
    def from_factor_set(cls, fs: FactorSet) -> "GeneratorSet":
        labels = []
        for mask in fs.nonempty_masks:
            qubits = [i for i in range(fs.n) if (mask >> i) & 1]
            # exactly the labels with support equal to this mask
            stack = [(0, 0)]
            for q in qubits:
                stack = [(idx + (d << (2 * q)), w + 1) for idx, w in stack for d in (1, 2, 3)]
            labels.extend(idx for idx, _ in stack)
        members = sorted(set(labels), key=lambda i: _sort_key(fs.n, i))
        return cls(fs, tuple(members))

    @classmethod
    def from_labels(cls, n: int, labels) -> "GeneratorSet":
        """Build from explicit labels, validating the factor-set property."""
        idxs = [label_to_index(l) if isinstance(l, str) else int(l) for l in labels]
        masks = {pattern_of_index(n, i) for i in idxs}
        fs = FactorSet.from_masks(n, masks)
        gs = cls.from_factor_set(fs)
        if set(idxs) != set(gs.members):
            raise InvalidGeneratorSetError(
                "labels do not form the full generator set of any factor set"
            )
        return gs

    @property
    def n(self) -> int:
        return self.factor_set.n

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return tuple(index_to_label(self.n, i) for i in self.members)

    @cached_property
    def position(self) -> dict[int, int]:
        return {idx: k for k, idx in enumerate(self.members)}

    @cached_property
    def _xz(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        # object dtype past 62 qubits: masks no longer fit in int64
        dtype = np.int64 if self.n <= 62 else object
        xs = np.zeros(len(self.members), dtype=dtype)
        zs = np.zeros(len(self.members), dtype=dtype)
        for k, idx in enumerate(self.members):
            p = Pauli.from_index(self.n, idx)
            xs[k], zs[k] = p.x, p.z
        pats = xs | zs
        wts = np.array([bin(int(m)).count("1") for m in pats], dtype=np.int64)
        return xs, zs, pats, wts

    @cached_property
    def patterns(self) -> np.ndarray:
        return self._xz[2]

    @cached_property
    def weights(self) -> np.ndarray:
        return self._xz[3]

    def anticommutation_with(self, target: Pauli) -> np.ndarray:
        """Vector over K of commutation parities with an arbitrary Pauli."""
        if target.n != self.n:
            raise DimensionMismatchError(f"{target.n} vs {self.n} qubits")
        xs, zs, _, _ = self._xz
        return _parity(xs & target.z) ^ _parity(zs & target.x)

    def sub_restriction_of(self, target: Pauli) -> np.ndarray:
        """Boolean vector over K: member is target restricted to a subset of
        its support (qubit-wise equal on the member's support)."""
        if target.n != self.n:
            raise DimensionMismatchError(f"{target.n} vs {self.n} qubits")
        xs, zs, pats, _ = self._xz
        inside = (pats & ~(target.x | target.z)) == 0
        agree = ((xs ^ target.x) & pats) == 0
        agree &= ((zs ^ target.z) & pats) == 0
        return inside & agree

    @cached_property
    def anticommutation_matrix(self) -> np.ndarray:
        """A[c, b] = <K_c, K_b> over the generator set."""
        xs, zs, _, _ = self._xz
        return _parity(xs[:, None] & zs[None, :]) ^ _parity(zs[:, None] & xs[None, :])

    @cached_property
    def x_from_tau_matrix(self) -> np.ndarray:
        return self.anticommutation_matrix.astype(np.float64)

    @cached_property
    def tau_from_x_matrix(self) -> np.ndarray:
        """Exact inverse of the x-from-tau map restricted to K.

        The anticommutation matrix of a generator set built from a valid
        factor set is invertible; for hand-rolled member lists it need not
        be, which is exactly when the tau parameterization stops existing.
        """
        a = self.x_from_tau_matrix
        if np.linalg.matrix_rank(a) < len(self):
            raise InvalidGeneratorSetError(
                "anticommutation matrix singular: K is not factor-set-derived"
            )
        return np.linalg.inv(a)

    @cached_property
    def x_from_r_matrix(self) -> np.ndarray:
        """M[a, b] = 1 iff K_b is a sub-restriction of K_a."""
        m = np.zeros((len(self), len(self)))
        for k, idx in enumerate(self.members):
            m[k, :] = self.sub_restriction_of(Pauli.from_index(self.n, idx))
        return m

    @cached_property
    def r_from_x_matrix(self) -> np.ndarray:
        """Moebius inversion: N[b, a] = (-1)^(|b|-|a|) iff K_a sub of K_b."""
        _, _, _, wts = self._xz
        sub = self.x_from_r_matrix  # sub[b, a] = [a sub of b]
        return sub * np.power(-1.0, wts[:, None] - wts[None, :])

    @cached_property
    def pattern_classes(self) -> dict[int, np.ndarray]:
        """Member positions grouped by support pattern mask."""
        out: dict[int, list[int]] = {}
        for k, pat in enumerate(self.patterns):
            out.setdefault(int(pat), []).append(k)
        return {pat: np.array(ks) for pat, ks in out.items()}


def _parity(v: np.ndarray) -> np.ndarray:
    if v.dtype == object:
        return np.array([bin(int(x)).count("1") % 2 for x in v.reshape(-1)],
                        dtype=np.uint8).reshape(v.shape)
    out = np.zeros_like(v, dtype=np.uint8)
    w = v.copy()
    while np.any(w):
        out ^= (w & 1).astype(np.uint8)
        w >>= 1
    return out


# ---------------------------------------------------------------------------
# Channel parameter container.
# ---------------------------------------------------------------------------

CONSISTENCY_TOL = 1e-10


@dataclass
class ChannelParams:
    """Quasi-local channel parameters with x over K as the canonical form.

    tau and r are derived views; when a constructor receives more than one
    vector, mutual consistency is checked to ``CONSISTENCY_TOL``.
    """

    kind: str
    K: GeneratorSet
    x: np.ndarray
    pattern_symmetric: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.shape != (len(self.K),):
            raise ValueError("x vector length must match the generator set")
        if self.pattern_symmetric:
            for pat, ks in self.K.pattern_classes.items():
                vals = self.x[ks]
                if np.max(np.abs(vals - vals[0])) > CONSISTENCY_TOL:
                    raise ValueError(
                        f"pattern-symmetric channel has asymmetric x on {pat:#x}"
                    )

    @classmethod
    def from_x(cls, kind: str, K: GeneratorSet, x, **kw) -> "ChannelParams":
        return cls(kind, K, np.asarray(x, dtype=np.float64), **kw)

    @classmethod
    def from_tau(cls, kind: str, K: GeneratorSet, tau, **kw) -> "ChannelParams":
        tau = np.asarray(tau, dtype=np.float64)
        return cls(kind, K, K.x_from_tau_matrix @ tau, **kw)

    @classmethod
    def from_r(cls, kind: str, K: GeneratorSet, r, **kw) -> "ChannelParams":
        r = np.asarray(r, dtype=np.float64)
        return cls(kind, K, K.x_from_r_matrix @ r, **kw)

    @classmethod
    def from_pattern_tau(cls, kind: str, K: GeneratorSet, pattern_tau: dict) -> "ChannelParams":
        """Pattern-symmetric channel from one tau value per support pattern."""
        tau = np.zeros(len(K))
        for pat, ks in K.pattern_classes.items():
            tau[ks] = pattern_tau.get(pat, 0.0)
        return cls.from_tau(kind, K, tau, pattern_symmetric=True)

    @cached_property
    def tau(self) -> np.ndarray:
        return self.K.tau_from_x_matrix @ self.x

    @cached_property
    def r(self) -> np.ndarray:
        return self.K.r_from_x_matrix @ self.x

    def x_of(self, target: Pauli) -> float:
        """Log-eigenvalue of an arbitrary non-identity Pauli."""
        if target.pattern == 0:
            raise ValueError("target must be non-identity")
        anti = self.K.anticommutation_with(target).astype(np.float64)
        return float(anti @ self.tau)

    def eigenvalue_vector(self, n_dense: int | None = None) -> np.ndarray:
        """Dense eigenvalue vector over all 4^n labels (small n only)."""
        from .paulis import PauliChannel, anticommutation_table

        n = self.K.n
        table = anticommutation_table(n)
        x_all = table[:, self.K.members].astype(np.float64) @ self.tau
        return np.exp(-x_all)

    def dense_channel(self):
        from .paulis import PauliChannel

        return PauliChannel.from_eigenvalues(self.K.n, self.eigenvalue_vector())

    @property
    def omegas(self) -> np.ndarray:
        """Per-generator mixing weights w_a = (1 - exp(-tau_a)) / 2."""
        return (1.0 - np.exp(-self.tau)) / 2.0

    @property
    def is_physical(self) -> bool:
        return bool(np.all(self.tau >= -1e-12))

    def shifted_x(self, delta_x: np.ndarray) -> "ChannelParams":
        return ChannelParams(self.kind, self.K, self.x + delta_x,
                             pattern_symmetric=self.pattern_symmetric)

    def with_x(self, x: np.ndarray) -> "ChannelParams":
        return ChannelParams(self.kind, self.K, np.asarray(x, float),
                             pattern_symmetric=self.pattern_symmetric)


def _sort_key(n: int, index: int):
    lab = index_to_label(n, index)
    return (sum(ch != "I" for ch in lab), lab)


# Spec-level operation aliases ------------------------------------------------


def tau_to_x(params: ChannelParams, target: Pauli) -> float:
    """x_target = sum_{b in K} <target, b> tau_b for arbitrary targets."""
    return params.x_of(target)


def x_to_tau(params: ChannelParams) -> np.ndarray:
    return params.tau


def x_to_r(params: ChannelParams) -> np.ndarray:
    return params.r


def r_to_x(params: ChannelParams, target: Pauli) -> float:
    """x_target = sum of r over sub-restrictions of the target inside K."""
    if target.pattern == 0:
        raise ValueError("target must be non-identity")
    mask = params.K.sub_restriction_of(target)
    return float(params.r[mask].sum())
