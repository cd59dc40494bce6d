"""Independent dense-matrix oracles used to pin expected values.

Everything here works from explicit 2^n x 2^n complex matrices so it shares
no code path with the symplectic implementation under test.
"""

import numpy as np

SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(label: str, sign: int = 1) -> np.ndarray:
    m = np.array([[1.0 + 0j]])
    for ch in label:
        m = np.kron(m, SIGMA[ch])
    return sign * m


def commute_oracle(a: str, b: str) -> int:
    """0 if the labels commute, 1 otherwise, via the matrix commutator."""
    ma, mb = pauli_matrix(a), pauli_matrix(b)
    return 0 if np.allclose(ma @ mb, mb @ ma) else 1


def conjugate_oracle(u: np.ndarray, label: str):
    """U P U^dag decomposed back into a signed label."""
    n = len(label)
    m = u @ pauli_matrix(label) @ u.conj().T
    for idx in range(4**n):
        cand = "".join("IXZY"[(idx >> (2 * i)) & 3] for i in range(n))
        t = pauli_matrix(cand)
        coef = np.trace(t.conj().T @ m) / 2**n
        if abs(coef) > 0.5:
            assert abs(abs(coef) - 1) < 1e-9
            return cand, int(np.sign(coef.real))
    raise AssertionError("not a Pauli")


def channel_eigenvalue_oracle(rates: dict[str, float], label: str) -> float:
    """Eigenvalue of sum_a p_a P_a rho P_a on the given label, via matrices."""
    n = len(label)
    target = pauli_matrix(label)
    out = np.zeros_like(target)
    for a, p in rates.items():
        pa = pauli_matrix(a)
        out = out + p * (pa @ target @ pa)
    coef = np.trace(target.conj().T @ out) / 2**n
    assert abs(coef.imag) < 1e-12
    return float(coef.real)


def factor_composition_eigenvalues(n: int, factors) -> np.ndarray:
    """Compose single-Pauli mixing factors [(label, omega), ...] and read off
    all 4^n eigenvalues by matrix conjugation."""
    labels = ["".join("IXZY"[(idx >> (2 * i)) & 3] for i in range(n))
              for idx in range(4**n)]
    lam = np.ones(4**n)
    for flabel, omega in factors:
        pf = pauli_matrix(flabel)
        for j, lab in enumerate(labels):
            t = pauli_matrix(lab)
            img = (1 - omega) * t + omega * (pf @ t @ pf)
            coef = np.trace(t.conj().T @ img).real / 2**n
            lam[j] *= coef
    return lam
