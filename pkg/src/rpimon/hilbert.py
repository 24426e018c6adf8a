"""Finite-dimensional Hilbert-space primitives.

Operators, state vectors and density matrices are plain complex numpy
arrays. Hermiticity and density-matrix validity are checked by the helper
functions below instead of being carried by wrapper classes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class Constants:
    """Physical constants; natural units by default."""

    hbar: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.hbar) or self.hbar <= 0:
            raise ValueError(f"hbar must be > 0, got {self.hbar}")


NATURAL = Constants()


def max_abs(x) -> float:
    """Max-absolute-entry norm used for every tolerance in the package."""
    x = np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


def as_operator(x, name: str = "operator") -> np.ndarray:
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def is_hermitian(m, rtol: float = HERMITIAN_RTOL) -> bool:
    m = np.asarray(m)
    scale = max_abs(m)
    return max_abs(m - m.conj().T) <= rtol * scale


def require_hermitian(m, name: str = "operator") -> np.ndarray:
    m = as_operator(m, name)
    if not is_hermitian(m):
        raise ValueError(f"{name} is not hermitian")
    return m


def _same_dim(x, y):
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")


def commutator(x, y) -> np.ndarray:
    x, y = np.asarray(x), np.asarray(y)
    _same_dim(x, y)
    return x @ y - y @ x


def anticommutator(x, y) -> np.ndarray:
    x, y = np.asarray(x), np.asarray(y)
    _same_dim(x, y)
    return x @ y + y @ x


def matrix_exponential(m) -> np.ndarray:
    """exp(m) by Padé scaling and squaring."""
    return expm(as_operator(m, "matrix"))


def check_density_matrix(rho, tol: float = 1e-10) -> np.ndarray:
    """Validate a (possibly partial) density matrix and return it as an array.

    Hermitian to 1e-12 relative, min eigenvalue >= -tol*trace and
    0 < trace <= 1 + tol.
    """
    rho = as_operator(rho, "density matrix")
    if not is_hermitian(rho):
        raise ValueError("density matrix is not hermitian")
    tr = float(np.trace(rho).real)
    if not 0 < tr <= 1 + tol:
        raise ValueError(f"density matrix trace {tr} outside (0, 1]")
    lo = float(np.linalg.eigvalsh(rho).min())
    if lo < -tol * tr:
        raise ValueError(f"density matrix has negative eigenvalue {lo}")
    return rho


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def expectation(op, rho) -> float:
    """Real part of tr(op @ rho)."""
    return float(np.einsum("ij,ji->", op, rho).real)


_PAULI = {
    "id": np.eye(2, dtype=complex),
    "sx": np.array([[0, 1], [1, 0]], dtype=complex),
    "sy": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "sz": np.array([[1, 0], [0, -1]], dtype=complex),
}


def build_qubit(name: str) -> np.ndarray:
    """Pauli matrix or identity by name: ``sx``, ``sy``, ``sz`` or ``id``."""
    try:
        return _PAULI[name].copy()
    except KeyError:
        raise ValueError(f"unknown qubit observable {name!r}; expected one of {sorted(_PAULI)}") from None


def lowering(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)


def build_oscillator(d: int, m: float = 1.0, omega: float = 1.0, c: Constants = NATURAL):
    """Truncated harmonic oscillator in the Fock basis.

    Returns ``(q, p, H)`` with ``H = p @ p / 2m + m omega**2 q @ q / 2`` built
    from the truncated quadratures, so the top Fock level carries the usual
    truncation artifact.
    """
    if int(d) != d or d < 2:
        raise ValueError(f"oscillator dimension must be >= 2, got {d}")
    if m <= 0 or omega <= 0:
        raise ValueError("mass and frequency must be positive")
    a = lowering(int(d))
    q = np.sqrt(c.hbar / (2 * m * omega)) * (a + a.conj().T)
    p = 1j * np.sqrt(c.hbar * m * omega / 2) * (a.conj().T - a)
    H = p @ p / (2 * m) + 0.5 * m * omega**2 * (q @ q)
    return q, p, H


def coherent_state(d: int, alpha: complex) -> np.ndarray:
    """Normalized coherent state truncated to ``d`` Fock levels."""
    n = np.arange(d)
    logfact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, d)))])
    amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logfact) * np.power(complex(alpha), n)
    return amp / np.linalg.norm(amp)


def fock_state(d: int, n: int) -> np.ndarray:
    if not 0 <= n < d:
        raise ValueError(f"Fock level {n} outside truncation d={d}")
    psi = np.zeros(d, dtype=complex)
    psi[n] = 1.0
    return psi
