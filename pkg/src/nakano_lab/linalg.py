"""Small dense complex linear algebra.

Matrices are plain ``numpy`` complex arrays. The eigensolver is a cyclic
Jacobi iteration written here rather than a LAPACK call, so the positivity
verdicts do not depend on which BLAS the host happens to ship.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

HERMITIAN_RTOL = 1e-12
RESIDUAL_TOL = 1e-10


class DimensionError(ValueError):
    pass


class ContractError(ValueError):
    pass


class DomainError(ValueError):
    pass


class Verdict(str, enum.Enum):
    POSITIVE_DEFINITE = "POSITIVE_DEFINITE"
    SEMIDEFINITE_WITHIN_MARGIN = "SEMIDEFINITE_WITHIN_MARGIN"
    INDEFINITE = "INDEFINITE"


@dataclass(frozen=True)
class EigenReport:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residual: float

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])


def as_cmatrix(a) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    return m


def _square(a) -> np.ndarray:
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix is not square: {m.shape}")
    return m


def hermitize(a) -> tuple[np.ndarray, float]:
    """Return ``((A + A*)/2, max |A_ij - conj(A_ji)|/2)``."""
    m = _square(a)
    asym = float(np.max(np.abs(m - m.conj().T))) / 2.0 if m.size else 0.0
    return (m + m.conj().T) / 2.0, asym


def check_hermitian(a, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    m = _square(a)
    if m.size == 0:
        return m
    scale = float(np.max(np.abs(m)))
    dev = float(np.max(np.abs(m - m.conj().T)))
    if dev > rtol * scale:
        raise ContractError(
            f"matrix not Hermitian: asymmetry {dev:.3e} exceeds {rtol:g} x {scale:.3e}"
        )
    return (m + m.conj().T) / 2.0


def _jacobi(a: np.ndarray, tol: float, max_sweeps: int = 100):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n, dtype=complex)
    target = tol * max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # J = [[c, s*phase], [-s*conj(phase), c]] on the (p, q) plane
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * np.conj(phase) * colq
                a[:, q] = s * phase * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * phase * rowq
                a[q, :] = s * np.conj(phase) * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * np.conj(phase) * vq
                v[:, q] = s * phase * vp + c * vq
    else:
        raise ArithmeticError("Jacobi iteration did not converge")
    return np.diag(a).real.copy(), v


def eigvalsh(h) -> EigenReport:
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm is at most ``1e-14 * ||H||``.
    Eigenvalues come back sorted ascending, eigenvectors as columns.
    """
    m = check_hermitian(h)
    n = m.shape[0]
    if n == 0:
        return EigenReport(np.zeros(0), np.zeros((0, 0), dtype=complex), 0.0)
    w, v = _jacobi(m, 1e-14)
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    norm = np.linalg.norm(m, 2) if n > 0 else 0.0
    if norm == 0.0:
        residual = 0.0
    else:
        residual = float(np.max(np.linalg.norm(m @ v - v * w, axis=0)) / norm)
    if residual > RESIDUAL_TOL:
        raise ArithmeticError(f"eigen-residual {residual:.3e} above {RESIDUAL_TOL:g}")
    return EigenReport(w, v, residual)


def pd_verdict(h, margin: float = 1e-6) -> Verdict:
    """Classify ``h`` by its smallest eigenvalue against ``margin * trace / dim``."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    m = check_hermitian(h)
    rep = eigvalsh(m)
    band = margin * float(np.trace(m).real) / m.shape[0]
    band = abs(band)
    if rep.min > band:
        return Verdict.POSITIVE_DEFINITE
    if rep.min >= -band:
        return Verdict.SEMIDEFINITE_WITHIN_MARGIN
    return Verdict.INDEFINITE


def inv_sqrt(h) -> np.ndarray:
    """Hermitian positive square root of ``h^{-1}``."""
    rep = eigvalsh(h)
    if rep.eigenvalues.size and rep.min <= 0:
        raise DomainError(f"matrix not positive definite (min eigenvalue {rep.min:.3e})")
    v = rep.vectors
    s = (v * (1.0 / np.sqrt(rep.eigenvalues))) @ v.conj().T
    return (s + s.conj().T) / 2.0
