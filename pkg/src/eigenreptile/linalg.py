"""Small symmetric eigenproblems and the trajectory principal direction.

The principal direction of a d x n snapshot matrix is recovered from the
n x n Gram matrix ``W.T @ W`` instead of the d x d scatter ``W @ W.T``:
if ``W.T W u = lam u`` then ``W W.T (W u) = lam (W u)``, so only an
n x n eigenproblem is ever solved.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-9
OFFDIAG_TOL = 1e-12
MAX_SWEEPS = 100
CLAMP_TOL = 1e-9
DEGENERATE_TOL = 1e-12
TIE_RTOL = 1e-9
MAX_ORDER = 64


class DegenerateTrajectory(ValueError):
    """The snapshots span no direction (all Gram eigenvalues vanish)."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        p = self.eigenvectors
        return (p * self.eigenvalues) @ p.T


@dataclass(frozen=True)
class MainDirection:
    e: np.ndarray
    lambda1: float
    zeta: float
    spectrum: np.ndarray


def mean_center(W):
    """Subtract the mean column. Returns ``(centered, mean)``."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] < 2:
        raise ValueError("need a d x n snapshot matrix with n >= 2")
    mean = W.mean(axis=1)
    return W - mean[:, None], mean


def sym_eigen(M, tol=OFFDIAG_TOL, max_sweeps=MAX_SWEEPS) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Eigenvalues come back sorted non-increasing with eigenvectors as the
    matching columns. The off-diagonal stopping threshold is relative to
    the Frobenius norm of ``M``.
    """
    A = np.array(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > MAX_ORDER:
        raise ValueError(f"matrix order {n} exceeds {MAX_ORDER}")
    if not np.all(np.isfinite(A)):
        raise FloatingPointError("matrix has non-finite entries")
    scale = max(np.abs(A).max(initial=0.0), 1.0)
    if np.abs(A - A.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    # power-of-two rescaling is exact and keeps the sums of squares in range
    peak = np.abs(A).max(initial=0.0)
    shift = math.frexp(peak)[1] if peak > 0 else 0
    A = np.ldexp(A, -shift)
    V = np.eye(n)

    # Python floats are much faster than numpy scalars for n <= 10
    a = A.tolist()
    v = V.tolist()
    norm = math.sqrt(sum(x * x for row in a for x in row))
    threshold = tol * max(norm, np.finfo(float).tiny)

    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * sum(a[p][q] ** 2 for p in range(n) for q in range(p + 1, n)))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
    else:
        off = math.sqrt(2.0 * sum(a[p][q] ** 2 for p in range(n) for q in range(p + 1, n)))
        if off >= threshold:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")

    values = np.ldexp(np.array([a[i][i] for i in range(n)]), shift)
    vectors = np.array(v)
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], vectors[:, order])


def clamp_spectrum(values, tol=CLAMP_TOL):
    """Zero out tiny negative eigenvalues left by rank deficiency."""
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < -tol * max(1.0, np.abs(values).max(initial=0.0))):
        warnings.warn("Gram matrix has a negative eigenvalue beyond tolerance")
    return np.maximum(values, 0.0)


def principal_direction(W_centered) -> MainDirection:
    """Top eigenvector of the scatter ``W W.T`` via the n x n Gram matrix.

    Raises DegenerateTrajectory when every Gram eigenvalue is below 1e-12.
    The sign of ``e`` is arbitrary here.
    """
    W = np.asarray(W_centered, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] < 2:
        raise ValueError("need a d x n snapshot matrix with n >= 2")
    gram = W.T @ W
    dec = sym_eigen(gram)
    spectrum = clamp_spectrum(dec.eigenvalues)
    lam1 = spectrum[0]
    if lam1 < DEGENERATE_TOL:
        raise DegenerateTrajectory("trajectory has no principal direction")
    if len(spectrum) > 1 and lam1 - spectrum[1] <= TIE_RTOL * lam1:
        warnings.warn("top two Gram eigenvalues tie; principal direction is ambiguous")
    e = W @ dec.eigenvectors[:, 0]
    e /= np.linalg.norm(e)
    zeta = float(min(1.0, lam1 / spectrum.sum()))
    return MainDirection(e=e, lambda1=float(lam1), zeta=zeta, spectrum=spectrum)


def principal_angle(u, v) -> float:
    """Sign-invariant angle in radians between two nonzero vectors, in [0, pi/2]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    c = abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    c = min(c, 1.0)
    # arccos loses precision near 1; use the sine form for small angles
    if c > 0.9:
        cross = u / np.linalg.norm(u) - np.sign(u @ v) * v / np.linalg.norm(v)
        return float(2.0 * math.asin(min(1.0, np.linalg.norm(cross) / 2.0)))
    return float(math.acos(c))
