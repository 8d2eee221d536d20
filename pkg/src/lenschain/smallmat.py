"""Dense kernels for small matrices (dimension 1 to 8).

Determinant, adjugate, linear solve, eigenvalues and a condition
estimate, plus the single singularity predicate that every other module
branches on.  The adjugate stays defined for singular input (cofactor
route), which downstream code relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DIM = 8
SINGULARITY_TOL = 1e-9


class SingularMatrixError(ValueError):
    """Raised by solve when the singularity predicate trips."""


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not 1 <= a.shape[0] <= MAX_DIM:
        raise ValueError(f"dimension {a.shape[0]} outside [1, {MAX_DIM}]")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _det_raw(a: np.ndarray) -> float:
    # explicit formulas up to 3x3: exact for exact inputs, unlike LU
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    if n == 3:
        return float(
            a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
    return float(np.linalg.det(a))


def det(m) -> float:
    return _det_raw(as_matrix(m))


def singularity_scale(m) -> float:
    """Magnitude scale for the singularity test: max(1, ||M||_inf^N)."""
    a = as_matrix(m)
    norm = float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0
    return max(1.0, norm ** a.shape[0])


def is_singular(m, tol: float = SINGULARITY_TOL) -> bool:
    """The shared singularity verdict: |det M| <= tol * max(1, ||M||_inf^N).

    Every operation in the package that branches on singular vs
    nonsingular goes through this one predicate so that classifications
    stay mutually consistent.
    """
    return abs(det(m)) <= tol * singularity_scale(m)


def adjugate(m) -> np.ndarray:
    """Adjugate matrix: adj(M) @ M = det(M) * I, defined for singular M too.

    Cofactor expansion for N <= 4 and for (near-)singular input;
    det(M) * inv(M) otherwise.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if n == 1:
        return np.array([[1.0]])
    if n <= 4 or is_singular(a):
        return _adjugate_cofactors(a)
    return det(a) * np.linalg.inv(a)


def _adjugate_cofactors(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    out = np.empty((n, n))
    rows = np.arange(n)
    for i in range(n):
        sub_rows = a[rows != i]
        for j in range(n):
            minor = sub_rows[:, rows != j]
            out[j, i] = (-1) ** (i + j) * _det_raw(minor)
    return out


def solve(m, v, tol: float = SINGULARITY_TOL) -> np.ndarray:
    """Solve M x = v after the singularity verdict clears."""
    a = as_matrix(m)
    rhs = np.asarray(v, dtype=float)
    if is_singular(a, tol):
        raise SingularMatrixError(f"singular by predicate: det = {det(a):.3e}")
    return np.linalg.solve(a, rhs)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with multiplicity, as returned by the solver."""

    values: np.ndarray

    @property
    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.values)))

    def product(self) -> complex:
        return complex(np.prod(self.values))

    def count_real_greater_than(self, threshold: float = 1.0,
                                imag_tol: float = 1e-9) -> int:
        """How many eigenvalues are real (to imag_tol) and exceed threshold."""
        vals = self.values
        scale = np.maximum(1.0, np.abs(vals))
        real = np.abs(vals.imag) <= imag_tol * scale
        return int(np.sum(real & (vals.real > threshold)))

    def min_distance_to(self, targets) -> float:
        """Minimum distance from the spectrum to a set of complex targets."""
        t = np.atleast_1d(np.asarray(targets, dtype=complex))
        return float(np.min(np.abs(self.values[:, None] - t[None, :])))


def eigenvalues(m) -> Spectrum:
    return Spectrum(np.linalg.eigvals(as_matrix(m)))


def condition_estimate(m) -> float:
    """2-norm condition number; inf when the smallest singular value is zero."""
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])
