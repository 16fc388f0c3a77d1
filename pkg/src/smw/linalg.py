"""Dense real linear algebra primitives.

Every norm and condition number in the package is computed from singular
values (LAPACK ``gesdd`` through numpy), never from power iteration, so bound
comparisons are deterministic for a given build.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numpy.typing import NDArray

Matrix = NDArray[np.float64]

EPS = np.finfo(np.float64).eps


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is singular within the rank tolerance.

    The offending smallest singular value is kept on ``sigma_min``.
    """

    def __init__(self, message: str, sigma_min: float):
        super().__init__(f"{message} (sigma_min={sigma_min:.3e})")
        self.sigma_min = sigma_min


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``m = left @ diag(singulars) @ right.T``."""

    left: Matrix
    singulars: NDArray[np.float64]
    right: Matrix

    def reconstruct(self) -> Matrix:
        return (self.left * self.singulars) @ self.right.T


class Stream(IntEnum):
    """Substream tags; each random role draws from its own stream."""

    MATRIX = 0
    E1 = 1
    E2 = 2
    E3 = 3
    U = 4
    V = 5
    LEFT = 6
    RIGHT = 7
    CORE = 8


def rng(seed: int, *stream: int) -> np.random.Generator:
    """Portable PCG64 generator keyed by ``seed`` and optional stream tags.

    Distinct ``stream`` tuples give statistically independent generators for
    the same seed.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


def as_matrix(m) -> Matrix:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def svd(m) -> SvdFactors:
    """Thin singular value decomposition.

    Raises ``numpy.linalg.LinAlgError`` if LAPACK fails to converge.
    """
    a = as_matrix(m)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(left=u, singulars=s, right=vt.T)


def singular_values(m) -> NDArray[np.float64]:
    """Singular values in descending order."""
    return np.linalg.svd(as_matrix(m), compute_uv=False)


def two_norm(m) -> float:
    """Spectral norm, the largest singular value."""
    return float(singular_values(m)[0])


def sigma_min(m) -> float:
    """Smallest singular value (``min(rows, cols)``-th)."""
    return float(singular_values(m)[-1])


def rank_tolerance(s: NDArray[np.float64], shape: tuple[int, int]) -> float:
    return float(s[0]) * max(shape) * EPS


def pseudo_inverse(m) -> Matrix:
    """Moore-Penrose pseudoinverse with rank cutoff ``sigma_max * max(shape) * eps``."""
    f = svd(m)
    tol = rank_tolerance(f.singulars, (f.left.shape[0], f.right.shape[0]))
    keep = f.singulars > tol
    inv_s = np.zeros_like(f.singulars)
    inv_s[keep] = 1.0 / f.singulars[keep]
    return (f.right * inv_s) @ f.left.T


def condition_number(m) -> float:
    """``sigma_max / sigma_r`` where ``sigma_r`` is the smallest singular value
    above the rank tolerance."""
    a = as_matrix(m)
    s = singular_values(a)
    if s[0] == 0.0:
        raise ValueError("condition number of an all-zero matrix is undefined")
    tol = rank_tolerance(s, a.shape)
    return float(s[0] / s[s > tol][-1])


def orthonormal_from_gaussian(n: int, seed: int, *stream: int) -> Matrix:
    """Orthogonal ``n x n`` matrix: Q factor of a seeded Gaussian matrix."""
    if n < 1:
        raise ValueError("n must be positive")
    g = rng(seed, *stream).standard_normal((n, n))
    q, _ = np.linalg.qr(g)
    return q


def invert(m) -> Matrix:
    """Inverse of a square matrix via LU solve against the identity.

    Raises
    ------
    SingularMatrixError
        If the smallest singular value is at or below the rank tolerance.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"cannot invert non-square matrix of shape {a.shape}")
    s = singular_values(a)
    if s[-1] <= rank_tolerance(s, a.shape) or s[0] == 0.0:
        raise SingularMatrixError("matrix is numerically singular", float(s[-1]))
    return np.linalg.solve(a, np.eye(a.shape[0]))
