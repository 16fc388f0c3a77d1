"""Controlled error injection for the approximate inverses.

The generated errors hit their prescribed spectral norms exactly (up to
rounding), so each instance realizes the worst case allowed by ``eps1`` and
``eps2`` rather than merely respecting them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ProblemInstance, capacitance
from .linalg import Matrix, SingularMatrixError, Stream, as_matrix, invert, rng, singular_values


@dataclass(frozen=True)
class PerturbationSpec:
    """Target error norms ``||Ã^{-1} - A^{-1}||_2 = eps1`` and
    ``||Z^{-1} - (I + V^T Ã^{-1} U)^{-1}||_2 = eps2``."""

    eps1: float
    eps2: float
    seed: int = 0

    def __post_init__(self):
        for name in ("eps1", "eps2"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {val}")


def gaussian_with_norm(
    rows: int, cols: int, target_norm: float, seed: int, stream: int = Stream.E1
) -> Matrix:
    """Seeded standard Gaussian matrix rescaled to spectral norm ``target_norm``.

    The unscaled draw depends only on ``(seed, stream)``, so scaling is exactly
    linear in ``target_norm``.
    """
    if target_norm < 0:
        raise ValueError("target_norm must be nonnegative")
    if target_norm == 0:
        return np.zeros((rows, cols))
    g, g_norm = _gaussian_draw(rows, cols, seed, int(stream))
    return g * (target_norm / g_norm)


@lru_cache(maxsize=16)
def _gaussian_draw(rows: int, cols: int, seed: int, stream: int) -> tuple[Matrix, float]:
    # Sweeps rescale the same draw at every grid point; cache it with its norm.
    g = rng(seed, stream).standard_normal((rows, cols))
    g.flags.writeable = False
    return g, float(singular_values(g)[0])


def make_update_pair(n: int, k: int, lam: float, seed: int) -> tuple[Matrix, Matrix]:
    """Independent Gaussian ``U, V`` (``n x k``), each with spectral norm ``sqrt(lam)``."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    root = math.sqrt(lam)
    u = gaussian_with_norm(n, k, root, seed, Stream.U)
    v = gaussian_with_norm(n, k, root, seed, Stream.V)
    return u, v


def perturb_instance(
    a, u, v, spec: PerturbationSpec, a_inv: Matrix | None = None
) -> ProblemInstance:
    """Build ``Ã^{-1} = A^{-1} + E1`` and ``Z^{-1} = (I + V^T Ã^{-1} U)^{-1} + E2``.

    ``E2`` perturbs the inverse of the capacitance formed with the already
    perturbed ``Ã^{-1}``.  Pass a precomputed ``a_inv`` to skip inverting ``a``
    when many trials share one matrix.
    """
    a, u, v = as_matrix(a), as_matrix(u), as_matrix(v)
    n, k = u.shape
    if a_inv is None:
        a_inv = invert(a)
    e1 = gaussian_with_norm(n, n, spec.eps1, spec.seed, Stream.E1)
    a_inv_approx = a_inv + e1
    c_pert = capacitance(a_inv_approx, u, v)
    try:
        c_pert_inv = invert(c_pert)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            "perturbed capacitance matrix is singular", exc.sigma_min
        ) from None
    e2 = gaussian_with_norm(k, k, spec.eps2, spec.seed, Stream.E2)
    lam = float(singular_values(u)[0] * singular_values(v)[0])
    return ProblemInstance(
        a=a,
        u=u,
        v=v,
        a_inv_exact=a_inv,
        a_inv_approx=a_inv_approx,
        z_inv=c_pert_inv + e2,
        lam=lam,
        eps1=spec.eps1,
        eps2=spec.eps2,
    )
