"""Matrix families that pin an extreme singular value of the capacitance matrix.

* :func:`build_forward_instance` places the smallest singular value of
  ``I + V^T A^{-1} U`` at ``1/alpha`` (so ``||C^{-1}||_2 = alpha``).
* :func:`build_backward_instance` makes the capacitance exactly ``I + S`` for a
  seeded Gaussian ``S`` whose norm is driven by where the update sits on a
  diagonal ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import capacitance
from .linalg import EPS, Matrix, Stream, invert, orthonormal_from_gaussian, rng, singular_values


class ConstructionError(RuntimeError):
    """The built instance misses its target capacitance."""


@dataclass(frozen=True)
class ForwardConstructionParams:
    n: int
    k: int
    alpha_target: float
    lam: float
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.k <= self.n:
            raise ValueError(f"need 2 <= k <= n, got k={self.k}, n={self.n}")
        if not self.alpha_target > 0:
            raise ValueError("alpha_target must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive")


@dataclass(frozen=True)
class BackwardConstructionParams:
    n: int
    k: int
    lam: float
    block_offset: int
    regime: Literal["small-update", "large-update"] = "small-update"
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.block_offset < 0 or self.block_offset + self.k > self.n:
            raise ValueError(
                f"identity block [{self.block_offset}, {self.block_offset + self.k}) "
                f"does not fit in n={self.n}"
            )
        if self.regime not in ("small-update", "large-update"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")


def forward_singular_values(n: int) -> np.ndarray:
    """Singular values of the forward family's ``A``: 10^2 down to 10^-2."""
    return np.logspace(2, -2, n)


def forward_s_diagonal(p: ForwardConstructionParams, sigma: np.ndarray) -> np.ndarray:
    n, k = p.n, p.k
    shift = 1.0 / p.alpha_target - 1.0
    s = np.zeros(n)
    s[n - k] = p.lam
    s[n - k + 1 : n - 1] = abs(shift) * sigma[n - k + 1 : n - 1]
    s[n - 1] = shift * sigma[n - 1]
    return s


def forward_check_tolerance(alpha: float) -> float:
    """Relative tolerance on the measured ``1/alpha``.

    The smallest capacitance entry is ``1 + (1/alpha - 1)``, formed through
    ``A^{-1}`` with ``kappa(A) = 1e4``; its absolute rounding error is about
    ``kappa(A) u``, i.e. ``kappa(A) u alpha`` relative to ``1/alpha``.  The
    tolerance is ``1e-8`` plus that floor.
    """
    return 1e-8 + 1e4 * EPS * alpha


def build_forward_instance(p: ForwardConstructionParams, check: bool = True) -> tuple[Matrix, Matrix, Matrix]:
    """``(A, U, V)`` with ``||(I + V^T A^{-1} U)^{-1}||_2 = alpha_target``.

    ``A = U_A diag(sigma) V_A^T`` with random orthogonal ``U_A, V_A``; the
    update keeps the last ``k`` columns: ``U = U_A Q`` and ``V = V_A S Q`` for
    a diagonal ``S`` whose last ``k`` entries are
    ``[lam, |1/alpha - 1| sigma_j ..., (1/alpha - 1) sigma_min]``.  The
    capacitance is then diagonal with smallest entry ``1/alpha``.

    Raises
    ------
    ConstructionError
        If the measured smallest singular value of the capacitance differs from
        ``1/alpha_target`` by more than :func:`forward_check_tolerance` relative
        (e.g. ``alpha < 1`` with ``lam`` too small for ``1/alpha`` to remain the
        minimum).
    """
    n, k = p.n, p.k
    sigma = forward_singular_values(n)
    u_a = orthonormal_from_gaussian(n, p.seed, Stream.LEFT)
    v_a = orthonormal_from_gaussian(n, p.seed, Stream.RIGHT)
    a = (u_a * sigma) @ v_a.T
    s = forward_s_diagonal(p, sigma)
    u = u_a[:, n - k :].copy()
    v = v_a[:, n - k :] * s[n - k :]
    if check:
        smin = float(singular_values(capacitance(invert(a), u, v))[-1])
        target = 1.0 / p.alpha_target
        if abs(smin - target) > forward_check_tolerance(p.alpha_target) * target:
            raise ConstructionError(
                f"capacitance sigma_min={smin:.12e} misses 1/alpha={target:.12e}"
            )
    return a, u, v


def backward_diagonal(n: int, regime: str) -> np.ndarray:
    """Diagonal of ``A`` for the backward family."""
    if regime == "small-update":
        m = int(0.6 * n)
        d = np.full(n, 1e-8)
        d[:m] = np.logspace(-2, -8, m)
        return d
    if regime == "large-update":
        return np.logspace(2, -2, n)
    raise ValueError(f"unknown regime {regime!r}")


def backward_core(k: int, seed: int) -> Matrix:
    """Unscaled seeded Gaussian ``k x k`` core of the backward family."""
    return rng(seed, Stream.CORE).standard_normal((k, k))


def build_backward_instance(p: BackwardConstructionParams, check: bool = True) -> tuple[Matrix, Matrix, Matrix]:
    """``(A, U, V)`` whose capacitance is ``I + S``.

    ``A`` is diagonal, ``U = A Q`` picks ``k`` consecutive columns of ``A``
    starting at ``block_offset`` and ``V = Q S^T`` with ``S`` Gaussian, scaled
    so ``||S||_2 = lam / ||U||_2``.  Then ``||U||_2 ||V||_2 = lam`` and
    ``V^T A^{-1} U = S``.

    Raises
    ------
    ConstructionError
        If ``I + V^T A^{-1} U`` differs from ``I + S`` entrywise by more than
        1e-12 (relative to ``max(1, ||S||)``).
    """
    n, k, off = p.n, p.k, p.block_offset
    d = backward_diagonal(n, p.regime)
    a = np.diag(d)
    q = np.zeros((n, k))
    q[off : off + k, :] = np.eye(k)
    u = a @ q
    g = backward_core(k, p.seed)
    s = g * ((p.lam / float(singular_values(u)[0])) / float(singular_values(g)[0]))
    v = q @ s.T
    if check:
        c = capacitance(invert(a), u, v)
        err = float(np.max(np.abs(c - (np.eye(k) + s))))
        if err > 1e-12 * max(1.0, float(np.max(np.abs(s)))):
            raise ConstructionError(f"capacitance misses I + S by {err:.3e}")
    return a, u, v


def sweep_offsets(n: int, k: int) -> list[int]:
    """Block offsets from ``n // 4`` to ``3n // 4`` in steps of ``k``.

    Offsets whose block would run past row ``n`` are dropped.
    """
    if k < 1 or 2 * k > n:
        raise ValueError(f"need 1 <= k <= n/2, got k={k}, n={n}")
    stop = min(3 * n // 4, n - k)
    return list(range(n // 4, stop + 1, k))
