"""The Sherman-Morrison-Woodbury update, exact and with approximate inverses.

Throughout, ``B = A + U V^T`` and the capacitance matrix is ``I + V^T A^{-1} U``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    Matrix,
    SingularMatrixError,
    as_matrix,
    invert,
    Stream,
    pseudo_inverse,
    rng,
    singular_values,
    two_norm,
)


@dataclass(frozen=True)
class ProblemInstance:
    """One trial: the update ``(A, U, V)`` plus the two approximate inverses.

    ``a_inv_approx`` stands in for ``A^{-1}`` and ``z_inv`` for the inverse of
    the (perturbed) capacitance matrix.  ``lam`` is ``||U||_2 ||V||_2``.
    """

    a: Matrix
    u: Matrix
    v: Matrix
    a_inv_exact: Matrix
    a_inv_approx: Matrix
    z_inv: Matrix
    lam: float
    eps1: float = 0.0
    eps2: float = 0.0

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def k(self) -> int:
        return self.u.shape[1]

    def b(self) -> Matrix:
        return self.a + self.u @ self.v.T


def _check_update(a_inv: Matrix, u: Matrix, v: Matrix) -> None:
    n = a_inv.shape[0]
    if a_inv.shape != (n, n):
        raise ValueError(f"inverse must be square, got {a_inv.shape}")
    if u.shape[0] != n or v.shape != u.shape:
        raise ValueError(
            f"update factors must both be {n} x k, got {u.shape} and {v.shape}"
        )


def capacitance(a_inv, u, v) -> Matrix:
    """``I + v.T @ a_inv @ u``."""
    a_inv, u, v = as_matrix(a_inv), as_matrix(u), as_matrix(v)
    _check_update(a_inv, u, v)
    return np.eye(u.shape[1]) + v.T @ (a_inv @ u)


def smw_inverse_exact(a_inv, u, v) -> Matrix:
    """``(A + U V^T)^{-1}`` from an exact ``A^{-1}`` by the Woodbury formula.

    Raises
    ------
    SingularMatrixError
        If the capacitance matrix is singular within the rank tolerance.
    """
    a_inv, u, v = as_matrix(a_inv), as_matrix(u), as_matrix(v)
    c = capacitance(a_inv, u, v)
    try:
        c_inv = invert(c)
    except SingularMatrixError as exc:
        raise SingularMatrixError("capacitance matrix is singular", exc.sigma_min) from None
    w = a_inv @ u
    y = v.T @ a_inv
    return a_inv - w @ (c_inv @ y)


def smw_inverse_approx(inst: ProblemInstance) -> Matrix:
    """``Ã^{-1} - Ã^{-1} U Z^{-1} V^T Ã^{-1}`` with ``Z^{-1}`` taken as given.

    Evaluation order is fixed: ``W = Ã^{-1} U``, ``Y = V^T Ã^{-1}``, then
    ``Ã^{-1} - (W Z^{-1}) Y``.
    """
    a_inv = inst.a_inv_approx
    if inst.z_inv.shape != (inst.k, inst.k):
        raise ValueError(f"z_inv must be {inst.k} x {inst.k}, got {inst.z_inv.shape}")
    w = a_inv @ inst.u
    y = inst.v.T @ a_inv
    return a_inv - (w @ inst.z_inv) @ y


def lemma2_identity_residuals(a, u, v) -> tuple[float, float]:
    """Residuals of the two capacitance identities.

    Returns ``(r1, r2)`` with::

        r1 = ||(I + V^T A^{-1} U)      - V^T A^{-1} B (V^T)^+||_2
        r2 = ||(I + V^T A^{-1} U)^{-1} - V^T B^{-1} A (V^T)^+||_2

    Both vanish in exact arithmetic when ``U, V`` have full column rank and
    ``A, B`` are invertible.
    """
    a, u, v = as_matrix(a), as_matrix(u), as_matrix(v)
    a_inv = invert(a)
    b = a + u @ v.T
    try:
        b_inv = invert(b)
    except SingularMatrixError as exc:
        raise SingularMatrixError("updated matrix B is singular", exc.sigma_min) from None
    c = capacitance(a_inv, u, v)
    try:
        c_inv = invert(c)
    except SingularMatrixError as exc:
        raise SingularMatrixError("capacitance matrix is singular", exc.sigma_min) from None
    vt_pinv = pseudo_inverse(v.T)
    r1 = two_norm(c - v.T @ a_inv @ b @ vt_pinv)
    r2 = two_norm(c_inv - v.T @ b_inv @ a @ vt_pinv)
    return r1, r2


def direct_inverse_perturbed(b, eps3: float, seed: int, b_inv: Matrix | None = None) -> Matrix:
    """``B^{-1} + E3`` with ``E3`` a seeded Gaussian of spectral norm ``eps3``.

    This is the baseline of inverting ``B`` directly at the same accuracy as
    the approximate inverses fed to the update.  Pass ``b_inv`` to reuse an
    exact inverse.
    """
    from .perturbation import gaussian_with_norm

    if eps3 < 0:
        raise ValueError("eps3 must be nonnegative")
    b = as_matrix(b)
    if b_inv is None:
        b_inv = invert(b)
    return b_inv + gaussian_with_norm(b.shape[0], b.shape[1], eps3, seed, Stream.E3)
