"""Forward and backward error bounds for the approximate Woodbury update.

Every evaluator returns a :class:`BoundReport`.  Assumption violations never
raise: the sweeps deliberately run past the validity thresholds, so the value
is always computed and each hypothesis is reported as a flag together with a
signed margin (positive means satisfied).

Notation used in names and docstrings:

* ``eps1 = ||Ã^{-1} - A^{-1}||_2`` and ``eps2 = ||Z^{-1} - (I + V^T Ã^{-1} U)^{-1}||_2``
* ``lam = ||U||_2 ||V||_2``
* ``alpha = ||(I + V^T A^{-1} U)^{-1}||_2`` and ``beta = ||I + V^T A^{-1} U||_2``,
  both measured on the clean capacitance matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .core import ProblemInstance, capacitance, smw_inverse_approx
from .linalg import (
    Matrix,
    SingularMatrixError,
    as_matrix,
    condition_number,
    invert,
    rank_tolerance,
    singular_values,
    two_norm,
)


@dataclass(frozen=True)
class BoundInputs:
    """Scalars consumed by the bound evaluators."""

    eps1: float
    eps2: float
    lam: float
    alpha: float
    beta: float
    norm_a: float
    norm_a_inv: float
    kappa_v: float = math.nan
    norm_binv_a: float = math.nan
    norm_ainv_b: float = math.nan

    @property
    def sigma_min_a(self) -> float:
        return 1.0 / self.norm_a_inv

    def with_eps(self, eps1: float, eps2: float | None = None) -> "BoundInputs":
        return replace(self, eps1=eps1, eps2=eps1 if eps2 is None else eps2)


@dataclass(frozen=True)
class BoundReport:
    """An evaluated bound.

    ``terms`` holds the additive pieces (``value == sum(terms)`` for additive
    bounds); ``detail`` holds any other named quantity worth reporting.
    """

    value: float
    terms: dict[str, float] = field(default_factory=dict)
    assumptions_ok: dict[str, bool] = field(default_factory=dict)
    assumption_margins: dict[str, float] = field(default_factory=dict)
    detail: dict[str, float] = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(self.assumptions_ok.values())


@dataclass(frozen=True)
class GhadiriBoundInputs:
    """Inputs of the two-norm backward bound ``512 eps2 rho^14 + eps1``.

    Here ``eps1 = ||Ã - A||_2`` bounds the error of ``A`` itself (not of its
    inverse), ``rho >= 1`` caps the norms of ``A, A^{-1}, B, B^{-1}, U, V`` and
    ``gamma`` caps ``||U||_2`` and ``||V||_2``.
    """

    rho: float
    gamma: float
    eps1: float
    eps2: float


def _check_finite(inp) -> None:
    for name, val in vars(inp).items():
        if isinstance(val, float) and math.isnan(val) and name in ("kappa_v", "norm_binv_a", "norm_ainv_b"):
            continue
        if not math.isfinite(val):
            raise ValueError(f"bound input {name} is not finite: {val}")
        if val < 0:
            raise ValueError(f"bound input {name} is negative: {val}")


def _report(terms: dict[str, float], checks: dict[str, tuple[float, bool]], detail=None) -> BoundReport:
    """Assemble a report.

    ``checks`` maps assumption name -> ``(margin, strict)``; a strict check
    holds for ``margin > 0``, a non-strict one for ``margin >= 0``.
    """
    return BoundReport(
        value=math.fsum(terms.values()),
        terms=terms,
        assumptions_ok={k: bool(m > 0 or (m == 0 and not strict)) for k, (m, strict) in checks.items()},
        assumption_margins={k: m for k, (m, _) in checks.items()},
        detail=dict(detail or {}),
    )


def _lt(lhs: float, rhs: float) -> tuple[float, bool]:
    return rhs - lhs, True


def _le(lhs: float, rhs: float) -> tuple[float, bool]:
    return rhs - lhs, False


# -- measurement --------------------------------------------------------------


def measure_inputs(a, u, v, spec=None) -> BoundInputs:
    """Measure every scalar the theorems use for the update ``(A, U, V)``.

    ``spec`` (a :class:`~smw.perturbation.PerturbationSpec`) supplies
    ``eps1, eps2``; without it both are zero.  A singular capacitance matrix
    gives ``alpha = inf`` so that the evaluators refuse it.
    """
    a, u, v = as_matrix(a), as_matrix(u), as_matrix(v)
    s_a = singular_values(a)
    a_inv = invert(a)
    c = capacitance(a_inv, u, v)
    s_c = singular_values(c)
    if s_c[-1] <= rank_tolerance(s_c, c.shape):
        alpha = math.inf
    else:
        alpha = 1.0 / float(s_c[-1])
    b = a + u @ v.T
    try:
        norm_binv_a = two_norm(invert(b) @ a)
    except SingularMatrixError:
        norm_binv_a = math.inf
    return BoundInputs(
        eps1=0.0 if spec is None else spec.eps1,
        eps2=0.0 if spec is None else spec.eps2,
        lam=two_norm(u) * two_norm(v),
        alpha=alpha,
        beta=float(s_c[0]),
        norm_a=float(s_a[0]),
        norm_a_inv=1.0 / float(s_a[-1]),
        kappa_v=condition_number(v),
        norm_binv_a=norm_binv_a,
        norm_ainv_b=two_norm(a_inv @ b),
    )


def invertibility_margins(inst: ProblemInstance) -> dict[str, float]:
    """Smallest singular value minus rank tolerance for ``Ã`` and for
    ``(Z^{-1})^{-1} - V^T Ã^{-1} U``; both must be positive for the backward
    bound.  A singular ``Z^{-1}`` reports ``-inf`` for the second."""
    s = singular_values(inst.a_inv_approx)
    out = {"a_approx_invertible": float(s[-1]) - rank_tolerance(s, inst.a_inv_approx.shape)}
    try:
        z = invert(inst.z_inv)
    except SingularMatrixError:
        out["shifted_capacitance_invertible"] = -math.inf
        return out
    shifted = z - inst.v.T @ inst.a_inv_approx @ inst.u
    s = singular_values(shifted)
    out["shifted_capacitance_invertible"] = float(s[-1]) - rank_tolerance(s, shifted.shape)
    return out


# -- forward bounds -----------------------------------------------------------


def _forward_checks(inp: BoundInputs) -> dict[str, tuple[float, bool]]:
    la = inp.lam * inp.alpha
    limit = math.inf if la == 0 else 1.0 / (2.0 * la)
    return {"eps1_small": _lt(inp.eps1, limit)}


def forward_bound(inp: BoundInputs) -> BoundReport:
    """Full forward bound on ``||B̃^{-1} - B^{-1}||_2``.

    Three summands: ``eps1`` (the error of ``Ã^{-1}`` itself), the two
    single-capacitance-inverse terms ``eps1 lam alpha (2||A^{-1}|| + eps1)``, and
    the capacitance-error terms ``lam (||A^{-1}|| + eps1)^2 (eps2 + 2 eps1 lam alpha^2)``.
    Valid when ``eps1 < 1 / (2 lam alpha)``.
    """
    _check_finite(inp)
    e1, e2, lam, al, ai = inp.eps1, inp.eps2, inp.lam, inp.alpha, inp.norm_a_inv
    ai_t = ai + e1
    t1 = lam * ai_t**2 * e2
    t2 = 2.0 * ai_t**2 * al**2 * lam**2 * e1
    t3 = ai_t * lam * al * e1
    t4 = ai * lam * al * e1
    terms = {
        "eps1": e1,
        "alpha_terms": e1 * lam * al * (2.0 * ai + e1),
        "capacitance_terms": lam * ai_t**2 * (e2 + 2.0 * e1 * lam * al**2),
    }
    return _report(terms, _forward_checks(inp), {"t1": t1, "t2": t2, "t3": t3, "t4": t4})


def _small_update_checks(inp: BoundInputs, eps_names=("eps1", "eps2")) -> dict[str, tuple[float, bool]]:
    checks = {f"{name}_le_1": _le(getattr(inp, name), 1.0) for name in eps_names}
    checks["sigma_min_le_1"] = _le(inp.sigma_min_a, 1.0)
    return checks


def forward_bound_simplified(inp: BoundInputs) -> BoundReport:
    """Small-update forward bound ``2 eps2 ||A^{-1}|| + 12 eps1``.

    Hypotheses: ``eps1, eps2, sigma_min(A) <= 1``, ``lam <= sigma_min(A) / 2``
    and the full bound's condition on ``eps1``.
    """
    _check_finite(inp)
    checks = _small_update_checks(inp)
    checks["small_update"] = _le(inp.lam, 0.5 * inp.sigma_min_a)
    checks.update(_forward_checks(inp))
    terms = {"capacitance": 2.0 * inp.eps2 * inp.norm_a_inv, "a_inverse": 12.0 * inp.eps1}
    return _report(terms, checks)


def forward_bound_alpha_large(inp: BoundInputs) -> BoundReport:
    """Ill-conditioned-capacitance forward bound ``16 eps lam^2 ||A^{-1}||^2 alpha^2``.

    Stated for ``eps1 == eps2 == eps``; with unequal errors ``eps`` is taken as
    their maximum, which keeps the bound valid since every term is monotone.
    """
    _check_finite(inp)
    eps = max(inp.eps1, inp.eps2)
    checks = {"eps_equal": _le(abs(inp.eps1 - inp.eps2), 0.0)}
    checks.update(_small_update_checks(inp))
    checks.update(_forward_checks(inp))
    need = max(1.0 / inp.lam if inp.lam > 0 else math.inf, 1.0)
    checks["alpha_large"] = _le(need, inp.alpha)
    value = 16.0 * eps * inp.lam**2 * inp.norm_a_inv**2 * inp.alpha**2
    return _report({"dominant": value}, checks)


def forward_bound_kappa_v(inp: BoundInputs) -> BoundReport:
    """Full forward bound with ``alpha`` replaced by ``kappa(V) ||B^{-1} A||_2``.

    Needs no capacitance inverse.  The hypothesis is still checked against the
    measured ``alpha``.
    """
    surrogate = inp.kappa_v * inp.norm_binv_a
    rep = forward_bound(replace(inp, alpha=surrogate))
    checks = _forward_checks(inp)
    return _report(rep.terms, checks, {**rep.detail, "alpha_surrogate": surrogate})


# -- backward bounds ----------------------------------------------------------


def _backward_checks(inp: BoundInputs, invertibility: Mapping[str, float] | None) -> dict[str, tuple[float, bool]]:
    b_pert = inp.beta + inp.lam * inp.eps1
    checks = {
        "eps1_small": _lt(inp.eps1, 1.0 / (2.0 * inp.norm_a)),
        "eps2_small": _lt(inp.eps2, 1.0 / (2.0 * b_pert)),
        "eps2_squared_small": _lt(2.0 * b_pert**2 * inp.eps2, 0.5),
    }
    for name, margin in (invertibility or {}).items():
        checks[name] = (margin, True)
    return checks


def backward_bound(inp: BoundInputs, invertibility: Mapping[str, float] | None = None) -> BoundReport:
    """Full backward bound on ``||(B̃^{-1})^{-1} - B||_2``.

    ``2 eps1 ||A||^2`` bounds the part coming from ``Ã`` and
    ``4 lam eps2 (beta + lam eps1)^2`` the part coming from the capacitance
    inverse.  ``invertibility`` optionally carries margins (see
    :func:`invertibility_margins`) for the invertibility hypotheses, which are
    recorded as extra flags.
    """
    _check_finite(inp)
    b_pert = inp.beta + inp.lam * inp.eps1
    terms = {
        "s1": 2.0 * inp.eps1 * inp.norm_a**2,
        "s2": 4.0 * inp.lam * inp.eps2 * b_pert**2,
    }
    return _report(terms, _backward_checks(inp, invertibility), {"perturbed_beta": b_pert})


def backward_bound_simplified(inp: BoundInputs, invertibility: Mapping[str, float] | None = None) -> BoundReport:
    """Small-update backward bound ``2 eps1 ||A||^2 + 8 eps2``."""
    _check_finite(inp)
    checks = _small_update_checks(inp)
    checks["small_update"] = _le(inp.lam, 0.5 * inp.sigma_min_a)
    checks.update(_backward_checks(inp, invertibility))
    terms = {"s1": 2.0 * inp.eps1 * inp.norm_a**2, "s2": 8.0 * inp.eps2}
    return _report(terms, checks)


def backward_bound_beta_large(inp: BoundInputs, invertibility: Mapping[str, float] | None = None) -> BoundReport:
    """Large-capacitance backward bound ``18 lam eps beta^2`` (``eps = max(eps1, eps2)``)."""
    _check_finite(inp)
    eps = max(inp.eps1, inp.eps2)
    checks = {"eps_equal": _le(abs(inp.eps1 - inp.eps2), 0.0)}
    checks.update(_small_update_checks(inp))
    checks.update(_backward_checks(inp, invertibility))
    root = math.sqrt(inp.lam) if inp.lam > 0 else 0.0
    need = max(inp.lam, inp.norm_a / root if root > 0 else math.inf, 1.0)
    checks["beta_large"] = _le(need, inp.beta)
    return _report({"dominant": 18.0 * inp.lam * eps * inp.beta**2}, checks)


def backward_bound_kappa_v(inp: BoundInputs, invertibility: Mapping[str, float] | None = None) -> BoundReport:
    """Full backward bound with ``beta`` replaced by ``kappa(V) ||A^{-1} B||_2``."""
    surrogate = inp.kappa_v * inp.norm_ainv_b
    rep = backward_bound(replace(inp, beta=surrogate))
    return _report(
        rep.terms,
        _backward_checks(inp, invertibility),
        {**rep.detail, "beta_surrogate": surrogate},
    )


# -- inverse perturbation lemma and prior-work bounds -------------------------


def lemma1_bound(rho: float, eps: float) -> tuple[float, float]:
    """Bounds for ``||M - N||_2 <= eps <= 1/(2 rho)`` with ``||N^{-1}||_2 <= rho``.

    Returns ``(2 rho^2 eps, 2 rho)``: caps on ``||M^{-1} - N^{-1}||_2`` and on
    ``||M^{-1}||_2``.
    """
    if rho <= 0 or eps < 0:
        raise ValueError("need rho > 0 and eps >= 0")
    return 2.0 * rho**2 * eps, 2.0 * rho


def lemma1_applicable(rho: float, eps: float) -> bool:
    """Hypothesis ``eps <= 1/(2 rho)``; the boundary counts as admissible."""
    return eps <= 1.0 / (2.0 * rho)


def ghadiri_two_norm_bound(inp: GhadiriBoundInputs) -> BoundReport:
    """Two-norm backward bound ``512 eps2 rho^14 + eps1`` for the ``C = I`` case."""
    _check_finite(inp)
    rho, gamma, e1, e2 = inp.rho, inp.gamma, inp.eps1, inp.eps2
    checks = {
        "rho_ge_1": _le(1.0, rho),
        "gamma_le_rho": _le(gamma, rho),
        "eps1_lt_1": _lt(e1, 1.0),
        "eps2_small": _le(e2, 1.0 / (512.0 * rho**7)),
        "eps2_small_sharp": _le(e2, rho**3 / (8.0 * (1.0 + rho) ** 4 * (rho**3 + 1.0) ** 2)),
    }
    intermediate = 8.0 * (1.0 + gamma) ** 4 * rho**4 * (gamma**2 * rho + 1.0) ** 2 * e2
    terms = {"capacitance": 512.0 * e2 * rho**14, "a_error": e1}
    return _report(terms, checks, {"schur_intermediate": intermediate})


def measure_ghadiri_inputs(inst: ProblemInstance) -> GhadiriBoundInputs:
    """Measure ``rho, gamma`` and ``eps1 = ||Ã - A||_2`` for an instance."""
    b = inst.b()
    nu, nv = two_norm(inst.u), two_norm(inst.v)
    rho = max(
        1.0,
        two_norm(inst.a),
        two_norm(inst.a_inv_exact),
        nu,
        nv,
        two_norm(b),
        two_norm(invert(b)),
    )
    return GhadiriBoundInputs(
        rho=rho,
        gamma=max(nu, nv),
        eps1=two_norm(invert(inst.a_inv_approx) - inst.a),
        eps2=inst.eps2,
    )


def _zero_rows(m: Matrix) -> int:
    norms = np.linalg.norm(m, axis=1)
    tol = max(float(norms.max()), 1e-300) * max(m.shape) * np.finfo(float).eps
    return int(np.count_nonzero(norms <= tol))


def yip_capacitance_diagnostics(a, u, v) -> BoundReport:
    """Condition number of the capacitance matrix against Yip's two bounds.

    The general bound is ``min(kappa(U)^2, kappa(V^T)^2) kappa(A) kappa(B)``;
    the structured bound ``kappa(A) kappa(B)`` applies only when ``U V^T`` has
    exactly ``n - k`` zero rows (or columns) with the remaining ``k`` linearly
    independent.  Yip writes the capacitance as ``I - V^T A^{-1} U`` for
    ``A - U V^T``; replacing ``U`` by ``-U`` maps that onto the ``+`` convention
    used here and leaves every condition number unchanged.

    ``value`` is the general bound; ``detail`` carries ``kappa_capacitance`` and
    the structured bound, margins are bound minus ``kappa_capacitance``.
    """
    a, u, v = as_matrix(a), as_matrix(u), as_matrix(v)
    n, k = u.shape
    b = a + u @ v.T
    for name, m in (("A", a), ("B", b)):
        s = singular_values(m)
        if s[-1] <= rank_tolerance(s, m.shape):
            raise SingularMatrixError(f"{name} is singular", float(s[-1]))
    kc = condition_number(capacitance(invert(a), u, v))
    ka, kb = condition_number(a), condition_number(b)
    general = min(condition_number(u) ** 2, condition_number(v.T) ** 2) * ka * kb
    structured = ka * kb
    uvt = u @ v.T
    structured_ok = False
    for m in (uvt, uvt.T):
        if _zero_rows(m) == n - k:
            nz = m[np.linalg.norm(m, axis=1) > 0]
            s = singular_values(nz)
            structured_ok = structured_ok or int(np.count_nonzero(s > rank_tolerance(s, nz.shape))) == k
    return BoundReport(
        value=general,
        assumptions_ok={"structured_applicable": structured_ok},
        assumption_margins={"general": general - kc, "structured": structured - kc},
        detail={
            "kappa_capacitance": kc,
            "general_bound": general,
            "structured_bound": structured,
            "kappa_a": ka,
            "kappa_b": kb,
        },
    )


# -- actual errors ------------------------------------------------------------


def forward_error(inst: ProblemInstance, b_inv: Matrix | None = None) -> float:
    """``||B̃^{-1} - B^{-1}||_2``; pass ``b_inv`` to reuse an exact inverse."""
    if b_inv is None:
        b_inv = invert(inst.b())
    return two_norm(smw_inverse_approx(inst) - b_inv)


def backward_error(inst: ProblemInstance, b: Matrix | None = None) -> float:
    """``||(B̃^{-1})^{-1} - B||_2``.

    Raises :class:`SingularMatrixError` if the approximate inverse is singular.
    """
    if b is None:
        b = inst.b()
    return two_norm(invert(smw_inverse_approx(inst)) - b)


def forward_error_terms(inst: ProblemInstance) -> dict[str, float]:
    """Spectral norms of ``E1, T1, ..., T4`` in the five-way split of
    ``B̃^{-1} - B^{-1}``, for checking each piece against its bound."""
    a_inv, at = inst.a_inv_exact, inst.a_inv_approx
    u, v = inst.u, inst.v
    c_inv = invert(capacitance(a_inv, u, v))
    c_pert_inv = invert(capacitance(at, u, v))
    t1 = at @ u @ (inst.z_inv - c_pert_inv) @ v.T @ at
    t2 = at @ u @ (c_pert_inv - c_inv) @ v.T @ at
    t3 = at @ u @ c_inv @ v.T @ (at - a_inv)
    t4 = (at - a_inv) @ u @ c_inv @ v.T @ a_inv
    return {
        "eps1": two_norm(at - a_inv),
        "t1": two_norm(t1),
        "t2": two_norm(t2),
        "t3": two_norm(t3),
        "t4": two_norm(t4),
    }


def backward_error_terms(inst: ProblemInstance) -> dict[str, float]:
    """Spectral norms of ``S1 = Ã - A`` and ``S2 = (B̃^{-1})^{-1} - (Ã + U V^T)``."""
    a_approx = invert(inst.a_inv_approx)
    b_pert = invert(smw_inverse_approx(inst))
    return {
        "s1": two_norm(a_approx - inst.a),
        "s2": two_norm(b_pert - (a_approx + inst.u @ inst.v.T)),
    }
