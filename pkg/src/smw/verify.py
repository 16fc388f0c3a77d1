"""Seeded property suites behind ``smw verify``.

Each check runs a fixed, seeded family of instances and returns a
:class:`CheckResult` carrying the instance count, the number of violations
and the worst normalized margin (``1 - observed / allowed``; negative means
violated).  Suites are lists of checks; :func:`run_suites` runs a scope and
:func:`format_table` renders the human summary.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import bounds
from .constructions import (
    BackwardConstructionParams,
    ForwardConstructionParams,
    backward_diagonal,
    build_backward_instance,
    build_forward_instance,
    forward_singular_values,
    sweep_offsets,
)
from .core import capacitance, lemma2_identity_residuals, smw_inverse_approx, smw_inverse_exact
from .linalg import (
    Matrix,
    SingularMatrixError,
    condition_number,
    invert,
    orthonormal_from_gaussian,
    pseudo_inverse,
    rng,
    singular_values,
    svd,
    two_norm,
)
from .perturbation import PerturbationSpec, gaussian_with_norm, make_update_pair, perturb_instance

SCOPES = ("identities", "bounds", "lemma1", "constructions")

# Stream tags for the verification families, kept clear of the sweep tags.
_T_EXACT, _T_LEMMA2, _T_LEMMA2_ILL, _T_BOUNDS, _T_GHADIRI, _T_LEMMA1, _T_RANK1, _T_YIP = range(100, 108)


@dataclass
class CheckResult:
    suite: str
    name: str
    count: int
    violations: int
    worst_margin: float
    detail: dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0
    min_count: int = 1

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.count >= self.min_count


class _Tally:
    """Accumulates ``observed <= allowed`` comparisons."""

    def __init__(self):
        self.count = 0
        self.violations = 0
        self.worst = math.inf

    def add(self, observed: float, allowed: float) -> None:
        self.count += 1
        if not observed <= allowed:
            self.violations += 1
        margin = 1.0 - observed / allowed if allowed > 0 else (0.0 if observed <= 0 else -math.inf)
        self.worst = min(self.worst, margin)

    def result(self, suite: str, name: str, **kw) -> CheckResult:
        return CheckResult(suite, name, self.count, self.violations, self.worst, **kw)


def _timed(fn: Callable[[int], CheckResult | list[CheckResult]], seed: int) -> list[CheckResult]:
    t0 = time.perf_counter()
    out = fn(seed)
    out = out if isinstance(out, list) else [out]
    dt = (time.perf_counter() - t0) / len(out)
    for r in out:
        r.seconds = dt
    return out


# -- identities ---------------------------------------------------------------


def _well_conditioned_update(g: np.random.Generator, n: int, k: int, kappa_max: float = 1e6):
    """Gaussian ``(A, U, V)`` redrawn until ``kappa(B) <= kappa_max``."""
    while True:
        a = g.standard_normal((n, n))
        u = 0.5 * g.standard_normal((n, k))
        v = 0.5 * g.standard_normal((n, k))
        b = a + u @ v.T
        if condition_number(a) <= kappa_max and condition_number(b) <= kappa_max:
            return a, u, v, b


def check_smw_exactness(seed: int = 0, count: int = 100) -> CheckResult:
    """``||smw_inverse_exact - B^{-1}||_2 <= 1e-9 ||B^{-1}||_2``."""
    tally = _Tally()
    for i in range(count):
        g = rng(seed, _T_EXACT, i)
        n = int(g.integers(2, 51))
        k = int(g.integers(1, min(5, n) + 1))
        a, u, v, b = _well_conditioned_update(g, n, k)
        b_inv = invert(b)
        tally.add(two_norm(smw_inverse_exact(invert(a), u, v) - b_inv), 1e-9 * two_norm(b_inv))
    return tally.result("identities", "smw_exactness")


def check_zero_noise_collapse(seed: int = 0, count: int = 20) -> CheckResult:
    """Zero injected error reproduces the exact update to 1e-12 relative."""
    tally = _Tally()
    for i in range(count):
        g = rng(seed, _T_EXACT, 10_000 + i)
        n = int(g.integers(2, 41))
        k = int(g.integers(1, min(5, n) + 1))
        a, u, v, _ = _well_conditioned_update(g, n, k)
        inst = perturb_instance(a, u, v, PerturbationSpec(0.0, 0.0, i))
        exact = smw_inverse_exact(inst.a_inv_exact, u, v)
        tally.add(two_norm(smw_inverse_approx(inst) - exact), 1e-12 * two_norm(exact))
    return tally.result("identities", "zero_noise_collapse")


def _lemma2_tallies(instances: Iterable[tuple[Matrix, Matrix, Matrix]], tol: float):
    ident, compose = _Tally(), _Tally()
    for a, u, v in instances:
        c = capacitance(invert(a), u, v)
        r1, r2 = lemma2_identity_residuals(a, u, v)
        ident.add(r1, tol * two_norm(c))
        ident.add(r2, tol * two_norm(invert(c)))
        rhs = v.T @ invert(a + u @ v.T) @ a @ pseudo_inverse(v.T)
        compose.add(two_norm(c @ rhs - np.eye(c.shape[0])), tol)
    return ident, compose


def check_lemma2(seed: int = 0, count: int = 100) -> list[CheckResult]:
    """Both capacitance identities on Gaussian instances at 1e-9 relative, and
    on ``A = diag(1e4 ... 1e-4)`` at 1e-7 relative."""

    def gaussian():
        for i in range(count):
            g = rng(seed, _T_LEMMA2, i)
            n = int(g.integers(6, 51))
            k = int(g.integers(1, 6))
            a, u, v, _ = _well_conditioned_update(g, n, k)
            yield a, u, v

    def ill():
        for i in range(10):
            g = rng(seed, _T_LEMMA2_ILL, i)
            n = 20 + 10 * i
            a = np.diag(np.logspace(4, -4, n))
            yield a, g.standard_normal((n, 3)), g.standard_normal((n, 3))

    ident, compose = _lemma2_tallies(gaussian(), 1e-9)
    ill_ident, _ = _lemma2_tallies(ill(), 1e-7)
    return [
        ident.result("identities", "lemma2_residuals"),
        compose.result("identities", "lemma2_composition"),
        ill_ident.result("identities", "lemma2_ill_conditioned"),
    ]


# -- bounds -------------------------------------------------------------------

# For small updates kappa(V) ||A^{-1} B|| and beta can agree to the last few
# bits, so the surrogate comparisons allow rounding-level slack.
_ROUNDING_SLACK = 1.0 + 1e-12

BOUND_GRID = tuple((n, k) for n in (20, 100, 200) for k in (1, 5, 10))
_LAMBDA_RULES = ("half-sigma-min", "unit", "half-sigma-max")


def _lambda_for(rule: str, a: Matrix) -> float:
    s = singular_values(a)
    return {"half-sigma-min": 0.5 * s[-1], "unit": 1.0, "half-sigma-max": 0.5 * s[0]}[rule]


@dataclass
class _BoundTallies:
    forward: _Tally = field(default_factory=_Tally)
    backward: _Tally = field(default_factory=_Tally)
    fwd_simplified: _Tally = field(default_factory=_Tally)
    bwd_simplified: _Tally = field(default_factory=_Tally)
    fwd_alpha_large: _Tally = field(default_factory=_Tally)
    bwd_beta_large: _Tally = field(default_factory=_Tally)
    kappa_v_forward: _Tally = field(default_factory=_Tally)
    kappa_v_backward: _Tally = field(default_factory=_Tally)


def _theorem_instances(seed: int, per_cell: int, eps_per_matrix: int = 4):
    """Yield ``(inst, inputs, b, b_inv)`` over :data:`BOUND_GRID`, with
    ``eps1, eps2`` log-uniform on ``[1e-10, 1e-2]``."""
    for cell, (n, k) in enumerate(BOUND_GRID):
        for j in range(math.ceil(per_cell / eps_per_matrix)):
            g = rng(seed, _T_BOUNDS, cell, j)
            a = g.standard_normal((n, n))
            lam = _lambda_for(_LAMBDA_RULES[j % 3], a)
            u, v = make_update_pair(n, k, lam, int(g.integers(2**31)))
            base = bounds.measure_inputs(a, u, v)
            a_inv = invert(a)
            b = a + u @ v.T
            b_inv = invert(b)
            for t in range(eps_per_matrix):
                e1, e2 = 10.0 ** g.uniform(-10, -2, size=2)
                try:
                    inst = perturb_instance(a, u, v, PerturbationSpec(e1, e2, int(g.integers(2**31))), a_inv=a_inv)
                except SingularMatrixError:
                    continue
                yield inst, base.with_eps(e1, e2), b, b_inv


def check_theorems(seed: int = 0, per_cell: int = 120) -> list[CheckResult]:
    """Forward and backward bounds, and every corollary, against actual errors
    at instances whose recorded hypotheses all hold."""
    t = _BoundTallies()
    for inst, inp, b, b_inv in _theorem_instances(seed, per_cell):
        fwd = bounds.forward_error(inst, b_inv)
        if bounds.forward_bound(inp).all_ok:
            t.forward.add(fwd, bounds.forward_bound(inp).value)
            t.kappa_v_forward.add(bounds.forward_bound(inp).value, _ROUNDING_SLACK * bounds.forward_bound_kappa_v(inp).value)
        for rep, tally in (
            (bounds.forward_bound_simplified(inp), t.fwd_simplified),
            (bounds.forward_bound_alpha_large(inp), t.fwd_alpha_large),
        ):
            if rep.all_ok:
                tally.add(fwd, rep.value)

        inv = bounds.invertibility_margins(inst)
        full = bounds.backward_bound(inp, inv)
        if not full.all_ok:
            continue
        bwd = bounds.backward_error(inst, b)
        t.backward.add(bwd, full.value)
        t.kappa_v_backward.add(full.value, _ROUNDING_SLACK * bounds.backward_bound_kappa_v(inp, inv).value)
        for rep, tally in (
            (bounds.backward_bound_simplified(inp, inv), t.bwd_simplified),
            (bounds.backward_bound_beta_large(inp, inv), t.bwd_beta_large),
        ):
            if rep.all_ok:
                tally.add(bwd, rep.value)
    out = [
        t.forward.result("bounds", "forward_bound_validity", min_count=1000),
        t.backward.result("bounds", "backward_bound_validity", min_count=1000),
        t.fwd_simplified.result("bounds", "forward_small_update_corollary"),
        t.bwd_simplified.result("bounds", "backward_small_update_corollary"),
        t.kappa_v_forward.result("bounds", "forward_kappa_v_dominates"),
        t.kappa_v_backward.result("bounds", "backward_kappa_v_dominates"),
    ]
    # The large-alpha / large-beta corollaries rarely have all hypotheses met
    # on Gaussian instances; report them only when exercised.
    for tally, name in ((t.fwd_alpha_large, "forward_alpha_large_corollary"), (t.bwd_beta_large, "backward_beta_large_corollary")):
        if tally.count:
            out.append(tally.result("bounds", name))
    return out


def check_ghadiri(seed: int = 0, count: int = 50) -> CheckResult:
    """``||(B̃^{-1})^{-1} - B||_2 <= 512 eps2 rho^14 + ||Ã - A||_2`` with
    ``eps2`` below ``1/(512 rho^7)`` on well-conditioned instances."""
    tally = _Tally()
    for i in range(count):
        g = rng(seed, _T_GHADIRI, i)
        n = int(g.integers(5, 41))
        k = int(g.integers(1, min(5, n) + 1))
        q1 = orthonormal_from_gaussian(n, seed, _T_GHADIRI, i, 1)
        q2 = orthonormal_from_gaussian(n, seed, _T_GHADIRI, i, 2)
        a = (q1 * g.uniform(0.8, 1.25, n)) @ q2.T
        u, v = make_update_pair(n, k, float(g.uniform(0.05, 0.4)), i)
        probe = perturb_instance(a, u, v, PerturbationSpec(0.0, 0.0, i))
        rho = bounds.measure_ghadiri_inputs(probe).rho
        eps2 = float(g.uniform(0.05, 1.0)) / (512.0 * rho**7)
        eps1 = 10.0 ** g.uniform(-10, -5)
        inst = perturb_instance(a, u, v, PerturbationSpec(eps1, eps2, i))
        rep = bounds.ghadiri_two_norm_bound(bounds.measure_ghadiri_inputs(inst))
        if rep.assumptions_ok["eps2_small"] and rep.assumptions_ok["gamma_le_rho"]:
            tally.add(bounds.backward_error(inst), rep.value)
    return tally.result("bounds", "two_norm_backward_prior_bound", min_count=count)


def check_yip(seed: int = 0, count: int = 20) -> list[CheckResult]:
    """Capacitance condition number against the general bound on Gaussian
    updates and the structured bound on row-supported updates."""
    general, structured = _Tally(), _Tally()
    for i in range(count):
        g = rng(seed, _T_YIP, i)
        n = int(g.integers(5, 41))
        k = int(g.integers(1, min(5, n) + 1))
        a, u, v, _ = _well_conditioned_update(g, n, k)
        rep = bounds.yip_capacitance_diagnostics(a, u, v)
        general.add(rep.detail["kappa_capacitance"], rep.detail["general_bound"])
    for off in sweep_offsets(40, 4):
        a, u, v = build_backward_instance(BackwardConstructionParams(40, 4, 1.0, off, "large-update", seed))
        rep = bounds.yip_capacitance_diagnostics(a, u, v)
        if rep.assumptions_ok["structured_applicable"]:
            structured.add(rep.detail["kappa_capacitance"], rep.detail["structured_bound"])
    return [
        general.result("bounds", "capacitance_condition_general"),
        structured.result("bounds", "capacitance_condition_structured"),
    ]


# -- inverse perturbation lemma ----------------------------------------------


def check_lemma1_validity(seed: int = 0, count: int = 1000) -> list[CheckResult]:
    """Random ``(M, N)`` with ``||M - N||_2 = eps <= 1/(2 rho)``."""
    diff, cap = _Tally(), _Tally()
    for i in range(count):
        g = rng(seed, _T_LEMMA1, i)
        n = int(g.integers(1, 9))
        big_n = g.standard_normal((n, n))
        smin = float(singular_values(big_n)[-1])
        if smin < 1e-3:
            big_n += np.eye(n)
            smin = float(singular_values(big_n)[-1])
        rho = (1.0 / smin) * (1.0 + g.uniform())
        eps = g.uniform(0.0, 1.0) / (2.0 * rho)
        e = gaussian_with_norm(n, n, eps, i, _T_LEMMA1)
        m = big_n + e
        m_inv = invert(m)
        d_bound, cap_bound = bounds.lemma1_bound(rho, eps)
        diff.add(two_norm(m_inv - invert(big_n)), d_bound)
        cap.add(two_norm(m_inv), cap_bound)
    return [
        diff.result("lemma1", "inverse_difference_bound", min_count=count),
        cap.result("lemma1", "inverse_norm_cap", min_count=count),
    ]


def scalar_tightness_ratio(c: float = 1.0, n: int = 1) -> float:
    """``||M^{-1} - N^{-1}|| / (2 rho^2 eps)`` for ``M = (c/2) I``, ``N = c I``."""
    m, big_n = 0.5 * c * np.eye(n), c * np.eye(n)
    rho, eps = 1.0 / c, two_norm(m - big_n)
    return two_norm(invert(m) - invert(big_n)) / bounds.lemma1_bound(rho, eps)[0]


def rank_one_tightness_ratio(n: int = 5, seed: int = 0) -> float:
    """Same ratio for ``M = N + (1/2) sigma_n u_n v_n^T`` with ``rho = 1/sigma_n``."""
    g = rng(seed, _T_RANK1)
    left = orthonormal_from_gaussian(n, seed, _T_RANK1, 1)
    right = orthonormal_from_gaussian(n, seed, _T_RANK1, 2)
    big_n = (left * np.sort(g.uniform(1.0, 4.0, n))[::-1]) @ right.T
    f = svd(big_n)
    s_n = f.singulars[-1]
    m = big_n + 0.5 * s_n * np.outer(f.left[:, -1], f.right[:, -1])
    rho, eps = 1.0 / s_n, 0.5 * s_n
    return two_norm(invert(m) - invert(big_n)) / bounds.lemma1_bound(rho, eps)[0]


def check_lemma1_tightness(seed: int = 0) -> list[CheckResult]:
    scalar, rank_one = _Tally(), _Tally()
    s_ratios = [scalar_tightness_ratio(c, n) for c in (1.0, 0.5, 3.0, 1e-3, 250.0) for n in (1, 3)]
    r_ratios = [rank_one_tightness_ratio(n, seed + i) for i, n in enumerate((2, 5, 8, 12))]
    for r in s_ratios:
        scalar.add(abs(r - 1.0), 1e-12)
    for r in r_ratios:
        rank_one.add(abs(r - 1.0 / 3.0), 1e-10)
    return [
        scalar.result("lemma1", "scalar_tightness", detail={"ratio": s_ratios[0]}),
        rank_one.result("lemma1", "rank_one_tightness", detail={"ratio": r_ratios[0]}),
    ]


# -- constructions ------------------------------------------------------------


def check_forward_construction(seed: int = 0, n: int = 200, k: int = 10) -> list[CheckResult]:
    """Measured ``alpha`` within 1e-6 relative of targets over ``[2, 1e6]``,
    and the capacitance block for ``(n=20, k=3, alpha=10, lam=1)``."""
    fidelity = _Tally()
    sigma = forward_singular_values(n)
    for lam in (2.0 * sigma[-1], 2.0 * sigma[0]):
        for alpha in np.logspace(np.log10(2.0), 6.0, 12):
            a, u, v = build_forward_instance(ForwardConstructionParams(n, k, float(alpha), lam, seed))
            measured = 1.0 / float(singular_values(capacitance(invert(a), u, v))[-1])
            fidelity.add(abs(measured - alpha) / alpha, 1e-6)

    block = _Tally()
    p = ForwardConstructionParams(20, 3, 10.0, 1.0, seed)
    a, u, v = build_forward_instance(p)
    s20 = forward_singular_values(20)
    expected = np.diag([1.0 + 1.0 / s20[17], 1.0 + 0.9, 0.1])
    block.add(float(np.max(np.abs(capacitance(invert(a), u, v) - expected))), 1e-10)
    return [
        fidelity.result("constructions", "forward_alpha_fidelity"),
        block.result("constructions", "forward_capacitance_block"),
    ]


def check_backward_construction(seed: int = 0, n: int = 200, k: int = 10) -> CheckResult:
    """Capacitance equals ``I + S`` entrywise within 1e-12 (relative to
    ``max(1, max|S|)``) at every sweep offset of both regimes."""
    tally = _Tally()
    cases = [(40, 4, 10, "small-update")]
    cases += [(n, k, off, regime) for regime in ("small-update", "large-update") for off in sweep_offsets(n, k)]
    for nn, kk, off, regime in cases:
        d = np.sort(backward_diagonal(nn, regime))[::-1]
        lam = 100.0 * d[-1] if regime == "small-update" else 2.0 * d[0]
        a, u, v = build_backward_instance(BackwardConstructionParams(nn, kk, lam, off, regime, seed), check=False)
        s = v[off : off + kk, :].T
        err = float(np.max(np.abs(capacitance(invert(a), u, v) - (np.eye(kk) + s))))
        tally.add(err, 1e-12 * max(1.0, float(np.max(np.abs(s)))))
    return tally.result("constructions", "backward_capacitance_identity")


SUITES: dict[str, tuple[Callable[[int], CheckResult | list[CheckResult]], ...]] = {
    "identities": (check_smw_exactness, check_zero_noise_collapse, check_lemma2),
    "bounds": (check_theorems, check_ghadiri, check_yip),
    "lemma1": (check_lemma1_validity, check_lemma1_tightness),
    "constructions": (check_forward_construction, check_backward_construction),
}


def run_suites(scope: str = "all", seed: int = 0) -> list[CheckResult]:
    if scope != "all" and scope not in SUITES:
        raise ValueError(f"unknown scope {scope!r}; expected 'all' or one of {SCOPES}")
    names = SCOPES if scope == "all" else (scope,)
    results = []
    for name in names:
        for fn in SUITES[name]:
            results.extend(_timed(fn, seed))
    return results


def format_table(results: list[CheckResult]) -> str:
    head = f"{'suite':<14}{'check':<36}{'count':>7}{'viol':>6}{'worst margin':>14}{'secs':>8}  status"
    lines = [head, "-" * len(head)]
    for r in results:
        status = "PASS" if r.passed else ("FAIL" if r.violations else "FAIL (too few cases)")
        extra = "".join(f"  {k}={v:.12g}" for k, v in r.detail.items())
        lines.append(
            f"{r.suite:<14}{r.name:<36}{r.count:>7}{r.violations:>6}{r.worst_margin:>14.3e}{r.seconds:>8.2f}  {status}{extra}"
        )
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)


def main(scope: str = "all", seed: int = 0, stream=None) -> bool:
    results = run_suites(scope, seed)
    print(format_table(results), file=stream or sys.stderr)
    return all(r.passed for r in results)
