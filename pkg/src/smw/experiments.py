"""Reproducible error sweeps and their CSV format.

Four families:

``forward-eps`` / ``backward-eps``
    Gaussian ``A, U, V`` fixed per run, ``eps1 = eps2 = eps`` swept.
``forward-alpha``
    Constructed instances with ``||(I + V^T A^{-1} U)^{-1}||_2`` swept.
``backward-beta``
    Constructed instances with ``||I + V^T A^{-1} U||_2`` swept through the
    position of the update block.

Instance matrices are drawn from ``base_seed``; trial ``t`` at every grid
point uses seed ``base_seed + t`` for its error matrices, so the same error
directions are reused (rescaled) across the grid.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

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
from .core import direct_inverse_perturbed, smw_inverse_approx
from .linalg import Matrix, SingularMatrixError, Stream, invert, rng, singular_values, two_norm
from .perturbation import PerturbationSpec, make_update_pair, perturb_instance

FAMILIES = ("forward-eps", "backward-eps", "forward-alpha", "backward-beta")
UPDATE_SCALES = {
    "half-sigma-min": ("min", 0.5),
    "half-sigma-max": ("max", 0.5),
    "twice-sigma-min": ("min", 2.0),
    "twice-sigma-max": ("max", 2.0),
    "hundred-sigma-min": ("min", 100.0),
}
CSV_COLUMNS = (
    "sweep_value",
    "mean_actual_error",
    "bound_full",
    "bound_simplified",
    "bound_dominant_term",
    "baseline_direct",
    "assumptions_ok_fraction",
    "failed_trials",
)

DESK = {"n": 200, "k": 10, "trials": 20}
PAPER = {"n": 1000, "k": 20, "trials": 100}


def default_eps_grid() -> tuple[float, ...]:
    return tuple(float(x) for x in np.logspace(-8, 2, 41))


def default_alpha_grid() -> tuple[float, ...]:
    return tuple(float(x) for x in np.logspace(0, 6, 20))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to replay a sweep bit for bit.

    ``update_scale`` is one of :data:`UPDATE_SCALES` or a float giving ``lam``
    directly.  ``sweep_grid`` holds eps values, alpha targets, or (for
    ``backward-beta``) block offsets; empty means the family default.
    ``regime`` selects the backward-beta diagonal and the file label; it is
    inferred from ``update_scale`` when omitted.
    """

    family: str
    n: int = DESK["n"]
    k: int = DESK["k"]
    update_scale: str | float = "half-sigma-min"
    sweep_grid: tuple[float, ...] = ()
    trials: int = DESK["trials"]
    base_seed: int = 0
    eps_fixed: float | None = None
    regime: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if isinstance(self.update_scale, str) and self.update_scale not in UPDATE_SCALES:
            raise ValueError(f"unknown update scale {self.update_scale!r}")
        if not isinstance(self.update_scale, str) and not self.update_scale > 0:
            raise ValueError("explicit update scale must be positive")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        grid = tuple(float(x) for x in self.sweep_grid)
        if list(grid) != sorted(grid):
            raise ValueError("sweep_grid must be sorted ascending")
        object.__setattr__(self, "sweep_grid", grid)
        if self.regime is None:
            object.__setattr__(self, "regime", infer_regime(self.update_scale))
        if self.regime not in ("small-update", "large-update"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.family in ("forward-alpha", "backward-beta") and self.eps_fixed is None:
            raise ValueError(f"{self.family} needs eps_fixed")

    def grid(self) -> tuple[float, ...]:
        if self.sweep_grid:
            return self.sweep_grid
        if self.family in ("forward-eps", "backward-eps"):
            return default_eps_grid()
        if self.family == "forward-alpha":
            return default_alpha_grid()
        return tuple(float(o) for o in sweep_offsets(self.n, self.k))

    def resolved(self) -> "ExperimentConfig":
        """Copy with the default grid written out explicitly."""
        return replace(self, sweep_grid=self.grid())

    def file_stem(self) -> str:
        return f"{self.family}_{self.regime.split('-')[0]}_{self.n}x{self.k}"


def infer_regime(update_scale: str | float) -> str:
    if isinstance(update_scale, str) and update_scale.endswith("sigma-max"):
        return "large-update"
    return "small-update"


def resolve_lambda(update_scale: str | float, sigma: np.ndarray) -> float:
    """Update magnitude for a matrix with singular values ``sigma``."""
    if not isinstance(update_scale, str):
        return float(update_scale)
    which, factor = UPDATE_SCALES[update_scale]
    return factor * float(sigma[-1] if which == "min" else sigma[0])


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    mean_actual_error: float
    bound_full: float
    bound_simplified: float
    bound_dominant_term: float
    baseline_direct: float | None
    assumptions_ok_fraction: float
    failed_trials: int
    errors: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def csv_values(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list[SweepRow]
    thresholds: dict[str, float]
    meta: dict[str, float] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([math.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows], dtype=float)


# -- trial machinery ----------------------------------------------------------


@dataclass(frozen=True)
class _Fixed:
    """Per-grid-point matrices shared by every trial."""

    a: Matrix
    u: Matrix
    v: Matrix
    a_inv: Matrix
    b: Matrix
    b_inv: Matrix


def _fixed(a: Matrix, u: Matrix, v: Matrix) -> _Fixed:
    b = a + u @ v.T
    return _Fixed(a, u, v, invert(a), b, invert(b))


@dataclass(frozen=True)
class _TrialOutcome:
    error: float
    ok: bool
    baseline: float = math.nan
    failed: bool = False


def _trial(
    fx: _Fixed,
    eps: float,
    seed: int,
    kind: str,
    inputs: bounds.BoundInputs,
    baseline: bool,
) -> _TrialOutcome:
    try:
        inst = perturb_instance(fx.a, fx.u, fx.v, PerturbationSpec(eps, eps, seed), a_inv=fx.a_inv)
        approx = smw_inverse_approx(inst)
        if kind == "forward":
            err = two_norm(approx - fx.b_inv)
            ok = bounds.forward_bound(inputs).all_ok
        else:
            err = two_norm(invert(approx) - fx.b)
            # The invertibility checks cost two SVDs; skip them once a scalar
            # hypothesis already fails.
            ok = bounds.backward_bound(inputs).all_ok
            ok = ok and bounds.backward_bound(inputs, bounds.invertibility_margins(inst)).all_ok
    except (SingularMatrixError, np.linalg.LinAlgError, ValueError):
        return _TrialOutcome(math.nan, False, failed=True)
    base = math.nan
    if baseline:
        try:
            base = two_norm(invert(direct_inverse_perturbed(fx.b, eps, seed, fx.b_inv)) - fx.b)
        except (SingularMatrixError, np.linalg.LinAlgError):
            base = math.nan
    return _TrialOutcome(err, ok, base)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _row(
    value: float,
    outcomes: Sequence[_TrialOutcome],
    full: float,
    simplified: float,
    dominant: float,
    baseline: bool,
) -> SweepRow:
    good = [o for o in outcomes if not o.failed]
    errs = tuple(o.error for o in good)
    mean = float(np.mean(errs)) if errs else math.nan
    frac = sum(o.ok for o in good) / len(good) if good else 0.0
    base = None
    if baseline:
        vals = [o.baseline for o in good if not math.isnan(o.baseline)]
        base = float(np.mean(vals)) if vals else math.nan
    return SweepRow(value, mean, full, simplified, dominant, base, frac, len(outcomes) - len(good), errs)


def _run_points(cfg, points, kind: str, baseline: bool, workers: int) -> list[list[_TrialOutcome]]:
    """``points`` is a list of ``(fixed, eps, inputs)``; returns outcomes per point
    in grid order, trials in trial order.

    Each job is one trial across the whole grid, so the trial's error draws
    are generated once and rescaled.
    """

    def run(t):
        seed = cfg.base_seed + t
        return [_trial(fx, eps, seed, kind, inp, baseline) for fx, eps, inp in points]

    by_trial = _map(run, range(cfg.trials), workers)
    return [[by_trial[t][i] for t in range(cfg.trials)] for i in range(len(points))]


# -- Gaussian eps sweeps ------------------------------------------------------


def gaussian_instance(cfg: ExperimentConfig) -> tuple[Matrix, Matrix, Matrix]:
    """The fixed Gaussian ``(A, U, V)`` of an eps sweep."""
    a = rng(cfg.base_seed, Stream.MATRIX).standard_normal((cfg.n, cfg.n))
    lam = resolve_lambda(cfg.update_scale, singular_values(a))
    u, v = make_update_pair(cfg.n, cfg.k, lam, cfg.base_seed)
    return a, u, v


def _meta(inp: bounds.BoundInputs) -> dict[str, float]:
    return {
        "lam": inp.lam,
        "alpha": inp.alpha,
        "beta": inp.beta,
        "norm_a": inp.norm_a,
        "norm_a_inv": inp.norm_a_inv,
    }


def _eps_sweep(cfg: ExperimentConfig, kind: str, workers: int) -> SweepResult:
    a, u, v = gaussian_instance(cfg)
    fx = _fixed(a, u, v)
    base_inp = bounds.measure_inputs(a, u, v)
    grid = cfg.grid()
    inputs = [base_inp.with_eps(e) for e in grid]
    outcomes = _run_points(cfg, [(fx, e, inp) for e, inp in zip(grid, inputs)], kind, kind == "backward", workers)
    rows = []
    for e, inp, outs in zip(grid, inputs, outcomes):
        if kind == "forward":
            full = bounds.forward_bound(inp)
            simple = bounds.forward_bound_simplified(inp)
        else:
            full = bounds.backward_bound(inp)
            simple = bounds.backward_bound_simplified(inp)
        rows.append(_row(e, outs, full.value, simple.value, max(full.terms.values()), kind == "backward"))
    if kind == "forward":
        thresholds = {"eps1_small.eps_max": forward_eps_threshold(base_inp)}
    else:
        thresholds = backward_eps_thresholds(base_inp)
    return SweepResult(cfg.resolved(), rows, thresholds, _meta(base_inp))


def run_forward_eps_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Mean forward error against ``eps1 = eps2 = eps`` on one Gaussian instance."""
    if cfg.family != "forward-eps":
        raise ValueError(f"expected family forward-eps, got {cfg.family}")
    return _eps_sweep(cfg, "forward", workers)


def run_backward_eps_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Mean backward error against ``eps``, with the direct-inversion baseline
    ``||(B^{-1} + E3)^{-1} - B||_2``, ``||E3||_2 = eps``."""
    if cfg.family != "backward-eps":
        raise ValueError(f"expected family backward-eps, got {cfg.family}")
    return _eps_sweep(cfg, "backward", workers)


def forward_eps_threshold(inp: bounds.BoundInputs) -> float:
    """Largest ``eps1`` with ``eps1 < 1/(2 lam alpha)`` (the boundary itself)."""
    la = inp.lam * inp.alpha
    return math.inf if la == 0 else 1.0 / (2.0 * la)


def backward_eps_thresholds(inp: bounds.BoundInputs) -> dict[str, float]:
    """Boundaries in ``eps = eps1 = eps2`` of the three backward hypotheses."""
    beta, lam = inp.beta, inp.lam
    if lam > 0:
        eps2_small = (-beta + math.sqrt(beta * beta + 2.0 * lam)) / (2.0 * lam)
    else:
        eps2_small = 1.0 / (2.0 * beta)

    def quad(e):
        return 4.0 * (beta + lam * e) ** 2 * e - 1.0

    hi = 1.0 / (4.0 * beta * beta)
    return {
        "eps1_small.eps_max": 1.0 / (2.0 * inp.norm_a),
        "eps2_small.eps_max": eps2_small,
        "eps2_squared_small.eps_max": brentq(quad, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps),
    }


# -- capacitance sweeps -------------------------------------------------------


def run_forward_alpha_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Mean forward error against the inverse-capacitance norm ``alpha``."""
    if cfg.family != "forward-alpha":
        raise ValueError(f"expected family forward-alpha, got {cfg.family}")
    eps = float(cfg.eps_fixed)
    lam = resolve_lambda(cfg.update_scale, forward_singular_values(cfg.n))
    points, inputs = [], []
    for alpha in cfg.grid():
        a, u, v = build_forward_instance(ForwardConstructionParams(cfg.n, cfg.k, alpha, lam, cfg.base_seed))
        inp = bounds.measure_inputs(a, u, v).with_eps(eps)
        points.append((_fixed(a, u, v), eps, inp))
        inputs.append(inp)
    outcomes = _run_points(cfg, points, "forward", False, workers)
    rows = []
    for alpha, inp, outs in zip(cfg.grid(), inputs, outcomes):
        full = bounds.forward_bound(inp)
        simple = bounds.forward_bound_alpha_large(inp)
        dominant = 2.0 * inp.norm_a_inv**2 * inp.lam**2 * inp.alpha**2 * eps
        rows.append(_row(inp.alpha, outs, full.value, simple.value, dominant, False))
    lam_meas = max(inp.lam for inp in inputs)
    thresholds = {"eps1_small.alpha_max": 1.0 / (2.0 * lam_meas * eps)}
    return SweepResult(cfg.resolved(), rows, thresholds, {"lam": lam_meas, "eps": eps})


def run_backward_beta_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Mean backward error against the capacitance norm ``beta``; rows are
    keyed by measured ``beta`` in block-offset order."""
    if cfg.family != "backward-beta":
        raise ValueError(f"expected family backward-beta, got {cfg.family}")
    eps = float(cfg.eps_fixed)
    lam = resolve_lambda(cfg.update_scale, np.sort(backward_diagonal(cfg.n, cfg.regime))[::-1])
    points, inputs = [], []
    for off in cfg.grid():
        p = BackwardConstructionParams(cfg.n, cfg.k, lam, int(off), cfg.regime, cfg.base_seed)
        a, u, v = build_backward_instance(p)
        inp = bounds.measure_inputs(a, u, v).with_eps(eps)
        points.append((_fixed(a, u, v), eps, inp))
        inputs.append(inp)
    outcomes = _run_points(cfg, points, "backward", False, workers)
    rows = []
    for inp, outs in zip(inputs, outcomes):
        full = bounds.backward_bound(inp)
        simple = bounds.backward_bound_beta_large(inp)
        dominant = 4.0 * inp.lam * eps * inp.beta**2
        rows.append(_row(inp.beta, outs, full.value, simple.value, dominant, False))
    lam_meas = inputs[0].lam
    norm_a = inputs[0].norm_a
    thresholds = {
        "eps1_small.eps_max": 1.0 / (2.0 * norm_a),
        "eps2_small.beta_max": 1.0 / (2.0 * eps) - lam_meas * eps,
        "eps2_squared_small.beta_max": 1.0 / (2.0 * math.sqrt(eps)) - lam_meas * eps,
    }
    return SweepResult(cfg.resolved(), rows, thresholds, {"lam": lam_meas, "eps": eps, "norm_a": norm_a})


RUNNERS = {
    "forward-eps": run_forward_eps_sweep,
    "backward-eps": run_backward_eps_sweep,
    "forward-alpha": run_forward_alpha_sweep,
    "backward-beta": run_backward_beta_sweep,
}


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    return RUNNERS[cfg.family](cfg, workers=workers)


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# -- analysis helpers ---------------------------------------------------------


def loglog_slope(x, y, lo: float = -math.inf, hi: float = math.inf) -> float:
    """Least-squares slope of ``log10 y`` on ``log10 x`` over ``lo <= x <= hi``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x >= lo) & (x <= hi) & (x > 0) & (y > 0) & np.isfinite(y)
    lx, ly = np.log10(x[keep]), np.log10(y[keep])
    if lx.size < 2 or np.ptp(lx) < 1e-9:
        raise ValueError("need at least two distinct positive points for a slope")
    return float(np.polyfit(lx, ly, 1)[0])


# -- CSV ----------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in result.rows:
        w.writerow(row.csv_values())
    for name, val in result.thresholds.items():
        buf.write(f"#threshold:{name}={_fmt(val)}\n")
    for name, val in result.meta.items():
        buf.write(f"#meta:{name}={_fmt(val)}\n")
    return buf.getvalue()


def emit_csv(result: SweepResult, path) -> Path:
    """Write ``result`` as CSV; thresholds follow the rows as
    ``#threshold:<name>=<value>`` comment lines."""
    path = Path(path)
    path.write_text(to_csv(result))
    return path


def read_csv(path) -> tuple[list[dict], dict[str, float], dict[str, float]]:
    """Parse an emitted CSV into ``(rows, thresholds, meta)``.

    Empty ``baseline_direct`` cells come back as ``None``.
    """
    rows, thresholds, meta = [], {}, {}
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    for ln in lines:
        if ln.startswith("#"):
            kind, _, kv = ln[1:].partition(":")
            key, _, val = kv.partition("=")
            {"threshold": thresholds, "meta": meta}.setdefault(kind, {})[key] = float(val)
    for rec in csv.DictReader(body):
        row = {}
        for key, val in rec.items():
            if key == "failed_trials":
                row[key] = int(val)
            else:
                row[key] = None if val == "" else float(val)
        rows.append(row)
    return rows, thresholds, meta


# -- config files -------------------------------------------------------------

CONFIG_KEYS = tuple(f for f in ExperimentConfig.__dataclass_fields__)


def config_to_text(cfg: ExperimentConfig) -> str:
    """Flat ``key = value`` rendering; feeding it back reproduces the run."""
    out = []
    for key, val in asdict(cfg).items():
        if key == "sweep_grid":
            val = ",".join(_fmt(x) for x in val)
        elif val is None:
            val = ""
        elif isinstance(val, float):
            val = _fmt(val)
        out.append(f"{key} = {val}")
    return "\n".join(out) + "\n"


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` comments allowed) into raw fields."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise ValueError(f"line {lineno}: expected '<key> = <value>' with key in {CONFIG_KEYS}")
        fields[key] = val.strip()
    return coerce_config_fields(fields)


def coerce_config_fields(fields: dict) -> dict:
    """Convert string field values to their typed form; blank means default."""
    out = {}
    for key, val in fields.items():
        if isinstance(val, str):
            val = val.strip()
            if val == "":
                continue
            if key in ("n", "k", "trials", "base_seed"):
                val = int(val)
            elif key == "eps_fixed":
                val = float(val)
            elif key == "sweep_grid":
                val = tuple(float(x) for x in val.split(",") if x.strip())
            elif key == "update_scale":
                try:
                    val = float(val)
                except ValueError:
                    pass
        out[key] = val
    return out


# -- figure presets -----------------------------------------------------------

SCALES = {"desk": DESK, "paper": PAPER}

_FIGURE_PANELS = {
    1: (("forward-eps", "half-sigma-min", None), ("forward-eps", "half-sigma-max", None)),
    2: (("backward-eps", "half-sigma-min", None), ("backward-eps", "half-sigma-max", None)),
    3: (("forward-alpha", "twice-sigma-min", 1e-3), ("forward-alpha", "twice-sigma-max", 1e-10)),
    4: (("backward-beta", "hundred-sigma-min", 1e-6), ("backward-beta", "twice-sigma-max", 1e-6)),
}


def figure_configs(which: int, scale: str = "desk", base_seed: int = 0) -> list[ExperimentConfig]:
    """Resolved configurations of the small- and large-update panels of a figure."""
    if which not in _FIGURE_PANELS:
        raise ValueError(f"unknown figure {which}; expected one of {sorted(_FIGURE_PANELS)}")
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; expected one of {sorted(SCALES)}")
    size = SCALES[scale]
    return [
        ExperimentConfig(fam, size["n"], size["k"], us, (), size["trials"], base_seed, eps).resolved()
        for fam, us, eps in _FIGURE_PANELS[which]
    ]


def slope_summary(result: SweepResult) -> dict[str, float]:
    """Log-log slopes of the mean error used to read off each figure's trend.

    eps sweeps fit over ``[1e-8, 1e-2]``; capacitance sweeps over the top decade
    of the measured sweep values.
    """
    x = result.column("sweep_value")
    out = {}
    if result.config.family.endswith("-eps"):
        lo, hi = 1e-8, 1e-2
    else:
        hi = float(np.nanmax(x))
        lo = hi / 10.0
    for col in ("mean_actual_error", "bound_full"):
        try:
            out[f"{col}.slope[{lo:.3g},{hi:.3g}]"] = loglog_slope(x, result.column(col), lo, hi)
        except ValueError:
            out[f"{col}.slope[{lo:.3g},{hi:.3g}]"] = math.nan
    return out
