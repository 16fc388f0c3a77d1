"""``smw`` command line: verification suites, single sweeps and figure presets.

Machine-readable output (CSV paths, ``key=value`` lines) goes to stdout; the
human tables go to stderr.  Every CSV is written next to a ``.cfg`` echo of
the fully resolved configuration, and ``smw sweep --config <that file>``
regenerates the CSV byte for byte.

Exit status: 0 success, 1 verification failure, 2 usage error, 3 numerical
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import verify
from .constructions import ConstructionError

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def parse_grid(text: str) -> tuple[float, ...]:
    """``"1e-8,1e-4,1"`` or log-spaced ``"lo:hi:num"`` (e.g. ``"1e-8:1e2:41"``)."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, num = text.split(":")
            return tuple(float(x) for x in np.logspace(math.log10(float(lo)), math.log10(float(hi)), int(num)))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None


def _update_scale(text: str) -> str | float:
    if text in ex.UPDATE_SCALES:
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"update scale must be one of {sorted(ex.UPDATE_SCALES)} or a number, got {text!r}") from None


def resolve_config(args: argparse.Namespace) -> ex.ExperimentConfig:
    """File values first, then flags; the result has its grid written out."""
    fields: dict = {}
    if args.config:
        text = Path(args.config).read_text()
        try:
            fields.update(ex.parse_config_text(text))
        except ValueError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
    overrides = {
        "family": args.family,
        "n": args.n,
        "k": args.k,
        "trials": args.trials,
        "base_seed": args.seed,
        "eps_fixed": args.eps_fixed,
        "regime": args.regime,
        "update_scale": None if args.update_scale is None else _update_scale(args.update_scale),
        "sweep_grid": None if args.eps_grid is None else parse_grid(args.eps_grid),
    }
    fields.update({key: val for key, val in overrides.items() if val is not None})
    if "family" not in fields:
        raise UsageError("--family is required (or a config file with a family line)")
    if fields["family"] in ("forward-alpha", "backward-beta") and "eps_fixed" not in fields:
        fields["eps_fixed"] = 1e-3 if fields["family"] == "forward-alpha" else 1e-6
    if fields["family"] == "backward-beta" and "update_scale" not in fields:
        fields["update_scale"] = "hundred-sigma-min"
    try:
        return ex.ExperimentConfig(**fields).resolved()
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _summarize(result: ex.SweepResult, csv_path: Path, out=sys.stderr) -> None:
    cfg = result.config
    print(f"{cfg.family} {cfg.regime} n={cfg.n} k={cfg.k} trials={cfg.trials} -> {csv_path}", file=out)
    for name, val in result.thresholds.items():
        print(f"  threshold {name:<32} {val:.6g}", file=out)
    for name, val in ex.slope_summary(result).items():
        print(f"  {name:<44} {val:.4f}", file=out)
    failed = sum(r.failed_trials for r in result.rows)
    if failed:
        print(f"  failed trials (excluded from means): {failed}", file=out)


def write_result(result: ex.SweepResult, out_dir: Path) -> Path:
    stem = result.config.file_stem()
    csv_path = ex.emit_csv(result, out_dir / f"{stem}.csv")
    (out_dir / f"{stem}.cfg").write_text(ex.config_to_text(result.config))
    return csv_path


def run_and_write(cfg: ex.ExperimentConfig, out_dir: Path, threads: int) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)  # fail before computing, not after
    result = ex.run_sweep(cfg, workers=threads)
    path = write_result(result, out_dir)
    print(path)
    _summarize(result, path)
    return path


def cmd_verify(args) -> int:
    ok = verify.main(args.scope, args.seed)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    run_and_write(cfg, Path(args.out), args.threads)
    return EXIT_OK


def cmd_figure(args) -> int:
    for cfg in ex.figure_configs(args.which, args.scale, args.seed):
        run_and_write(cfg, Path(args.out), args.threads)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smw", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run seeded property suites")
    p.add_argument("scope", choices=("all",) + verify.SCOPES)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    def common(p):
        p.add_argument("--out", default="results", help="output directory (created if missing)")
        p.add_argument("--threads", type=int, default=ex.default_workers(), help="worker cap")
        p.add_argument("--seed", type=int, default=None, help="base seed")

    p = sub.add_parser("sweep", help="run one sweep and write CSV + .cfg")
    p.add_argument("--family", choices=ex.FAMILIES)
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--eps-grid", "--grid", dest="eps_grid", help="'a,b,c' or log-spaced 'lo:hi:num'")
    p.add_argument("--update-scale")
    p.add_argument("--eps-fixed", type=float)
    p.add_argument("--regime", choices=("small-update", "large-update"))
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure", help="run both panels of a figure preset")
    p.add_argument("which", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--scale", choices=tuple(ex.SCALES), default="desk")
    common(p)
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "seed", 0) is None:
        args.seed = 0 if args.command == "figure" else None
    if getattr(args, "threads", 1) < 1:
        print("smw: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"smw: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConstructionError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"smw: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"smw: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
