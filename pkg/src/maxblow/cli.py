"""Command-line front end.

Subcommands::

    maxblow space   --gen dyadic:10 --check --window 0.002:0.5:8
    maxblow norm    --gen dyadic:4 --exponent const:2 --function f.csv
    maxblow maximal --file s.txt --function f.csv --fast --out mf.csv
    maxblow sweep   --gen dyadic:14 --exponent const:1 --k 1,2,4,8

Exit status is 0 on success, 1 on bad input or a pipeline error and 2 when a
verification fails (axioms, certificates, or the growth check of a sweep).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counterexample import MODES, sweep
from .errors import AxiomViolation, MaxblowError, NonpositiveTolerance
from .maximal import maximal_function, maximal_function_interval
from .space import (
    RadiusWindow,
    doubling_certificate,
    gen_dyadic_interval,
    gen_grid_torus,
    gen_power_weight,
    load_space,
    verify_quasi_metric,
)
from .varlp import DEFAULT_TOL, ExponentFunction, PointFunction, luxemburg_norm


class UsageError(MaxblowError):
    """Malformed command-line value."""


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    gen: str | None = None
    file: str | None = None
    exponent: str | None = None
    function: str | None = None
    window: str | None = None
    k: str = "1,2,4,8"
    mode: str = "density"
    tol: float = DEFAULT_TOL
    check: bool = False
    fast: bool = False
    out: str | None = None
    reports: str | None = None

    def __post_init__(self):
        if (self.gen is None) == (self.file is None):
            raise UsageError("give exactly one of --gen and --file")
        if not (0 < self.tol <= 1e-3):
            raise NonpositiveTolerance(f"tolerance must lie in (0, 1e-3], got {self.tol}")


# -- parsing helpers ----------------------------------------------------------

def _ints(parts, what):
    try:
        return [int(s) for s in parts]
    except ValueError:
        raise UsageError(f"bad {what}: {':'.join(parts)!r}") from None


def build_space(cfg: RunConfig):
    if cfg.file is not None:
        return load_space(cfg.file)
    kind, *args = cfg.gen.split(":")
    if kind == "dyadic" and len(args) == 1:
        return gen_dyadic_interval(*_ints(args, "generator"))
    if kind == "torus" and len(args) == 2:
        return gen_grid_torus(*_ints(args, "generator"))
    if kind == "power" and len(args) == 2:
        (L,) = _ints(args[:1], "generator")
        try:
            alpha = float(args[1])
        except ValueError:
            raise UsageError(f"bad exponent alpha {args[1]!r}") from None
        return gen_power_weight(L, alpha)
    raise UsageError(f"unknown generator {cfg.gen!r}; use dyadic:L, torus:dim:n or power:L:alpha")


def parse_window(text: str) -> RadiusWindow:
    """``r_min:r_max:steps`` as a geometric grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"window must be r_min:r_max:steps, got {text!r}")
    try:
        r_min, r_max, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"window must be r_min:r_max:steps, got {text!r}") from None
    return RadiusWindow.geometric(r_min, r_max, steps)


def read_point_csv(path, n, allow_inf=False) -> np.ndarray:
    """A ``point,value`` file covering every point exactly once."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    if not rows or [c.strip() for c in rows[0]] != ["point", "value"]:
        raise UsageError(f"{path}: header must be 'point,value'")
    vals = np.full(n, np.nan)
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        try:
            x, v = int(row[0]), float(row[1])
        except (ValueError, IndexError):
            raise UsageError(f"{path}:{lineno}: expected 'point,value'") from None
        if not 0 <= x < n or not np.isnan(vals[x]):
            raise UsageError(f"{path}:{lineno}: point {x} out of range or repeated")
        if math.isnan(v) or (math.isinf(v) and not allow_inf):
            raise UsageError(f"{path}:{lineno}: value {row[1]!r} not allowed")
        vals[x] = v
    if np.any(np.isnan(vals)):
        raise UsageError(f"{path}: missing values for {int(np.isnan(vals).sum())} points")
    return vals


def build_exponent(text: str, space) -> ExponentFunction:
    """``const:v``, ``twopiece:v1,v2,split`` (v1 where the first coordinate is below split) or a file."""
    if text.startswith("const:"):
        try:
            return ExponentFunction.constant(float(text[6:]), space.n)
        except ValueError:
            raise UsageError(f"bad constant exponent {text!r}") from None
    if text.startswith("twopiece:"):
        try:
            v1, v2, split = (float(s) for s in text[9:].split(","))
        except ValueError:
            raise UsageError(f"twopiece needs v1,v2,split, got {text!r}") from None
        if space.coords is None:
            raise UsageError("twopiece needs a space with coordinates")
        return ExponentFunction(np.where(space.coords[:, 0] < split, v1, v2))
    return ExponentFunction(read_point_csv(text, space.n, allow_inf=True))


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands ----------------------------------------------------------------

def cmd_space(cfg: RunConfig) -> int:
    space = build_space(cfg)
    lines = [f"n={space.n}", f"total_measure={space.total_measure:.12g}"]
    status = 0
    if cfg.check:
        try:
            qm = verify_quasi_metric(space.dist)
        except AxiomViolation as exc:
            print(f"axiom violation: {exc}", file=sys.stderr)
            return 2
        window = parse_window(cfg.window) if cfg.window else RadiusWindow.for_space(space)
        dc = doubling_certificate(space, window)
        lines += [
            f"c0={qm.c0:.12g}",
            f"c1={qm.c1:.12g}",
            f"a_const={dc.a_const:.12g}",
            f"delta_const={dc.delta_const:.12g}",
            f"a_witness={dc.a_witness[0]} {dc.a_witness[1]:.12g}",
            f"delta_witness={dc.delta_witness[0]} {dc.delta_witness[1]:.12g}",
            f"reverse_doubling={'true' if dc.reverse_doubling else 'false'}",
        ]
        if dc.reverse_doubling_fails:
            status = 2
    _emit("\n".join(lines) + "\n", cfg.out)
    return status


def cmd_norm(cfg: RunConfig) -> int:
    if cfg.exponent is None or cfg.function is None:
        raise UsageError("norm needs --exponent and --function")
    space = build_space(cfg)
    p = build_exponent(cfg.exponent, space)
    f = PointFunction(np.abs(read_point_csv(cfg.function, space.n)))
    _emit(luxemburg_norm(space, p, f, cfg.tol).record() + "\n", cfg.out)
    return 0


def cmd_maximal(cfg: RunConfig) -> int:
    if cfg.function is None:
        raise UsageError("maximal needs --function")
    space = build_space(cfg)
    f = PointFunction(np.abs(read_point_csv(cfg.function, space.n)))
    res = (maximal_function_interval if cfg.fast else maximal_function)(space, f)
    _emit("\n".join(res.csv_rows(f)) + "\n", cfg.out)
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.exponent is None:
        raise UsageError("sweep needs --exponent")
    space = build_space(cfg)
    p = build_exponent(cfg.exponent, space)
    ks = _ints(cfg.k.split(","), "k list")
    window = parse_window(cfg.window) if cfg.window else RadiusWindow.for_space(space)
    cert = doubling_certificate(space, window)
    result = sweep(space, p, ks, cert, window, cfg.tol, cfg.mode)
    _emit(result.csv(), cfg.out)
    if cfg.reports:
        d = Path(cfg.reports)
        d.mkdir(parents=True, exist_ok=True)
        for row in result.rows:
            (d / f"report_k{row.k}.txt").write_text(row.record())
    print(f"growth_verified={'true' if result.growth_verified else 'false'}", file=sys.stderr)
    return 0 if result.growth_verified else 2


COMMANDS = {"space": cmd_space, "norm": cmd_norm, "maximal": cmd_maximal, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxblow", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--gen", help="generator: dyadic:L, torus:dim:n or power:L:alpha")
        src.add_argument("--file", help="space file")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative norm tolerance")

    sp = sub.add_parser("space", help="generate or load a space and verify it")
    common(sp)
    sp.add_argument("--check", action="store_true", help="verify axioms and doubling constants")
    sp.add_argument("--window", help="r_min:r_max:steps (geometric)")

    sp = sub.add_parser("norm", help="Luxemburg norm of a function")
    common(sp)
    sp.add_argument("--exponent", required=True, help="const:v, twopiece:v1,v2,split or a CSV file")
    sp.add_argument("--function", required=True, help="CSV file with header point,value")

    sp = sub.add_parser("maximal", help="maximal function as CSV")
    common(sp)
    sp.add_argument("--function", required=True, help="CSV file with header point,value")
    sp.add_argument("--fast", action="store_true", help="use the interval algorithm")

    sp = sub.add_parser("sweep", help="counterexample sweep over k")
    common(sp)
    sp.add_argument("--exponent", required=True, help="const:v, twopiece:v1,v2,split or a CSV file")
    sp.add_argument("--k", default="1,2,4,8", help="strictly ascending comma-separated k values")
    sp.add_argument("--window", help="r_min:r_max:steps (geometric)")
    sp.add_argument("--mode", choices=MODES, default="density")
    sp.add_argument("--reports", help="directory for per-k key=value reports")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = {k: v for k, v in vars(args).items() if v is not None}
    try:
        cfg = RunConfig(**opts)
        return COMMANDS[cfg.subcommand](cfg)
    except AxiomViolation as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (MaxblowError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
