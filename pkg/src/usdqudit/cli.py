"""Command-line entry point: ``usdqudit <subcommand> [options]``.

Exit codes: 0 success, 1 I/O, parse or convergence error, 2 mathematically
infeasible input (non-discriminable ensemble, inapplicable closed form,
extension dimension too small).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .ensemble import (
    LgTripleParams,
    StateEnsemble,
    lg_triple,
    load_ensemble,
    orthonormal_ensemble,
    pattern_ensemble,
)
from .errors import ConvergenceError, InfeasibleError
from .mesd import mesd_bound
from .naimark import (
    extend_2,
    extend_3_closed_form,
    extend_general,
    min_extension_dim,
    required_extension_dim,
    synthesize,
)
from .photonsim import (
    DEFAULT_MEAN_TOTAL,
    DEFAULT_PRIOR_SETS,
    DEFAULT_REPETITIONS,
    SWEEP_COLUMNS,
    crosstalk_visibility,
    empirical_stats,
    expected_counts,
    monte_carlo_sweep,
    outcome_probs,
    simulate_counts,
    sweep_rows,
)
from .serialize import dump_json
from .solver import build_povm, solve_optimal_alpha

log = logging.getLogger("usdqudit")

_ANGLE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)?)\*?pi(?:/(\d+\.?\d*))?$")


class UsageError(Exception):
    pass


def parse_angle(text: str) -> float:
    """Radians from ``"0.6666pi"``, ``"2pi/3"``, ``"pi"``, ``"-pi/2"`` or a plain number."""
    t = text.strip().replace("π", "pi").replace(" ", "")
    m = _ANGLE.match(t)
    if m:
        coef = m.group(1)
        c = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        den = float(m.group(2)) if m.group(2) else 1.0
        return c * np.pi / den
    try:
        return float(t)
    except ValueError:
        raise UsageError(f"cannot parse angle {text!r}") from None


def parse_priors(text: str) -> np.ndarray:
    try:
        return np.array([float(Fraction(x.strip())) for x in text.split(",")])
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse priors {text!r}") from None


def _ensemble(args) -> StateEnsemble:
    if args.lg:
        parts = args.lg.split(",")
        if len(parts) != 3:
            raise UsageError("--lg takes XI,THETA,PHI")
        if args.priors is None:
            raise UsageError("--lg needs --priors")
        xi, theta, phi = (parse_angle(p) for p in parts)
        return lg_triple(LgTripleParams(xi, theta, phi), parse_priors(args.priors))
    if args.input:
        ens = load_ensemble(args.input)
        return ens if args.priors is None else ens.with_priors(parse_priors(args.priors))
    raise UsageError("give an ensemble with --input PATH or --lg XI,THETA,PHI")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_solve(args) -> int:
    ens = _ensemble(args)
    report = solve_optimal_alpha(ens)
    povm = build_povm(ens, report.alpha_star)
    doc = {
        "ensemble": ens.to_json(),
        "solver": report.to_json(),
        "povm": {
            "elements": povm.elements,
            "inconclusive": povm.inconclusive,
            "min_inconclusive_eigenvalue": povm.min_inconclusive_eigenvalue,
        },
    }
    _emit(dump_json(doc), args.out)
    return 0


def cmd_extend(args) -> int:
    ens = _ensemble(args)
    extra: dict = {}
    method = args.method
    if method == "exact":
        meas, report = synthesize(ens)
        extra["solver"] = report.to_json()
    elif method == "two-state":
        meas = extend_2(ens)
    elif method == "closed-form":
        meas, coeffs = extend_3_closed_form(ens)
        extra["kappa"] = coeffs.kappa
        extra["a"] = coeffs.a
    else:
        if args.d_ext is None:
            raise UsageError("--method general needs --d-ext")
        meas, coeffs, _ = extend_general(ens, args.d_ext, args.restarts, args.seed, args.workers)
        extra["a"] = coeffs.a
        extra["constraint_residual"] = coeffs.constraint_residual
    doc = {
        "method": method,
        "measurement": meas.to_json(),
        "p_success": meas.p_success(ens),
        "orthonormality_error": meas.orthonormality_error(),
        "unambiguity_error": meas.unambiguity_error(ens),
        **extra,
    }
    _emit(dump_json(doc), args.out)
    return 0


def cmd_sweep(args) -> int:
    if args.phis:
        phis = [parse_angle(p) for p in args.phis.split(",")]
    else:
        phis = list(np.linspace(parse_angle(args.phi_start), parse_angle(args.phi_stop), args.phi_points))
    if args.priors_set:
        sets = {}
        for item in args.priors_set:
            label, sep, values = item.partition("=")
            if not sep:
                raise UsageError(f"--priors-set expects LABEL=q1,q2,q3, got {item!r}")
            sets[label] = parse_priors(values)
    else:
        sets = DEFAULT_PRIOR_SETS
    points = monte_carlo_sweep(
        phis,
        sets,
        theta=parse_angle(args.theta),
        xi=parse_angle(args.xi),
        mean_total=args.mean_total,
        repetitions=args.repetitions,
        noise=args.noise,
        rng_seed=args.seed,
    )
    _emit(_csv_text(SWEEP_COLUMNS, sweep_rows(points)), args.out)
    return 0


DIM_GROWTH_COLUMNS = (
    "d", "state_dim", "d_ext_min", "total_dim", "p_optimal", "rank_total_dim", "cap_total_dim", "gap_curve", "status",
)


def cmd_dim_growth(args) -> int:
    rows = []
    for d in range(args.d_min, args.d_max + 1):
        ens = orthonormal_ensemble(d) if args.orthonormal else pattern_ensemble(d)
        sweep = min_extension_dim(ens, args.tol, args.restarts, args.seed, workers=args.workers)
        alpha = solve_optimal_alpha(ens).alpha_star
        curve = ";".join(f"{k}:{'inf' if p is None else repr(sweep.p_optimal - p)}" for k, p in sweep.curve)
        rows.append(
            {
                "d": d,
                "state_dim": ens.dimension,
                "d_ext_min": "" if sweep.d_ext_min is None else sweep.d_ext_min,
                "total_dim": "" if sweep.total_dim is None else sweep.total_dim,
                "p_optimal": sweep.p_optimal,
                "rank_total_dim": ens.dimension + required_extension_dim(ens, alpha),
                "cap_total_dim": d * (d + 1) // 2,
                "gap_curve": curve,
                "status": "upper bound only" if sweep.capped else "ok",
            }
        )
    _emit(_csv_text(DIM_GROWTH_COLUMNS, rows), args.out)
    return 0


def cmd_simulate(args) -> int:
    ens = _ensemble(args)
    meas, report = synthesize(ens)
    dist = outcome_probs(meas, ens, args.noise)
    table = expected_counts(dist, args.mean_total) if args.exact else simulate_counts(dist, args.mean_total, args.seed)
    stats = empirical_stats(table, ens.priors)
    doc = {
        "total_dim": meas.total_dim,
        "p_success_theory": report.p_success,
        "distribution": dist.probs,
        "count_table": table.to_json(),
        "empirical": {"p_success": stats.p_success, "p_error": stats.p_error, "p_fail": stats.p_fail},
        "noise": args.noise,
    }
    _emit(dump_json(doc), args.out)
    return 0


def cmd_crosstalk(args) -> int:
    res = crosstalk_visibility(
        noise=args.noise, mean_total=args.mean_total, rng_seed=None if args.exact else args.seed
    )
    _emit(dump_json(res.to_json()), args.out)
    if args.out:
        cols = [f"m{j}" for j in range(res.counts.shape[1])]
        rows = [{"prep": f"p{i}", **dict(zip(cols, row))} for i, row in enumerate(res.counts.tolist())]
        Path(args.out).with_suffix(".csv").write_text(_csv_text(["prep", *cols], rows))
    return 0


def cmd_mesd(args) -> int:
    res = mesd_bound(_ensemble(args))
    _emit(dump_json(res.to_json()), args.out)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # parse errors map to exit code 1, not argparse's 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master RNG seed (default 0)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--tol", type=float, default=1e-4, help="P_s gap tolerance for dim-growth (default 1e-4)")
    common.add_argument("--mean-total", type=float, default=DEFAULT_MEAN_TOTAL, help="mean counts per prepared state")
    common.add_argument("--repetitions", type=int, default=DEFAULT_REPETITIONS, help="Monte Carlo repetitions")
    common.add_argument("-v", "--verbose", action="store_true")

    ens = argparse.ArgumentParser(add_help=False)
    ens.add_argument("--input", help="ensemble JSON file")
    ens.add_argument("--lg", help="LG triple angles XI,THETA,PHI, e.g. pi/3,2pi/3,0.6666pi")
    ens.add_argument("--priors", help="comma-separated priors, fractions allowed (1/3,1/3,1/3)")

    p = _Parser(prog="usdqudit", description="Optimal unambiguous discrimination of qudit states.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common, ens], help="optimal USD weights and POVM")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("extend", parents=[common, ens], help="projective measurement on an enlarged space")
    s.add_argument("--method", choices=["exact", "two-state", "closed-form", "general"], default="exact")
    s.add_argument("--d-ext", type=int)
    s.add_argument("--restarts", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_extend)

    s = sub.add_parser("sweep", parents=[common], help="LG phi sweep with theory, Monte Carlo and MESD columns")
    s.add_argument("--phi-start", default="0.5pi")
    s.add_argument("--phi-stop", default="0.9pi")
    s.add_argument("--phi-points", type=int, default=13)
    s.add_argument("--phis", help="explicit comma-separated phi list (overrides the grid)")
    s.add_argument("--theta", default="2pi/3")
    s.add_argument("--xi", default="pi/3")
    s.add_argument("--priors-set", action="append", help="LABEL=q1,q2,q3 (repeatable)")
    s.add_argument("--noise", type=float, default=0.0, help="depolarizing strength")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("dim-growth", parents=[common], help="minimal projective dimension of the pattern ensembles")
    s.add_argument("--d-min", type=int, default=3)
    s.add_argument("--d-max", type=int, default=6)
    s.add_argument("--restarts", type=int, default=200)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--orthonormal", action="store_true", help="use orthonormal states instead of the overlap pattern")
    s.set_defaults(func=cmd_dim_growth)

    s = sub.add_parser("simulate", parents=[common, ens], help="count table for the optimal measurement")
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--exact", action="store_true", help="expected counts instead of Poisson draws")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("crosstalk", parents=[common], help="4-dim MUB crosstalk matrix and visibilities")
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--exact", action="store_true", help="expected counts instead of Poisson draws")
    s.set_defaults(func=cmd_crosstalk)

    s = sub.add_parser("mesd", parents=[common, ens], help="minimum-error discrimination bound")
    s.set_defaults(func=cmd_mesd)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, OSError, ValueError, KeyError, ConvergenceError) as exc:
        # json.JSONDecodeError is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
