"""Command-line front end.

Subcommands: ``curves``, ``simulate``, ``tails``, ``pascal-check``.
Exit codes: 0 success, 1 invariant violation or failed check, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .curves import DEFAULT_PARAMS, CurveParams, Scenario, parse_grid, sweep_curves
from .exponents import gallager_e0
from .params import ConfigError
from .protocol import ProtocolViolation, SchemeKind
from .simulator import (
    TailFitError,
    bit_error_vs_delay,
    empirical_ccdf,
    fit_tail,
    pascal_empirical_check,
    run_trials,
    write_trace,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def _u64(text: str) -> int:
    value = int(text, 0)
    if not (0 <= value < 2**64):
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erasure-feedback", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    curves = sub.add_parser("curves", help="rate/exponent tables and plots")
    curves.add_argument("scenario", choices=[s.value for s in Scenario])
    curves.add_argument("--grid", help="rate grid LO:HI:STEP")
    curves.add_argument("--out", default="out", help="output directory")
    curves.add_argument("--beta-f", type=float)
    curves.add_argument("--beta-b", type=float)
    curves.add_argument("--c-f", type=float, help="forward packet bits (inf allowed)")
    curves.add_argument("--c-b", type=float)
    curves.add_argument("--etas", help="comma-separated forward shares, e.g. 0.5,0.7,0.9")
    curves.add_argument("--no-plot", action="store_true")

    for name, text in (("simulate", "delay/error measurement"), ("tails", "service-time tails")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--trials", type=_nonneg_int)
        p.add_argument("--out")
        p.add_argument("--no-plot", action="store_true")

    pascal = sub.add_parser("pascal-check", help="Monte-Carlo check of the Pascal tail bound")
    pascal.add_argument("m", type=int)
    pascal.add_argument("gamma", type=float)
    pascal.add_argument("eps_prime", type=float)
    pascal.add_argument("samples", type=int, nargs="?", default=100_000)
    pascal.add_argument("--seed", type=_u64, default=0)
    pascal.add_argument("--out", help="optional CSV path for the checked points")
    return parser


def _header(lines: list[str]) -> str:
    return "".join(f"# {ln}\n" for ln in [f"erasure-feedback {__version__}"] + lines)


def cmd_curves(args) -> int:
    scenario = Scenario(args.scenario)
    base = DEFAULT_PARAMS[scenario]
    etas = base.etas if args.etas is None else tuple(float(e) for e in args.etas.split(","))
    params = CurveParams(
        beta_f=base.beta_f if args.beta_f is None else args.beta_f,
        beta_b=base.beta_b if args.beta_b is None else args.beta_b,
        c_f=base.c_f if args.c_f is None else args.c_f,
        c_b=base.c_b if args.c_b is None else args.c_b,
        etas=etas,
    )
    grid = parse_grid(args.grid) if args.grid else None
    table = sweep_curves(scenario, grid, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = table.write_csv(out / f"{scenario.value}.csv")
    print(f"wrote {path}")
    if not args.no_plot:
        from .plotting import plot_curves
        print(f"wrote {plot_curves(table, out / f'{scenario.value}.png')}")
    return EXIT_OK


def _run_config(args) -> RunConfig:
    return load_config(args.config, {"seed": args.seed, "trials": args.trials, "out": args.out})


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    spec = cfg.trial_spec()
    traces = run_trials(spec)
    curve = bit_error_vs_delay(traces)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [_header([f"config: {cfg.echo()}", f"seed: {cfg.seed}", f"trials: {len(traces)}"]),
             "delay,epsilon,stderr,observations,worst_offset,excluded,trials\n"]
    for r in curve.rows:
        lines.append(f"{r.delay},{r.epsilon:.10g},{r.stderr:.10g},{r.observations},"
                     f"{r.worst_offset},{r.excluded},{curve.trials}\n")
    summary = out / "summary.csv"
    summary.write_text("".join(lines), encoding="ascii")
    print(f"wrote {summary}")
    if cfg.write_trace:
        write_trace(traces, out / "trace.txt")
        print(f"wrote {out / 'trace.txt'}")
    if not args.no_plot and len(traces):
        from .plotting import plot_delay_curve
        print(f"wrote {plot_delay_curve(curve, cfg.k_f, out / 'delay.png')}")
    for r in curve.rows:
        print(f"d={r.delay:<6d} eps={r.epsilon:.4g} (+/- {r.stderr:.2g}, n={r.observations})")
    return EXIT_OK


def _analytic_rates(cfg: RunConfig) -> dict[str, float]:
    """Per-forward-use tail exponents each component should show."""
    if cfg.scheme is SchemeKind.NOLIST:
        return {"t1": float(gallager_e0(cfg.c_f, 1.0, cfg.beta_f)), "t2": math.nan,
                "t3": cfg.system.feedback_exponent}
    return {"t1": math.nan, "t2": math.nan, "t3": cfg.system.feedback_exponent}


def cmd_tails(args) -> int:
    cfg = _run_config(args)
    traces = run_trials(cfg.trial_spec())
    samples = traces.service_samples()
    comps = {
        "t1": np.array([s.t1 for s in samples], dtype=np.int64),
        "t2": np.array([s.t2 for s in samples], dtype=np.int64),
        "t3": np.array([s.t3 for s in samples], dtype=np.int64),
        "total": np.array([s.total for s in samples], dtype=np.int64),
    }
    analytic = _analytic_rates(cfg) | {"total": math.nan}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    head = _header([f"config: {cfg.echo()}", f"seed: {cfg.seed}", f"blocks: {len(samples)}"])
    rows = [head, "component,fitted_slope,stderr,analytic,ratio,t_lo,t_hi,samples\n"]
    ccdf_rows = [head, "component,t,ccdf\n"]
    ccdfs = {}
    for name, x in comps.items():
        try:
            fit = fit_tail(x, min_samples=min(10_000, max(x.size, 1)))
            slope, err, lo, hi = fit.slope, fit.stderr, str(fit.t_lo), str(fit.t_hi)
        except TailFitError:
            slope, err, lo, hi = math.nan, math.nan, "n/a", "n/a"
        a = analytic[name]
        ratio = slope / a if (a and math.isfinite(a) and math.isfinite(slope)) else math.nan
        cells = [name] + [("n/a" if not math.isfinite(v) else f"{v:.6g}") for v in (slope, err, a, ratio)]
        rows.append(",".join(cells + [lo, hi, str(x.size)]) + "\n")
        if x.size:
            t, p, _ = empirical_ccdf(x)
            ccdfs[name] = (t, p)
            ccdf_rows += [f"{name},{int(ti)},{pi:.10g}\n" for ti, pi in zip(t, p)]
    (out / "tails.csv").write_text("".join(rows), encoding="ascii")
    (out / "ccdf.csv").write_text("".join(ccdf_rows), encoding="ascii")
    print(f"wrote {out / 'tails.csv'}")
    print(f"wrote {out / 'ccdf.csv'}")
    if not args.no_plot and ccdfs:
        from .plotting import plot_ccdfs
        print(f"wrote {plot_ccdfs(ccdfs, out / 'ccdf.png')}")
    print("".join(rows[1:]), end="")
    return EXIT_OK


def cmd_pascal_check(args) -> int:
    if args.m < 1 or args.gamma <= 0 or args.samples < 1:
        raise ConfigError("need m >= 1, gamma > 0 and samples >= 1")
    report = pascal_empirical_check(args.m, args.gamma, args.eps_prime, args.samples, seed=args.seed)
    if not report.feasible:
        print(f"infeasible: {report.message}")
        return EXIT_VIOLATION
    print(f"m={report.m} gamma={report.gamma} eps'={report.eps_prime} eps={report.eps:.6g} "
          f"t_check={report.t_check:.6g}")
    for t, emp, exact, log_bound in report.points:
        print(f"t={t:<8g} empirical={emp:.4g} exact={exact:.4g} bound=exp({log_bound:.6g})")
    checks = {"monte-carlo domination": report.dominated, "exact domination": report.exact_dominated,
              "bernoulli identity": report.bernoulli_identity, "divergence bound": report.divergence_ok,
              "sampler vs exact law": report.sampler_ok}
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if args.out:
        lines = [_header([f"m={args.m} gamma={args.gamma} eps_prime={args.eps_prime} "
                          f"samples={args.samples} seed={args.seed}"]), "t,empirical,exact,log_bound\n"]
        lines += [f"{t:g},{e:.10g},{x:.10g},{b:.10g}\n" for t, e, x, b in report.points]
        Path(args.out).write_text("".join(lines), encoding="ascii")
    return EXIT_OK if report.passes else EXIT_VIOLATION


_COMMANDS = {"curves": cmd_curves, "simulate": cmd_simulate, "tails": cmd_tails,
             "pascal-check": cmd_pascal_check}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProtocolViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
