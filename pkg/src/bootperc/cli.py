"""Command-line surface.

Commands: ``thresholds``, ``run``, ``sweep``, ``giant``, ``bounds`` and
``stages`` (alias of ``run --stages``).  Output is machine readable: JSON
by default, CSV for sweep curves.  All probabilities print with 12
significant digits.  Exit codes: 0 success, 2 argument/validation error,
3 degenerate-regime error, 1 unexpected internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import montecarlo, stages, thresholds
from .engine import (
    ExplicitSource,
    ImplicitSource,
    SeedSpec,
    TraceOptions,
    run_process,
    write_trace_csv,
)
from .graph import largest_component, sample_gnp
from .montecarlo import ExperimentConfig, SeedSizeSpec
from .rng import STREAM_RUN, STREAM_STAGES, make_generator
from .thresholds import DegenerateRegime, NoConvergence, ProcessParams

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3


def _sig12(value):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(value, float):
        return float(f"{value:.12g}")
    if isinstance(value, dict):
        return {k: _sig12(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sig12(v) for v in value]
    return value


def _emit(payload, args) -> None:
    if isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(_sig12(payload), indent=2, sort_keys=True) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config_file(path) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; flags win over file."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


# config-file keys are the long option names; values coerce like the flags
_CONFIG_COERCE = {
    "n": int,
    "p": float,
    "r": int,
    "a": int,
    "trials": int,
    "seed": int,
    "workers": int,
    "mode": str,
    "format": str,
    "threshold": float,
    "alpha": float,
    "alpha_multiplier": float,
    "m": int,
    "eps": float,
    "a_list": str,
    "alpha_list": str,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    parser.add_argument("--out", type=str, default=None, help="write output to this path")
    parser.add_argument("--format", choices=["json", "csv"], default=None)
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="parallelism hint; BOOTPERC_WORKERS is the default; never changes output",
    )
    parser.add_argument("--config", type=str, default=None, help="key=value overlay file")


def _resolve_workers(args) -> int:
    if getattr(args, "workers", None) is not None:
        return max(1, args.workers)
    env = os.environ.get("BOOTPERC_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"BOOTPERC_WORKERS must be an integer, got {env!r}") from exc
    return 1


def _params_from(args) -> ProcessParams:
    return ProcessParams(n=args.n, p=args.p, r=args.r)


def _critical_dict(params: ProcessParams, crit: thresholds.CriticalValues) -> dict:
    return {
        "n": params.n,
        "p": params.p,
        "r": params.r,
        "np": params.mean_degree,
        "npr": params.npr,
        "regime_ok": params.regime_ok,
        "delta": crit.delta,
        "t0": crit.t0,
        "t0_int": crit.t0_int,
        "tc": crit.tc,
        "ac": crit.ac,
        "tc_asym": crit.tc_asym,
        "ac_asym": crit.ac_asym,
        "pi_hat_tc": crit.pi_hat_tc,
    }


def _cmd_thresholds(args) -> int:
    params = _params_from(args)
    crit = thresholds.critical_pair(params)
    _emit(_critical_dict(params, crit), args)
    return EXIT_OK


def _cmd_run(args) -> int:
    params = _params_from(args)
    if not (0 <= args.a <= params.n):
        raise ValueError(f"a={args.a} outside 0..{params.n}")
    alpha = args.alpha
    checkpoints: tuple[int, ...] = ()
    if args.stages:
        if alpha is None:
            crit = thresholds.critical_pair(params)
            alpha = args.a - crit.ac
        if not alpha > 0:
            raise ValueError(
                f"stage diagnostics need alpha > 0 (a={args.a} is not above the "
                "critical seed count; pass --alpha explicitly)"
            )
        checkpoints = (thresholds.stage_predictions(params, alpha).t1,)
    opts = TraceOptions(checkpoints=checkpoints, percolation_threshold=args.threshold)
    if args.mode == "implicit":
        source = ImplicitSource(params, rng=make_generator(args.seed, 0, STREAM_RUN))
    else:
        g = sample_gnp(params.n, params.p, args.seed)
        source = ExplicitSource(g, p=params.p)
    trace = run_process(source, SeedSpec.prefix(args.a), params.r, opts)
    payload = {
        "n": params.n,
        "p": params.p,
        "r": params.r,
        "a": args.a,
        "seed": args.seed,
        "mode": args.mode,
        "T": trace.T,
        "final_size": trace.final_size,
        "classification": trace.classification,
        "percolation_threshold": args.threshold,
    }
    if args.trace_out:
        write_trace_csv(trace, params, args.trace_out)
        payload["trace_csv"] = args.trace_out
    if args.stages:
        if args.mode == "implicit":
            stage_source = ImplicitSource(params, rng=make_generator(args.seed, 0, STREAM_STAGES))
        else:
            stage_source = source
        report = stages.run_stage_pipeline(stage_source, trace, params, alpha)
        payload["stages"] = report.to_dict()
    _emit(payload, args)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    params = _params_from(args)
    crit = thresholds.critical_pair(params)
    if args.a_list:
        a_values = [int(tok) for tok in args.a_list.split(",") if tok.strip()]
    elif args.alpha_list:
        offsets = [float(tok) for tok in args.alpha_list.split(",") if tok.strip()]
        a_values = [
            SeedSizeSpec(offset_c=c).resolve(crit, params.n) for c in offsets
        ]
    else:
        raise ValueError("sweep needs --a-list or --alpha-list")
    config = ExperimentConfig(
        params=params,
        seed_size=SeedSizeSpec(a=a_values[0]),
        trials=args.trials,
        master_seed=args.seed,
        mode=args.mode,
        percolation_threshold=args.threshold,
        workers=_resolve_workers(args),
    )
    result = montecarlo.sweep(config, a_values)
    if (args.format or "csv") == "csv":
        _emit(result.to_csv(), args)
    else:
        rows = [
            {
                "a": pt.a,
                "alpha_offset": pt.alpha_offset,
                "p_hat": pt.p_hat,
                "wilson_lo": pt.wilson_lo,
                "wilson_hi": pt.wilson_hi,
                "mean_final_size": pt.mean_final_size,
                "mean_T": pt.mean_T,
                "theorem_bound": pt.theorem_bound,
            }
            for pt in result.points
        ]
        _emit(rows, args)
    return EXIT_OK


def _cmd_giant(args) -> int:
    if not args.eps > 0:
        raise ValueError(f"eps must be > 0, got {args.eps}")
    if args.m < 2:
        raise ValueError(f"m must be >= 2, got {args.m}")
    p = (1.0 + args.eps) / args.m
    g = sample_gnp(args.m, p, args.seed)
    summary = largest_component(g)
    rho = thresholds.rho_fixed_point(args.eps)
    _emit(
        {
            "m": args.m,
            "eps": args.eps,
            "p": p,
            "seed": args.seed,
            "largest_size": summary.largest_size,
            "component_count": summary.component_count,
            "rho": rho,
            "predicted_size": rho * args.m,
        },
        args,
    )
    return EXIT_OK


def _cmd_bounds(args) -> int:
    chosen = [
        name
        for name, flag in [
            ("chernoff", args.chernoff),
            ("martingale", args.martingale),
            ("theorem1", args.theorem1),
            ("theorem2", args.theorem2),
        ]
        if flag
    ]
    if len(chosen) != 1:
        raise ValueError("pass exactly one of --chernoff lower|upper, --martingale, --theorem1, --theorem2")
    kind = chosen[0]
    if kind == "chernoff":
        if args.mean is None or args.lam is None:
            raise ValueError("--chernoff needs --mean and --lam")
        fn = thresholds.chernoff_lower if args.chernoff == "lower" else thresholds.chernoff_upper
        value = fn(args.mean, args.lam)
        payload = {"bound": value, "kind": f"chernoff_{args.chernoff}", "mean": args.mean, "lam": args.lam}
    elif kind == "martingale":
        if args.lam is None or args.max_step is None or args.var_sum is None:
            raise ValueError("--martingale needs --lam, --max-step and --var-sum")
        b = thresholds.BoundInputs(lam=args.lam, max_step=args.max_step, var_sum=args.var_sum)
        payload = {
            "bound": thresholds.martingale_tail_bound(b),
            "kind": "martingale",
            "lam": args.lam,
            "max_step": args.max_step,
            "var_sum": args.var_sum,
        }
    else:
        if args.n is None or args.p is None or args.r is None or args.alpha is None:
            raise ValueError(f"--{kind} needs --n, --p, --r and --alpha")
        params = _params_from(args)
        fn = (
            thresholds.theorem_subcritical_bound
            if kind == "theorem1"
            else thresholds.theorem_supercritical_bound
        )
        payload = {
            "bound": fn(params, args.alpha),
            "kind": kind,
            "n": params.n,
            "p": params.p,
            "r": params.r,
            "alpha": args.alpha,
            "t0": thresholds.t_zero(params),
        }
    _emit(payload, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bootperc",
        description="Bootstrap percolation on G(n,p): thresholds, runs, sweeps, bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_thr = sub.add_parser("thresholds", help="critical values for (n, p, r)")
    p_thr.add_argument("--n", type=int, required=True)
    p_thr.add_argument("--p", type=float, required=True)
    p_thr.add_argument("--r", type=int, required=True)
    _add_common(p_thr)
    p_thr.set_defaults(func=_cmd_thresholds)

    for name, force_stages in (("run", False), ("stages", True)):
        p_run = sub.add_parser(
            name,
            help="single seeded run" if name == "run" else "single run with stage diagnostics",
        )
        p_run.add_argument("--n", type=int, required=True)
        p_run.add_argument("--p", type=float, required=True)
        p_run.add_argument("--r", type=int, required=True)
        p_run.add_argument("--a", type=int, required=True)
        p_run.add_argument("--mode", choices=["implicit", "explicit"], default="implicit")
        p_run.add_argument("--threshold", type=float, default=0.9)
        p_run.add_argument("--trace-out", type=str, default=None)
        p_run.add_argument("--alpha", type=float, default=None)
        if force_stages:
            p_run.set_defaults(stages=True)
        else:
            p_run.add_argument("--stages", action="store_true")
        _add_common(p_run)
        p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="phase-transition curve over seed sizes")
    p_sweep.add_argument("--n", type=int, required=True)
    p_sweep.add_argument("--p", type=float, required=True)
    p_sweep.add_argument("--r", type=int, required=True)
    p_sweep.add_argument("--trials", type=int, required=True)
    p_sweep.add_argument("--a-list", type=str, default=None, help="comma-separated absolute a values")
    p_sweep.add_argument(
        "--alpha-list",
        type=str,
        default=None,
        help="comma-separated offsets c; a = round(ac + c*sqrt(ac))",
    )
    p_sweep.add_argument("--mode", choices=["implicit", "explicit"], default="implicit")
    p_sweep.add_argument("--threshold", type=float, default=0.9)
    _add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_giant = sub.add_parser("giant", help="largest component of G(m, (1+eps)/m) vs rho*m")
    p_giant.add_argument("--m", type=int, required=True)
    p_giant.add_argument("--eps", type=float, required=True)
    _add_common(p_giant)
    p_giant.set_defaults(func=_cmd_giant)

    p_bounds = sub.add_parser("bounds", help="evaluate a closed-form bound")
    p_bounds.add_argument("--chernoff", choices=["lower", "upper"], default=None)
    p_bounds.add_argument("--martingale", action="store_true")
    p_bounds.add_argument("--theorem1", action="store_true")
    p_bounds.add_argument("--theorem2", action="store_true")
    p_bounds.add_argument("--mean", type=float, default=None)
    p_bounds.add_argument("--lam", type=float, default=None)
    p_bounds.add_argument("--max-step", type=float, default=None)
    p_bounds.add_argument("--var-sum", type=float, default=None)
    p_bounds.add_argument("--n", type=int, default=None)
    p_bounds.add_argument("--p", type=float, default=None)
    p_bounds.add_argument("--r", type=int, default=None)
    p_bounds.add_argument("--alpha", type=float, default=None)
    _add_common(p_bounds)
    p_bounds.set_defaults(func=_cmd_bounds)

    return parser


def _apply_config_overlay(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Pre-scan for --config and inject file values as defaults.

    Values from the file apply only where the command line did not set the
    flag, which is exactly argparse default semantics: we re-parse with
    updated defaults.
    """
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config needs a path")
    overlay = _load_config_file(argv[idx + 1])
    extra: list[str] = []
    present = set(argv)
    for key, raw in overlay.items():
        coerce = _CONFIG_COERCE.get(key)
        if coerce is None:
            raise ValueError(f"unknown config key {key!r}")
        flag = "--" + key.replace("_", "-")
        if flag in present:
            continue  # explicit flags win
        coerce(raw)  # validate early so errors name the config file value
        extra.extend([flag, raw])
    return argv + extra


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_overlay(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateRegime, NoConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
