"""Command-line interface: run experiments, inspect oracles and bounds."""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import environment as env
from . import harness, metrics, oracle
from .engine import backend_name, has_compiled_backend, simulate_policy_with


def _load_config(args):
    if getattr(args, "config", None):
        cfg = harness.ExperimentConfig.from_json_file(args.config)
    elif getattr(args, "preset", None):
        cfg = harness.preset(args.preset)
    else:
        raise SystemExit("provide --config FILE or --preset NAME")
    if getattr(args, "runs", None) is not None:
        cfg.runs = args.runs
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.outputs = args.out
    if getattr(args, "trace_offset", None) is not None:
        if cfg.channel.get("kind") != "trace":
            raise SystemExit("--trace-offset only applies to trace channels")
        cfg.channel["offset"] = args.trace_offset
    return cfg


def _cmd_run(args):
    cfg = _load_config(args)
    res = harness.run_experiment(cfg, workers=args.workers)
    print(f"backend: {backend_name()}")
    print(f"wrote CSVs to {res.output_dir}")
    return 0


def _cmd_oracle(args):
    cfg = _load_config(args)
    cfg.validate()
    channel = cfg.build_channel()
    actions = cfg.build_actions()
    _, reports = harness.oracle_rates_for(cfg, channel)
    print("segment_start,segment_end,feasible,objective_rate,gamma_max")
    for seg in reports:
        rep = seg.report
        obj = f"{rep.objective_rate:.9g}" if rep.feasible else "nan"
        print(f"{seg.start},{seg.end},{int(rep.feasible)},{obj},{rep.gamma_max:.9g}")
        rates = env.mean_rates(channel, (seg.start, seg.end))
        if rep.sigma_star is not None:
            probs = ",".join(f"{p:.9g}" for p in rep.sigma_star.probs)
            print(f"  sigma_star: {probs}")
            srv = oracle.service_rates(rep.sigma_star, rates, actions)
            print("  service_rates: " + ",".join(f"{s:.9g}" for s in srv))
        probs = ",".join(f"{p:.9g}" for p in rep.sigma_gamma.probs)
        print(f"  sigma_gamma: {probs}")
    return 0


def _cmd_bounds(args):
    cfg = _load_config(args)
    cfg.validate()
    channel = cfg.build_channel()
    actions = cfg.build_actions()
    _, reports = harness.oracle_rates_for(cfg, channel)
    seg = reports[0]
    if not seg.report.feasible or seg.report.gamma_max <= 0:
        print("instance infeasible or without positive slack; no bounds")
        return 1
    rates = env.mean_rates(channel, (seg.start, seg.end))
    inputs = metrics.BoundInputs(
        chi=cfg.chi,
        rates=tuple(rates),
        eta=cfg.eta,
        eps=cfg.eps,
        gamma=seg.report.gamma_max,
        i_max=actions.i_max,
        horizon=cfg.T,
    )
    print(f"gamma_max: {inputs.gamma:.9g}")
    print(f"slater_ok (eps <= gamma/2): {inputs.slater_ok}")
    print(f"age_norm_bound: {metrics.age_norm_bound(inputs):.9g}")
    print(f"zero_violation_window: {metrics.zero_violation_window(inputs):.9g}")
    print(f"regret_bound: {metrics.regret_bound(inputs):.9g}")
    if args.mean_hol_age:
        ages = [float(x) for x in args.mean_hol_age.split(",")]
        if len(ages) != cfg.K:
            raise SystemExit("--mean-hol-age needs one value per arm")
        age_window = metrics.measured_age_window(np.asarray(cfg.chi), cfg.eps, ages)
        for k in range(cfg.K):
            print(f"measured_age_window_arm{k + 1}: {age_window[k]:.9g}")
    return 0


def _cmd_validate_trace(args):
    thresholds = None
    if args.thresholds:
        thresholds = [float(x) for x in args.thresholds.split(",")]
    model = harness.load_trace(args.file, args.schema, thresholds=thresholds)
    means = model.matrix.mean(axis=0)
    print(f"rows: {model.n_rows}")
    print(f"channels: {model.n_arms}")
    print("column_means: " + ",".join(f"{m:.9g}" for m in means))
    return 0


def _cmd_bench(args):
    cfg = _load_config(args)
    if args.t is not None:
        # piecewise segments beyond the shortened horizon are simply unused
        cfg.T = args.t
        cfg.log_stride = harness.default_log_stride(cfg.T)
    cfg.validate()
    channel = cfg.build_channel()
    actions = cfg.build_actions()
    policy = cfg.policy_kinds()[0]
    X, B = harness.sample_paths(cfg, channel, 0)
    backends = ["python"] + (["compiled"] if has_compiled_backend() else [])
    outputs, timings = {}, {}
    for backend in backends:
        reps = max(1, args.reps)
        best = float("inf")
        for _ in range(reps):
            t0 = time.perf_counter()
            out = simulate_policy_with(
                backend, X, B, actions.incidence, policy.code, policy.eta, policy.alpha
            )
            best = min(best, time.perf_counter() - t0)
        outputs[backend] = out
        timings[backend] = best
        rate = cfg.T / best
        print(f"{backend:>9}: {best * 1e3:9.2f} ms for T={cfg.T}  ({rate:,.0f} slots/s)")
    if len(backends) == 2:
        same = all(
            np.array_equal(outputs["python"][key], outputs["compiled"][key])
            for key in outputs["python"]
        )
        print(f"outputs identical: {same}")
        print(f"speedup: {timings['python'] / timings['compiled']:.1f}x")
        if not same:
            return 1
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="agesched",
        description="Age-based constrained bandit scheduling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--preset", choices=["iid6", "abrupt2", "trace3"])

    p_run = sub.add_parser("run", help="execute an experiment and write CSVs")
    add_config_args(p_run)
    p_run.add_argument("--runs", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument(
        "--trace-offset", type=int,
        help="start index into a trace channel, with wraparound",
    )
    p_run.set_defaults(func=_cmd_run)

    p_oracle = sub.add_parser("oracle", help="print the static-policy oracle report")
    add_config_args(p_oracle)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_bounds = sub.add_parser("bounds", help="print analytic bound values")
    add_config_args(p_bounds)
    p_bounds.add_argument(
        "--mean-hol-age", help="comma-separated measured mean ages for the window bound"
    )
    p_bounds.set_defaults(func=_cmd_bounds)

    p_vt = sub.add_parser("validate-trace", help="parse and summarize a trace file")
    p_vt.add_argument("--file", required=True)
    p_vt.add_argument("--schema", choices=["binary", "snr"], required=True)
    p_vt.add_argument("--thresholds", help="comma-separated dB thresholds (snr schema)")
    p_vt.set_defaults(func=_cmd_validate_trace)

    p_bench = sub.add_parser("bench", help="compare the compiled and Python backends")
    add_config_args(p_bench)
    p_bench.add_argument("--t", type=int, help="override the horizon")
    p_bench.add_argument("--reps", type=int, default=3)
    p_bench.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
