"""Command-line harness.

Subcommands: simulate, generate, optimum, verify, sweep.  Exit codes:
0 all checks pass, 1 checker violation, 2 input error, 3 resource
budget exceeded.  All randomness flows from explicit seeds.
"""
from __future__ import annotations

import argparse
import json
import sys

from kmobile import checks
from kmobile.adversary import (
    CONSTRUCTIONS,
    gen_local_walk,
    gen_simple_counterexample,
    gen_thm3,
    gen_thm4,
)
from kmobile.core import (
    CheckFailure,
    ContractViolationError,
    InputError,
    KMobileError,
    ProblemParams,
    ResourceBudgetError,
    certificate_cost,
    read_trace,
    write_trace,
)
from kmobile.experiment import (
    ExperimentSpec,
    emit_ratio_table,
    fmt,
    parse_spec_file,
    run_experiment,
)
from kmobile.kserver import SIM_TAGS
from kmobile.mobile import ALGO_TAGS, RunResult, run as run_mobile
from kmobile.offline import GridSpec, audit_helper, compute_helper, dp_optimum

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


def _dump_json(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _override_params(params: ProblemParams, args) -> ProblemParams:
    fields = {"k": params.k, "ms": params.ms, "mc": params.mc,
              "delta": params.delta, "D": params.D, "dim": params.dim}
    for name in ("ms", "mc", "delta", "D"):
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    if getattr(args, "k", None) is not None and args.k != params.k:
        raise InputError(f"--k {args.k} conflicts with the trace header (k={params.k}); "
                         "regenerate the trace instead")
    return ProblemParams(**fields)


def _steps_csv(result: RunResult) -> str:
    from kmobile.checks import default_y, potential_factors

    if result.mode == "fast" and result.algo in ("ums", "wms"):
        psi_f, _ = potential_factors(result)
    else:
        p = result.params
        psi_f = default_y(p) * p.mc / (p.delta * p.ms) if p.delta > 0 else 0.0
        if result.weighted:
            psi_f *= p.D
    lines = ["t,serving,movement,psi\n"]
    for rep in result.reports:
        lines.append(",".join([str(rep.t), fmt(rep.serving), fmt(rep.movement),
                               fmt(psi_f * rep.matched_sum)]) + "\n")
    return "".join(lines)


def cmd_simulate(args) -> int:
    trace, params = read_trace(args.trace)
    params = _override_params(params, args)
    result = run_mobile(trace, params, algo=args.algo, sim=args.sim,
                        project=args.project)
    record = result.to_dict()
    record["trace_path"] = args.trace
    record["seed"] = args.seed
    speed = checks.audit_speed_caps(result)
    record["speed_audit"] = {
        "ok": speed.ok,
        "max_displacement": speed.max_displacement,
        "cap": speed.cap,
    }
    if args.out:
        _dump_json(record, args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(_steps_csv(result))
    summary = {
        "mode": result.mode,
        "epsilon": result.epsilon,
        "grand_total": result.ledger.grand_total,
        "serving_total": result.ledger.serving_total,
        "movement_total": result.ledger.movement_total,
        "speed_ok": speed.ok,
    }
    _dump_json(summary)
    return EXIT_OK if speed.ok else EXIT_VIOLATION


def cmd_generate(args) -> int:
    if args.construction == "thm3":
        inst = gen_thm3(args.k, args.x, D=args.D, ms=args.ms, seed=args.seed,
                        z_choice=args.z_choice, delta=args.delta)
    elif args.construction == "thm4":
        if args.mc is None:
            raise InputError("thm4 needs --mc")
        inst = gen_thm4(args.k, args.x, ms=args.ms, mc=args.mc, D=args.D,
                        seed=args.seed, z_choice=args.z_choice, delta=args.delta)
    elif args.construction == "simple-cx":
        if args.y is None:
            raise InputError("simple-cx needs --y")
        inst = gen_simple_counterexample(args.x, args.y, ms=args.ms)
    elif args.construction == "walk":
        if args.mc is None:
            raise InputError("walk needs --mc")
        params = ProblemParams(k=args.k, ms=args.ms, mc=args.mc, delta=args.delta,
                               D=args.D, dim=args.dim)
        inst = gen_local_walk(args.n, params, args.step_scale, args.seed or 0)
    else:
        raise InputError(f"unknown construction {args.construction!r}")
    write_trace(args.out, inst.trace, inst.params)
    meta = {
        "construction": inst.construction,
        "offline_cost_bound": inst.offline_cost_bound,
        "online_cost_lower_bound": inst.online_cost_lower_bound,
        "choices": inst.choices,
        "n": len(inst.trace),
        "params": {"k": inst.params.k, "ms": inst.params.ms, "mc": inst.params.mc,
                   "delta": inst.params.delta, "D": inst.params.D, "dim": inst.params.dim},
    }
    if inst.trace.certificate is not None:
        meta["certificate_cost"] = certificate_cost(inst.trace, inst.params)
    _dump_json(meta, args.out + ".meta.json")
    _dump_json(meta)
    return EXIT_OK


def cmd_optimum(args) -> int:
    trace, params = read_trace(args.trace)
    grid = GridSpec.from_resolution(trace, args.grid)
    cost, trajectory = dp_optimum(trace, params, grid)
    out = {
        "cost": cost,
        "grid": {"lo": grid.lo, "hi": grid.hi, "points": grid.n},
    }
    if args.with_trajectory:
        out["trajectory"] = [[list(p) for p in conf] for conf in trajectory]
    _dump_json(out, args.out)
    if args.out:
        _dump_json({"cost": cost})
    return EXIT_OK


def _load_run(path: str) -> RunResult:
    with open(path, "r", encoding="utf-8") as fh:
        return RunResult.from_dict(json.load(fh))


def cmd_verify(args) -> int:
    if args.property == "lemma-geo":
        report = checks.check_lemma_geo(args.samples, args.delta_geo, args.seed)
        _dump_json({"samples": report.samples, "violations": report.violations,
                    "min_margin": report.min_margin})
        return EXIT_OK if report.violations == 0 else EXIT_VIOLATION
    if not args.run:
        raise InputError(f"--run is required for property {args.property}")
    result = _load_run(args.run)
    if args.property == "fast-potential":
        rep = checks.check_fast_potential(result)
        _dump_json({"steps": len(rep.margins), "violations": rep.violations,
                    "min_margin": rep.min_margin})
        return EXIT_OK if rep.ok else EXIT_VIOLATION
    if args.property == "projection-bound":
        rep = checks.check_projection_bound(result)
        _dump_json({"max_distance": rep.max_distance, "bound": rep.bound,
                    "ratio": rep.ratio, "ok": rep.ok})
        return EXIT_OK if rep.ok else EXIT_VIOLATION
    if args.property in ("slow-potential", "helper-invariants"):
        if not args.trace:
            raise InputError(f"--trace with a certificate is required for {args.property}")
        trace, params = read_trace(args.trace)
        if trace.certificate is None:
            raise InputError("the trace carries no offline certificate")
        online = [rep.positions for rep in result.reports]
        requests = [rep.request for rep in result.reports]
        if len(online) != len(trace.certificate):
            raise InputError("run length and certificate length differ")
        helper = compute_helper(trace.certificate, online, requests, params,
                                sigma=args.sigma, offline_start=trace.start_config)
        if args.property == "helper-invariants":
            audit = audit_helper(helper, online, requests, params, sigma=args.sigma)
            _dump_json({
                "steps": audit.steps,
                "guard_fired": audit.guard_fired,
                "guard_vacuous": audit.guard_vacuous,
                "speed_violations": audit.speed_violations,
                "guard_speed_violations": audit.guard_speed_violations,
                "containment_violations": audit.containment_violations,
                "distance_bound_violations": audit.distance_bound_violations,
                "max_speed": audit.max_speed,
                "speed_cap": audit.speed_cap,
                "diagnostics": helper.diagnostics,
            })
            return EXIT_OK if audit.ok() else EXIT_VIOLATION
        rep = checks.check_slow_potential(result, helper, trace.start_config,
                                          y=args.Y, sigma=args.sigma)
        negatives = [list(m) for m in rep.margins if m[1] < 0]
        _dump_json({
            "checked_steps": len(rep.margins),
            "vacuous_steps": rep.vacuous,
            "negative_margins": rep.negative,
            "min_margin": min((m for _, m in rep.margins), default=None),
            "boundary_gap": rep.boundary_gap,
            "phi_threshold": rep.phi_threshold,
            "negatives": negatives[:50],
        })
        return EXIT_OK  # diagnostic property
    raise InputError(f"unknown property {args.property!r}")


def cmd_sweep(args) -> int:
    spec = parse_spec_file(args.spec) if args.spec else ExperimentSpec()
    for name in ("algo", "sim", "project"):
        value = getattr(args, name)
        if value is not None:
            setattr(spec, name, value)
    if args.construction is not None:
        spec.construction = args.construction
        spec.trace_path = None
    if args.seeds:
        spec.seeds = [int(s) for s in args.seeds.split(",")]
    records, aggregate = run_experiment(spec)
    if args.out:
        _dump_json(aggregate, args.out)
    if args.ratio_csv:
        with open(args.ratio_csv, "w", encoding="utf-8") as fh:
            fh.write(emit_ratio_table(records))
    _dump_json({"runs": len(records), "all_ok": aggregate["all_ok"]})
    return EXIT_OK if aggregate["all_ok"] else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kmobile",
        description="k-mobile-server simulator, generators, oracle and verifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run an online algorithm over a trace file")
    p_sim.add_argument("--algo", choices=ALGO_TAGS, default="ums")
    p_sim.add_argument("--sim", default="auto", choices=("auto",) + SIM_TAGS)
    p_sim.add_argument("--trace", required=True)
    p_sim.add_argument("--out", help="write the full run record (JSON)")
    p_sim.add_argument("--csv", help="write a per-step CSV (t, serving, movement, psi)")
    p_sim.add_argument("--project", choices=("auto", "on", "off"), default="auto")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--k", type=int)
    p_sim.add_argument("--ms", type=float)
    p_sim.add_argument("--mc", type=float)
    p_sim.add_argument("--delta", type=float)
    p_sim.add_argument("--D", type=float)
    p_sim.set_defaults(func=cmd_simulate)

    p_gen = sub.add_parser("generate", help="emit an adversarial trace plus metadata")
    p_gen.add_argument("--construction", choices=CONSTRUCTIONS, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--x", type=int, default=64)
    p_gen.add_argument("--y", type=int)
    p_gen.add_argument("--k", type=int, default=2)
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--dim", type=int, default=1)
    p_gen.add_argument("--ms", type=float, default=1.0)
    p_gen.add_argument("--mc", type=float)
    p_gen.add_argument("--D", type=float, default=1.0)
    p_gen.add_argument("--delta", type=float, default=0.5)
    p_gen.add_argument("--step-scale", dest="step_scale", type=float, default=1.0)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--z-choice", dest="z_choice", type=int,
                       help="enumerated target index (two-server constructions)")
    p_gen.set_defaults(func=cmd_generate)

    p_opt = sub.add_parser("optimum", help="discretized offline optimum of a trace")
    p_opt.add_argument("--trace", required=True)
    p_opt.add_argument("--grid", type=float, required=True, help="grid resolution h")
    p_opt.add_argument("--out")
    p_opt.add_argument("--with-trajectory", action="store_true")
    p_opt.set_defaults(func=cmd_optimum)

    p_ver = sub.add_parser("verify", help="check a recorded run against its guarantees")
    p_ver.add_argument("--property", required=True,
                       choices=("fast-potential", "slow-potential", "helper-invariants",
                                "lemma-geo", "projection-bound"))
    p_ver.add_argument("--run", help="run record written by simulate --out")
    p_ver.add_argument("--trace", help="trace file (certificate needed for helper checks)")
    p_ver.add_argument("--sigma", type=float, default=1.0)
    p_ver.add_argument("--Y", type=float)
    p_ver.add_argument("--samples", type=int, default=10_000)
    p_ver.add_argument("--delta-geo", dest="delta_geo", type=float, default=0.5)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run an experiment spec's cross product")
    p_sweep.add_argument("--spec", help="flat key=value spec file")
    p_sweep.add_argument("--out", help="aggregate JSON output")
    p_sweep.add_argument("--ratio-csv", dest="ratio_csv")
    p_sweep.add_argument("--algo", choices=ALGO_TAGS)
    p_sweep.add_argument("--sim")
    p_sweep.add_argument("--project", choices=("auto", "on", "off"))
    p_sweep.add_argument("--construction", choices=CONSTRUCTIONS)
    p_sweep.add_argument("--seeds")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceBudgetError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (CheckFailure, ContractViolationError) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except KMobileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
