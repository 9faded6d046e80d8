"""Command-line front end.

Subcommands: gen, solve, oracle, sweep, compare, concentration, reduce-x3c,
reduce-partition, replay.  Configs are flat key = value files (repeat a key to
span a grid); --jobs defaults to the BLOCKRELAX_JOBS environment variable.
Exit code is nonzero only for hard failures (bad input, violated exact
identities), never for statistical flags.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import concentration as conc
from .generate import GenConfig, build_instance, substream
from .model import Selector
from .oracle import enumerate_selectors
from .reductions import (
    PartitionInstance,
    X3CInstance,
    decide_partition_via_lp,
    decide_x3c_via_l0,
    partition_to_lp,
    x3c_to_l0,
)
from .solver import SolveOptions, certificate_for_instance, recovery_check, solve_instance
from .storage import load_instance, save_instance, save_reduction
from .sweep import (
    build_comparison_plan,
    build_sweep_plan,
    parse_config,
    replay_trial,
    run_comparison,
    run_sweep,
    write_comparison_csv,
    write_sweep_csv,
)

__all__ = ["main"]


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("BLOCKRELAX_JOBS", "1")))
    except ValueError:
        return 1


def _load_config(path: str | None) -> dict[str, list[str]]:
    if path is None:
        return {}
    with open(path) as fh:
        return parse_config(fh.read())


def _gen_config_from_flat(cfg: dict[str, list[str]], seed: int | None) -> GenConfig:
    def one(key, default=None):
        vals = cfg.get(key)
        if not vals:
            if default is None:
                raise SystemExit(f"config key {key!r} is required")
            return default
        if len(vals) > 1:
            raise SystemExit(f"key {key!r} must be single-valued here")
        return vals[0]

    m = int(one("m"))
    n = int(one("n", str(m)))
    s = int(one("s", "4"))
    gd = one("guess_density", "0.25")
    return GenConfig(
        m=m,
        n=n,
        theta=int(one("theta", "2")),
        r=int(one("r", "4")),
        s=s,
        sensing_kind=one("sensing_kind", "orthonormal-blocks"),
        planted_alphabet=tuple(float(t) for t in one("alphabet", "-1,-0.5,0.5,1").split(",")),
        guess_density=s / n if gd == "s/n" else float(gd),
        support_mode=one("support_mode", "equidistributed"),
        guess_law=one("guess_law", "ternary"),
        master_seed=seed if seed is not None else int(one("seed", "0")),
    )


def _cmd_gen(args) -> int:
    cfg = _gen_config_from_flat(_load_config(args.config), args.seed)
    instance = build_instance(cfg)
    save_instance(instance, args.out)
    print(f"wrote instance: m={cfg.m} n={cfg.n} theta={cfg.theta} r={cfg.r} s={cfg.s} "
          f"seed={cfg.master_seed} -> {args.out}")
    return 0


def _cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    opts = SolveOptions(tol_feas=args.tol_feas, tol_opt=args.tol_opt, max_iter=args.max_iter)
    result = solve_instance(instance, args.p, opts)
    cert = certificate_for_instance(instance, args.p)
    verdict = recovery_check(instance, result)
    print(f"status: {result.status}")
    print(f"objective: {result.objective:.12g}")
    print(f"iterations: {result.iterations}")
    print(f"feasibility residual: {result.feas_residual:.3e}")
    print(f"duality gap: {result.duality_gap:.3e}")
    print(f"detected support (1-based): {[i + 1 for i in result.detected_support]}")
    print(f"certificate holds: {cert.holds} (margin {cert.margin:.6g}, injective {cert.injective})")
    print(f"recovery: {verdict}")
    return 0


def _cmd_oracle(args) -> int:
    instance = load_instance(args.instance)
    res = enumerate_selectors(instance, args.p, args.tol_feas)
    print(f"evaluated: {res.evaluated_count}  feasible: {res.feasible_count}")
    print(f"best objective: {res.best_objective:.12g}")
    print(f"best combos (1-based): {[tuple(k + 1 for k in combo) for combo in res.best_combos]}")
    print(f"unique: {res.unique}")
    return 0


def _cmd_sweep(args) -> int:
    plan = build_sweep_plan(_load_config(args.config), seed=args.seed, trials=args.trials)
    results = run_sweep(plan, jobs=args.jobs)
    write_sweep_csv(results, args.out)
    errors = sum(r.n_error for r in results)
    print(f"wrote {len(results)} cells to {args.out} ({errors} trial errors)")
    return 0


def _cmd_compare(args) -> int:
    cells = build_comparison_plan(_load_config(args.config), seed=args.seed, trials=args.trials)
    results = run_comparison(cells, jobs=args.jobs)
    write_comparison_csv(results, args.out)
    for res in results:
        drift = abs(res.rate_relax - res.formula_exact)
        print(
            f"cell {res.cell.index}: theta={res.cell.gen.theta} r={res.cell.gen.r} "
            f"p_l={res.p_l:.4g} relax={res.rate_relax:.4f} bestof={res.rate_bestof:.4f} "
            f"formula={res.formula_exact:.4f} |relax-formula|={drift:.4f}"
        )
    print(f"wrote {len(results)} cells to {args.out}")
    return 0


def _cmd_replay(args) -> int:
    plan = build_sweep_plan(_load_config(args.config), seed=args.seed)
    if not 0 <= args.cell < len(plan.cells):
        raise SystemExit(f"cell {args.cell} out of range (plan has {len(plan.cells)})")
    instance, result, cert, verdict = replay_trial(plan, args.cell, args.trial)
    cfg = instance.meta["config"]
    print(f"cell {args.cell} trial {args.trial}: seed={cfg.master_seed}")
    print(f"m={cfg.m} n={cfg.n} theta={cfg.theta} r={cfg.r} s={cfg.s} nu={cfg.nu:.6g}")
    print(f"support (1-based): {[i + 1 for i in instance.support.indices]}")
    print(f"planted cols (1-based): {[k + 1 for k in instance.X.planted_cols]}")
    print(f"status: {result.status}  objective: {result.objective:.12g}")
    print(f"certificate holds: {cert.holds} (margin {cert.margin:.6g})")
    print(f"recovery: {verdict}")
    if args.out:
        save_instance(instance, args.out)
        print(f"instance written to {args.out}")
    return 0


def _cmd_concentration(args) -> int:
    flat = _load_config(args.config)

    def one(key, default):
        vals = flat.get(key, [default])
        return vals[0]

    seed = args.seed if args.seed is not None else int(one("seed", "0"))
    trials = args.trials if args.trials is not None else int(one("trials", "2000"))
    check = one("check", "tail")
    rows: list[list] = []
    failures = 0

    if check == "vectorization":
        rng = substream(seed, "cli-vec")
        count = int(one("count", "100"))
        for i in range(count):
            a, b, cdim = (int(v) for v in rng.integers(1, 9, size=3))
            M = rng.standard_normal((a, b))
            R = rng.standard_normal((b, cdim))
            w = rng.standard_normal(cdim)
            dev = conc.vectorization_check(M, R, w)
            scale = 1.0 + np.linalg.norm(M) * np.linalg.norm(R) * np.linalg.norm(w)
            ok = dev <= 1e-12 * scale
            failures += 0 if ok else 1
            rows.append(["vectorization", i, format(dev, ".6g"), format(1e-12 * scale, ".6g"), int(ok)])
        header = ["check", "index", "deviation", "limit", "ok"]
    else:
        gen = _gen_config_from_flat(flat, seed)
        study = conc.ConcentrationStudy.from_config(gen)
        planted = Selector.discrete(study.planted_cols, gen.r, gen.theta)
        if check == "tail":
            epsilons = [float(v) for v in flat.get("epsilon", ["0.5"])]
            for eps in epsilons:
                est = conc.empirical_concentration_tail(study, planted, eps, trials, seed)
                rows.append(
                    ["tail", format(eps, ".6g"), est.trials, est.exceed_count,
                     format(est.frequency, ".6g"), format(est.bound, ".6g")]
                )
            header = ["check", "epsilon", "trials", "exceed", "frequency", "bound"]
        elif check == "mean":
            mom = conc.empirical_image_moments(study, planted, trials, seed)
            rows.append(
                ["mean", format(mom.mean, ".10g"), format(mom.analytic_sq, ".10g"),
                 format(mom.std_error, ".4g"), format(mom.z_score, ".4g")]
            )
            header = ["check", "mc_mean", "analytic", "std_error", "z_score"]
            if abs(mom.z_score) > 4.0:
                failures += 1
        elif check == "window":
            deltas = [float(v) for v in flat.get("delta", ["0.5"])]
            for d in deltas:
                est = conc.singular_window_check(study, d, trials, seed)
                rows.append(
                    ["window", format(d, ".6g"), est.trials, est.inside_count,
                     format(est.frequency, ".6g"), format(est.bound_floor, ".6g")]
                )
            header = ["check", "delta", "trials", "inside", "frequency", "bound_floor"]
        else:
            raise SystemExit(f"unknown concentration check {check!r}")

    import csv as _csv

    out = args.out or "-"
    if out == "-":
        writer = _csv.writer(sys.stdout, lineterminator="\n")
        print("# schema=1")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        with open(out, "w", newline="") as fh:
            fh.write("# schema=1\n")
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {len(rows)} rows to {out}")
    return 1 if failures else 0


def _cmd_reduce_x3c(args) -> int:
    triples = []
    for part in args.triples.split(";"):
        triples.append(tuple(int(v) - 1 for v in part.split(",")))
    inst = X3CInstance(m=args.m, triples=tuple(triples))
    record = x3c_to_l0(inst, n=args.n, seed=args.seed or 0)
    decision = None
    if inst.m // 3 <= 12:
        decision = decide_x3c_via_l0(inst, n=args.n, seed=args.seed or 0)
        record = type(record)(
            reduction=record.reduction,
            A=record.A,
            y=record.y,
            certificate_target=record.certificate_target,
            extra={**record.extra, "oracle_value": inst.m // 3 if decision else "above-target",
                   "decision": str(decision).lower()},
        )
    save_reduction(record, args.out)
    print(f"wrote reduction (target {record.certificate_target:g}) to {args.out}")
    if decision is not None:
        print(f"decision: {'cover exists' if decision else 'no exact cover'}")
    return 0


def _cmd_reduce_partition(args) -> int:
    weights = tuple(float(v) for v in args.a.split(","))
    inst = PartitionInstance(a=weights)
    record = partition_to_lp(inst, theta=args.theta)
    decision = None
    if 5 ** (2 * inst.m) <= 10**7:
        decision = decide_partition_via_lp(inst, p=args.p, theta=args.theta)
        record = type(record)(
            reduction=record.reduction,
            A=record.A,
            y=record.y,
            certificate_target=record.certificate_target,
            extra={**record.extra, "oracle_value": inst.m if decision else "above-target",
                   "decision": str(decision).lower()},
        )
    save_reduction(record, args.out)
    print(f"wrote reduction (target {record.certificate_target:g}) to {args.out}")
    if decision is not None:
        print(f"decision: {'partition exists' if decision else 'no partition'}")
    else:
        print("decision: skipped (grid oracle guard, too many weights)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="blockrelax", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, config=True, seed=True, out=True, jobs=False, trials=False):
        if config:
            sp.add_argument("--config", help="flat key = value config file")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="master seed override")
        if out:
            sp.add_argument("--out", required=False, help="output path")
        if jobs:
            sp.add_argument("--jobs", type=int, default=_default_jobs(),
                            help="worker processes (default: BLOCKRELAX_JOBS or 1)")
        if trials:
            sp.add_argument("--trials", type=int, default=None, help="trials override")

    sp = sub.add_parser("gen", help="generate one instance container")
    add_common(sp)
    sp.set_defaults(func=_cmd_gen)

    sp = sub.add_parser("solve", help="solve an instance container")
    sp.add_argument("instance")
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--tol-feas", type=float, default=1e-8)
    sp.add_argument("--tol-opt", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=int, default=20000)
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("oracle", help="exhaustive selector enumeration of an instance")
    sp.add_argument("instance")
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--tol-feas", type=float, default=1e-8)
    sp.set_defaults(func=_cmd_oracle)

    sp = sub.add_parser("sweep", help="grid sweep: solve + certificate rates per cell")
    add_common(sp, jobs=True, trials=True)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("compare", help="relaxation vs repeated guessing, with formulas")
    add_common(sp, jobs=True, trials=True)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("concentration", help="Monte Carlo concentration checks")
    add_common(sp, trials=True)
    sp.set_defaults(func=_cmd_concentration)

    sp = sub.add_parser("reduce-x3c", help="exact cover -> sparsest solution reduction")
    sp.add_argument("--m", type=int, required=True, help="ground set size (multiple of 3)")
    sp.add_argument("--triples", required=True, help="e.g. '1,2,3;4,5,6' (1-based)")
    sp.add_argument("--n", type=int, default=2, help="columns per block")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_reduce_x3c)

    sp = sub.add_parser("reduce-partition", help="number partition -> power objective reduction")
    sp.add_argument("--a", required=True, help="comma-separated positive weights")
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--theta", type=int, default=2)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_reduce_partition)

    sp = sub.add_parser("replay", help="re-run one sweep trial from its coordinates")
    add_common(sp, out=True)
    sp.add_argument("--cell", type=int, required=True)
    sp.add_argument("--trial", type=int, required=True)
    sp.set_defaults(func=_cmd_replay)

    args = parser.parse_args(argv)
    for req in ("gen", "sweep", "compare"):
        if args.command == req and getattr(args, "out", None) is None:
            parser.error(f"--out is required for {req}")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
