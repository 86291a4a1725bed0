"""Command line harness: generate / solve / batch / stats.

Exit codes: 0 success, 2 invalid input, 3 infeasible or construction
failure, 4 I/O error.  Worker concurrency for batches is capped by the
MFL_THREADS environment variable (default 1).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, stats
from .errors import (ConstructionFailed, IncompleteMatrix, InvalidInstance,
                     InvalidParams, LengthMismatch, MflError, UnsupportedLevelCount)
from .generator import GeneratorParams, generate, max_local_for
from .model import Instance, canonical_json, check_feasible
from .vnd import VARIANTS, VndConfig, solve_all

_DENSITY_CHOICES = ("low", "medium", "high")
_FIXED_CHOICES = ("small", "medium", "large")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfl",
        description="Multi-level facility location: instance generation, "
                    "VND solvers and rank statistics.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", aliases=["gen"],
                         help="generate a random instance file")
    gen.add_argument("--levels", type=int, choices=(4, 5), default=4)
    gen.add_argument("--R", type=int, default=2000)
    gen.add_argument("--D", type=int, default=150)
    gen.add_argument("--W", type=int, default=50)
    gen.add_argument("--P", type=int, default=None)
    gen.add_argument("--S", type=int, default=100)
    gen.add_argument("--density", choices=_DENSITY_CHOICES, default="high")
    gen.add_argument("--fixed", choices=_FIXED_CHOICES, default="large")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=None, help="output path (default: derived name)")
    gen.set_defaults(func=cmd_generate)

    sol = sub.add_parser("solve", help="solve an instance file")
    sol.add_argument("instance", help="instance JSON produced by generate")
    sol.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    sol.add_argument("--seed", type=int, default=0)
    sol.add_argument("--max-local", type=int, default=None,
                     help="multi-start count (default: by density class)")
    sol.add_argument("--time-limit", type=float, default=None)
    sol.add_argument("--out", default=".", help="output directory")
    sol.set_defaults(func=cmd_solve)

    bat = sub.add_parser("batch", help="run an experiment spec to a results CSV")
    bat.add_argument("spec", help="experiment spec JSON")
    bat.add_argument("--seed", type=int, default=None, help="override master seed")
    bat.add_argument("--time-limit", type=float, default=None)
    bat.add_argument("--max-local", type=int, default=None)
    bat.add_argument("--out", default="results.csv")
    bat.add_argument("--progress", action="store_true")
    bat.set_defaults(func=cmd_batch)

    st = sub.add_parser("stats", help="rank statistics over a results CSV")
    st.add_argument("results", help="results CSV from batch (or plain matrix CSV)")
    st.add_argument("--measure", choices=("ofv", "time"), default="ofv")
    st.add_argument("--out", default=None,
                    help="output prefix (default: alongside the CSV)")
    st.set_defaults(func=cmd_stats)
    return parser


def cmd_generate(args) -> int:
    params = GeneratorParams(
        num_levels=args.levels, R=args.R, D=args.D, W=args.W, P=args.P,
        S=args.S, density_class=args.density, fixed_class=args.fixed,
        seed=args.seed)
    instance = generate(params)
    out = args.out
    if out is None:
        out = f"{args.levels}l-{experiments.problem_id(params, 1)}-s{args.seed}.json"
    instance.save(out)
    dens = {"DR": instance.cost_dr, "WD": instance.cost_wd, "PW": instance.cost_pw}
    if instance.num_levels == 5:
        dens["SP"] = instance.cost_sp
    realized = "  ".join(f"{k}={float((m > 0).mean()):.3f}" for k, m in dens.items())
    sizes = f"R={instance.R} D={instance.D} W={instance.W} P={instance.P}"
    if instance.num_levels == 5:
        sizes += f" S={instance.S}"
    bounds = " ".join(f"ub_{c}={instance.ub[c]}" for c in instance.chain)
    print(f"wrote {out}")
    print(f"  {sizes}")
    print(f"  realized densities: {realized}")
    print(f"  bounds: {bounds}  max_local default: {max_local_for(args.density)}")
    return 0


def cmd_solve(args) -> int:
    instance = Instance.load(args.instance)
    variants = VARIANTS if args.variant == "all" else (args.variant,)
    config = VndConfig(
        master_seed=args.seed,
        max_local=args.max_local,
        time_limit=args.time_limit,
    )
    results = solve_all(instance, config, variants)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.instance).stem
    for variant, (solution, trace) in results.items():
        bad = check_feasible(instance, solution)
        if bad:
            raise ConstructionFailed(f"result failed feasibility: {bad[0].message}")
        base = out_dir / f"{stem}.{variant}"
        result = {
            "instance": str(args.instance),
            "variant": variant,
            "seed": int(args.seed),
            "objective": solution.objective,
            "time_to_best": trace.time_to_best,
            "work_seconds_to_best": trace.work_seconds_to_best,
            "work_total": trace.work_total,
            "truncated": trace.truncated,
        }
        with open(f"{base}.result.json", "wb") as fh:
            fh.write(canonical_json(result))
        with open(f"{base}.solution.json", "wb") as fh:
            fh.write(solution.to_json_bytes())
        trace.save_csv(f"{base}.trace.csv")
        print(f"{variant}: objective={solution.objective:g} "
              f"time_to_best={trace.time_to_best:.2f}s "
              f"(work {trace.work_seconds_to_best:.3f})")
    return 0


def cmd_batch(args) -> int:
    spec = experiments.ExperimentSpec.load(args.spec)
    if args.seed is not None:
        spec.master_seed = args.seed
    if args.time_limit is not None:
        spec.time_limit = args.time_limit
    if args.max_local is not None:
        spec.max_local = args.max_local
    rows = experiments.run_batch(spec, progress=args.progress)
    experiments.write_results_csv(rows, spec.variants, args.out)
    failures = [r for r in rows if r.error]
    print(f"wrote {args.out}: {len(rows)} rows, {len(failures)} failed")
    for r in failures:
        print(f"  FAILED {r.problem_id}: {r.error}", file=sys.stderr)
    return 3 if failures else 0


def cmd_stats(args) -> int:
    matrix = stats.load_result_matrix(args.results, measure=args.measure)
    report = stats.analyze(matrix, measure=args.measure)
    prefix = args.out
    if prefix is None:
        prefix = str(Path(args.results).with_suffix("")) + f".stats.{args.measure}"
    with open(f"{prefix}.json", "wb") as fh:
        fh.write(canonical_json(report.to_json_dict()))
    text = report.format_text()
    with open(f"{prefix}.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    print(f"wrote {prefix}.json and {prefix}.txt")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParams, InvalidInstance, IncompleteMatrix, LengthMismatch,
            UnsupportedLevelCount, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConstructionFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except MflError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
