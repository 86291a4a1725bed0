"""Batch experiment harness: generate instances, solve, collect a results CSV.

Every run in a batch is reproducible from the experiment spec and master
seed alone: the instance seed is derived from (master seed, problem id) and
the solver seed likewise, so rows are independent and the four variants of a
row share their multi-start phase.  The CSV time columns carry the solver's
deterministic work clock (candidate evaluations scaled to pseudo-seconds),
which keeps repeated batches byte-identical; wall-clock timings live in the
per-run traces written by the solve command.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .errors import InvalidParams
from .generator import GeneratorParams, generate
from .model import check_feasible
from .rng import derive_seed
from .vnd import VARIANTS, VndConfig, solve_all

_DENSITY_TOKEN = {"high": "Hdens", "medium": "Mdens", "low": "Ldens"}
_FIXED_TOKEN = {"large": "LgFx", "medium": "MedFx", "small": "SmFx"}
# Published tables spell the density token both "-dens" and "-dend";
# accept either on input.
_DENSITY_FROM_TOKEN = {
    "Hdens": "high", "Mdens": "medium", "Ldens": "low",
    "Hdend": "high", "Mdend": "medium", "Ldend": "low",
}
_FIXED_FROM_TOKEN = {"LgFx": "large", "MedFx": "medium", "SmFx": "small"}


def problem_id(params: GeneratorParams, replicate: int) -> str:
    """Canonical id `R-D-W-P[-S]-<Dens>-<Fx>-<replicate>` (replicates 1-based)."""
    parts = [params.R, params.D, params.W, params.resolved_p()]
    if params.num_levels == 5:
        parts.append(params.S)
    return "-".join(str(p) for p in parts) + (
        f"-{_DENSITY_TOKEN[params.density_class]}"
        f"-{_FIXED_TOKEN[params.fixed_class]}-{replicate}")


def parse_problem_id(pid: str) -> dict:
    """Split a problem id back into sizes, classes and replicate number."""
    parts = pid.split("-")
    if len(parts) not in (7, 8):
        raise InvalidParams(f"malformed problem id {pid!r}")
    *sizes, dens, fx, rep = parts
    try:
        sizes = [int(s) for s in sizes]
        out = {
            "num_levels": 4 + (len(sizes) == 5),
            "R": sizes[0], "D": sizes[1], "W": sizes[2], "P": sizes[3],
            "S": sizes[4] if len(sizes) == 5 else None,
            "density_class": _DENSITY_FROM_TOKEN[dens],
            "fixed_class": _FIXED_FROM_TOKEN[fx],
            "replicate": int(rep),
        }
    except (ValueError, KeyError):
        raise InvalidParams(f"malformed problem id {pid!r}") from None
    return out


@dataclass
class RunSpec:
    params: GeneratorParams
    replicates: int = 1


@dataclass
class ExperimentSpec:
    """A batch: generator cells x replicates, run with the chosen variants."""

    runs: list[RunSpec]
    variants: tuple[str, ...] = VARIANTS
    master_seed: int = 0
    time_limit: float | None = None
    max_local: int | None = None

    def validate(self) -> None:
        if not self.runs:
            raise InvalidParams("experiment spec has no runs")
        if not self.variants:
            raise InvalidParams("experiment spec selects no variants")
        for v in self.variants:
            if v not in VARIANTS:
                raise InvalidParams(f"unknown variant {v!r}")
        for rs in self.runs:
            if rs.replicates < 1:
                raise InvalidParams("replicate count must be >= 1")
            rs.params.validate()

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentSpec":
        runs = [
            RunSpec(params=GeneratorParams.from_json_dict(r["params"]),
                    replicates=int(r.get("replicates", 1)))
            for r in doc.get("runs", [])
        ]
        variants = tuple(doc.get("variants", VARIANTS))
        spec = cls(
            runs=runs,
            variants=variants,
            master_seed=int(doc.get("master_seed", 0)),
            time_limit=doc.get("time_limit"),
            max_local=doc.get("max_local"),
        )
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class ResultRow:
    """One batch row: per-variant objective and deterministic time-to-best."""

    problem_id: str
    ofv: dict[str, float] = field(default_factory=dict)
    time: dict[str, float] = field(default_factory=dict)
    error: str | None = None


def _cells(spec: ExperimentSpec):
    for rs in spec.runs:
        for rep in range(1, rs.replicates + 1):
            yield problem_id(rs.params, rep), rs.params


def _run_cell(args) -> ResultRow:
    spec_doc, pid, params_doc, validate_every_move = args
    spec = ExperimentSpec.from_json_dict(spec_doc)
    params = GeneratorParams.from_json_dict(params_doc)
    try:
        instance = generate(replace(params, seed=derive_seed(spec.master_seed, "instance", pid)))
        config = VndConfig(
            master_seed=derive_seed(spec.master_seed, "solve", pid),
            max_local=spec.max_local,
            time_limit=spec.time_limit,
            validate_every_move=validate_every_move,
        )
        results = solve_all(instance, config, spec.variants)
        row = ResultRow(problem_id=pid)
        for variant, (solution, trace) in results.items():
            bad = check_feasible(instance, solution)
            if bad:
                raise AssertionError(f"{pid}/{variant}: infeasible result: {bad[0].message}")
            row.ofv[variant] = solution.objective
            row.time[variant] = trace.work_seconds_to_best
        return row
    except Exception as exc:  # keep the batch going, mark the row
        return ResultRow(problem_id=pid, error=f"{type(exc).__name__}: {exc}")


def run_batch(spec: ExperimentSpec, threads: int | None = None,
              validate_every_move: bool = False,
              progress: bool = False) -> list[ResultRow]:
    """Run every cell of the spec; rows come back sorted by problem id."""
    spec.validate()
    if threads is None:
        threads = int(os.environ.get("MFL_THREADS", "1") or "1")
    spec_doc = {
        "runs": [{"params": rs.params.to_json_dict(), "replicates": rs.replicates}
                 for rs in spec.runs],
        "variants": list(spec.variants),
        "master_seed": spec.master_seed,
        "time_limit": spec.time_limit,
        "max_local": spec.max_local,
    }
    tasks = [(spec_doc, pid, params.to_json_dict(), validate_every_move)
             for pid, params in _cells(spec)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell, tasks))
    else:
        rows = []
        for task in tasks:
            rows.append(_run_cell(task))
            if progress:
                r = rows[-1]
                state = r.error or "ok"
                print(f"[batch] {r.problem_id}: {state}", file=sys.stderr)
    rows.sort(key=lambda r: r.problem_id)
    return rows


def _fmt(v: float) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


def write_results_csv(rows: list[ResultRow], variants, path) -> None:
    """Write the batch CSV: problem_id, ofv per variant, time per variant."""
    header = ["problem_id"]
    header += [f"ofv_{v}" for v in variants]
    header += [f"time_{v}" for v in variants]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if row.error is not None:
                cells = [row.problem_id] + ["NA"] * (2 * len(variants))
            else:
                cells = [row.problem_id]
                cells += [_fmt(row.ofv[v]) for v in variants]
                cells += [f"{row.time[v]:.6f}" for v in variants]
            fh.write(",".join(cells) + "\n")
