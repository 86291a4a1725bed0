"""Descent procedures: k-flip local search, multi-start, and the four
variable neighborhood descent variants (BVND, PVND, CVND, UVND).

Every variant starts from the best solution of a multi-start 1-flip phase
and then differs only in where the search resumes after an improvement:

* BVND restarts the exhaustive 1-flip search after any improvement found in
  a larger structure.
* PVND explores each structure exhaustively before moving to the next.
* CVND advances to the next structure after each detected improvement,
  cycling k = 1..max-k in fixed order.
* UVND treats all structures as one pool scanned in random order, moving to
  the next structure after each improvement.

All variants apply only strictly improving admissible moves, so the
objective decreases monotonically, every intermediate solution is feasible,
and termination is guaranteed on integral data.  A run is a pure function of
(instance, config): multi-start streams are derived from the master seed and
start index only, so the starting solution is shared by all variants run
with the same seed, and results do not depend on worker scheduling.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConstructionFailed, InvalidParams
from .generator import MAX_LOCAL
from .model import Instance, Solution, check_feasible, evaluate_full, rebuild_counters
from .neighborhoods import any_improving, fresh_sequences, scan_retailer, types_for
from .rng import stream

VARIANTS = ("bvnd", "pvnd", "cvnd", "uvnd")

_WORK_UNITS_PER_SECOND = 1e7  # scale for the deterministic work clock


@dataclass
class VndConfig:
    """Solver configuration; max_local defaults from the instance's density class."""

    variant: str = "bvnd"
    max_local: int | None = None
    master_seed: int = 0
    time_limit: float | None = None
    record_trace: bool = True
    vary_start_by_variant: bool = False
    validate_every_move: bool = False

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise InvalidParams(f"unknown variant {self.variant!r}")
        if self.max_local is not None and self.max_local < 1:
            raise InvalidParams("max_local must be >= 1")
        if self.time_limit is not None and self.time_limit <= 0:
            raise InvalidParams("time_limit must be positive")


@dataclass
class SearchTrace:
    """Incumbent history of one run plus timing and work counters.

    `entries` holds (elapsed wall seconds, objective) at each incumbent
    improvement (strictly decreasing objectives).  `work_*` counters are the
    deterministic number of candidate evaluations; `work_seconds_*` scale
    them to a wall-clock-independent pseudo-time used in batch outputs.
    """

    entries: list[tuple[float, float]] = field(default_factory=list)
    time_to_best: float = 0.0
    final_objective: float = float("nan")
    truncated: bool = False
    work_total: int = 0
    work_to_best: int = 0

    @property
    def work_seconds_to_best(self) -> float:
        return self.work_to_best / _WORK_UNITS_PER_SECOND

    @property
    def work_seconds_total(self) -> float:
        return self.work_total / _WORK_UNITS_PER_SECOND

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("elapsed_s,objective\n")
            for el, obj in self.entries:
                fh.write(f"{el:.6f},{obj!r}\n")


class _TimeUp(Exception):
    pass


class _Context:
    """Run-scoped bookkeeping: trace, work counter, deadline, debug checks."""

    def __init__(self, instance: Instance, config: VndConfig, t0: float):
        self.instance = instance
        self.config = config
        self.t0 = t0
        self.deadline = t0 + config.time_limit if config.time_limit else None
        self.entries: list[tuple[float, float]] = []
        self.best = float("inf")
        self.time_to_best = 0.0
        self.work = 0
        self.work_to_best = 0

    def fork(self) -> "_Context":
        ctx = _Context(self.instance, self.config, self.t0)
        ctx.entries = list(self.entries)
        ctx.best = self.best
        ctx.time_to_best = self.time_to_best
        ctx.work = self.work
        ctx.work_to_best = self.work_to_best
        return ctx

    def tick(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _TimeUp

    def note(self, objective: float) -> None:
        if objective < self.best:
            self.best = objective
            self.time_to_best = time.monotonic() - self.t0
            self.work_to_best = self.work
            if self.config.record_trace:
                self.entries.append((self.time_to_best, objective))

    def on_move(self, solution: Solution) -> None:
        if self.config.validate_every_move:
            bad = check_feasible(self.instance, solution)
            if bad:
                raise AssertionError(f"infeasible state after move: {bad[0].message}")
            full = evaluate_full(self.instance, solution.paths)
            if abs(solution.objective - full) > 1e-9 * max(1.0, abs(full)):
                raise AssertionError(
                    f"cached objective {solution.objective} drifted from {full}")
        self.note(solution.objective)

    def finish(self, solution: Solution, truncated: bool) -> SearchTrace:
        entries = self.entries
        if not entries:
            entries = [(self.time_to_best, solution.objective)]
        return SearchTrace(
            entries=entries,
            time_to_best=self.time_to_best,
            final_objective=solution.objective,
            truncated=truncated,
            work_total=self.work,
            work_to_best=self.work_to_best,
        )


# -- initial construction -----------------------------------------------------


def construct_initial(instance: Instance, rng) -> Solution:
    """Greedy randomized construction.

    Retailers are processed in a random order; each takes the path minimizing
    marginal cost (arc costs plus fixed costs of facilities not yet open)
    subject to the open bounds, found by a shortest-path sweep over tiers.
    If some retailer ends up with no admissible path the whole construction
    restarts with a new order, up to 50 attempts.
    """
    inf = np.inf
    cdr = np.where(instance.cost_dr > 0, instance.cost_dr, inf)
    cwd = np.where(instance.cost_wd > 0, instance.cost_wd, inf)
    cpw = np.where(instance.cost_pw > 0, instance.cost_pw, inf)
    five = instance.num_levels == 5
    csp = np.where(instance.cost_sp > 0, instance.cost_sp, inf) if five else None
    n_cols = len(instance.chain)

    for _ in range(50):
        order = rng.permutation(instance.R)
        usage = {c: np.zeros(instance.level_size[c], dtype=np.int64) for c in instance.chain}
        open_count = {c: 0 for c in instance.chain}
        paths = np.empty((instance.R, n_cols), dtype=np.int64)
        failed = False
        for r in order:
            path = _cheapest_marginal_path(instance, int(r), cdr, cwd, cpw, csp,
                                           usage, open_count)
            if path is None:
                failed = True
                break
            paths[r] = path
            for i, c in enumerate(instance.chain):
                u = usage[c]
                if u[path[i]] == 0:
                    open_count[c] += 1
                u[path[i]] += 1
        if not failed:
            return rebuild_counters(instance, paths)
    raise ConstructionFailed(
        "no feasible construction found in 50 randomized attempts")


def _cheapest_marginal_path(instance, r, cdr, cwd, cpw, csp, usage, open_count):
    def penalty(c):
        return np.where(usage[c] > 0, 0.0, instance.fixed[c])

    def blocked(c):
        # at the bound only already-open facilities may be used
        if open_count[c] >= instance.ub[c]:
            return usage[c] == 0
        return None

    f_d = cdr[:, r] + penalty("D")
    b = blocked("D")
    if b is not None:
        f_d = np.where(b, np.inf, f_d)
    via_d = cwd + f_d[None, :]
    arg_d = np.argmin(via_d, axis=1)
    f_w = via_d[np.arange(instance.W), arg_d] + penalty("W")
    b = blocked("W")
    if b is not None:
        f_w = np.where(b, np.inf, f_w)
    via_w = cpw + f_w[None, :]
    arg_w = np.argmin(via_w, axis=1)
    f_p = via_w[np.arange(instance.P), arg_w] + penalty("P")
    f_p = np.where(instance.elig_pr[:, r] == 0, np.inf, f_p)
    b = blocked("P")
    if b is not None:
        f_p = np.where(b, np.inf, f_p)
    if csp is None:
        p = int(np.argmin(f_p))
        if not np.isfinite(f_p[p]):
            return None
        w = int(arg_w[p])
        return (p, w, int(arg_d[w]))
    via_p = csp + f_p[None, :]
    arg_p = np.argmin(via_p, axis=1)
    f_s = via_p[np.arange(instance.S), arg_p] + penalty("S")
    b = blocked("S")
    if b is not None:
        f_s = np.where(b, np.inf, f_s)
    s = int(np.argmin(f_s))
    if not np.isfinite(f_s[s]):
        return None
    p = int(arg_p[s])
    w = int(arg_w[p])
    return (s, p, w, int(arg_d[w]))


# -- k-flip local searches ----------------------------------------------------


def kflip_descent(instance: Instance, solution: Solution, k: int, rng, ctx=None) -> int:
    """Exhaustive k-flip local search; returns the number of applied moves.

    Repeats passes (shuffled type order, fresh sequences per type, applying
    every improving admissible flip found) until a full pass applies nothing,
    so the returned solution admits no improving k-flip.
    """
    types = types_for(instance.num_levels, k)
    total = 0
    while True:
        applied = 0
        order = [types[i] for i in rng.permutation(len(types))]
        for nb_type in order:
            seqs = fresh_sequences(instance, rng)
            # a clean certificate means the ordered walk would apply nothing
            if not any_improving(instance, solution, nb_type.levels, ctx):
                continue
            for r in seqs.retailers:
                applied += scan_retailer(instance, solution, int(r), nb_type, seqs,
                                         stop_after_first=False, ctx=ctx)
        if applied == 0:
            return total
        total += applied


def kflip_step(instance: Instance, solution: Solution, k: int, rng, ctx=None) -> bool:
    """Single next-improvement probe of structure k.

    Scans like kflip_descent but returns right after applying the first
    improving move; False means the full scan found nothing.
    """
    types = types_for(instance.num_levels, k)
    order = [types[i] for i in rng.permutation(len(types))]
    for nb_type in order:
        seqs = fresh_sequences(instance, rng)
        if not any_improving(instance, solution, nb_type.levels, ctx):
            continue
        for r in seqs.retailers:
            if scan_retailer(instance, solution, int(r), nb_type, seqs,
                             stop_after_first=True, ctx=ctx):
                return True
    return False


# -- multi-start ---------------------------------------------------------------


def resolve_max_local(instance: Instance, config: VndConfig) -> int:
    if config.max_local is not None:
        return config.max_local
    return MAX_LOCAL.get(instance.meta.get("density_class"), 30)


def _start_stream(config: VndConfig, index: int):
    if config.vary_start_by_variant:
        return stream(config.master_seed, "start", config.variant, index)
    return stream(config.master_seed, "start", index)


def _multi_start(instance: Instance, config: VndConfig, ctx: _Context):
    best = None
    truncated = False
    for i in range(resolve_max_local(instance, config)):
        rng = _start_stream(config, i)
        sol = construct_initial(instance, rng)
        ctx.note(sol.objective)
        try:
            kflip_descent(instance, sol, 1, rng, ctx)
        except _TimeUp:
            truncated = True
        if best is None or sol.objective < best.objective:
            best = sol
        if truncated:
            break
    return best, truncated


def multi_start(instance: Instance, config: VndConfig) -> Solution:
    """Best of max_local independent (construct + exhaustive 1-flip) runs.

    Each start uses its own stream derived from (master_seed, start index),
    so the result is identical no matter how starts are scheduled; ties go to
    the lowest start index.
    """
    config.validate()
    ctx = _Context(instance, config, time.monotonic())
    best, _ = _multi_start(instance, config, ctx)
    return best


# -- VND variants ---------------------------------------------------------------


def _descend_bvnd(instance, solution, rng, ctx):
    max_k = len(instance.chain)
    kflip_descent(instance, solution, 1, rng, ctx)
    while True:
        improved = False
        for k in range(2, max_k + 1):
            if kflip_step(instance, solution, k, rng, ctx):
                kflip_descent(instance, solution, 1, rng, ctx)
                improved = True
                break
        if not improved:
            return


def _descend_pvnd(instance, solution, rng, ctx):
    max_k = len(instance.chain)
    while True:
        improved = False
        for k in range(1, max_k + 1):
            if kflip_descent(instance, solution, k, rng, ctx):
                improved = True
        if not improved:
            return


def _descend_cvnd(instance, solution, rng, ctx):
    max_k = len(instance.chain)
    while True:
        improved = False
        for k in range(1, max_k + 1):
            if kflip_step(instance, solution, k, rng, ctx):
                improved = True
        if not improved:
            return


def _descend_uvnd(instance, solution, rng, ctx):
    max_k = len(instance.chain)
    while True:
        improved = False
        for k in rng.permutation(max_k) + 1:
            if kflip_step(instance, solution, int(k), rng, ctx):
                improved = True
        if not improved:
            return


_DESCENTS = {
    "bvnd": _descend_bvnd,
    "pvnd": _descend_pvnd,
    "cvnd": _descend_cvnd,
    "uvnd": _descend_uvnd,
}


def solve(instance: Instance, config: VndConfig) -> tuple[Solution, SearchTrace]:
    """Multi-start phase followed by the configured variant's descent."""
    config.validate()
    ctx = _Context(instance, config, time.monotonic())
    solution, truncated = _multi_start(instance, config, ctx)
    if not truncated:
        rng = stream(config.master_seed, "vnd", config.variant)
        try:
            _DESCENTS[config.variant](instance, solution, rng, ctx)
        except _TimeUp:
            truncated = True
    return solution, ctx.finish(solution, truncated)


def solve_all(instance: Instance, config: VndConfig,
              variants=VARIANTS) -> dict[str, tuple[Solution, SearchTrace]]:
    """Run several variants from one shared multi-start phase.

    Sharing is exact because the multi-start streams do not depend on the
    variant; with a time limit (or per-variant starts) each variant runs
    independently so its budget stays well defined.
    """
    config.validate()
    if config.time_limit is not None or config.vary_start_by_variant:
        return {v: solve(instance, replace(config, variant=v)) for v in variants}
    base_ctx = _Context(instance, config, time.monotonic())
    base, _ = _multi_start(instance, config, base_ctx)
    out = {}
    for variant in variants:
        ctx = base_ctx.fork()
        ctx.config = replace(config, variant=variant)
        solution = base.copy()
        rng = stream(config.master_seed, "vnd", variant)
        _DESCENTS[variant](instance, solution, rng, ctx)
        out[variant] = (solution, ctx.finish(solution, False))
    return out


def bvnd(instance: Instance, config: VndConfig) -> tuple[Solution, SearchTrace]:
    return solve(instance, replace(config, variant="bvnd"))


def pvnd(instance: Instance, config: VndConfig) -> tuple[Solution, SearchTrace]:
    return solve(instance, replace(config, variant="pvnd"))


def cvnd(instance: Instance, config: VndConfig) -> tuple[Solution, SearchTrace]:
    return solve(instance, replace(config, variant="cvnd"))


def uvnd(instance: Instance, config: VndConfig) -> tuple[Solution, SearchTrace]:
    return solve(instance, replace(config, variant="uvnd"))
