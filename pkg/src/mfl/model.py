"""Problem data model: instances, per-retailer path assignments, solutions.

A shipment for retailer r travels a path through one facility per tier.
Tiers are identified by single characters in source-to-sink order:

    "S" supplier -> "P" plant -> "W" warehouse -> "D" distribution center -> r

4-level instances drop the supplier tier; their paths are (p, w, d).
All indices are 0-based.  Arc-cost matrices use 0 to mean "arc ineligible";
a legitimate zero-cost eligible arc cannot be expressed.

A solution assigns one path per retailer and caches per-facility usage
counters, per-tier open counts and the objective value.  A facility is open
iff its usage counter is positive; the objective is the sum of all arc costs
along the paths plus the fixed cost of every open facility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInstance, UnsupportedLevelCount

LEVEL_NAMES = {
    "S": "supplier",
    "P": "plant",
    "W": "warehouse",
    "D": "distribution center",
}

_CHAINS = {4: ("P", "W", "D"), 5: ("S", "P", "W", "D")}


def chain_for(num_levels: int) -> tuple[str, ...]:
    """Facility tiers in path order for a 4- or 5-level problem."""
    try:
        return _CHAINS[num_levels]
    except KeyError:
        raise UnsupportedLevelCount(f"num_levels must be 4 or 5, got {num_levels}") from None


@dataclass
class Instance:
    """Immutable problem data.

    Instances are safe to share across workers once constructed; nothing in
    this package mutates them.
    """

    num_levels: int
    R: int
    D: int
    W: int
    P: int
    S: int  # 0 when num_levels == 4
    cost_dr: np.ndarray  # D x R
    cost_wd: np.ndarray  # W x D
    cost_pw: np.ndarray  # P x W
    cost_sp: np.ndarray | None  # S x P, None when 4-level
    elig_pr: np.ndarray  # P x R binary
    fixed_d: np.ndarray
    fixed_w: np.ndarray
    fixed_p: np.ndarray
    fixed_s: np.ndarray | None
    ub_d: int
    ub_w: int
    ub_p: int
    ub_s: int  # 0 when 4-level
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.chain = chain_for(self.num_levels)
        self.level_size = {"D": self.D, "W": self.W, "P": self.P}
        self.fixed = {"D": self.fixed_d, "W": self.fixed_w, "P": self.fixed_p}
        self.ub = {"D": self.ub_d, "W": self.ub_w, "P": self.ub_p}
        if self.num_levels == 5:
            self.level_size["S"] = self.S
            self.fixed["S"] = self.fixed_s
            self.ub["S"] = self.ub_s
        self.col = {c: i for i, c in enumerate(self.chain)}
        # arc_between[i] connects chain position i (upper) to i+1 (lower);
        # the arc into the retailer tier is cost_dr, handled separately.
        if self.num_levels == 5:
            self.arc_between = (self.cost_sp, self.cost_pw, self.cost_wd)
        else:
            self.arc_between = (self.cost_pw, self.cost_wd)

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Raise InvalidInstance on any structural violation."""
        problems = []
        if self.num_levels not in (4, 5):
            raise UnsupportedLevelCount(f"num_levels must be 4 or 5, got {self.num_levels}")
        for name, n in (("R", self.R), ("D", self.D), ("W", self.W), ("P", self.P)):
            if n < 1:
                problems.append(f"{name} must be positive, got {n}")
        if self.num_levels == 5 and self.S < 1:
            problems.append(f"S must be positive, got {self.S}")
        shapes = [
            ("cost_DR", self.cost_dr, (self.D, self.R)),
            ("cost_WD", self.cost_wd, (self.W, self.D)),
            ("cost_PW", self.cost_pw, (self.P, self.W)),
            ("elig_PR", self.elig_pr, (self.P, self.R)),
            ("fixed_D", self.fixed_d, (self.D,)),
            ("fixed_W", self.fixed_w, (self.W,)),
            ("fixed_P", self.fixed_p, (self.P,)),
        ]
        if self.num_levels == 5:
            shapes += [
                ("cost_SP", self.cost_sp, (self.S, self.P)),
                ("fixed_S", self.fixed_s, (self.S,)),
            ]
        for name, arr, want in shapes:
            if arr is None or arr.shape != want:
                problems.append(f"{name} must have shape {want}")
        if problems:
            raise InvalidInstance("; ".join(problems))
        for name, arr in [("cost_DR", self.cost_dr), ("cost_WD", self.cost_wd),
                          ("cost_PW", self.cost_pw), ("cost_SP", self.cost_sp),
                          ("fixed_D", self.fixed_d), ("fixed_W", self.fixed_w),
                          ("fixed_P", self.fixed_p), ("fixed_S", self.fixed_s)]:
            if arr is not None and np.any(np.asarray(arr) < 0):
                problems.append(f"{name} has negative entries")
        for c in self.chain:
            if not 1 <= self.ub[c] <= self.level_size[c]:
                problems.append(f"ub_{c} must be in [1, {self.level_size[c]}], got {self.ub[c]}")
        if problems:
            raise InvalidInstance("; ".join(problems))
        bad = np.flatnonzero(~self.retailers_with_path())
        if bad.size:
            head = ", ".join(str(r) for r in bad[:10])
            raise InvalidInstance(
                f"{bad.size} retailer(s) have no fully eligible path (first: {head})")

    def retailers_with_path(self) -> np.ndarray:
        """Boolean vector: retailer has at least one fully eligible path."""
        reach_w = (self.cost_wd > 0) @ (self.cost_dr > 0)  # W x R
        reach_p = (self.cost_pw > 0) @ reach_w  # P x R
        ok = (reach_p > 0) & (self.elig_pr > 0)
        if self.num_levels == 5:
            has_s = (self.cost_sp > 0).any(axis=0)  # plant reachable from some supplier
            ok &= has_s[:, None]
        return ok.any(axis=0)

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        doc = {
            "num_levels": self.num_levels,
            "R": self.R, "D": self.D, "W": self.W, "P": self.P,
            "cost_DR": _num_matrix(self.cost_dr),
            "cost_WD": _num_matrix(self.cost_wd),
            "cost_PW": _num_matrix(self.cost_pw),
            "elig_PR": _num_matrix(self.elig_pr),
            "fixed_D": _num_vector(self.fixed_d),
            "fixed_W": _num_vector(self.fixed_w),
            "fixed_P": _num_vector(self.fixed_p),
            "ub_D": int(self.ub_d), "ub_W": int(self.ub_w), "ub_P": int(self.ub_p),
            "meta": self.meta,
        }
        if self.num_levels == 5:
            doc["S"] = self.S
            doc["cost_SP"] = _num_matrix(self.cost_sp)
            doc["fixed_S"] = _num_vector(self.fixed_s)
            doc["ub_S"] = int(self.ub_s)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Instance":
        num_levels = int(doc["num_levels"])
        five = num_levels == 5
        inst = cls(
            num_levels=num_levels,
            R=int(doc["R"]), D=int(doc["D"]), W=int(doc["W"]), P=int(doc["P"]),
            S=int(doc["S"]) if five else 0,
            cost_dr=np.asarray(doc["cost_DR"], dtype=np.float64),
            cost_wd=np.asarray(doc["cost_WD"], dtype=np.float64),
            cost_pw=np.asarray(doc["cost_PW"], dtype=np.float64),
            cost_sp=np.asarray(doc["cost_SP"], dtype=np.float64) if five else None,
            elig_pr=np.asarray(doc["elig_PR"], dtype=np.uint8),
            fixed_d=np.asarray(doc["fixed_D"], dtype=np.float64),
            fixed_w=np.asarray(doc["fixed_W"], dtype=np.float64),
            fixed_p=np.asarray(doc["fixed_P"], dtype=np.float64),
            fixed_s=np.asarray(doc["fixed_S"], dtype=np.float64) if five else None,
            ub_d=int(doc["ub_D"]), ub_w=int(doc["ub_W"]), ub_p=int(doc["ub_P"]),
            ub_s=int(doc["ub_S"]) if five else 0,
            meta=dict(doc.get("meta", {})),
        )
        inst.validate()
        return inst

    def to_json_bytes(self) -> bytes:
        return canonical_json(self.to_json_dict())

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_json_bytes())

    @classmethod
    def load(cls, path) -> "Instance":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def canonical_json(doc) -> bytes:
    """Deterministic JSON encoding (sorted keys, no whitespace)."""
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def _num(v) -> int | float:
    f = float(v)
    return int(f) if f.is_integer() else f


def _num_vector(arr) -> list:
    return [_num(v) for v in np.asarray(arr).ravel()]


def _num_matrix(arr) -> list:
    return [[_num(v) for v in row] for row in np.asarray(arr)]


# -- solutions ---------------------------------------------------------------


@dataclass
class Solution:
    """One path per retailer plus cached counters and objective.

    `paths` has shape (R, num_levels - 1) with columns in chain order
    (s, p, w, d) or (p, w, d).  Solutions are single-owner mutable state.
    """

    paths: np.ndarray
    usage: dict[str, np.ndarray]
    open_count: dict[str, int]
    objective: float

    def copy(self) -> "Solution":
        return Solution(
            paths=self.paths.copy(),
            usage={c: u.copy() for c, u in self.usage.items()},
            open_count=dict(self.open_count),
            objective=self.objective,
        )

    def to_json_dict(self) -> dict:
        return {"paths": [[int(v) for v in row] for row in self.paths],
                "objective": _num(self.objective)}

    def to_json_bytes(self) -> bytes:
        return canonical_json(self.to_json_dict())


def _checked_paths(instance: Instance, paths) -> np.ndarray:
    arr = np.asarray(paths, dtype=np.int64)
    want = (instance.R, len(instance.chain))
    if arr.shape != want:
        raise ValueError(f"paths must have shape {want}, got {arr.shape}")
    for i, c in enumerate(instance.chain):
        col = arr[:, i]
        if col.min(initial=0) < 0 or col.max(initial=0) >= instance.level_size[c]:
            raise IndexError(f"facility index out of range at level {c}")
    return arr


def path_arc_costs(instance: Instance, paths) -> np.ndarray:
    """Per-retailer sum of arc costs along each assigned path."""
    arr = _checked_paths(instance, paths)
    total = instance.cost_dr[arr[:, -1], np.arange(instance.R)]
    for i, mat in enumerate(instance.arc_between):
        total = total + mat[arr[:, i], arr[:, i + 1]]
    return total


def evaluate_full(instance: Instance, paths) -> float:
    """Objective of a path assignment: arc costs plus fixed costs of used facilities."""
    arr = _checked_paths(instance, paths)
    total = float(path_arc_costs(instance, arr).sum())
    for i, c in enumerate(instance.chain):
        used = np.bincount(arr[:, i], minlength=instance.level_size[c]) > 0
        total += float(instance.fixed[c][used].sum())
    return total


def rebuild_counters(instance: Instance, paths) -> Solution:
    """Build a Solution with counters and objective computed from scratch."""
    arr = _checked_paths(instance, paths)
    usage = {}
    open_count = {}
    for i, c in enumerate(instance.chain):
        u = np.bincount(arr[:, i], minlength=instance.level_size[c]).astype(np.int64)
        usage[c] = u
        open_count[c] = int((u > 0).sum())
    return Solution(paths=arr.copy(), usage=usage, open_count=open_count,
                    objective=evaluate_full(instance, arr))


@dataclass(frozen=True)
class Violation:
    """One feasibility defect; `retailer` is None for bound violations."""

    kind: str  # "ineligible_arc" | "plant_ineligible" | "open_bound_exceeded"
    retailer: int | None
    level: str
    message: str


def check_feasible(instance: Instance, solution: Solution) -> list[Violation]:
    """All feasibility violations of a solution; empty list means feasible.

    Ordering is deterministic: per-retailer violations sorted by retailer then
    chain position, followed by per-level bound violations in chain order.
    """
    arr = _checked_paths(instance, solution.paths)
    out: list[Violation] = []
    r_idx = np.arange(instance.R)
    arcs = []
    for i, mat in enumerate(instance.arc_between):
        upper = instance.chain[i]
        arcs.append((upper, mat[arr[:, i], arr[:, i + 1]]))
    arcs.append(("D", instance.cost_dr[arr[:, -1], r_idx]))
    per_retailer: list[tuple[int, int, Violation]] = []
    for upper, costs in arcs:
        pos = instance.col[upper]
        for r in np.flatnonzero(costs == 0):
            per_retailer.append((int(r), pos, Violation(
                "ineligible_arc", int(r), upper,
                f"retailer {r}: arc out of level {upper} facility "
                f"{arr[r, pos]} has zero cost")))
    p_col = arr[:, instance.col["P"]]
    for r in np.flatnonzero(instance.elig_pr[p_col, r_idx] == 0):
        per_retailer.append((int(r), instance.col["P"], Violation(
            "plant_ineligible", int(r), "P",
            f"retailer {r}: plant {p_col[r]} is not eligible for it")))
    per_retailer.sort(key=lambda t: (t[0], t[1]))
    out.extend(v for _, _, v in per_retailer)
    for i, c in enumerate(instance.chain):
        n_open = int((np.bincount(arr[:, i], minlength=instance.level_size[c]) > 0).sum())
        if n_open > instance.ub[c]:
            out.append(Violation(
                "open_bound_exceeded", None, c,
                f"level {c}: {n_open} facilities open, bound is {instance.ub[c]}"))
    return out
