"""Seeded random instance generation over the published parameter grid.

Arc matrices are sampled entrywise: an entry is eligible with the class
density probability and, if eligible, draws a uniform integer cost from the
tier's range; ineligible entries are 0.  Plant-retailer eligibility uses the
same density.  Per-tier open-facility bounds are ceil(density * tier size).
After sampling, any retailer left without a fully eligible path gets one
uniformly chosen chain forced eligible (fresh costs only where entries were
ineligible), which perturbs the target density minimally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParams, UnsupportedLevelCount
from .model import Instance
from .rng import RNG_ID, from_seed

DENSITY = {
    4: {"low": 0.20, "medium": 0.40, "high": 0.60},
    5: {"low": 0.40, "medium": 0.50, "high": 0.60},
}

FIXED_COST_RANGES = {
    "small": {"D": (50, 100), "W": (100, 200), "P": (200, 400), "S": (20, 100)},
    "medium": {"D": (100, 200), "W": (200, 400), "P": (400, 800), "S": (50, 200)},
    "large": {"D": (200, 400), "W": (400, 800), "P": (800, 1600), "S": (200, 400)},
}

# Multi-start count by density class.
MAX_LOCAL = {"low": 70, "medium": 50, "high": 30}

_DEFAULT_P = {4: 30, 5: 50}


def max_local_for(density_class: str) -> int:
    """Default multi-start count for a density class (low 70, medium 50, high 30)."""
    try:
        return MAX_LOCAL[density_class]
    except KeyError:
        raise InvalidParams(f"unknown density class {density_class!r}") from None


@dataclass
class GeneratorParams:
    """Knobs for one generated instance; defaults follow the benchmark grid."""

    num_levels: int = 4
    R: int = 2000
    D: int = 150
    W: int = 50
    P: int | None = None  # defaults to 30 (4-level) or 50 (5-level)
    S: int = 100
    density_class: str = "high"
    fixed_class: str = "large"
    dr_range: tuple[int, int] = (5, 50)
    wd_range: tuple[int, int] = (100, 500)
    pw_range: tuple[int, int] = (5, 500)
    sp_range: tuple[int, int] = (5, 150)
    seed: int = 0

    def resolved_p(self) -> int:
        return self.P if self.P is not None else _DEFAULT_P[self.num_levels]

    def density(self) -> float:
        return DENSITY[self.num_levels][self.density_class]

    def validate(self) -> None:
        if self.num_levels not in (4, 5):
            raise UnsupportedLevelCount(f"num_levels must be 4 or 5, got {self.num_levels}")
        if self.density_class not in MAX_LOCAL:
            raise InvalidParams(f"unknown density class {self.density_class!r}")
        if self.fixed_class not in FIXED_COST_RANGES:
            raise InvalidParams(f"unknown fixed-cost class {self.fixed_class!r}")
        sizes = [("R", self.R), ("D", self.D), ("W", self.W), ("P", self.resolved_p())]
        if self.num_levels == 5:
            sizes.append(("S", self.S))
        for name, n in sizes:
            if n < 1:
                raise InvalidParams(f"{name} must be positive, got {n}")
        ranges = [("dr_range", self.dr_range), ("wd_range", self.wd_range),
                  ("pw_range", self.pw_range)]
        if self.num_levels == 5:
            ranges.append(("sp_range", self.sp_range))
        for name, (lo, hi) in ranges:
            if not (0 < lo <= hi):
                raise InvalidParams(f"{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if not 0 < self.density() <= 1:
            raise InvalidParams(f"density must be in (0, 1], got {self.density()}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidParams("seed must fit in 64 bits")

    def to_json_dict(self) -> dict:
        return {
            "num_levels": self.num_levels, "R": self.R, "D": self.D, "W": self.W,
            "P": self.resolved_p(), "S": self.S if self.num_levels == 5 else None,
            "density_class": self.density_class, "fixed_class": self.fixed_class,
            "dr_range": list(self.dr_range), "wd_range": list(self.wd_range),
            "pw_range": list(self.pw_range), "sp_range": list(self.sp_range),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GeneratorParams":
        kw = {}
        for key in ("num_levels", "R", "D", "W", "P", "S",
                    "density_class", "fixed_class", "seed"):
            if doc.get(key) is not None:
                kw[key] = doc[key]
        for key in ("dr_range", "wd_range", "pw_range", "sp_range"):
            if doc.get(key) is not None:
                kw[key] = tuple(doc[key])
        return cls(**kw)


def ceil_density_bound(size: int, density: float) -> int:
    """ceil(density * size) computed exactly for the grid's 5%-step densities."""
    num = round(density * 100)
    return max(1, -(-(size * num) // 100))


def generate(params: GeneratorParams) -> Instance:
    """Sample one instance; a pure function of (params, seed)."""
    params.validate()
    rng = from_seed(params.seed)
    density = params.density()
    P = params.resolved_p()
    five = params.num_levels == 5

    def matrix(rows, cols, rg):
        mask = rng.random((rows, cols)) < density
        vals = rng.integers(rg[0], rg[1] + 1, size=(rows, cols))
        return np.where(mask, vals, 0).astype(np.float64)

    cost_dr = matrix(params.D, params.R, params.dr_range)
    cost_wd = matrix(params.W, params.D, params.wd_range)
    cost_pw = matrix(P, params.W, params.pw_range)
    cost_sp = matrix(params.S, P, params.sp_range) if five else None
    elig_pr = (rng.random((P, params.R)) < density).astype(np.uint8)

    fx = FIXED_COST_RANGES[params.fixed_class]

    def fixed(n, c):
        lo, hi = fx[c]
        return rng.integers(lo, hi + 1, size=n).astype(np.float64)

    fixed_d = fixed(params.D, "D")
    fixed_w = fixed(params.W, "W")
    fixed_p = fixed(P, "P")
    fixed_s = fixed(params.S, "S") if five else None

    inst = Instance(
        num_levels=params.num_levels,
        R=params.R, D=params.D, W=params.W, P=P, S=params.S if five else 0,
        cost_dr=cost_dr, cost_wd=cost_wd, cost_pw=cost_pw, cost_sp=cost_sp,
        elig_pr=elig_pr,
        fixed_d=fixed_d, fixed_w=fixed_w, fixed_p=fixed_p, fixed_s=fixed_s,
        ub_d=ceil_density_bound(params.D, density),
        ub_w=ceil_density_bound(params.W, density),
        ub_p=ceil_density_bound(P, density),
        ub_s=ceil_density_bound(params.S, density) if five else 0,
        meta={
            "seed": int(params.seed),
            "density_class": params.density_class,
            "fixed_class": params.fixed_class,
            "density": density,
            "rng": RNG_ID,
        },
    )
    _repair_feasibility(inst, params, rng)
    inst.validate()
    return inst


def _repair_feasibility(inst: Instance, params: GeneratorParams, rng) -> None:
    """Force one eligible chain for every retailer that has none."""
    five = inst.num_levels == 5
    while True:
        missing = np.flatnonzero(~inst.retailers_with_path())
        if missing.size == 0:
            return
        for r in missing:
            d = int(rng.integers(inst.D))
            w = int(rng.integers(inst.W))
            p = int(rng.integers(inst.P))
            inst.elig_pr[p, r] = 1
            if inst.cost_dr[d, r] == 0:
                inst.cost_dr[d, r] = float(rng.integers(params.dr_range[0], params.dr_range[1] + 1))
            if inst.cost_wd[w, d] == 0:
                inst.cost_wd[w, d] = float(rng.integers(params.wd_range[0], params.wd_range[1] + 1))
            if inst.cost_pw[p, w] == 0:
                inst.cost_pw[p, w] = float(rng.integers(params.pw_range[0], params.pw_range[1] + 1))
            if five:
                s = int(rng.integers(inst.S))
                if inst.cost_sp[s, p] == 0:
                    inst.cost_sp[s, p] = float(rng.integers(params.sp_range[0], params.sp_range[1] + 1))


def tweaked(params: GeneratorParams, **changes) -> GeneratorParams:
    """Copy of params with fields replaced (convenience for grids)."""
    return replace(params, **changes)
