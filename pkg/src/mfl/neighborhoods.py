"""k-flip move system: neighborhood types, scan sequences and move deltas.

A k-flip move replaces the facilities at k chosen tiers of one retailer's
path.  The neighborhood structure for a given k is the set of C(n, k) tier
subsets ("types"), n = num_levels - 1.  Scans walk candidate replacement
tuples in the order given by per-tier random sequences, take the first
strictly improving admissible move, and continue from the position after it
(next-improvement discipline).  A move is admissible iff every tier's
post-move open count stays within its bound; inadmissible or ineligible
candidates are skipped, so every visited solution stays feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .errors import InadmissibleMove, IneligibleMove
from .model import Instance, Solution, chain_for
from .errors import UnsupportedLevelCount


@dataclass(frozen=True)
class NeighborhoodType:
    """One tier subset, chain-ordered, e.g. ("P", "D")."""

    levels: tuple[str, ...]

    def __str__(self):
        return "{" + ",".join(self.levels) + "}"


def structures_for(num_levels: int) -> list[tuple[int, list[NeighborhoodType]]]:
    """All neighborhood structures (k, types) in canonical order.

    Types within a structure are ordered by chain position, so the listing is
    stable: 4-level sizes are [3, 3, 1], 5-level sizes are [4, 6, 4, 1].
    """
    chain = chain_for(num_levels)
    return [
        (k, [NeighborhoodType(levels) for levels in combinations(chain, k)])
        for k in range(1, len(chain) + 1)
    ]


def types_for(num_levels: int, k: int) -> list[NeighborhoodType]:
    """The types of structure k (1 <= k <= num_levels - 1)."""
    chain = chain_for(num_levels)
    if not 1 <= k <= len(chain):
        raise UnsupportedLevelCount(f"k must be in [1, {len(chain)}], got {k}")
    return [NeighborhoodType(levels) for levels in combinations(chain, k)]


@dataclass
class SequenceSet:
    """Random scan orders: one permutation per tier plus the retailer order.

    `types` carries the shuffled type order q when one was requested.
    """

    retailers: np.ndarray
    levels: dict[str, np.ndarray]
    types: list[NeighborhoodType] | None = None


def fresh_sequences(instance: Instance, rng, types=None) -> SequenceSet:
    """Draw independent uniform permutations for retailers and every tier."""
    retailers = rng.permutation(instance.R)
    levels = {c: rng.permutation(instance.level_size[c]) for c in instance.chain}
    q = None
    if types is not None:
        q = [types[i] for i in rng.permutation(len(types))]
    return SequenceSet(retailers=retailers, levels=levels, types=q)


@dataclass
class Move:
    """One retailer plus replacement facilities at the flipped tiers."""

    retailer: int
    replacements: dict[str, int]

    @classmethod
    def for_solution(cls, solution: Solution, instance: Instance,
                     retailer: int, replacements: dict[str, int]) -> "Move":
        """Construct with validation that every replacement actually changes."""
        if not replacements:
            raise ValueError("a move must flip at least one tier")
        for level, cand in replacements.items():
            pos = instance.col[level]
            if cand == solution.paths[retailer, pos]:
                raise ValueError(
                    f"replacement at level {level} equals the current facility {cand}")
        return cls(retailer=retailer, replacements=dict(replacements))


def _path_cost(instance: Instance, r: int, idx) -> float:
    total = instance.cost_dr[idx[-1], r]
    for i, mat in enumerate(instance.arc_between):
        total += mat[idx[i], idx[i + 1]]
    return float(total)


def delta_cost(instance: Instance, solution: Solution, move: Move) -> tuple[float, bool]:
    """Exact objective change of a move plus its bound-admissibility.

    Pure: the solution is not touched.  Raises IneligibleMove when the new
    path would use a zero-cost arc or an ineligible plant.
    """
    r = move.retailer
    if not 0 <= r < instance.R:
        raise IndexError(f"retailer index {r} out of range")
    if not move.replacements:
        raise ValueError("a move must flip at least one tier")
    cur = solution.paths[r]
    new_idx = cur.copy()
    for level, cand in move.replacements.items():
        pos = instance.col[level]
        if not 0 <= cand < instance.level_size[level]:
            raise IndexError(f"facility index {cand} out of range at level {level}")
        if cand == cur[pos]:
            raise ValueError(f"replacement at level {level} equals the current facility")
        new_idx[pos] = cand
    for i, mat in enumerate(instance.arc_between):
        if mat[new_idx[i], new_idx[i + 1]] == 0:
            raise IneligibleMove(
                f"arc {instance.chain[i]}{new_idx[i]} -> "
                f"{instance.chain[i + 1]}{new_idx[i + 1]} is ineligible")
    if instance.cost_dr[new_idx[-1], r] == 0:
        raise IneligibleMove(f"arc D{new_idx[-1]} -> retailer {r} is ineligible")
    if instance.elig_pr[new_idx[instance.col["P"]], r] == 0:
        raise IneligibleMove(
            f"plant {new_idx[instance.col['P']]} is not eligible for retailer {r}")
    delta = _path_cost(instance, r, new_idx) - _path_cost(instance, r, cur)
    admissible = True
    for level, cand in move.replacements.items():
        usage = solution.usage[level]
        old = cur[instance.col[level]]
        closes = usage[old] == 1
        opens = usage[cand] == 0
        if opens:
            delta += float(instance.fixed[level][cand])
        if closes:
            delta -= float(instance.fixed[level][old])
        if solution.open_count[level] - int(closes) + int(opens) > instance.ub[level]:
            admissible = False
    return float(delta), admissible


def apply_move(instance: Instance, solution: Solution, move: Move) -> Solution:
    """Apply an admissible move in place; objective changes by exactly delta_cost."""
    delta, admissible = delta_cost(instance, solution, move)
    if not admissible:
        raise InadmissibleMove(f"move on retailer {move.retailer} violates an open bound")
    r = move.retailer
    for level, cand in move.replacements.items():
        pos = instance.col[level]
        old = solution.paths[r, pos]
        usage = solution.usage[level]
        usage[old] -= 1
        if usage[old] == 0:
            solution.open_count[level] -= 1
        if usage[cand] == 0:
            solution.open_count[level] += 1
        usage[cand] += 1
        solution.paths[r, pos] = cand
    solution.objective += delta
    return solution


# -- vectorized first-improvement scan ---------------------------------------
#
# Candidate tuples for a type are enumerated over the full index grid of the
# flipped tiers (self-candidates occupy positions but are masked), reordered
# by the tier sequences, with chain-earlier tiers varying slowest.  Flat
# positions are therefore stable across calls, which lets a caller resume
# scanning right after an applied move.


def _first_improving(instance, solution, r, levels, seqs, start_pos, ctx=None):
    """First improving admissible flip of `levels` for retailer r at or after
    flat position start_pos; returns (flat_pos, Move, delta) or None."""
    chain = instance.chain
    col = instance.col
    cur = solution.paths[r]
    if len(levels) == 1:
        var_levels = tuple(levels)
        outer_levels: tuple[str, ...] = ()
    else:
        var_levels = tuple(levels[-2:])
        outer_levels = tuple(levels[:-2])
    var_axis = {c: a for a, c in enumerate(var_levels)}
    sizes = [instance.level_size[c] for c in var_levels]
    grid_n = int(np.prod(sizes))
    perms = [seqs.levels[c] for c in var_levels]

    outer_perms = [seqs.levels[c] for c in outer_levels]
    n_blocks = 1
    for p in outer_perms:
        n_blocks *= len(p)
    total = n_blocks * grid_n
    if start_pos >= total:
        return None

    old_cost = _path_cost(instance, r, cur)
    # Per-axis terms that do not depend on the outer combo.
    open_add = []
    adm = []
    var_fixed_refund = 0.0
    for a, c in enumerate(var_levels):
        usage = solution.usage[c]
        old = cur[col[c]]
        closes = usage[old] == 1
        if closes:
            var_fixed_refund -= float(instance.fixed[c][old])
        add = np.where(usage == 0, instance.fixed[c], 0.0)
        if solution.open_count[c] - int(closes) + 1 > instance.ub[c]:
            ok = usage > 0
        else:
            ok = np.ones(instance.level_size[c], dtype=bool)
        ok = ok.copy()
        ok[old] = False
        if c == "P":
            ok &= instance.elig_pr[:, r] > 0
        open_add.append(add)
        adm.append(ok)

    first_block = start_pos // grid_n
    outer_iter = product(*outer_perms) if outer_perms else iter([()])
    for oi, combo in enumerate(outer_iter):
        if oi < first_block:
            continue
        block_start = oi * grid_n
        new_idx = cur.copy()
        skip = False
        fixed_scalar = var_fixed_refund
        for c, cand in zip(outer_levels, combo):
            pos = col[c]
            if cand == cur[pos]:
                skip = True
                break
            usage = solution.usage[c]
            closes = usage[cur[pos]] == 1
            opens = usage[cand] == 0
            if solution.open_count[c] - int(closes) + int(opens) > instance.ub[c]:
                skip = True
                break
            if c == "P" and instance.elig_pr[cand, r] == 0:
                skip = True
                break
            if opens:
                fixed_scalar += float(instance.fixed[c][cand])
            if closes:
                fixed_scalar -= float(instance.fixed[c][cur[pos]])
            new_idx[pos] = cand
        if skip:
            continue

        if ctx is not None:
            ctx.work += grid_n

        # Accumulate arc costs of the new path over scalar / axis terms.
        base = 0.0
        vec = [open_add[a].copy() for a in range(len(var_levels))]
        ok_vec = [adm[a].copy() for a in range(len(var_levels))]
        mat = None
        ok_mat = None
        block_ok = True

        def add_term(axis_a, axis_b, matrix, ia, ib):
            # axis_a/axis_b are var axes or None (scalar index ia/ib applies)
            nonlocal base, mat, ok_mat, block_ok
            if axis_a is None and axis_b is None:
                v = matrix[ia, ib]
                if v == 0:
                    block_ok = False
                else:
                    base += float(v)
            elif axis_a is None:
                row = matrix[ia, :]
                vec[axis_b] += row
                ok_vec[axis_b] &= row > 0
            elif axis_b is None:
                colv = matrix[:, ib]
                vec[axis_a] += colv
                ok_vec[axis_a] &= colv > 0
            else:
                mat = matrix if mat is None else mat + matrix
                m_ok = matrix > 0
                ok_mat = m_ok if ok_mat is None else (ok_mat & m_ok)

        for i, matrix in enumerate(instance.arc_between):
            ca, cb = chain[i], chain[i + 1]
            add_term(var_axis.get(ca), var_axis.get(cb), matrix, new_idx[i], new_idx[i + 1])
            if not block_ok:
                break
        if block_ok:
            cd = chain[-1]
            if cd in var_axis:
                colv = instance.cost_dr[:, r]
                vec[var_axis[cd]] += colv
                ok_vec[var_axis[cd]] &= colv > 0
            else:
                v = instance.cost_dr[new_idx[-1], r]
                if v == 0:
                    block_ok = False
                else:
                    base += float(v)
        if not block_ok:
            continue

        scalar = base - old_cost + fixed_scalar
        if len(var_levels) == 1:
            delta = scalar + vec[0]
            improving = ok_vec[0] & (delta < 0)
            flat = improving[perms[0]]
        else:
            delta = scalar + vec[0][:, None] + vec[1][None, :]
            if mat is not None:
                delta = delta + mat
            improving = ok_vec[0][:, None] & ok_vec[1][None, :] & (delta < 0)
            if ok_mat is not None:
                improving &= ok_mat
            flat = improving[np.ix_(perms[0], perms[1])].ravel()

        local_start = max(0, start_pos - block_start)
        hits = np.flatnonzero(flat[local_start:])
        for h in hits:
            j = local_start + int(h)
            if len(var_levels) == 1:
                repl = {var_levels[0]: int(perms[0][j])}
            else:
                repl = {var_levels[0]: int(perms[0][j // sizes[1]]),
                        var_levels[1]: int(perms[1][j % sizes[1]])}
            for c, cand in zip(outer_levels, combo):
                repl[c] = int(cand)
            move = Move(retailer=int(r), replacements=repl)
            d, admissible = delta_cost(instance, solution, move)
            if admissible and d < 0:
                return block_start + j, move, d
        # no verified hit in this block; fall through to the next one
    return None


def any_improving(instance, solution, levels, ctx=None,
                  retailer_chunk: int = 64) -> bool:
    """Whether any retailer has an improving admissible flip of `levels`.

    Exact certificate computed tensor-wise over retailer chunks; used to skip
    ordered walks over structures that are already locally optimal.  False
    means a full sequential scan would apply nothing at the current state.
    """
    chain = instance.chain
    col = instance.col
    k = len(levels)
    var_axis = {c: i for i, c in enumerate(levels)}
    sizes = [instance.level_size[c] for c in levels]
    paths = solution.paths

    def shape_r(vec, n):
        # per-retailer scalar -> (n, 1, ..., 1)
        return vec.reshape([n] + [1] * k)

    def shape_rv(arr, axis, n):
        # (n, size) -> (n, 1, .., size, .., 1)
        return arr.reshape([n] + [arr.shape[1] if i == axis else 1 for i in range(k)])

    def shape_v(vec, axis):
        # (size,) -> (1, .., size, .., 1)
        return vec.reshape([1] + [len(vec) if i == axis else 1 for i in range(k)])

    def shape_vv(mat, axis_a, axis_b):
        # (size_a, size_b) -> broadcast over both var axes
        dims = [1] * (k + 1)
        dims[axis_a + 1] = mat.shape[0]
        dims[axis_b + 1] = mat.shape[1]
        return mat.reshape(dims)

    for lo in range(0, instance.R, retailer_chunk):
        rs = np.arange(lo, min(instance.R, lo + retailer_chunk))
        n = len(rs)
        if ctx is not None:
            ctx.work += n * int(np.prod(sizes))
        old_cost = instance.cost_dr[paths[rs, -1], rs].astype(np.float64)
        for i, mat in enumerate(instance.arc_between):
            old_cost += mat[paths[rs, i], paths[rs, i + 1]]
        delta = np.zeros([n] + sizes)
        delta -= shape_r(old_cost, n)
        ok = np.ones([n] + sizes, dtype=bool)
        arcs = [(chain[i], chain[i + 1], m) for i, m in enumerate(instance.arc_between)]
        for ca, cb, mat in arcs:
            a_var, b_var = var_axis.get(ca), var_axis.get(cb)
            if a_var is None and b_var is None:
                delta += shape_r(mat[paths[rs, col[ca]], paths[rs, col[cb]]], n)
            elif a_var is None:
                term = mat[paths[rs, col[ca]], :]
                delta += shape_rv(term, b_var, n)
                ok &= shape_rv(term > 0, b_var, n)
            elif b_var is None:
                term = mat[:, paths[rs, col[cb]]].T
                delta += shape_rv(term, a_var, n)
                ok &= shape_rv(term > 0, a_var, n)
            else:
                delta = delta + shape_vv(mat, a_var, b_var)
                ok &= shape_vv(mat > 0, a_var, b_var)
        if "D" in var_axis:
            term = instance.cost_dr[:, rs].T
            delta += shape_rv(term, var_axis["D"], n)
            ok &= shape_rv(term > 0, var_axis["D"], n)
        else:
            delta += shape_r(instance.cost_dr[paths[rs, col["D"]], rs], n)
        for c, axis in var_axis.items():
            usage = solution.usage[c]
            old = paths[rs, col[c]]
            closes = usage[old] == 1
            delta -= shape_r(np.where(closes, instance.fixed[c][old], 0.0), n)
            delta += shape_v(np.where(usage == 0, instance.fixed[c], 0.0), axis)
            can_open = (solution.open_count[c] - closes.astype(np.int64) + 1
                        <= instance.ub[c])
            adm = (usage > 0)[None, :] | can_open[:, None]
            adm[np.arange(n), old] = False
            if c == "P":
                adm = adm & (instance.elig_pr[:, rs].T > 0)
            ok &= shape_rv(adm, axis, n)
        if bool(np.any(ok & (delta < 0))):
            return True
    return False


def scan_retailer(instance, solution, r, nb_type: NeighborhoodType, seqs,
                  stop_after_first: bool, ctx=None) -> int:
    """Scan one retailer's flips of a type, applying improving moves as found.

    Returns the number of applied moves.  With stop_after_first the scan
    returns right after the first application; otherwise it continues from
    the position after each applied move until the tuple space is exhausted.
    """
    if ctx is not None:
        ctx.tick()
    applied = 0
    pos = 0
    while True:
        hit = _first_improving(instance, solution, r, nb_type.levels, seqs, pos, ctx)
        if hit is None:
            return applied
        pos, move, delta = hit
        apply_move(instance, solution, move)
        applied += 1
        if ctx is not None:
            ctx.on_move(solution)
        if stop_after_first:
            return applied
        pos += 1
