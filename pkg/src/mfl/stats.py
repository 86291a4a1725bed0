"""Rank-based comparison pipeline for benchmark result matrices.

Given an N-instances by g-algorithms matrix of measurements (lower is
better), the pipeline computes per-row average ranks, the tie-corrected
Friedman omnibus test, Nemenyi all-pairs post-hoc p-values from the
studentized range distribution (infinite df), and pairwise two-sided
Wilcoxon signed-rank tests with a Bonferroni correction.

Wilcoxon policy: zero differences are dropped, tied absolute differences get
average ranks, the exact null distribution is enumerated for n <= 25 and a
tie-corrected normal approximation with continuity correction is used above
that.  Tail probabilities are computed in log space internally so extremely
small p-values survive serialization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats as spstats

from .errors import IncompleteMatrix, LengthMismatch


@dataclass
class ResultMatrix:
    """Complete N x g measurement matrix with column labels and row ids."""

    values: np.ndarray
    algorithms: list[str]
    instance_ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise IncompleteMatrix("matrix must be two-dimensional")
        n, g = self.values.shape
        if n < 2 or g < 2:
            raise IncompleteMatrix(f"need at least 2 rows and 2 columns, got {n}x{g}")
        if len(self.algorithms) != g:
            raise IncompleteMatrix("algorithm labels do not match column count")
        if len(self.instance_ids) != n:
            raise IncompleteMatrix("instance ids do not match row count")
        if not np.all(np.isfinite(self.values)):
            raise IncompleteMatrix("matrix has missing or non-finite cells")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def g(self) -> int:
        return self.values.shape[1]


def _as_values(matrix, min_rows: int = 1) -> np.ndarray:
    if isinstance(matrix, ResultMatrix):
        values = matrix.values
    else:
        values = np.asarray(matrix, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < min_rows or values.shape[1] < 2:
        raise IncompleteMatrix(
            f"need a 2-d matrix with at least {min_rows} row(s) and 2 columns")
    if not np.all(np.isfinite(values)):
        raise IncompleteMatrix("matrix has missing or non-finite cells")
    return values


def average_ranks(matrix) -> np.ndarray:
    """Within-row ranks, 1 = smallest; ties share the mean of their positions."""
    return spstats.rankdata(_as_values(matrix), method="average", axis=1)


def friedman(matrix) -> tuple[float, int, float]:
    """Tie-corrected Friedman test; returns (chi2, df, p).

    Fully tied input (every row constant) returns the degenerate (0, g-1, 1).
    """
    ranks = spstats.rankdata(_as_values(matrix, min_rows=2), method="average", axis=1)
    n, g = ranks.shape
    col_sums = ranks.sum(axis=0)
    numerator = 12.0 * float(((col_sums - n * (g + 1) / 2.0) ** 2).sum())
    ties = 0.0
    for row in ranks:
        _, counts = np.unique(row, return_counts=True)
        counts = counts.astype(np.float64)
        ties += float((counts ** 3 - counts).sum())
    denominator = n * g * (g + 1) - ties / (g - 1)
    if denominator <= 0:
        return 0.0, g - 1, 1.0
    chi2 = numerator / denominator
    return chi2, g - 1, float(spstats.chi2.sf(chi2, g - 1))


# -- studentized range distribution (infinite df) ------------------------------

_GL_POINTS = 512
_gl_cache: tuple[np.ndarray, np.ndarray] | None = None


def _gl_nodes():
    global _gl_cache
    if _gl_cache is None:
        x, w = np.polynomial.legendre.leggauss(_GL_POINTS)
        lo, hi = -9.0, 9.0
        z = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        wz = 0.5 * (hi - lo) * w * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        _gl_cache = (z, wz)
    return _gl_cache


def studentized_range_sf(q: float, n_groups: int) -> float:
    """Upper tail P(Q > q) of the range of n_groups standard normals.

    Numerical quadrature of the classical single-integral form; absolute
    accuracy is far better than the 1e-4 target for q in the useful range.
    """
    if n_groups < 2:
        raise ValueError("need at least two groups")
    if q <= 0:
        return 1.0
    z, wz = _gl_nodes()
    inner = special.ndtr(z) - special.ndtr(z - q)
    cdf = n_groups * float((wz * inner ** (n_groups - 1)).sum())
    return float(min(1.0, max(0.0, 1.0 - cdf)))


def studentized_range_crit(alpha: float, n_groups: int) -> float:
    """Critical value q with upper-tail probability alpha."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    return float(optimize.brentq(
        lambda q: studentized_range_sf(q, n_groups) - alpha, 1e-9, 100.0, xtol=1e-10))


def nemenyi(matrix) -> np.ndarray:
    """All-pairs post-hoc p-values from mean ranks; diagonal is NaN.

    The pair statistic is |mean_rank_i - mean_rank_j| / sqrt(g(g+1)/(12N)),
    referred to the studentized range distribution with g groups.
    """
    ranks = spstats.rankdata(_as_values(matrix, min_rows=2), method="average", axis=1)
    n, g = ranks.shape
    mean_ranks = ranks.mean(axis=0)
    scale = math.sqrt(g * (g + 1) / (12.0 * n))
    out = np.full((g, g), np.nan)
    for i in range(g):
        for j in range(i + 1, g):
            q = abs(mean_ranks[i] - mean_ranks[j]) / scale
            p = studentized_range_sf(q, g)
            out[i, j] = out[j, i] = p
    return out


# -- Wilcoxon signed-rank -------------------------------------------------------


def wilcoxon_signed_rank(x, y) -> float:
    """Two-sided signed-rank p-value for paired samples x, y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise LengthMismatch("x and y must be equal-length vectors of length >= 2")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = spstats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= 25:
        return _wilcoxon_exact(ranks, w_plus)
    return _wilcoxon_normal(ranks, w_plus)


def _wilcoxon_exact(ranks, w_plus) -> float:
    # Ranks are half-integers at worst; doubling makes the walk integral.
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for dr in doubled:
        shifted = np.zeros_like(counts)
        shifted[dr:] = counts[:-dr] if dr else counts
        counts += shifted
    counts /= 2.0 ** len(doubled)
    w2 = int(round(2 * w_plus))
    p_le = float(counts[: w2 + 1].sum())
    p_ge = float(counts[w2:].sum())
    return min(1.0, 2.0 * min(p_le, p_ge))


def _wilcoxon_normal(ranks, w_plus) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(ranks, return_counts=True)
    counts = counts.astype(np.float64)
    var -= float((counts ** 3 - counts).sum()) / 48.0
    if var <= 0:
        return 1.0
    shift = 0.5 * math.copysign(1.0, w_plus - mean) if w_plus != mean else 0.0
    z = (w_plus - mean - shift) / math.sqrt(var)
    log_p = math.log(2.0) + spstats.norm.logsf(abs(z))
    return min(1.0, math.exp(log_p))


def bonferroni_adjust(p, m: int):
    """Multiply p-values by the comparison count m, clamped at 1 (NaN kept)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    arr = np.asarray(p, dtype=np.float64)
    out = np.minimum(1.0, arr * m)
    out = np.where(np.isnan(arr), np.nan, out)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def pairwise_wilcoxon_bonferroni(matrix) -> np.ndarray:
    """Bonferroni-adjusted two-sided Wilcoxon p for every column pair."""
    values = _as_values(matrix, min_rows=2)
    g = values.shape[1]
    m = g * (g - 1) // 2
    out = np.full((g, g), np.nan)
    for i in range(g):
        for j in range(i + 1, g):
            p = bonferroni_adjust(wilcoxon_signed_rank(values[:, i], values[:, j]), m)
            out[i, j] = out[j, i] = p
    return out


# -- reports --------------------------------------------------------------------


@dataclass
class StatReport:
    """Everything the comparison pipeline produces for one measure."""

    measure: str
    algorithms: list[str]
    n_instances: int
    ranks: np.ndarray
    mean_ranks: np.ndarray
    friedman_chi2: float
    friedman_df: int
    friedman_p: float
    nemenyi_p: np.ndarray
    wilcoxon_bonferroni_p: np.ndarray

    def to_json_dict(self) -> dict:
        def grid(mat):
            return [[None if math.isnan(v) else v for v in row] for row in mat]

        return {
            "measure": self.measure,
            "algorithms": self.algorithms,
            "n_instances": self.n_instances,
            "mean_ranks": [float(v) for v in self.mean_ranks],
            "ranks": [[float(v) for v in row] for row in self.ranks],
            "friedman": {
                "chi2": self.friedman_chi2,
                "df": self.friedman_df,
                "p": self.friedman_p,
            },
            "nemenyi_p": grid(self.nemenyi_p),
            "wilcoxon_bonferroni_p": grid(self.wilcoxon_bonferroni_p),
        }

    def format_text(self) -> str:
        names = self.algorithms
        lines = [
            f"Rank-based comparison on {self.measure} "
            f"({self.n_instances} instances, {len(names)} algorithms)",
            "",
            f"Friedman chi-squared: {self.friedman_chi2:.3f}  "
            f"df: {self.friedman_df}  p-value: {self.friedman_p:.4g}",
            "Mean ranks: " + "  ".join(
                f"{n}={v:.3f}" for n, v in zip(names, self.mean_ranks)),
            "",
            "Nemenyi post-hoc pairwise p-values:",
            _format_grid(names, self.nemenyi_p),
            "",
            "Pairwise Wilcoxon signed-rank p-values (Bonferroni-adjusted):",
            _format_grid(names, self.wilcoxon_bonferroni_p),
        ]
        return "\n".join(lines) + "\n"


def _format_grid(names, mat) -> str:
    width = max(10, max(len(n) for n in names) + 2)
    head = " " * width + "".join(f"{n:>{width}}" for n in names)
    rows = [head]
    for i, name in enumerate(names):
        cells = "".join(
            f"{'':>{width}}" if math.isnan(mat[i][j]) else f"{mat[i][j]:>{width}.3g}"
            for j in range(len(names)))
        rows.append(f"{name:>{width}}" + cells)
    return "\n".join(rows)


def analyze(matrix: ResultMatrix, measure: str = "value") -> StatReport:
    """Run the full pipeline (ranks, Friedman, Nemenyi, Wilcoxon+Bonferroni)."""
    ranks = average_ranks(matrix)
    chi2, df, p = friedman(matrix)
    return StatReport(
        measure=measure,
        algorithms=list(matrix.algorithms),
        n_instances=matrix.n,
        ranks=ranks,
        mean_ranks=ranks.mean(axis=0),
        friedman_chi2=chi2,
        friedman_df=df,
        friedman_p=p,
        nemenyi_p=nemenyi(matrix),
        wilcoxon_bonferroni_p=pairwise_wilcoxon_bonferroni(matrix),
    )


def load_result_matrix(path, measure: str | None = None) -> ResultMatrix:
    """Read a matrix from CSV.

    Plain form: header `instance,<name>,...` with one row per instance.
    Batch form: columns prefixed `ofv_` / `time_`; pass `measure` to select.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IncompleteMatrix(f"{path} is empty") from None
        rows = [row for row in reader if row]
    if measure is not None:
        prefix = measure + "_"
        cols = [i for i, name in enumerate(header) if name.startswith(prefix)]
        if not cols:
            raise IncompleteMatrix(f"no columns with prefix {prefix!r} in {path}")
        labels = [header[i][len(prefix):].upper() for i in cols]
    else:
        cols = list(range(1, len(header)))
        labels = [header[i] for i in cols]
    ids = []
    values = []
    for row in rows:
        ids.append(row[0])
        try:
            values.append([float(row[i]) for i in cols])
        except (ValueError, IndexError):
            raise IncompleteMatrix(
                f"row {row[0]!r} has missing or non-numeric cells") from None
    return ResultMatrix(values=np.array(values), algorithms=labels, instance_ids=ids)
