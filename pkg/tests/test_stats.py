import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as spstats

from mfl.errors import IncompleteMatrix, LengthMismatch
from mfl.stats import (ResultMatrix, analyze, average_ranks, bonferroni_adjust,
                       friedman, load_result_matrix, nemenyi,
                       pairwise_wilcoxon_bonferroni, studentized_range_crit,
                       studentized_range_sf, wilcoxon_signed_rank)


def test_average_ranks_basic():
    np.testing.assert_array_equal(average_ranks([[10, 20, 30]]), [[1, 2, 3]])
    np.testing.assert_array_equal(average_ranks([[10, 10, 30]]), [[1.5, 1.5, 3]])


def test_average_ranks_published_row():
    # a benchmark row with a three-way tie
    row = [[332321, 334136, 332321, 332321]]
    np.testing.assert_array_equal(average_ranks(row), [[2, 4, 2, 2]])


def test_rank_sums_constant():
    rng = np.random.default_rng(5)
    mat = rng.integers(0, 4, size=(40, 5)).astype(float)  # plenty of ties
    ranks = average_ranks(mat)
    np.testing.assert_allclose(ranks.sum(axis=1), 5 * 6 / 2)


def test_friedman_known_value():
    chi2, df, p = friedman([[1, 2, 3]] * 4)
    assert chi2 == pytest.approx(8.0, abs=1e-12)
    assert df == 2
    assert p == pytest.approx(0.018316, abs=1e-5)


def test_friedman_degenerate_all_tied():
    chi2, df, p = friedman([[7, 7, 7]] * 5)
    assert (chi2, df, p) == (0.0, 2, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(0, 50), min_size=4, max_size=4),
                min_size=3, max_size=12))
def test_friedman_matches_scipy(rows):
    mat = np.array(rows, dtype=float)
    if all(len(set(row)) == 1 for row in rows):
        assert friedman(mat)[0] == 0.0
        return
    chi2, df, p = friedman(mat)
    ref = spstats.friedmanchisquare(*[mat[:, j] for j in range(mat.shape[1])])
    assert chi2 == pytest.approx(float(ref.statistic), rel=1e-10, abs=1e-10)
    assert p == pytest.approx(float(ref.pvalue), rel=1e-8, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(st.floats(1.0, 100.0, allow_nan=False, width=32),
                         min_size=3, max_size=3), min_size=3, max_size=10))
def test_friedman_invariant_under_monotone_row_maps(rows):
    mat = np.array(rows, dtype=float)
    chi2, _, _ = friedman(mat)
    warped = np.column_stack([np.exp(mat[:, j] / 50.0) + 3.0 for j in range(3)])
    chi2w, _, _ = friedman(warped)
    assert chi2w == pytest.approx(chi2, rel=1e-9, abs=1e-9)


def test_friedman_invariant_under_column_permutation():
    rng = np.random.default_rng(3)
    mat = rng.random((20, 4))
    chi2, _, _ = friedman(mat)
    perm = [2, 0, 3, 1]
    chi2p, _, _ = friedman(mat[:, perm])
    assert chi2p == pytest.approx(chi2, rel=1e-12)
    nem = nemenyi(mat)
    nem_p = nemenyi(mat[:, perm])
    for i, j in itertools.combinations(range(4), 2):
        assert nem_p[i, j] == pytest.approx(nem[perm[i], perm[j]], abs=1e-12)


def test_studentized_range_two_groups_closed_form():
    # the range of two normals: P(Q > q) = 2 * Phi(-q / sqrt(2))
    for q in (0.5, 1.0, 2.0, 3.5, 5.0):
        expect = 2 * spstats.norm.sf(q / math.sqrt(2))
        assert studentized_range_sf(q, 2) == pytest.approx(expect, abs=1e-10)


def test_studentized_range_matches_scipy_large_df():
    sr = spstats.studentized_range(4, 1e6)
    for q in (1.0, 2.0, 3.0, 3.633, 4.5, 6.0):
        assert studentized_range_sf(q, 4) == pytest.approx(
            float(sr.sf(q)), abs=2e-4)


def test_studentized_range_critical_value():
    assert round(studentized_range_crit(0.05, 4), 3) == 3.633
    assert round(studentized_range_crit(0.05, 3), 3) == 3.314
    assert round(studentized_range_crit(0.01, 4), 3) == 4.403


def test_nemenyi_identical_columns():
    mat = np.array([[1.0, 1.0, 5.0], [2.0, 2.0, 7.0], [4.0, 4.0, 9.0]])
    p = nemenyi(mat)
    assert p[0, 1] == pytest.approx(1.0)
    assert np.isnan(p[0, 0])
    np.testing.assert_allclose(p, p.T, equal_nan=True)


def test_wilcoxon_identical_samples():
    assert wilcoxon_signed_rank([1, 2, 3], [1, 2, 3]) == 1.0


def test_wilcoxon_constant_shift_exact():
    x = np.arange(1, 7, dtype=float)
    # all six differences are -10: W+ = 0, exact two-sided p = 2 / 2^6
    assert wilcoxon_signed_rank(x, x + 10) == pytest.approx(0.03125, abs=1e-12)


def test_wilcoxon_length_mismatch():
    with pytest.raises(LengthMismatch):
        wilcoxon_signed_rank([1, 2, 3], [1, 2])
    with pytest.raises(LengthMismatch):
        wilcoxon_signed_rank([1], [2])


def _wilcoxon_brute(x, y):
    d = np.asarray(x, float) - np.asarray(y, float)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = spstats.rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    le = ge = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(rk for s, rk in zip(signs, ranks) if s)
        le += w <= w_obs + 1e-12
        ge += w >= w_obs - 1e-12
    total = 2 ** n
    return min(1.0, 2 * min(le / total, ge / total))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)),
                min_size=2, max_size=9))
def test_wilcoxon_exact_matches_enumeration(pairs):
    x = np.array([a for a, _ in pairs], dtype=float)
    y = np.array([b for _, b in pairs], dtype=float)
    assert wilcoxon_signed_rank(x, y) == pytest.approx(_wilcoxon_brute(x, y), abs=1e-12)


def test_wilcoxon_approx_matches_scipy_without_ties():
    rng = np.random.default_rng(11)
    x = rng.normal(size=40)
    y = x + rng.normal(0.4, 1.0, size=40)
    ref = spstats.wilcoxon(x, y, zero_method="wilcox", correction=True,
                           alternative="two-sided", method="approx")
    assert wilcoxon_signed_rank(x, y) == pytest.approx(float(ref.pvalue), rel=1e-9)


def test_bonferroni_adjust():
    assert bonferroni_adjust(0.30, 6) == 1.0
    assert bonferroni_adjust(0.001, 6) == pytest.approx(0.006)
    assert bonferroni_adjust(1e-27, 6) == pytest.approx(6e-27)
    grid = np.array([[np.nan, 0.2], [0.2, np.nan]])
    out = bonferroni_adjust(grid, 3)
    assert out[0, 1] == pytest.approx(0.6)
    assert np.isnan(out[0, 0])


def test_pairwise_matrix_symmetric_and_in_range():
    rng = np.random.default_rng(7)
    mat = rng.random((12, 4)) * 100
    for grid in (nemenyi(mat), pairwise_wilcoxon_bonferroni(mat)):
        np.testing.assert_allclose(grid, grid.T, equal_nan=True)
        vals = grid[~np.isnan(grid)]
        assert np.all((vals >= 0) & (vals <= 1))


def test_result_matrix_validation():
    with pytest.raises(IncompleteMatrix):
        ResultMatrix(np.array([[1.0, np.nan], [2.0, 3.0]]), ["a", "b"], ["r1", "r2"])
    with pytest.raises(IncompleteMatrix):
        ResultMatrix(np.array([[1.0, 2.0]]), ["a", "b"], ["r1"])  # N < 2
    with pytest.raises(IncompleteMatrix):
        friedman([[1.0], [2.0]])


def test_matrix_csv_roundtrip(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("instance,A,B\nr1,3,4\nr2,5,2\n")
    m = load_result_matrix(path)
    assert m.algorithms == ["A", "B"]
    assert m.instance_ids == ["r1", "r2"]
    np.testing.assert_array_equal(m.values, [[3, 4], [5, 2]])


def test_matrix_csv_measure_selection(tmp_path):
    path = tmp_path / "res.csv"
    path.write_text("problem_id,ofv_bvnd,ofv_pvnd,time_bvnd,time_pvnd\n"
                    "p1,10,12,1.5,2.5\np2,11,9,2.0,1.0\n")
    m = load_result_matrix(path, measure="time")
    assert m.algorithms == ["BVND", "PVND"]
    np.testing.assert_array_equal(m.values, [[1.5, 2.5], [2.0, 1.0]])
    with pytest.raises(IncompleteMatrix):
        load_result_matrix(path, measure="cost")


def test_analyze_report_shapes():
    rng = np.random.default_rng(9)
    matrix = ResultMatrix(rng.random((10, 4)), ["A", "B", "C", "D"],
                          [f"i{k}" for k in range(10)])
    report = analyze(matrix, measure="ofv")
    doc = report.to_json_dict()
    assert doc["friedman"]["df"] == 3
    assert len(doc["nemenyi_p"]) == 4
    assert doc["nemenyi_p"][0][0] is None
    text = report.format_text()
    assert "Friedman chi-squared" in text and "Bonferroni" in text
