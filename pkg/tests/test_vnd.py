import numpy as np
import pytest

from mfl.errors import ConstructionFailed, InvalidParams
from mfl.model import check_feasible, evaluate_full, rebuild_counters
from mfl.rng import stream
from mfl.vnd import (VARIANTS, VndConfig, construct_initial, kflip_descent,
                     kflip_step, multi_start, solve, solve_all)

from conftest import (enumerate_optimum, feasible_tiny_instances,
                      improving_one_flips, make_two_dc, small_instance)


def test_construct_single_path(single_path):
    sol = construct_initial(single_path, stream(0, "c"))
    assert sol.objective == 485.0
    assert list(sol.paths[0]) == [0, 0, 0, 0]


def test_construct_prefers_cheaper_marginal(two_dc):
    # marginal cost through d0 is 485 < 497 through d1
    sol = construct_initial(two_dc, stream(1, "c"))
    assert sol.paths[0, two_dc.col["D"]] == 0
    assert sol.objective == 485.0


def test_construct_is_feasible_on_random_instance():
    inst = small_instance(seed=21, R=50)
    sol = construct_initial(inst, stream(2, "c"))
    assert check_feasible(inst, sol) == []
    assert sol.objective == evaluate_full(inst, sol.paths)


def test_construct_fails_when_jointly_infeasible():
    # two retailers, each eligible to a different dc only, ub_D = 1
    inst = make_two_dc(retailers=2, ub_d=1)
    inst.cost_dr[1, 0] = 0.0
    inst.cost_dr[0, 1] = 0.0
    inst.validate()  # per-retailer paths exist
    with pytest.raises(ConstructionFailed):
        construct_initial(inst, stream(0, "c"))


def test_kflip_descent_no_neighbors(single_path):
    sol = construct_initial(single_path, stream(0, "c"))
    assert kflip_descent(single_path, sol, 1, stream(0, "d")) == 0
    assert sol.objective == 485.0


def test_kflip_descent_reaches_local_optimum(branching):
    # start from the all-d0 assignment; an improving swap exists for retailer 1
    sol = rebuild_counters(branching, [[0, 0, 0, 0], [0, 0, 0, 0]])
    assert improving_one_flips(branching, sol)
    moves = kflip_descent(branching, sol, 1, stream(7, "d"))
    assert moves >= 1
    assert improving_one_flips(branching, sol) == []


def test_kflip_descent_is_strictly_monotone():
    inst = small_instance(seed=4)

    class Probe:
        def __init__(self):
            self.objs = []
            self.work = 0

        def tick(self):
            pass

        def on_move(self, solution):
            self.objs.append(solution.objective)

    probe = Probe()
    sol = construct_initial(inst, stream(4, "c"))
    start = sol.objective
    kflip_descent(inst, sol, 1, stream(4, "d"), probe)
    seq = [start] + probe.objs
    assert all(b < a for a, b in zip(seq, seq[1:]))


def test_kflip_step_semantics(single_path, branching):
    sol = construct_initial(single_path, stream(0, "c"))
    assert kflip_step(single_path, sol, 1, stream(0, "s")) is False

    sol = rebuild_counters(branching, [[0, 0, 0, 0], [0, 0, 0, 0]])
    before = sol.objective
    assert kflip_step(branching, sol, 1, stream(1, "s")) is True
    assert sol.objective < before

    # already locally optimal: full scan, no change
    kflip_descent(branching, sol, 1, stream(2, "d"))
    obj = sol.objective
    assert kflip_step(branching, sol, 1, stream(3, "s")) is False
    assert sol.objective == obj


def test_multi_start_single_path(single_path):
    sol = multi_start(single_path, VndConfig(max_local=5, master_seed=3))
    assert sol.objective == 485.0


def test_multi_start_one_equals_stream_zero():
    inst = small_instance(seed=6)
    best = multi_start(inst, VndConfig(max_local=1, master_seed=11))
    rng = stream(11, "start", 0)
    manual = construct_initial(inst, rng)
    kflip_descent(inst, manual, 1, rng)
    assert best.objective == manual.objective
    np.testing.assert_array_equal(best.paths, manual.paths)


def test_multi_start_takes_minimum():
    inst = small_instance(seed=8)
    config = VndConfig(max_local=6, master_seed=13)
    best = multi_start(inst, config)
    singles = []
    for i in range(6):
        rng = stream(13, "start", i)
        sol = construct_initial(inst, rng)
        kflip_descent(inst, sol, 1, rng)
        singles.append(sol.objective)
    assert best.objective == min(singles)


def test_variants_on_single_path(single_path):
    for variant in VARIANTS:
        sol, trace = solve(single_path, VndConfig(variant=variant, max_local=3))
        assert sol.objective == 485.0
        assert len(trace.entries) == 1
        assert trace.final_objective == 485.0


def test_variants_reach_enumerated_optimum_on_branching(branching):
    _, best = enumerate_optimum(branching)
    for variant in VARIANTS:
        sol, _ = solve(branching, VndConfig(variant=variant, max_local=4, master_seed=2))
        assert sol.objective == best
        assert check_feasible(branching, sol) == []


def test_variants_never_beat_enumeration_and_end_one_flip_local():
    for inst, _, best in feasible_tiny_instances(2, num_levels=5):
        for variant in VARIANTS:
            sol, _ = solve(inst, VndConfig(variant=variant, max_local=3, master_seed=5))
            assert sol.objective >= best
            assert improving_one_flips(inst, sol) == []


def test_descent_only_improves_from_start():
    inst = small_instance(seed=10)
    config = VndConfig(max_local=4, master_seed=17)
    start = multi_start(inst, config)
    for variant, (sol, trace) in solve_all(inst, config).items():
        assert sol.objective <= start.objective
        objs = [o for _, o in trace.entries]
        assert all(b < a for a, b in zip(objs, objs[1:]))
        assert trace.final_objective == sol.objective
        assert trace.time_to_best >= 0


def test_solve_is_deterministic():
    inst = small_instance(seed=14)
    config = VndConfig(variant="uvnd", max_local=3, master_seed=23)
    a, ta = solve(inst, config)
    b, tb = solve(inst, config)
    assert a.objective == b.objective
    np.testing.assert_array_equal(a.paths, b.paths)
    assert ta.work_total == tb.work_total
    assert ta.work_to_best == tb.work_to_best


def test_solve_all_matches_individual_runs():
    inst = small_instance(seed=15)
    config = VndConfig(max_local=3, master_seed=29)
    shared = solve_all(inst, config)
    for variant in VARIANTS:
        alone, _ = solve(inst, VndConfig(variant=variant, max_local=3, master_seed=29))
        assert shared[variant][0].objective == alone.objective
        np.testing.assert_array_equal(shared[variant][0].paths, alone.paths)


def test_variants_validated_every_move():
    inst = small_instance(seed=16)
    config = VndConfig(max_local=2, master_seed=31, validate_every_move=True)
    for variant, (sol, _) in solve_all(inst, config).items():
        assert check_feasible(inst, sol) == []


def test_time_limit_truncates():
    inst = small_instance(seed=18, R=60)
    sol, trace = solve(inst, VndConfig(max_local=200, master_seed=3,
                                       time_limit=0.05))
    assert trace.truncated
    assert check_feasible(inst, sol) == []


def test_config_validation():
    with pytest.raises(InvalidParams):
        VndConfig(variant="gvnd").validate()
    with pytest.raises(InvalidParams):
        VndConfig(max_local=0).validate()


def test_max_local_defaults_from_density_class():
    from mfl.vnd import resolve_max_local

    inst = small_instance(seed=19)  # high density
    assert resolve_max_local(inst, VndConfig()) == 30
    assert resolve_max_local(inst, VndConfig(max_local=7)) == 7
