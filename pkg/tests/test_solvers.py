"""Solver correctness against enumeration, determinism, and the
hierarchical driver's pooling behavior."""

from __future__ import annotations

from random import Random

import numpy as np
import pytest

from conftest import (
    catalog_for,
    enumerate_optimum,
    line_store,
    random_level1_instance,
    random_level2_instance,
)
from storelayout.demand import expected_transitions, load_transactions
from storelayout.errors import InputError, ModelError, ValidationError
from storelayout.qap import (
    Assignment,
    build_level1_instance,
    build_level2_instance,
    check_feasible,
    objective_of_permutation,
)
from storelayout.solvers import (
    SolverConfig,
    block_descent,
    branch_and_bound,
    brute_force,
    evaluate_layout,
    greedy_assignment,
    induced_level1_assignment,
    random_assignment,
    solve_hierarchical,
    solve_level1,
    tabu_search,
)
from storelayout.store import build_exposure_matrices


def small_fixture(group_sizes=(2, 2), records=None):
    graph = line_store(sum(group_sizes), group_sizes)
    catalog = catalog_for(group_sizes)
    if records is None:
        sub_ids = [s.subcategory_id for s in catalog.subcategories]
        records = [("t1", sid) for sid in sub_ids]
        records += [("t2", sub_ids[0]), ("t2", sub_ids[-1])]
    txns = load_transactions(records, catalog)
    matrices = expected_transitions(txns, catalog)
    exposures = build_exposure_matrices(graph)
    return graph, catalog, matrices, exposures


class TestBruteForce:
    def test_matches_enumeration_oracle(self):
        rng = Random(211)
        for trial in range(20):
            if trial % 2 == 0:
                inst = random_level1_instance(rng, rng.randint(2, 5))
            else:
                inst = random_level2_instance(rng, (rng.randint(1, 3), rng.randint(1, 3)))
            result = brute_force(inst)
            assert result.objective == pytest.approx(enumerate_optimum(inst), rel=1e-12)
            assert result.certified and result.gap == 0.0
            assert check_feasible(inst, result.assignment).ok

    def test_cap_refuses_large_instances(self):
        rng = Random(223)
        inst = random_level1_instance(rng, 5, full_eligibility=True)
        with pytest.raises(ModelError):
            brute_force(inst, SolverConfig(brute_force_cap=4))

    def test_single_node_instance(self):
        inst = random_level2_instance(Random(2), (1,))
        result = brute_force(inst)
        assert result.objective == pytest.approx(enumerate_optimum(inst))


class TestBranchAndBound:
    def test_agrees_with_brute_force_exactly(self):
        rng = Random(227)
        for trial in range(30):
            if trial % 2 == 0:
                inst = random_level1_instance(rng, rng.randint(2, 5))
            else:
                inst = random_level2_instance(rng, (rng.randint(1, 3), rng.randint(1, 3)))
            exact = brute_force(inst)
            bnb = branch_and_bound(inst)
            assert bnb.objective == exact.objective  # bit-equal, same evaluator
            assert bnb.certified
            assert bnb.bound is not None and bnb.bound >= bnb.objective - 1e-9

    def test_prunes_against_enumeration_node_count(self):
        rng = Random(229)
        inst = random_level1_instance(rng, 5, full_eligibility=True)
        exact = brute_force(inst)
        bnb = branch_and_bound(inst)
        assert bnb.objective == exact.objective
        assert bnb.nodes > 0

    def test_node_limit_downgrades_certification(self):
        rng = Random(233)
        inst = random_level1_instance(rng, 5, full_eligibility=True)
        result = branch_and_bound(inst, SolverConfig(node_limit=40))
        if not result.certified:
            assert result.bound is not None and result.bound >= result.objective
            assert result.gap is not None and result.gap >= 0.0
            assert any("node limit" in note for note in result.notes)

    def test_collects_pool_within_gap(self):
        from storelayout.qap import SolutionPool

        rng = Random(239)
        inst = random_level1_instance(rng, 4, full_eligibility=True)
        pool = SolutionPool(inst, capacity=50, gap=0.05)
        branch_and_bound(inst, pool=pool)
        best = pool.best_objective
        for entry in pool.entries:
            assert entry.objective >= best - 0.05 * abs(best) - 1e-9


class TestTabuSearch:
    def test_deterministic_per_seed(self):
        rng = Random(241)
        inst = random_level1_instance(rng, 6, full_eligibility=True)
        cfg = SolverConfig(seed=3, iteration_limit=300, restarts=2)
        a = tabu_search(inst, cfg)
        b = tabu_search(inst, cfg)
        assert a.objective == b.objective
        assert a.assignment == b.assignment

    def test_never_worse_than_initial(self):
        rng = Random(251)
        for trial in range(10):
            inst = random_level1_instance(rng, 5, full_eligibility=True)
            start = inst.assignment_from_permutation(random_assignment(inst, Random(trial)))
            start_obj = objective_of_permutation(inst, inst.permutation_of(start))
            result = tabu_search(
                inst, SolverConfig(seed=trial, iteration_limit=100, restarts=1), initial=start
            )
            assert result.objective >= start_obj - 1e-12

    def test_usually_finds_small_optimum(self):
        rng = Random(257)
        hits = 0
        trials = 20
        for trial in range(trials):
            inst = random_level1_instance(rng, 5, full_eligibility=True)
            exact = brute_force(inst)
            got = tabu_search(inst, SolverConfig(seed=trial, iteration_limit=400, restarts=3))
            if got.objective >= exact.objective - 1e-9:
                hits += 1
        assert hits >= int(0.95 * trials)

    def test_respects_eligibility(self):
        rng = Random(263)
        inst = random_level1_instance(rng, 6)
        result = tabu_search(inst, SolverConfig(seed=0, iteration_limit=200, restarts=2))
        assert check_feasible(inst, result.assignment).ok


class TestBlockDescent:
    def test_requires_level2(self):
        rng = Random(269)
        inst = random_level1_instance(rng, 4)
        with pytest.raises(InputError):
            block_descent(inst)

    def test_single_block_reaches_optimum(self):
        rng = Random(271)
        inst = random_level2_instance(rng, (4,))
        result = block_descent(inst)
        assert result.objective == pytest.approx(brute_force(inst).objective, rel=1e-12)

    def test_monotone_from_any_start(self):
        rng = Random(277)
        inst = random_level2_instance(rng, (3, 2, 2))
        for trial in range(5):
            start_perm = random_assignment(inst, Random(trial))
            start = inst.assignment_from_permutation(start_perm)
            start_obj = objective_of_permutation(inst, start_perm)
            result = block_descent(inst, initial=start)
            assert result.objective >= start_obj - 1e-12
            assert check_feasible(inst, result.assignment).ok

    def test_all_singletons_returns_start(self):
        rng = Random(281)
        inst = random_level2_instance(rng, (1, 1, 1))
        result = block_descent(inst)
        assert result.iterations == 1  # one cycle, nothing movable

    def test_oversized_block_falls_back_to_tabu(self):
        rng = Random(283)
        inst = random_level2_instance(rng, (4,))
        cfg = SolverConfig(block_exhaustive_cap=2, block_tabu_iterations=300)
        result = block_descent(inst, cfg)
        assert any("tabu fallback" in note for note in result.notes)
        exact = brute_force(inst)
        assert result.objective <= exact.objective + 1e-9


class TestStartingAssignments:
    def test_greedy_feasible_on_restricted_instances(self):
        rng = Random(293)
        for trial in range(15):
            inst = random_level1_instance(rng, rng.randint(2, 6))
            perm = greedy_assignment(inst)
            assert all(inst.eligibility[i, perm[i]] for i in range(inst.n))
            assert sorted(perm.tolist()) == list(range(inst.n))

    def test_random_feasible_and_seed_deterministic(self):
        rng = Random(307)
        for trial in range(15):
            inst = random_level2_instance(rng, (rng.randint(1, 3), rng.randint(1, 3)))
            a = random_assignment(inst, Random(trial))
            b = random_assignment(inst, Random(trial))
            assert np.array_equal(a, b)
            assert all(inst.eligibility[i, a[i]] for i in range(inst.n))


class TestSolveLevel1:
    def test_pool_head_is_certified_optimum(self):
        rng = Random(311)
        graph, catalog, matrices, exposures = small_fixture((2, 2))
        inst = build_level1_instance(exposures, matrices)
        pool = solve_level1(inst, SolverConfig(pool_capacity=5, pool_gap=0.2))
        exact = brute_force(inst)
        assert pool.best_objective == exact.objective
        objs = [e.objective for e in pool.entries]
        assert objs == sorted(objs, reverse=True)

    def test_large_free_count_uses_tabu(self):
        rng = Random(313)
        inst = random_level1_instance(rng, 6, full_eligibility=True)
        cfg = SolverConfig(exact_free_limit=2, iteration_limit=200, restarts=2)
        pool = solve_level1(inst, cfg)
        assert len(pool) >= 1


class TestHierarchical:
    def test_pool_growth_never_hurts(self):
        graph, catalog, matrices, exposures = small_fixture((2, 2))
        base = SolverConfig(seed=5, iteration_limit=300, pool_gap=0.25)
        small = solve_hierarchical(
            exposures, matrices, None, None, catalog, graph,
            config=SolverConfig(**{**base.__dict__, "pool_capacity": 1}),
        )
        large = solve_hierarchical(
            exposures, matrices, None, None, catalog, graph,
            config=SolverConfig(**{**base.__dict__, "pool_capacity": 10}),
        )
        assert large.objective >= small.objective - 1e-12
        assert len(large.candidates) >= len(small.candidates)

    def test_result_shape(self):
        graph, catalog, matrices, exposures = small_fixture((2, 1))
        result = solve_hierarchical(
            exposures, matrices, None, None, catalog, graph,
            config=SolverConfig(seed=1, pool_capacity=3),
        )
        assert result.solver == "hierarchical"
        assert result.level1_assignment is not None
        assert result.level1_objective is not None
        assert result.candidates
        for idx, l1_obj, l2_obj in result.candidates:
            assert isinstance(idx, int)
        # final assignment is consistent with the winning strategic layout
        induced = induced_level1_assignment(result.assignment, catalog, graph)
        assert induced == result.level1_assignment

    def test_separate_tactical_transitions(self):
        graph, catalog, matrices, exposures = small_fixture((2, 2))
        explicit = solve_hierarchical(
            exposures, matrices, matrices, None, catalog, graph,
            config=SolverConfig(seed=2, pool_capacity=2),
        )
        reused = solve_hierarchical(
            exposures, matrices, None, None, catalog, graph,
            config=SolverConfig(seed=2, pool_capacity=2),
        )
        assert explicit.objective == reused.objective
        assert explicit.assignment == reused.assignment

    def test_axis_mismatch_rejected(self):
        graph, catalog, matrices, exposures = small_fixture((2, 2))
        _, other_catalog, other_matrices, _ = small_fixture((2, 1))
        with pytest.raises(InputError):
            solve_hierarchical(
                exposures, matrices, other_matrices, None, catalog, graph
            )

    def test_beats_or_matches_tactical_exhaustion_of_identity_anchor(self):
        # the driver may pick a different strategic layout, never a worse one
        graph, catalog, matrices, exposures = small_fixture((2, 2))
        result = solve_hierarchical(
            exposures, matrices, None, None, catalog, graph,
            config=SolverConfig(seed=0, pool_capacity=10, pool_gap=0.5),
        )
        anchor = Assignment.from_mapping({"C1": "L1", "C2": "L2"})
        inst = build_level2_instance(exposures, matrices, anchor, catalog, graph)
        assert result.objective >= brute_force(inst).objective - 1e-9


class TestLayoutEvaluation:
    def test_identity_baseline_means_zero_delta(self):
        graph, catalog, matrices, exposures = small_fixture((2, 1))
        layout = Assignment.from_mapping({"u1": "s1", "u2": "s2", "u3": "s3"})
        report = evaluate_layout(layout, exposures, matrices, catalog, graph, baseline=layout)
        assert report.exposure_delta_pct == pytest.approx(0.0, abs=1e-12)
        assert report.distance_delta_pct == pytest.approx(0.0, abs=1e-12)
        assert report.baseline_objective == report.objective

    def test_objective_matches_instance_evaluation(self):
        graph, catalog, matrices, exposures = small_fixture((2, 1))
        layout = Assignment.from_mapping({"u1": "s2", "u2": "s1", "u3": "s3"})
        report = evaluate_layout(layout, exposures, matrices, catalog, graph)
        anchor = induced_level1_assignment(layout, catalog, graph)
        inst = build_level2_instance(exposures, matrices, anchor, catalog, graph)
        pinned = Assignment.from_mapping(
            {**layout.mapping, "check-in": "entrance", "check-out": "exit"}
        )
        want = objective_of_permutation(inst, inst.permutation_of(pinned))
        assert report.objective == pytest.approx(want, rel=1e-12)
        assert report.transaction_count == matrices.transaction_count
        assert report.travel_distance > 0

    def test_split_category_rejected(self):
        graph, catalog, matrices, exposures = small_fixture((2, 2))
        # u1 and u2 belong to C1 but sit in different locations
        layout = Assignment.from_mapping(
            {"u1": "s1", "u2": "s3", "u3": "s2", "u4": "s4"}
        )
        with pytest.raises(ValidationError):
            evaluate_layout(layout, exposures, matrices, catalog, graph)

    def test_unknown_sublocation_rejected(self):
        graph, catalog, matrices, exposures = small_fixture((2, 1))
        layout = Assignment.from_mapping({"u1": "s1", "u2": "s2", "u3": "nowhere"})
        with pytest.raises(ValidationError):
            evaluate_layout(layout, exposures, matrices, catalog, graph)


class TestInducedLevel1:
    def test_round_trip_from_level2_instance(self):
        graph, catalog, matrices, exposures = small_fixture((2, 1))
        anchor = Assignment.from_mapping({"C1": "L1", "C2": "L2"})
        inst = build_level2_instance(exposures, matrices, anchor, catalog, graph)
        layout = inst.assignment_from_permutation(np.arange(inst.n))
        induced = induced_level1_assignment(layout, catalog, graph)
        got = {k: v for k, v in induced.pairs if not k.startswith("check")}
        assert got == anchor.mapping
