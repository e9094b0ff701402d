"""Exact and heuristic solvers for restricted QAP instances.

All solvers maximize, respect eligibility, and evaluate candidates through
the one canonical objective routine in qap, so identical assignments always
score bit-identically. Everything is deterministic given (seed, config) in
single-worker mode.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from random import Random
from time import perf_counter

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .demand import CHECK_IN, CHECK_OUT, Catalog, TransitionMatrices
from .errors import InputError, ModelError, ValidationError
from .qap import (
    Assignment,
    QapInstance,
    SolutionPool,
    build_level1_instance,
    build_level2_instance,
    check_feasible,
    objective_of_permutation,
    swap_delta_matrix,
)
from .store import ENTRANCE_POS, EXIT_POS, ExposureMatrices, StoreGraph

# Cost sentinel marking ineligible cells in bound matrices; any assignment
# forced onto one signals an infeasible completion.
_FORBIDDEN = -1e15


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver knobs. Defaults target supermarket-scale stores (tens
    of positions) finishing in minutes on commodity hardware."""

    seed: int = 0
    time_limit: float | None = None
    iteration_limit: int = 50_000
    tenure_range: tuple[float, float] = (0.1, 0.5)
    restarts: int = 5
    node_limit: int = 10_000_000
    pool_capacity: int = 10
    pool_gap: float = 0.001
    brute_force_cap: int = 9
    block_exhaustive_cap: int = 7
    block_tabu_iterations: int = 2_000
    exact_free_limit: int = 11
    workers: int = 1

    def __post_init__(self):
        if self.pool_capacity < 1:
            raise InputError("pool capacity must be >= 1")
        if not (0 <= self.pool_gap < 1):
            raise InputError("pool gap must be in [0, 1)")
        for label, value in (
            ("iteration_limit", self.iteration_limit),
            ("restarts", self.restarts),
            ("node_limit", self.node_limit),
            ("brute_force_cap", self.brute_force_cap),
            ("workers", self.workers),
        ):
            if value < 1:
                raise InputError(f"{label} must be positive")
        if self.time_limit is not None and self.time_limit <= 0:
            raise InputError("time_limit must be positive")
        lo, hi = self.tenure_range
        if not (0 < lo <= hi):
            raise InputError("tenure_range must satisfy 0 < lo <= hi")


@dataclass
class SolveResult:
    """Outcome of one solver run: best assignment plus trace fields mirroring
    the usual reporting columns (objective, gap, time)."""

    assignment: Assignment
    objective: float
    bound: float | None = None
    gap: float | None = None
    wall_time: float = 0.0
    iterations: int = 0
    restarts: int = 0
    nodes: int = 0
    certified: bool = False
    solver: str = ""
    notes: tuple[str, ...] = ()


@dataclass
class HierarchicalResult(SolveResult):
    """Final tactical result plus the strategic assignment that induced it
    and the per-pool-candidate trace."""

    level1_assignment: Assignment | None = None
    level1_objective: float = 0.0
    # (pool index, strategic objective, tactical objective) per candidate
    candidates: tuple[tuple[int, float, float], ...] = ()


@dataclass
class ExposureReport:
    """Evaluation of one tactical layout: exposure objective and expected
    travel distance, with percentage deltas when a baseline is given."""

    objective: float
    travel_distance: float
    transaction_count: int
    baseline_objective: float | None = None
    baseline_distance: float | None = None
    exposure_delta_pct: float | None = None
    distance_delta_pct: float | None = None


def _mix_seed(seed: int, salt: int) -> int:
    return (seed * 1_000_003 + salt) % (2**63)


def _gap_of(bound: float | None, best: float) -> float | None:
    if bound is None:
        return None
    if bound == 0:
        return 0.0 if best == 0 else None
    return max(0.0, (bound - best) / abs(bound))


def _better(obj: float, perm: np.ndarray, best_obj: float, best_perm: np.ndarray | None) -> bool:
    """Deterministic incumbent ranking: objective first, then lexicographic
    product-to-position order."""
    if best_perm is None or obj > best_obj:
        return True
    return obj == best_obj and tuple(perm) < tuple(best_perm)


# -- initial assignments ----------------------------------------------------------


def _matchable(elig: np.ndarray, rows: list[int], cols: list[int]) -> bool:
    """True when the remaining eligibility subgraph still has a perfect
    matching, so a partial assignment can be completed."""
    if not rows:
        return True
    sub = elig[np.ix_(rows, cols)]
    if sub.shape[0] != sub.shape[1]:
        return False
    matching = maximum_bipartite_matching(csr_matrix(sub), perm_type="column")
    return bool((matching >= 0).all())


def greedy_assignment(instance: QapInstance) -> np.ndarray:
    """Deterministic construction: place heavy-flow products first, each on
    the eligible free position with the best immediate objective gain that
    still leaves the rest completable."""
    n = instance.n
    flow, expo, elig = instance.flow, instance.exposure, instance.eligibility
    weight = flow.sum(axis=0) + flow.sum(axis=1)
    order = sorted(range(n), key=lambda i: (int(elig[i].sum()), -weight[i], i))
    perm = np.full(n, -1, dtype=np.int64)
    placed: list[int] = []
    used = np.zeros(n, dtype=bool)
    for step, i in enumerate(order):
        rest = order[step + 1 :]
        gains = []
        for k in np.flatnonzero(elig[i] & ~used):
            gain = flow[i, i] * expo[k, k]
            for j in placed:
                gain += flow[i, j] * expo[k, perm[j]] + flow[j, i] * expo[perm[j], k]
            gains.append((-gain, int(k)))
        gains.sort()
        for _, k in gains:
            used[k] = True
            if _matchable(elig, rest, list(np.flatnonzero(~used))):
                perm[i] = k
                placed.append(i)
                break
            used[k] = False
        else:
            raise ModelError("greedy construction could not complete an assignment")
    return perm


def random_assignment(instance: QapInstance, rng: Random) -> np.ndarray:
    """Random feasible permutation: random product order, random eligible
    position that keeps the remainder completable. Deterministic given rng."""
    n = instance.n
    elig = instance.eligibility
    order = list(range(n))
    rng.shuffle(order)
    perm = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    for step, i in enumerate(order):
        rest = order[step + 1 :]
        candidates = [int(k) for k in np.flatnonzero(elig[i] & ~used)]
        rng.shuffle(candidates)
        for k in candidates:
            used[k] = True
            if _matchable(elig, rest, list(np.flatnonzero(~used))):
                perm[i] = k
                break
            used[k] = False
        else:
            raise ModelError("random construction could not complete an assignment")
    return perm


# -- brute force ----------------------------------------------------------------


def brute_force(instance: QapInstance, config: SolverConfig | None = None) -> SolveResult:
    """Exhaustive enumeration of eligible bijections; the verification
    oracle. Refuses instances with more free products than the cap."""
    cfg = config or SolverConfig()
    free = instance.free_product_count()
    if free > cfg.brute_force_cap:
        raise ModelError(
            f"instance has {free} free products, above the brute-force cap {cfg.brute_force_cap}"
        )
    t0 = perf_counter()
    n = instance.n
    elig = instance.eligibility
    order = sorted(range(n), key=lambda i: (int(elig[i].sum()), i))
    perm = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    best_obj = float("-inf")
    best_perm: np.ndarray | None = None
    leaves = 0

    def descend(depth: int) -> None:
        nonlocal best_obj, best_perm, leaves
        if depth == n:
            leaves += 1
            obj = objective_of_permutation(instance, perm)
            if _better(obj, perm, best_obj, best_perm):
                best_obj = obj
                best_perm = perm.copy()
            return
        i = order[depth]
        for k in np.flatnonzero(elig[i] & ~used):
            perm[i] = k
            used[k] = True
            descend(depth + 1)
            used[k] = False
            perm[i] = -1

    descend(0)
    if best_perm is None:
        raise ModelError("no feasible assignment found by enumeration")
    return SolveResult(
        assignment=instance.assignment_from_permutation(best_perm),
        objective=best_obj,
        bound=best_obj,
        gap=0.0,
        wall_time=perf_counter() - t0,
        iterations=leaves,
        certified=True,
        solver="brute-force",
    )


# -- branch and bound --------------------------------------------------------------


def _node_bound(instance: QapInstance, order: list[int], depth: int, perm: np.ndarray,
                used: np.ndarray) -> float:
    """Upper bound on the best completion of a partial assignment.

    Exact fixed-fixed interaction plus a maximization linear-assignment
    relaxation over free products and positions. The per-cell optimistic
    cost couples interaction-with-fixed and self terms (exact given the
    cell) with sorted-dot-product bounds on free-free interactions; free-free
    totals are halved because each ordered pair is bounded once from its
    source row and once from its target column.
    """
    flow, expo, elig = instance.flow, instance.exposure, instance.eligibility
    fixed = order[:depth]
    free = order[depth:]
    pf = perm[fixed]
    if not free:
        return float((flow[np.ix_(fixed, fixed)] * expo[np.ix_(pf, pf)]).sum())
    slots = np.flatnonzero(~used)
    ff = float((flow[np.ix_(fixed, fixed)] * expo[np.ix_(pf, pf)]).sum())
    r = len(free)

    cost = np.outer(np.diag(flow)[free], np.diag(expo)[slots])
    if fixed:
        cost += flow[np.ix_(free, fixed)] @ expo[np.ix_(slots, pf)].T
        cost += flow[np.ix_(fixed, free)].T @ expo[np.ix_(pf, slots)]
    if r > 1:
        off = ~np.eye(r, dtype=bool)
        f_sub = flow[np.ix_(free, free)]
        e_sub = expo[np.ix_(slots, slots)]
        f_out = np.sort(f_sub[off].reshape(r, r - 1), axis=1)
        f_in = np.sort(f_sub.T[off].reshape(r, r - 1), axis=1)
        e_out = np.sort(e_sub[off].reshape(r, r - 1), axis=1)
        e_in = np.sort(e_sub.T[off].reshape(r, r - 1), axis=1)
        cost += 0.5 * (f_out @ e_out.T + f_in @ e_in.T)

    cost = np.where(elig[np.ix_(free, slots)], cost, _FORBIDDEN)
    rows, cols = linear_sum_assignment(cost, maximize=True)
    lap = float(cost[rows, cols].sum())
    if lap < _FORBIDDEN / 10:
        return float("-inf")
    return ff + lap


def branch_and_bound(
    instance: QapInstance,
    config: SolverConfig | None = None,
    pool: SolutionPool | None = None,
) -> SolveResult:
    """Depth-first exact search with bound-based pruning.

    Products are assigned in static fewest-eligible-first order. A node is
    pruned when its bound cannot beat the incumbent (minus the pool gap when
    collecting a pool, so near-optimal leaves survive). Exhausting the tree
    certifies optimality; hitting node/time limits downgrades to the root
    bound as the gap reference.
    """
    cfg = config or SolverConfig()
    t0 = perf_counter()
    deadline = t0 + cfg.time_limit if cfg.time_limit else None
    n = instance.n
    elig = instance.eligibility
    order = sorted(range(n), key=lambda i: (int(elig[i].sum()), i))
    perm = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=bool)
    best_obj = float("-inf")
    best_perm: np.ndarray | None = None
    nodes = 0
    limit_hit = False
    notes: list[str] = []
    gap_margin = pool.gap if pool is not None else 0.0

    root_bound = _node_bound(instance, order, 0, perm, used)

    def prune_ref() -> float:
        if best_perm is None:
            return float("-inf")
        tol = 1e-9 * max(1.0, abs(best_obj))
        return best_obj - gap_margin * abs(best_obj) - tol

    def descend(depth: int) -> None:
        nonlocal nodes, best_obj, best_perm, limit_hit
        if limit_hit:
            return
        nodes += 1
        if nodes > cfg.node_limit:
            limit_hit = True
            notes.append(f"node limit {cfg.node_limit} reached")
            return
        if deadline is not None and perf_counter() > deadline:
            limit_hit = True
            notes.append(f"time limit {cfg.time_limit}s reached")
            return
        if depth == n:
            obj = objective_of_permutation(instance, perm)
            if pool is not None:
                pool.offer(perm.copy(), obj)
            if _better(obj, perm, best_obj, best_perm):
                best_obj = obj
                best_perm = perm.copy()
            return
        i = order[depth]
        for k in np.flatnonzero(elig[i] & ~used):
            perm[i] = k
            used[k] = True
            if depth + 1 == n:
                descend(depth + 1)
            else:
                bound = _node_bound(instance, order, depth + 1, perm, used)
                if bound > prune_ref():
                    descend(depth + 1)
            used[k] = False
            perm[i] = -1
            if limit_hit:
                return

    descend(0)
    if best_perm is None:
        if limit_hit:
            raise ModelError("search limits hit before any feasible assignment was found")
        raise ModelError("no feasible assignment found")
    certified = not limit_hit
    bound = best_obj if certified else max(root_bound, best_obj)
    return SolveResult(
        assignment=instance.assignment_from_permutation(best_perm),
        objective=best_obj,
        bound=bound,
        gap=_gap_of(bound, best_obj),
        wall_time=perf_counter() - t0,
        nodes=nodes,
        certified=certified,
        solver="branch-and-bound",
        notes=tuple(notes),
    )


# -- tabu search -------------------------------------------------------------------


def _tabu_run(
    instance: QapInstance,
    start: np.ndarray,
    iterations: int,
    tenure_range: tuple[float, float],
    rng: Random,
    pool: SolutionPool | None,
    deadline: float | None,
    move_mask: np.ndarray | None = None,
) -> tuple[float, np.ndarray, int]:
    """One tabu run from a feasible permutation; returns (best objective,
    best permutation, iterations executed). Move selection scans the whole
    swap neighborhood each iteration via the vectorized delta matrix; a move
    is tabu only when BOTH products would return to recently held positions,
    and aspiration admits any move that beats the best known solution."""
    flow, expo, elig = instance.flow, instance.exposure, instance.eligibility
    n = instance.n
    perm = start.copy()
    cur = objective_of_permutation(instance, perm)
    best_obj = cur
    best_perm = perm.copy()
    if pool is not None:
        pool.offer(perm.copy(), cur)
    lo = max(1, round(tenure_range[0] * n))
    hi = max(lo, round(tenure_range[1] * n))
    tabu_until = np.zeros((n, n), dtype=np.int64)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    if move_mask is not None:
        upper = upper & move_mask
    done = 0
    for it in range(1, iterations + 1):
        if deadline is not None and perf_counter() > deadline:
            break
        done = it
        e1 = elig[:, perm]
        allowed = e1 & e1.T & upper
        if not allowed.any():
            break
        delta = swap_delta_matrix(flow, expo, perm)
        t1 = tabu_until[:, perm] >= it
        tabu_move = t1 & t1.T
        candidate = cur + delta
        admissible = allowed & (~tabu_move | (candidate > best_obj))
        if not admissible.any():
            admissible = allowed
        scores = np.where(admissible, delta, -np.inf)
        a, b = divmod(int(np.argmax(scores)), n)
        tenure = rng.randint(lo, hi)
        tabu_until[a, perm[a]] = it + tenure
        tabu_until[b, perm[b]] = it + tenure
        perm[a], perm[b] = perm[b], perm[a]
        cur += float(delta[a, b])
        margin = 1e-6 * max(1.0, abs(best_obj))
        if pool is not None:
            margin += pool.gap * abs(best_obj)
        if cur >= best_obj - margin:
            canon = objective_of_permutation(instance, perm)
            cur = canon
            if pool is not None:
                pool.offer(perm.copy(), canon)
            if _better(canon, perm, best_obj, best_perm):
                best_obj = canon
                best_perm = perm.copy()
    return best_obj, best_perm, done


def tabu_search(
    instance: QapInstance,
    config: SolverConfig | None = None,
    initial: Assignment | None = None,
    pool: SolutionPool | None = None,
) -> SolveResult:
    """Multi-restart tabu search. Restart 0 starts from the given assignment
    (or the deterministic greedy construction); later restarts start from
    seeded random feasible assignments. Never returns a worse objective than
    its starting assignment."""
    cfg = config or SolverConfig()
    t0 = perf_counter()
    deadline = t0 + cfg.time_limit if cfg.time_limit else None
    if initial is not None:
        start0 = instance.permutation_of(initial)
    else:
        start0 = greedy_assignment(instance)

    def one_restart(r: int) -> tuple[float, np.ndarray, int]:
        rng = Random(_mix_seed(cfg.seed, r))
        start = start0 if r == 0 else random_assignment(instance, rng)
        return _tabu_run(
            instance, start, cfg.iteration_limit, cfg.tenure_range, rng, pool, deadline
        )

    if cfg.workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool_exec:
            results = list(pool_exec.map(one_restart, range(cfg.restarts)))
    else:
        results = [one_restart(r) for r in range(cfg.restarts)]

    best_obj = float("-inf")
    best_perm: np.ndarray | None = None
    iterations = 0
    for obj, perm, done in results:
        iterations += done
        if _better(obj, perm, best_obj, best_perm):
            best_obj = obj
            best_perm = perm
    return SolveResult(
        assignment=instance.assignment_from_permutation(best_perm),
        objective=best_obj,
        wall_time=perf_counter() - t0,
        iterations=iterations,
        restarts=cfg.restarts,
        solver="tabu",
    )


# -- block coordinate descent -------------------------------------------------------


def block_descent(
    instance: QapInstance,
    config: SolverConfig | None = None,
    initial: Assignment | None = None,
) -> SolveResult:
    """Cyclic within-block optimization for tactical instances.

    Visits category blocks in fixed order; small blocks are optimized
    exhaustively over within-block permutations, oversized ones fall back to
    a within-block tabu run. Stops when a full cycle brings no strict
    improvement, so the objective trace is non-decreasing and finite.
    """
    if instance.level != "level2" or not instance.blocks:
        raise InputError("block_descent requires a level2 instance with blocks")
    cfg = config or SolverConfig()
    t0 = perf_counter()
    deadline = t0 + cfg.time_limit if cfg.time_limit else None
    perm = instance.permutation_of(initial) if initial is not None else greedy_assignment(instance)
    cur = objective_of_permutation(instance, perm)
    notes: list[str] = []
    fallback_blocks = set()
    block_rows = [
        np.array([instance.product_index(p) for p in blk.product_ids], dtype=np.int64)
        for blk in instance.blocks
    ]
    cycles = 0
    improved = True
    while improved:
        improved = False
        cycles += 1
        for bi, blk in enumerate(instance.blocks):
            rows = block_rows[bi]
            if len(rows) == 1:
                continue
            if deadline is not None and perf_counter() > deadline:
                notes.append(f"time limit {cfg.time_limit}s reached")
                improved = False
                break
            if len(rows) <= cfg.block_exhaustive_cap:
                slots = perm[rows]
                best_local = cur
                best_order: tuple[int, ...] | None = None
                for cand in itertools.permutations(slots.tolist()):
                    perm[rows] = cand
                    obj = objective_of_permutation(instance, perm)
                    if obj > best_local:
                        best_local = obj
                        best_order = cand
                if best_order is not None:
                    perm[rows] = best_order
                    cur = best_local
                    improved = True
                else:
                    perm[rows] = slots
            else:
                if blk.category_id not in fallback_blocks:
                    fallback_blocks.add(blk.category_id)
                    notes.append(
                        f"block {blk.category_id!r} above exhaustive cap; tabu fallback"
                    )
                mask = np.zeros((instance.n, instance.n), dtype=bool)
                mask[np.ix_(rows, rows)] = True
                rng = Random(_mix_seed(cfg.seed, 7_919 * (bi + 1) + cycles))
                obj, new_perm, _ = _tabu_run(
                    instance,
                    perm,
                    cfg.block_tabu_iterations,
                    cfg.tenure_range,
                    rng,
                    None,
                    deadline,
                    move_mask=mask,
                )
                if obj > cur:
                    perm = new_perm
                    cur = obj
                    improved = True
    return SolveResult(
        assignment=instance.assignment_from_permutation(perm),
        objective=cur,
        wall_time=perf_counter() - t0,
        iterations=cycles,
        solver="block-descent",
        notes=tuple(notes),
    )


# -- pooled strategic solve and the two-level driver ----------------------------------


def solve_level1(instance: QapInstance, config: SolverConfig | None = None) -> SolutionPool:
    """Pool of near-optimal strategic assignments: exact branch-and-bound
    when the free-product count is small enough to certify, tabu restarts
    otherwise."""
    cfg = config or SolverConfig()
    pool = SolutionPool(instance, capacity=cfg.pool_capacity, gap=cfg.pool_gap)
    if instance.free_product_count() <= cfg.exact_free_limit:
        branch_and_bound(instance, cfg, pool=pool)
    else:
        tabu_search(instance, cfg, pool=pool)
    if len(pool) == 0:
        raise ModelError("strategic solve produced an empty solution pool")
    return pool


def _capacity_eligibility(eligibility, catalog: Catalog, graph: StoreGraph):
    """Strategic eligibility restricted to locations with exactly as many
    sublocations as the category has subcategories. Any pool member must
    induce a buildable tactical instance, so size-mismatched pairs are
    excluded up front rather than discovered mid-refinement."""
    by_size: dict[int, list[str]] = {}
    for loc in graph.locations:
        by_size.setdefault(len(loc.sublocation_ids), []).append(loc.location_id)
    out: dict[str, list[str]] = {}
    for cat in catalog.categories:
        cid = cat.category_id
        fitting = by_size.get(len(catalog.subcategories_of(cid)), [])
        allowed = fitting if eligibility is None or cid not in eligibility else [
            lid for lid in eligibility[cid] if lid in fitting
        ]
        if not allowed:
            raise ModelError(
                f"category {cid!r} has no location with "
                f"{len(catalog.subcategories_of(cid))} sublocations"
            )
        out[cid] = allowed
    return out


def solve_hierarchical(
    exposures: ExposureMatrices,
    transitions_l1: TransitionMatrices,
    transitions_l2: TransitionMatrices | None,
    eligibility,
    catalog: Catalog,
    graph: StoreGraph,
    config: SolverConfig | None = None,
) -> HierarchicalResult:
    """Two-level sequential driver.

    Solves the strategic problem for a pool of near-optimal category
    layouts, then solves the induced tactical problem for each pool member
    (block descent refined by tabu) and keeps the best final layout. Each
    candidate gets an identical, pool-size-independent budget seeded by its
    pool index, so growing the pool can only improve the final objective.

    The two levels may draw flows from different transition estimates
    (say, expected strategic flows but one sampled tactical realization);
    passing None for the tactical matrices reuses the strategic ones.
    """
    cfg = config or SolverConfig()
    if transitions_l2 is None:
        transitions_l2 = transitions_l1
    if transitions_l1.sub_axis != transitions_l2.sub_axis:
        raise InputError("strategic and tactical transition matrices disagree on axes")
    t0 = perf_counter()
    effective = _capacity_eligibility(eligibility, catalog, graph)
    l1_instance = build_level1_instance(exposures, transitions_l1, effective)
    pool = solve_level1(l1_instance, cfg)

    per_candidate = replace(cfg, restarts=1)
    best: SolveResult | None = None
    best_entry = None
    candidates: list[tuple[int, float, float]] = []
    notes: list[str] = []
    iterations = 0
    for idx, entry in enumerate(pool.entries):
        l2_instance = build_level2_instance(
            exposures, transitions_l2, entry.assignment, catalog, graph
        )
        cand_cfg = replace(per_candidate, seed=_mix_seed(cfg.seed, 100_003 + idx))
        descended = block_descent(l2_instance, cand_cfg)
        refined = tabu_search(
            l2_instance, cand_cfg, initial=descended.assignment
        )
        result = refined if refined.objective >= descended.objective else descended
        notes.extend(descended.notes)
        iterations += descended.iterations + refined.iterations
        candidates.append((idx, entry.objective, result.objective))
        if best is None or result.objective > best.objective:
            best = result
            best_entry = entry
    if best is None or best_entry is None:
        raise ModelError("strategic pool was empty; nothing to refine")
    return HierarchicalResult(
        assignment=best.assignment,
        objective=best.objective,
        wall_time=perf_counter() - t0,
        iterations=iterations,
        restarts=cfg.restarts,
        solver="hierarchical",
        notes=tuple(notes),
        level1_assignment=best_entry.assignment,
        level1_objective=best_entry.objective,
        candidates=tuple(candidates),
    )


# -- layout evaluation ------------------------------------------------------------


def induced_level1_assignment(
    assignment: Assignment, catalog: Catalog, graph: StoreGraph
) -> Assignment:
    """Category-to-location map implied by a subcategory-to-sublocation map;
    rejects layouts that scatter one category over several locations."""
    parent_loc = {s.sublocation_id: s.parent_location_id for s in graph.sublocations}
    induced: dict[str, str] = {}
    for sid, kid in assignment.pairs:
        if sid in (CHECK_IN, CHECK_OUT):
            continue
        cid = catalog.category_of(sid)
        if kid not in parent_loc:
            raise ValidationError(f"unknown sublocation {kid!r} in layout")
        lid = parent_loc[kid]
        if induced.setdefault(cid, lid) != lid:
            raise ValidationError(
                f"category {cid!r} is split across locations {induced[cid]!r} and {lid!r}"
            )
    induced[CHECK_IN] = ENTRANCE_POS
    induced[CHECK_OUT] = EXIT_POS
    return Assignment.from_mapping(induced)


def _layout_metrics(
    assignment: Assignment,
    exposures: ExposureMatrices,
    transitions: TransitionMatrices,
    catalog: Catalog,
    graph: StoreGraph,
) -> tuple[float, float]:
    l1 = induced_level1_assignment(assignment, catalog, graph)
    instance = build_level2_instance(exposures, transitions, l1, catalog, graph)
    mapping = assignment.mapping
    if CHECK_IN not in mapping:
        # dummy placements are forced, so accept layouts that omit them
        mapping[CHECK_IN] = ENTRANCE_POS
        mapping[CHECK_OUT] = EXIT_POS
        assignment = Assignment.from_mapping(mapping)
    report = check_feasible(instance, assignment)
    if not report.ok:
        raise ValidationError("infeasible layout: " + "; ".join(report.violations))
    perm = instance.permutation_of(assignment)
    exposure_total = objective_of_permutation(instance, perm)
    distance_total = float(
        (transitions.sub_transitions * exposures.sub_distance[np.ix_(perm, perm)]).sum()
    )
    return exposure_total, distance_total


def evaluate_layout(
    assignment: Assignment,
    exposures: ExposureMatrices,
    transitions: TransitionMatrices,
    catalog: Catalog,
    graph: StoreGraph,
    baseline: Assignment | None = None,
) -> ExposureReport:
    """Total exposure and flow-weighted travel distance of a tactical
    layout, with percentage deltas against an optional baseline layout."""
    objective_value, distance = _layout_metrics(assignment, exposures, transitions, catalog, graph)
    report = ExposureReport(
        objective=objective_value,
        travel_distance=distance,
        transaction_count=transitions.transaction_count,
    )
    if baseline is not None:
        base_obj, base_dist = _layout_metrics(baseline, exposures, transitions, catalog, graph)
        report.baseline_objective = base_obj
        report.baseline_distance = base_dist
        report.exposure_delta_pct = 100.0 * (objective_value - base_obj) / base_obj if base_obj else None
        report.distance_delta_pct = 100.0 * (distance - base_dist) / base_dist if base_dist else None
    return report
