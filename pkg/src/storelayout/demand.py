"""Catalog, transactions, and walk-transition matrices.

Shoppers are assumed to visit the categories in their basket in uniformly
random order, picking every purchased subcategory of a category (again in
uniformly random order) before moving on. Walks start at check-in and end at
check-out. Transition matrices count, per ordered product pair, how many
times a shopper walks from one to the other, either in exact expectation over
all visit orders or as one seeded sample.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from random import Random

import numpy as np

from .errors import InputError, ParseError, ValidationError
from .store import MODE_SUBLOCATION, StoreGraph, shortest_path

# Reserved ids for the dummy products that bracket every product axis.
CHECK_IN = "check-in"
CHECK_OUT = "check-out"

MODE_EXPECTED = "expected"
MODE_SAMPLED = "sampled"


@dataclass(frozen=True)
class Category:
    category_id: str
    name: str


@dataclass(frozen=True)
class Subcategory:
    subcategory_id: str
    name: str
    parent_category_id: str


@dataclass
class Catalog:
    """Product hierarchy. Dummy products check-in/check-out are implicit
    members, always first and last on both axes."""

    categories: tuple[Category, ...]
    subcategories: tuple[Subcategory, ...]

    def __post_init__(self):
        cat_ids = [c.category_id for c in self.categories]
        if len(set(cat_ids)) != len(cat_ids):
            raise InputError("duplicate category ids in catalog")
        sub_ids = [s.subcategory_id for s in self.subcategories]
        if len(set(sub_ids)) != len(sub_ids):
            raise InputError("duplicate subcategory ids in catalog")
        reserved = {CHECK_IN, CHECK_OUT}
        clashes = sorted(reserved & (set(cat_ids) | set(sub_ids)))
        if clashes:
            raise InputError(f"ids {clashes} are reserved for the dummy products")
        known_cats = set(cat_ids)
        self._parent: dict[str, str] = {}
        members: dict[str, list[str]] = {cid: [] for cid in cat_ids}
        for s in self.subcategories:
            if s.parent_category_id not in known_cats:
                raise InputError(
                    f"subcategory {s.subcategory_id} has unknown parent {s.parent_category_id!r}"
                )
            self._parent[s.subcategory_id] = s.parent_category_id
            members[s.parent_category_id].append(s.subcategory_id)
        empty = sorted(cid for cid, subs in members.items() if not subs)
        if empty:
            raise InputError(f"categories without subcategories: {empty}")
        self._members = {cid: tuple(subs) for cid, subs in members.items()}

    @property
    def category_axis(self) -> tuple[str, ...]:
        return (CHECK_IN, *(c.category_id for c in self.categories), CHECK_OUT)

    @property
    def subcategory_axis(self) -> tuple[str, ...]:
        return (CHECK_IN, *(s.subcategory_id for s in self.subcategories), CHECK_OUT)

    def category_of(self, subcategory_id: str) -> str:
        if subcategory_id in (CHECK_IN, CHECK_OUT):
            return subcategory_id
        try:
            return self._parent[subcategory_id]
        except KeyError:
            raise InputError(f"unknown subcategory id {subcategory_id!r}") from None

    def subcategories_of(self, category_id: str) -> tuple[str, ...]:
        if category_id in (CHECK_IN, CHECK_OUT):
            return (category_id,)
        try:
            return self._members[category_id]
        except KeyError:
            raise InputError(f"unknown category id {category_id!r}") from None

    def has_subcategory(self, subcategory_id: str) -> bool:
        return subcategory_id in self._parent


@dataclass(frozen=True)
class Transaction:
    """One basket: distinct purchased subcategories, stored in catalog order."""

    transaction_id: str
    subcategory_ids: tuple[str, ...]


@dataclass
class TransitionMatrices:
    """Walk counts at both product granularities.

    ``cat_transitions[i1, i2]`` counts walks from category ``cat_axis[i1]``
    to ``cat_axis[i2]``; same for subcategories. In expected mode the float
    entries are correctly rounded from exact rational accumulators, which are
    kept (``cat_exact`` / ``sub_exact``, index-pair keyed) so exact identities
    such as mass conservation stay checkable.
    """

    cat_axis: tuple[str, ...]
    sub_axis: tuple[str, ...]
    cat_transitions: np.ndarray
    sub_transitions: np.ndarray
    mode: str
    seed: int | None
    transaction_count: int
    cat_exact: dict[tuple[int, int], Fraction] | None = None
    sub_exact: dict[tuple[int, int], Fraction] | None = None

    def exact_mass(self, level: str) -> Fraction:
        """Total transition mass as an exact rational (sampled mode counts
        are integers, so exactness is free there)."""
        if level == "category":
            exact, dense = self.cat_exact, self.cat_transitions
        elif level == "subcategory":
            exact, dense = self.sub_exact, self.sub_transitions
        else:
            raise InputError(f"unknown level {level!r}")
        if exact is not None:
            return sum(exact.values(), Fraction(0))
        return Fraction(int(round(dense.sum())))


def load_transactions(records: Iterable[tuple[str, str]], catalog: Catalog) -> list[Transaction]:
    """Group (transaction_id, subcategory_id) records into transactions.

    Transactions keep first-appearance order; items are canonicalized to
    catalog order with duplicates collapsed. Unknown subcategories and dummy
    products are rejected in one pass, listing every offender.
    """
    groups: dict[str, set[str]] = {}
    order: list[str] = []
    unknown: set[str] = set()
    for tid, sid in records:
        if sid in (CHECK_IN, CHECK_OUT) or not catalog.has_subcategory(sid):
            unknown.add(sid)
            continue
        if tid not in groups:
            groups[tid] = set()
            order.append(tid)
        groups[tid].add(sid)
    if unknown:
        raise ValidationError(f"unknown subcategory ids in transactions: {sorted(unknown)}")
    rank = {sid: i for i, sid in enumerate(catalog.subcategory_axis)}
    out = []
    for tid in order:
        items = tuple(sorted(groups[tid], key=rank.__getitem__))
        out.append(Transaction(transaction_id=tid, subcategory_ids=items))
    return out


def read_transactions_csv(path: str, catalog: Catalog) -> list[Transaction]:
    """Read transactions from delimiter-separated text with header
    ``transaction_id,subcategory_id``, one purchased item per row."""
    records: list[tuple[str, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty transactions file", path=path, line=1) from None
        if [h.strip() for h in header] != ["transaction_id", "subcategory_id"]:
            raise ParseError(
                "expected header 'transaction_id,subcategory_id', got "
                + ",".join(header),
                path=path,
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", path=path, line=lineno)
            tid, sid = row[0].strip(), row[1].strip()
            if not tid or not sid:
                raise ParseError("empty transaction or subcategory id", path=path, line=lineno)
            records.append((tid, sid))
    return load_transactions(records, catalog)


def _basket_blocks(txn: Transaction, catalog: Catalog) -> list[tuple[str, list[str]]]:
    """Purchased subcategories grouped by parent category, catalog order."""
    by_cat: dict[str, list[str]] = {}
    cat_order: list[str] = []
    for sid in txn.subcategory_ids:
        cid = catalog.category_of(sid)
        if cid not in by_cat:
            by_cat[cid] = []
            cat_order.append(cid)
        by_cat[cid].append(sid)
    return [(cid, by_cat[cid]) for cid in cat_order]


def _category_contributions(txn: Transaction, catalog: Catalog):
    """Exact expected category-level transition counts for one basket.

    With m categories visited in uniformly random order, any fixed category
    is first (or last) with probability 1/m, and any ordered pair is adjacent
    with probability 1/m as well, so every leg type carries weight 1/m.
    """
    cats = [cid for cid, _ in _basket_blocks(txn, catalog)]
    m = len(cats)
    w = Fraction(1, m)
    for cid in cats:
        yield (CHECK_IN, cid), w
        yield (cid, CHECK_OUT), w
    for c1 in cats:
        for c2 in cats:
            if c1 != c2:
                yield (c1, c2), w


def _subcategory_contributions(txn: Transaction, catalog: Catalog):
    """Exact expected subcategory-level transition counts for one basket.

    Within a category block of g purchased subcategories, ordered pairs are
    adjacent with probability 1/g. A cross-category leg s1→s2 needs the
    second category to directly follow the first (1/m), s1 to be picked last
    in its block (1/g1) and s2 first in its (1/g2).
    """
    blocks = _basket_blocks(txn, catalog)
    m = len(blocks)
    for cid, subs in blocks:
        g = len(subs)
        w_edge = Fraction(1, m) * Fraction(1, g)
        for sid in subs:
            yield (CHECK_IN, sid), w_edge
            yield (sid, CHECK_OUT), w_edge
        w_within = Fraction(1, g)
        for s1 in subs:
            for s2 in subs:
                if s1 != s2:
                    yield (s1, s2), w_within
    for c1, subs1 in blocks:
        for c2, subs2 in blocks:
            if c1 == c2:
                continue
            for s1 in subs1:
                for s2 in subs2:
                    w = Fraction(1, m) * Fraction(1, len(subs1)) * Fraction(1, len(subs2))
                    yield (s1, s2), w


def _accumulate(contribs, axis: tuple[str, ...]) -> tuple[np.ndarray, dict[tuple[int, int], Fraction]]:
    index = {pid: i for i, pid in enumerate(axis)}
    exact: dict[tuple[int, int], Fraction] = {}
    for (a, b), w in contribs:
        key = (index[a], index[b])
        exact[key] = exact.get(key, Fraction(0)) + w
    dense = np.zeros((len(axis), len(axis)), dtype=np.float64)
    for (i, j), w in exact.items():
        dense[i, j] = float(w)
    return dense, exact


def expected_category_transitions(
    transactions: list[Transaction], catalog: Catalog
) -> tuple[np.ndarray, dict[tuple[int, int], Fraction]]:
    """Category-level expected transition matrix plus exact accumulators."""

    def gen():
        for txn in transactions:
            yield from _category_contributions(txn, catalog)

    return _accumulate(gen(), catalog.category_axis)


def expected_subcategory_transitions(
    transactions: list[Transaction], catalog: Catalog
) -> tuple[np.ndarray, dict[tuple[int, int], Fraction]]:
    """Subcategory-level expected transition matrix plus exact accumulators."""

    def gen():
        for txn in transactions:
            yield from _subcategory_contributions(txn, catalog)

    return _accumulate(gen(), catalog.subcategory_axis)


def expected_transitions(transactions: list[Transaction], catalog: Catalog) -> TransitionMatrices:
    """Both transition matrices in exact-expectation mode (seed-free)."""
    cat_dense, cat_exact = expected_category_transitions(transactions, catalog)
    sub_dense, sub_exact = expected_subcategory_transitions(transactions, catalog)
    return TransitionMatrices(
        cat_axis=catalog.category_axis,
        sub_axis=catalog.subcategory_axis,
        cat_transitions=cat_dense,
        sub_transitions=sub_dense,
        mode=MODE_EXPECTED,
        seed=None,
        transaction_count=len(transactions),
        cat_exact=cat_exact,
        sub_exact=sub_exact,
    )


def _realized_sequence(txn: Transaction, catalog: Catalog, rng: Random) -> list[str]:
    """One sampled visit order: category blocks shuffled, then each block
    shuffled internally (Fisher-Yates both times via Random.shuffle)."""
    blocks = _basket_blocks(txn, catalog)
    rng.shuffle(blocks)
    sequence: list[str] = []
    for _, subs in blocks:
        picks = list(subs)
        rng.shuffle(picks)
        sequence.extend(picks)
    return sequence


def sampled_transitions(
    transactions: list[Transaction], catalog: Catalog, seed: int
) -> TransitionMatrices:
    """One seeded realization of every basket's visit order, counted at both
    granularities. Bit-reproducible for a fixed seed and transaction order."""
    rng = Random(seed)
    cat_axis = catalog.category_axis
    sub_axis = catalog.subcategory_axis
    cat_idx = {pid: i for i, pid in enumerate(cat_axis)}
    sub_idx = {pid: i for i, pid in enumerate(sub_axis)}
    cat_counts = np.zeros((len(cat_axis), len(cat_axis)), dtype=np.int64)
    sub_counts = np.zeros((len(sub_axis), len(sub_axis)), dtype=np.int64)
    for txn in transactions:
        sequence = _realized_sequence(txn, catalog, rng)
        walk = [CHECK_IN, *sequence, CHECK_OUT]
        for a, b in zip(walk, walk[1:]):
            sub_counts[sub_idx[a], sub_idx[b]] += 1
        cat_walk = [CHECK_IN]
        for sid in sequence:
            cid = catalog.category_of(sid)
            if cid != cat_walk[-1]:
                cat_walk.append(cid)
        cat_walk.append(CHECK_OUT)
        for a, b in zip(cat_walk, cat_walk[1:]):
            cat_counts[cat_idx[a], cat_idx[b]] += 1
    return TransitionMatrices(
        cat_axis=cat_axis,
        sub_axis=sub_axis,
        cat_transitions=cat_counts.astype(np.float64),
        sub_transitions=sub_counts.astype(np.float64),
        mode=MODE_SAMPLED,
        seed=seed,
        transaction_count=len(transactions),
    )


def replay_paths(
    transactions: list[Transaction],
    assignment: Mapping[str, str],
    graph: StoreGraph,
    catalog: Catalog,
    seed: int,
) -> list[list[str]]:
    """Replay every basket as a node walk through the store.

    ``assignment`` maps subcategory ids to sublocation ids. Each basket gets
    one sampled visit order; the walk concatenates shortest paths entrance →
    picked sublocation centers → exit, sharing junction nodes.
    """
    rng = Random(seed)
    paths: list[list[str]] = []
    for txn in transactions:
        missing = [sid for sid in txn.subcategory_ids if sid not in assignment]
        if missing:
            raise ValidationError(
                f"transaction {txn.transaction_id}: no assigned position for {missing}"
            )
        sequence = _realized_sequence(txn, catalog, rng)
        stops = [graph.entrance_node]
        for sid in sequence:
            stops.append(graph.position_center(assignment[sid], MODE_SUBLOCATION))
        stops.append(graph.exit_node)
        walk: list[str] = [stops[0]]
        for a, b in zip(stops, stops[1:]):
            walk.extend(shortest_path(graph, a, b)[1:])
        paths.append(walk)
    return paths
