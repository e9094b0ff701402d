"""The bundled synthetic store: regeneration determinism and structural
invariants of the committed fixture files."""

from __future__ import annotations

import os

import pytest

from storelayout.demand import expected_transitions, read_transactions_csv
from storelayout.report import read_plan
from storelayout.solvers import evaluate_layout
from storelayout.store import build_exposure_matrices
from storelayout.storefile import load_store
from storelayout.synthetic import (
    DEFAULT_SEED,
    DEFAULT_TRANSACTIONS,
    STORE_NAME,
    build_synthetic_catalog,
    build_synthetic_eligibility,
    build_synthetic_graph,
    write_fixtures,
)

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "fixtures")
FIXTURE_EPOCH = "1718236800"


@pytest.fixture()
def pinned_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", FIXTURE_EPOCH)


class TestRegeneration:
    def test_committed_files_match_generator(self, tmp_path, pinned_epoch):
        write_fixtures(str(tmp_path), seed=DEFAULT_SEED, count=DEFAULT_TRANSACTIONS)
        for name in (
            "synthetic_store.json",
            "synthetic_transactions.csv",
            "current_layout.json",
        ):
            committed = open(os.path.join(FIXTURE_DIR, name), "rb").read()
            regenerated = open(tmp_path / name, "rb").read()
            assert committed == regenerated, f"{name} drifted from its generator"

    def test_different_seed_changes_transactions(self, tmp_path, pinned_epoch):
        write_fixtures(str(tmp_path / "a"), seed=DEFAULT_SEED, count=50)
        write_fixtures(str(tmp_path / "b"), seed=DEFAULT_SEED + 1, count=50)
        a = open(tmp_path / "a" / "synthetic_transactions.csv", "rb").read()
        b = open(tmp_path / "b" / "synthetic_transactions.csv", "rb").read()
        assert a != b


class TestStructure:
    def test_store_shape(self):
        graph = build_synthetic_graph()
        assert len(graph.nodes) == 46
        assert len(graph.edges) == 50
        assert len(graph.locations) == 20
        assert len(graph.sublocations) == 48
        assert graph.entrance_node != graph.exit_node

    def test_fixture_class_mix(self):
        graph = build_synthetic_graph()
        sizes = {}
        for loc in graph.locations:
            sizes.setdefault(loc.fixture_type, []).append(len(loc.sublocation_ids))
        assert set(sizes) == {"peripheral", "endcap", "aisle"}
        assert all(s == 4 for s in sizes["peripheral"])
        assert all(s == 1 for s in sizes["endcap"])
        assert all(s == 3 for s in sizes["aisle"])
        assert len(sizes["peripheral"]) == 4
        assert len(sizes["endcap"]) == 8
        assert len(sizes["aisle"]) == 8

    def test_catalog_mirrors_store_capacities(self):
        graph = build_synthetic_graph()
        catalog = build_synthetic_catalog()
        assert len(catalog.categories) == len(graph.locations)
        assert len(catalog.subcategories) == len(graph.sublocations)
        loc_sizes = sorted(len(l.sublocation_ids) for l in graph.locations)
        cat_sizes = sorted(
            len(catalog.subcategories_of(c.category_id)) for c in catalog.categories
        )
        assert loc_sizes == cat_sizes

    def test_eligibility_matches_fixture_classes(self):
        graph = build_synthetic_graph()
        catalog = build_synthetic_catalog()
        elig = build_synthetic_eligibility(graph, catalog)
        fixture_of = {l.location_id: l.fixture_type for l in graph.locations}
        size_to_fixture = {4: "peripheral", 1: "endcap", 3: "aisle"}
        for cat in catalog.categories:
            want = size_to_fixture[len(catalog.subcategories_of(cat.category_id))]
            for lid in elig[cat.category_id]:
                assert fixture_of[lid] == want

    def test_loaded_fixture_matches_builders(self):
        doc = load_store(os.path.join(FIXTURE_DIR, "synthetic_store.json"))
        assert doc.name == STORE_NAME
        built = build_synthetic_graph()
        assert [n.node_id for n in doc.graph.nodes] == [n.node_id for n in built.nodes]
        assert [l.location_id for l in doc.graph.locations] == [
            l.location_id for l in built.locations
        ]


class TestCurrentLayout:
    def test_plan_is_feasible_and_scores_match(self):
        doc = load_store(os.path.join(FIXTURE_DIR, "synthetic_store.json"))
        plan = read_plan(os.path.join(FIXTURE_DIR, "current_layout.json"))
        assert plan.store_name == doc.name
        transactions = read_transactions_csv(
            os.path.join(FIXTURE_DIR, "synthetic_transactions.csv"), doc.catalog
        )
        matrices = expected_transitions(transactions, doc.catalog)
        exposures = build_exposure_matrices(doc.graph)
        report = evaluate_layout(
            plan.assignment(), exposures, matrices, doc.catalog, doc.graph
        )
        assert report.objective == pytest.approx(plan.level2_objective, rel=1e-9)
        assert report.transaction_count == DEFAULT_TRANSACTIONS

    def test_every_subcategory_placed(self):
        doc = load_store(os.path.join(FIXTURE_DIR, "synthetic_store.json"))
        plan = read_plan(os.path.join(FIXTURE_DIR, "current_layout.json"))
        placed = set(plan.subcategory_to_sublocation)
        assert placed == {s.subcategory_id for s in doc.catalog.subcategories}
        slots = set(plan.subcategory_to_sublocation.values())
        assert len(slots) == len(placed)
