import random
import time

import pytest

from vexplore import store
from vexplore.errors import DataFormatError, GroupNotFound, ParameterError
from vexplore.mining import mine_closed_groups
from vexplore.simindex import (
    build_index,
    build_index_naive,
    jaccard,
    neighbors,
    truncation_length,
)
from vexplore.synth import SynthParams

from conftest import build_stack, random_action_corpus


def mask(*bits: int) -> int:
    m = 0
    for b in bits:
        m |= 1 << b
    return m


class TestJaccard:
    def test_direct_formula(self):
        assert jaccard(mask(1, 2, 3), mask(1, 2)) == pytest.approx(2 / 3)

    def test_identical(self):
        assert jaccard(mask(4, 9), mask(4, 9)) == 1.0

    def test_disjoint(self):
        assert jaccard(mask(1), mask(2)) == 0.0

    def test_both_empty(self):
        assert jaccard(0, 0) == 0.0

    def test_symmetry(self):
        rng = random.Random(3)
        for _ in range(200):
            a = rng.getrandbits(64)
            b = rng.getrandbits(64)
            assert jaccard(a, b) == jaccard(b, a)
            assert 0.0 <= jaccard(a, b) <= 1.0


class TestTruncation:
    def test_ten_percent_of_hundred(self):
        assert truncation_length(101, 0.1) == 10

    def test_ceiling_keeps_a_neighbor(self):
        assert truncation_length(2, 0.1) == 1
        assert truncation_length(11, 0.1) == 1

    def test_full_fraction(self):
        assert truncation_length(51, 1.0) == 50


class TestBuildIndex:
    def test_three_overlapping_groups_full(self):
        ds = _overlap_corpus()
        gs = mine_closed_groups(ds, 2)
        assert len(gs) == 3
        index = build_index(gs, 1.0)
        for row in index.neighbors:
            assert len(row) == 2
            sims = [s for _, s in row]
            assert sims == sorted(sims, reverse=True)

    def test_disjoint_groups_have_empty_lists(self):
        from vexplore.ingest import ActionRecord, DemographicSchema, UserProfile, build_dataset

        actions = [ActionRecord(f"u{i}", f"i{i}", 1.0) for i in range(4)]
        ds = build_dataset(actions, [UserProfile(f"u{i}", {}) for i in range(4)], DemographicSchema(()))
        gs = mine_closed_groups(ds, 1)
        index = build_index(gs, 1.0)
        assert all(row == [] for row in index.neighbors)

    def test_fraction_validation(self):
        ds = _overlap_corpus()
        gs = mine_closed_groups(ds, 2)
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(ParameterError):
                build_index(gs, bad)

    def test_similarities_in_unit_interval_and_no_self(self):
        rng = random.Random(17)
        for _ in range(20):
            ds = random_action_corpus(rng, max_users=30, max_tokens=9)
            gs = mine_closed_groups(ds, 2)
            if len(gs) < 2:
                continue
            index = build_index(gs, 1.0)
            for gid, row in enumerate(index.neighbors):
                for other, sim in row:
                    assert other != gid
                    assert 0.0 < sim <= 1.0

    def test_matches_naive_reference(self):
        rng = random.Random(29)
        checked = 0
        while checked < 25:
            ds = random_action_corpus(rng, max_users=35, max_tokens=10)
            gs = mine_closed_groups(ds, 2)
            if not 2 <= len(gs) <= 200:
                continue
            for f in (0.1, 0.5, 1.0):
                assert build_index(gs, f).neighbors == build_index_naive(gs, f).neighbors
            checked += 1

    def test_prefix_property(self):
        rng = random.Random(41)
        checked = 0
        while checked < 25:
            ds = random_action_corpus(rng, max_users=40, max_tokens=10)
            gs = mine_closed_groups(ds, 2)
            if not 2 <= len(gs) <= 200:
                continue
            full = build_index(gs, 1.0)
            for f in (0.1, 0.3):
                part = build_index(gs, f)
                keep = truncation_length(len(gs), f)
                for gid in range(len(gs)):
                    assert part.neighbors[gid] == full.neighbors[gid][:keep]
                    assert len(part.neighbors[gid]) == min(keep, len(full.neighbors[gid]))
            checked += 1


class TestNeighbors:
    def test_prefix_semantics(self):
        ds = _overlap_corpus()
        gs = mine_closed_groups(ds, 2)
        index = build_index(gs, 1.0)
        top = neighbors(index, 0, 1)
        assert len(top) == 1
        assert top == index.neighbors[0][:1]

    def test_limit_larger_than_list(self):
        ds = _overlap_corpus()
        gs = mine_closed_groups(ds, 2)
        index = build_index(gs, 1.0)
        assert neighbors(index, 0, 99) == index.neighbors[0]

    def test_unknown_gid(self):
        ds = _overlap_corpus()
        gs = mine_closed_groups(ds, 2)
        index = build_index(gs, 1.0)
        with pytest.raises(GroupNotFound):
            neighbors(index, 42, 1)


class TestIndexCache:
    def test_round_trip(self, spec_corpus, tmp_path):
        gs = mine_closed_groups(spec_corpus, 2)
        index = build_index(gs, 0.5)
        store.save_dataset(spec_corpus, tmp_path)
        store.save_index(index, spec_corpus, gs, tmp_path)
        loaded = store.load_index(spec_corpus, gs, tmp_path)
        assert loaded.neighbors == index.neighbors
        assert loaded.fraction == index.fraction

    def test_invalidation_on_fraction_mismatch(self, spec_corpus, tmp_path):
        gs = mine_closed_groups(spec_corpus, 2)
        store.save_index(build_index(gs, 0.5), spec_corpus, gs, tmp_path)
        with pytest.raises(DataFormatError):
            store.load_index(spec_corpus, gs, tmp_path, fraction=0.1)


def _overlap_corpus():
    """Exactly three closed groups at minsup 2, pairwise sharing one member."""
    from vexplore.ingest import ActionRecord, DemographicSchema, UserProfile, build_dataset

    txns = {"u1": ["a", "b"], "u2": ["b", "c"], "u3": ["a", "c"]}
    actions = [ActionRecord(u, i, 1.0) for u, items in txns.items() for i in items]
    return build_dataset(actions, [UserProfile(u, {}) for u in txns], DemographicSchema(()))


class TestBuildPerformance:
    def test_cooccurrence_build_beats_naive_scan_on_sparse_corpus(self):
        """On ~10k sparse groups the co-occurrence builder must be at least
        5x faster than the all-pairs reference (and produce identical lists)."""
        import gc

        params = SynthParams(
            users=2600,
            attributes=4,
            items=700,
            zipf=0.4,
            seed=11,
            cohorts=3000,
            cohort_size=9,
            cohort_items=3,
            cohort_levels=2,
            actions_per_user=(1, 3),
            attribute_values=12,
        )
        env = build_stack(params, minsup=4)
        groups = env["groups"]
        assert len(groups) >= 10_000

        gc.collect()
        gc.disable()  # keep collector pauses out of both timings
        try:
            fast_s = float("inf")
            for _ in range(2):
                t0 = time.perf_counter()
                fast = build_index(groups, 0.1)
                fast_s = min(fast_s, time.perf_counter() - t0)

            t0 = time.perf_counter()
            naive = build_index_naive(groups, 0.1)
            naive_s = time.perf_counter() - t0
        finally:
            gc.enable()

        assert fast.neighbors == naive.neighbors
        assert naive_s >= 5.0 * fast_s, f"fast={fast_s:.2f}s naive={naive_s:.2f}s"
