import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vexplore.errors import IneligibleGroup, ParameterError
from vexplore.explore import (
    FeedbackVector,
    GroupSelection,
    PoolEntry,
    Session,
    SessionParams,
    apply_feedback,
    candidate_pool,
    coverage,
    diversity,
    feedback_score,
    select_k,
    token_entity,
    unlearn,
    user_entity,
)
from vexplore.mining import Group, GroupSet, mine_closed_groups
from vexplore.simindex import build_index, jaccard

from conftest import build_stack, random_action_corpus
from vexplore.synth import SynthParams


def make_group(gid: int, members: set[int], descriptor=()) -> Group:
    m = 0
    for u in members:
        m |= 1 << u
    return Group(
        id=gid,
        descriptor=tuple(descriptor),
        members_mask=m,
        members=np.array(sorted(members), dtype=np.int32),
        support=len(members),
    )


def make_groupset(member_sets: list[set[int]], universe: int) -> GroupSet:
    groups = [make_group(i, s) for i, s in enumerate(member_sets)]
    return GroupSet(groups=groups, universe=universe, minsup=1)


def full_mask(n: int) -> int:
    return (1 << n) - 1


class TestDiversityCoverage:
    def test_two_disjoint_groups(self):
        assert diversity([0b0011, 0b1100]) == 1.0

    def test_identical_member_sets(self):
        assert diversity([0b0110, 0b0110]) == 0.0

    def test_three_group_mean(self):
        # pairwise jaccard 0.5, 0.0, 0.0 -> mean distance 5/6
        a, b, c = 0b0011, 0b1111, 0b110000
        assert jaccard(a, b) == 0.5 and jaccard(a, c) == 0.0 and jaccard(b, c) == 0.0
        assert diversity([a, b, c]) == pytest.approx(5 / 6)

    def test_singleton_is_maximally_diverse(self):
        assert diversity([0b1]) == 1.0

    def test_empty_selection_rejected(self):
        with pytest.raises(ParameterError):
            diversity([])

    def test_coverage_union_arithmetic(self):
        parent = full_mask(10)
        s1 = full_mask(5)  # users 0..4
        s2 = 0b11111000  # users 3..7
        assert coverage([s1, s2], parent) == pytest.approx(0.8)

    def test_coverage_identity(self):
        parent = 0b1011
        assert coverage([parent], parent) == 1.0

    def test_coverage_disjoint(self):
        assert coverage([0b100], 0b011) == 0.0

    def test_coverage_needs_parent(self):
        with pytest.raises(ParameterError):
            coverage([0b1], 0)


class TestFeedbackVector:
    def test_apply_spreads_uniformly(self):
        g = make_group(0, {0, 1}, descriptor=(5, 6, 7))
        fv = apply_feedback(FeedbackVector(), g, delta=0.1)
        assert len(fv) == 5
        assert all(v == pytest.approx(0.2) for v in fv.scores.values())
        assert fv.total() == pytest.approx(1.0)

    def test_reapplying_keeps_order_and_mass(self):
        g = make_group(0, {0, 1}, descriptor=(5,))
        fv = apply_feedback(FeedbackVector(), g, 0.1)
        fv2 = apply_feedback(fv, g, 0.1)
        assert fv2.total() == pytest.approx(1.0)
        assert sorted(fv.scores) == sorted(fv2.scores)

    def test_unrewarded_entity_share_decays(self):
        g1 = make_group(0, {0}, descriptor=(5,))
        g2 = make_group(1, {1}, descriptor=(6,))
        fv = apply_feedback(FeedbackVector(), g1, 0.1)
        before = fv.get(user_entity(0))
        fv = apply_feedback(fv, g2, 0.1)
        assert fv.get(user_entity(0)) < before

    def test_unlearn_renormalizes(self):
        fv = FeedbackVector({"u:1": 0.5, "u:2": 0.5})
        out = unlearn(fv, "u:1")
        assert out.scores == {"u:2": 1.0}

    def test_unlearn_last_entity_empties(self):
        fv = FeedbackVector({"u:1": 1.0})
        assert len(unlearn(fv, "u:1")) == 0

    def test_unlearn_unknown_is_noop(self):
        fv = FeedbackVector({"u:1": 1.0})
        assert unlearn(fv, "u:9") is fv

    def test_score_empty_vector(self):
        g = make_group(0, {0, 1}, descriptor=(3,))
        assert feedback_score(FeedbackVector(), g) == 0.0

    def test_score_full_overlap(self):
        g = make_group(0, {0, 1}, descriptor=(5, 6, 7))
        fv = FeedbackVector(
            {user_entity(0): 0.2, user_entity(1): 0.2, token_entity(5): 0.2, token_entity(6): 0.2, token_entity(7): 0.2}
        )
        assert feedback_score(fv, g) == pytest.approx(1.0)

    def test_score_no_overlap(self):
        g = make_group(0, {3}, descriptor=(9,))
        fv = FeedbackVector({user_entity(0): 1.0})
        assert feedback_score(fv, g) == 0.0

    @given(
        st.lists(
            st.tuples(st.sets(st.integers(0, 15), min_size=1, max_size=6), st.sets(st.integers(0, 9), max_size=4)),
            min_size=1,
            max_size=30,
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_normalization_invariant(self, events):
        fv = FeedbackVector()
        for i, (members, desc) in enumerate(events):
            fv = apply_feedback(fv, make_group(i, members, tuple(desc)), 0.1)
            assert fv.total() == pytest.approx(1.0, abs=1e-9)
            assert all(v > 0 for v in fv.scores.values())


def simple_pool(member_sets: list[set[int]], weights=None) -> tuple[GroupSet, list[PoolEntry]]:
    universe = max((max(s) for s in member_sets if s), default=0) + 1
    gs = make_groupset(member_sets, universe)
    if weights is None:
        weights = [float(len(member_sets) - i) for i in range(len(member_sets))]
    pool = [PoolEntry(i, w, 0.0) for i, w in enumerate(weights)]
    return gs, pool


class TestSelectK:
    def test_pool_of_exactly_k(self):
        gs, pool = simple_pool([{0, 1}, {2, 3}, {4, 5}])
        sel = select_k(gs, pool, k=3, alpha=0.5, parent_mask=full_mask(6))
        assert set(sel.ids) == {0, 1, 2}
        assert len(sel.ids) == 3

    def test_empty_pool(self):
        gs, _ = simple_pool([{0}])
        sel = select_k(gs, [], k=3, alpha=0.5, parent_mask=full_mask(1))
        assert sel.ids == () and sel.objective == 0.0

    def test_duplicate_members_never_chosen_together(self):
        # two groups with identical members plus one disjoint group
        gs, pool = simple_pool([{0, 1, 2}, {0, 1, 2}, {5, 6}])
        sel = select_k(gs, pool, k=2, alpha=1.0, parent_mask=full_mask(7))
        assert set(sel.ids) != {0, 1}
        # exhaustive check over 2-subsets confirms the greedy choice is optimal
        best = max(
            itertools.combinations(range(3), 2),
            key=lambda pair: diversity([gs[g].members_mask for g in pair]),
        )
        assert diversity([gs[g].members_mask for g in sel.ids]) == pytest.approx(
            diversity([gs[g].members_mask for g in best])
        )

    def test_invalid_k(self):
        gs, pool = simple_pool([{0}])
        for bad in (0, 8):
            with pytest.raises(ParameterError):
                select_k(gs, pool, k=bad, alpha=0.5, parent_mask=full_mask(1))

    def test_budget_zero_falls_back_to_weight_order(self):
        gs, pool = simple_pool([{0}, {0}, {1, 2, 3}], weights=[3.0, 2.0, 1.0])
        sel = select_k(gs, pool, k=2, alpha=0.5, parent_mask=full_mask(4), budget_ms=1e-9)
        assert sel.budget_exhausted
        assert len(sel.ids) == 2
        assert sel.ids[0] == 0  # fill follows pool order

    def test_argmax_invariance_under_weight_scaling(self):
        rng = random.Random(4)
        for _ in range(20):
            sets = [set(rng.sample(range(12), rng.randint(1, 6))) for _ in range(8)]
            weights = [rng.random() + 0.1 for _ in range(8)]
            gs, _ = simple_pool(sets)
            pool1 = [PoolEntry(i, w, 0.0) for i, w in enumerate(weights)]
            pool17 = [PoolEntry(i, 17.0 * w, 0.0) for i, w in enumerate(weights)]
            a = select_k(gs, pool1, k=4, alpha=0.5, parent_mask=full_mask(12))
            b = select_k(gs, pool17, k=4, alpha=0.5, parent_mask=full_mask(12))
            assert a.ids == b.ids

    def test_greedy_close_to_exhaustive_optimum(self):
        rng = random.Random(8)
        ratios = []
        for _ in range(30):
            n = rng.randint(4, 12)
            k = rng.randint(1, 4)
            universe = 24
            sets = [set(rng.sample(range(universe), rng.randint(1, 10))) for _ in range(n)]
            gs, pool = simple_pool(sets)
            parent = full_mask(universe)
            sel = select_k(gs, pool, k=k, alpha=0.5, parent_mask=parent)
            target = min(k, n)
            best = max(
                0.5 * diversity([gs[g].members_mask for g in combo])
                + 0.5 * coverage([gs[g].members_mask for g in combo], parent)
                for combo in itertools.combinations(range(n), target)
            )
            ratios.append(sel.objective / best if best > 0 else 1.0)
        assert min(ratios) >= 0.63
        assert sum(ratios) / len(ratios) >= 0.90

    def test_deterministic_without_budget(self):
        gs, pool = simple_pool([{0, 1}, {1, 2}, {3}, {0, 3}])
        a = select_k(gs, pool, k=3, alpha=0.5, parent_mask=full_mask(4))
        b = select_k(gs, pool, k=3, alpha=0.5, parent_mask=full_mask(4))
        assert a.ids == b.ids and a.objective == b.objective

    def test_anytime_monotone_with_virtual_clock(self):
        rng = random.Random(15)
        for _ in range(10):
            sets = [set(rng.sample(range(40), rng.randint(2, 15))) for _ in range(60)]
            gs, pool = simple_pool(sets)
            parent = full_mask(40)
            values = []
            for budget in (1.0, 5.0, 25.0, 100.0, None):
                clock = VirtualClock(step_ms=0.4)
                sel = select_k(gs, pool, k=5, alpha=0.5, parent_mask=parent, budget_ms=budget, clock=clock)
                values.append(sel.objective)
            assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


class VirtualClock:
    """Deterministic clock: each reading advances a fixed number of ms."""

    def __init__(self, step_ms: float):
        self.now = 0.0
        self.step = step_ms / 1000.0

    def __call__(self) -> float:
        self.now += self.step
        return self.now


class TestCandidatePool:
    def _env(self):
        rng = random.Random(55)
        while True:
            ds = random_action_corpus(rng, max_users=40, max_tokens=10)
            gs = mine_closed_groups(ds, 2)
            if len(gs) >= 6 and any(idx_row for idx_row in build_index(gs, 1.0).neighbors):
                return ds, gs, build_index(gs, 1.0)

    def test_empty_feedback_preserves_similarity_order(self):
        ds, gs, index = self._env()
        focus = gs[0]
        pool = candidate_pool(index, gs, FeedbackVector(), focus, theta=0.0, lam=1.0)
        raw = index.list_for(0)
        assert len(pool) == min(200, len(raw))
        assert [e.gid for e in pool] == [g for g, _ in raw][: len(pool)]

    def test_feedback_promotes_favored_candidate(self):
        sets = [{0, 1, 2, 3}, {0, 1, 4, 5}, {0, 1, 6, 7}]
        gs = make_groupset(sets, 8)
        index = build_index(gs, 1.0)
        focus = gs[0]
        raw = index.list_for(0)
        assert raw[0][1] == raw[1][1]  # tie in similarity between groups 1 and 2
        fv = FeedbackVector({user_entity(6): 0.5, user_entity(7): 0.5})
        pool = candidate_pool(index, gs, fv, focus, theta=0.0, lam=1.0)
        assert pool[0].gid == 2

    def test_theta_one_empties_pool_without_duplicates(self):
        ds, gs, index = self._env()
        focus = gs[0]
        dup_free = all(sim < 1.0 for _, sim in index.list_for(0))
        pool = candidate_pool(index, gs, FeedbackVector(), focus, theta=1.0, lam=1.0)
        if dup_free:
            assert pool == []

    def test_pool_cap(self):
        sets = [{0, i % 30, (i * 7) % 30} for i in range(40)]
        gs = make_groupset(sets, 30)
        index = build_index(gs, 1.0)
        pool = candidate_pool(index, gs, FeedbackVector(), gs[0], theta=0.0, lam=1.0, pool_cap=5)
        assert len(pool) == 5

    def test_vectorized_weighting_matches_scalar_scores(self):
        ds, gs, index = self._env()
        rng = random.Random(2)
        scores = {}
        for u in range(min(ds.n_users, 12)):
            scores[user_entity(u)] = rng.random() + 0.01
        total = sum(scores.values())
        fv = FeedbackVector({k: v / total for k, v in scores.items()})
        pool = candidate_pool(index, gs, fv, gs[0], theta=0.0, lam=2.0)
        for entry in pool:
            expected = entry.similarity * (1.0 + 2.0 * feedback_score(fv, gs[entry.gid]))
            assert entry.weight == pytest.approx(expected, rel=1e-12)

    def test_unlearn_equals_pool_rebuilt_from_scratch(self):
        ds, gs, index = self._env()
        fv = FeedbackVector()
        for g in gs.groups[:3]:
            fv = apply_feedback(fv, g, 0.1)
        entity = next(iter(fv.scores))
        unlearned = unlearn(fv, entity)
        rebuilt_scores = {k: v for k, v in fv.scores.items() if k != entity}
        total = sum(rebuilt_scores.values())
        rebuilt = FeedbackVector({k: v / total for k, v in rebuilt_scores.items()})
        a = candidate_pool(index, gs, unlearned, gs[0], theta=0.0, lam=1.0)
        b = candidate_pool(index, gs, rebuilt, gs[0], theta=0.0, lam=1.0)
        assert [e.gid for e in a] == [e.gid for e in b]
        for x, y in zip(a, b):
            assert x.weight == pytest.approx(y.weight, rel=1e-12)


@pytest.fixture(scope="module")
def env():
    params = SynthParams(users=120, attributes=3, items=40, zipf=0.9, seed=3, cohorts=6, cohort_size=25)
    return build_stack(params, minsup=6)


class TestSession:
    def _session(self, env, **overrides) -> Session:
        params = SessionParams(budget_ms=None, **overrides)
        return Session(env["dataset"], env["groups"], env["index"], params)

    def test_root_selection_deterministic(self, env):
        a = self._session(env).root_selection()
        b = self._session(env).root_selection()
        assert a.ids == b.ids
        assert a.diversity == b.diversity

    def test_single_group_corpus_root(self):
        from vexplore.ingest import ActionRecord, DemographicSchema, UserProfile, build_dataset

        actions = [ActionRecord(u, "i", 1.0) for u in ("u1", "u2")]
        ds = build_dataset(actions, [UserProfile("u1", {}), UserProfile("u2", {})], DemographicSchema(()))
        gs = mine_closed_groups(ds, 2)
        assert len(gs) == 1
        s = Session(ds, gs, build_index(gs, 1.0), SessionParams(budget_ms=None))
        sel = s.root_selection()
        assert sel.ids == (0,)

    def test_select_requires_shown_or_bookmarked(self, env):
        s = self._session(env)
        s.root_selection()
        hidden = next(g.id for g in env["groups"].groups if g.id not in s.current.selection.ids)
        with pytest.raises(IneligibleGroup):
            s.select(hidden)
        s.memo_add(f"g:{hidden}")
        s.select(hidden)  # bookmarked groups are eligible

    def test_every_step_keeps_chosen_within_shown(self, env):
        s = self._session(env)
        sel = s.root_selection()
        s.select(sel.ids[0])
        hidden = next(g.id for g in env["groups"].groups if not s.eligible(g.id))
        s.memo_add(f"g:{hidden}")
        s.select(hidden)  # bookmark jump
        for step in s.history:
            assert step.chosen in step.shown

    def test_replay_covers_bookmark_jumps(self, env):
        from vexplore.replay import export_session, replay_from_export

        s = self._session(env)
        sel = s.root_selection()
        s.select(sel.ids[0])
        hidden = next(g.id for g in env["groups"].groups if not s.eligible(g.id))
        s.memo_add(f"g:{hidden}")
        s.select(hidden)
        if s.current.selection.ids:
            s.select(s.current.selection.ids[0])
        exported = export_session(s)
        replayed = replay_from_export(exported, env["dataset"], env["groups"], env["index"])
        assert export_session(replayed) == exported

    def test_select_rewards_choice(self, env):
        s = self._session(env)
        sel = s.root_selection()
        gid = sel.ids[0]
        s.select(gid)
        assert feedback_score(s.feedback, env["groups"][gid]) > 0

    def test_identical_click_sequences_identical_outcomes(self, env):
        rng = random.Random(31)
        s1, s2 = self._session(env), self._session(env)
        sel1, sel2 = s1.root_selection(), s2.root_selection()
        for _ in range(5):
            if not sel1.ids:
                break
            gid = rng.choice(sel1.ids)
            sel1, sel2 = s1.select(gid), s2.select(gid)
            assert sel1.ids == sel2.ids
        assert [step.chosen for step in s1.history] == [step.chosen for step in s2.history]
        assert s1.feedback.scores == s2.feedback.scores

    def test_dead_end_records_step(self, env):
        s = self._session(env)
        s.root_selection()
        # force a dead end: bookmark a group, then make its pool empty via theta
        gid = s.current.selection.ids[0]
        s.params = SessionParams(budget_ms=None, theta=1.0)
        sel = s.select(gid)
        if sel.ids:
            pytest.skip("corpus has a duplicate-member neighbor")
        assert len(s.history) == 1
        assert s.history[-1].chosen == gid

    def test_backtrack_restores_feedback_snapshot(self, env):
        s = self._session(env)
        sel = s.root_selection()
        s.select(sel.ids[0])
        snap0 = dict(s.feedback.scores)
        sel2 = s.current.selection
        if sel2.ids:
            s.select(sel2.ids[0])
            assert s.feedback.scores != snap0
        s.backtrack(0)
        assert s.feedback.scores == snap0
        assert len(s.history) == 1

    def test_backtrack_then_replay_is_idempotent(self, env):
        s = self._session(env)
        sel = s.root_selection()
        first = sel.ids[0]
        after_first = s.select(first)
        if not after_first.ids:
            pytest.skip("dead end")
        second = after_first.ids[0]
        s.select(second)
        hist = [step.chosen for step in s.history]
        fb = dict(s.feedback.scores)
        shown = s.current.selection.ids
        s.backtrack(0)
        s.select(second)
        assert [step.chosen for step in s.history] == hist
        assert s.feedback.scores == fb
        assert s.current.selection.ids == shown

    def test_backtrack_leaves_memo_alone(self, env):
        s = self._session(env)
        sel = s.root_selection()
        s.select(sel.ids[0])
        s.memo_add(f"g:{sel.ids[0]}")
        s.memo_add(f"u:{env['dataset'].users[0]}")
        s.backtrack(0)
        assert s.memo.groups == [sel.ids[0]]
        assert s.memo.users == [env["dataset"].users[0]]

    def test_backtrack_out_of_range(self, env):
        s = self._session(env)
        s.root_selection()
        with pytest.raises(ParameterError):
            s.backtrack(0)  # no steps yet

    def test_memo_dedupes_and_keeps_order(self, env):
        s = self._session(env)
        s.memo_add("g:1")
        s.memo_add(f"u:{env['dataset'].users[2]}")
        s.memo_add("g:1")
        s.memo_add("g:0")
        assert s.memo.groups == [1, 0]
        assert s.memo.users == [env["dataset"].users[2]]

    def test_memo_rejects_unknown_ids(self, env):
        s = self._session(env)
        with pytest.raises(IneligibleGroup):
            s.memo_add("g:99999")
        with pytest.raises(ParameterError):
            s.memo_add("u:who")

    def test_selection_bounded_by_k(self, env):
        for k in (1, 3, 7):
            s = self._session(env, k=k)
            sel = s.root_selection()
            assert len(sel.ids) <= k

    def test_k_cap(self):
        with pytest.raises(ParameterError):
            SessionParams(k=8)
        with pytest.raises(ParameterError):
            SessionParams(k=0)
