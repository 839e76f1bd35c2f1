"""Acceptance suite: one test per release criterion, each printing a PASS/FAIL
line (run with ``pytest tests/test_acceptance.py -v -s`` to see them live).

Every expected value is either computed by an independent oracle inside the
test (brute-force enumeration, exhaustive subset search, closed-form algebra,
naive recounts) or is a fixed tolerance stated in the criterion itself.
"""

from __future__ import annotations

import itertools
import random
import time

import numpy as np

from vexplore.explore import (
    FeedbackVector,
    PoolEntry,
    Session,
    SessionParams,
    apply_feedback,
    coverage,
    diversity,
    select_k,
    unlearn,
)
from vexplore.ingest import UserProfile
from vexplore.mining import brute_force_closed, groups_equal, mine_closed_groups
from vexplore.replay import export_session, replay_from_export, run_bench
from vexplore.simindex import build_index, jaccard
from vexplore.stats import FilterState, Predicate, StatsEngine
from vexplore.synth import SynthParams

from conftest import build_stack, random_action_corpus
from test_explore import VirtualClock, make_group, make_groupset
from test_stats import gaussian_profiles, one_group_dataset


def verdict(num: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line, flush=True)
    assert ok, line


def test_criterion_01_miner_matches_bruteforce_oracle():
    rng = random.Random(20240)
    start = time.perf_counter()
    trials = 0
    for _ in range(200):
        ds = random_action_corpus(rng, max_users=50, max_tokens=12)
        minsup = rng.randint(1, max(1, ds.n_users))
        ok = groups_equal(mine_closed_groups(ds, minsup), brute_force_closed(ds, minsup))
        if not ok:
            verdict(1, "miner oracle equivalence", False, f"mismatch at trial {trials}")
        trials += 1
    elapsed = time.perf_counter() - start
    verdict(
        1,
        "miner oracle equivalence",
        trials == 200 and elapsed < 60.0,
        f"{trials} corpora, {elapsed:.1f}s",
    )


def test_criterion_02_index_prefix_property():
    rng = random.Random(777)
    checked = 0
    lists_checked = 0
    while checked < 20:
        ds = random_action_corpus(rng, max_users=45, max_tokens=11)
        gs = mine_closed_groups(ds, rng.randint(1, 3))
        n = len(gs)
        if not 2 <= n <= 200:
            continue
        part = build_index(gs, 0.1)
        full = build_index(gs, 1.0)
        cap = (n - 1 + 9) // 10  # exact ceil of 10% of |G|-1
        for gid in range(n):
            expected_len = min(cap, len(full.neighbors[gid]))
            if part.neighbors[gid] != full.neighbors[gid][:cap]:
                verdict(2, "index prefix property", False, f"list mismatch at group {gid}")
            if len(part.neighbors[gid]) != expected_len:
                verdict(2, "index prefix property", False, f"bad length at group {gid}")
            lists_checked += 1
        checked += 1
    verdict(2, "index prefix property", True, f"{checked} corpora, {lists_checked} lists")


def test_criterion_03_greedy_quality_vs_exhaustive_optimum():
    rng = random.Random(424242)
    ratios = []
    for _ in range(100):
        n = rng.randint(5, 20)
        k = rng.randint(1, 5)
        universe = rng.randint(20, 40)
        sets = [set(rng.sample(range(universe), rng.randint(1, universe // 2))) for _ in range(n)]
        gs = make_groupset(sets, universe)
        weights = sorted((rng.random() for _ in range(n)), reverse=True)
        pool = [PoolEntry(i, w, 0.0) for i, w in enumerate(weights)]
        parent = (1 << universe) - 1
        sel = select_k(gs, pool, k=k, alpha=0.5, parent_mask=parent, budget_ms=None)
        target = min(k, n)
        optimum = max(
            0.5 * diversity([gs[g].members_mask for g in combo])
            + 0.5 * coverage([gs[g].members_mask for g in combo], parent)
            for combo in itertools.combinations(range(n), target)
        )
        ratios.append(sel.objective / optimum if optimum > 0 else 1.0)
    mean_ratio = sum(ratios) / len(ratios)
    low = min(ratios)
    verdict(
        3,
        "greedy within tolerance of exhaustive optimum",
        mean_ratio >= 0.90 and low >= 0.63,
        f"mean={mean_ratio:.4f} (>=0.90), min={low:.4f} (>=0.63)",
    )


def test_criterion_04_latency_budget(bench_env):
    report = run_bench(
        bench_env["dataset"],
        bench_env["groups"],
        bench_env["index"],
        budget_ms=100.0,
        steps=200,
        seed=1,
    )
    p95 = report["latency_ms"]["p95"]
    full_k = report["full_k_fraction"]
    verdict(
        4,
        "p95 explore-step latency within 100 ms, k groups every step",
        p95 <= 100.0 and full_k == 1.0 and report["steps"] == 200,
        f"|G|={len(bench_env['groups'])}, p95={p95}ms, max={report['latency_ms']['max']}ms, full_k={full_k:.0%}",
    )


def test_criterion_05_anytime_monotonicity():
    rng = random.Random(5150)
    worst_violation = 0.0
    for _ in range(50):
        universe = rng.randint(30, 60)
        n = rng.randint(40, 200)
        sets = [set(rng.sample(range(universe), rng.randint(2, universe // 2))) for _ in range(n)]
        gs = make_groupset(sets, universe)
        weights = sorted((rng.random() for _ in range(n)), reverse=True)
        pool = [PoolEntry(i, w, 0.0) for i, w in enumerate(weights)]
        parent = (1 << universe) - 1
        values = []
        for budget_ms in (1.0, 5.0, 25.0, 100.0, None):
            sel = select_k(
                gs, pool, k=5, alpha=0.5, parent_mask=parent,
                budget_ms=budget_ms, clock=VirtualClock(step_ms=0.05),
            )
            values.append(sel.objective)
        for a, b in zip(values, values[1:]):
            worst_violation = max(worst_violation, a - b)
    verdict(
        5,
        "objective non-decreasing across budgets 1/5/25/100/inf ms",
        worst_violation <= 1e-12,
        f"50 trials, worst regression {worst_violation:.2e}",
    )


def test_criterion_06_feedback_vector_invariants():
    rng = random.Random(606)
    groups = [
        make_group(i, set(rng.sample(range(30), rng.randint(1, 8))), tuple(rng.sample(range(12), rng.randint(0, 4))))
        for i in range(40)
    ]
    fv = FeedbackVector()
    ops = 0
    for _ in range(10_000):
        if fv.scores and rng.random() < 0.3:
            entity = rng.choice(sorted(fv.scores))
            fv = unlearn(fv, entity)
            if entity in fv.scores:
                verdict(6, "feedback vector invariants", False, "unlearned entity survived")
        else:
            fv = apply_feedback(fv, rng.choice(groups), delta=rng.choice([0.05, 0.1, 0.5]))
        ops += 1
        if fv.scores:
            total = fv.total()
            if abs(total - 1.0) > 1e-9 or any(v <= 0 for v in fv.scores.values()):
                verdict(6, "feedback vector invariants", False, f"broken after {ops} ops (sum={total!r})")
    verdict(6, "feedback vector invariants", True, f"{ops} apply/unlearn operations")


def test_criterion_07_coordinated_views_match_naive_recount():
    rng = random.Random(707)
    sequences = 0
    datasets = []
    for _ in range(25):
        n = rng.randint(5, 500)
        profiles = [
            UserProfile(
                f"u{i:04d}",
                {
                    "gender": rng.choice(["M", "F"]),
                    "city": rng.choice(["P", "L", "N", "K"]),
                    "tier": rng.choice(["a", "b", "c"]),
                    "age": float(rng.randint(18, 90)),
                },
            )
            for i in range(n)
        ]
        datasets.append(one_group_dataset(profiles))
    dims_cat = ["gender", "city", "tier"]
    while sequences < 1000:
        ds, group = datasets[rng.randrange(len(datasets))]
        eng = StatsEngine(ds)
        preds = {}
        for dim, values in (("gender", ["M", "F"]), ("city", ["P", "L", "N", "K"]), ("tier", ["a", "b", "c"])):
            if rng.random() < 0.5:
                preds[dim] = Predicate(values=frozenset(rng.sample(values, rng.randint(1, len(values)))))
        if rng.random() < 0.5:
            lo = rng.randint(18, 80)
            preds["age"] = Predicate(lo=float(lo), hi=float(lo + rng.randint(0, 40)))
        filters = FilterState(preds)

        def passes(profile, exclude=None):
            for dim, pred in filters.predicates.items():
                if dim == exclude:
                    continue
                v = profile.get(dim)
                if pred.values is not None:
                    if v not in pred.values:
                        return False
                elif v is None or not (pred.lo <= v <= pred.hi):
                    return False
            return True

        for dim in dims_cat:
            h = eng.histogram(group, dim, filters)
            naive = {}
            for u in range(ds.n_users):
                p = ds.profiles[u]
                if passes(p, exclude=dim):
                    naive[p[dim]] = naive.get(p[dim], 0) + 1
            got = {b: c for b, c in zip(h.bins, h.counts) if c}
            if got != naive:
                verdict(7, "coordinated views equal naive recount", False, f"{dim}: {got} != {naive}")
        rows = [r["user_id"] for r in eng.filtered_members(group, filters)]
        naive_rows = sorted(ds.users[u] for u in range(ds.n_users) if passes(ds.profiles[u]))
        if rows != naive_rows:
            verdict(7, "coordinated views equal naive recount", False, "member table mismatch")
        sequences += 1
    verdict(7, "coordinated views equal naive recount", True, f"{sequences} brush sequences")


def test_criterion_08_projection_matches_fisher_direction():
    rng = np.random.default_rng(808)
    profiles = gaussian_profiles(rng, n_per_class=50)
    ds, group = one_group_dataset(profiles)
    eng = StatsEngine(ds)
    points = eng.lda_project(group, "label")

    frame = eng.frame(group)
    cols = []
    for dim in frame.numeric:
        col = frame.numeric[dim].copy()
        if np.isnan(col).all():
            col[:] = 0.0
        else:
            col[np.isnan(col)] = np.nanmean(col)
        std = col.std()
        cols.append((col - col.mean()) / (std if std > 0 else 1.0))
    X = np.column_stack(cols)
    labels = np.array([ds.profiles[u]["label"] for u in frame.rows])
    x1, x2 = X[labels == "A"], X[labels == "B"]
    s_w = (x1 - x1.mean(0)).T @ (x1 - x1.mean(0)) + (x2 - x2.mean(0)).T @ (x2 - x2.mean(0))
    w = np.linalg.solve(s_w + 1e-6 * np.eye(X.shape[1]), x1.mean(0) - x2.mean(0))
    oracle = X @ (w / np.linalg.norm(w))
    oracle -= oracle.mean()

    axis1 = np.array([p.x for p in points])
    axis1 -= axis1.mean()
    cos = abs(float(np.dot(axis1, oracle) / (np.linalg.norm(axis1) * np.linalg.norm(oracle))))

    swapped = [
        UserProfile(p.user_id, {**p.values, "label": "B" if p.values["label"] == "A" else "A"})
        for p in profiles
    ]
    ds2, group2 = one_group_dataset(swapped)
    points2 = StatsEngine(ds2).lda_project(group2, "label")
    a = np.array([[p.x, p.y] for p in points])
    b = np.array([[p.x, p.y] for p in points2])
    perm_ok = all(
        np.allclose(a[:, ax], b[:, ax], atol=1e-9) or np.allclose(a[:, ax], -b[:, ax], atol=1e-9)
        for ax in range(2)
    )
    verdict(
        8,
        "projection axis within 0.999 cosine of closed form, label-permutation safe",
        cos >= 0.999 and perm_ok,
        f"cosine={cos:.6f}, permutation invariant={perm_ok}",
    )


POLICY_PARAMS = dict(
    users=240, attributes=3, items=200, zipf=0.5,
    cohorts=5, cohort_size=48, cohort_items=3, cohort_levels=3,
    cohort_disjoint=True, attribute_values=25, actions_per_user=(2, 4),
)


def _cohort_group(ds, gs, cohort):
    tokens = {ds.token_index[t] for t in (f"a:{i}" for i in cohort["items"]) if t in ds.token_index}
    best = None
    for g in gs.groups:
        if tokens <= set(g.descriptor) and (best is None or g.support > best.support):
            best = g
    return best


def test_criterion_09_steps_to_target(capsys):
    rng = random.Random(909)
    trials = wins = 0
    steps_used = []
    for seed in (201, 202, 203, 204, 205):
        env = build_stack(SynthParams(seed=seed, **POLICY_PARAMS), minsup=6)
        ds, gs, index = env["dataset"], env["groups"], env["index"]
        leaves = [c for c in env["cohorts"] if c["level"] == 2]
        rng.shuffle(leaves)
        for leaf in leaves[:10]:
            target = _cohort_group(ds, gs, leaf)
            if target is None:
                trials += 1
                continue
            session = Session(ds, gs, index, SessionParams(k=7, theta=0.15, budget_ms=None))
            tmask = target.members_mask
            sel = session.root_selection()
            reached = None
            for step in range(1, 11):
                if not sel.ids:
                    break
                if target.id in sel.ids:
                    reached = step
                    break
                best = max(sel.ids, key=lambda g: (jaccard(gs[g].members_mask, tmask), -g))
                sel = session.select(best)
            trials += 1
            if reached is not None:
                wins += 1
                steps_used.append(reached)
    rate = wins / trials
    mean_steps = sum(steps_used) / len(steps_used) if steps_used else float("inf")
    verdict(
        9,
        "hidden target reached within 10 selections in 80% of trials",
        trials == 50 and rate >= 0.80,
        f"{wins}/{trials} trials, mean steps {mean_steps:.1f}",
    )


def test_criterion_10_deterministic_replay_byte_for_byte(small_env):
    ds, gs, index = small_env["dataset"], small_env["groups"], small_env["index"]
    rng = random.Random(1010)
    checked = 0
    for _ in range(10):
        session = Session(ds, gs, index, SessionParams(budget_ms=None))
        sel = session.root_selection()
        for _ in range(rng.randint(1, 6)):
            if not sel.ids:
                break
            sel = session.select(rng.choice(sel.ids))
        if session.history:
            session.memo_add(f"g:{session.history[0].chosen}")
        exported = export_session(session)
        replayed = replay_from_export(exported, ds, gs, index)
        if export_session(replayed) != exported:
            verdict(10, "deterministic replay reproduces export", False, f"walk {checked}")
        checked += 1
    verdict(10, "deterministic replay reproduces export", True, f"{checked} exported walks")
