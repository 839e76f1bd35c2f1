"""The interactive core: pick k diverse, covering neighbor groups per step
under a wall-clock budget, and maintain the session's learned feedback,
history, and memo.

Selection quality is the scalarized objective
``f(S) = alpha * diversity(S) + (1 - alpha) * coverage(S, parent)`` where
diversity is the mean pairwise Jaccard distance between member sets and
coverage is the fraction of the parent's members present in the union of S.

The greedy optimizer is an anytime algorithm: after each completed round it
snapshots "greedy picks so far, remaining slots topped up in pool order", and
the final answer is the best snapshot by objective. More budget therefore
never yields a worse objective, including at budget infinity.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IneligibleGroup, NotReady, ParameterError
from .ingest import Dataset
from .mining import Group, GroupSet
from .simindex import SimilarityIndex, jaccard

log = logging.getLogger(__name__)

ROOT = "root"
K_CAP = 7  # perception bound on groups shown per step
DEFAULT_POOL_CAP = 200
ROOT_POOL_SIZE = 200


def user_entity(idx: int) -> str:
    return f"u:{idx}"


def token_entity(idx: int) -> str:
    return f"t:{idx}"


def parse_entity(entity: str) -> tuple[str, int]:
    ns, _, raw = entity.partition(":")
    if ns not in ("u", "t"):
        raise ParameterError(f"bad entity (want u:<idx> or t:<idx>): {entity!r}")
    try:
        return ns, int(raw)
    except ValueError:
        raise ParameterError(f"bad entity index: {entity!r}")


@dataclass(frozen=True)
class FeedbackVector:
    """Sparse score map over user/token entities. Empty means no feedback yet;
    a nonempty vector always sums to 1.0."""

    scores: dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.scores)

    def __contains__(self, entity: str) -> bool:
        return entity in self.scores

    def get(self, entity: str) -> float:
        return self.scores.get(entity, 0.0)

    def total(self) -> float:
        return sum(self.scores.values())


def _normalized(scores: dict[str, float]) -> FeedbackVector:
    total = sum(scores.values())
    if total <= 0:
        return FeedbackVector({})
    return FeedbackVector({e: v / total for e, v in scores.items()})


def apply_feedback(fv: FeedbackVector, group: Group, delta: float) -> FeedbackVector:
    """Reward a selected group: spread `delta` uniformly over its members and
    descriptor tokens, then renormalize to unit mass."""
    if delta <= 0:
        raise ParameterError("feedback delta must be > 0")
    entities = [user_entity(int(u)) for u in group.members]
    entities += [token_entity(t) for t in group.descriptor]
    share = delta / len(entities)
    scores = dict(fv.scores)
    for e in entities:
        scores[e] = scores.get(e, 0.0) + share
    return _normalized(scores)


def unlearn(fv: FeedbackVector, entity: str) -> FeedbackVector:
    """Remove an entity and renormalize. Unknown entities are a warning-level
    no-op, not an error."""
    if entity not in fv.scores:
        log.warning("unlearn: entity %s not present in feedback vector", entity)
        return fv
    scores = dict(fv.scores)
    del scores[entity]
    return _normalized(scores)


def feedback_score(fv: FeedbackVector, group: Group) -> float:
    """Total feedback mass sitting on a group's members and descriptor tokens."""
    if not fv.scores:
        return 0.0
    s = 0.0
    for u in group.members:
        s += fv.scores.get(user_entity(int(u)), 0.0)
    for t in group.descriptor:
        s += fv.scores.get(token_entity(t), 0.0)
    return s


def diversity(masks: list[int]) -> float:
    """Mean pairwise Jaccard distance; a single group is maximally diverse."""
    n = len(masks)
    if n == 0:
        raise ParameterError("diversity of an empty selection is undefined")
    if n == 1:
        return 1.0
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += 1.0 - jaccard(masks[i], masks[j])
    return total / (n * (n - 1) / 2)


def coverage(masks: list[int], parent_mask: int) -> float:
    """Fraction of the parent's members contained in the union of the selection."""
    parent_size = parent_mask.bit_count()
    if parent_size == 0:
        raise ParameterError("coverage needs a non-empty parent")
    union = 0
    for m in masks:
        union |= m
    return (union & parent_mask).bit_count() / parent_size


@dataclass(frozen=True)
class SessionParams:
    k: int = 5
    alpha: float = 0.5
    theta: float = 0.05
    lam: float = 1.0
    delta: float = 0.1
    budget_ms: float | None = 100.0  # None = no limit (deterministic mode)
    pool_cap: int = DEFAULT_POOL_CAP

    def __post_init__(self):
        if not (1 <= self.k <= K_CAP):
            raise ParameterError(f"k must be in [1, {K_CAP}]")
        if not (0.0 <= self.alpha <= 1.0):
            raise ParameterError("alpha must be in [0, 1]")
        if not (0.0 <= self.theta <= 1.0):
            raise ParameterError("theta must be in [0, 1]")
        if self.lam < 0:
            raise ParameterError("lambda must be >= 0")
        if self.delta <= 0:
            raise ParameterError("delta must be > 0")
        if self.budget_ms is not None and self.budget_ms <= 0:
            raise ParameterError("budget must be > 0 ms (or null for no limit)")
        if self.pool_cap < 1:
            raise ParameterError("pool_cap must be >= 1")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "alpha": self.alpha,
            "theta": self.theta,
            "lambda": self.lam,
            "delta": self.delta,
            "budget_ms": self.budget_ms,
            "pool_cap": self.pool_cap,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionParams":
        kwargs = {}
        mapping = {
            "k": "k",
            "alpha": "alpha",
            "theta": "theta",
            "lambda": "lam",
            "delta": "delta",
            "budget_ms": "budget_ms",
            "pool_cap": "pool_cap",
        }
        for key, attr in mapping.items():
            if key in doc:
                kwargs[attr] = doc[key]
        return cls(**kwargs)


@dataclass(frozen=True)
class PoolEntry:
    gid: int
    weight: float  # ordering weight: wsim for neighbor pools, support at root
    similarity: float  # raw jaccard to the focus (0.0 for the root pool)


@dataclass(frozen=True)
class GroupSelection:
    ids: tuple[int, ...]
    diversity: float
    coverage: float
    objective: float
    elapsed_s: float
    budget_exhausted: bool

    @property
    def empty(self) -> bool:
        return not self.ids


EMPTY_SELECTION = GroupSelection((), 0.0, 0.0, 0.0, 0.0, False)


def candidate_pool(
    index: SimilarityIndex,
    groups: GroupSet,
    fv: FeedbackVector,
    focus: Group,
    theta: float,
    lam: float,
    pool_cap: int = DEFAULT_POOL_CAP,
) -> list[PoolEntry]:
    """Neighbor candidates for a focus group, feedback-weighted.

    Starts from the materialized neighbor list, drops entries below the
    similarity floor, rescores with wsim = sim * (1 + lambda * feedback mass),
    and keeps the pool_cap best.
    """
    raw = [(gid, sim) for gid, sim in index.list_for(focus.id) if sim >= theta]
    if not raw:
        return []
    if fv.scores and lam > 0:
        # Dense user-score array so each candidate's feedback mass is one gather.
        user_scores = np.zeros(groups.universe, dtype=np.float64)
        token_scores: dict[int, float] = {}
        for entity, score in fv.scores.items():
            ns, idx = parse_entity(entity)
            if ns == "u":
                if idx < groups.universe:
                    user_scores[idx] = score
            else:
                token_scores[idx] = score
        entries = []
        for gid, sim in raw:
            g = groups[gid]
            mass = float(user_scores[g.members].sum())
            for t in g.descriptor:
                mass += token_scores.get(t, 0.0)
            entries.append(PoolEntry(gid, sim * (1.0 + lam * mass), sim))
    else:
        entries = [PoolEntry(gid, sim, sim) for gid, sim in raw]
    entries.sort(key=lambda e: (-e.weight, e.gid))
    return entries[:pool_cap]


def root_pool(groups: GroupSet, size: int = ROOT_POOL_SIZE) -> list[PoolEntry]:
    """The first screen's pool: the highest-support groups. Group ids are
    assigned in support-descending order, so this is a simple prefix."""
    if len(groups) == 0:
        raise NotReady("no groups mined yet")
    return [PoolEntry(g.id, float(g.support), 0.0) for g in groups.groups[:size]]


def _objective(masks: list[int], alpha: float, parent_mask: int) -> tuple[float, float, float]:
    d = diversity(masks)
    c = coverage(masks, parent_mask)
    return alpha * d + (1.0 - alpha) * c, d, c


def select_k(
    groups: GroupSet,
    pool: list[PoolEntry],
    k: int,
    alpha: float,
    parent_mask: int,
    budget_ms: float | None = None,
    clock=time.perf_counter,
) -> GroupSelection:
    """Greedy diverse-and-covering selection with a best-effort deadline.

    The wall clock is checked between candidate evaluations; when the budget
    runs out, remaining slots are topped up with the best unselected pool
    entries (pool order = weight order) and budget_exhausted is set. The
    returned set is the best completed snapshot, so a larger budget never
    returns a worse objective.
    """
    if not (1 <= k <= K_CAP):
        raise ParameterError(f"k must be in [1, {K_CAP}]")
    start = clock()
    if not pool:
        return EMPTY_SELECTION
    deadline = None if budget_ms is None else start + budget_ms / 1000.0
    target = min(k, len(pool))
    masks = {e.gid: groups[e.gid].members_mask for e in pool}
    order = [e.gid for e in pool]

    def topped_up(prefix: list[int]) -> list[int]:
        chosen = list(prefix)
        have = set(chosen)
        for gid in order:
            if len(chosen) == target:
                break
            if gid not in have:
                chosen.append(gid)
                have.add(gid)
        return chosen

    best_ids = topped_up([])
    best_f, best_d, best_c = _objective([masks[g] for g in best_ids], alpha, parent_mask)

    picked: list[int] = []
    picked_masks: list[int] = []
    pair_dist_sum = 0.0
    union_mask = 0
    parent_size = parent_mask.bit_count()
    exhausted = False

    for _ in range(target):
        best_gain = -1.0
        best_gid = None
        n_after = len(picked) + 1
        pairs_after = n_after * (n_after - 1) / 2
        for gid in order:
            if gid in picked:
                continue
            if deadline is not None and clock() > deadline:
                exhausted = True
                break
            m = masks[gid]
            if n_after == 1:
                d = 1.0
            else:
                d = (pair_dist_sum + sum(1.0 - jaccard(m, pm) for pm in picked_masks)) / pairs_after
            c = ((union_mask | m) & parent_mask).bit_count() / parent_size
            f = alpha * d + (1.0 - alpha) * c
            if f > best_gain:
                best_gain = f
                best_gid = gid
        if exhausted or best_gid is None:
            break
        m = masks[best_gid]
        pair_dist_sum += sum(1.0 - jaccard(m, pm) for pm in picked_masks)
        union_mask |= m
        picked.append(best_gid)
        picked_masks.append(m)
        ids = topped_up(picked)
        f, d, c = _objective([masks[g] for g in ids], alpha, parent_mask)
        if f >= best_f:  # ties prefer the more-greedy snapshot
            best_ids, best_f, best_d, best_c = ids, f, d, c

    return GroupSelection(
        ids=tuple(best_ids),
        diversity=best_d,
        coverage=best_c,
        objective=best_f,
        elapsed_s=clock() - start,
        budget_exhausted=exhausted,
    )


@dataclass
class ExplorationStep:
    """One completed click: the screen it was made from and what was chosen.

    `focus` is the group whose neighbors were on screen (ROOT for the first
    screen); `snapshot` is the feedback vector right after this click's reward
    was applied, which is what backtracking restores.
    """

    focus: int | str
    shown: tuple[int, ...]
    chosen: int | None
    diversity: float
    coverage: float
    elapsed_s: float
    budget_exhausted: bool
    snapshot: FeedbackVector


@dataclass
class CurrentScreen:
    focus: int | str
    selection: GroupSelection


@dataclass
class Memo:
    groups: list[int] = field(default_factory=list)
    users: list[str] = field(default_factory=list)

    def add_group(self, gid: int) -> None:
        if gid not in self.groups:
            self.groups.append(gid)

    def add_user(self, uid: str) -> None:
        if uid not in self.users:
            self.users.append(uid)

    def remove(self, kind: str, payload: str) -> bool:
        if kind == "g":
            gid = int(payload)
            if gid in self.groups:
                self.groups.remove(gid)
                return True
        elif kind == "u" and payload in self.users:
            self.users.remove(payload)
            return True
        return False


class Session:
    """One explorer's state over a shared immutable dataset/group-set/index.

    Selections, feedback, and memo mutations must be serialized per session
    (the server holds a per-session lock); reads may overlap freely.
    """

    def __init__(
        self,
        dataset: Dataset,
        groups: GroupSet,
        index: SimilarityIndex,
        params: SessionParams | None = None,
    ):
        self.dataset = dataset
        self.groups = groups
        self.index = index
        self.params = params or SessionParams()
        self.feedback = FeedbackVector()
        self.history: list[ExplorationStep] = []
        self.memo = Memo()
        self.current: CurrentScreen | None = None

    # -- selection steps ---------------------------------------------------

    def root_selection(self) -> GroupSelection:
        """The entry screen: choose among the highest-support groups, with the
        whole universe as the coverage parent."""
        pool = root_pool(self.groups)
        sel = select_k(
            self.groups,
            pool,
            self.params.k,
            self.params.alpha,
            self.dataset.universe_mask,
            self.params.budget_ms,
        )
        self.current = CurrentScreen(ROOT, sel)
        return sel

    def eligible(self, gid: int) -> bool:
        if self.current is not None and gid in self.current.selection.ids:
            return True
        return gid in self.memo.groups

    def select(self, gid: int) -> GroupSelection:
        """Click a shown (or bookmarked) group: learn from the choice, record
        the step, and return the next screen."""
        if not self.groups.valid_gid(gid):
            raise IneligibleGroup(f"unknown group id {gid}")
        if not self.eligible(gid):
            raise IneligibleGroup(f"group {gid} is neither shown nor bookmarked")
        start = time.perf_counter()
        group = self.groups[gid]
        self.feedback = apply_feedback(self.feedback, group, self.params.delta)
        screen = self.current
        on_screen = screen is not None and gid in screen.selection.ids
        # A jump to a bookmarked group did not come from the screen; its step
        # records the jump target itself so chosen stays within shown.
        step = ExplorationStep(
            focus=screen.focus if on_screen else ROOT,
            shown=screen.selection.ids if on_screen else (gid,),
            chosen=gid,
            diversity=screen.selection.diversity if on_screen else 1.0,
            coverage=screen.selection.coverage if on_screen else 0.0,
            elapsed_s=screen.selection.elapsed_s if on_screen else 0.0,
            budget_exhausted=screen.selection.budget_exhausted if on_screen else False,
            snapshot=self.feedback,
        )
        self.history.append(step)
        pool = candidate_pool(
            self.index,
            self.groups,
            self.feedback,
            group,
            self.params.theta,
            self.params.lam,
            self.params.pool_cap,
        )
        budget = self.params.budget_ms
        if budget is not None:
            # The budget covers the whole step; the greedy gets what is left.
            budget = max(budget - (time.perf_counter() - start) * 1000.0, 0.001)
        sel = select_k(self.groups, pool, self.params.k, self.params.alpha, group.members_mask, budget)
        sel = replace(sel, elapsed_s=time.perf_counter() - start)
        self.current = CurrentScreen(gid, sel)
        return sel

    def backtrack(self, step_index: int) -> CurrentScreen:
        """Return to the state right after click `step_index`. Feedback is
        restored from that step's snapshot; the memo is never rolled back."""
        if not (0 <= step_index < len(self.history)):
            raise ParameterError(
                f"step index {step_index} out of range (history has {len(self.history)} steps)"
            )
        target = self.history[step_index]
        if step_index + 1 < len(self.history):
            following = self.history[step_index + 1]
            restored = GroupSelection(
                ids=following.shown,
                diversity=following.diversity,
                coverage=following.coverage,
                objective=self.params.alpha * following.diversity
                + (1 - self.params.alpha) * following.coverage,
                elapsed_s=following.elapsed_s,
                budget_exhausted=following.budget_exhausted,
            )
            self.current = CurrentScreen(target.chosen, restored)
        # else: the screen produced by the last click is already current
        self.feedback = target.snapshot
        self.history = self.history[: step_index + 1]
        return self.current

    # -- feedback and memo ---------------------------------------------------

    def unlearn(self, entity: str) -> bool:
        before = len(self.feedback)
        self.feedback = unlearn(self.feedback, entity)
        return len(self.feedback) != before

    def memo_add(self, ref: str) -> Memo:
        """Bookmark "g:<gid>" or "u:<user_id>", keeping insertion order."""
        kind, _, payload = ref.partition(":")
        if kind == "g" and payload:
            gid = int(payload)
            if not self.groups.valid_gid(gid):
                raise IneligibleGroup(f"unknown group id {gid}")
            self.memo.add_group(gid)
        elif kind == "u" and payload:
            if payload not in self.dataset.user_index:
                raise ParameterError(f"unknown user id {payload!r}")
            self.memo.add_user(payload)
        else:
            raise ParameterError(f"memo ref must be g:<gid> or u:<user_id>, got {ref!r}")
        return self.memo

    def memo_remove(self, ref: str) -> bool:
        kind, _, payload = ref.partition(":")
        if kind not in ("g", "u") or not payload:
            raise ParameterError(f"memo ref must be g:<gid> or u:<user_id>, got {ref!r}")
        return self.memo.remove(kind, payload)

    # -- decoding helpers ------------------------------------------------------

    def decode_entity(self, entity: str) -> str:
        ns, idx = parse_entity(entity)
        if ns == "u":
            return f"user:{self.dataset.users[idx]}"
        return self.dataset.tokens[idx]
