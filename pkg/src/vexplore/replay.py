"""Session export/import, scripted replay, and the latency bench harness.

Exports are canonical JSON (sorted keys, fixed separators) and exclude
wall-clock telemetry, so replaying a session in deterministic mode (no budget)
reproduces the export byte-for-byte.
"""

from __future__ import annotations

import gc
import json
import statistics
from dataclasses import replace

import numpy as np

from .errors import DataFormatError, ParameterError
from .explore import (
    CurrentScreen,
    ExplorationStep,
    FeedbackVector,
    GroupSelection,
    Memo,
    Session,
    SessionParams,
)
from .ingest import Dataset
from .mining import GroupSet
from .simindex import SimilarityIndex

EXPORT_FORMAT = "vexplore-session/1"


def export_session(session: Session) -> str:
    """Canonical JSON document of the full session state."""
    doc = {
        "format": EXPORT_FORMAT,
        "dataset_digest": session.dataset.digest,
        "params": session.params.to_dict(),
        "feedback": dict(session.feedback.scores),
        "history": [
            {
                "focus": step.focus,
                "shown": list(step.shown),
                "chosen": step.chosen,
                "diversity": step.diversity,
                "coverage": step.coverage,
                "snapshot": dict(step.snapshot.scores),
            }
            for step in session.history
        ],
        "current": None
        if session.current is None
        else {
            "focus": session.current.focus,
            "shown": list(session.current.selection.ids),
            "diversity": session.current.selection.diversity,
            "coverage": session.current.selection.coverage,
        },
        "memo": {"groups": list(session.memo.groups), "users": list(session.memo.users)},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def import_session(
    raw: str, dataset: Dataset, groups: GroupSet, index: SimilarityIndex
) -> Session:
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"session document is not valid JSON: {exc}")
    if doc.get("format") != EXPORT_FORMAT:
        raise DataFormatError("unrecognized session document format")
    if doc.get("dataset_digest") != dataset.digest:
        raise DataFormatError(
            "session was exported from a different dataset",
            expected=dataset.digest,
            found=doc.get("dataset_digest"),
        )
    session = Session(dataset, groups, index, SessionParams.from_dict(doc.get("params", {})))
    session.feedback = FeedbackVector(dict(doc.get("feedback", {})))
    for item in doc.get("history", []):
        session.history.append(
            ExplorationStep(
                focus=item["focus"],
                shown=tuple(item["shown"]),
                chosen=item["chosen"],
                diversity=item["diversity"],
                coverage=item["coverage"],
                elapsed_s=0.0,
                budget_exhausted=False,
                snapshot=FeedbackVector(dict(item["snapshot"])),
            )
        )
    cur = doc.get("current")
    if cur is not None:
        alpha = session.params.alpha
        session.current = CurrentScreen(
            focus=cur["focus"],
            selection=GroupSelection(
                ids=tuple(cur["shown"]),
                diversity=cur["diversity"],
                coverage=cur["coverage"],
                objective=alpha * cur["diversity"] + (1 - alpha) * cur["coverage"],
                elapsed_s=0.0,
                budget_exhausted=False,
            ),
        )
    memo = doc.get("memo", {})
    for gid in memo.get("groups", []):
        session.memo.add_group(gid)
    for uid in memo.get("users", []):
        session.memo.add_user(uid)
    return session


# -- scripted replay ----------------------------------------------------------


def load_script(raw: str) -> list[dict]:
    """Parse a replay script: a JSON array of single-key directives
    {select|backtrack|memo|unlearn}, optionally wrapped with params:
    {"params": {...}, "steps": [...]}."""
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"replay script is not valid JSON: {exc}")
    steps = doc["steps"] if isinstance(doc, dict) else doc
    if not isinstance(steps, list):
        raise DataFormatError("replay script must be a list of directives")
    known = {"select", "backtrack", "memo", "unlearn"}
    for i, step in enumerate(steps):
        if not isinstance(step, dict) or len(step) != 1 or not known & set(step):
            raise DataFormatError(f"directive {i} must be one of {sorted(known)}: {step!r}")
    return steps


def script_params(raw: str) -> dict:
    doc = json.loads(raw)
    return doc.get("params", {}) if isinstance(doc, dict) else {}


def _resolve_gid(session: Session, target) -> int:
    if isinstance(target, int):
        return target
    if isinstance(target, list):
        wanted = sorted(session.dataset.token_index[t] for t in target)
        for g in session.groups.groups:
            if list(g.descriptor) == wanted:
                return g.id
        raise ParameterError(f"no group with descriptor {target!r}")
    raise ParameterError(f"select target must be a group id or a descriptor list, got {target!r}")


def run_script(session: Session, steps: list[dict]) -> list[dict]:
    """Drive a session through a directive list. The first screen always comes
    from the root selection. Returns one report entry per directive."""
    reports = []
    sel = session.root_selection()
    reports.append(_step_report("root", None, sel))
    for directive in steps:
        if "select" in directive:
            gid = _resolve_gid(session, directive["select"])
            sel = session.select(gid)
            reports.append(_step_report("select", gid, sel))
        elif "backtrack" in directive:
            screen = session.backtrack(int(directive["backtrack"]))
            reports.append(
                {
                    "op": "backtrack",
                    "arg": directive["backtrack"],
                    "shown": list(screen.selection.ids) if screen else [],
                }
            )
        elif "memo" in directive:
            session.memo_add(str(directive["memo"]))
            reports.append({"op": "memo", "arg": directive["memo"]})
        elif "unlearn" in directive:
            removed = session.unlearn(str(directive["unlearn"]))
            reports.append({"op": "unlearn", "arg": directive["unlearn"], "removed": removed})
    return reports


def _step_report(op: str, gid, sel: GroupSelection) -> dict:
    return {
        "op": op,
        "arg": gid,
        "shown": list(sel.ids),
        "diversity": round(sel.diversity, 6),
        "coverage": round(sel.coverage, 6),
        "elapsed_ms": round(sel.elapsed_s * 1000.0, 3),
        "budget_exhausted": sel.budget_exhausted,
    }


def replay_from_export(
    raw: str, dataset: Dataset, groups: GroupSet, index: SimilarityIndex
) -> Session:
    """Re-drive a fresh deterministic session through an export's click
    sequence. The result re-exports byte-identically when the export was
    produced in deterministic mode."""
    doc = json.loads(raw)
    if doc.get("format") != EXPORT_FORMAT:
        raise DataFormatError("unrecognized session document format")
    params = SessionParams.from_dict(doc.get("params", {}))
    session = Session(dataset, groups, index, replace(params, budget_ms=None))
    session.root_selection()
    for step in doc.get("history", []):
        gid = step["chosen"]
        if not session.eligible(gid):
            session.memo.add_group(gid)  # the original click was a bookmark jump
        session.select(gid)
    # The final memo comes from the document wholesale; bookmarks injected for
    # eligibility above must not leak into it.
    memo = doc.get("memo", {})
    session.memo = Memo(groups=list(memo.get("groups", [])), users=list(memo.get("users", [])))
    return session


# -- bench harness -------------------------------------------------------------


def run_bench(
    dataset: Dataset,
    groups: GroupSet,
    index: SimilarityIndex,
    budget_ms: float = 100.0,
    steps: int = 200,
    seed: int = 0,
) -> dict:
    """Random-walk latency benchmark: repeatedly select a shown group and
    record per-step latency and quality. Dead ends restart from the root."""
    params = SessionParams(budget_ms=budget_ms)
    session = Session(dataset, groups, index, params)
    # The corpus is immutable for the whole run; keeping it out of the
    # collector's reach removes multi-hundred-ms gen2 pauses from the tail.
    gc.collect()
    gc.freeze()
    rng = np.random.default_rng(seed)
    latencies: list[float] = []
    diversities: list[float] = []
    coverages: list[float] = []
    full_k = 0
    exhausted = 0
    sel = session.root_selection()
    for _ in range(steps):
        if sel.empty:
            sel = session.root_selection()
            if sel.empty:
                break
        gid = int(sel.ids[int(rng.integers(0, len(sel.ids)))])
        sel = session.select(gid)
        latencies.append(sel.elapsed_s * 1000.0)
        if not sel.empty:
            diversities.append(sel.diversity)
            coverages.append(sel.coverage)
        if len(sel.ids) == min(params.k, len(groups)):
            full_k += 1
        if sel.budget_exhausted:
            exhausted += 1
    lat = sorted(latencies)

    def pct(p: float) -> float:
        if not lat:
            return 0.0
        return lat[min(len(lat) - 1, int(round(p / 100.0 * (len(lat) - 1))))]

    return {
        "steps": len(latencies),
        "budget_ms": budget_ms,
        "latency_ms": {
            "p50": round(pct(50), 3),
            "p90": round(pct(90), 3),
            "p95": round(pct(95), 3),
            "p99": round(pct(99), 3),
            "max": round(lat[-1], 3) if lat else 0.0,
        },
        "full_k_fraction": round(full_k / len(latencies), 4) if latencies else 0.0,
        "budget_exhausted_fraction": round(exhausted / len(latencies), 4) if latencies else 0.0,
        "mean_diversity": round(statistics.mean(diversities), 4) if diversities else 0.0,
        "mean_coverage": round(statistics.mean(coverages), 4) if coverages else 0.0,
    }
