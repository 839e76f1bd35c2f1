"""Seeded synthetic corpus generator.

Produces actions/demographics CSVs plus a schema document with planted
overlapping cohorts: each cohort is a user subset that co-acts on a few
cohort-private items, so the miner is guaranteed to recover a group whose
descriptor contains those item tokens. With cohort_levels > 1 each cohort is
a nested chain (every level a subset of its parent with its own items),
which gives the group graph drill-down paths from broad groups to small
specific ones. Background behavior (zipf-skewed item popularity, categorical
demographics, one bucketed numeric attribute) supplies the surrounding group
structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError

AGE_BUCKETS = (18.0, 30.0, 45.0, 60.0, 75.0, 99.0)
VALUES_PER_ATTRIBUTE = 5
VALUE_RANGE = (1.0, 5.0)


@dataclass(frozen=True)
class SynthParams:
    users: int = 300
    attributes: int = 4
    items: int = 80
    zipf: float = 1.1
    seed: int = 0
    cohorts: int = 12
    cohort_size: int = 40
    cohort_items: int = 3
    cohort_levels: int = 1
    cohort_disjoint: bool = False
    attribute_values: int = VALUES_PER_ATTRIBUTE
    actions_per_user: tuple[int, int] = (3, 12)

    def __post_init__(self):
        if self.users < 1 or self.attributes < 1:
            raise ParameterError("need at least one user and one attribute")
        if self.items < 0 or self.cohorts < 0 or self.cohort_items < 0:
            raise ParameterError("items/cohorts/cohort_items must be >= 0")
        if self.cohorts > 0 and not (1 <= self.cohort_size <= self.users):
            raise ParameterError("cohort_size must be in [1, users]")
        if self.cohort_disjoint and self.cohorts * self.cohort_size > self.users:
            raise ParameterError("disjoint cohorts cannot exceed the user count")
        if self.cohort_levels < 1:
            raise ParameterError("cohort_levels must be >= 1")
        if self.attribute_values < 2:
            raise ParameterError("attribute_values must be >= 2")
        if self.zipf <= 0:
            raise ParameterError("zipf skew must be > 0")


def _zipf_weights(n: int, skew: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** skew
    return w / w.sum()


def generate(params: SynthParams) -> dict:
    """Build the corpus in memory. Returns the CSV texts, the schema document,
    and the planted cohort layout (for tests that need the ground truth)."""
    rng = np.random.default_rng(params.seed)
    users = [f"u{idx:05d}" for idx in range(params.users)]

    attr_names = [f"attr{j}" for j in range(params.attributes - 1)] + ["age"]
    schema_doc: dict = {"value_range": list(VALUE_RANGE), "attributes": []}
    for name in attr_names[:-1]:
        schema_doc["attributes"].append({"name": name, "kind": "categorical"})
    schema_doc["attributes"].append({"name": "age", "kind": "numeric", "buckets": list(AGE_BUCKETS)})

    demo_rows = []
    cat_weights = _zipf_weights(params.attribute_values, params.zipf)
    for idx, uid in enumerate(users):
        cells = [uid]
        for j, name in enumerate(attr_names[:-1]):
            v = rng.choice(params.attribute_values, p=cat_weights)
            cells.append(f"{name[:1]}{j}v{v}")
        cells.append(str(int(rng.integers(18, 99))))
        demo_rows.append(",".join(cells))

    action_rows = []
    if params.items > 0:
        item_weights = _zipf_weights(params.items, params.zipf)
        lo, hi = params.actions_per_user
        for uid in users:
            n_acts = int(rng.integers(lo, hi + 1))
            picks = rng.choice(params.items, size=min(n_acts, params.items), replace=False, p=item_weights)
            for it in sorted(int(p) for p in picks):
                value = int(rng.integers(1, 6))
                action_rows.append(f"{uid},item{it},{value}")

    cohorts = []
    if params.cohorts > 0 and params.cohort_disjoint:
        perm = rng.permutation(params.users)
        tops = [
            sorted(int(u) for u in perm[c * params.cohort_size : (c + 1) * params.cohort_size])
            for c in range(params.cohorts)
        ]
    else:
        tops = [
            sorted(int(u) for u in rng.choice(params.users, size=params.cohort_size, replace=False))
            for c in range(params.cohorts)
        ]
    for c, top in enumerate(tops):
        # cohort_levels > 1 plants a binary tree: each node's two halves are
        # themselves cohorts with private items, giving clean drill-down paths
        nodes = [("r", 0, top)]
        while nodes:
            path, level, members = nodes.pop(0)
            item_ids = [f"citem{c}_{path}_{j}" for j in range(params.cohort_items)]
            for u in members:
                for item in item_ids:
                    value = int(rng.integers(1, 6))
                    action_rows.append(f"{users[u]},{item},{value}")
            cohorts.append(
                {"chain": c, "level": level, "node": path, "members": members, "items": item_ids}
            )
            if level + 1 < params.cohort_levels and len(members) >= 2:
                half = len(members) // 2
                shuffled = list(rng.permutation(members))
                nodes.append((path + "L", level + 1, sorted(int(u) for u in shuffled[:half])))
                nodes.append((path + "R", level + 1, sorted(int(u) for u in shuffled[half:])))

    actions_csv = "user_id,item_id,value\n" + "\n".join(action_rows) + ("\n" if action_rows else "")
    demographics_csv = "user_id," + ",".join(attr_names) + "\n" + "\n".join(demo_rows) + "\n"
    return {
        "actions_csv": actions_csv,
        "demographics_csv": demographics_csv,
        "schema": schema_doc,
        "cohorts": cohorts,
    }


def write_files(params: SynthParams, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = generate(params)
    paths = {
        "actions": out / "actions.csv",
        "demographics": out / "demographics.csv",
        "schema": out / "schema.json",
    }
    paths["actions"].write_text(corpus["actions_csv"], encoding="utf-8")
    paths["demographics"].write_text(corpus["demographics_csv"], encoding="utf-8")
    paths["schema"].write_text(json.dumps(corpus["schema"], indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "cohorts.json").write_text(
        json.dumps(corpus["cohorts"], indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths
