"""Shared fixtures: small hand-built corpora and the large synthetic
exploration stack used by the latency/acceptance tests (built once)."""

from __future__ import annotations

import json
import random
import tempfile
from pathlib import Path

import pytest

from vexplore import ingest, mining, simindex, synth
from vexplore.ingest import (
    ActionRecord,
    AttributeSpec,
    DemographicSchema,
    UserProfile,
    build_dataset,
)


@pytest.fixture
def spec_corpus():
    """Four users, two demographics, two items; small enough to check by hand."""
    schema = DemographicSchema(
        (AttributeSpec("gender", "categorical"), AttributeSpec("city", "categorical"))
    )
    profiles = [
        UserProfile("u1", {"gender": "M", "city": "P"}),
        UserProfile("u2", {"gender": "M", "city": "P"}),
        UserProfile("u3", {"gender": "F", "city": "P"}),
        UserProfile("u4", {"gender": "F", "city": "L"}),
    ]
    actions = [
        ActionRecord("u1", "b1", 4.0),
        ActionRecord("u2", "b1", 3.0),
        ActionRecord("u3", "b2", 5.0),
        ActionRecord("u4", "b2", 2.0),
    ]
    return build_dataset(actions, profiles, schema)


def random_action_corpus(rng: random.Random, max_users: int = 50, max_tokens: int = 12):
    """Random transaction corpus expressed through action tokens only."""
    n_users = rng.randint(1, max_users)
    n_items = rng.randint(1, max_tokens)
    density = rng.choice([0.1, 0.3, 0.6])
    actions = [
        ActionRecord(f"u{u}", f"i{t}", 1.0)
        for u in range(n_users)
        for t in range(n_items)
        if rng.random() < density
    ]
    profiles = [UserProfile(f"u{u}", {}) for u in range(n_users)]
    return build_dataset(actions, profiles, DemographicSchema(()))


def build_stack(params: synth.SynthParams, minsup: int, fraction: float = 0.1):
    """synth -> ingest -> mine -> index, all in a temp directory."""
    tmp = Path(tempfile.mkdtemp(prefix="vexplore-test-"))
    paths = synth.write_files(params, tmp)
    schema, value_range = ingest.load_schema_file(paths["schema"])
    loaded = ingest.load_actions(paths["actions"], value_range)
    profiles = ingest.load_demographics(paths["demographics"], schema)
    dataset = ingest.build_dataset(loaded.records, profiles, schema)
    groups = mining.mine_closed_groups(dataset, minsup)
    index = simindex.build_index(groups, fraction)
    cohorts = json.loads((tmp / "cohorts.json").read_text())
    return {
        "dir": tmp,
        "paths": paths,
        "dataset": dataset,
        "groups": groups,
        "index": index,
        "cohorts": cohorts,
        "minsup": minsup,
    }


BENCH_PARAMS = synth.SynthParams(
    users=800,
    attributes=4,
    items=200,
    zipf=0.9,
    seed=7,
    cohorts=60,
    cohort_size=25,
    cohort_items=3,
    actions_per_user=(4, 10),
)


@pytest.fixture(scope="session")
def bench_env():
    """~10.8k-group corpus for latency and scale tests (built once per run)."""
    env = build_stack(BENCH_PARAMS, minsup=5)
    assert len(env["groups"]) >= 10_000
    return env


@pytest.fixture(scope="session")
def small_env():
    """A few hundred groups; cheap enough for API and CLI tests."""
    params = synth.SynthParams(
        users=120, attributes=3, items=40, zipf=0.9, seed=3, cohorts=6, cohort_size=25
    )
    return build_stack(params, minsup=6)
