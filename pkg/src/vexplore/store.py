"""Dataset directory layout and (de)serialization.

A dataset directory holds line-oriented JSON files, stable across runs:

  dataset.json        metadata: schema, counts, token dictionary
  transactions.jsonl  one line per user: id, token ids, raw demographics
  actions.jsonl       one line per retained action record
  groups.jsonl        group store (after `mine`): header line + one group/line
  simindex.jsonl      neighbor-list cache (after `index`): header + one row/line

The group store and index files carry the dataset digest they were built from
and are rejected on mismatch.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import DataFormatError, NotReady
from .ingest import ActionRecord, Dataset, DemographicSchema
from .mining import GroupSet, group_lines, groups_from_lines
from .simindex import SimilarityIndex, index_from_lines, index_lines

DATASET_META = "dataset.json"
TRANSACTIONS = "transactions.jsonl"
ACTIONS = "actions.jsonl"
GROUPS = "groups.jsonl"
SIMINDEX = "simindex.jsonl"


def save_dataset(dataset: Dataset, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / DATASET_META).write_text(
        json.dumps(dataset.meta_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with (d / TRANSACTIONS).open("w", encoding="utf-8") as fh:
        for line in dataset.transaction_lines():
            fh.write(line + "\n")
    with (d / ACTIONS).open("w", encoding="utf-8") as fh:
        for line in dataset.action_lines():
            fh.write(line + "\n")
    return d


def load_dataset(directory: str | Path) -> Dataset:
    d = Path(directory)
    meta_path = d / DATASET_META
    if not meta_path.exists():
        raise DataFormatError(f"not a dataset directory (missing {DATASET_META}): {d}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != "vexplore-dataset/1":
        raise DataFormatError(f"unrecognized dataset format in {meta_path}")
    schema = DemographicSchema.from_dict(meta["schema"])
    tokens = list(meta["tokens"])
    users: list[str] = []
    transactions: list[tuple[int, ...]] = []
    profiles: list[dict] = []
    with (d / TRANSACTIONS).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            users.append(doc["user"])
            transactions.append(tuple(doc["tokens"]))
            profiles.append(doc["demographics"])
    actions: list[ActionRecord] = []
    actions_path = d / ACTIONS
    if actions_path.exists():
        with actions_path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                actions.append(ActionRecord(doc["user"], doc["item"], float(doc["value"])))
    return Dataset(users, tokens, transactions, actions, schema, profiles)


def save_groups(groups: GroupSet, dataset: Dataset, directory: str | Path) -> Path:
    path = Path(directory) / GROUPS
    with path.open("w", encoding="utf-8") as fh:
        for line in group_lines(groups, dataset):
            fh.write(line + "\n")
    return path


def load_groups(dataset: Dataset, directory: str | Path) -> GroupSet:
    path = Path(directory) / GROUPS
    if not path.exists():
        raise NotReady(f"no group store in {directory}; run mine first")
    with path.open(encoding="utf-8") as fh:
        return groups_from_lines(fh, dataset)


def save_index(index: SimilarityIndex, dataset: Dataset, groups: GroupSet, directory: str | Path) -> Path:
    path = Path(directory) / SIMINDEX
    with path.open("w", encoding="utf-8") as fh:
        for line in index_lines(index, dataset.digest, groups.minsup):
            fh.write(line + "\n")
    return path


def load_index(
    dataset: Dataset, groups: GroupSet, directory: str | Path, fraction: float | None = None
) -> SimilarityIndex:
    path = Path(directory) / SIMINDEX
    if not path.exists():
        raise NotReady(f"no similarity index in {directory}; run index first")
    with path.open(encoding="utf-8") as fh:
        return index_from_lines(fh, dataset.digest, groups.minsup, fraction)
