"""Closed frequent itemset mining over the transaction corpus.

Every closed itemset with support >= minsup becomes a user group: the
descriptor is the common token set, the members are exactly the users whose
transactions contain it. The miner is a depth-first enumeration with
prefix-preserving closure extension, so each closed set is produced exactly
once without storing previously found sets. ``brute_force_closed`` is the
independent oracle used by the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DataFormatError, GroupCapExceeded, ParameterError
from .ingest import Dataset

DEFAULT_GROUP_CAP = 5_000_000


@dataclass(frozen=True)
class Group:
    id: int
    descriptor: tuple[int, ...]
    members_mask: int
    members: np.ndarray  # sorted user indices, int32
    support: int

    def decode_descriptor(self, dataset: Dataset) -> list[str]:
        return [dataset.tokens[t] for t in self.descriptor]


@dataclass
class GroupSet:
    groups: list[Group]
    universe: int
    minsup: int

    def __len__(self) -> int:
        return len(self.groups)

    def __getitem__(self, gid: int) -> Group:
        return self.groups[gid]

    def valid_gid(self, gid: int) -> bool:
        return 0 <= gid < len(self.groups)


def default_minsup(n_users: int) -> int:
    """max(2, 0.5% of the universe): singleton groups are just users."""
    return max(2, -(-n_users // 200))


def _mask_to_indices(mask: int, n_users: int) -> np.ndarray:
    buf = mask.to_bytes((n_users + 7) // 8, "little")
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    return np.nonzero(bits[:n_users])[0].astype(np.int32)


def _descriptor_of(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def _finalize(raw: list[tuple[int, int, int]], universe: int, minsup: int) -> GroupSet:
    """Sort (support desc, descriptor lexicographic asc) and assign dense ids."""
    decorated = [(-support, _descriptor_of(desc_mask), desc_mask, members) for desc_mask, members, support in raw]
    decorated.sort(key=lambda x: (x[0], x[1]))
    groups = [
        Group(
            id=i,
            descriptor=desc,
            members_mask=members,
            members=_mask_to_indices(members, universe),
            support=-negsup,
        )
        for i, (negsup, desc, _mask, members) in enumerate(decorated)
    ]
    return GroupSet(groups=groups, universe=universe, minsup=minsup)


def _transaction_masks(dataset: Dataset) -> list[int]:
    masks = []
    for txn in dataset.transactions:
        m = 0
        for t in txn:
            m |= 1 << t
        masks.append(m)
    return masks


def _tidlists(dataset: Dataset) -> list[int]:
    tids = [0] * dataset.n_tokens
    for u, txn in enumerate(dataset.transactions):
        bit = 1 << u
        for t in txn:
            tids[t] |= bit
    return tids


def mine_closed_groups(
    dataset: Dataset,
    minsup: int,
    group_cap: int = DEFAULT_GROUP_CAP,
) -> GroupSet:
    """Enumerate all closed itemsets with support >= minsup as groups.

    minsup must be >= 1 (an empty-descriptor group over disjoint transactions
    is ill-defined). minsup > number of users simply yields an empty result.
    """
    if minsup < 1:
        raise ParameterError("minsup must be a positive integer")
    if dataset.n_users == 0:
        raise DataFormatError("dataset has no users")

    n_users = dataset.n_users
    n_tokens = dataset.n_tokens
    txn_masks = _transaction_masks(dataset)
    tids = _tidlists(dataset)
    found: list[tuple[int, int, int]] = []

    if minsup > n_users:
        return _finalize(found, n_users, minsup)

    def closure(members: int, lower_bound: int) -> int:
        # Intersect member transactions; stop early once the running
        # intersection cannot shrink past the itemset we extended with.
        running = (1 << n_tokens) - 1
        m = members
        while m:
            low = m & -m
            running &= txn_masks[low.bit_length() - 1]
            if running == lower_bound:
                return running
            m ^= low
        return running

    def token_union(members: int) -> int:
        # Only tokens present in some member's transaction can extend the set.
        union = 0
        m = members
        while m:
            low = m & -m
            union |= txn_masks[low.bit_length() - 1]
            m ^= low
        return union

    universe = (1 << n_users) - 1
    root = closure(universe, 0)
    stack: list[tuple[int, int, int]] = [(root, universe, -1)]
    if root:
        found.append((root, universe, n_users))

    while stack:
        itemset, members, core = stack.pop()
        candidates = token_union(members) & ~itemset
        if core >= 0:
            candidates &= ~((1 << (core + 1)) - 1)
        while candidates:
            low = candidates & -candidates
            candidates ^= low
            i = low.bit_length() - 1
            sub = members & tids[i]
            support = sub.bit_count()
            if support < minsup:
                continue
            ext = closure(sub, itemset | low)
            below = low - 1
            if ext & below != itemset & below:
                continue  # not prefix-preserving; generated elsewhere
            found.append((ext, sub, support))
            if len(found) > group_cap:
                raise GroupCapExceeded(
                    f"group count exceeded cap of {group_cap}; raise minsup or the cap",
                    cap=group_cap,
                )
            stack.append((ext, sub, i))

    return _finalize(found, n_users, minsup)


def brute_force_closed(dataset: Dataset, minsup: int, max_tokens: int = 20) -> GroupSet:
    """Oracle miner: test every one of the 2^T itemsets for frequency and closure.

    Refuses corpora with more than `max_tokens` tokens; this exists for
    verification, not production use.
    """
    if minsup < 1:
        raise ParameterError("minsup must be a positive integer")
    if dataset.n_users == 0:
        raise DataFormatError("dataset has no users")
    n_tokens = dataset.n_tokens
    if n_tokens > max_tokens:
        raise ParameterError(f"brute force refuses corpora with more than {max_tokens} tokens")

    n_users = dataset.n_users
    txn_masks = _transaction_masks(dataset)
    tids = _tidlists(dataset)
    universe = (1 << n_users) - 1
    found: list[tuple[int, int, int]] = []
    for itemset in range(1, 1 << n_tokens):
        members = universe
        m = itemset
        while m:
            low = m & -m
            members &= tids[low.bit_length() - 1]
            m ^= low
        support = members.bit_count()
        if support < minsup:
            continue
        clo = (1 << n_tokens) - 1
        mm = members
        while mm:
            low = mm & -mm
            clo &= txn_masks[low.bit_length() - 1]
            mm ^= low
        if clo == itemset:
            found.append((itemset, members, support))
    return _finalize(found, n_users, minsup)


def groups_equal(a: GroupSet, b: GroupSet) -> bool:
    """Exact set equality of (descriptor, members) pairs."""
    pa = {(g.descriptor, g.members_mask) for g in a.groups}
    pb = {(g.descriptor, g.members_mask) for g in b.groups}
    return pa == pb


def group_lines(groups: GroupSet, dataset: Dataset) -> Iterator[str]:
    """One record per group, decoded for the on-disk group store."""
    header = {
        "format": "vexplore-groups/1",
        "dataset_digest": dataset.digest,
        "minsup": groups.minsup,
        "universe": groups.universe,
        "count": len(groups.groups),
    }
    yield json.dumps(header, sort_keys=True, separators=(",", ":"))
    for g in groups.groups:
        yield json.dumps(
            {
                "id": g.id,
                "descriptor": g.decode_descriptor(dataset),
                "members": [dataset.users[int(u)] for u in g.members],
                "support": g.support,
            },
            sort_keys=True,
            separators=(",", ":"),
        )


def groups_from_lines(lines: Iterable[str], dataset: Dataset) -> GroupSet:
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise DataFormatError("empty group store")
    if header.get("format") != "vexplore-groups/1":
        raise DataFormatError("unrecognized group store format")
    if header.get("dataset_digest") != dataset.digest:
        raise DataFormatError(
            "group store was built from a different dataset",
            expected=dataset.digest,
            found=header.get("dataset_digest"),
        )
    groups: list[Group] = []
    for line in it:
        if not line.strip():
            continue
        doc = json.loads(line)
        desc = tuple(sorted(dataset.token_index[t] for t in doc["descriptor"]))
        members_mask = 0
        for uid in doc["members"]:
            members_mask |= 1 << dataset.user_index[uid]
        groups.append(
            Group(
                id=doc["id"],
                descriptor=desc,
                members_mask=members_mask,
                members=_mask_to_indices(members_mask, dataset.n_users),
                support=doc["support"],
            )
        )
    groups.sort(key=lambda g: g.id)
    for i, g in enumerate(groups):
        if g.id != i:
            raise DataFormatError("group ids are not dense")
    return GroupSet(groups=groups, universe=dataset.n_users, minsup=header["minsup"])
