"""Per-group truncated neighbor lists ordered by Jaccard similarity of members.

This materializes the group graph used for navigation: an edge exists exactly
when two groups share at least one member. Each group's list keeps only the
top ``ceil(f * (|G|-1))`` neighbors (default f = 0.10), which is enough for
k-at-a-time exploration while keeping the index small.

The builder never scans all group pairs: co-membership counts come from a
sparse group-by-user incidence product, so only groups that actually share a
user are ever compared. ``build_index_naive`` is the quadratic reference used
by the tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from .errors import DataFormatError, GroupNotFound, ParameterError
from .mining import GroupSet


def jaccard(a: int, b: int) -> float:
    """Jaccard similarity of two member bitmasks; 0.0 when both are empty."""
    union = (a | b).bit_count()
    if union == 0:
        return 0.0
    return (a & b).bit_count() / union


@dataclass
class SimilarityIndex:
    """neighbors[g] is sorted by similarity desc, ties by group id asc."""

    neighbors: list[list[tuple[int, float]]]
    fraction: float
    group_count: int

    def list_for(self, gid: int) -> list[tuple[int, float]]:
        if not (0 <= gid < self.group_count):
            raise GroupNotFound(f"unknown group id {gid}")
        return self.neighbors[gid]


def truncation_length(n_groups: int, fraction: float) -> int:
    """ceil(f * (|G|-1)) with exact rational arithmetic.

    Float ceil would round ceil(0.1 * 100) up to 11; the fraction is
    interpreted through its decimal string to avoid that.
    """
    frac = Fraction(str(fraction))
    num = frac.numerator * (n_groups - 1)
    den = frac.denominator
    return -(-num // den)


def _check_fraction(fraction: float) -> None:
    if not (0 < fraction <= 1):
        raise ParameterError(f"fraction must be in (0, 1], got {fraction}")


def neighbors(index: SimilarityIndex, gid: int, limit: int) -> list[tuple[int, float]]:
    """First min(limit, stored length) entries of gid's list."""
    if limit < 1:
        raise ParameterError("limit must be >= 1")
    return index.list_for(gid)[:limit]


def build_index(groups: GroupSet, fraction: float = 0.10) -> SimilarityIndex:
    _check_fraction(fraction)
    n = len(groups)
    if n < 1:
        raise ParameterError("cannot index an empty group set")
    keep = truncation_length(n, fraction)
    supports = np.array([g.support for g in groups.groups], dtype=np.int64)

    # Inverted user -> group-list structure (CSR): a pair of groups is looked
    # at only if they co-occur in some user's membership list, and a bincount
    # over those lists yields |g ∩ h| for every co-occurring h at once.
    universe = max(groups.universe, 1)
    per_user = np.zeros(universe + 1, dtype=np.int64)
    for g in groups.groups:
        per_user[g.members + 1] += 1
    offsets = np.cumsum(per_user)
    flat = np.empty(offsets[-1], dtype=np.int64)
    cursor = offsets[:-1].copy()
    for g in groups.groups:
        flat[cursor[g.members]] = g.id
        cursor[g.members] += 1

    out: list[list[tuple[int, float]]] = []
    for g in groups.groups:
        if g.support == 0:
            out.append([])
            continue
        gathered = _gather_rows(flat, offsets, g.members)
        if gathered.size * 4 < n:
            cols, inter = np.unique(gathered, return_counts=True)
            keep_mask = cols != g.id
            cols = cols[keep_mask]
            inter = inter[keep_mask].astype(np.float64)
        else:
            counts = np.bincount(gathered, minlength=n)
            counts[g.id] = 0
            cols = np.nonzero(counts)[0]
            inter = counts[cols].astype(np.float64)
        if cols.size == 0:
            out.append([])
            continue
        sims = inter / (g.support + supports[cols] - inter)
        if cols.size > keep:
            # kth-largest similarity; ties at the cut resolved by group id asc
            kth = np.partition(sims, cols.size - keep)[cols.size - keep]
            above = sims > kth
            at = np.nonzero(sims == kth)[0][: keep - int(above.sum())]
            sel = np.concatenate([np.nonzero(above)[0], at])
            cols, sims = cols[sel], sims[sel]
        order = np.lexsort((cols, -sims))
        out.append(list(zip(cols[order].tolist(), sims[order].tolist())))
    return SimilarityIndex(neighbors=out, fraction=fraction, group_count=n)


def _gather_rows(flat: np.ndarray, offsets: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Concatenate flat[offsets[u]:offsets[u+1]] for every member u, without
    a Python-level loop: expand each run start over its length."""
    starts = offsets[members]
    lens = offsets[members + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=flat.dtype)
    run_starts = np.repeat(starts, lens)
    within = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lens) - lens, lens)
    return flat[run_starts + within]


def build_index_naive(groups: GroupSet, fraction: float = 0.10) -> SimilarityIndex:
    """Reference builder: compare every pair of groups directly."""
    _check_fraction(fraction)
    n = len(groups)
    if n < 1:
        raise ParameterError("cannot index an empty group set")
    keep = truncation_length(n, fraction)
    masks = [g.members_mask for g in groups.groups]
    sims: list[list[tuple[float, int]]] = [[] for _ in range(n)]
    for a in range(n):
        ma = masks[a]
        row = sims[a]
        for b in range(a + 1, n):
            inter = (ma & masks[b]).bit_count()
            if inter == 0:
                continue
            s = inter / (ma | masks[b]).bit_count()
            row.append((s, b))
            sims[b].append((s, a))
    out = []
    for row in sims:
        row.sort(key=lambda e: (-e[0], e[1]))
        out.append([(gid, s) for s, gid in row[:keep]])
    return SimilarityIndex(neighbors=out, fraction=fraction, group_count=n)


def index_lines(index: SimilarityIndex, dataset_digest: str, minsup: int) -> Iterator[str]:
    """Versioned on-disk cache, keyed by (dataset digest, minsup, fraction)."""
    yield json.dumps(
        {
            "format": "vexplore-simindex/1",
            "dataset_digest": dataset_digest,
            "minsup": minsup,
            "fraction": index.fraction,
            "count": index.group_count,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    for gid, row in enumerate(index.neighbors):
        yield json.dumps({"g": gid, "n": [[other, sim] for other, sim in row]}, separators=(",", ":"))


def index_from_lines(
    lines: Iterable[str], dataset_digest: str, minsup: int, fraction: float | None = None
) -> SimilarityIndex:
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise DataFormatError("empty similarity index file")
    if header.get("format") != "vexplore-simindex/1":
        raise DataFormatError("unrecognized similarity index format")
    if header.get("dataset_digest") != dataset_digest or header.get("minsup") != minsup:
        raise DataFormatError(
            "similarity index cache does not match this dataset/minsup",
            expected=[dataset_digest, minsup],
            found=[header.get("dataset_digest"), header.get("minsup")],
        )
    if fraction is not None and header.get("fraction") != fraction:
        raise DataFormatError(
            "similarity index cache was built with a different fraction",
            expected=fraction,
            found=header.get("fraction"),
        )
    rows: list[list[tuple[int, float]]] = [[] for _ in range(header["count"])]
    for line in it:
        if not line.strip():
            continue
        doc = json.loads(line)
        rows[doc["g"]] = [(int(g), float(s)) for g, s in doc["n"]]
    return SimilarityIndex(neighbors=rows, fraction=header["fraction"], group_count=header["count"])
