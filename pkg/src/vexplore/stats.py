"""Granular analysis of a group's members: coordinated-views histograms,
a filtered member table, per-dimension summaries, and a 2D member projection.

Dimensions are every demographic attribute plus two derived per-user action
statistics, ``action_count`` and ``mean_value``. Brushing follows the
coordinated-views rule: a dimension's own filter never applies to its own
histogram, only to everyone else's.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ParameterError, ProjectionError, UnknownDimension
from .ingest import CATEGORICAL, NUMERIC, Dataset
from .mining import Group

ACTION_COUNT = "action_count"
MEAN_VALUE = "mean_value"
NUMERIC_BINS = 10
RIDGE = 1e-6


@dataclass(frozen=True)
class Predicate:
    """Either a categorical value set or a closed numeric interval."""

    values: frozenset[str] | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if (self.values is None) == (self.lo is None and self.hi is None):
            raise ParameterError("predicate must be either a value set or an interval")
        if self.values is None and self.lo > self.hi:
            raise ParameterError(f"interval lo {self.lo} > hi {self.hi}")


@dataclass(frozen=True)
class FilterState:
    """At most one predicate per dimension."""

    predicates: dict[str, Predicate] = field(default_factory=dict)

    @classmethod
    def from_json(cls, raw: str) -> "FilterState":
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"filters are not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise ParameterError("filters must be a JSON object keyed by dimension")
        preds = {}
        for dim, spec in doc.items():
            if "values" in spec:
                preds[dim] = Predicate(values=frozenset(str(v) for v in spec["values"]))
            else:
                preds[dim] = Predicate(lo=float(spec["lo"]), hi=float(spec["hi"]))
        return cls(preds)

    def to_dict(self) -> dict:
        out = {}
        for dim, p in self.predicates.items():
            if p.values is not None:
                out[dim] = {"values": sorted(p.values)}
            else:
                out[dim] = {"lo": p.lo, "hi": p.hi}
        return out


@dataclass
class Histogram:
    dimension: str
    kind: str
    bins: list  # categorical values, or [lo, hi] interval pairs
    counts: list[int]
    missing: int


@dataclass
class ProjectionPoint:
    user_id: str
    x: float
    y: float
    label: str


class _Frame:
    """Per-group columnar view of member data, built once and reused."""

    def __init__(self, dataset: Dataset, group: Group, action_stats):
        order = sorted(range(len(group.members)), key=lambda i: dataset.users[int(group.members[i])])
        self.rows = [int(group.members[i]) for i in order]
        self.user_ids = [dataset.users[u] for u in self.rows]
        self.size = len(self.rows)
        counts, means = action_stats
        self.numeric: dict[str, np.ndarray] = {}
        self.categorical: dict[str, tuple[np.ndarray, list[str]]] = {}
        for attr in dataset.schema.attributes:
            if attr.kind == NUMERIC:
                col = np.full(self.size, np.nan)
                for i, u in enumerate(self.rows):
                    v = dataset.profiles[u].get(attr.name)
                    if v is not None:
                        col[i] = float(v)
                self.numeric[attr.name] = col
            else:
                raw = [dataset.profiles[u].get(attr.name) for u in self.rows]
                cats = sorted({v for v in raw if v is not None})
                lookup = {v: i for i, v in enumerate(cats)}
                codes = np.array([lookup.get(v, -1) for v in raw], dtype=np.int64)
                self.categorical[attr.name] = (codes, cats)
        self.numeric[ACTION_COUNT] = counts[self.rows].astype(float)
        mv = means[self.rows].copy()
        self.numeric[MEAN_VALUE] = mv
        # Fixed equal-width bin edges over the group's observed range, so
        # brushing never rebins.
        self.edges: dict[str, np.ndarray | None] = {}
        for dim, col in self.numeric.items():
            present = col[~np.isnan(col)]
            if present.size == 0:
                self.edges[dim] = None
                continue
            lo, hi = float(present.min()), float(present.max())
            if lo == hi:
                hi = lo + 1.0
            self.edges[dim] = np.linspace(lo, hi, NUMERIC_BINS + 1)

    @property
    def dimensions(self) -> list[str]:
        return list(self.categorical) + list(self.numeric)

    def mask_for(self, dim: str, pred: Predicate) -> np.ndarray:
        if dim in self.categorical:
            if pred.values is None:
                raise ParameterError(f"{dim} is categorical; filter must be a value set")
            codes, cats = self.categorical[dim]
            wanted = {i for i, c in enumerate(cats) if c in pred.values}
            return np.isin(codes, list(wanted)) if wanted else np.zeros(self.size, dtype=bool)
        if pred.values is not None:
            raise ParameterError(f"{dim} is numeric; filter must be an interval")
        col = self.numeric[dim]
        with np.errstate(invalid="ignore"):
            return (col >= pred.lo) & (col <= pred.hi)

    def selection_mask(self, filters: FilterState, exclude: str | None = None) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        for dim, pred in filters.predicates.items():
            if dim == exclude:
                continue
            if dim not in self.categorical and dim not in self.numeric:
                raise UnknownDimension(f"unknown dimension {dim!r}")
            mask &= self.mask_for(dim, pred)
        return mask


class StatsEngine:
    """Pure reads over immutable data; frames are cached per group id."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self._frames: dict[int, _Frame] = {}
        self._action_stats: tuple[np.ndarray, np.ndarray] | None = None

    def _per_user_action_stats(self) -> tuple[np.ndarray, np.ndarray]:
        if self._action_stats is None:
            n = self.dataset.n_users
            counts = np.zeros(n, dtype=np.int64)
            sums = np.zeros(n, dtype=np.float64)
            for a in self.dataset.actions:
                u = self.dataset.user_index[a.user_id]
                counts[u] += 1
                sums[u] += a.value
            means = np.full(n, np.nan)
            nz = counts > 0
            means[nz] = sums[nz] / counts[nz]
            self._action_stats = (counts, means)
        return self._action_stats

    def frame(self, group: Group) -> _Frame:
        fr = self._frames.get(group.id)
        if fr is None:
            fr = _Frame(self.dataset, group, self._per_user_action_stats())
            self._frames[group.id] = fr
        return fr

    def dimensions(self, group: Group) -> list[str]:
        return self.frame(group).dimensions

    def histogram(self, group: Group, dimension: str, filters: FilterState) -> Histogram:
        """Counts over members passing every *other* dimension's predicate."""
        fr = self.frame(group)
        if dimension not in fr.categorical and dimension not in fr.numeric:
            raise UnknownDimension(f"unknown dimension {dimension!r}")
        mask = fr.selection_mask(filters, exclude=dimension)
        if dimension in fr.categorical:
            codes, cats = fr.categorical[dimension]
            sel = codes[mask]
            counts = np.bincount(sel[sel >= 0], minlength=len(cats)) if sel.size else np.zeros(len(cats), dtype=int)
            missing = int((sel < 0).sum())
            return Histogram(dimension, CATEGORICAL, list(cats), [int(c) for c in counts], missing)
        col = fr.numeric[dimension][mask]
        edges = fr.edges[dimension]
        if edges is None:
            return Histogram(dimension, NUMERIC, [], [], int(np.isnan(col).sum()))
        present = col[~np.isnan(col)]
        counts, _ = np.histogram(present, bins=edges)
        bins = [[float(edges[i]), float(edges[i + 1])] for i in range(len(edges) - 1)]
        return Histogram(dimension, NUMERIC, bins, [int(c) for c in counts], int(np.isnan(col).sum()))

    def histograms(self, group: Group, filters: FilterState) -> list[Histogram]:
        return [self.histogram(group, dim, filters) for dim in self.dimensions(group)]

    def filtered_members(self, group: Group, filters: FilterState) -> list[dict]:
        """Members passing ALL predicates, ordered by user_id."""
        fr = self.frame(group)
        mask = fr.selection_mask(filters)
        counts, means = self._per_user_action_stats()
        rows = []
        for i in np.nonzero(mask)[0]:
            u = fr.rows[i]
            mean = means[u]
            rows.append(
                {
                    "user_id": fr.user_ids[i],
                    "demographics": dict(self.dataset.profiles[u]),
                    ACTION_COUNT: int(counts[u]),
                    MEAN_VALUE: None if math.isnan(mean) else float(mean),
                }
            )
        return rows

    def summary_stats(self, group: Group) -> dict:
        """Per dimension: categorical shares over present values, numeric min/max/mean."""
        fr = self.frame(group)
        out: dict[str, dict] = {}
        for dim, (codes, cats) in fr.categorical.items():
            present = codes[codes >= 0]
            if present.size == 0:
                out[dim] = {"kind": CATEGORICAL, "shares": {}}
                continue
            counts = np.bincount(present, minlength=len(cats))
            total = counts.sum()
            out[dim] = {
                "kind": CATEGORICAL,
                "shares": {cats[i]: float(counts[i] / total) for i in range(len(cats)) if counts[i]},
            }
        for dim, col in fr.numeric.items():
            present = col[~np.isnan(col)]
            if present.size == 0:
                out[dim] = {"kind": NUMERIC, "min": None, "max": None, "mean": None}
            else:
                out[dim] = {
                    "kind": NUMERIC,
                    "min": float(present.min()),
                    "max": float(present.max()),
                    "mean": float(present.mean()),
                }
        return out

    # -- 2D projection -------------------------------------------------------

    def _feature_matrix(self, fr: _Frame, label_dimension: str, keep: np.ndarray) -> np.ndarray:
        cols = []
        for dim, col in fr.numeric.items():
            v = col[keep].copy()
            present = v[~np.isnan(v)]
            fill = float(present.mean()) if present.size else 0.0
            v[np.isnan(v)] = fill
            std = v.std()
            mean = v.mean()
            cols.append((v - mean) / (std if std > 0 else 1.0))
        for dim, (codes, cats) in fr.categorical.items():
            if dim == label_dimension:
                continue
            sel = codes[keep]
            for ci in range(len(cats)):
                cols.append((sel == ci).astype(float))
        if not cols:
            raise ProjectionError("no features besides the label dimension")
        return np.column_stack(cols)

    def lda_project(self, group: Group, label_dimension: str | None = None) -> list[ProjectionPoint]:
        """2D projection of members, separated by a categorical label.

        Axes come from the generalized eigenproblem on the between/within
        class scatter (ridge-regularized); with exactly two classes the
        second axis is the first principal component of the within-class
        residual. Axis signs follow a fixed convention: first nonzero
        component positive.
        """
        fr = self.frame(group)
        if label_dimension is None:
            for attr in self.dataset.schema.attributes:
                if attr.kind == CATEGORICAL:
                    label_dimension = attr.name
                    break
            if label_dimension is None:
                raise ProjectionError("dataset has no categorical attribute to label by")
        if label_dimension not in fr.categorical:
            raise UnknownDimension(f"label dimension {label_dimension!r} is not categorical")
        codes, cats = fr.categorical[label_dimension]
        keep = codes >= 0
        labels = codes[keep]
        classes = np.unique(labels)
        if len(classes) < 2:
            raise ProjectionError("need at least 2 label classes among members")
        if int(keep.sum()) < 3:
            raise ProjectionError("need at least 3 labeled members")
        X = self._feature_matrix(fr, label_dimension, keep)
        if not np.any(X.std(axis=0) > 0):
            raise ProjectionError("zero-variance feature space")

        dim = X.shape[1]
        mu = X.mean(axis=0)
        s_w = np.zeros((dim, dim))
        s_b = np.zeros((dim, dim))
        class_means = {}
        for c in classes:
            xc = X[labels == c]
            mc = xc.mean(axis=0)
            class_means[int(c)] = mc
            centered = xc - mc
            s_w += centered.T @ centered
            d = (mc - mu)[:, None]
            s_b += len(xc) * (d @ d.T)

        vals, vecs = linalg.eigh(s_b, s_w + RIDGE * np.eye(dim))
        axis1 = _signed(vecs[:, -1])
        if len(classes) == 2:
            residual = X - np.array([class_means[int(c)] for c in labels])
            _, _, vt = np.linalg.svd(residual, full_matrices=False)
            axis2 = _signed(vt[0])
        else:
            axis2 = _signed(vecs[:, -2])

        coords = (X - mu) @ np.column_stack([axis1, axis2])
        kept_ids = [fr.user_ids[i] for i in np.nonzero(keep)[0]]
        return [
            ProjectionPoint(uid, float(coords[i, 0]), float(coords[i, 1]), cats[labels[i]])
            for i, uid in enumerate(kept_ids)
        ]


def _signed(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    for x in v:
        if abs(x) > 1e-12:
            return v if x > 0 else -v
    return v
