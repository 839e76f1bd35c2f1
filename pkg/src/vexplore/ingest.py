"""Loading, cleaning, and binarization of raw user CSVs.

The output of this stage is an immutable :class:`Dataset`: one transaction per
user, each a sorted duplicate-free list of token ids. Tokens mix demographics
(``d:<attr>=<value>``, numeric attributes mapped to bucket labels like
``d:age=[30,45)``) and actions (``a:<item_id>``). Everything downstream --
mining, similarity, statistics -- works off this corpus.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataFormatError, ParameterError

ACTIONS_HEADER = ("user_id", "item_id", "value")

CATEGORICAL = "categorical"
NUMERIC = "numeric"


def format_number(v: float) -> str:
    """Render a number the way tokens and labels expect: no trailing .0."""
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


@dataclass(frozen=True)
class ActionRecord:
    user_id: str
    item_id: str
    value: float


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    buckets: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise ParameterError(f"unknown attribute kind: {self.kind!r}")
        if "=" in self.name or not self.name:
            raise ParameterError(f"invalid attribute name: {self.name!r}")
        if self.kind == NUMERIC:
            if len(self.buckets) < 2:
                raise ParameterError(f"{self.name}: numeric attribute needs >= 2 bucket edges")
            if any(b >= a for b, a in zip(self.buckets, self.buckets[1:])):
                raise ParameterError(f"{self.name}: bucket edges must be strictly ascending")
        elif self.buckets:
            raise ParameterError(f"{self.name}: categorical attribute cannot declare buckets")

    def bucket_label(self, value: float) -> str | None:
        """Half-open bucket label for a numeric value, None when out of range.

        The last bucket also accepts value == last edge.
        """
        edges = self.buckets
        if value < edges[0] or value > edges[-1]:
            return None
        idx = min(bisect_right(edges, value) - 1, len(edges) - 2)
        return f"[{format_number(edges[idx])},{format_number(edges[idx + 1])})"


@dataclass(frozen=True)
class DemographicSchema:
    attributes: tuple[AttributeSpec, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ParameterError("attribute names must be unique")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def get(self, name: str) -> AttributeSpec | None:
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    def to_dict(self) -> dict:
        out = []
        for a in self.attributes:
            entry: dict = {"name": a.name, "kind": a.kind}
            if a.kind == NUMERIC:
                entry["buckets"] = list(a.buckets)
            out.append(entry)
        return {"attributes": out}

    @classmethod
    def from_dict(cls, doc: dict) -> "DemographicSchema":
        attrs = []
        for entry in doc.get("attributes", []):
            attrs.append(
                AttributeSpec(
                    name=entry["name"],
                    kind=entry["kind"],
                    buckets=tuple(entry.get("buckets", ())),
                )
            )
        return cls(attributes=tuple(attrs))


@dataclass
class UserProfile:
    user_id: str
    values: dict[str, object] = field(default_factory=dict)


@dataclass
class LoadedActions:
    """Cleaned action records plus how many raw rows were dropped."""

    records: list[ActionRecord]
    dropped: int


class Dataset:
    """Immutable binarized corpus. Do not mutate after construction."""

    def __init__(
        self,
        users: Sequence[str],
        tokens: Sequence[str],
        transactions: Sequence[Sequence[int]],
        actions: Sequence[ActionRecord],
        schema: DemographicSchema,
        profiles: Sequence[dict],
    ):
        self.users = tuple(users)
        self.tokens = tuple(tokens)
        self.transactions = tuple(tuple(t) for t in transactions)
        self.actions = tuple(actions)
        self.schema = schema
        # Raw per-user demographic values, aligned with `users`. Bucketed
        # tokens lose numeric precision; stats needs the original values.
        self.profiles = tuple(dict(p) for p in profiles)
        self.user_index = {u: i for i, u in enumerate(self.users)}
        self.token_index = {t: i for i, t in enumerate(self.tokens)}
        self._digest: str | None = None

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)

    @property
    def universe_mask(self) -> int:
        return (1 << len(self.users)) - 1

    def transaction_mask(self, user: int) -> int:
        m = 0
        for t in self.transactions[user]:
            m |= 1 << t
        return m

    def meta_dict(self) -> dict:
        return {
            "format": "vexplore-dataset/1",
            "users": len(self.users),
            "tokens": list(self.tokens),
            "schema": self.schema.to_dict(),
            "actions": len(self.actions),
        }

    def transaction_lines(self) -> Iterable[str]:
        for i, uid in enumerate(self.users):
            yield json.dumps(
                {"user": uid, "tokens": list(self.transactions[i]), "demographics": self.profiles[i]},
                sort_keys=True,
                separators=(",", ":"),
            )

    def action_lines(self) -> Iterable[str]:
        for a in self.actions:
            yield json.dumps(
                {"user": a.user_id, "item": a.item_id, "value": a.value},
                sort_keys=True,
                separators=(",", ":"),
            )

    @property
    def digest(self) -> str:
        """Stable content digest; identifies this corpus in caches and responses."""
        if self._digest is None:
            h = hashlib.sha256()
            h.update(json.dumps(self.meta_dict(), sort_keys=True).encode())
            for line in self.transaction_lines():
                h.update(line.encode())
                h.update(b"\n")
            for line in self.action_lines():
                h.update(line.encode())
                h.update(b"\n")
            self._digest = h.hexdigest()[:16]
        return self._digest


def _open_csv(path: str | Path):
    p = Path(path)
    if not p.exists():
        raise DataFormatError(f"file not found: {p}")
    return p.open(newline="", encoding="utf-8-sig")


def load_actions(path: str | Path, value_range: tuple[float, float]) -> LoadedActions:
    """Read and clean an actions CSV (header ``user_id,item_id,value``).

    Rows with a non-numeric or out-of-range value, or an empty id, are dropped
    and counted. Exact duplicate triples collapse to their first occurrence.
    """
    lo, hi = float(value_range[0]), float(value_range[1])
    if not lo <= hi:
        raise ParameterError(f"bad value range: [{lo}, {hi}]")
    records: list[ActionRecord] = []
    seen: set[tuple[str, str, float]] = set()
    dropped = 0
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return LoadedActions([], 0)
        if tuple(h.strip() for h in header) != ACTIONS_HEADER:
            raise DataFormatError(
                f"bad actions header: expected {','.join(ACTIONS_HEADER)}, got {','.join(header)}",
                row=1,
            )
        for rownum, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataFormatError(f"row {rownum}: expected 3 columns, got {len(row)}", row=rownum)
            user_id, item_id, raw = row[0], row[1], row[2]
            if not user_id or not item_id:
                dropped += 1
                continue
            try:
                value = float(raw)
            except ValueError:
                dropped += 1
                continue
            if not (lo <= value <= hi) or not math.isfinite(value):
                dropped += 1
                continue
            key = (user_id, item_id, value)
            if key in seen:
                continue
            seen.add(key)
            records.append(ActionRecord(user_id, item_id, value))
    return LoadedActions(records, dropped)


def load_demographics(path: str | Path, schema: DemographicSchema) -> list[UserProfile]:
    """Read a demographics CSV whose columns follow the schema order.

    One profile per distinct user_id (last row wins); unparseable or
    non-finite numeric cells become missing values.
    """
    expected = ["user_id"] + schema.names
    profiles: dict[str, UserProfile] = {}
    order: list[str] = []
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            got = ",".join(header) if header else "<empty>"
            raise DataFormatError(
                f"bad demographics header: expected {','.join(expected)}, got {got}", row=1
            )
        for rownum, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected):
                raise DataFormatError(
                    f"row {rownum}: expected {len(expected)} columns, got {len(row)}", row=rownum
                )
            user_id = row[0]
            if not user_id:
                continue
            values: dict[str, object] = {}
            for spec, cell in zip(schema.attributes, row[1:]):
                if cell == "":
                    continue
                if spec.kind == NUMERIC:
                    try:
                        num = float(cell)
                    except ValueError:
                        continue
                    if math.isfinite(num):
                        values[spec.name] = num
                else:
                    values[spec.name] = cell
            if user_id not in profiles:
                order.append(user_id)
            profiles[user_id] = UserProfile(user_id, values)
    return [profiles[u] for u in order]


def demographic_token(attr: AttributeSpec, value: object) -> str | None:
    if attr.kind == NUMERIC:
        label = attr.bucket_label(float(value))
        return None if label is None else f"d:{attr.name}={label}"
    return f"d:{attr.name}={value}"


def action_token(item_id: str) -> str:
    return f"a:{item_id}"


def decode_token(token: str) -> tuple[str, str]:
    """Split a token into its namespace and payload.

    Returns ("d", "attr=value") or ("a", "item_id").
    """
    ns, _, rest = token.partition(":")
    if ns not in ("d", "a") or not rest:
        raise ParameterError(f"undecodable token: {token!r}")
    return ns, rest


def build_dataset(
    actions: Sequence[ActionRecord],
    profiles: Sequence[UserProfile],
    schema: DemographicSchema,
) -> Dataset:
    """Binarize cleaned actions and profiles into the transaction corpus.

    User order: profiles first (input order), then action-only users in first
    appearance order. Token ids are assigned in first-seen order, which makes
    the whole Dataset deterministic for fixed inputs.
    """
    users: list[str] = []
    profile_by_user: dict[str, dict] = {}
    for p in profiles:
        if p.user_id not in profile_by_user:
            users.append(p.user_id)
        profile_by_user[p.user_id] = dict(p.values)
    items_by_user: dict[str, list[str]] = {}
    for a in actions:
        if a.user_id not in profile_by_user and a.user_id not in items_by_user:
            users.append(a.user_id)
        bucket = items_by_user.setdefault(a.user_id, [])
        if a.item_id not in bucket:
            bucket.append(a.item_id)
    if not users:
        raise DataFormatError("no users: nothing to mine")

    tokens: list[str] = []
    token_ids: dict[str, int] = {}

    def intern(tok: str) -> int:
        tid = token_ids.get(tok)
        if tid is None:
            tid = len(tokens)
            token_ids[tok] = tid
            tokens.append(tok)
        return tid

    transactions: list[tuple[int, ...]] = []
    user_profiles: list[dict] = []
    for uid in users:
        values = profile_by_user.get(uid, {})
        user_profiles.append(values)
        txn: set[int] = set()
        for attr in schema.attributes:
            if attr.name in values:
                tok = demographic_token(attr, values[attr.name])
                if tok is not None:
                    txn.add(intern(tok))
        for item in items_by_user.get(uid, ()):
            txn.add(intern(action_token(item)))
        transactions.append(tuple(sorted(txn)))

    return Dataset(users, tokens, transactions, actions, schema, user_profiles)


def load_schema_file(path: str | Path) -> tuple[DemographicSchema, tuple[float, float]]:
    """Parse the schema document: demographic attributes plus the action value range."""
    p = Path(path)
    if not p.exists():
        raise DataFormatError(f"file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"schema is not valid JSON: {exc}") from exc
    return parse_schema_doc(doc)


def parse_schema_doc(doc: dict) -> tuple[DemographicSchema, tuple[float, float]]:
    if "value_range" not in doc:
        raise DataFormatError("schema document missing value_range")
    rng = doc["value_range"]
    if not isinstance(rng, (list, tuple)) or len(rng) != 2:
        raise DataFormatError("value_range must be [lo, hi]")
    schema = DemographicSchema.from_dict(doc)
    return schema, (float(rng[0]), float(rng[1]))
