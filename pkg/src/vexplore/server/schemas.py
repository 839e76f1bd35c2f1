"""Request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field


class ApiError(BaseModel):
    code: str
    message: str
    detail: dict[str, Any] = Field(default_factory=dict)


class DatasetInfo(BaseModel):
    id: str
    digest: str
    users: int
    tokens: int
    actions: int
    groups: Optional[int] = None
    indexed: bool = False


class MineRequest(BaseModel):
    minsup: Optional[int] = None


class IndexRequest(BaseModel):
    fraction: float = 0.1


class JobStatus(BaseModel):
    id: str
    kind: str
    dataset: str
    status: str  # queued | running | done | error
    progress: float = 0.0
    result: Optional[dict[str, Any]] = None
    error: Optional[ApiError] = None


class SessionParamsModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    k: int = 5
    alpha: float = 0.5
    theta: float = 0.05
    lam: float = Field(default=1.0, alias="lambda")
    delta: float = 0.1
    budget_ms: Optional[float] = 100.0
    pool_cap: int = 200
    deterministic: bool = False


class SessionCreate(BaseModel):
    dataset: str
    params: Optional[SessionParamsModel] = None


class GroupCard(BaseModel):
    gid: int
    descriptor: list[str]
    support: int


class SelectionResponse(BaseModel):
    dataset_digest: str
    session: str
    focus: int | str
    groups: list[GroupCard]
    diversity: float
    coverage: float
    objective: float
    elapsed_ms: float
    budget_exhausted: bool


class SelectRequest(BaseModel):
    gid: int


class BacktrackRequest(BaseModel):
    step: int


class ContextEntry(BaseModel):
    entity: str
    label: str
    score: float


class ContextResponse(BaseModel):
    dataset_digest: str
    session: str
    entries: list[ContextEntry]


class UnlearnResponse(BaseModel):
    dataset_digest: str
    session: str
    removed: bool
    warning: Optional[str] = None


class HistoryStep(BaseModel):
    index: int
    focus: int | str
    shown: list[int]
    chosen: Optional[int]
    diversity: float
    coverage: float
    elapsed_ms: float
    budget_exhausted: bool


class HistoryResponse(BaseModel):
    dataset_digest: str
    session: str
    steps: list[HistoryStep]


class MemoRequest(BaseModel):
    id: str  # "g:<gid>" or "u:<user_id>"


class MemoResponse(BaseModel):
    dataset_digest: str
    session: str
    groups: list[GroupCard]
    users: list[str]


class SessionState(BaseModel):
    dataset_digest: str
    session: str
    dataset: str
    params: dict[str, Any]
    current: Optional[SelectionResponse]
    history_length: int
    memo_size: int
    feedback_size: int


class GroupDetail(BaseModel):
    dataset_digest: str
    gid: int
    descriptor: list[str]
    support: int


class HistogramModel(BaseModel):
    dimension: str
    kind: str
    bins: list[Any]
    counts: list[int]
    missing: int


class StatsResponse(BaseModel):
    dataset_digest: str
    gid: int
    filters: dict[str, Any]
    histograms: list[HistogramModel]
    summary: dict[str, Any]


class MemberRow(BaseModel):
    user_id: str
    demographics: dict[str, Any]
    action_count: int
    mean_value: Optional[float]


class MembersResponse(BaseModel):
    dataset_digest: str
    gid: int
    filters: dict[str, Any]
    rows: list[MemberRow]


class ProjectionPointModel(BaseModel):
    user_id: str
    x: float
    y: float
    label: str


class ProjectionResponse(BaseModel):
    dataset_digest: str
    gid: int
    label_dimension: str
    excluded: int
    points: list[ProjectionPointModel]


class ImportRequest(BaseModel):
    dataset: str
    document: str
