"""HTTP service exposing datasets, mining/indexing jobs, sessions,
exploration steps, stats, and memo. All bodies are JSON; errors use the
ApiError shape with stable codes; every dataset-derived response carries the
digest of the corpus it was computed from."""

from __future__ import annotations

import json
import tempfile
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .. import ingest, mining, simindex, store
from ..errors import (
    GroupNotFound,
    NotReady,
    ParameterError,
    VexploreError,
)
from ..explore import ROOT, Session, SessionParams
from ..mining import Group
from ..replay import export_session, import_session
from ..stats import FilterState, StatsEngine
from .runtime import AppState, DatasetEntry, Job, SessionEntry
from . import schemas

STATUS_BY_CODE = {
    "data_format": 400,
    "invalid_params": 400,
    "dataset_not_found": 404,
    "session_not_found": 404,
    "group_not_found": 404,
    "job_not_found": 404,
    "ineligible_group": 409,
    "job_conflict": 409,
    "not_ready": 409,
    "unknown_dimension": 400,
    "projection_unavailable": 422,
    "group_cap_exceeded": 422,
    "internal_error": 500,
}


def create_app(preload: dict[str, Path] | None = None, data_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="vexplore", version="0.1.0")
    state = AppState(data_dir=Path(data_dir) if data_dir else None)
    app.state.store = state
    engines: dict[str, StatsEngine] = {}

    for dataset_id, directory in (preload or {}).items():
        state.add_dataset(directory, store.load_dataset(directory), dataset_id=dataset_id)
    if preload:
        # Preloaded corpora live for the whole process; freezing them out of
        # the collector keeps gen2 pauses off the per-step latency tail.
        import gc

        gc.collect()
        gc.freeze()

    @app.exception_handler(VexploreError)
    async def vexplore_error(_req: Request, exc: VexploreError):
        status = STATUS_BY_CODE.get(exc.code, 500)
        body = schemas.ApiError(code=exc.code, message=exc.message, detail=exc.detail)
        return JSONResponse(status_code=status, content=body.model_dump())

    # -- helpers -----------------------------------------------------------

    def engine_for(entry: DatasetEntry) -> StatsEngine:
        eng = engines.get(entry.id)
        if eng is None:
            eng = StatsEngine(entry.dataset)
            engines[entry.id] = eng
        return eng

    def group_card(entry: DatasetEntry, group: Group) -> schemas.GroupCard:
        return schemas.GroupCard(
            gid=group.id,
            descriptor=group.decode_descriptor(entry.dataset),
            support=group.support,
        )

    def selection_response(entry: DatasetEntry, se: SessionEntry) -> schemas.SelectionResponse:
        session = se.session
        screen = session.current
        if screen is None:
            raise NotReady("session has no current screen; POST /root first")
        sel = screen.selection
        return schemas.SelectionResponse(
            dataset_digest=entry.dataset.digest,
            session=se.id,
            focus=screen.focus,
            groups=[group_card(entry, session.groups[g]) for g in sel.ids],
            diversity=sel.diversity,
            coverage=sel.coverage,
            objective=sel.objective,
            elapsed_ms=sel.elapsed_s * 1000.0,
            budget_exhausted=sel.budget_exhausted,
        )

    def dataset_info(entry: DatasetEntry) -> schemas.DatasetInfo:
        return schemas.DatasetInfo(
            id=entry.id,
            digest=entry.dataset.digest,
            users=entry.dataset.n_users,
            tokens=entry.dataset.n_tokens,
            actions=len(entry.dataset.actions),
            groups=None if entry.groups is None else len(entry.groups),
            indexed=entry.index is not None,
        )

    def job_status(job: Job) -> schemas.JobStatus:
        error = None
        if job.error is not None:
            error = schemas.ApiError(code=job.error[0], message=job.error[1])
        return schemas.JobStatus(
            id=job.id,
            kind=job.kind,
            dataset=job.dataset,
            status=job.status,
            progress=job.progress,
            result=job.result,
            error=error,
        )

    def parse_filters(raw: str | None) -> FilterState:
        return FilterState.from_json(raw) if raw else FilterState()

    def group_of(entry: DatasetEntry, gid: int) -> Group:
        if entry.groups is None:
            raise NotReady(f"dataset {entry.id} has no mined groups yet")
        if not entry.groups.valid_gid(gid):
            raise GroupNotFound(f"unknown group id {gid}")
        return entry.groups[gid]

    # -- datasets ------------------------------------------------------------

    @app.get("/datasets", response_model=list[schemas.DatasetInfo])
    def list_datasets():
        return [dataset_info(e) for e in state.datasets.values()]

    @app.post("/datasets", response_model=schemas.DatasetInfo, status_code=201)
    def create_dataset(
        actions: UploadFile = File(...),
        demographics: UploadFile = File(...),
        schema_doc: str = Form(..., alias="schema"),
    ):
        try:
            doc = json.loads(schema_doc)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"schema form field is not valid JSON: {exc}")
        demo_schema, value_range = ingest.parse_schema_doc(doc)
        base = state.data_dir or Path(tempfile.mkdtemp(prefix="vexplore-"))
        base.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryDirectory() as tmp:
            a_path = Path(tmp) / "actions.csv"
            d_path = Path(tmp) / "demographics.csv"
            a_path.write_bytes(actions.file.read())
            d_path.write_bytes(demographics.file.read())
            loaded = ingest.load_actions(a_path, value_range)
            profiles = ingest.load_demographics(d_path, demo_schema)
            dataset = ingest.build_dataset(loaded.records, profiles, demo_schema)
        directory = base / dataset.digest
        store.save_dataset(dataset, directory)
        entry = state.add_dataset(directory, dataset)
        return dataset_info(entry)

    @app.get("/datasets/{dataset_id}", response_model=schemas.DatasetInfo)
    def get_dataset(dataset_id: str):
        return dataset_info(state.dataset(dataset_id))

    @app.post("/datasets/{dataset_id}/mine", response_model=schemas.JobStatus, status_code=202)
    def mine_dataset(dataset_id: str, req: schemas.MineRequest):
        entry = state.dataset(dataset_id)
        minsup = req.minsup if req.minsup is not None else mining.default_minsup(entry.dataset.n_users)
        if minsup < 1:
            raise ParameterError("minsup must be a positive integer")

        def work(job: Job) -> dict:
            job.progress = 0.1
            groups = mining.mine_closed_groups(entry.dataset, minsup)
            store.save_groups(groups, entry.dataset, entry.directory)
            entry.groups = groups
            entry.index = None  # any previous index is stale
            return {"groups": len(groups), "minsup": minsup}

        return job_status(state.start_job("mine", entry, work))

    @app.post("/datasets/{dataset_id}/index", response_model=schemas.JobStatus, status_code=202)
    def index_dataset(dataset_id: str, req: schemas.IndexRequest):
        entry = state.dataset(dataset_id)
        if entry.groups is None:
            raise NotReady(f"dataset {dataset_id} has no mined groups yet")

        def work(job: Job) -> dict:
            job.progress = 0.1
            index = simindex.build_index(entry.groups, req.fraction)
            store.save_index(index, entry.dataset, entry.groups, entry.directory)
            entry.index = index
            lengths = [len(r) for r in index.neighbors]
            return {"fraction": req.fraction, "max_list_length": max(lengths) if lengths else 0}

        return job_status(state.start_job("index", entry, work))

    @app.get("/jobs/{job_id}", response_model=schemas.JobStatus)
    def get_job(job_id: str):
        return job_status(state.job(job_id))

    # -- sessions ------------------------------------------------------------

    @app.post("/sessions", response_model=schemas.SessionState, status_code=201)
    def create_session(req: schemas.SessionCreate):
        entry = state.ready_dataset(req.dataset)
        pm = req.params or schemas.SessionParamsModel()
        budget = None if pm.deterministic else pm.budget_ms
        params = SessionParams(
            k=pm.k,
            alpha=pm.alpha,
            theta=pm.theta,
            lam=pm.lam,
            delta=pm.delta,
            budget_ms=budget,
            pool_cap=pm.pool_cap,
        )
        se = state.add_session(entry.id, Session(entry.dataset, entry.groups, entry.index, params))
        return session_state(se.id)

    @app.get("/sessions/{session_id}", response_model=schemas.SessionState)
    def session_state(session_id: str):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        current = None
        if se.session.current is not None:
            current = selection_response(entry, se)
        return schemas.SessionState(
            dataset_digest=entry.dataset.digest,
            session=se.id,
            dataset=entry.id,
            params=se.session.params.to_dict(),
            current=current,
            history_length=len(se.session.history),
            memo_size=len(se.session.memo.groups) + len(se.session.memo.users),
            feedback_size=len(se.session.feedback),
        )

    @app.post("/sessions/{session_id}/root", response_model=schemas.SelectionResponse)
    def root_selection(session_id: str):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        with se.lock:
            se.session.root_selection()
            return selection_response(entry, se)

    @app.post("/sessions/{session_id}/select", response_model=schemas.SelectionResponse)
    def select_group(session_id: str, req: schemas.SelectRequest):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        with se.lock:
            se.session.select(req.gid)
            return selection_response(entry, se)

    @app.post("/sessions/{session_id}/backtrack", response_model=schemas.SelectionResponse)
    def backtrack(session_id: str, req: schemas.BacktrackRequest):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        with se.lock:
            if not (0 <= req.step < len(se.session.history)):
                raise ParameterError(
                    f"step index {req.step} out of range (history has {len(se.session.history)} steps)"
                )
            se.session.backtrack(req.step)
            return selection_response(entry, se)

    @app.get("/sessions/{session_id}/context", response_model=schemas.ContextResponse)
    def context(session_id: str):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        fv = se.session.feedback
        entries = [
            schemas.ContextEntry(entity=e, label=se.session.decode_entity(e), score=v)
            for e, v in sorted(fv.scores.items(), key=lambda kv: (-kv[1], kv[0]))
        ]
        return schemas.ContextResponse(
            dataset_digest=entry.dataset.digest, session=se.id, entries=entries
        )

    @app.delete("/sessions/{session_id}/context/{entity}", response_model=schemas.UnlearnResponse)
    def unlearn_entity(session_id: str, entity: str):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        with se.lock:
            removed = se.session.unlearn(entity)
        warning = None if removed else f"entity {entity!r} was not in the feedback vector"
        return schemas.UnlearnResponse(
            dataset_digest=entry.dataset.digest, session=se.id, removed=removed, warning=warning
        )

    @app.get("/sessions/{session_id}/history", response_model=schemas.HistoryResponse)
    def history(session_id: str):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        steps = [
            schemas.HistoryStep(
                index=i,
                focus=step.focus,
                shown=list(step.shown),
                chosen=step.chosen,
                diversity=step.diversity,
                coverage=step.coverage,
                elapsed_ms=step.elapsed_s * 1000.0,
                budget_exhausted=step.budget_exhausted,
            )
            for i, step in enumerate(se.session.history)
        ]
        return schemas.HistoryResponse(dataset_digest=entry.dataset.digest, session=se.id, steps=steps)

    @app.post("/sessions/{session_id}/memo", response_model=schemas.MemoResponse)
    def memo_add(session_id: str, req: schemas.MemoRequest):
        se = state.session(session_id)
        with se.lock:
            se.session.memo_add(req.id)
        return memo(session_id)

    @app.delete("/sessions/{session_id}/memo/{ref}", response_model=schemas.MemoResponse)
    def memo_remove(session_id: str, ref: str):
        se = state.session(session_id)
        with se.lock:
            se.session.memo_remove(ref)
        return memo(session_id)

    @app.get("/sessions/{session_id}/memo", response_model=schemas.MemoResponse)
    def memo(session_id: str):
        se = state.session(session_id)
        entry = state.dataset(se.dataset_id)
        return schemas.MemoResponse(
            dataset_digest=entry.dataset.digest,
            session=se.id,
            groups=[group_card(entry, se.session.groups[g]) for g in se.session.memo.groups],
            users=list(se.session.memo.users),
        )

    @app.get("/sessions/{session_id}/export", response_class=PlainTextResponse)
    def export(session_id: str):
        se = state.session(session_id)
        with se.lock:
            return export_session(se.session)

    @app.post("/sessions/import", response_model=schemas.SessionState, status_code=201)
    def import_doc(req: schemas.ImportRequest):
        entry = state.ready_dataset(req.dataset)
        session = import_session(req.document, entry.dataset, entry.groups, entry.index)
        se = state.add_session(entry.id, session)
        return session_state(se.id)

    # -- groups and stats -------------------------------------------------------

    @app.get("/datasets/{dataset_id}/groups/{gid}", response_model=schemas.GroupDetail)
    def group_detail(dataset_id: str, gid: int):
        entry = state.dataset(dataset_id)
        group = group_of(entry, gid)
        return schemas.GroupDetail(
            dataset_digest=entry.dataset.digest,
            gid=group.id,
            descriptor=group.decode_descriptor(entry.dataset),
            support=group.support,
        )

    @app.get("/datasets/{dataset_id}/groups/{gid}/stats", response_model=schemas.StatsResponse)
    def group_stats(dataset_id: str, gid: int, filters: str | None = None):
        entry = state.dataset(dataset_id)
        group = group_of(entry, gid)
        fstate = parse_filters(filters)
        eng = engine_for(entry)
        hists = [
            schemas.HistogramModel(
                dimension=h.dimension, kind=h.kind, bins=h.bins, counts=h.counts, missing=h.missing
            )
            for h in eng.histograms(group, fstate)
        ]
        return schemas.StatsResponse(
            dataset_digest=entry.dataset.digest,
            gid=gid,
            filters=fstate.to_dict(),
            histograms=hists,
            summary=eng.summary_stats(group),
        )

    @app.get("/datasets/{dataset_id}/groups/{gid}/members", response_model=schemas.MembersResponse)
    def group_members(dataset_id: str, gid: int, filters: str | None = None):
        entry = state.dataset(dataset_id)
        group = group_of(entry, gid)
        fstate = parse_filters(filters)
        rows = engine_for(entry).filtered_members(group, fstate)
        return schemas.MembersResponse(
            dataset_digest=entry.dataset.digest,
            gid=gid,
            filters=fstate.to_dict(),
            rows=[schemas.MemberRow(**row) for row in rows],
        )

    @app.get("/datasets/{dataset_id}/groups/{gid}/projection", response_model=schemas.ProjectionResponse)
    def group_projection(dataset_id: str, gid: int, label: str | None = None):
        entry = state.dataset(dataset_id)
        group = group_of(entry, gid)
        eng = engine_for(entry)
        points = eng.lda_project(group, label)
        used_label = label
        if used_label is None:
            for attr in entry.dataset.schema.attributes:
                if attr.kind == ingest.CATEGORICAL:
                    used_label = attr.name
                    break
        return schemas.ProjectionResponse(
            dataset_digest=entry.dataset.digest,
            gid=gid,
            label_dimension=used_label or "",
            excluded=group.support - len(points),
            points=[
                schemas.ProjectionPointModel(user_id=p.user_id, x=p.x, y=p.y, label=p.label)
                for p in points
            ],
        )

    ui_dist = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    if ui_dist.is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dist, html=True), name="ui")

    return app
