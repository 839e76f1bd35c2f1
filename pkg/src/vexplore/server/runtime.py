"""In-memory service state: loaded datasets, sessions, background jobs.

Datasets/groups/indexes are immutable once loaded and shared read-only across
requests. Session mutations are serialized through a per-session lock; one
mining or indexing job may run per dataset at a time.
"""

from __future__ import annotations

import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import (
    DatasetNotFound,
    JobConflict,
    JobNotFound,
    NotReady,
    SessionNotFound,
)
from ..explore import Session
from ..ingest import Dataset
from ..mining import GroupSet
from ..simindex import SimilarityIndex
from .. import store


@dataclass
class DatasetEntry:
    id: str
    directory: Path
    dataset: Dataset
    groups: GroupSet | None = None
    index: SimilarityIndex | None = None
    busy: bool = False  # a mine/index job is running


@dataclass
class Job:
    id: str
    kind: str
    dataset: str
    status: str = "queued"
    progress: float = 0.0
    result: dict | None = None
    error: tuple[str, str] | None = None  # (code, message)


@dataclass
class SessionEntry:
    id: str
    dataset_id: str
    session: Session
    lock: threading.Lock = field(default_factory=threading.Lock)


class AppState:
    def __init__(self, data_dir: Path | None = None):
        self.data_dir = data_dir
        self.datasets: dict[str, DatasetEntry] = {}
        self.sessions: dict[str, SessionEntry] = {}
        self.jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    # -- datasets ---------------------------------------------------------

    def add_dataset(self, directory: Path, dataset: Dataset, dataset_id: str | None = None) -> DatasetEntry:
        entry = DatasetEntry(id=dataset_id or self._new_id("d"), directory=directory, dataset=dataset)
        try:
            entry.groups = store.load_groups(dataset, directory)
            entry.index = store.load_index(dataset, entry.groups, directory)
        except NotReady:
            pass
        except Exception:
            entry.groups = entry.groups if entry.groups else None
        with self._lock:
            self.datasets[entry.id] = entry
        return entry

    def dataset(self, dataset_id: str) -> DatasetEntry:
        entry = self.datasets.get(dataset_id)
        if entry is None:
            raise DatasetNotFound(f"unknown dataset {dataset_id!r}")
        return entry

    def ready_dataset(self, dataset_id: str) -> DatasetEntry:
        entry = self.dataset(dataset_id)
        if entry.groups is None:
            raise NotReady(f"dataset {dataset_id} has no mined groups yet")
        if entry.index is None:
            raise NotReady(f"dataset {dataset_id} has no similarity index yet")
        return entry

    # -- jobs --------------------------------------------------------------

    def start_job(self, kind: str, entry: DatasetEntry, work) -> Job:
        with self._lock:
            if entry.busy:
                raise JobConflict(f"a job is already running for dataset {entry.id}")
            entry.busy = True
            job = Job(id=self._new_id("j"), kind=kind, dataset=entry.id)
            self.jobs[job.id] = job

        def runner():
            job.status = "running"
            try:
                job.result = work(job)
                job.progress = 1.0
                job.status = "done"
            except Exception as exc:  # surfaced through the job record
                code = getattr(exc, "code", "internal_error")
                job.error = (code, str(exc))
                job.status = "error"
            finally:
                entry.busy = False

        threading.Thread(target=runner, daemon=True).start()
        return job

    def job(self, job_id: str) -> Job:
        job = self.jobs.get(job_id)
        if job is None:
            raise JobNotFound(f"unknown job {job_id!r}")
        return job

    # -- sessions -----------------------------------------------------------

    def add_session(self, dataset_id: str, session: Session) -> SessionEntry:
        entry = SessionEntry(id=self._new_id("s"), dataset_id=dataset_id, session=session)
        with self._lock:
            self.sessions[entry.id] = entry
        return entry

    def session(self, session_id: str) -> SessionEntry:
        entry = self.sessions.get(session_id)
        if entry is None:
            raise SessionNotFound(f"unknown session {session_id!r}")
        return entry

    def _new_id(self, prefix: str) -> str:
        return f"{prefix}{secrets.token_hex(4)}"
