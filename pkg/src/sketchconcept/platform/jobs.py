"""Asynchronous job execution for the HTTP service.

Jobs move queued -> running -> done/failed; results are immutable once done.
Training jobs serialize per concept name; generation jobs run freely on the
worker pool since they only read immutable snapshots. Completed job records
are persisted as JSON so any artifact can be traced back to its request.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

JOB_KINDS = ("pretrain", "train_concept", "generate", "edit", "benchmark")


class ConceptBusyError(RuntimeError):
    """A training job already targets this concept."""


@dataclass
class Job:
    id: str
    kind: str
    payload: dict
    status: str = "queued"  # queued -> running -> done | failed
    result: dict | None = None
    error: str | None = None
    created_at: float = field(default_factory=time.time)
    started_at: float | None = None
    finished_at: float | None = None

    def public(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "request": self.payload,
            "result": self.result,
            "error": self.error,
            "timing": {
                "created_at": self.created_at,
                "started_at": self.started_at,
                "finished_at": self.finished_at,
            },
        }


class JobRunner:
    def __init__(self, records_dir: Path | str | None = None, workers: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._training: set[str] = set()
        self.records_dir = Path(records_dir) if records_dir else None

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def submit(
        self,
        kind: str,
        payload: dict,
        fn: Callable[[], dict],
        concept_lock: str | None = None,
    ) -> Job:
        if kind not in JOB_KINDS:
            raise ValueError(f"unknown job kind {kind!r}")
        job = Job(id=uuid.uuid4().hex[:12], kind=kind, payload=payload)
        with self._lock:
            if concept_lock is not None:
                if concept_lock in self._training:
                    raise ConceptBusyError(f"a training job already targets {concept_lock!r}")
                self._training.add(concept_lock)
            self._jobs[job.id] = job
        self._persist(job)

        def run() -> None:
            job.status = "running"
            job.started_at = time.time()
            self._persist(job)
            final = "done"
            try:
                job.result = fn()
            except Exception as exc:  # the record must capture the failure
                job.error = f"{type(exc).__name__}: {exc}"
                final = "failed"
            job.finished_at = time.time()
            if concept_lock is not None:
                with self._lock:
                    self._training.discard(concept_lock)
            # persist the final record before flipping the visible status so
            # a client that sees "done" always finds the finished record
            self._persist(job, status=final)
            job.status = final

        self._pool.submit(run)
        return job

    def _persist(self, job: Job, status: str | None = None) -> None:
        if self.records_dir is None:
            return
        self.records_dir.mkdir(parents=True, exist_ok=True)
        record = job.public()
        if status is not None:
            record["status"] = status
        path = self.records_dir / f"{job.id}.json"
        path.write_text(json.dumps(record, indent=2, sort_keys=True, default=str))

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)
