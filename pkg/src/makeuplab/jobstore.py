"""File-backed job records: single-writer updates, restart reconciliation."""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ParameterError

STATES = ("queued", "running", "done", "failed", "cancelled")
TERMINAL_STATES = frozenset({"done", "failed", "cancelled"})

# queued->failed/cancelled covers restart shedding; terminal states never move
_ALLOWED = {
    "queued": {"running", "failed", "cancelled"},
    "running": {"done", "failed", "cancelled"},
    "done": set(),
    "failed": set(),
    "cancelled": set(),
}


@dataclass
class JobRecord:
    id: str
    state: str = "queued"
    spec: dict = field(default_factory=dict)
    backend: str = "toy"
    progress: float = 0.0
    stage: str = ""
    error: str = ""
    created_at: float = 0.0
    updated_at: float = 0.0

    def to_document(self) -> dict:
        doc = asdict(self)
        doc["has_result"] = self.state == "done"
        return doc


class JobStore:
    """One directory per job holding record.json plus input/result rasters.

    All mutation goes through one lock so record files see a single writer.
    """

    RECORD = "record.json"
    RESULT = "result.png"

    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._records: Dict[str, JobRecord] = {}
        self._load_all()

    def _dir(self, job_id: str) -> Path:
        return self.root / job_id

    def _load_all(self) -> None:
        for rec_path in sorted(self.root.glob(f"*/{self.RECORD}")):
            try:
                data = json.loads(rec_path.read_text())
                rec = JobRecord(**data)
            except (ValueError, TypeError):
                continue  # ignore corrupt records rather than refuse to start
            self._records[rec.id] = rec

    def _persist(self, rec: JobRecord) -> None:
        path = self._dir(rec.id) / self.RECORD
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(asdict(rec), indent=2))
        os.replace(tmp, path)

    def create(self, spec: dict, backend: str, files: Optional[Dict[str, bytes]] = None) -> JobRecord:
        """New queued record; `files` maps artifact names to raw bytes."""
        with self._lock:
            job_id = uuid.uuid4().hex[:12]
            now = time.time()
            rec = JobRecord(
                id=job_id, spec=spec, backend=backend, created_at=now, updated_at=now
            )
            self._dir(job_id).mkdir(parents=True, exist_ok=True)
            for name, blob in (files or {}).items():
                (self._dir(job_id) / name).write_bytes(blob)
            self._persist(rec)
            self._records[job_id] = rec
            return rec

    def get(self, job_id: str) -> Optional[JobRecord]:
        with self._lock:
            return self._records.get(job_id)

    def list_ids(self) -> List[str]:
        with self._lock:
            return sorted(self._records, key=lambda i: self._records[i].created_at)

    def update(self, job_id: str, **fields) -> JobRecord:
        with self._lock:
            rec = self._records.get(job_id)
            if rec is None:
                raise ParameterError(f"unknown job id {job_id!r}")
            new_state = fields.get("state")
            if new_state is not None and new_state != rec.state:
                if new_state not in _ALLOWED[rec.state]:
                    raise ParameterError(
                        f"illegal state transition {rec.state} -> {new_state}"
                    )
            for key, value in fields.items():
                if not hasattr(rec, key):
                    raise ParameterError(f"unknown record field {key!r}")
                setattr(rec, key, value)
            rec.updated_at = time.time()
            self._persist(rec)
            return rec

    def file_path(self, job_id: str, name: str) -> Path:
        return self._dir(job_id) / name

    def read_file(self, job_id: str, name: str) -> Optional[bytes]:
        path = self.file_path(job_id, name)
        return path.read_bytes() if path.exists() else None

    def set_result(self, job_id: str, png_bytes: bytes) -> None:
        with self._lock:
            self.file_path(job_id, self.RESULT).write_bytes(png_bytes)

    def result_bytes(self, job_id: str) -> Optional[bytes]:
        return self.read_file(job_id, self.RESULT)

    def reconcile(self, requeue: bool = True) -> List[str]:
        """Repair state after a restart; returns ids that should run again.

        Running jobs lost their worker, so they fail. Queued jobs either get
        re-queued (returned) or failed, per config.
        """
        with self._lock:
            to_run: List[str] = []
            for job_id in self.list_ids():
                rec = self._records[job_id]
                if rec.state == "running":
                    self.update(job_id, state="failed", error="interrupted by service restart")
                elif rec.state == "queued":
                    if requeue:
                        to_run.append(job_id)
                    else:
                        self.update(job_id, state="failed", error="shed on service restart")
            return to_run
