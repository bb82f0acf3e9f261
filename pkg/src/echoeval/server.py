"""Campaign HTTP server: lease tasks, collect submissions, serve audio.

State is an in-memory view over an append-only ``events.jsonl``; every
lease and submission is an event, so replaying the file after a crash
reconstructs the identical store (same completed tasks, same live
leases relative to the clock). A ``snapshot.json`` is written
periodically for auditing; restore never depends on it.

Submissions are immutable and idempotent per (worker_id, task_id): a
repeat POST returns the original ack and stores nothing. A task is
leased to at most one worker at a time (default 30 min), and any
accepted submission retires it. Full screening runs as a batch step;
at submit time the server only does the cheap checks it needs for
session flow: section pass bookkeeping and the trapping-failure ban
counter.

Campaign directory layout:
    tasks.jsonl      task manifests from the builder
    manifest.csv     stimulus manifest (all servable clips, incl. trapping/gold)
    campaign.json    optional knobs: lease_timeout_s, setup_period_s,
                     training_period_s, max_trapping_failures,
                     qualification_truth, environment_truth
    events.jsonl     append-only event log (server-written)
    snapshot.json    periodic state snapshot (server-written)
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse

from .metrics import EmptyGroup, aggregate_condition
from .screening import (
    ScreeningConfig,
    SchemaInvalid,
    score_digit_triplet,
    score_environment_check,
    screen_campaign,
    submission_from_dict,
    submission_to_dict,
)
from .stimulus import read_manifest
from .taskbuilder import (
    DEFAULT_SETUP_PERIOD_S,
    DEFAULT_TRAINING_PERIOD_S,
    SectionFlags,
    SessionState,
    TaskConfig,
    TaskManifest,
    client_document,
    read_tasks_jsonl,
    schedule_sections,
)

DEFAULT_LEASE_TIMEOUT_S = 30 * 60
SNAPSHOT_EVERY = 50


class NoTasksAvailable(Exception):
    pass


class WorkerBanned(Exception):
    pass


class LeaseExpired(Exception):
    pass


class NotFound(Exception):
    pass


@dataclass(frozen=True)
class Lease:
    task_id: str
    worker_id: str
    leased_at: float
    expires_at: float

    def live(self, now: float) -> bool:
        return now < self.expires_at


class CampaignStore:
    """Thread-safe campaign state over an append-only event log."""

    def __init__(
        self,
        campaign_dir: str | os.PathLike,
        clock: Callable[[], float] = time.time,
        lease_timeout_s: float | None = None,
        snapshot_every: int = SNAPSHOT_EVERY,
    ):
        self.dir = Path(campaign_dir)
        self.clock = clock
        self._lock = threading.Lock()
        self._snapshot_every = snapshot_every

        manifests = read_tasks_jsonl(self.dir / "tasks.jsonl")
        if not manifests:
            raise ValueError(f"{self.dir}: no tasks")
        self.task_order = [m.task_id for m in manifests]
        self.manifests: dict[str, TaskManifest] = {m.task_id: m for m in manifests}

        records = read_manifest(self.dir / "manifest.csv")
        self.clip_paths: dict[str, Path] = {}
        self.condition_of: dict[str, str] = {}
        for rec in records:
            p = Path(rec.path)
            self.clip_paths[rec.id] = p if p.is_absolute() else self.dir / p
            self.condition_of[rec.id] = rec.condition

        knobs = self._load_knobs()
        if lease_timeout_s is None:
            lease_timeout_s = knobs.get("lease_timeout_s", DEFAULT_LEASE_TIMEOUT_S)
        self.lease_timeout_s = float(lease_timeout_s)
        self.screening_config = ScreeningConfig(
            qualification_truth=tuple(knobs.get("qualification_truth", ())),
            environment_truth=tuple(knobs.get("environment_truth", ())),
            max_trapping_failures=int(knobs.get("max_trapping_failures", 2)),
        )
        self.section_config = TaskConfig(
            scenario=manifests[0].scenario,
            setup_period_s=float(knobs.get("setup_period_s", DEFAULT_SETUP_PERIOD_S)),
            training_period_s=float(knobs.get("training_period_s", DEFAULT_TRAINING_PERIOD_S)),
        )

        self.leases: dict[str, Lease] = {}
        self.submissions: dict[tuple[str, str], dict] = {}
        self.completed: set[str] = set()
        self.sessions: dict[str, SessionState] = {}
        self.trapping_failures: dict[str, int] = {}
        self.banned: set[str] = set()
        self._n_events = 0

        self._events_path = self.dir / "events.jsonl"
        self._replay()
        self._events_fh = open(self._events_path, "a", newline="\n")

    def _load_knobs(self) -> dict:
        path = self.dir / "campaign.json"
        if not path.exists():
            return {}
        with open(path) as fh:
            return json.load(fh)

    # --- event log -----------------------------------------------------------

    def _replay(self) -> None:
        if not self._events_path.exists():
            return
        with open(self._events_path) as fh:
            for line in fh:
                if line.strip():
                    self._apply(json.loads(line))

    def _apply(self, event: dict) -> None:
        self._n_events += 1
        if event["type"] == "lease":
            self.leases[event["task_id"]] = Lease(
                task_id=event["task_id"],
                worker_id=event["worker_id"],
                leased_at=event["at"],
                expires_at=event["expires_at"],
            )
        elif event["type"] == "submission":
            self._apply_submission(event["doc"], at=event["at"])
        else:
            raise ValueError(f"unknown event type {event['type']!r}")

    def _append(self, event: dict) -> None:
        self._apply(event)
        self._events_fh.write(json.dumps(event, sort_keys=True, separators=(",", ":")))
        self._events_fh.write("\n")
        self._events_fh.flush()
        if self._n_events % self._snapshot_every == 0:
            self._write_snapshot()

    def _apply_submission(self, doc: dict, at: float) -> None:
        sub = submission_from_dict(doc)
        key = (sub.worker_id, sub.task_id)
        if key in self.submissions:
            return
        self.submissions[key] = doc
        self.completed.add(sub.task_id)
        self.leases.pop(sub.task_id, None)

        session = self.sessions.setdefault(sub.worker_id, SessionState(sub.worker_id))
        cfg = self.screening_config
        if sub.qualification_results is not None:
            if not cfg.qualification_truth:
                session.record_qualification(at)
            else:
                passed, _ = score_digit_triplet(
                    sub.qualification_results, cfg.qualification_truth, cfg.hearing_threshold
                )
                if passed:
                    session.record_qualification(at)
        if sub.setup_results is not None:
            if not cfg.environment_truth:
                session.record_setup(at)
            else:
                passed, _ = score_environment_check(
                    sub.setup_results, cfg.environment_truth, cfg.environment_min_correct
                )
                if passed:
                    session.record_setup(at)
        # Submitting implies the client walked any flagged training section.
        session.record_training(at)

        manifest = self.manifests.get(sub.task_id)
        if manifest is not None:
            trap = manifest.trapping
            answer = next(
                (a for a in sub.answers if a.clip_id == trap.clip_id and a.scale == trap.scale),
                None,
            )
            if answer is None or answer.score != trap.expected_answer:
                n = self.trapping_failures.get(sub.worker_id, 0) + 1
                self.trapping_failures[sub.worker_id] = n
                if n >= cfg.max_trapping_failures:
                    self.banned.add(sub.worker_id)

    def _write_snapshot(self) -> None:
        snap = {
            "at": self.clock(),
            "n_events": self._n_events,
            "completed_tasks": sorted(self.completed),
            "banned_workers": sorted(self.banned),
            "live_leases": {
                t: {"worker_id": l.worker_id, "expires_at": l.expires_at}
                for t, l in self.leases.items()
                if l.live(self.clock()) and t not in self.completed
            },
            "sessions": {
                w: {
                    "qualification_passed": s.qualification_passed,
                    "last_setup_pass": s.last_setup_pass,
                    "last_training_pass": s.last_training_pass,
                }
                for w, s in sorted(self.sessions.items())
            },
        }
        tmp = self.dir / "snapshot.json.tmp"
        with open(tmp, "w") as fh:
            json.dump(snap, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.dir / "snapshot.json")

    # --- operations ----------------------------------------------------------

    def next_task(self, worker_id: str, now: float | None = None) -> tuple[TaskManifest, SectionFlags, Lease]:
        if not worker_id:
            raise ValueError("worker_id required")
        now = self.clock() if now is None else now
        with self._lock:
            if worker_id in self.banned:
                raise WorkerBanned(worker_id)
            session = self.sessions.get(worker_id, SessionState(worker_id))
            flags = schedule_sections(session, now, self.section_config)

            for lease in self.leases.values():
                if lease.worker_id == worker_id and lease.live(now) and lease.task_id not in self.completed:
                    return self.manifests[lease.task_id], flags, lease

            for task_id in self.task_order:
                if task_id in self.completed:
                    continue
                lease = self.leases.get(task_id)
                if lease is not None and lease.live(now):
                    continue
                new_lease = Lease(task_id, worker_id, now, now + self.lease_timeout_s)
                self._append({
                    "type": "lease",
                    "task_id": task_id,
                    "worker_id": worker_id,
                    "at": now,
                    "expires_at": new_lease.expires_at,
                })
                return self.manifests[task_id], flags, new_lease
        raise NoTasksAvailable(worker_id)

    def submit(self, doc: dict, now: float | None = None) -> dict:
        now = self.clock() if now is None else now
        sub = submission_from_dict(doc)
        with self._lock:
            if sub.task_id not in self.manifests:
                raise SchemaInvalid(f"unknown task {sub.task_id!r}")
            key = (sub.worker_id, sub.task_id)
            submission_id = f"{sub.worker_id}:{sub.task_id}"
            if key in self.submissions:
                return {"accepted_for_processing": True, "submission_id": submission_id, "duplicate": True}
            lease = self.leases.get(sub.task_id)
            if lease is None or lease.worker_id != sub.worker_id or not lease.live(now):
                raise LeaseExpired(sub.task_id)
            self._append({"type": "submission", "at": now, "doc": submission_to_dict(sub)})
            return {"accepted_for_processing": True, "submission_id": submission_id, "duplicate": False}

    def get_clip_path(self, clip_id: str) -> Path:
        path = self.clip_paths.get(clip_id)
        if path is None or not path.exists():
            raise NotFound(clip_id)
        return path

    def results(self) -> dict:
        """Batch-screen everything stored and aggregate accepted votes."""
        with self._lock:
            docs = list(self.submissions.values())
        subs = [submission_from_dict(d) for d in docs]
        report = screen_campaign(subs, self.manifests, self.screening_config, self.condition_of)
        try:
            agg = aggregate_condition(report.votes)
            condition_scores = [
                {
                    "condition_id": s.condition_id,
                    "scenario": s.scenario.value,
                    "scale": s.scale.value,
                    "mean": s.mean,
                    "n_votes": s.n_votes,
                    "ci95": s.ci95,
                }
                for s in agg.condition_scores
            ]
        except EmptyGroup:
            condition_scores = []
        return {
            "condition_scores": condition_scores,
            "n_votes": len(report.votes),
            "screening": {
                "accepted": report.n_accepted,
                "rejected": report.n_rejected,
                "totals": {r.value: n for r, n in report.totals.items()},
                "banned_workers": sorted(report.banned_workers),
            },
        }

    def close(self) -> None:
        with self._lock:
            self._write_snapshot()
            self._events_fh.close()


def create_app(store: CampaignStore) -> FastAPI:
    """FastAPI app over a store; endpoints mirror the store operations."""
    app = FastAPI(title="echoeval task server")
    app.state.store = store

    @app.get("/api/task/next")
    def task_next(worker: str = ""):
        try:
            manifest, flags, lease = store.next_task(worker)
        except WorkerBanned:
            return JSONResponse({"error": "WorkerBanned"}, status_code=403)
        except NoTasksAvailable:
            return JSONResponse({"error": "NoTasksAvailable"}, status_code=404)
        except ValueError as exc:
            return JSONResponse({"error": "SchemaInvalid", "detail": str(exc)}, status_code=422)
        doc = client_document(manifest, flags)
        doc["lease_expires_at"] = lease.expires_at
        return doc

    @app.post("/api/submission")
    async def submission(request: Request):
        try:
            doc = await request.json()
        except Exception:
            return JSONResponse({"error": "SchemaInvalid", "detail": "body is not JSON"}, status_code=422)
        try:
            return store.submit(doc)
        except SchemaInvalid as exc:
            return JSONResponse({"error": "SchemaInvalid", "detail": str(exc)}, status_code=422)
        except LeaseExpired:
            return JSONResponse({"error": "LeaseExpired"}, status_code=409)

    @app.get("/api/clip/{clip_id}")
    def clip(clip_id: str):
        try:
            path = store.get_clip_path(clip_id)
        except NotFound:
            return JSONResponse({"error": "NotFound"}, status_code=404)
        return FileResponse(path, media_type="audio/wav")

    @app.get("/api/admin/results")
    def admin_results():
        return store.results()

    return app


def serve(campaign_dir: str | os.PathLike, port: int, host: str = "127.0.0.1") -> None:
    """Blocking uvicorn server over a campaign directory."""
    import uvicorn

    store = CampaignStore(campaign_dir)
    app = create_app(store)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        store.close()
