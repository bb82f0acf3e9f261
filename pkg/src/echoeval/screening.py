"""Submission validation and vote extraction.

A submission passes only if every gate holds: the trapping clip got
exactly the announced answer on its designated scale, gold clips were
rated within tolerance, hearing and environment checks (when present)
passed, playback completed everywhere, and no expected answer is
missing. Rejected submissions contribute zero votes; accepted ones emit
one VoteRecord per rating clip and scale. Trapping and gold clips never
produce votes.

Screening a submission depends only on that submission, its manifest,
and the config, so campaign screening is order-independent. Worker bans
(repeated trapping failures) gate future task serving; they do not
retroactively invalidate accepted votes.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .scales import SCORE_MAX, SCORE_MIN, Scale, Scenario
from .taskbuilder import TaskManifest

DEFAULT_HEARING_THRESHOLD = 0.8
DEFAULT_MAX_TRAPPING_FAILURES = 2

VOTES_CSV_FIELDS = ["worker_id", "clip_id", "condition", "scenario", "scale", "score"]


class CountMismatch(Exception):
    pass


class NoTrials(Exception):
    pass


class ManifestMismatch(Exception):
    pass


class SchemaInvalid(Exception):
    pass


class RejectReason(str, Enum):
    TRAPPING_FAILED = "TrappingFailed"
    GOLD_OUT_OF_TOLERANCE = "GoldOutOfTolerance"
    HEARING_FAILED = "HearingFailed"
    ENVIRONMENT_FAILED = "EnvironmentFailed"
    INCOMPLETE_PLAYBACK = "IncompletePlayback"
    MISSING_ANSWERS = "MissingAnswers"


@dataclass(frozen=True)
class ClipAnswer:
    clip_id: str
    scale: Scale
    score: int
    playback_complete: bool = True
    listen_duration_s: float = 0.0


@dataclass(frozen=True)
class Submission:
    """One worker's raw answers for one task; timestamps are epoch seconds."""

    worker_id: str
    task_id: str
    answers: tuple[ClipAnswer, ...]
    qualification_results: tuple[str, ...] | None = None
    setup_results: tuple[int, ...] | None = None
    started_at: float = 0.0
    submitted_at: float = 0.0


@dataclass(frozen=True)
class VoteRecord:
    worker_id: str
    clip_id: str
    condition_id: str
    scenario: Scenario
    scale: Scale
    score: int
    accepted_at: float = 0.0


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reasons: tuple[RejectReason, ...] = ()


@dataclass(frozen=True)
class ScreeningConfig:
    """Thresholds plus the server-side answer keys for the check sections."""

    hearing_threshold: float = DEFAULT_HEARING_THRESHOLD
    qualification_truth: tuple[str, ...] = ()
    environment_truth: tuple[int, ...] = ()
    environment_min_correct: int | None = None  # None = all but one
    require_complete_playback: bool = True
    max_trapping_failures: int = DEFAULT_MAX_TRAPPING_FAILURES


@dataclass(frozen=True)
class ScreeningReport:
    verdicts: dict[str, Verdict]  # keyed "worker_id:task_id"
    totals: dict[RejectReason, int]
    n_accepted: int
    n_rejected: int
    votes: list[VoteRecord] = field(repr=False)
    banned_workers: frozenset[str] = frozenset()


def score_digit_triplet(
    answers: Sequence[str],
    truth: Sequence[str],
    threshold: float = DEFAULT_HEARING_THRESHOLD,
) -> tuple[bool, float]:
    """Hearing screen: a triplet counts only if all three digits match.

    Passes when the correct fraction reaches the threshold (boundary
    inclusive).
    """
    if len(answers) != len(truth):
        raise CountMismatch(f"{len(answers)} answers for {len(truth)} triplets")
    if not truth:
        raise NoTrials("no triplets to score")
    for t in truth:
        if len(t) != 3 or not t.isdigit():
            raise ValueError(f"truth entry {t!r} is not 3 digits")
    correct = sum(1 for a, t in zip(answers, truth) if str(a).strip() == t)
    fraction = correct / len(truth)
    return fraction >= threshold, fraction


def score_environment_check(
    picks: Sequence[int],
    truth: Sequence[int],
    min_correct: int | None = None,
) -> tuple[bool, int]:
    """Playback-environment screen over (reference, degraded) pairs.

    Each trial asks which of the pair sounded degraded; picks and truth
    are 0/1 indices. Default bar is all trials but one.
    """
    if not truth:
        raise NoTrials("no environment trials")
    if len(picks) != len(truth):
        raise CountMismatch(f"{len(picks)} picks for {len(truth)} trials")
    if min_correct is None:
        min_correct = len(truth) - 1
    correct = sum(1 for p, t in zip(picks, truth) if p == t)
    return correct >= min_correct, correct


def _answer_index(sub: Submission, manifest: TaskManifest) -> dict[tuple[str, Scale], ClipAnswer]:
    clip_set = set(manifest.clips)
    scale_set = set(manifest.scales)
    index: dict[tuple[str, Scale], ClipAnswer] = {}
    for ans in sub.answers:
        if ans.clip_id not in clip_set:
            raise ManifestMismatch(f"answer for unknown clip {ans.clip_id!r}")
        if ans.scale not in scale_set:
            raise ManifestMismatch(f"answer on scale {ans.scale.value} not asked in this task")
        key = (ans.clip_id, ans.scale)
        if key in index:
            raise ManifestMismatch(f"duplicate answer for {key}")
        index[key] = ans
    return index


def screen_submission(
    sub: Submission,
    manifest: TaskManifest,
    config: ScreeningConfig = ScreeningConfig(),
    condition_of: Mapping[str, str] | None = None,
) -> tuple[Verdict, list[VoteRecord]]:
    """Apply every gate; emit votes only when all pass.

    ``condition_of`` maps rating clip ids to condition labels and is
    required to emit votes (pass None to screen without extracting).
    """
    if sub.task_id != manifest.task_id:
        raise ManifestMismatch(f"submission for {sub.task_id!r} screened against {manifest.task_id!r}")
    index = _answer_index(sub, manifest)

    failed: set[RejectReason] = set()

    missing = [
        (clip, scale)
        for clip in manifest.clips
        for scale in manifest.scales
        if (clip, scale) not in index
    ]
    if missing:
        failed.add(RejectReason.MISSING_ANSWERS)

    if config.require_complete_playback and any(not a.playback_complete for a in sub.answers):
        failed.add(RejectReason.INCOMPLETE_PLAYBACK)

    trap = manifest.trapping
    trap_answer = index.get((trap.clip_id, trap.scale))
    if trap_answer is None or trap_answer.score != trap.expected_answer:
        failed.add(RejectReason.TRAPPING_FAILED)

    for g in manifest.gold:
        g_answer = index.get((g.clip_id, g.scale))
        if g_answer is not None and abs(g_answer.score - g.expected_score) > g.tolerance:
            failed.add(RejectReason.GOLD_OUT_OF_TOLERANCE)

    if sub.qualification_results is not None and config.qualification_truth:
        passed, _ = score_digit_triplet(
            sub.qualification_results, config.qualification_truth, config.hearing_threshold
        )
        if not passed:
            failed.add(RejectReason.HEARING_FAILED)

    if sub.setup_results is not None and config.environment_truth:
        passed, _ = score_environment_check(
            sub.setup_results, config.environment_truth, config.environment_min_correct
        )
        if not passed:
            failed.add(RejectReason.ENVIRONMENT_FAILED)

    if failed:
        reasons = tuple(r for r in RejectReason if r in failed)
        return Verdict(accepted=False, reasons=reasons), []

    votes: list[VoteRecord] = []
    if condition_of is not None:
        special = manifest.special_ids
        for clip in manifest.clips:
            if clip in special:
                continue
            if clip not in condition_of:
                raise ManifestMismatch(f"no condition label for clip {clip!r}")
            for scale in manifest.scales:
                votes.append(VoteRecord(
                    worker_id=sub.worker_id,
                    clip_id=clip,
                    condition_id=condition_of[clip],
                    scenario=manifest.scenario,
                    scale=scale,
                    score=index[(clip, scale)].score,
                    accepted_at=sub.submitted_at,
                ))
    return Verdict(accepted=True), votes


def screen_campaign(
    submissions: Iterable[Submission],
    manifests: Iterable[TaskManifest] | Mapping[str, TaskManifest],
    config: ScreeningConfig = ScreeningConfig(),
    condition_of: Mapping[str, str] | None = None,
) -> ScreeningReport:
    """Screen every submission independently and pool the accepted votes.

    Submissions are processed in (submitted_at, worker_id, task_id)
    order with first-wins deduplication per (worker_id, task_id), so the
    report does not depend on input ordering.
    """
    if isinstance(manifests, Mapping):
        by_task = dict(manifests)
    else:
        by_task = {m.task_id: m for m in manifests}

    ordered = sorted(submissions, key=lambda s: (s.submitted_at, s.worker_id, s.task_id))
    seen: set[tuple[str, str]] = set()
    verdicts: dict[str, Verdict] = {}
    totals: dict[RejectReason, int] = {r: 0 for r in RejectReason}
    votes: list[VoteRecord] = []
    trapping_failures: dict[str, int] = {}

    for sub in ordered:
        key = (sub.worker_id, sub.task_id)
        if key in seen:
            continue
        seen.add(key)
        manifest = by_task.get(sub.task_id)
        if manifest is None:
            raise ManifestMismatch(f"submission references unknown task {sub.task_id!r}")
        verdict, sub_votes = screen_submission(sub, manifest, config, condition_of)
        verdicts[f"{sub.worker_id}:{sub.task_id}"] = verdict
        if verdict.accepted:
            votes.extend(sub_votes)
        else:
            for r in verdict.reasons:
                totals[r] += 1
            if RejectReason.TRAPPING_FAILED in verdict.reasons:
                trapping_failures[sub.worker_id] = trapping_failures.get(sub.worker_id, 0) + 1

    n_accepted = sum(1 for v in verdicts.values() if v.accepted)
    banned = frozenset(
        w for w, n in trapping_failures.items() if n >= config.max_trapping_failures
    )
    return ScreeningReport(
        verdicts=verdicts,
        totals=totals,
        n_accepted=n_accepted,
        n_rejected=len(verdicts) - n_accepted,
        votes=votes,
        banned_workers=banned,
    )


# --- serialization -----------------------------------------------------------

def submission_to_dict(sub: Submission) -> dict:
    return {
        "worker_id": sub.worker_id,
        "task_id": sub.task_id,
        "answers": [
            {
                "clip_id": a.clip_id,
                "scale": a.scale.value,
                "score": a.score,
                "playback_complete": a.playback_complete,
                "listen_duration_s": a.listen_duration_s,
            }
            for a in sub.answers
        ],
        "qualification_results": (
            list(sub.qualification_results) if sub.qualification_results is not None else None
        ),
        "setup_results": list(sub.setup_results) if sub.setup_results is not None else None,
        "started_at": sub.started_at,
        "submitted_at": sub.submitted_at,
    }


def submission_from_dict(doc: dict) -> Submission:
    """Parse and validate an untrusted submission document."""
    if not isinstance(doc, dict):
        raise SchemaInvalid("submission must be an object")
    try:
        worker_id = doc["worker_id"]
        task_id = doc["task_id"]
        raw_answers = doc["answers"]
    except KeyError as exc:
        raise SchemaInvalid(f"missing field {exc.args[0]!r}") from None
    if not isinstance(worker_id, str) or not worker_id:
        raise SchemaInvalid("worker_id must be a non-empty string")
    if not isinstance(task_id, str) or not task_id:
        raise SchemaInvalid("task_id must be a non-empty string")
    if not isinstance(raw_answers, list):
        raise SchemaInvalid("answers must be a list")

    answers = []
    for i, a in enumerate(raw_answers):
        if not isinstance(a, dict):
            raise SchemaInvalid(f"answers[{i}] must be an object")
        try:
            clip_id = a["clip_id"]
            scale_raw = a["scale"]
            score = a["score"]
        except KeyError as exc:
            raise SchemaInvalid(f"answers[{i}] missing field {exc.args[0]!r}") from None
        if not isinstance(clip_id, str) or not clip_id:
            raise SchemaInvalid(f"answers[{i}].clip_id must be a non-empty string")
        try:
            scale = Scale(scale_raw)
        except ValueError:
            raise SchemaInvalid(f"answers[{i}].scale {scale_raw!r} unknown") from None
        if not isinstance(score, int) or isinstance(score, bool) or not SCORE_MIN <= score <= SCORE_MAX:
            raise SchemaInvalid(f"answers[{i}].score must be an integer in [1, 5]")
        playback = a.get("playback_complete", True)
        if not isinstance(playback, bool):
            raise SchemaInvalid(f"answers[{i}].playback_complete must be a boolean")
        duration = a.get("listen_duration_s", 0.0)
        if not isinstance(duration, (int, float)) or isinstance(duration, bool) or duration < 0:
            raise SchemaInvalid(f"answers[{i}].listen_duration_s must be a non-negative number")
        answers.append(ClipAnswer(clip_id, scale, score, playback, float(duration)))

    qual = doc.get("qualification_results")
    if qual is not None:
        if not isinstance(qual, list) or not all(isinstance(q, str) for q in qual):
            raise SchemaInvalid("qualification_results must be a list of strings")
        qual = tuple(qual)
    setup = doc.get("setup_results")
    if setup is not None:
        if not isinstance(setup, list) or not all(
            isinstance(p, int) and not isinstance(p, bool) for p in setup
        ):
            raise SchemaInvalid("setup_results must be a list of integers")
        setup = tuple(setup)

    def _time(name: str) -> float:
        value = doc.get(name, 0.0)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaInvalid(f"{name} must be a number")
        return float(value)

    return Submission(
        worker_id=worker_id,
        task_id=task_id,
        answers=tuple(answers),
        qualification_results=qual,
        setup_results=setup,
        started_at=_time("started_at"),
        submitted_at=_time("submitted_at"),
    )


def write_submissions_jsonl(subs: Iterable[Submission], path: str | os.PathLike) -> None:
    with open(path, "w", newline="\n") as fh:
        for sub in subs:
            fh.write(json.dumps(submission_to_dict(sub), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_submissions_jsonl(path: str | os.PathLike) -> list[Submission]:
    with open(path) as fh:
        return [submission_from_dict(json.loads(line)) for line in fh if line.strip()]


def write_votes_csv(votes: Iterable[VoteRecord], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(VOTES_CSV_FIELDS)
        for v in votes:
            writer.writerow([v.worker_id, v.clip_id, v.condition_id, v.scenario.value, v.scale.value, v.score])


def read_votes_csv(path: str | os.PathLike) -> list[VoteRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(VOTES_CSV_FIELDS) - set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {VOTES_CSV_FIELDS}")
        return [
            VoteRecord(
                worker_id=row["worker_id"],
                clip_id=row["clip_id"],
                condition_id=row["condition"],
                scenario=Scenario(row["scenario"]),
                scale=Scale(row["scale"]),
                score=int(row["score"]),
            )
            for row in reader
        ]


def write_screening_report(report: ScreeningReport, path: str | os.PathLike) -> None:
    doc = {
        "accepted": report.n_accepted,
        "rejected": report.n_rejected,
        "totals": {r.value: n for r, n in report.totals.items()},
        "banned_workers": sorted(report.banned_workers),
        "verdicts": {
            key: {"accepted": v.accepted, "reasons": [r.value for r in v.reasons]}
            for key, v in sorted(report.verdicts.items())
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
