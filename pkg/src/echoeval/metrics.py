"""Objective and statistical measures: ERLE, correlation, vote aggregation.

ERLE (echo return loss enhancement) is the dB ratio of microphone-signal
energy to residual-echo energy:

    erle = 10 * log10(mean(y^2) / mean(e^2))

with the expectation realized as the arithmetic mean of squared samples
over the full signal. A frame-gated variant excludes silent frames. The
denominator is floored and the result capped at 100 dB so perfect
cancellation stays finite.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .audio import AudioBuffer
from .scales import SCORE_MAX, SCORE_MIN, Scale, Scenario, validate_score

if TYPE_CHECKING:
    from .screening import VoteRecord

ERLE_CAP_DB = 100.0
CI95_Z = 1.96


class LengthMismatch(Exception):
    pass


class EmptySignal(Exception):
    pass


class DegenerateInput(Exception):
    pass


class EmptyGroup(Exception):
    pass


def _check_pair(y: AudioBuffer, e: AudioBuffer) -> None:
    if y.channels != 1 or e.channels != 1:
        raise ValueError("ERLE inputs must be mono")
    if y.sample_rate != e.sample_rate:
        raise ValueError(f"sample rates differ: {y.sample_rate} vs {e.sample_rate}")
    if y.n_frames != e.n_frames:
        raise LengthMismatch(f"lengths differ: {y.n_frames} vs {e.n_frames}")
    if y.n_frames == 0:
        raise EmptySignal("signals are empty")


def _erle_db(y2_mean: float, e2_mean: float, floor: float) -> float:
    value = 10.0 * np.log10(y2_mean / max(e2_mean, floor))
    return float(min(value, ERLE_CAP_DB))


def erle(y: AudioBuffer, e: AudioBuffer, floor: float = 1e-10) -> float:
    """ERLE in dB over the full signals; y is the mic signal, e the residual."""
    _check_pair(y, e)
    y2 = float(np.mean(np.square(y.samples)))
    e2 = float(np.mean(np.square(e.samples)))
    return _erle_db(y2, e2, floor)


@dataclass(frozen=True)
class FramewiseErle:
    """Per-frame ERLE plus the mean over frames that passed the activity gate."""

    frames_db: np.ndarray
    active: np.ndarray  # bool mask, same length
    mean_db: float
    frame_ms: float


def erle_framewise(
    y: AudioBuffer,
    e: AudioBuffer,
    frame_ms: float = 20.0,
    activity_threshold_db: float = -35.0,
    floor: float = 1e-10,
) -> FramewiseErle:
    """Frame-wise ERLE; frames whose y-energy sits more than
    ``activity_threshold_db`` below the full-signal mean energy are
    excluded from the mean (pass -inf to disable gating). The trailing
    partial frame, if any, is included.
    """
    _check_pair(y, e)
    frame_len = int(round(frame_ms * y.sample_rate / 1000.0))
    if frame_len < 1:
        raise ValueError(f"frame of {frame_ms} ms is shorter than one sample")

    n = y.n_frames
    starts = range(0, n, frame_len)
    y2_global = float(np.mean(np.square(y.samples)))

    frames = np.empty(len(starts))
    active = np.empty(len(starts), dtype=bool)
    for i, s in enumerate(starts):
        ys = y.samples[s:s + frame_len]
        es = e.samples[s:s + frame_len]
        y2 = float(np.mean(np.square(ys)))
        e2 = float(np.mean(np.square(es)))
        frames[i] = _erle_db(y2, e2, floor) if y2 > 0 else -np.inf
        if activity_threshold_db == -np.inf:
            active[i] = True
        elif y2 <= 0 or y2_global <= 0:
            active[i] = False
        else:
            active[i] = 10.0 * np.log10(y2 / y2_global) >= activity_threshold_db

    mean_db = float(np.mean(frames[active])) if np.any(active) else float("nan")
    return FramewiseErle(frames_db=frames, active=active, mean_db=mean_db, frame_ms=frame_ms)


# --- correlation -----------------------------------------------------------

def _rank_average(x: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties assigned the average of the ranks they span."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def correlate(x, y, method: str = "pearson") -> float:
    """Pearson or Spearman correlation coefficient.

    Spearman is Pearson over average ranks, so ties are handled the
    standard way. Requires at least 3 points and non-constant inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("inputs must be 1-D")
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise LengthMismatch(f"need at least 3 points, got {len(x)}")
    if method not in ("pearson", "spearman"):
        raise ValueError(f"unknown method {method!r}")

    if method == "spearman":
        x = _rank_average(x)
        y = _rank_average(y)

    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInput("constant input has no defined correlation")
    r = float(np.dot(dx, dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


# --- vote aggregation ------------------------------------------------------

@dataclass(frozen=True)
class ConditionScore:
    """Mean opinion score for one condition on one scale, votes pooled across clips."""

    condition_id: str
    scenario: Scenario
    scale: Scale
    mean: float
    n_votes: int
    ci95: float


@dataclass(frozen=True)
class ClipScore:
    clip_id: str
    condition_id: str
    scenario: Scenario
    scale: Scale
    mean: float
    n_votes: int


@dataclass(frozen=True)
class AggregationResult:
    condition_scores: list[ConditionScore]
    clip_scores: list[ClipScore]


def ci95_of(scores: Iterable[int | float]) -> float:
    """1.96 * sample stddev / sqrt(n); 0.0 when fewer than two votes."""
    arr = np.asarray(list(scores), dtype=np.float64)
    if len(arr) < 2:
        return 0.0
    return float(CI95_Z * np.std(arr, ddof=1) / np.sqrt(len(arr)))


def aggregate_condition(votes: Iterable["VoteRecord"]) -> AggregationResult:
    """Pool accepted votes into per-condition means with 95% CIs.

    Grouping key is (condition, scenario, scale); all votes for a
    condition's clips are pooled into one mean (per-clip means are
    returned alongside for diagnostics). Vote order and batching have no
    effect on the result.
    """
    by_condition: dict[tuple[str, Scenario, Scale], list[int]] = {}
    by_clip: dict[tuple[str, str, Scenario, Scale], list[int]] = {}
    for v in votes:
        validate_score(v.score)
        by_condition.setdefault((v.condition_id, v.scenario, v.scale), []).append(v.score)
        by_clip.setdefault((v.clip_id, v.condition_id, v.scenario, v.scale), []).append(v.score)

    if not by_condition:
        raise EmptyGroup("no votes to aggregate")

    condition_scores = []
    for (condition_id, scenario, scale), scores in sorted(
        by_condition.items(), key=lambda kv: (kv[0][0], kv[0][1].value, kv[0][2].value)
    ):
        mean = float(np.mean(scores))
        if not SCORE_MIN <= mean <= SCORE_MAX:
            raise ValueError(f"mean {mean} outside scale bounds")  # unreachable with valid votes
        condition_scores.append(ConditionScore(
            condition_id=condition_id,
            scenario=scenario,
            scale=scale,
            mean=mean,
            n_votes=len(scores),
            ci95=ci95_of(scores),
        ))

    clip_scores = [
        ClipScore(clip_id, condition_id, scenario, scale, float(np.mean(scores)), len(scores))
        for (clip_id, condition_id, scenario, scale), scores in sorted(
            by_clip.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value, kv[0][3].value)
        )
    ]
    return AggregationResult(condition_scores, clip_scores)


# --- external objective scores ---------------------------------------------

def load_objective_scores_csv(path: str | os.PathLike) -> dict[str, dict[str, float]]:
    """Read third-party objective scores (e.g. PESQ) from CSV.

    Expected columns: clip_id, metric_name, value. Returns
    {metric_name: {clip_id: value}}.
    """
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"clip_id", "metric_name", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            out.setdefault(row["metric_name"], {})[row["clip_id"]] = float(row["value"])
    return out
