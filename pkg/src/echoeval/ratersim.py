"""Synthetic rater populations for end-to-end pipeline validation.

Honest raters vote clamp(round(truth + Normal(bias, noise_sd)), 1, 5)
and always answer trapping prompts correctly; spammers vote uniformly at
random and hit the trapping answer only with probability attention_p.
Runs are deterministic under a seed, so screening efficacy and
reproducibility claims can be checked statistically without humans.

Rounding is half-up (floor(x + 0.5)) so boundary behavior is defined.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .rng import SplitMix64
from .scales import SCORE_MAX, SCORE_MIN, Scale
from .screening import ClipAnswer, Submission
from .taskbuilder import TaskManifest

HONEST_LISTEN_S = 8.0  # nominal clip length; spammers report ~0


class MissingTruth(Exception):
    pass


class RaterKind(str, Enum):
    RELIABLE = "reliable"
    BIASED = "biased"
    SPAMMER = "spammer"


@dataclass(frozen=True)
class RaterProfile:
    kind: RaterKind
    noise_sd: float = 0.0
    bias: float = 0.0
    attention_p: float = 1.0

    def __post_init__(self) -> None:
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not 0.0 <= self.attention_p <= 1.0:
            raise ValueError(f"attention_p must be in [0, 1], got {self.attention_p}")
        if self.kind == RaterKind.RELIABLE and self.attention_p != 1.0:
            raise ValueError("reliable raters must have attention_p = 1")


@dataclass(frozen=True)
class Rater:
    worker_id: str
    profile: RaterProfile


@dataclass(frozen=True)
class GroundTruth:
    """True score per (clip, scale); must cover every rated clip."""

    by_clip: Mapping[str, Mapping[Scale, float]]

    def truth_for(self, clip_id: str, scale: Scale) -> float:
        try:
            return self.by_clip[clip_id][scale]
        except KeyError:
            raise MissingTruth(f"no truth for clip {clip_id!r} on {scale.value}") from None

    @classmethod
    def from_conditions(
        cls,
        condition_of: Mapping[str, str],
        condition_truth: Mapping[str, Mapping[Scale, float]],
    ) -> "GroundTruth":
        """Expand per-condition truth to every clip of that condition."""
        by_clip = {}
        for clip_id, condition in condition_of.items():
            if condition not in condition_truth:
                raise MissingTruth(f"no truth for condition {condition!r}")
            by_clip[clip_id] = dict(condition_truth[condition])
        return cls(by_clip)


def make_population(
    n_reliable: int = 0,
    n_biased: int = 0,
    n_spammers: int = 0,
    noise_sd: float = 0.7,
    bias: float = 0.0,
    attention_p: float = 0.2,
) -> list[Rater]:
    """Reliable raters first, then biased, then spammers; stable ids."""
    raters = []
    for i in range(n_reliable):
        raters.append(Rater(f"rel_{i:03d}", RaterProfile(RaterKind.RELIABLE, noise_sd=noise_sd)))
    for i in range(n_biased):
        raters.append(Rater(
            f"bias_{i:03d}",
            RaterProfile(RaterKind.BIASED, noise_sd=noise_sd, bias=bias),
        ))
    for i in range(n_spammers):
        raters.append(Rater(f"spam_{i:03d}", RaterProfile(RaterKind.SPAMMER, attention_p=attention_p)))
    if not raters:
        raise ValueError("population is empty")
    return raters


def _normal(rng: SplitMix64, mu: float, sd: float) -> float:
    if sd == 0.0:
        return mu
    u1 = rng.uniform()
    u2 = rng.uniform()
    return mu + sd * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _clamp_round(x: float) -> int:
    return int(min(SCORE_MAX, max(SCORE_MIN, math.floor(x + 0.5))))


def _honest_score(rng: SplitMix64, profile: RaterProfile, truth: float) -> int:
    return _clamp_round(truth + _normal(rng, profile.bias, profile.noise_sd))


def _spammer_score(rng: SplitMix64) -> int:
    return SCORE_MIN + rng.bounded(SCORE_MAX - SCORE_MIN + 1)


def _trapping_score(rng: SplitMix64, profile: RaterProfile, expected: int) -> int:
    """Correct with probability attention_p, else uniform over wrong answers."""
    if profile.attention_p >= 1.0 or rng.uniform() <= profile.attention_p:
        return expected
    wrong = [s for s in range(SCORE_MIN, SCORE_MAX + 1) if s != expected]
    return wrong[rng.bounded(len(wrong))]


def simulate_task(
    manifest: TaskManifest,
    rater: Rater,
    truth: GroundTruth,
    task_rng: SplitMix64,
    started_at: float = 0.0,
) -> Submission:
    """One rater completes one task; answers follow manifest order."""
    profile = rater.profile
    spam = profile.kind == RaterKind.SPAMMER
    trap = manifest.trapping

    answers = []
    for clip in manifest.clips:
        for scale in manifest.scales:
            if clip == trap.clip_id:
                if scale == trap.scale:
                    score = _trapping_score(task_rng, profile, trap.expected_answer)
                elif spam:
                    score = _spammer_score(task_rng)
                else:
                    # The prompt overwrites the clip; honest raters echo it.
                    score = trap.expected_answer
            elif spam:
                score = _spammer_score(task_rng)
            else:
                score = _honest_score(task_rng, profile, truth.truth_for(clip, scale))
            answers.append(ClipAnswer(
                clip_id=clip,
                scale=scale,
                score=score,
                playback_complete=True,
                listen_duration_s=0.0 if spam else HONEST_LISTEN_S,
            ))
    return Submission(
        worker_id=rater.worker_id,
        task_id=manifest.task_id,
        answers=tuple(answers),
        started_at=started_at,
        submitted_at=started_at + 1.0,
    )


def simulate_run(
    manifests: Sequence[TaskManifest],
    population: Sequence[Rater],
    truth: GroundTruth,
    seed: int,
) -> list[Submission]:
    """Every task completed once; task i goes to population[i % size].

    Each task consumes one seed draw for its private stream, so edits to
    one rater's behavior cannot shift another task's randomness.
    """
    if not population:
        raise ValueError("population is empty")
    if not manifests:
        raise ValueError("no tasks to simulate")
    master = SplitMix64(seed)
    submissions = []
    for i, manifest in enumerate(manifests):
        task_rng = SplitMix64(master.next_u64())
        rater = population[i % len(population)]
        submissions.append(simulate_task(manifest, rater, truth, task_rng, started_at=1000.0 + i))
    return submissions


# --- config file -------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    population: list[Rater]
    clip_truth: GroundTruth | None
    condition_truth: dict[str, dict[Scale, float]] | None


def load_sim_config(path: str | os.PathLike) -> SimConfig:
    """Population mix plus truth, either per clip or per condition.

    Schema: {"population": [{"kind", "count", "noise_sd"?, "bias"?,
    "attention_p"?}], "truth": {clip: {scale: value}}} or
    "condition_truth": {condition: {scale: value}} in place of "truth".
    """
    with open(path) as fh:
        doc = json.load(fh)
    raters = []
    for group in doc["population"]:
        kind = RaterKind(group["kind"])
        profile = RaterProfile(
            kind=kind,
            noise_sd=group.get("noise_sd", 0.0),
            bias=group.get("bias", 0.0),
            attention_p=group.get("attention_p", 1.0 if kind != RaterKind.SPAMMER else 0.2),
        )
        for i in range(group["count"]):
            raters.append(Rater(f"{kind.value}_{len(raters):03d}", profile))
    if not raters:
        raise ValueError(f"{path}: population is empty")

    def parse_truth(raw: Mapping[str, Mapping[str, float]]) -> dict[str, dict[Scale, float]]:
        return {
            key: {Scale(s): float(v) for s, v in per_scale.items()}
            for key, per_scale in raw.items()
        }

    clip_truth = None
    condition_truth = None
    if "truth" in doc:
        clip_truth = GroundTruth(parse_truth(doc["truth"]))
    if "condition_truth" in doc:
        condition_truth = parse_truth(doc["condition_truth"])
    if clip_truth is None and condition_truth is None:
        raise ValueError(f"{path}: needs 'truth' or 'condition_truth'")
    return SimConfig(population=raters, clip_truth=clip_truth, condition_truth=condition_truth)
