"""Deterministic crowdsourcing campaign builder.

A build is a pure function of (corpus, pools, config, seed): identical
inputs serialize to byte-identical task files. The randomization stream
is the fixed 64-bit generator from ``rng`` with a documented draw order,
so an independent implementation can reproduce a build exactly:

1. if padding is needed, one shuffle of a copy of the unique ids (the
   first k become the pad),
2. one shuffle of the full id pool (corpus ids repeated votes_target
   times plus the pad),
3. per task, in output order: task_seed (one raw draw), trapping pick,
   gold picks (each drawn from the defs not yet picked for this task),
   one insert position per gold, trapping insert position,
4. scale order from a fresh generator seeded with task_seed.

Duplicate-free tasks are restored after chunking by deterministic swaps
between tasks, which consume no random draws.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .rng import SplitMix64
from .scales import Scale, Scenario, scales_for_scenario, validate_score

DEFAULT_TASK_SIZE = {
    Scenario.NEAR_END_SINGLE_TALK: 10,
    Scenario.FAR_END_SINGLE_TALK: 10,
    Scenario.DOUBLE_TALK: 12,
}
DEFAULT_PAY_USD = {
    Scenario.NEAR_END_SINGLE_TALK: 0.5,
    Scenario.FAR_END_SINGLE_TALK: 0.5,
    Scenario.DOUBLE_TALK: 0.9,
}
DEFAULT_SETUP_PERIOD_S = 30 * 60
DEFAULT_TRAINING_PERIOD_S = 60 * 60


class EmptyCorpus(Exception):
    pass


class InsufficientTrappingPool(Exception):
    pass


class BuildError(Exception):
    pass


@dataclass(frozen=True)
class TrappingDef:
    """An attention-check clip and the answer its spoken prompt demands."""

    clip_id: str
    expected_answer: int
    scale: Scale

    def __post_init__(self) -> None:
        validate_score(self.expected_answer)


@dataclass(frozen=True)
class GoldDef:
    """A clip with a known expected rating, screened with a tolerance band."""

    clip_id: str
    expected_score: int
    scale: Scale
    tolerance: int = 1

    def __post_init__(self) -> None:
        validate_score(self.expected_score)
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")


@dataclass(frozen=True)
class SectionFlags:
    qualification: bool = True
    setup: bool = True
    training: bool = True


@dataclass(frozen=True)
class TaskConfig:
    """Campaign-wide knobs; task_size and pay default by scenario."""

    scenario: Scenario
    votes_target: int = 10
    task_size: int | None = None
    gold_per_task: int = 1
    single_question: bool = False
    pay_usd: float | None = None
    campaign_id: str = "camp"
    setup_period_s: float = DEFAULT_SETUP_PERIOD_S
    training_period_s: float = DEFAULT_TRAINING_PERIOD_S

    def __post_init__(self) -> None:
        if self.votes_target < 1:
            raise ValueError(f"votes_target must be >= 1, got {self.votes_target}")
        if self.task_size is None:
            object.__setattr__(self, "task_size", DEFAULT_TASK_SIZE[self.scenario])
        if self.task_size < 1:
            raise ValueError(f"task_size must be >= 1, got {self.task_size}")
        if self.gold_per_task < 0:
            raise ValueError(f"gold_per_task must be >= 0, got {self.gold_per_task}")
        if self.pay_usd is None:
            object.__setattr__(self, "pay_usd", DEFAULT_PAY_USD[self.scenario])

    @property
    def scales(self) -> list[Scale]:
        return scales_for_scenario(self.scenario, self.single_question)


@dataclass(frozen=True)
class TaskManifest:
    """One crowdsourcing task: ordered clips with trapping/gold markers.

    ``clips`` is the full play order including the trapping clip and any
    gold clips; ``task_size`` counts only the rating clips. The markers
    are server-side knowledge and must be stripped before a manifest is
    shown to a worker (see client_document).
    """

    task_id: str
    clips: tuple[str, ...]
    trapping: TrappingDef
    gold: tuple[GoldDef, ...]
    scales: tuple[Scale, ...]
    scenario: Scenario
    seed: int
    pay_usd: float
    section_flags: SectionFlags = SectionFlags()

    def __post_init__(self) -> None:
        if self.trapping.clip_id not in self.clips:
            raise ValueError("trapping clip missing from clip list")
        if self.clips.index(self.trapping.clip_id) == 0:
            raise ValueError("trapping clip must not be first")
        for g in self.gold:
            if g.clip_id not in self.clips:
                raise ValueError(f"gold clip {g.clip_id} missing from clip list")
        if len(set(self.clips)) != len(self.clips):
            raise ValueError("duplicate clip in task")

    @property
    def special_ids(self) -> frozenset[str]:
        return frozenset({self.trapping.clip_id} | {g.clip_id for g in self.gold})

    @property
    def rating_clip_ids(self) -> tuple[str, ...]:
        special = self.special_ids
        return tuple(c for c in self.clips if c not in special)


@dataclass
class SessionState:
    """Per-worker section history; timestamps are epoch seconds."""

    worker_id: str
    qualification_passed: bool = False
    qualification_at: float | None = None
    last_setup_pass: float | None = None
    last_training_pass: float | None = None
    trapping_failures: int = 0

    def record_qualification(self, at: float) -> None:
        self.qualification_passed = True
        self.qualification_at = self._monotone(self.qualification_at, at)

    def record_setup(self, at: float) -> None:
        self.last_setup_pass = self._monotone(self.last_setup_pass, at)

    def record_training(self, at: float) -> None:
        self.last_training_pass = self._monotone(self.last_training_pass, at)

    @staticmethod
    def _monotone(prev: float | None, at: float) -> float:
        return at if prev is None else max(prev, at)


def schedule_sections(state: SessionState, now: float, config: TaskConfig) -> SectionFlags:
    """Which sections the worker's next task must include.

    Qualification appears until passed once; setup and training recur
    when at least the configured period has elapsed since the last pass
    (boundary inclusive: exactly one period triggers a re-check).
    """
    def due(last: float | None, period: float) -> bool:
        return last is None or now - last >= period

    return SectionFlags(
        qualification=not state.qualification_passed,
        setup=due(state.last_setup_pass, config.setup_period_s),
        training=due(state.last_training_pass, config.training_period_s),
    )


def randomize_scale_order(scales: Sequence[Scale], task_seed: int) -> tuple[Scale, ...]:
    """Uniform permutation of the scale list determined by task_seed."""
    if not scales:
        raise ValueError("need at least one scale")
    order = list(scales)
    SplitMix64(task_seed).shuffle(order)
    return tuple(order)


def _padded_pool(ids: Sequence[str], votes_target: int, task_size: int, rng: SplitMix64) -> list[str]:
    pool = [i for i in ids for _ in range(votes_target)]
    remainder = len(pool) % task_size
    if remainder:
        extra = list(ids)
        rng.shuffle(extra)
        pool.extend(extra[: task_size - remainder])
    return pool


def _repair_duplicates(tasks: list[list[str]]) -> None:
    """Swap clips between tasks until every task is duplicate-free.

    Each swap moves a duplicated clip into a task that lacks it, in
    exchange for a clip the first task lacks, so the total duplicate
    count strictly decreases. Purely structural: consumes no randomness.
    """
    for t_idx, task in enumerate(tasks):
        seen: set[str] = set()
        for pos, clip in enumerate(task):
            if clip not in seen:
                seen.add(clip)
                continue
            if not _swap_out(tasks, t_idx, pos):
                raise BuildError("could not remove within-task duplicate")
    for task in tasks:
        assert len(set(task)) == len(task)


def _swap_out(tasks: list[list[str]], t_idx: int, pos: int) -> bool:
    task = tasks[t_idx]
    clip = task[pos]
    members = set(task)
    for u_idx in range(len(tasks)):
        if u_idx == t_idx:
            continue
        other = tasks[u_idx]
        if clip in other:
            continue
        for q, candidate in enumerate(other):
            if candidate not in members:
                task[pos], other[q] = candidate, clip
                return True
    return False


def build_tasks(
    stimulus_ids: Sequence[str],
    trapping_pool: Sequence[TrappingDef],
    gold_pool: Sequence[GoldDef],
    config: TaskConfig,
    seed: int,
) -> list[TaskManifest]:
    """Schedule every clip into at least votes_target distinct tasks.

    Tasks hold ``config.task_size`` distinct rating clips plus exactly one
    trapping clip (uniform over positions 1..end, never first) and
    ``config.gold_per_task`` gold clips (uniform over all positions).
    The whole build is reproducible from (inputs, config, seed).
    """
    ids = list(stimulus_ids)
    if not ids:
        raise EmptyCorpus("no stimuli to schedule")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate stimulus ids in corpus")
    if not trapping_pool:
        raise InsufficientTrappingPool("trapping pool is empty")
    if config.gold_per_task > 0 and not gold_pool:
        raise ValueError("gold_per_task > 0 but gold pool is empty")
    if config.gold_per_task > len(gold_pool) > 0:
        raise ValueError(
            f"gold_per_task {config.gold_per_task} exceeds pool of {len(gold_pool)} definitions"
        )
    task_size = config.task_size
    assert task_size is not None
    if len(ids) < task_size:
        raise ValueError(f"corpus of {len(ids)} clips cannot fill tasks of size {task_size}")

    special_ids = {d.clip_id for d in trapping_pool} | {g.clip_id for g in gold_pool}
    overlap = special_ids & set(ids)
    if overlap:
        raise ValueError(f"trapping/gold ids collide with corpus ids: {sorted(overlap)[:3]}")

    rng = SplitMix64(seed)
    if len(ids) == task_size:
        # Every task must contain the whole corpus; emit shuffled rounds.
        chunks = []
        for _ in range(config.votes_target):
            round_ids = list(ids)
            rng.shuffle(round_ids)
            chunks.append(round_ids)
    else:
        pool = _padded_pool(ids, config.votes_target, task_size, rng)
        rng.shuffle(pool)
        chunks = [pool[i:i + task_size] for i in range(0, len(pool), task_size)]
        _repair_duplicates(chunks)

    manifests = []
    width = max(5, len(str(len(chunks))))
    for index, chunk in enumerate(chunks):
        task_seed = rng.next_u64()
        trapping = trapping_pool[rng.bounded(len(trapping_pool))]
        # Gold defs are drawn without replacement so a task never carries
        # the same reference clip twice.
        remaining = list(gold_pool)
        golds = tuple(
            remaining.pop(rng.bounded(len(remaining))) for _ in range(config.gold_per_task)
        )
        clips = list(chunk)
        for g in golds:
            clips.insert(rng.bounded(len(clips) + 1), g.clip_id)
        clips.insert(1 + rng.bounded(len(clips)), trapping.clip_id)
        manifests.append(TaskManifest(
            task_id=f"{config.campaign_id}_{index:0{width}d}",
            clips=tuple(clips),
            trapping=trapping,
            gold=golds,
            scales=randomize_scale_order(config.scales, task_seed),
            scenario=config.scenario,
            seed=task_seed,
            pay_usd=config.pay_usd,
        ))
    return manifests


# --- serialization -----------------------------------------------------------

def manifest_to_dict(manifest: TaskManifest) -> dict:
    return {
        "task_id": manifest.task_id,
        "clips": list(manifest.clips),
        "trapping": {
            "clip_id": manifest.trapping.clip_id,
            "expected": manifest.trapping.expected_answer,
            "scale": manifest.trapping.scale.value,
        },
        "gold": [
            {
                "clip_id": g.clip_id,
                "expected": g.expected_score,
                "scale": g.scale.value,
                "tolerance": g.tolerance,
            }
            for g in manifest.gold
        ],
        "scales": [s.value for s in manifest.scales],
        "scenario": manifest.scenario.value,
        "seed": manifest.seed,
        "pay_usd": manifest.pay_usd,
    }


def manifest_from_dict(doc: dict) -> TaskManifest:
    return TaskManifest(
        task_id=doc["task_id"],
        clips=tuple(doc["clips"]),
        trapping=TrappingDef(
            clip_id=doc["trapping"]["clip_id"],
            expected_answer=doc["trapping"]["expected"],
            scale=Scale(doc["trapping"]["scale"]),
        ),
        gold=tuple(
            GoldDef(g["clip_id"], g["expected"], Scale(g["scale"]), g["tolerance"])
            for g in doc["gold"]
        ),
        scales=tuple(Scale(s) for s in doc["scales"]),
        scenario=Scenario(doc["scenario"]),
        seed=doc["seed"],
        pay_usd=doc["pay_usd"],
    )


def client_document(manifest: TaskManifest, flags: SectionFlags) -> dict:
    """Worker-facing view: play order and scales, no trapping/gold markers."""
    return {
        "task_id": manifest.task_id,
        "clips": list(manifest.clips),
        "scales": [s.value for s in manifest.scales],
        "scenario": manifest.scenario.value,
        "pay_usd": manifest.pay_usd,
        "section_flags": {
            "qualification": flags.qualification,
            "setup": flags.setup,
            "training": flags.training,
        },
    }


def write_tasks_jsonl(manifests: Iterable[TaskManifest], path: str | os.PathLike) -> None:
    """One compact, key-sorted JSON object per line; byte-stable."""
    with open(path, "w", newline="\n") as fh:
        for m in manifests:
            fh.write(json.dumps(manifest_to_dict(m), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_tasks_jsonl(path: str | os.PathLike) -> list[TaskManifest]:
    with open(path) as fh:
        return [manifest_from_dict(json.loads(line)) for line in fh if line.strip()]
