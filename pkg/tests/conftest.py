import numpy as np
import pytest

from echoeval import (
    AudioBuffer,
    GoldDef,
    Scale,
    Scenario,
    StimulusRecord,
    TaskConfig,
    TrappingDef,
    build_tasks,
    write_manifest,
    write_tasks_jsonl,
    write_wav,
)


def make_noise(n: int, rate: int = 16000, seed: int = 0, amp: float = 0.5) -> AudioBuffer:
    rng = np.random.default_rng(seed)
    return AudioBuffer(rng.uniform(-amp, amp, n), rate)


@pytest.fixture
def noise():
    return make_noise


def build_small_campaign(
    n_clips: int = 24,
    votes_target: int = 2,
    task_size: int = 8,
    gold_per_task: int = 1,
    seed: int = 11,
    scenario: Scenario = Scenario.FAR_END_SINGLE_TALK,
):
    """Tiny deterministic campaign: ids, pools, config, manifests."""
    ids = [f"clip_{i:03d}" for i in range(n_clips)]
    trapping = [
        TrappingDef("trap_0", 1, Scale.ECHO_DMOS),
        TrappingDef("trap_1", 5, Scale.ECHO_DMOS),
    ]
    gold = [GoldDef("gold_0", 5, Scale.ECHO_DMOS)] if gold_per_task else []
    config = TaskConfig(
        scenario=scenario,
        votes_target=votes_target,
        task_size=task_size,
        gold_per_task=gold_per_task,
    )
    manifests = build_tasks(ids, trapping, gold, config, seed)
    return ids, trapping, gold, config, manifests


@pytest.fixture
def small_campaign():
    return build_small_campaign()


def write_campaign_dir(tmp_path, manifests, extra_clip_ids=(), rate: int = 16000):
    """Materialize a servable campaign dir: tasks.jsonl, manifest.csv, WAVs."""
    clips_dir = tmp_path / "clips"
    clips_dir.mkdir(exist_ok=True)
    all_ids = sorted({c for m in manifests for c in m.clips} | set(extra_clip_ids))
    scenario = manifests[0].scenario
    records = []
    for i, clip_id in enumerate(all_ids):
        buf = make_noise(rate // 10, rate=rate, seed=i, amp=0.3)
        path = clips_dir / f"{clip_id}.wav"
        write_wav(path, buf)
        special = clip_id.startswith(("trap_", "gold_"))
        records.append(StimulusRecord(
            id=clip_id,
            scenario=scenario,
            condition="special" if special else f"model_{int(clip_id.split('_')[1]) % 2}",
            gain=1.0,
            delay_ms=600.0,
            path=str(path),
        ))
    write_manifest(tmp_path / "manifest.csv", records)
    write_tasks_jsonl(manifests, tmp_path / "tasks.jsonl")
    condition_of = {r.id: r.condition for r in records}
    return tmp_path, condition_of
