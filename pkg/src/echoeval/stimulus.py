"""Listening-test stimulus assembly for the three rating scenarios.

Scenario recipes (far-end signal R_in is the loopback; S_out is the AEC
send output):

* near-end single talk: the AEC output is presented as-is.
* far-end single talk: R_in + S_out delayed by 600 ms, mixed to mono, so
  the listener hears their "own" speech followed by its echo residual.
* double talk: stereo presentation, loopback in one ear (acoustic
  sidetone), delayed AEC output in the other.

Trapping stimuli splice a spoken instruction ("select X") into a base
stimulus so inattentive raters can be screened.

Assembly is deterministic: identical inputs and configuration produce
bit-identical audio.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import (
    AudioBuffer,
    SampleRateMismatch,
    delay,
    extract_channel,
    interleave_stereo,
    mix,
    read_wav,
    write_wav,
)
from .scales import Scale, Scenario, scales_for_scenario, validate_score

DEFAULT_DELAY_S = 0.6


class WrongScenario(Exception):
    pass


class PromptTooLong(Exception):
    pass


class OffsetOutOfRange(Exception):
    pass


@dataclass(frozen=True)
class ScenarioInputs:
    """One clip's worth of raw material: loopback and AEC output."""

    r_in: AudioBuffer
    s_out: AudioBuffer
    scenario: Scenario

    def __post_init__(self):
        if self.r_in.sample_rate != self.s_out.sample_rate:
            raise SampleRateMismatch(
                f"r_in {self.r_in.sample_rate} Hz vs s_out {self.s_out.sample_rate} Hz"
            )
        if self.r_in.channels != 1 or self.s_out.channels != 1:
            raise ValueError("scenario inputs must be mono before assembly")


@dataclass(frozen=True)
class Stimulus:
    """A prepared listening item bound to a scenario and condition."""

    id: str
    scenario: Scenario
    condition_id: str
    audio: AudioBuffer
    applied_gain: float = 1.0
    delay_ms: float = DEFAULT_DELAY_S * 1000.0
    channel_gains: tuple[float, float] | None = None  # stereo only


@dataclass(frozen=True)
class TrappingStimulus(Stimulus):
    """Stimulus with an inserted instruction and the answer it announces."""

    expected_answer: int = 1
    target_scale: Scale = Scale.ECHO_DMOS
    prompt_insert_offset_s: float = 0.0


def _require(inputs: ScenarioInputs, scenario: Scenario) -> None:
    if inputs.scenario != scenario:
        raise WrongScenario(f"inputs are for {inputs.scenario.value}, not {scenario.value}")


def prepare_near_end_single_talk(
    inputs: ScenarioInputs, stimulus_id: str = "", condition_id: str = ""
) -> Stimulus:
    """Near-end single talk: pass the AEC output through unmodified."""
    _require(inputs, Scenario.NEAR_END_SINGLE_TALK)
    return Stimulus(
        id=stimulus_id,
        scenario=Scenario.NEAR_END_SINGLE_TALK,
        condition_id=condition_id,
        audio=inputs.s_out,
        applied_gain=1.0,
        delay_ms=0.0,
    )


def prepare_far_end_single_talk(
    inputs: ScenarioInputs,
    delay_s: float = DEFAULT_DELAY_S,
    stimulus_id: str = "",
    condition_id: str = "",
) -> Stimulus:
    """Far-end single talk: mono mix of R_in with S_out delayed by ``delay_s``.

    If the mix peaks above full scale it is globally rescaled and the gain
    recorded on the stimulus.
    """
    _require(inputs, Scenario.FAR_END_SINGLE_TALK)
    mixed = mix(inputs.r_in, delay(inputs.s_out, delay_s))
    return Stimulus(
        id=stimulus_id,
        scenario=Scenario.FAR_END_SINGLE_TALK,
        condition_id=condition_id,
        audio=mixed,
        applied_gain=mixed.applied_gain,
        delay_ms=delay_s * 1000.0,
    )


def _rescale_if_clipping(buf: AudioBuffer) -> tuple[AudioBuffer, float]:
    # Single signals already satisfy |x| <= 1, so this is a guard for
    # buffers constructed outside the normal I/O path.
    peak = float(np.max(np.abs(buf.samples))) if buf.n_frames else 0.0
    if peak <= 1.0:
        return buf, 1.0
    return AudioBuffer(buf.samples / peak, buf.sample_rate), 1.0 / peak


def prepare_double_talk(
    inputs: ScenarioInputs,
    delay_s: float = DEFAULT_DELAY_S,
    loopback_ear: str = "left",
    stimulus_id: str = "",
    condition_id: str = "",
) -> Stimulus:
    """Double talk: stereo with loopback in ``loopback_ear``, delayed S_out opposite.

    Channels are never mixed, so each side stays bit-identical to its
    source unless it would clip on its own (gains recorded per channel,
    loopback ear first).
    """
    _require(inputs, Scenario.DOUBLE_TALK)
    if loopback_ear not in ("left", "right"):
        raise ValueError(f"loopback_ear must be 'left' or 'right', got {loopback_ear!r}")

    sidetone, g_side = _rescale_if_clipping(inputs.r_in)
    echoed, g_echo = _rescale_if_clipping(delay(inputs.s_out, delay_s))
    if loopback_ear == "left":
        audio = interleave_stereo(sidetone, echoed)
    else:
        audio = interleave_stereo(echoed, sidetone)
    return Stimulus(
        id=stimulus_id,
        scenario=Scenario.DOUBLE_TALK,
        condition_id=condition_id,
        audio=audio,
        applied_gain=1.0,
        delay_ms=delay_s * 1000.0,
        channel_gains=(g_side, g_echo),
    )


def loopback_channel(stimulus: Stimulus, loopback_ear: str = "left") -> AudioBuffer:
    """Extract the sidetone ear from a double-talk stimulus."""
    return extract_channel(stimulus.audio, 0 if loopback_ear == "left" else 1)


def make_trapping_stimulus(
    base: Stimulus,
    prompt: AudioBuffer,
    expected_answer: int,
    insert_offset_s: float,
    target_scale: Scale | None = None,
) -> TrappingStimulus:
    """Replace a segment of ``base`` with a spoken instruction prompt.

    The prompt overwrites (never overlays) base samples starting at
    ``insert_offset_s``; total length is unchanged. ``expected_answer`` is
    the score the prompt announces, on ``target_scale`` (defaults to the
    scenario's first scale).
    """
    validate_score(expected_answer)
    if prompt.channels != 1:
        raise ValueError("prompt must be mono")
    if prompt.sample_rate != base.audio.sample_rate:
        raise SampleRateMismatch(
            f"prompt {prompt.sample_rate} Hz vs base {base.audio.sample_rate} Hz"
        )
    rate = base.audio.sample_rate
    start = int(round(insert_offset_s * rate))
    if insert_offset_s < 0 or start >= base.audio.n_frames:
        raise OffsetOutOfRange(
            f"offset {insert_offset_s}s outside clip of {base.audio.duration_s:.3f}s"
        )
    end = start + prompt.n_frames
    if end > base.audio.n_frames:
        raise PromptTooLong(
            f"prompt of {prompt.duration_s:.3f}s does not fit at offset {insert_offset_s}s"
        )

    samples = base.audio.samples.copy()
    if base.audio.channels == 1:
        samples[start:end] = prompt.samples
    else:
        samples[start:end, 0] = prompt.samples
        samples[start:end, 1] = prompt.samples

    if target_scale is None:
        target_scale = scales_for_scenario(base.scenario)[0]
    return TrappingStimulus(
        id=base.id,
        scenario=base.scenario,
        condition_id=base.condition_id,
        audio=AudioBuffer(samples, rate, base.audio.applied_gain),
        applied_gain=base.applied_gain,
        delay_ms=base.delay_ms,
        channel_gains=base.channel_gains,
        expected_answer=expected_answer,
        target_scale=target_scale,
        prompt_insert_offset_s=insert_offset_s,
    )


# --- corpus manifest -------------------------------------------------------

MANIFEST_FIELDS = [
    "id", "scenario", "condition", "gain", "delay_ms", "gain_left", "gain_right", "path",
]


@dataclass(frozen=True)
class StimulusRecord:
    """One manifest row: everything downstream stages need about a clip."""

    id: str
    scenario: Scenario
    condition: str
    gain: float
    delay_ms: float
    path: str
    gain_left: float | None = None
    gain_right: float | None = None

    @classmethod
    def from_stimulus(cls, stim: Stimulus, path: str) -> "StimulusRecord":
        gl, gr = (stim.channel_gains or (None, None))
        return cls(
            id=stim.id,
            scenario=stim.scenario,
            condition=stim.condition_id,
            gain=stim.applied_gain,
            delay_ms=stim.delay_ms,
            path=path,
            gain_left=gl,
            gain_right=gr,
        )


def write_manifest(path: str | os.PathLike, records: list[StimulusRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        for rec in records:
            writer.writerow({
                "id": rec.id,
                "scenario": rec.scenario.value,
                "condition": rec.condition,
                "gain": repr(rec.gain),
                "delay_ms": repr(rec.delay_ms),
                "gain_left": "" if rec.gain_left is None else repr(rec.gain_left),
                "gain_right": "" if rec.gain_right is None else repr(rec.gain_right),
                "path": rec.path,
            })


def read_manifest(path: str | os.PathLike) -> list[StimulusRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(StimulusRecord(
                id=row["id"],
                scenario=Scenario(row["scenario"]),
                condition=row["condition"],
                gain=float(row["gain"]),
                delay_ms=float(row["delay_ms"]),
                path=row.get("path", ""),
                gain_left=float(row["gain_left"]) if row.get("gain_left") else None,
                gain_right=float(row["gain_right"]) if row.get("gain_right") else None,
            ))
    return records


def prepare_directory(
    scenario: Scenario,
    r_in_dir: str | os.PathLike,
    s_out_dir: str | os.PathLike,
    out_dir: str | os.PathLike,
    delay_s: float = DEFAULT_DELAY_S,
    loopback_ear: str = "left",
    condition: str | None = None,
    bit_depth: int = 16,
) -> list[StimulusRecord]:
    """Prepare every WAV pair matched by filename across two directories.

    Emits one stimulus WAV per pair into ``out_dir`` plus a manifest.csv.
    The condition label defaults to the s_out directory name.
    """
    r_in_dir, s_out_dir, out_dir = Path(r_in_dir), Path(s_out_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    condition = condition or s_out_dir.name

    s_files = {p.name: p for p in sorted(s_out_dir.glob("*.wav"))}
    if not s_files:
        raise FileNotFoundError(f"no .wav files in {s_out_dir}")

    records = []
    for name, s_path in s_files.items():
        s_out = read_wav(s_path)
        stim_id = f"{condition}__{scenario.value}__{Path(name).stem}"
        if scenario == Scenario.NEAR_END_SINGLE_TALK:
            inputs = ScenarioInputs(r_in=s_out, s_out=s_out, scenario=scenario)
            stim = prepare_near_end_single_talk(inputs, stim_id, condition)
        else:
            r_path = r_in_dir / name
            if not r_path.exists():
                raise FileNotFoundError(f"no matching far-end file for {name} in {r_in_dir}")
            inputs = ScenarioInputs(read_wav(r_path), s_out, scenario)
            if scenario == Scenario.FAR_END_SINGLE_TALK:
                stim = prepare_far_end_single_talk(inputs, delay_s, stim_id, condition)
            else:
                stim = prepare_double_talk(inputs, delay_s, loopback_ear, stim_id, condition)

        wav_name = f"{stim_id}.wav"
        write_wav(out_dir / wav_name, stim.audio, bit_depth=bit_depth)
        records.append(StimulusRecord.from_stimulus(stim, wav_name))

    write_manifest(out_dir / "manifest.csv", records)
    return records


def undo_gain(stimulus: Stimulus) -> np.ndarray:
    """Stimulus samples with the recorded mix gain divided back out.

    Returns a raw array (not an AudioBuffer) because the un-gained signal
    may legitimately exceed full scale.
    """
    if stimulus.applied_gain == 1.0:
        return stimulus.audio.samples
    return stimulus.audio.samples / stimulus.applied_gain
