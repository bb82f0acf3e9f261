"""Deterministic audio primitives: WAV I/O, delay, mixing, stereo assembly.

All buffers are float64 in [-1, 1]. Mixing never hard-clips: if a sum
exceeds full scale the whole mix is rescaled by 1/peak and the gain is
recorded on the output buffer, so relative levels are preserved.

File I/O is restricted to linear PCM WAV, 16-bit int or 32-bit float,
mono or stereo, at 16 kHz or 48 kHz. There is no resampling; feeding
mismatched rates into an operation is a hard error by design (silent
resampling hides alignment bugs).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

SUPPORTED_RATES = (16000, 48000)

# 16-bit integer <-> float convention: divide by 32768. Fixed so that
# round-trips are exact for file-sourced data.
PCM16_FULL_SCALE = 32768.0


class AudioError(Exception):
    pass


class MalformedWav(AudioError):
    """File is not a readable RIFF/WAV or its payload is invalid."""


class UnsupportedFormat(AudioError):
    """Readable WAV, but not linear PCM 16-bit/float32 mono-or-stereo at a supported rate."""


class NotMono(AudioError):
    pass


class SampleRateMismatch(AudioError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    """Sampled audio: shape (n,) mono or (n, 2) stereo, amplitudes in [-1, 1].

    ``applied_gain`` records the cumulative rescale (if any) that an
    operation applied to keep the buffer within full scale; 1.0 means the
    samples are untouched. Treat instances as immutable.
    """

    samples: np.ndarray
    sample_rate: int
    applied_gain: float = field(default=1.0)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim not in (1, 2):
            raise ValueError("samples must be 1-D (mono) or 2-D (stereo)")
        if samples.ndim == 2 and samples.shape[1] != 2:
            raise ValueError("stereo samples must have shape (n, 2)")
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite values")
        if samples.size and float(np.max(np.abs(samples))) > 1.0:
            raise ValueError("sample magnitudes exceed 1.0; apply a gain policy first")

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else 2

    @property
    def n_frames(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate


def read_wav(path: str | os.PathLike) -> AudioBuffer:
    """Read a 16-bit int or 32-bit float PCM WAV into an AudioBuffer.

    16-bit samples are scaled by 1/32768; float samples pass through
    unchanged and must already lie in [-1, 1].
    """
    try:
        rate, data = wavfile.read(os.fspath(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise MalformedWav(f"{path}: {exc}") from exc

    if data.ndim == 2 and data.shape[1] > 2:
        raise UnsupportedFormat(f"{path}: {data.shape[1]} channels (only mono/stereo supported)")
    if rate not in SUPPORTED_RATES:
        raise UnsupportedFormat(f"{path}: sample rate {rate} (supported: {SUPPORTED_RATES})")

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_FULL_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
        if samples.size and float(np.max(np.abs(samples))) > 1.0:
            raise MalformedWav(f"{path}: float samples exceed [-1, 1]")
    else:
        raise UnsupportedFormat(f"{path}: dtype {data.dtype} (only int16 and float32 supported)")

    return AudioBuffer(samples, int(rate))


def write_wav(path: str | os.PathLike, buf: AudioBuffer, bit_depth: int = 16) -> None:
    """Write a buffer as linear PCM WAV, 16-bit int or 32-bit float.

    16-bit encoding rounds sample*32768 and clamps to the int16 range, so
    read_wav(write_wav(x)) is within one LSB (2**-15) per sample; 32-bit
    float writes are bit-exact for float32-representable samples.
    """
    if buf.sample_rate not in SUPPORTED_RATES:
        raise UnsupportedFormat(f"sample rate {buf.sample_rate} (supported: {SUPPORTED_RATES})")
    if bit_depth == 16:
        pcm = np.round(buf.samples * PCM16_FULL_SCALE)
        data = np.clip(pcm, -32768, 32767).astype(np.int16)
    elif bit_depth == 32:
        data = buf.samples.astype(np.float32)
    else:
        raise UnsupportedFormat(f"bit depth {bit_depth} (use 16 or 32)")
    wavfile.write(os.fspath(path), buf.sample_rate, data)


def delay(buf: AudioBuffer, seconds: float) -> AudioBuffer:
    """Prepend round(seconds * rate) zeros to a mono buffer.

    The sample count uses round-to-nearest (ties to even); the original
    samples are carried over bit-identically.
    """
    if buf.channels != 1:
        raise NotMono("delay expects a mono buffer")
    if seconds < 0:
        raise ValueError("delay must be non-negative")
    n = int(round(seconds * buf.sample_rate))
    if n == 0:
        return AudioBuffer(buf.samples, buf.sample_rate, buf.applied_gain)
    out = np.concatenate([np.zeros(n, dtype=np.float64), buf.samples])
    return AudioBuffer(out, buf.sample_rate, buf.applied_gain)


def _pad_to(samples: np.ndarray, n: int) -> np.ndarray:
    if samples.shape[0] >= n:
        return samples
    return np.concatenate([samples, np.zeros(n - samples.shape[0], dtype=np.float64)])


def mix(a: AudioBuffer, b: AudioBuffer, gain_policy: str = "peak_rescale") -> AudioBuffer:
    """Sample-wise sum of two mono buffers; shorter input is zero-padded.

    gain_policy:
      * "peak_rescale" (default): if |sum| peaks above 1.0 the whole mix is
        scaled by 1/peak and that gain is recorded on the output.
      * "sum": raw addition; raises if the result would clip.
    """
    if a.sample_rate != b.sample_rate:
        raise SampleRateMismatch(f"{a.sample_rate} Hz vs {b.sample_rate} Hz")
    if a.channels != 1 or b.channels != 1:
        raise NotMono("mix expects mono buffers")
    if gain_policy not in ("peak_rescale", "sum"):
        raise ValueError(f"unknown gain policy {gain_policy!r}")

    n = max(a.n_frames, b.n_frames)
    total = _pad_to(a.samples, n) + _pad_to(b.samples, n)
    peak = float(np.max(np.abs(total))) if n else 0.0
    gain = 1.0
    if peak > 1.0:
        if gain_policy == "sum":
            raise ValueError(f"sum peaks at {peak:.6f}; use peak_rescale")
        total = total / peak
        gain = 1.0 / peak
    return AudioBuffer(total, a.sample_rate, applied_gain=gain)


def interleave_stereo(left: AudioBuffer, right: AudioBuffer) -> AudioBuffer:
    """Assemble two mono buffers into one stereo buffer.

    The shorter channel is padded with trailing zeros; both channels are
    otherwise carried over bit-identically.
    """
    if left.sample_rate != right.sample_rate:
        raise SampleRateMismatch(f"{left.sample_rate} Hz vs {right.sample_rate} Hz")
    if left.channels != 1 or right.channels != 1:
        raise NotMono("interleave_stereo expects mono inputs")
    n = max(left.n_frames, right.n_frames)
    stacked = np.stack([_pad_to(left.samples, n), _pad_to(right.samples, n)], axis=1)
    return AudioBuffer(stacked, left.sample_rate)


def extract_channel(buf: AudioBuffer, channel: int) -> AudioBuffer:
    """Pull one channel (0 = left, 1 = right) out of a stereo buffer."""
    if buf.channels != 2:
        raise ValueError("extract_channel expects a stereo buffer")
    if channel not in (0, 1):
        raise ValueError("channel must be 0 or 1")
    return AudioBuffer(buf.samples[:, channel].copy(), buf.sample_rate)
