"""Perturbation operators: additive noise at a target SNR, speed and volume."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .audio import AudioClip, apply_gain, saturate16
from .errors import (
    EmptyClip,
    InvalidFactor,
    RateMismatch,
    SilentNoise,
    SilentSignal,
    UnsupportedChannelCount,
)
from .resample import resample_array

SNR_PRESETS = (5, 10, 15, 20)
SPEED_MAGNITUDE = 0.10
VOLUME_MAGNITUDE = 0.20

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def utterance_hash(utterance_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(utterance_id.encode("utf-8"), digest_size=8).digest(), "little")


class Rng:
    """Seeded random stream; equal seeds give equal draw sequences.

    ``Rng.for_utterance`` derives an independent stream per (seed, utterance,
    purpose) so results do not depend on processing order or worker count.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @classmethod
    def for_utterance(cls, seed: int, utterance_id: str, stream: str = "") -> "Rng":
        key = utterance_id if not stream else f"{utterance_id}\x00{stream}"
        return cls(splitmix64((int(seed) & _MASK64) ^ splitmix64(utterance_hash(key))))

    def integers(self, high: int) -> int:
        return int(self._gen.integers(0, high))

    def random(self) -> float:
        return float(self._gen.random())

    def direction(self) -> int:
        """+1 (increase) or -1 (decrease), each with probability 1/2."""
        return 1 if self._gen.integers(0, 2) else -1


def draw_factor(rng: Rng, magnitude: float) -> float:
    """Pick ``1 + magnitude`` or ``1 - magnitude`` with equal probability."""
    if not 0 < magnitude < 1:
        raise InvalidFactor(f"perturbation magnitude must be in (0, 1), got {magnitude}")
    return round(1.0 + rng.direction() * magnitude, 12)


def signal_energy(clip: AudioClip) -> float:
    """Mean-square energy of full-scale-normalized samples."""
    if clip.samples.size == 0:
        raise EmptyClip("energy of an empty clip is undefined")
    x = clip.samples.astype(np.float64) / 32768.0
    return float(np.dot(x, x) / x.size)


@dataclass(frozen=True)
class MixResult:
    clip: AudioClip
    scale: float
    offset: int
    clipped: int
    measured_snr_db: float


def pick_noise(noises: Sequence, rng: Rng):
    if not noises:
        raise SilentNoise("noise corpus is empty")
    return noises[rng.integers(len(noises))]


def mix_noise(clip: AudioClip, noise: AudioClip, snr_db: float, rng: Rng,
              offset: int | None = None) -> MixResult:
    """Add ``noise`` to ``clip`` at ``snr_db`` over the whole utterance.

    The noise is read from a random start offset and looped to cover the
    clip exactly, then scaled so that whole-utterance signal energy over
    scaled-noise energy equals the target.  The mixture is rounded and
    saturated to 16 bits.
    """
    if clip.channels != 1 or noise.channels != 1:
        raise UnsupportedChannelCount("mix_noise expects mono clips")
    if clip.sample_rate != noise.sample_rate:
        raise RateMismatch(f"signal at {clip.sample_rate} Hz, noise at {noise.sample_rate} Hz")
    if not math.isfinite(snr_db):
        raise ValueError("target SNR must be finite")
    if clip.samples.size == 0:
        raise EmptyClip("cannot mix noise into an empty clip")
    e_sig = signal_energy(clip)
    if e_sig == 0:
        raise SilentSignal("signal has zero energy; SNR is undefined")
    if noise.samples.size == 0 or not noise.samples.any():
        raise SilentNoise("noise has zero energy")
    if offset is None:
        offset = rng.integers(noise.samples.size)
    idx = (offset + np.arange(clip.samples.size)) % noise.samples.size
    seg = noise.samples[idx].astype(np.float64)
    e_noise = float(np.dot(seg, seg) / seg.size) / 32768.0 ** 2
    if e_noise == 0:
        raise SilentNoise("selected noise segment has zero energy")
    scale = math.sqrt(e_sig / (e_noise * 10.0 ** (snr_db / 10.0)))
    s = clip.samples.astype(np.float64)
    mixed = s + scale * seg
    out, clipped = saturate16(mixed)
    added = np.round(mixed) - s
    e_added = float(np.dot(added, added))
    measured = 10 * math.log10(float(np.dot(s, s)) / e_added) if e_added > 0 else math.inf
    return MixResult(clip.replace(out), scale, int(offset), clipped, measured)


def perturb_speed(clip: AudioClip, factor: float | None = None, rng: Rng | None = None,
                  magnitude: float = SPEED_MAGNITUDE) -> AudioClip:
    """Resampling speed change: tempo and pitch both scale by ``factor``.

    The output has ``round(n / factor)`` samples at the original rate.  If
    ``factor`` is omitted a direction is drawn from ``rng``.
    """
    if clip.channels != 1:
        raise UnsupportedChannelCount("perturb_speed expects a mono clip")
    if factor is None:
        if rng is None:
            raise InvalidFactor("either factor or rng is required")
        factor = draw_factor(rng, magnitude)
    if not factor > 0:
        raise InvalidFactor(f"speed factor must be positive, got {factor}")
    if factor == 1.0:
        return clip
    ratio = Fraction(1 / factor).limit_denominator(1000)
    y = resample_array(clip.samples, ratio.numerator, ratio.denominator)
    out, _clipped = saturate16(y)
    return clip.replace(out)


def perturb_volume(clip: AudioClip, factor: float | None = None, rng: Rng | None = None,
                   magnitude: float = VOLUME_MAGNITUDE) -> tuple[AudioClip, int]:
    """Linear gain change; returns the clip and the number of saturated samples."""
    if clip.channels != 1:
        raise UnsupportedChannelCount("perturb_volume expects a mono clip")
    if factor is None:
        if rng is None:
            raise InvalidFactor("either factor or rng is required")
        factor = draw_factor(rng, magnitude)
    if not factor > 0:
        raise InvalidFactor(f"volume factor must be positive, got {factor}")
    return apply_gain(clip, factor)
