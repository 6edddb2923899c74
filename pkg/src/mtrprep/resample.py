"""Band-limited sample-rate conversion with a Kaiser-windowed sinc FIR.

Rate changes are rational (``up``/``down``).  The prototype low-pass runs at
``up`` times the input rate with its cutoff below the lower of the two
Nyquist frequencies, so upsampling never invents content above the source
band and downsampling removes everything the target rate cannot represent.
Samples beyond the clip edges are treated as zeros.  All filtering is done in
double precision and rounded to 16 bits once.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .audio import AudioClip, saturate16
from .errors import UnsupportedChannelCount, UnsupportedRate

SUPPORTED_RATES = (8000, 16000)
DEFAULT_TAPS = 127
DEFAULT_CUTOFF = 0.45
DEFAULT_BETA = 8.0

# output samples per chunk, bounds the gather matrix size
_CHUNK = 1 << 15


@dataclass(frozen=True)
class ResampleSpec:
    """Filter parameters for a rate change.

    ``filter_taps`` is the prototype length for a 2:1 conversion; other ratios
    scale it so the filter spans the same time at the lower rate.
    ``cutoff_fraction`` places the cutoff at that fraction of the lower
    sample rate (0.45 puts it at 90% of the lower Nyquist frequency).
    """

    source_rate: int
    target_rate: int
    filter_taps: int = DEFAULT_TAPS
    cutoff_fraction: float = DEFAULT_CUTOFF
    kaiser_beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.filter_taps < 1 or self.filter_taps % 2 == 0:
            raise ValueError(f"filter_taps must be odd and positive, got {self.filter_taps}")
        if not 0 < self.cutoff_fraction <= 0.5:
            raise ValueError(f"cutoff_fraction must be in (0, 0.5], got {self.cutoff_fraction}")
        if self.source_rate <= 0 or self.target_rate <= 0:
            raise UnsupportedRate("rates must be positive")


@lru_cache(maxsize=32)
def design_filter(up: int, down: int, taps: int = DEFAULT_TAPS,
                  cutoff_fraction: float = DEFAULT_CUTOFF,
                  beta: float = DEFAULT_BETA) -> np.ndarray:
    """Prototype low-pass at ``up`` x the input rate.

    Each of the ``up`` polyphase branches is normalized to unit DC gain, so a
    constant input stays exactly constant away from the edges.
    """
    half = int(round((taps - 1) / 2 * max(up, down) / 2))
    n = np.arange(-half, half + 1, dtype=np.float64)
    fc = cutoff_fraction / max(up, down)  # cycles per sample at the upsampled rate
    h = 2 * fc * np.sinc(2 * fc * n) * np.kaiser(2 * half + 1, beta)
    for p in range(up):
        h[p::up] /= h[p::up].sum()
    h.setflags(write=False)
    return h


def output_length(n: int, up: int, down: int) -> int:
    # round half up, exact in integers
    return (2 * n * up + down) // (2 * down)


def resample_array(x: np.ndarray, up: int, down: int, taps: int = DEFAULT_TAPS,
                   cutoff_fraction: float = DEFAULT_CUTOFF,
                   beta: float = DEFAULT_BETA) -> np.ndarray:
    """Resample a 1-D float array by ``up/down``; output sample t sits at input time t*down/up."""
    x = np.asarray(x, dtype=np.float64)
    g = Fraction(up, down)
    up, down = g.numerator, g.denominator
    n_out = output_length(x.size, up, down)
    if up == down:
        return x.copy()
    h = design_filter(up, down, taps, cutoff_fraction, beta)
    half = (h.size - 1) // 2
    # y[t] = sum_k x[k] h[half + t*down - k*up]; k ranges over input samples
    # whose filter position falls inside the prototype support
    kspan = (2 * half) // up + 2
    xp = np.concatenate([np.zeros(kspan), x, np.zeros(kspan)])
    out = np.empty(n_out, dtype=np.float64)
    offs = np.arange(kspan)
    for start in range(0, n_out, _CHUNK):
        t = np.arange(start, min(n_out, start + _CHUNK))
        pos = t * down + half  # position of input sample 0 relative to h index
        k0 = -((-(pos - 2 * half)) // up)  # ceil((pos - 2*half) / up)
        k = k0[:, None] + offs[None, :]
        hidx = pos[:, None] - k * up
        valid = (hidx >= 0) & (hidx <= 2 * half)
        hidx = np.where(valid, hidx, 0)
        coef = np.where(valid, h[hidx], 0.0)
        out[start:start + t.size] = np.einsum("ij,ij->i", coef, xp[k + kspan])
    return out


def _check_rate(rate: int):
    if rate not in SUPPORTED_RATES:
        raise UnsupportedRate(f"{rate} Hz is not supported; use one of {SUPPORTED_RATES}")


def resample(clip: AudioClip, target_rate: int, spec: ResampleSpec | None = None) -> AudioClip:
    """Convert a mono clip between 8 kHz and 16 kHz."""
    _check_rate(clip.sample_rate)
    _check_rate(target_rate)
    if clip.channels != 1:
        raise UnsupportedChannelCount("resample expects a mono clip")
    if target_rate == clip.sample_rate:
        return clip
    spec = spec or ResampleSpec(clip.sample_rate, target_rate)
    y = resample_array(clip.samples, target_rate, clip.sample_rate,
                       spec.filter_taps, spec.cutoff_fraction, spec.kaiser_beta)
    out, _clipped = saturate16(y)
    return AudioClip(out, target_rate, 1)
