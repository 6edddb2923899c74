"""PCM data model, RIFF/WAVE parsing and writing, and elementary transforms."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (
    InconsistentHeader,
    MalformedRiff,
    UnsupportedChannelCount,
    UnsupportedFormat,
    TruncatedBlock,
)

INT16_MIN = -32768
INT16_MAX = 32767

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_GSM610 = 0x0031

GSM_BLOCK_ALIGN = 65
GSM_SAMPLES_PER_BLOCK = 320


def round_half_away(x):
    """Round to nearest integer, ties away from zero (works on arrays and scalars)."""
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def saturate16(x):
    """Round half away from zero and clamp to int16.

    Returns ``(int16 array, number of clamped samples)``.
    """
    r = round_half_away(x)
    clipped = int(np.count_nonzero((r > INT16_MAX) | (r < INT16_MIN)))
    return np.clip(r, INT16_MIN, INT16_MAX).astype(np.int16), clipped


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Interleaved signed 16-bit PCM samples with rate and channel count.

    The sample buffer is copied into a read-only ``int16`` array on
    construction, so clips can be shared freely between threads.
    """

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self):
        raw = np.asarray(self.samples)
        if raw.dtype != np.int16:
            if raw.size and (raw.min() < INT16_MIN or raw.max() > INT16_MAX):
                raise ValueError("sample values outside the 16-bit range")
            if raw.size and not np.issubdtype(raw.dtype, np.integer):
                if not np.all(np.equal(np.mod(raw, 1), 0)):
                    raise ValueError("samples must be integral")
        arr = np.array(raw, dtype=np.int16).reshape(-1)
        arr.flags.writeable = False
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if int(self.channels) <= 0:
            raise ValueError(f"channels must be positive, got {self.channels}")
        if arr.size % int(self.channels):
            raise ValueError("sample count is not a multiple of the channel count")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "channels", int(self.channels))

    @property
    def frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def duration_seconds(self) -> float:
        return self.frames / self.sample_rate

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.channels == other.channels
            and np.array_equal(self.samples, other.samples)
        )

    def __hash__(self):
        return hash((self.sample_rate, self.channels, self.samples.tobytes()))

    def replace(self, samples, sample_rate: Optional[int] = None) -> "AudioClip":
        return AudioClip(
            samples,
            self.sample_rate if sample_rate is None else sample_rate,
            self.channels,
        )


@dataclass(frozen=True)
class WavMetadata:
    format_tag: int
    channels: int
    sample_rate: int
    bits_per_sample: int
    block_align: int
    data_bytes: int
    fact_samples: Optional[int] = None
    samples_per_block: Optional[int] = None
    trailing_chunks: int = 0
    chunks: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class Wav49Payload:
    """Raw GSM 6.10 block payload extracted from a WAV49 file."""

    data: bytes
    sample_rate: int
    fact_samples: int

    @property
    def blocks(self) -> int:
        return len(self.data) // GSM_BLOCK_ALIGN


def _iter_chunks(buf: bytes):
    if len(buf) < 12:
        raise MalformedRiff(f"file too short for a RIFF header ({len(buf)} bytes)")
    if buf[0:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise MalformedRiff("missing RIFF/WAVE magic")
    pos = 12
    end = len(buf)
    while pos < end:
        if end - pos < 8:
            # a lone pad byte or garbage shorter than a chunk header
            if end - pos == 1:
                break
            raise MalformedRiff(f"truncated chunk header at offset {pos}")
        cid = buf[pos:pos + 4]
        (size,) = struct.unpack_from("<I", buf, pos + 4)
        body = pos + 8
        yield cid, body, size
        pos = body + size + (size & 1)


def parse_wav(buf: bytes) -> tuple[Union[AudioClip, Wav49Payload], WavMetadata]:
    """Parse a RIFF/WAVE byte string.

    Linear PCM files yield an :class:`AudioClip`; GSM 6.10 files yield the raw
    :class:`Wav49Payload` for the codec module to decode.
    """
    buf = bytes(buf)
    fmt = None
    fact = None
    data_span = None
    seen = []
    after_data = 0
    for cid, body, size in _iter_chunks(buf):
        seen.append(cid.decode("latin-1"))
        if data_span is not None:
            after_data += 1
            if body + size > len(buf):
                # never read past the input; a truncated trailing chunk is harmless
                break
            continue
        if cid == b"data":
            if body + size > len(buf):
                raise InconsistentHeader(
                    f"data chunk claims {size} bytes but only {len(buf) - body} remain"
                )
            data_span = (body, size)
            continue
        if body + size > len(buf):
            raise MalformedRiff(f"chunk {cid!r} runs past end of file")
        if cid == b"fmt ":
            if size < 16:
                raise MalformedRiff(f"fmt chunk too short ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", buf, body)
            extra = buf[body + 16: body + size]
            fmt = fmt + (extra,)
        elif cid == b"fact":
            if size < 4:
                raise MalformedRiff("fact chunk too short")
            (fact,) = struct.unpack_from("<I", buf, body)
    if fmt is None:
        raise MalformedRiff("no fmt chunk")
    if data_span is None:
        raise MalformedRiff("no data chunk")

    tag, channels, rate, _byte_rate, block_align, bits, extra = fmt
    if channels < 1 or rate < 1:
        raise InconsistentHeader(f"invalid channels={channels} rate={rate}")
    start, nbytes = data_span
    payload = buf[start:start + nbytes]

    if tag == WAVE_FORMAT_PCM:
        if bits != 16:
            raise UnsupportedFormat(f"only 16-bit PCM is supported, got {bits}-bit")
        if block_align != channels * 2:
            raise InconsistentHeader(
                f"block_align {block_align} != channels*2 = {channels * 2}"
            )
        if nbytes % block_align:
            raise InconsistentHeader(
                f"data size {nbytes} is not a multiple of block_align {block_align}"
            )
        meta = WavMetadata(tag, channels, rate, bits, block_align, nbytes, fact,
                           None, after_data, tuple(seen))
        samples = np.frombuffer(payload, dtype="<i2")
        return AudioClip(samples, rate, channels), meta

    if tag == WAVE_FORMAT_GSM610:
        if channels != 1:
            raise UnsupportedFormat("GSM 6.10 WAV files must be mono")
        if block_align != GSM_BLOCK_ALIGN:
            raise InconsistentHeader(f"GSM block_align must be 65, got {block_align}")
        spb = struct.unpack_from("<H", extra, 2)[0] if len(extra) >= 4 else None
        if spb is not None and spb != GSM_SAMPLES_PER_BLOCK:
            raise InconsistentHeader(f"samples per block must be 320, got {spb}")
        if fact is None:
            raise InconsistentHeader("GSM 6.10 WAV file has no fact chunk")
        if nbytes % GSM_BLOCK_ALIGN:
            raise TruncatedBlock(
                f"GSM payload of {nbytes} bytes is not a whole number of blocks"
            )
        if fact > (nbytes // GSM_BLOCK_ALIGN) * GSM_SAMPLES_PER_BLOCK:
            raise InconsistentHeader(
                f"fact chunk claims {fact} samples but payload holds fewer"
            )
        meta = WavMetadata(tag, channels, rate, bits, block_align, nbytes, fact,
                           spb, after_data, tuple(seen))
        return Wav49Payload(payload, rate, fact), meta

    raise UnsupportedFormat(f"format tag 0x{tag:04x} is not supported")


def write_wav(clip: AudioClip) -> bytes:
    """Serialize a clip as a canonical 44-byte-header PCM WAVE file."""
    data = clip.samples.astype("<i2").tobytes()
    block_align = clip.channels * 2
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16, WAVE_FORMAT_PCM, clip.channels, clip.sample_rate,
        clip.sample_rate * block_align, block_align, 16,
        b"data", len(data),
    )
    return header + data


def read_wav(path) -> tuple[Union[AudioClip, Wav49Payload], WavMetadata]:
    return parse_wav(Path(path).read_bytes())


def load_clip(path) -> AudioClip:
    """Read a WAV file as PCM, decoding WAV49 payloads transparently."""
    obj, _meta = read_wav(path)
    if isinstance(obj, Wav49Payload):
        from .gsm import wav49_decode_payload

        return wav49_decode_payload(obj)
    return obj


def downmix_to_mono(clip: AudioClip) -> AudioClip:
    """Average left and right channels, rounding ties away from zero."""
    if clip.channels == 1:
        return clip
    if clip.channels != 2:
        raise UnsupportedChannelCount(f"cannot downmix {clip.channels} channels")
    frames = clip.samples.reshape(-1, 2).astype(np.int32)
    s = frames[:, 0] + frames[:, 1]
    out = np.where(s % 2 == 0, s // 2, (s + np.sign(s)) // 2)
    return AudioClip(out.astype(np.int16), clip.sample_rate, 1)


def apply_gain(clip: AudioClip, factor: float) -> tuple[AudioClip, int]:
    if not factor > 0:
        raise ValueError(f"gain factor must be positive, got {factor}")
    out, clipped = saturate16(clip.samples.astype(np.float64) * float(factor))
    return clip.replace(out), clipped
