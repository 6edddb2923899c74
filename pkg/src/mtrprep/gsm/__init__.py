"""GSM 06.10 full-rate codec and the WAV49 container.

The codec kernel comes from the compiled ``_gsm_ext`` module when it has been
built, and from the pure-Python ``_gsm_py`` module otherwise.  Set
``MTRPREP_PURE_PYTHON=1`` to force the fallback.
"""

import os
import struct

import numpy as np

from ..audio import (
    GSM_BLOCK_ALIGN,
    GSM_SAMPLES_PER_BLOCK,
    WAVE_FORMAT_GSM610,
    AudioClip,
    Wav49Payload,
    parse_wav,
)
from ..errors import UnsupportedFormat, UnsupportedInput
from . import _gsm_py
from .frame import (
    FRAME_BYTES,
    pack_blocks,
    pack_frame,
    unpack_blocks,
    unpack_frame,
)
from .tables import FRAME_FIELD_BITS

FRAME_SAMPLES = 160
GSM_RATE = 8000

_backend = _gsm_py
BACKEND = "python"
if not os.environ.get("MTRPREP_PURE_PYTHON"):
    try:
        from . import _gsm_ext as _backend  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _backend = _gsm_py

_LIMITS = np.array([1 << w for w in FRAME_FIELD_BITS])


def get_backend(name=None):
    """Return the kernel module for ``name`` ("python", "cython") or the default."""
    if name is None:
        return _backend
    if name == "python":
        return _gsm_py
    if name == "cython":
        from . import _gsm_ext

        return _gsm_ext
    raise ValueError(f"unknown GSM backend {name!r}")


def CodecState():
    """Fresh all-zero codec history for one direction (encode or decode) of one stream."""
    return _backend.CodecState()


def _check_params(params):
    params = np.asarray(params)
    bad = (params < 0) | (params >= _LIMITS)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ValueError(f"frame {row}: parameter {col} = {params[row, col]} out of range")


def encode_params(state, samples, backend=None):
    """Encode whole 160-sample frames to an (n, 76) array of quantized parameters."""
    pcm = np.array(samples, dtype=np.int16)  # writable copy for the kernel
    if pcm.size % FRAME_SAMPLES:
        raise ValueError("sample count must be a multiple of 160")
    return get_backend(backend).encode_frames(state, pcm)


def decode_params(state, params, backend=None):
    prm = np.array(params, dtype=np.int16).reshape(-1, len(FRAME_FIELD_BITS))
    _check_params(prm)
    return get_backend(backend).decode_frames(state, prm).reshape(-1)


def encode_frame(state, frame) -> bytes:
    """Encode one 160-sample PCM frame into a 33-byte signed GSM frame."""
    pcm = np.array(frame, dtype=np.int16)
    if pcm.shape != (FRAME_SAMPLES,):
        raise ValueError(f"a PCM frame holds exactly 160 samples, got {pcm.size}")
    return pack_frame(_backend.encode_frames(state, pcm)[0])


def decode_frame(state, frame: bytes) -> np.ndarray:
    params = unpack_frame(bytes(frame))
    return _backend.decode_frames(state, np.array([params], dtype=np.int16))[0]


def _fmt_chunk() -> bytes:
    return struct.pack(
        "<HHIIHHHH",
        WAVE_FORMAT_GSM610, 1, GSM_RATE, GSM_RATE * GSM_BLOCK_ALIGN // GSM_SAMPLES_PER_BLOCK,
        GSM_BLOCK_ALIGN, 0, 2, GSM_SAMPLES_PER_BLOCK,
    )


def wav49_container(payload: bytes, nsamples: int) -> bytes:
    """Wrap block payload in a RIFF file with 20-byte fmt and fact chunks."""
    fmt = _fmt_chunk()
    pad = b"\x00" if len(payload) & 1 else b""
    body = (
        b"WAVE"
        + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"fact" + struct.pack("<II", 4, nsamples)
        + b"data" + struct.pack("<I", len(payload)) + payload + pad
    )
    return b"RIFF" + struct.pack("<I", len(body)) + body


def wav49_encode_samples(samples, backend=None) -> bytes:
    """Encode mono 8 kHz int16 samples to block payload (zero-padded to 320)."""
    pcm = np.asarray(samples, dtype=np.int16).reshape(-1)
    nblocks = -(-pcm.size // GSM_SAMPLES_PER_BLOCK)
    padded = np.zeros(nblocks * GSM_SAMPLES_PER_BLOCK, dtype=np.int16)
    padded[:pcm.size] = pcm
    if nblocks == 0:
        return b""
    params = encode_params(get_backend(backend).CodecState(), padded, backend)
    return pack_blocks(params)


def wav49_encode(clip: AudioClip, backend=None) -> bytes:
    """Encode an 8 kHz mono clip as a complete WAV49 (GSM 6.10 in WAVE) file."""
    if clip.channels != 1 or clip.sample_rate != GSM_RATE:
        raise UnsupportedInput(
            f"WAV49 needs 8 kHz mono input, got {clip.sample_rate} Hz x {clip.channels}"
        )
    return wav49_container(wav49_encode_samples(clip.samples, backend), clip.samples.size)


def wav49_decode_payload(payload: Wav49Payload, backend=None) -> AudioClip:
    params = unpack_blocks(payload.data)
    kernel = get_backend(backend)
    if params.shape[0]:
        pcm = decode_params(kernel.CodecState(), params, backend)
    else:
        pcm = np.zeros(0, dtype=np.int16)
    return AudioClip(pcm[:payload.fact_samples], payload.sample_rate, 1)


def wav49_decode(buf: bytes, backend=None) -> AudioClip:
    """Decode a WAV49 file to an 8 kHz mono clip truncated to the fact sample count."""
    obj, _meta = parse_wav(buf)
    if not isinstance(obj, Wav49Payload):
        raise UnsupportedFormat("not a GSM 6.10 WAVE file")
    return wav49_decode_payload(obj, backend)


__all__ = [
    "BACKEND", "CodecState", "FRAME_BYTES", "FRAME_SAMPLES", "decode_frame",
    "decode_params", "encode_frame", "encode_params", "get_backend",
    "wav49_decode", "wav49_decode_payload", "wav49_encode", "wav49_encode_samples",
]
