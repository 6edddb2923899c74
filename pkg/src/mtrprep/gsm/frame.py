"""Bit packing for standalone 33-byte GSM frames and 65-byte WAV49 blocks.

A standalone frame is the 0xD signature nibble followed by the 260 parameter
bits, most significant bit first.  A WAV49 block carries two frames as one
520-bit little-endian bit stream with no signature: every field is written
least significant bit first, starting from bit 0 of byte 0, and the second
frame begins in the upper nibble of byte 32.
"""

import numpy as np

from ..errors import BadSignature, TruncatedBlock
from .tables import FRAME_FIELD_BITS

GSM_MAGIC = 0xD
FRAME_BYTES = 33
BLOCK_BYTES = 65

_WIDTHS = FRAME_FIELD_BITS
_LIMITS = tuple(1 << w for w in _WIDTHS)


def check_params(params):
    if len(params) != len(_WIDTHS):
        raise ValueError(f"expected {len(_WIDTHS)} parameters, got {len(params)}")
    for i, (v, lim) in enumerate(zip(params, _LIMITS)):
        if not 0 <= v < lim:
            raise ValueError(f"parameter {i} = {v} does not fit in {_WIDTHS[i]} bits")


def pack_frame(params) -> bytes:
    params = [int(v) for v in params]
    check_params(params)
    acc = GSM_MAGIC
    for v, w in zip(params, _WIDTHS):
        acc = (acc << w) | v
    return acc.to_bytes(FRAME_BYTES, "big")


def unpack_frame(frame: bytes) -> list:
    if len(frame) != FRAME_BYTES:
        raise ValueError(f"GSM frame must be 33 bytes, got {len(frame)}")
    if frame[0] >> 4 != GSM_MAGIC:
        raise BadSignature(f"frame signature nibble is 0x{frame[0] >> 4:x}, expected 0xd")
    acc = int.from_bytes(frame, "big")
    shift = 260
    out = []
    for w in _WIDTHS:
        shift -= w
        out.append((acc >> shift) & ((1 << w) - 1))
    return out


def _pack_lsb(fields_list):
    acc = 0
    shift = 0
    for params in fields_list:
        for v, w in zip(params, _WIDTHS):
            acc |= int(v) << shift
            shift += w
    return acc


def pack_block(first, second) -> bytes:
    first = [int(v) for v in first]
    second = [int(v) for v in second]
    check_params(first)
    check_params(second)
    return _pack_lsb((first, second)).to_bytes(BLOCK_BYTES, "little")


def unpack_block(block: bytes):
    if len(block) != BLOCK_BYTES:
        raise TruncatedBlock(f"WAV49 block must be 65 bytes, got {len(block)}")
    acc = int.from_bytes(block, "little")
    frames = []
    for _ in range(2):
        params = []
        for w in _WIDTHS:
            params.append(acc & ((1 << w) - 1))
            acc >>= w
        frames.append(params)
    return frames


def pack_blocks(params: np.ndarray) -> bytes:
    """Pack an (2n, 76) parameter array into n WAV49 blocks."""
    params = np.asarray(params)
    if params.shape[0] % 2:
        raise ValueError("WAV49 blocks need an even number of frames")
    return b"".join(
        pack_block(params[i], params[i + 1]) for i in range(0, params.shape[0], 2)
    )


def unpack_blocks(payload: bytes) -> np.ndarray:
    if len(payload) % BLOCK_BYTES:
        raise TruncatedBlock(
            f"payload of {len(payload)} bytes is not a multiple of {BLOCK_BYTES}"
        )
    rows = []
    for off in range(0, len(payload), BLOCK_BYTES):
        rows.extend(unpack_block(payload[off:off + BLOCK_BYTES]))
    return np.array(rows, dtype=np.int16).reshape(-1, len(_WIDTHS))
