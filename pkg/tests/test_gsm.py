import importlib.util
import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtrprep import gsm
from mtrprep.audio import AudioClip, Wav49Payload, parse_wav
from mtrprep.augment import signal_energy
from mtrprep.errors import BadSignature, TruncatedBlock, UnsupportedInput
from mtrprep.gsm import frame as gframe
from mtrprep.gsm.tables import FRAME_FIELD_BITS
from mtrprep.toy import synth_speech

from conftest import tone

HAVE_EXT = importlib.util.find_spec("mtrprep.gsm._gsm_ext") is not None

sf = pytest.importorskip("soundfile")
LIMITS = np.array([1 << w for w in FRAME_FIELD_BITS])
# offsets of Nc within each subframe
NC_COLUMNS = [8 + 17 * k for k in range(4)]


def corr(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return float(np.corrcoef(a, b)[0, 1])


def test_table_widths_total_260_bits():
    assert sum(FRAME_FIELD_BITS) == 260
    assert len(FRAME_FIELD_BITS) == 76


def test_silence_round_trip():
    enc, dec = gsm.CodecState(), gsm.CodecState()
    frame = gsm.encode_frame(enc, np.zeros(160, np.int16))
    assert len(frame) == 33 and frame[0] >> 4 == 0xD
    out = gsm.decode_frame(dec, frame)
    # mean-square energy relative to full scale, as signal_energy defines it
    assert signal_energy(AudioClip(out, 8000)) < 1e-6


def test_bad_signature():
    frame = bytearray(gsm.encode_frame(gsm.CodecState(), np.zeros(160, np.int16)))
    frame[0] = (frame[0] & 0x0F) | 0xA0
    with pytest.raises(BadSignature):
        gsm.decode_frame(gsm.CodecState(), bytes(frame))


def test_frame_length_checked():
    with pytest.raises(ValueError):
        gsm.encode_frame(gsm.CodecState(), np.zeros(159, np.int16))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 2 ** 20), min_size=76, max_size=76))
def test_frame_pack_round_trip(raw):
    params = [v % int(lim) for v, lim in zip(raw, LIMITS)]
    packed = gframe.pack_frame(params)
    assert len(packed) == 33 and packed[0] >> 4 == 0xD
    assert list(gframe.unpack_frame(packed)) == params


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 2 ** 20), min_size=152, max_size=152))
def test_block_pack_round_trip(raw):
    params = np.array([v % int(lim) for v, lim in zip(raw, np.tile(LIMITS, 2))]).reshape(2, 76)
    block = gframe.pack_blocks(params)
    assert len(block) == 65
    np.testing.assert_array_equal(gframe.unpack_blocks(block), params)


def test_pack_rejects_out_of_range():
    params = [0] * 76
    params[0] = 64
    with pytest.raises(ValueError):
        gframe.pack_frame(params)


def _fuzz_frames(n, seed):
    rng = np.random.default_rng(seed)
    parts = [
        rng.integers(-32768, 32768, (n // 4) * 160),
        np.round(rng.standard_normal((n // 4) * 160) * 3000),
        np.repeat(rng.choice([-32768, 32767], (n // 4) * 4), 40),
    ]
    speech = synth_speech(n * 160 / 8000, 8000, seed=seed).samples
    parts.append(speech[: (n - 3 * (n // 4)) * 160])
    return np.clip(np.concatenate(parts), -32768, 32767).astype(np.int16)


def test_field_ranges_and_lag_range():
    pcm = _fuzz_frames(10000, 7)
    params = gsm.encode_params(gsm.CodecState(), pcm)
    assert params.shape == (pcm.size // 160, 76)
    assert np.all(params >= 0) and np.all(params < LIMITS)
    lags = params[:, NC_COLUMNS]
    assert lags.min() >= 40 and lags.max() <= 120


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 2 ** 30), min_size=76, max_size=76 * 3))
def test_decoder_accepts_any_valid_params(raw):
    raw = raw[: len(raw) - len(raw) % 76]
    params = np.array([v % int(lim) for v, lim in zip(raw, np.tile(LIMITS, 3))]).reshape(-1, 76)
    out = gsm.decode_params(gsm.get_backend("python").CodecState(), params, backend="python")
    assert out.dtype == np.int16 and out.size == params.shape[0] * 160


@pytest.mark.skipif(not HAVE_EXT, reason="compiled kernel not built")
def test_backends_agree(speech8k):
    pcm = np.concatenate([_fuzz_frames(40, 11), speech8k[0].samples[:160 * 40]])
    p_py = gsm.encode_params(gsm.get_backend("python").CodecState(), pcm, "python")
    p_cy = gsm.encode_params(gsm.get_backend("cython").CodecState(), pcm, "cython")
    np.testing.assert_array_equal(p_py, p_cy)
    d_py = gsm.decode_params(gsm.get_backend("python").CodecState(), p_py, "python")
    d_cy = gsm.decode_params(gsm.get_backend("cython").CodecState(), p_py, "cython")
    np.testing.assert_array_equal(d_py, d_cy)


def test_streaming_equals_whole_clip(speech8k):
    pcm = speech8k[1].samples[:160 * 30]
    whole = gsm.encode_params(gsm.CodecState(), pcm)
    st_enc = gsm.CodecState()
    frames = [gsm.encode_frame(st_enc, pcm[i:i + 160]) for i in range(0, pcm.size, 160)]
    assert [gframe.unpack_frame(f) for f in frames] == [list(r) for r in whole]
    st_dec = gsm.CodecState()
    per_frame = np.concatenate([gsm.decode_frame(st_dec, f) for f in frames])
    np.testing.assert_array_equal(per_frame, gsm.decode_params(gsm.CodecState(), whole))


@pytest.mark.parametrize("n,blocks", [(0, 0), (321, 2), (8000, 25)])
def test_wav49_sizes(n, blocks):
    buf = gsm.wav49_encode(AudioClip(np.zeros(n, np.int16), 8000))
    payload, meta = parse_wav(buf)
    assert isinstance(payload, Wav49Payload)
    assert payload.blocks == blocks and len(payload.data) == 65 * blocks
    assert meta.fact_samples == n and meta.block_align == 65 and meta.samples_per_block == 320
    assert meta.format_tag == 0x31
    assert gsm.wav49_decode(buf).samples.size == n


def test_one_second_ratio():
    buf = gsm.wav49_encode(AudioClip(np.zeros(8000, np.int16), 8000))
    payload, meta = parse_wav(buf)
    assert len(payload.data) == 1625
    assert 16000 / 1625 == pytest.approx(9.846, abs=1e-3)
    assert abs(16000 / 1625 - 10) / 10 < 0.02
    byte_rate = struct.unpack_from("<I", buf, 28)[0]
    assert byte_rate == 1625


def test_unsupported_input():
    with pytest.raises(UnsupportedInput):
        gsm.wav49_encode(AudioClip(np.zeros(100, np.int16), 16000))
    with pytest.raises(UnsupportedInput):
        gsm.wav49_encode(AudioClip(np.zeros(100, np.int16), 8000, channels=2))


def test_truncated_payload():
    buf = bytearray(gsm.wav49_encode(AudioClip(np.zeros(640, np.int16), 8000)))
    # shrink the data chunk by one byte so its length is no longer a multiple of 65
    pos = buf.index(b"data")
    size = struct.unpack_from("<I", buf, pos + 4)[0]
    struct.pack_into("<I", buf, pos + 4, size - 1)
    with pytest.raises(TruncatedBlock):
        gsm.wav49_decode(bytes(buf[: pos + 8 + size - 1]))
    with pytest.raises(TruncatedBlock):
        gframe.unpack_block(b"\x00" * 64)


def test_lossy_and_length_preserved(speech8k):
    clip = speech8k[2]
    out = gsm.wav49_decode(gsm.wav49_encode(clip))
    assert out.samples.size == clip.samples.size
    assert np.max(np.abs(out.samples.astype(int) - clip.samples.astype(int))) > 0


def test_double_encode_stable(speech8k):
    clip = speech8k[3]
    once = gsm.wav49_decode(gsm.wav49_encode(clip))
    twice = gsm.wav49_decode(gsm.wav49_encode(once))
    assert corr(once.samples, twice.samples) >= 0.9


def test_tone_round_trip():
    clip = tone(1000, 8000, 8000, -12.0)
    out = gsm.wav49_decode(gsm.wav49_encode(clip))
    assert corr(clip.samples[800:], out.samples[800:]) >= 0.8


def _sf_encode(clip):
    bio = io.BytesIO()
    sf.write(bio, clip.samples, 8000, format="WAV", subtype="GSM610")
    return bio.getvalue()


def _sf_decode(buf):
    data, rate = sf.read(io.BytesIO(buf), dtype="int16")
    assert rate == 8000
    return data


def test_reference_decodes_our_files(speech8k):
    for clip in speech8k[:3]:
        ours = gsm.wav49_encode(clip)
        ref = _sf_decode(ours)[: clip.samples.size]
        mine = gsm.wav49_decode(ours).samples
        np.testing.assert_array_equal(ref, mine)


def test_we_decode_reference_files(speech8k):
    for clip in speech8k[:3]:
        ref_file = _sf_encode(clip)
        ref_pcm = _sf_decode(ref_file)
        payload, _ = parse_wav(ref_file)
        mine = gsm.wav49_decode_payload(payload).samples
        n = min(mine.size, ref_pcm.size)
        assert n >= clip.samples.size
        np.testing.assert_array_equal(mine[:n], ref_pcm[:n])


def test_payload_bit_exact_with_reference(speech8k):
    clip = speech8k[4]
    ours, _ = parse_wav(gsm.wav49_encode(clip))
    ref, _ = parse_wav(_sf_encode(clip))
    assert ours.data == ref.data
