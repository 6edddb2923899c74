import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtrprep.audio import AudioClip
from mtrprep.errors import UnsupportedChannelCount, UnsupportedRate
from mtrprep.resample import ResampleSpec, design_filter, output_length, resample, resample_array

from conftest import tone


def peak_db(x, rate, freq):
    x = np.asarray(x, np.float64)
    w = np.hanning(x.size)
    spec = np.abs(np.fft.rfft(x * w)) / w.sum() * 2
    k = int(round(freq * x.size / rate))
    return 20 * np.log10(spec[k - 2:k + 3].max())


def band_energy_db(x, rate, lo):
    spec = np.abs(np.fft.rfft(np.asarray(x, np.float64))) ** 2
    f = np.fft.rfftfreq(len(x), 1 / rate)
    return 10 * np.log10(spec[f > lo].sum() / spec.sum())


def test_identity_same_rate():
    c = tone(1000, 8000, 800)
    assert resample(c, 8000) is c


def test_length_16k_to_8k():
    c = AudioClip(np.zeros(16000, np.int16), 16000)
    out = resample(c, 8000)
    assert out.samples.size == 8000 and out.sample_rate == 8000


def test_3khz_tone_preserved():
    c = tone(3000, 16000, 16000)
    out = resample(c, 8000)
    assert abs(peak_db(out.samples, 8000, 3000) - peak_db(c.samples, 16000, 3000)) < 1.0


def test_7khz_tone_removed():
    c = tone(7000, 16000, 16000)
    out = resample(c, 8000)
    e_in = np.mean(c.samples.astype(float) ** 2)
    e_out = np.mean(out.samples.astype(float) ** 2)
    assert 10 * np.log10(e_out / e_in) <= -40


def test_round_trip_no_high_band():
    rng = np.random.default_rng(5)
    c = AudioClip(np.round(rng.standard_normal(32000) * 4000).astype(np.int16), 16000)
    back = resample(resample(c, 8000), 16000)
    assert back.samples.size == c.samples.size
    assert band_energy_db(back.samples, 16000, 4000) <= -40


@pytest.mark.parametrize("src,dst", [(16000, 8000), (8000, 16000)])
def test_dc_held_away_from_edges(src, dst):
    c = AudioClip(np.full(4000, 1000, np.int16), src)
    out = resample(c, dst).samples.astype(int)
    up, down = (1, 2) if dst < src else (2, 1)
    half = len(design_filter(up, down)) // 2
    edge = half // down + 2  # filter half-length in output samples
    assert np.all(np.abs(out[edge:-edge] - 1000) <= 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(127, 5000), st.sampled_from([(16000, 8000), (8000, 16000)]))
def test_output_length_law(n, rates):
    src, dst = rates
    out = resample(AudioClip(np.ones(n, np.int16), src), dst)
    assert out.samples.size == int(np.floor(n * dst / src + 0.5))


def test_output_length_rounding():
    assert output_length(16000, 10, 11) == 14545
    assert output_length(16000, 10, 9) == 17778
    assert output_length(3, 1, 2) == 2


def test_rates_and_channels_checked():
    with pytest.raises(UnsupportedRate):
        resample(AudioClip([0] * 10, 44100), 8000)
    with pytest.raises(UnsupportedRate):
        resample(AudioClip([0] * 10, 8000), 22050)
    with pytest.raises(UnsupportedChannelCount):
        resample(AudioClip([0] * 10, 8000, 2), 16000)
    with pytest.raises(ValueError):
        ResampleSpec(8000, 16000, filter_taps=128)


def test_filter_dc_gain():
    for up, down in [(1, 2), (2, 1), (10, 11)]:
        assert design_filter(up, down).sum() == pytest.approx(up)


def test_array_matches_direct_convolution():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(300)
    up, down = 2, 1
    h = design_filter(up, down)
    half = (h.size - 1) // 2
    stuffed = np.zeros(x.size * up)
    stuffed[::up] = x
    full = np.convolve(stuffed, h)
    want = full[half::down][: output_length(x.size, up, down)]
    np.testing.assert_allclose(resample_array(x, up, down), want, atol=1e-9)
