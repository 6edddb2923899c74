import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from mtrprep.audio import AudioClip
from mtrprep.augment import (
    Rng,
    draw_factor,
    mix_noise,
    perturb_speed,
    perturb_volume,
    signal_energy,
    splitmix64,
)
from mtrprep.errors import EmptyClip, InvalidFactor, RateMismatch, SilentNoise, SilentSignal


def noise_clip(n, seed, scale=3000.0, rate=16000):
    rng = np.random.default_rng(seed)
    return AudioClip(np.round(rng.standard_normal(n) * scale).astype(np.int16), rate)


def test_splitmix64_reference_values():
    # first outputs of the reference generator seeded with 0
    state = 0
    outs = []
    for _ in range(3):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & (2 ** 64 - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_energy_examples():
    assert signal_energy(AudioClip([0, 0, 0], 8000)) == 0
    assert signal_energy(AudioClip([16384, -16384] * 5, 8000)) == 0.25
    c = noise_clip(5000, 1)
    oracle = math.fsum((int(v) / 32768) ** 2 for v in c.samples) / c.samples.size
    assert signal_energy(c) == pytest.approx(oracle, rel=1e-12)
    with pytest.raises(EmptyClip):
        signal_energy(AudioClip([], 8000))


def test_alpha_closed_forms():
    s = noise_clip(4000, 2)
    m0 = mix_noise(s, s, 0.0, Rng(0), offset=0)
    assert m0.scale == pytest.approx(1.0)
    m10 = mix_noise(s, s, 10.0, Rng(0), offset=0)
    assert m10.scale == pytest.approx(10 ** -0.5, rel=1e-12)
    assert m10.scale == pytest.approx(0.316228, abs=1e-6)


@pytest.mark.parametrize("snr", [5, 10, 15, 20])
def test_measured_snr(snr):
    s = noise_clip(8000, 3, 2000)
    n = noise_clip(3000, 4, 500)
    m = mix_noise(s, n, snr, Rng(snr))
    assert abs(m.measured_snr_db - snr) <= 0.1
    # independent check from the written samples
    diff = m.clip.samples.astype(float) - s.samples.astype(float)
    est = 10 * math.log10(np.sum(s.samples.astype(float) ** 2) / np.sum(diff ** 2))
    assert abs(est - snr) <= 0.1


def test_noise_looped_from_offset():
    s = noise_clip(1000, 5)
    n = AudioClip(np.arange(1, 301, dtype=np.int16), 16000)
    m = mix_noise(s, n, 0.0, Rng(1), offset=250)
    idx = (250 + np.arange(1000)) % 300
    want = np.round(s.samples + m.scale * n.samples[idx])
    np.testing.assert_array_equal(m.clip.samples, np.clip(want, -32768, 32767))


def test_huge_snr_is_near_identity():
    s = noise_clip(2000, 6)
    m = mix_noise(s, noise_clip(500, 7), 100.0, Rng(2))
    assert np.max(np.abs(m.clip.samples.astype(int) - s.samples.astype(int))) <= 1


def test_mix_errors():
    s = noise_clip(100, 8)
    with pytest.raises(SilentSignal):
        mix_noise(AudioClip(np.zeros(100, np.int16), 16000), s, 10, Rng(0))
    with pytest.raises(SilentNoise):
        mix_noise(s, AudioClip(np.zeros(100, np.int16), 16000), 10, Rng(0))
    with pytest.raises(RateMismatch):
        mix_noise(s, noise_clip(100, 9, rate=8000), 10, Rng(0))


def test_mix_clipping_counted():
    s = AudioClip(np.full(100, 30000, np.int16), 16000)
    n = AudioClip(np.full(50, 30000, np.int16), 16000)
    m = mix_noise(s, n, 0.0, Rng(0))
    assert m.clipped == 100 and np.all(m.clip.samples == 32767)


def test_mix_deterministic_across_threads():
    s = noise_clip(3000, 10)
    n = noise_clip(5000, 11)

    def job(uid):
        return mix_noise(s, n, 15, Rng.for_utterance(99, uid, "noise")).clip.samples.tobytes()

    ids = [f"utt{i}" for i in range(32)]
    serial = [job(u) for u in ids]
    with ThreadPoolExecutor(8) as pool:
        parallel = list(pool.map(job, ids))
    assert serial == parallel


def test_rng_streams():
    a = Rng.for_utterance(1, "u1", "speed")
    b = Rng.for_utterance(1, "u1", "speed")
    assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
    c = Rng.for_utterance(1, "u1", "volume")
    d = Rng.for_utterance(2, "u1", "speed")
    x = Rng.for_utterance(1, "u1", "speed").random()
    assert c.random() != x and d.random() != x


def test_direction_balance():
    ups = sum(Rng.for_utterance(7, f"utt{i}", "speed").direction() > 0 for i in range(10000))
    assert 0.48 <= ups / 10000 <= 0.52


def test_draw_factor_values():
    vals = {draw_factor(Rng(i), 0.1) for i in range(50)}
    assert vals == {0.9, 1.1}
    with pytest.raises(InvalidFactor):
        draw_factor(Rng(0), 0)


@pytest.mark.parametrize("factor,length", [(1.1, 14545), (0.9, 17778)])
def test_speed_length(factor, length):
    out = perturb_speed(noise_clip(16000, 12), factor)
    assert abs(out.samples.size - length) <= 2 and out.sample_rate == 16000


def test_speed_length_law_many_lengths():
    for n in (127, 500, 1001, 4096, 9999):
        for f in (0.9, 1.1):
            out = perturb_speed(noise_clip(n, n), f)
            assert abs(out.samples.size - round(n / f)) <= 2


def test_speed_identity_and_errors():
    c = noise_clip(100, 13)
    assert perturb_speed(c, 1.0) is c
    with pytest.raises(InvalidFactor):
        perturb_speed(c, 0)
    with pytest.raises(InvalidFactor):
        perturb_speed(c)


def test_speed_shifts_pitch():
    t = np.arange(16000) / 16000
    c = AudioClip(np.round(8000 * np.sin(2 * np.pi * 1000 * t)).astype(np.int16), 16000)
    out = perturb_speed(c, 1.1).samples.astype(float)
    f = np.fft.rfftfreq(out.size, 1 / 16000)[np.argmax(np.abs(np.fft.rfft(out)))]
    assert f == pytest.approx(1100, abs=5)


def test_volume_examples():
    out, n = perturb_volume(AudioClip([1000, -2000], 8000), 1.2)
    assert list(out.samples) == [1200, -2400] and n == 0
    out, n = perturb_volume(AudioClip([1000], 8000), 0.8)
    assert list(out.samples) == [800]
    with pytest.raises(InvalidFactor):
        perturb_volume(AudioClip([1], 8000), -1.0)


def test_speed_volume_order_differs_by_rounding_only():
    c = noise_clip(4000, 14, 2000)
    a, _ = perturb_volume(perturb_speed(c, 1.1), 1.2)
    b = perturb_speed(perturb_volume(c, 1.2)[0], 1.1)
    assert np.max(np.abs(a.samples.astype(int) - b.samples.astype(int))) <= 1
