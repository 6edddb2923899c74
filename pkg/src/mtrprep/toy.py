"""Deterministic synthetic speech and noise for demos and tests.

The "speech" is a crude source-filter model: a jittered glottal pulse train
(or white noise for fricatives) shaped by three formant resonators whose
targets change every 60-120 ms, with pauses in between.  It has the spectral
tilt, voicing and energy fluctuation that matter to a waveform codec, which
pure tones do not.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav

# rough (F1, F2, F3) targets in Hz
_VOWELS = [(730, 1090, 2440), (270, 2290, 3010), (530, 1840, 2480),
           (570, 840, 2410), (300, 870, 2240), (660, 1720, 2410), (490, 1350, 1690)]
_WORDS = ("the cat sat on a mat while seven grey geese flew over quiet hills "
          "near old stone walls and bright water").split()


def _resonate(x: np.ndarray, freq: float, bw: float, rate: int) -> np.ndarray:
    r = np.exp(-np.pi * bw / rate)
    a1 = -2 * r * np.cos(2 * np.pi * freq / rate)
    a2 = r * r
    y = np.empty_like(x)
    y1 = y2 = 0.0
    g = 1 - r
    for i, v in enumerate(x):
        y0 = g * v - a1 * y1 - a2 * y2
        y[i] = y0
        y2, y1 = y1, y0
    return y


def synth_speech(duration_s: float, rate: int = 16000, seed: int = 0, level_dbfs: float = -20.0) -> AudioClip:
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate))
    out = np.zeros(n)
    a = np.exp(-2 * np.pi * 150 / rate)
    k = np.arange(int(8 / (1 - a)))
    glottal = (k + 1) * a ** k * (1 - a) ** 2
    f0 = rng.uniform(90, 220)
    pos = int(rng.uniform(0.02, 0.08) * rate)
    while pos < n:
        seg = int(rng.uniform(0.06, 0.12) * rate)
        seg = min(seg, n - pos)
        kind = rng.random()
        if kind < 0.12:
            pos += seg  # pause
            continue
        if kind < 0.3:
            src = rng.standard_normal(seg)
            level = 0.15  # fricatives sit well below vowels
            formants = [(rng.uniform(2500, min(6000, rate * 0.4)), 900)]
        else:
            pulses = np.zeros(seg)
            t = 0.0
            while t < seg:
                pulses[int(t)] = 1.0
                t += rate / (f0 * rng.uniform(0.97, 1.03))
            # glottal pulse: double pole near 150 Hz, then lip radiation (first difference)
            src = np.diff(np.convolve(pulses, glottal), prepend=0.0)[:seg]
            level = 10 ** (rng.uniform(-3, 3) / 20)
            f0 = float(np.clip(f0 * rng.uniform(0.95, 1.05), 80, 260))
            v = _VOWELS[rng.integers(len(_VOWELS))]
            formants = [(v[0], 90), (v[1], 110), (v[2], 160)]
        y = np.zeros(seg)
        for f, bw in formants:
            y += _resonate(src, f, bw, rate)
        env = np.sin(np.linspace(0, np.pi, seg)) ** 0.5
        y *= level / (np.sqrt(np.mean(y ** 2)) or 1.0)
        out[pos:pos + seg] = y * env
        pos += seg
    rms = np.sqrt(np.mean(out ** 2)) or 1.0
    out *= 10 ** (level_dbfs / 20) * 32768 / rms
    return AudioClip(np.clip(np.round(out), -32768, 32767).astype(np.int16), rate)


def synth_noise(duration_s: float, rate: int = 16000, seed: int = 0, kind: str = "pink",
                level_dbfs: float = -25.0) -> AudioClip:
    """Pink-ish noise, or "babble" made of overlapping synthetic talkers."""
    n = int(round(duration_s * rate))
    rng = np.random.default_rng(seed)
    if kind == "babble":
        x = sum(synth_speech(duration_s, rate, seed * 31 + k).samples.astype(np.float64) for k in range(4))
    else:
        spec = np.fft.rfft(rng.standard_normal(n))
        f = np.fft.rfftfreq(n, 1 / rate)
        spec /= np.sqrt(np.maximum(f, 20.0))
        x = np.fft.irfft(spec, n)
        if kind == "hum":
            t = np.arange(n) / rate
            x = x * 0.3 / (np.std(x) or 1) + np.sin(2 * np.pi * 50 * t) + 0.5 * np.sin(2 * np.pi * 150 * t)
    x = x * 10 ** (level_dbfs / 20) * 32768 / (np.sqrt(np.mean(x ** 2)) or 1.0)
    return AudioClip(np.clip(np.round(x), -32768, 32767).astype(np.int16), rate)


def write_toy_corpus(root, utterances: int = 6, rate: int = 16000, seed: int = 0,
                     duration_range=(0.3, 0.8)) -> Path:
    """Write a flat corpus (``<id>.wav`` + ``<id>.txt``) and two noise corpora.

    Layout: ``root/speech``, ``root/noise/musan``, ``root/noise/qut``.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    speech = root / "speech"
    speech.mkdir(parents=True, exist_ok=True)
    for i in range(utterances):
        uid = f"toy{i:04d}"
        dur = float(rng.uniform(*duration_range))
        clip = synth_speech(dur, rate, seed=seed * 100003 + i)
        (speech / f"{uid}.wav").write_bytes(write_wav(clip))
        words = rng.choice(_WORDS, size=int(rng.integers(3, 8)))
        (speech / f"{uid}.txt").write_text(" ".join(words) + "\n", encoding="utf-8")
    for corpus, kinds in (("musan", ("babble", "pink")), ("qut", ("hum", "pink"))):
        d = root / "noise" / corpus
        d.mkdir(parents=True, exist_ok=True)
        for j, kind in enumerate(kinds):
            clip = synth_noise(1.5, rate, seed=seed * 7 + j + len(corpus), kind=kind)
            (d / f"{kind}{j}.wav").write_bytes(write_wav(clip))
    return root
