"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--seconds 5] [--repeat 3]

Reports best-of-N wall time for GSM encode, GSM decode and word alignment,
and checks that both backends produce identical output.
"""

import argparse
import random
import time

import numpy as np

from mtrprep import gsm, score
from mtrprep.toy import synth_speech


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_gsm(seconds, repeat):
    pcm = synth_speech(seconds, 8000, seed=1).samples
    pcm = pcm[: pcm.size - pcm.size % 160]
    rows = []
    params = {}
    for name in ("python", "cython"):
        kernel = gsm.get_backend(name)
        t, params[name] = best_of(lambda: gsm.encode_params(kernel.CodecState(), pcm, name), repeat)
        rows.append(("gsm encode", name, t, seconds / t))
    assert np.array_equal(params["python"], params["cython"]), "encoder backends disagree"
    decoded = {}
    for name in ("python", "cython"):
        kernel = gsm.get_backend(name)
        t, decoded[name] = best_of(lambda: gsm.decode_params(kernel.CodecState(), params["python"], name), repeat)
        rows.append(("gsm decode", name, t, seconds / t))
    assert np.array_equal(decoded["python"], decoded["cython"]), "decoder backends disagree"
    return rows


def bench_align(pairs, repeat):
    rng = random.Random(2)
    vocab = [f"w{i}" for i in range(50)]
    data = []
    for _ in range(pairs):
        ref = rng.choices(vocab, k=rng.randint(5, 30))
        hyp = [w if rng.random() > 0.2 else rng.choice(vocab) for w in ref]
        data.append((ref, hyp))
    rows = []
    results = {}
    for name in ("python", "cython"):
        t, results[name] = best_of(lambda: [score.align(r, h, name) for r, h in data], repeat)
        rows.append(("align", name, t, pairs / t))
    assert results["python"] == results["cython"], "alignment backends disagree"
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=5.0, help="audio length for the codec runs")
    ap.add_argument("--pairs", type=int, default=2000, help="utterance pairs for alignment")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rows = bench_gsm(args.seconds, args.repeat) + bench_align(args.pairs, args.repeat)
    print(f"{'kernel':<12}{'backend':<9}{'best s':>10}{'throughput':>16}{'speedup':>10}")
    base = {}
    for kernel, name, t, rate in rows:
        base.setdefault(kernel, t)
        unit = "x realtime" if kernel.startswith("gsm") else "pairs/s"
        print(f"{kernel:<12}{name:<9}{t:>10.4f}{rate:>11.0f} {unit:<7}{base[kernel] / t:>7.1f}x")


if __name__ == "__main__":
    main()
