"""Corpus manifests, the multi-style dataset grammar, and dataset materialization.

A dataset is a union of full copies of a source corpus.  Copy 1 carries the
dataset's own style (for example WAV49 encoding plus Musan noise at 15 dB);
each ``+ token`` appends another copy with an extra perturbation, so
``train-musan-e-15 + s + v + sv`` has four copies.
"""

from __future__ import annotations

import configparser
import io
import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audio import Wav49Payload, downmix_to_mono, load_clip, read_wav, write_wav
from .augment import (
    SPEED_MAGNITUDE,
    VOLUME_MAGNITUDE,
    Rng,
    draw_factor,
    mix_noise,
    perturb_speed,
    perturb_volume,
)
from .errors import (
    ConfigError,
    CorpusError,
    DuplicateUtteranceId,
    MissingTranscript,
    MtrError,
    ThresholdExceeded,
    UnknownStyleToken,
)
from .gsm import GSM_RATE, wav49_encode
from .resample import resample

log = logging.getLogger(__name__)

# noise corpus named by each dataset condition
CONDITION_NOISE = {"clean": None, "noisy": "qut", "musan": "musan"}

TABLE2_TRAINING = (
    "train-clean",
    "train-clean-8k",
    "train-clean-e",
    "train-noisy-e-5",
    "train-clean-e-s",
    "train-clean-e-v",
    "train-clean-e-sv",
    "train-musan-e-5",
    "train-musan-e-10",
    "train-musan-e-15",
    "train-musan-e-20",
    "train-musan-e-15-s",
    "train-musan-e-15-v",
    "train-musan-e-15-sv",
)
TABLE3_EVAL = ("dev-clean-e", "dev-noisy-e-5", "test-noisy-e-5")


# -- manifests -------------------------------------------------------------------

@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    audio_path: str
    transcript: str
    duration_s: float
    sample_rate: int = 0


def _check_field(value: str, what: str):
    if "\t" in value or "\n" in value:
        raise CorpusError(f"{what} {value!r} contains a tab or newline")


def format_manifest(records: Sequence[UtteranceRecord]) -> str:
    lines = []
    for r in records:
        _check_field(r.utterance_id, "utterance id")
        _check_field(r.transcript, "transcript")
        lines.append(
            f"{r.utterance_id}\t{r.audio_path}\t{r.sample_rate}\t{r.duration_s:.6f}\t{r.transcript}\n"
        )
    return "".join(lines)


def write_manifest(records: Sequence[UtteranceRecord], path) -> None:
    Path(path).write_text(format_manifest(records), encoding="utf-8")


def read_manifest(path) -> list[UtteranceRecord]:
    """Read a manifest; audio paths are resolved relative to its directory."""
    path = Path(path)
    root = path.parent
    records = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise CorpusError(f"{path}:{lineno}: expected 5 tab-separated fields")
            uid, rel, rate, dur, text = parts
            if uid in seen:
                raise DuplicateUtteranceId(f"{path}:{lineno}: duplicate id {uid!r}")
            seen.add(uid)
            records.append(UtteranceRecord(uid, str(root / rel), text, float(dur), int(rate)))
    return records


def _wav_duration(path: Path) -> tuple[float, int]:
    obj, meta = read_wav(path)
    if isinstance(obj, Wav49Payload):
        return obj.fact_samples / obj.sample_rate, obj.sample_rate
    return obj.duration_seconds, obj.sample_rate


def scan_corpus(root, layout: str = "flat") -> list[UtteranceRecord]:
    """Pair audio files with transcripts under ``root``.

    ``flat``: every ``<id>.wav`` has a sibling ``<id>.txt`` holding its text.
    ``librispeech``: ``<spk>/<chapter>/<id>.wav`` with transcripts in the
    chapter's ``*.trans.txt`` as ``<id> <text>`` lines.
    Records are sorted by utterance id; audio paths are relative to ``root``.
    """
    root = Path(root)
    if layout not in ("flat", "librispeech"):
        raise ConfigError(f"unknown corpus layout {layout!r}")
    texts: dict[str, str] = {}
    if layout == "librispeech":
        for trans in sorted(root.rglob("*.trans.txt")):
            for line in trans.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    uid, _, text = line.strip().partition(" ")
                    texts[str(trans.parent / uid)] = text.strip()
    records = {}
    for wav in sorted(root.rglob("*.wav")):
        uid = wav.stem
        if layout == "flat":
            txt = wav.with_suffix(".txt")
            if not txt.exists():
                raise MissingTranscript(f"no transcript for {wav}")
            text = " ".join(txt.read_text(encoding="utf-8").split())
        else:
            key = str(wav.parent / uid)
            if key not in texts:
                raise MissingTranscript(f"no transcript line for {uid} in {wav.parent}")
            text = texts[key]
        if uid in records:
            raise DuplicateUtteranceId(f"utterance id {uid!r} appears more than once")
        dur, rate = _wav_duration(wav)
        records[uid] = UtteranceRecord(uid, wav.relative_to(root).as_posix(), text, dur, rate)
    return [records[k] for k in sorted(records)]


# -- styles and dataset specs ----------------------------------------------------------

@dataclass(frozen=True)
class StyleSpec:
    """One perturbation recipe; ``speed`` and ``volume`` are factor magnitudes."""

    token: str = "base"
    encode: bool = False
    noise: Optional[tuple] = None  # (corpus name, snr dB)
    speed: Optional[float] = None
    volume: Optional[float] = None
    resample_to: Optional[int] = None

    def __post_init__(self):
        for name in ("speed", "volume"):
            m = getattr(self, name)
            if m is not None and not 0 < m <= 0.5:
                raise UnknownStyleToken(f"{name} magnitude {m} outside (0, 0.5]")
        if self.noise is not None:
            corpus, snr = self.noise
            if not corpus or not np.isfinite(snr):
                raise UnknownStyleToken(f"bad noise style {self.noise!r}")
            object.__setattr__(self, "noise", (str(corpus), float(snr)))

    @property
    def output_rate(self) -> Optional[int]:
        if self.encode:
            return GSM_RATE
        return self.resample_to

    @property
    def suffix(self) -> str:
        return "" if self.token == "base" else "#" + self.token


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    base: str
    copies: tuple

    def __post_init__(self):
        if not self.copies:
            raise UnknownStyleToken("a dataset needs at least one copy")
        rates = {c.output_rate for c in self.copies}
        if len(rates) > 1:
            raise UnknownStyleToken(f"dataset {self.name!r} mixes output rates {sorted(map(str, rates))}")
        suffixes = [c.suffix for c in self.copies]
        if len(set(suffixes)) != len(suffixes):
            raise UnknownStyleToken(f"dataset {self.name!r} repeats a copy token")

    @property
    def size(self) -> int:
        return len(self.copies)

    def expression(self) -> str:
        return " + ".join([_base_name(self.base, self.copies[0])] + [c.token for c in self.copies[1:]])


_NOISE_TOKEN = re.compile(r"^noise\(\s*([A-Za-z0-9_.]+)\s*,\s*(-?[0-9.]+)\s*\)$")


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def apply_token(base: StyleSpec, token: str) -> StyleSpec:
    """Style of the extra copy that ``+ token`` adds on top of the base style."""
    token = token.strip()
    if token == "s":
        return replace(base, token="s", speed=SPEED_MAGNITUDE)
    if token == "v":
        return replace(base, token="v", volume=VOLUME_MAGNITUDE)
    if token == "sv":
        return replace(base, token="sv", speed=SPEED_MAGNITUDE, volume=VOLUME_MAGNITUDE)
    if token == "e":
        return replace(base, token="e", encode=True)
    if token == "plain":
        return StyleSpec(token="plain", resample_to=base.output_rate)
    m = _NOISE_TOKEN.match(token)
    if m:
        corpus, snr = m.group(1), float(m.group(2))
        return replace(base, token=f"n-{corpus}-{_fmt_num(snr)}", noise=(corpus, snr))
    raise UnknownStyleToken(f"unknown style token {token!r}")


def parse_base_name(name: str) -> tuple[str, StyleSpec, list[str]]:
    """Split a dataset name like ``train-musan-e-15-s`` into source, style and copy tokens."""
    parts = name.strip().split("-")
    if len(parts) < 2 or parts[1] not in CONDITION_NOISE:
        raise UnknownStyleToken(f"cannot parse dataset name {name!r}")
    split, cond = parts[0], parts[1]
    rest = parts[2:]
    encode = False
    rate = None
    if rest and rest[0] == "8k":
        rate = 8000
        rest = rest[1:]
    if rest and rest[0] == "e":
        encode = True
        rest = rest[1:]
    noise = None
    corpus = CONDITION_NOISE[cond]
    if corpus is not None:
        if not rest or not re.fullmatch(r"-?\d+(\.\d+)?", rest[0]):
            raise UnknownStyleToken(f"{name!r}: noisy condition needs an SNR")
        noise = (corpus, float(rest[0]))
        rest = rest[1:]
    if encode and rate is None:
        rate = GSM_RATE
    style = StyleSpec(encode=encode, noise=noise, resample_to=rate)
    return f"{split}-clean", style, rest


def _base_name(source: str, style: StyleSpec) -> str:
    split = source.split("-")[0]
    cond = "clean"
    if style.noise is not None:
        inv = {v: k for k, v in CONDITION_NOISE.items() if v}
        cond = inv.get(style.noise[0], style.noise[0])
    parts = [split, cond]
    if style.resample_to == 8000 and not style.encode:
        parts.append("8k")
    if style.encode:
        parts.append("e")
    if style.noise is not None:
        parts.append(_fmt_num(style.noise[1]))
    return "-".join(parts)


def compose_dataset(base: str, styles: Sequence[str] = (), name: str | None = None) -> DatasetSpec:
    """Build the union-of-copies dataset ``base + styles[0] + styles[1] ...``."""
    source, style, name_tokens = parse_base_name(base)
    tokens = list(name_tokens) + [t.strip() for t in styles]
    copies = [style] + [apply_token(style, t) for t in tokens]
    if name is None:
        name = "-".join([_base_name(source, style)] + [re.sub(r"[^A-Za-z0-9.]+", "", t) for t in tokens])
    return DatasetSpec(name, source, tuple(copies))


def parse_expression(expr: str, name: str | None = None) -> DatasetSpec:
    """Parse ``"train-musan-e-15 + s + v + sv"`` or a bare dataset name."""
    terms = [t.strip() for t in expr.split("+")]
    if not terms[0]:
        raise UnknownStyleToken(f"empty dataset expression {expr!r}")
    return compose_dataset(terms[0], terms[1:], name)


def dataset_from_name(name: str) -> DatasetSpec:
    """Dataset named in the style of the training tables (``train-clean-e-s-v``)."""
    return compose_dataset(name, (), name)


# -- spec serialization ------------------------------------------------------------------

def dumps_spec(spec: DatasetSpec) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["dataset"] = {"name": spec.name, "base": spec.base, "size": str(spec.size)}
    for i, c in enumerate(spec.copies, 1):
        sec = {"token": c.token, "encode": "yes" if c.encode else "no"}
        if c.noise is not None:
            sec["noise"] = f"{c.noise[0]}:{_fmt_num(c.noise[1])}"
        if c.speed is not None:
            sec["speed"] = _fmt_num(c.speed)
        if c.volume is not None:
            sec["volume"] = _fmt_num(c.volume)
        if c.resample_to is not None:
            sec["resample_to"] = str(c.resample_to)
        cp[f"copy {i}"] = sec
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads_spec(text: str) -> DatasetSpec:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
        head = cp["dataset"]
        size = int(head["size"])
        copies = []
        for i in range(1, size + 1):
            sec = cp[f"copy {i}"]
            noise = None
            if "noise" in sec:
                corpus, _, snr = sec["noise"].rpartition(":")
                noise = (corpus, float(snr))
            copies.append(StyleSpec(
                token=sec["token"],
                encode=sec.getboolean("encode"),
                noise=noise,
                speed=float(sec["speed"]) if "speed" in sec else None,
                volume=float(sec["volume"]) if "volume" in sec else None,
                resample_to=int(sec["resample_to"]) if "resample_to" in sec else None,
            ))
        return DatasetSpec(head["name"], head["base"], tuple(copies))
    except (KeyError, ValueError, configparser.Error) as exc:
        raise ConfigError(f"malformed dataset spec: {exc}") from exc


# -- materialization ----------------------------------------------------------------------

@dataclass
class NoiseCorpus:
    """Eligible noise files for one corpus name, in a fixed order."""

    name: str
    files: list  # list of (file name, AudioClip)
    _by_rate: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @classmethod
    def from_dir(cls, name: str, root, manifest: str | None = None) -> "NoiseCorpus":
        root = Path(root)
        if manifest:
            names = [ln.strip() for ln in Path(manifest).read_text().splitlines() if ln.strip()]
            paths = [root / n for n in names]
        else:
            paths = sorted(root.rglob("*.wav"))
        files = []
        for p in paths:
            clip = downmix_to_mono(load_clip(p))
            files.append((p.relative_to(root).as_posix(), clip))
        if not files:
            raise ConfigError(f"noise corpus {name!r} at {root} has no WAV files")
        return cls(name, files)

    def at_rate(self, rate: int) -> "NoiseCorpus":
        if all(c.sample_rate == rate for _, c in self.files):
            return self
        with self._lock:
            if rate not in self._by_rate:
                self._by_rate[rate] = NoiseCorpus(self.name, [(n, resample(c, rate)) for n, c in self.files])
            return self._by_rate[rate]


@dataclass
class MaterializeResult:
    records: list
    metrics: dict
    errors: list = field(default_factory=list)


def _process(item, spec: DatasetSpec, out: Path, seed: int, noises: dict):
    copy_index, style, rec = item
    out_id = rec.utterance_id + style.suffix
    draw = {"id": out_id, "source_id": rec.utterance_id, "copy": copy_index, "token": style.token}
    clip = downmix_to_mono(load_clip(rec.audio_path))
    target = style.output_rate
    if target is not None and clip.sample_rate != target:
        clip = resample(clip, target)
    clipped = 0
    if style.noise is not None:
        corpus_name, snr = style.noise
        if corpus_name not in noises:
            raise ConfigError(f"noise corpus {corpus_name!r} is not configured")
        corpus = noises[corpus_name].at_rate(clip.sample_rate)
        rng = Rng.for_utterance(seed, out_id, "noise")
        fname, nclip = corpus.files[rng.integers(len(corpus.files))]
        mixed = mix_noise(clip, nclip, snr, rng)
        clip = mixed.clip
        clipped += mixed.clipped
        draw.update(noise_file=fname, noise_offset=mixed.offset, noise_scale=mixed.scale, snr_db=snr)
    if style.speed is not None:
        factor = draw_factor(Rng.for_utterance(seed, out_id, "speed"), style.speed)
        clip = perturb_speed(clip, factor)
        draw["speed_factor"] = factor
    if style.volume is not None:
        factor = draw_factor(Rng.for_utterance(seed, out_id, "volume"), style.volume)
        clip, n = perturb_volume(clip, factor)
        clipped += n
        draw["volume_factor"] = factor
    draw["clipped"] = clipped
    rel = f"copy{copy_index:02d}-{style.token}/{out_id}.wav"
    data = wav49_encode(clip) if style.encode else write_wav(clip)
    dest = out / rel
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(data)
    record = UtteranceRecord(out_id, rel, rec.transcript, round(clip.duration_seconds, 6), clip.sample_rate)
    return record, draw


def materialize(
    spec: DatasetSpec,
    manifest: Sequence[UtteranceRecord],
    out,
    seed: int,
    noises: dict | None = None,
    workers: int = 1,
    error_threshold: float = 0.0,
    provenance: dict | None = None,
) -> MaterializeResult:
    """Write every copy of every utterance plus manifest, provenance and metrics.

    Style order within a copy is resample, noise, speed, volume, encode.
    Each utterance draws from its own stream keyed by (seed, output id), so
    the output bytes do not depend on ``workers``.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    noises = noises or {}
    items = [(i, style, rec) for i, style in enumerate(spec.copies, 1) for rec in manifest]

    def run(item):
        try:
            return _process(item, spec, out, seed, noises), None
        except (MtrError, OSError, ValueError) as exc:
            uid = item[2].utterance_id + item[1].suffix
            log.warning("%s failed: %s: %s", uid, type(exc).__name__, exc)
            return None, (uid, type(exc).__name__, str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(it) for it in items]

    done = sorted((r for r, e in results if r is not None), key=lambda rd: rd[0].utterance_id)
    errors = sorted(e for r, e in results if e is not None)
    records = [r for r, _ in done]
    draws = [d for _, d in done]

    per_copy = {}
    for i, style in enumerate(spec.copies, 1):
        recs = [r for r, d in done if d["copy"] == i]
        per_copy[f"{i}:{style.token}"] = {
            "utterances": len(recs),
            "duration_s": round(sum(r.duration_s for r in recs), 6),
            "clipped_samples": sum(d["clipped"] for _, d in done if d["copy"] == i),
        }
    tallies = {}
    for d in draws:
        for key in ("speed_factor", "volume_factor"):
            if key in d:
                label = f"{key}={d[key]:g}"
                tallies[label] = tallies.get(label, 0) + 1
    metrics = {
        "dataset": spec.name,
        "expression": spec.expression(),
        "size": spec.size,
        "seed": seed,
        "utterances": len(records),
        "duration_s": round(sum(r.duration_s for r in records), 6),
        "clipped_samples": sum(d["clipped"] for d in draws),
        "copies": per_copy,
        "draw_tallies": dict(sorted(tallies.items())),
        "errors": len(errors),
    }
    if provenance:
        metrics.update(provenance)

    write_manifest(records, out / "manifest.tsv")
    (out / "dataset.ini").write_text(dumps_spec(spec), encoding="utf-8")
    with open(out / "provenance.jsonl", "w", encoding="utf-8") as f:
        for d in draws:
            f.write(json.dumps(d, sort_keys=True) + "\n")
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if errors:
        with open(out / "errors.tsv", "w", encoding="utf-8") as f:
            for uid, cls, msg in errors:
                f.write(f"{uid}\t{cls}\t{msg}\n")
    result = MaterializeResult(records, metrics, errors)
    if items and len(errors) / len(items) > error_threshold:
        raise ThresholdExceeded(
            f"{len(errors)} of {len(items)} utterances failed (threshold {error_threshold:.2%}); "
            f"first: {errors[0][0]}: {errors[0][2]}"
        )
    return result
