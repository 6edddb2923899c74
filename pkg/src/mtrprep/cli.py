"""Command line entry point: ``mtrprep transcode|materialize|score|inspect|toy-corpus``."""

from __future__ import annotations

import argparse
import configparser
import glob
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from .audio import Wav49Payload, downmix_to_mono, parse_wav, write_wav
from .corpus import (
    NoiseCorpus,
    dumps_spec,
    materialize,
    parse_expression,
    read_manifest,
    scan_corpus,
)
from .errors import ConfigError, MtrError
from .gsm import GSM_RATE, wav49_decode_payload, wav49_encode
from .resample import resample
from .score import (
    ReportRow,
    aggregate_seeds,
    read_transcripts,
    relative_improvement,
    report_table,
    score_corpus,
    wer,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CODES = {"config": 2, "io": 3, "format": 4, "threshold": 5}
WORKERS_ENV = "MTRPREP_WORKERS"


@dataclass
class PipelineConfig:
    """Resolved pipeline settings; relative paths are resolved against the config file."""

    manifests: dict
    datasets: dict  # name -> expression
    noise: dict = field(default_factory=dict)
    seed: int | None = None
    workers: int = 1
    output: Path = Path("out")
    error_threshold: float = 0.0
    layout: str = "flat"
    digest: str = ""

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        text = raw.decode("utf-8")
        if path.suffix == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        else:
            cp = configparser.ConfigParser(interpolation=None)
            cp.optionxform = str
            try:
                cp.read_string(text, source=str(path))
            except configparser.Error as exc:
                raise ConfigError(str(exc)) from exc
            data = {s: dict(cp[s]) for s in cp.sections()}
        return cls.from_dict(data, path.parent, hashlib.sha256(raw).hexdigest())

    @classmethod
    def from_dict(cls, data: dict, base: Path, digest: str = "") -> "PipelineConfig":
        unknown = set(data) - {"pipeline", "manifests", "noise", "datasets"}
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        pipe = data.get("pipeline", {})
        try:
            seed = pipe.get("seed")
            cfg = cls(
                manifests={k: base / v for k, v in data.get("manifests", {}).items()},
                datasets={k: (v or k) for k, v in data.get("datasets", {}).items()},
                noise={k: base / v for k, v in data.get("noise", {}).items()},
                seed=None if seed in (None, "") else int(seed),
                workers=int(pipe.get("workers", 1)),
                output=base / pipe.get("output", "out"),
                error_threshold=float(pipe.get("error_threshold", 0.0)),
                layout=pipe.get("layout", "flat"),
                digest=digest,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [pipeline] value: {exc}") from exc
        if cfg.workers < 1:
            raise ConfigError("workers must be at least 1")
        return cfg

    def validate_paths(self):
        for kind, table in (("manifest", self.manifests), ("noise corpus", self.noise)):
            for name, p in table.items():
                if not p.exists():
                    raise FileNotFoundError(f"{kind} {name!r}: {p} does not exist")


def _error_class(exc: BaseException) -> str:
    if isinstance(exc, MtrError):
        return exc.exit_class
    if isinstance(exc, OSError):
        return "io"
    return "internal"


# -- transcode ---------------------------------------------------------------------

def cmd_transcode(args) -> int:
    src = Path(args.input).read_bytes()
    obj, meta = parse_wav(src)
    to = args.to or ("pcm" if isinstance(obj, Wav49Payload) else "wav49")
    if to == "wav49":
        if isinstance(obj, Wav49Payload):
            obj = wav49_decode_payload(obj)
        clip = downmix_to_mono(obj)
        if clip.sample_rate != GSM_RATE:
            clip = resample(clip, GSM_RATE)
        out = wav49_encode(clip)
        payload = parse_wav(out)[0].data
        pcm_bytes = clip.samples.size * 2
        ratio = pcm_bytes / len(payload) if payload else float("nan")
        dur = clip.duration_seconds
        stats = {"pcm_bytes": pcm_bytes, "payload_bytes": len(payload)}
    else:
        clip = wav49_decode_payload(obj) if isinstance(obj, Wav49Payload) else downmix_to_mono(obj)
        if args.rate and clip.sample_rate != args.rate:
            clip = resample(clip, args.rate)
        out = write_wav(clip)
        dur = clip.duration_seconds
        pcm_bytes = clip.samples.size * 2
        payload_bytes = len(obj.data) if isinstance(obj, Wav49Payload) else meta.data_bytes
        ratio = pcm_bytes / payload_bytes if payload_bytes else float("nan")
        stats = {"pcm_bytes": pcm_bytes, "payload_bytes": payload_bytes}
    Path(args.output).write_bytes(out)
    print(f"duration_s\t{dur:.3f}")
    print(f"input_bytes\t{len(src)}")
    print(f"output_bytes\t{len(out)}")
    print(f"pcm_bytes\t{stats['pcm_bytes']}")
    print(f"payload_bytes\t{stats['payload_bytes']}")
    print(f"compression_ratio\t{ratio:.3f}:1")
    return EXIT_OK


# -- materialize ----------------------------------------------------------------------

def _load_manifest(cfg: PipelineConfig, name: str):
    if name not in cfg.manifests:
        raise ConfigError(f"no manifest configured for base {name!r}")
    path = cfg.manifests[name]
    if path.is_dir():
        recs = scan_corpus(path, cfg.layout)
        return [r.__class__(r.utterance_id, str(path / r.audio_path), r.transcript, r.duration_s, r.sample_rate)
                for r in recs]
    return read_manifest(path)


def cmd_materialize(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output:
        cfg.output = Path(args.output)
    if args.error_threshold is not None:
        cfg.error_threshold = args.error_threshold
    workers = args.workers or os.environ.get(WORKERS_ENV) or cfg.workers
    try:
        workers = int(workers)
    except ValueError as exc:
        raise ConfigError(f"bad worker count {workers!r}") from exc
    if cfg.seed is None:
        raise ConfigError("a seed is required (config [pipeline] seed or --seed)")
    names = list(cfg.datasets) if args.all or not args.dataset else args.dataset
    for name in names:
        if name not in cfg.datasets:
            raise ConfigError(f"dataset {name!r} is not defined in {args.config}")
    specs = {name: parse_expression(cfg.datasets[name], name) for name in names}
    cfg.validate_paths()
    if args.spec_only:
        for name, spec in specs.items():
            d = cfg.output / name
            d.mkdir(parents=True, exist_ok=True)
            (d / "dataset.ini").write_text(dumps_spec(spec), encoding="utf-8")
            print(f"{name}\tsize={spec.size}\t{spec.expression()}")
        return EXIT_OK
    noises = {n: NoiseCorpus.from_dir(n, p) for n, p in cfg.noise.items()}
    manifests = {}
    for name, spec in specs.items():
        if spec.base not in manifests:
            manifests[spec.base] = _load_manifest(cfg, spec.base)
        result = materialize(
            spec, manifests[spec.base], cfg.output / name, cfg.seed, noises,
            workers=workers, error_threshold=cfg.error_threshold,
            provenance={"config_sha256": cfg.digest},
        )
        m = result.metrics
        print(f"{name}\tsize={spec.size}\tutterances={m['utterances']}\t"
              f"duration_s={m['duration_s']:.3f}\tclipped={m['clipped_samples']}\terrors={m['errors']}")
    return EXIT_OK


# -- score ------------------------------------------------------------------------------

def cmd_score(args) -> int:
    ref = read_transcripts(args.ref)
    hyp_files = sorted({p for g in args.hyp for p in glob.glob(g)})
    if not hyp_files:
        raise ConfigError(f"no hypothesis files match {args.hyp}")
    per_seed = []
    for path in hyp_files:
        counts = score_corpus(ref, read_transcripts(path), args.missing_as_deletion)
        w = wer(counts)
        per_seed.append(w)
        print(f"{path}\tWER={w:.2f}\tN={counts.ref_length}\tS={counts.substitutions}\t"
              f"D={counts.deletions}\tI={counts.insertions}")
    agg = aggregate_seeds(per_seed, population=args.population_sd)
    rel = None
    line = f"{args.name}\tseeds={len(per_seed)}\tWER={agg.format()}"
    if args.baseline is not None:
        rel = {args.column: relative_improvement(args.baseline, agg.mean)}
        line += f"\trelative={rel[args.column]:.1f}%"
    print(line)
    if args.out:
        table = report_table([ReportRow(args.name, None, {args.column: agg}, rel)])
        text = table.to_csv() if args.out.endswith(".csv") else table.to_text()
        digest = hashlib.sha256()
        for p in [args.ref] + hyp_files:
            digest.update(Path(p).read_bytes())
        header = f"# inputs_sha256={digest.hexdigest()} seeds={len(per_seed)}\n"
        Path(args.out).write_text(header + text, encoding="utf-8")
    return EXIT_OK


# -- inspect ----------------------------------------------------------------------------

def cmd_inspect(args) -> int:
    buf = Path(args.file).read_bytes()
    obj, meta = parse_wav(buf)
    info = {
        "file": str(args.file),
        "file_bytes": len(buf),
        "format_tag": meta.format_tag,
        "format": "gsm610" if isinstance(obj, Wav49Payload) else "pcm16",
        "channels": meta.channels,
        "sample_rate": meta.sample_rate,
        "bits_per_sample": meta.bits_per_sample,
        "block_align": meta.block_align,
        "data_bytes": meta.data_bytes,
        "fact_samples": meta.fact_samples,
        "samples_per_block": meta.samples_per_block,
        "trailing_chunks": meta.trailing_chunks,
        "chunks": list(meta.chunks),
    }
    if isinstance(obj, Wav49Payload):
        info["blocks"] = obj.blocks
        info["duration_s"] = obj.fact_samples / obj.sample_rate
    else:
        info["frames"] = obj.frames
        info["duration_s"] = obj.duration_seconds
    print(json.dumps(info, indent=2))
    return EXIT_OK


# -- toy corpus -------------------------------------------------------------------------

def cmd_toy_corpus(args) -> int:
    from .toy import write_toy_corpus

    root = write_toy_corpus(args.output, utterances=args.utterances, seed=args.seed)
    config = resources.files("mtrprep").joinpath("data/table2.ini").read_text(encoding="utf-8")
    (root / "table2.ini").write_text(config, encoding="utf-8")
    print(f"wrote {args.utterances} utterances, noise corpora and table2.ini under {root}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtrprep", description="Multi-style training data preparation.")
    p.add_argument("--version", action="version", version=f"mtrprep {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transcode", help="convert between 16-bit PCM WAV and WAV49")
    t.add_argument("input")
    t.add_argument("output")
    t.add_argument("--to", choices=("wav49", "pcm"), help="target codec (default: the other one)")
    t.add_argument("--rate", type=int, help="output rate for PCM output (8000 or 16000)")
    t.set_defaults(func=cmd_transcode)

    m = sub.add_parser("materialize", help="build multi-style datasets from a config file")
    m.add_argument("--config", required=True)
    m.add_argument("--dataset", action="append", help="dataset name from the config (repeatable)")
    m.add_argument("--all", action="store_true", help="materialize every configured dataset")
    m.add_argument("--seed", type=int)
    m.add_argument("--workers", type=int, help=f"overrides ${WORKERS_ENV} and the config")
    m.add_argument("--output")
    m.add_argument("--error-threshold", type=float)
    m.add_argument("--spec-only", action="store_true", help="write dataset.ini files only")
    m.set_defaults(func=cmd_materialize)

    s = sub.add_parser("score", help="WER over one hypothesis file per seed")
    s.add_argument("--ref", required=True)
    s.add_argument("--hyp", required=True, action="append", help="file or glob (repeatable)")
    s.add_argument("--out", help="report path (.csv or text)")
    s.add_argument("--name", default="model")
    s.add_argument("--column", default="WER")
    s.add_argument("--baseline", type=float, help="baseline WER for a relative-improvement column")
    s.add_argument("--missing-as-deletion", action="store_true")
    s.add_argument("--population-sd", action="store_true", help="use n instead of n-1 in the SE")
    s.set_defaults(func=cmd_score)

    i = sub.add_parser("inspect", help="print WAV or WAV49 header fields as JSON")
    i.add_argument("file")
    i.set_defaults(func=cmd_inspect)

    y = sub.add_parser("toy-corpus", help="write a synthetic corpus and the example config")
    y.add_argument("output")
    y.add_argument("--utterances", type=int, default=6)
    y.add_argument("--seed", type=int, default=0)
    y.set_defaults(func=cmd_toy_corpus)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # mapped to an exit class below
        cls = _error_class(exc)
        print(f"mtrprep: error class={cls} type={type(exc).__name__}: {exc}", file=sys.stderr)
        if cls == "internal":
            raise
        return EXIT_CODES[cls]


if __name__ == "__main__":
    sys.exit(main())
