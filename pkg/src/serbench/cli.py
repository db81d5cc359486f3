"""Command-line interface: preprocess, extract, run, report, kappa, synth."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .audio_io import PreprocessConfig, load_wav, preprocess, save_wav
from .corpus import (
    Manifest,
    UtteranceRecord,
    parse_manifest,
    parse_ratings,
    ratings_counts,
    write_manifest,
)
from .errors import SerBenchError
from .metrics import fleiss_kappa, kappa_interpretation
from .runner import (
    cache_features,
    generate_synthetic_corpus,
    load_report,
    parse_experiment_config,
    parse_synth_spec,
    render_tables,
    run_experiment,
)


def _cmd_preprocess(args) -> int:
    manifest = parse_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    cfg = PreprocessConfig()
    records = []
    for rec in manifest.records:
        clip = preprocess(load_wav(manifest.resolve_path(rec)), cfg)
        rel = f"wav/{rec.utterance_id}.wav"
        save_wav(clip, out_dir / rel)
        records.append(
            UtteranceRecord(rec.utterance_id, rel, rec.corpus, rec.speaker_id, rec.emotion)
        )
    write_manifest(Manifest(records), out_dir / "manifest.csv")
    print(f"wrote {len(records)} preprocessed clips to {out_dir}")
    return 0


def _cmd_extract(args) -> int:
    manifest = parse_manifest(args.manifest)
    path = cache_features(manifest, args.preset, args.out)
    print(f"wrote feature cache {path}")
    return 0


def _cmd_run(args) -> int:
    config = parse_experiment_config(
        args.config,
        mode=args.mode,
        target=args.target,
        model=args.model,
        seed=args.seed,
    )
    report = run_experiment(config)
    Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"mean UAR {report.mean_uar:.4f} over {len(report.fold_uars)} folds -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    paths = [p for chunk in args.inputs for p in chunk.split(",") if p]
    reports = [load_report(p) for p in paths]
    if args.format != "markdown":
        raise SerBenchError(f"unknown report format {args.format!r}")
    sys.stdout.write(render_tables(reports))
    return 0


def _cmd_kappa(args) -> int:
    ratings = parse_ratings(args.ratings)
    ids, counts = ratings_counts(ratings)
    kappa = fleiss_kappa(counts)
    band = kappa_interpretation(kappa)
    print(f"fleiss_kappa {kappa:.4f} ({band}) over {len(ids)} items, {int(counts[0].sum())} raters")
    return 0


def _cmd_synth(args) -> int:
    spec = parse_synth_spec(args.spec)
    manifest_path = generate_synthetic_corpus(spec, args.out_dir)
    print(f"wrote synthetic corpus manifest {manifest_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serbench",
        description="Speech-emotion-recognition benchmark pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="standardize all audio in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_preprocess)

    p = sub.add_parser("extract", help="write a feature cache CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--preset", choices=("compact", "brute"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("run", help="run a self- or cross-corpus evaluation")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("self", "cross"))
    p.add_argument("--target")
    p.add_argument("--model", choices=("logreg", "mlp"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("report", help="render reports as a markdown table")
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="report JSON path(s), comma-separated or repeated")
    p.add_argument("--format", default="markdown")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("kappa", help="inter-rater agreement from a ratings CSV")
    p.add_argument("--ratings", required=True)
    p.set_defaults(fn=_cmd_kappa)

    p = sub.add_parser("synth", help="generate a synthetic corpus from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SerBenchError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
