"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..signal import AllSamplesMissing, data_loss_rate
from .config import DATA_ENV, ConfigError, available_presets, build_config
from .ingest import IngestError, ingest
from .pipeline import run_pipeline
from .report import emit_report, load_report

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2

log = logging.getLogger("gazepriv")


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", help="bundled preset name (see `gazepriv presets`)")
    p.add_argument("--seed", type=_seed, help="global RNG seed (u64)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--data", help=f"dataset root (default: ${DATA_ENV})")
    p.add_argument("--output", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gazepriv", description="Privacy/utility evaluation of streaming gaze privatizers.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "ingest-check": "parse the dataset and list recordings",
        "privatize": "write privatized recordings",
        "classify": "privatize, then write per-sample movement labels",
        "simulate": "privatize, classify and simulate interactions (utility only)",
        "privacy": "privatize and score identification (privacy only)",
        "run": "full pipeline and report",
    }
    for name, h in helps.items():
        _common(sub.add_parser(name, help=h))
    rp = sub.add_parser("report", help="re-render a report.json")
    rp.add_argument("path", help="report.json or a directory containing it")
    rp.add_argument("--output", help="directory for the re-rendered files (default: alongside)")
    rp.add_argument("--format", choices=("text", "csv", "json"), default="text")
    sub.add_parser("presets", help="list bundled presets")
    return ap


def _config(args):
    return build_config(args.preset, args.config, rng_seed=args.seed, workers=args.workers,
                        dataset_path=args.data, output_dir=args.output)


def _ingest_check(cfg) -> int:
    if not cfg.dataset_path:
        raise ConfigError(f"no dataset path: pass --data or set ${DATA_ENV}")
    recs, errors = ingest(cfg.dataset_path, cfg.filename_pattern, cfg.fs)
    for r in recs:
        n_t = len(r.targets) if r.targets else 0
        print(f"{r.meta.get('source', r.key)}\tsubject={r.subject_id}\tsession={r.session_id}\t"
              f"task={r.task_tag}\tsamples={len(r.t)}\tfs={r.fs:g}\ttargets={n_t}\t"
              f"loss={100 * data_loss_rate(r):.2f}%")
    for path, msg in errors:
        print(f"ERROR {msg}", file=sys.stderr)
    print(f"{len(recs)} ok, {len(errors)} failed")
    return EXIT_DATA if errors or not recs else EXIT_OK


def _report(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "report.json"
    try:
        rows, classifiers, doc = load_report(path)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: cannot read {path}: {e}", file=sys.stderr)
        return EXIT_DATA
    if args.output:
        extra = {k: v for k, v in doc.items() if k not in ("rows", "classifiers")}
        emit_report(rows, args.output, classifiers, extra)
    from .report import render_csv, render_text, sort_rows
    rows = sort_rows(rows)
    if args.format == "csv":
        sys.stdout.write(render_csv(rows, classifiers))
    elif args.format == "json":
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(render_text(rows, classifiers))
    return EXIT_OK


STAGES = {
    "privatize": dict(stages=(), write_privatized=True, write_report=False),
    "classify": dict(stages=("utility",), write_labels=True, write_report=False),
    "simulate": dict(stages=("utility",)),
    "privacy": dict(stages=("privacy",)),
    "run": dict(),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        print("\n".join(available_presets()))
        return EXIT_OK
    if args.command == "report":
        return _report(args)
    try:
        cfg = _config(args)
        if args.command == "ingest-check":
            return _ingest_check(cfg)
        res = run_pipeline(cfg, **STAGES[args.command])
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestError, AllSamplesMissing, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    if args.command in ("simulate", "privacy", "run"):
        sys.stdout.write((Path(cfg.output_dir) / "report.txt").read_text())
    print(f"{res.processed} processed, {res.skipped} skipped (outputs in {cfg.output_dir})")
    if res.processed == 0:
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
