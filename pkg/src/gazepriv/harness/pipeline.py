"""End-to-end evaluation: preprocess, privatize, then utility and privacy branches.

Recordings are processed independently (optionally in a process pool); every
cross-recording quantity (corpus z-score, user and population statistics) is
computed afterwards from the ordered results, so outputs do not depend on the
number of workers.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..classification import classify, ikf_labels, write_labels_csv
from ..interaction import (EmptyPopulation, simulate_interactions, summarize_accuracy,
                           write_outcomes_csv)
from ..privacy import (RateMismatch, corpus_zscore, embed_all, evaluate_privacy,
                       make_embedder, write_embeddings)
from ..privatizers import FIR, apply_privatizer, dump_fir_csv, make_privatizer
from ..signal import Recording, preprocess
from ..synthetic import write_recording_csv
from .config import ConfigError, PipelineConfig
from .ingest import IngestError, ingest
from .report import ReportRow, UtilityCell, describe, emit_report, latency_columns

log = logging.getLogger(__name__)

ALL_STAGES = frozenset({"utility", "privacy"})


def recording_seed(global_seed: Optional[int], rec: Recording) -> Optional[np.random.SeedSequence]:
    """Per-recording seed from the global seed and the recording's identity."""
    if global_seed is None:
        return None
    h = hashlib.sha256(f"{rec.subject_id}\x1f{rec.session_id}\x1f{rec.task_tag}".encode()).digest()
    return np.random.SeedSequence([int(global_seed), int.from_bytes(h[:8], "little")])


def variant_slug(spec: dict) -> str:
    parts = [spec["op"]] + [f"{k}{spec[k]}" for k in sorted(spec) if k not in ("op", "label")]
    return "_".join(str(p) for p in parts).replace(".", "p").replace("/", "-")


@dataclass
class RecordingResult:
    key: str
    subject_id: str
    session_id: str
    task_tag: str
    ok: bool = True
    error: str = ""
    utility: dict = field(default_factory=dict)  # classifier -> dict
    windows: list = field(default_factory=list)
    privacy_error: str = ""


def _wants_privacy(cfg: PipelineConfig, rec: Recording) -> bool:
    return cfg.run_privacy and (cfg.privacy_tasks is None or rec.task_tag in cfg.privacy_tasks)


def _wants_utility(cfg: PipelineConfig, rec: Recording) -> bool:
    return cfg.run_utility and rec.task_tag == cfg.utility_task and bool(rec.targets)


def process_recording(rec: Recording, spec: dict, cfg: PipelineConfig,
                      artifacts: Optional[dict] = None) -> RecordingResult:
    """Run one recording through one privatizer and both evaluation branches."""
    from ..privacy import make_velocity_windows

    res = RecordingResult(rec.key, rec.subject_id, rec.session_id, rec.task_tag)
    artifacts = artifacts or {}
    try:
        pre = preprocess(rec, cfg.screen_bounds)
        op = make_privatizer(spec, pre.fs, seed=recording_seed(cfg.rng_seed, rec))
        labels = None
        if op.needs_labels:
            lc = {k: v for k, v in cfg.label_classifier.items() if k != "name"}
            labels = ikf_labels(pre.x, pre.y, pre.fs, **lc)
        out, _ = apply_privatizer(pre, op, labels, cfg.chunk_size)
        if "privatized" in artifacts:
            write_recording_csv(out, Path(artifacts["privatized"]) / f"{rec.key}.csv")
        if _wants_utility(cfg, out):
            for cspec in cfg.classifiers:
                name = cspec["name"]
                lab, fixations = classify(out, cspec)
                if "labels" in artifacts:
                    d = Path(artifacts["labels"]) / name
                    d.mkdir(parents=True, exist_ok=True)
                    write_labels_csv(lab, d / f"{rec.key}.csv")
                outcomes = simulate_interactions(out, fixations, cfg.dwell_ms, cfg.interaction_window_ms)
                if "outcomes" in artifacts:
                    d = Path(artifacts["outcomes"]) / name
                    d.mkdir(parents=True, exist_ok=True)
                    write_outcomes_csv(outcomes, d / f"{rec.key}.csv")
                res.utility[name] = {
                    "offsets": [o.offset_dva for o in outcomes if o.valid],
                    "valid": sum(1 for o in outcomes if o.valid),
                    "total": cfg.total_targets if cfg.total_targets else len(outcomes),
                    "fixations": len(fixations),
                }
        if _wants_privacy(cfg, out):
            try:
                res.windows = make_velocity_windows(out)
            except RateMismatch as e:
                res.privacy_error = f"RateMismatch: {e}"
    except Exception as e:  # a failing recording is skipped, not fatal
        log.warning("skipping %s (%s): %s", rec.key, spec.get("op"), e)
        res.ok = False
        res.error = f"{type(e).__name__}: {e}"
        res.windows = []
        res.utility = {}
    return res


def _job(args):
    return process_recording(*args)


def _map(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def summarize_utility(results, classifier: str) -> UtilityCell:
    per_user: dict = {}
    valid = total = fixations = 0
    for r in results:
        u = r.utility.get(classifier)
        if u is None:
            continue
        per_user.setdefault(r.subject_id, []).extend(u["offsets"])
        valid += u["valid"]
        total += u["total"]
        fixations += u["fixations"]
    if total == 0:
        return UtilityCell(note="no recordings with targets")
    sr = 100.0 * valid / total
    try:
        s = summarize_accuracy(per_user, sr)
    except EmptyPopulation:
        return UtilityCell(None, None, sr, fixations,
                           "no valid interactions: spatial accuracy unmeasurable")
    note = f"{len(s.excluded_users)} user(s) without valid interactions excluded" if s.excluded_users else ""
    return UtilityCell(s.U50_E50, s.U95_E95, sr, fixations, note)


def summarize_privacy(results, cfg: PipelineConfig, out_dir: Optional[Path] = None):
    """Rank-1 IR for one variant, or None plus the reason it is missing."""
    errors = [r.privacy_error for r in results if r.privacy_error]
    if errors:
        return None, errors[0]
    windows = [w for r in results for w in r.windows]
    if not windows:
        return None, "no 5000-sample velocity windows available"
    try:
        embedder = make_embedder(cfg.embedder)
    except (ValueError, OSError, KeyError) as e:
        return None, f"embedder unavailable: {e}"
    split = cfg.split
    res = evaluate_privacy(windows, embedder, str(split["enroll_session"]), str(split["auth_session"]))
    if out_dir is not None and res.stats is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "zscore_stats.json").write_text(json.dumps(res.stats.to_dict(), indent=2) + "\n")
        normed, _ = corpus_zscore(windows)
        write_embeddings(embed_all(normed, embedder), normed, out_dir / "embeddings", embedder.name)
    if res.rank1_ir is None:
        return None, res.reason
    note = "" if embedder.name == "precomputed" else f"stand-in embedder '{embedder.name}', not the trained network"
    return res.rank1_ir, note


@dataclass
class RunResult:
    rows: list
    processed: int
    skipped: int
    ingested: int
    skipped_keys: list


def load_recordings(cfg: PipelineConfig):
    if not cfg.dataset_path:
        raise ConfigError("no dataset path: set dataset_path, pass --data, or export GAZEPRIV_DATA")
    recs, errors = ingest(cfg.dataset_path, cfg.filename_pattern, cfg.fs)
    for path, msg in errors:
        log.warning("ingest failed for %s: %s", path, msg)
    if not recs:
        raise IngestError(f"no readable recordings under {cfg.dataset_path}")
    return recs, errors


def run_pipeline(cfg: PipelineConfig, recordings=None, stages=ALL_STAGES,
                 write_privatized: bool = False, write_labels: bool = False,
                 write_report: bool = True) -> RunResult:
    """Evaluate every configured privatizer over every recording."""
    ingest_errors = []
    if recordings is None:
        recordings, ingest_errors = load_recordings(cfg)
    cfg = replace(cfg, run_utility=cfg.run_utility and "utility" in stages,
                  run_privacy=cfg.run_privacy and "privacy" in stages)
    out_root = Path(cfg.output_dir)
    jobs = []
    for spec in cfg.privatizers:
        vdir = out_root / "variants" / variant_slug(spec)
        artifacts = {}
        if cfg.run_utility:
            artifacts["outcomes"] = str(vdir / "outcomes")
        if write_privatized:
            artifacts["privatized"] = str(vdir / "privatized")
            Path(artifacts["privatized"]).mkdir(parents=True, exist_ok=True)
        if write_labels:
            artifacts["labels"] = str(vdir / "labels")
        if spec["op"] == "fir":
            vdir.mkdir(parents=True, exist_ok=True)
            op = make_privatizer(spec, recordings[0].fs if recordings else 1000.0)
            assert isinstance(op, FIR)
            dump_fir_csv(op.coefficients, vdir / "fir_coefficients.csv")
        jobs.extend((rec, spec, cfg, artifacts) for rec in recordings)
    results = _map(jobs, cfg.workers)

    rows = []
    n = len(recordings)
    skipped_keys = []
    for v, spec in enumerate(cfg.privatizers):
        chunk = results[v * n:(v + 1) * n]
        ok = [r for r in chunk if r.ok]
        skipped_keys.extend(f"{variant_slug(spec)}:{r.key}: {r.error}" for r in chunk if not r.ok)
        fs = recordings[0].fs if recordings else 1000.0
        approach, variant = describe(spec, fs)
        init, lat_ms, lat_samples = latency_columns(spec, fs)
        vdir = out_root / "variants" / variant_slug(spec)
        utility = {}
        if cfg.run_utility:
            for c in cfg.classifiers:
                cell = summarize_utility(ok, c["name"])
                utility[c["name"]] = cell
                vdir.mkdir(parents=True, exist_ok=True)
                (vdir / f"summary_{c['name']}.json").write_text(
                    json.dumps(_cell_summary(ok, c["name"], cell), indent=2, sort_keys=True) + "\n")
        ir, note = (None, "privacy branch not run")
        if cfg.run_privacy:
            ir, note = summarize_privacy(ok, cfg, vdir / "privacy")
        rows.append(ReportRow(approach, variant, ir, utility, init, lat_ms, lat_samples, note,
                              len(ok), len(chunk) - len(ok), dict(spec)))
    if write_report and rows:
        emit_report(rows, out_root, [c["name"] for c in cfg.classifiers] if cfg.run_utility else [],
                    extra={"ingested": n + len(ingest_errors), "ingest_errors": len(ingest_errors),
                           "skipped": skipped_keys})
    return RunResult(rows, len(results) - len(skipped_keys), len(skipped_keys), len(results), skipped_keys)


def _cell_summary(results, classifier, cell: UtilityCell) -> dict:
    per_user: dict = {}
    for r in results:
        u = r.utility.get(classifier)
        if u is not None:
            per_user.setdefault(r.subject_id, []).extend(u["offsets"])
    doc = {"U50_E50": cell.U50_E50, "U95_E95": cell.U95_E95, "success_rate": cell.SR_pct,
           "per_user_E50": {}, "per_user_E95": {}, "excluded_users": [], "note": cell.note}
    try:
        s = summarize_accuracy(per_user, cell.SR_pct)
        doc.update(per_user_E50=s.per_user_E50, per_user_E95=s.per_user_E95,
                   excluded_users=s.excluded_users)
    except EmptyPopulation:
        doc["excluded_users"] = sorted(per_user)
    return doc
