"""Report rows in the privacy-utility table layout (CSV, JSON and text)."""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..privatizers import make_privatizer

APPROACH_ORDER = (
    "Baseline", "Median Filter", "Temporal Sampling (Hz)", "Smoothing (window)",
    "Gaussian Noise", "Targeted Noise Injection", "Causal FIR (cutoff/taps)", "Kalman Filter",
)
CLASSIFIER_TITLES = {"idt": "IDT", "ikf": "IKF"}


@dataclass
class UtilityCell:
    U50_E50: Optional[float] = None
    U95_E95: Optional[float] = None
    SR_pct: Optional[float] = None
    fixations: int = 0
    note: str = ""


@dataclass
class ReportRow:
    approach: str
    variant: str
    rank1_ir_pct: Optional[float]
    utility: dict  # classifier name -> UtilityCell
    initialization_samples: int
    latency_ms: int
    latency_samples: str = "0"
    rank1_note: str = ""
    recordings_processed: int = 0
    recordings_skipped: int = 0
    spec: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["utility"] = {k: asdict(v) if isinstance(v, UtilityCell) else v for k, v in self.utility.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["utility"] = {k: UtilityCell(**v) for k, v in d["utility"].items()}
        return cls(**d)


def describe(spec: dict, fs: float = 1000.0) -> tuple[str, str]:
    """Approach and variant labels for a privatizer spec."""
    op = spec["op"]
    if op == "identity":
        return "Baseline", "Raw data"
    if op == "median3":
        return "Median Filter", "3-sample"
    if op == "downsample":
        return "Temporal Sampling (Hz)", str(int(fs // spec["factor"]))
    if op == "gaussian":
        return "Gaussian Noise", f"var={spec['variance']:g}"
    if op == "lwma":
        return "Smoothing (window)", str(spec["window"])
    if op == "targeted_noise":
        return "Targeted Noise Injection", "2D Laplace"
    if op == "fir":
        return "Causal FIR (cutoff/taps)", f"{spec['fc_hz']:g}/{spec['taps']}"
    if op == "kalman":
        return "Kalman Filter", "-"
    return op, ""


def latency_columns(spec: dict, fs: float = 1000.0):
    """(initialization samples, latency in whole ms, exact latency in samples)."""
    meta = make_privatizer(spec, fs, seed=0).meta
    return meta.initialization_samples, meta.reported_latency_ms(fs), str(meta.latency_samples)


def _natural(s):
    return [(0, float(p), "") if re.fullmatch(r"\d+(\.\d+)?", p) else (1, 0.0, p)
            for p in re.split(r"([0-9.]+)", s) if p]


def sort_rows(rows: Sequence[ReportRow]) -> list[ReportRow]:
    """Order by approach (table order, unknown ones last), then variant; stable."""
    def key(r):
        rank = APPROACH_ORDER.index(r.approach) if r.approach in APPROACH_ORDER else len(APPROACH_ORDER)
        return (rank, r.approach if rank == len(APPROACH_ORDER) else "", _natural(r.variant))
    return sorted(rows, key=key)


def _fmt(v, digits=2):
    return "" if v is None else f"{v:.{digits}f}"


def columns(classifiers: Sequence[str]) -> list[str]:
    cols = ["Approach", "Variant", "Rank-1 IR (%)"]
    for c in classifiers:
        t = CLASSIFIER_TITLES.get(c, c.upper())
        cols += [f"{t} U50|E50", f"{t} U95|E95", f"{t} SR (%)"]
    return cols + ["Initialization", "Latency (ms)"]


def table_cells(row: ReportRow, classifiers: Sequence[str]) -> list[str]:
    cells = [row.approach, row.variant, _fmt(row.rank1_ir_pct)]
    for c in classifiers:
        u = row.utility.get(c, UtilityCell())
        cells += [_fmt(u.U50_E50), _fmt(u.U95_E95), _fmt(u.SR_pct)]
    return cells + [str(row.initialization_samples), str(row.latency_ms)]


def render_text(rows: Sequence[ReportRow], classifiers: Sequence[str]) -> str:
    head = columns(classifiers)
    body = [table_cells(r, classifiers) for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for b in body:
        lines.append("  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(b, widths))))
    notes = [f"{r.approach} / {r.variant}: {r.rank1_note}" for r in rows if r.rank1_note]
    for r in rows:
        for c in classifiers:
            u = r.utility.get(c)
            if u is not None and u.note:
                notes.append(f"{r.approach} / {r.variant} [{CLASSIFIER_TITLES.get(c, c)}]: {u.note}")
    if notes:
        lines.append("")
        lines.append("Notes:")
        lines.extend(f"  {n}" for n in notes)
    return "\n".join(lines) + "\n"


def render_csv(rows: Sequence[ReportRow], classifiers: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns(classifiers) + ["Rank-1 note"])
    for r in rows:
        w.writerow(table_cells(r, classifiers) + [r.rank1_note])
    return buf.getvalue()


def emit_report(rows: Sequence[ReportRow], out_dir, classifiers: Sequence[str], extra: Optional[dict] = None):
    """Write report.csv, report.json and report.txt; returns the sorted rows."""
    if not rows:
        raise ValueError("nothing to report")
    rows = sort_rows(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render_text(rows, classifiers))
    (out / "report.csv").write_text(render_csv(rows, classifiers))
    doc = {"classifiers": list(classifiers), "rows": [r.to_dict() for r in rows]}
    if extra:
        doc.update(extra)
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return rows


def load_report(path):
    doc = json.loads(Path(path).read_text())
    return [ReportRow.from_dict(r) for r in doc["rows"]], doc.get("classifiers", ["idt", "ikf"]), doc
