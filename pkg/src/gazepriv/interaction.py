"""Dwell-based gaze interaction simulation and spatial-accuracy summaries."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .classification import FixationSegment, _segment
from .signal import Recording, TargetEvent


class NoTargets(ValueError):
    pass


class DegenerateVector(ValueError):
    pass


class EmptyPopulation(ValueError):
    pass


@dataclass(frozen=True)
class TargetWindow:
    target: TargetEvent
    start_ms: float
    end_ms: float  # exclusive
    start_index: int
    end_index: int  # exclusive

    @property
    def n_samples(self) -> int:
        return self.end_index - self.start_index


@dataclass(frozen=True)
class InteractionOutcome:
    target_id: int
    valid: bool
    trigger_x: Optional[float] = None
    trigger_y: Optional[float] = None
    offset_dva: Optional[float] = None
    fixation_count: int = 0


def segment_by_target(rec: Recording, window_ms: float = 1000.0) -> list[TargetWindow]:
    """One window per target: [onset, onset + window_ms), cut at the next onset."""
    if not rec.targets:
        raise NoTargets(f"recording {rec.key} has no target track")
    onsets = [tg.onset_ms for tg in rec.targets]
    out = []
    for k, tg in enumerate(rec.targets):
        end = tg.onset_ms + window_ms
        if k + 1 < len(onsets):
            end = min(end, onsets[k + 1])
        i0 = int(np.searchsorted(rec.t, tg.onset_ms, side="left"))
        i1 = int(np.searchsorted(rec.t, end, side="left"))
        out.append(TargetWindow(tg, tg.onset_ms, end, i0, i1))
    return out


def _direction(p):
    a, b = math.radians(p[0]), math.radians(p[1])
    v = np.array([math.tan(a), math.tan(b), 1.0])
    n = float(np.linalg.norm(v))
    if not (n > 0 and math.isfinite(n)):
        raise DegenerateVector(f"cannot form a gaze direction from {p}")
    return v / n


def angular_offset(gaze, target) -> float:
    """Angle in degrees between the viewing directions of two dva positions.

    A position (h, v) maps to the direction (tan h, tan v, 1). The angle
    equals arccos of the normalized dot product; atan2 of the cross and dot
    products is used because it stays accurate for nearly equal directions.
    """
    g = _direction(gaze)
    t = _direction(target)
    return math.degrees(math.atan2(float(np.linalg.norm(np.cross(g, t))), float(g @ t)))


def rank1_fixation(fixations: Sequence[FixationSegment], target: TargetEvent,
                   dwell_ms: float = 100.0) -> InteractionOutcome:
    """Pick the dwell-qualified fixation closest to the target.

    Distance is 2-D Euclidean in dva. Equal distances go to the earliest
    onset.
    """
    candidates = [f for f in fixations if f.duration_ms >= dwell_ms - 1e-9]
    if not candidates:
        return InteractionOutcome(target.id, False, fixation_count=len(fixations))
    best = min(candidates, key=lambda f: (math.hypot(f.centroid_x - target.x, f.centroid_y - target.y),
                                          f.onset_ms, f.start_index))
    return InteractionOutcome(
        target.id, True, best.centroid_x, best.centroid_y,
        angular_offset((best.centroid_x, best.centroid_y), (target.x, target.y)),
        len(fixations),
    )


def fixations_in_window(fixations: Iterable[FixationSegment], win: TargetWindow,
                        rec: Optional[Recording] = None) -> list[FixationSegment]:
    """Fixations overlapping the target window, clipped to it.

    A fixation that is already under way at target onset (or runs past the
    window end) only contributes its in-window samples: duration and centroid
    are recomputed from those. Without ``rec`` the fixations are selected by
    onset instead and left unclipped.
    """
    if rec is None:
        return [f for f in fixations if win.start_ms <= f.onset_ms < win.end_ms]
    out = []
    for f in fixations:
        s = max(f.start_index, win.start_index)
        e = min(f.end_index + 1, win.end_index)
        if e <= s:
            continue
        if s == f.start_index and e == f.end_index + 1:
            out.append(f)
        else:
            out.append(_segment(rec.x[s:e], rec.y[s:e], s, rec.fs, float(rec.t[s])))
    return out


def simulate_interactions(rec: Recording, fixations: Sequence[FixationSegment],
                          dwell_ms: float = 100.0, window_ms: float = 1000.0) -> list[InteractionOutcome]:
    """One outcome per target, from the fixations inside its window."""
    return [rank1_fixation(fixations_in_window(fixations, w, rec), w.target, dwell_ms)
            for w in segment_by_target(rec, window_ms)]


def success_rate(outcomes: Sequence[InteractionOutcome], total_targets: Optional[int] = None) -> float:
    """Percentage of valid interactions; total defaults to the number of outcomes."""
    total = len(outcomes) if total_targets is None else total_targets
    if total <= 0:
        return 0.0
    return 100.0 * sum(1 for o in outcomes if o.valid) / total


def percentile(values, q: float) -> float:
    # linear interpolation between closest ranks, inclusive
    return float(np.percentile(np.asarray(values, dtype=float), q, method="linear"))


@dataclass
class AccuracySummary:
    per_user_E50: dict
    per_user_E95: dict
    U50_E50: float
    U95_E95: float
    success_rate: Optional[float] = None
    excluded_users: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def summarize_accuracy(per_user_offsets: Mapping[str, Sequence[float]],
                       success_rate: Optional[float] = None) -> AccuracySummary:
    """User-level E50/E95 and population-level U50|E50, U95|E95.

    Users with no valid offsets are left out of the population statistics and
    listed in ``excluded_users``.
    """
    e50, e95, excluded = {}, {}, []
    for user in sorted(per_user_offsets):
        offs = [o for o in per_user_offsets[user] if o is not None]
        if not offs:
            excluded.append(user)
            continue
        e50[user] = percentile(offs, 50)
        e95[user] = percentile(offs, 95)
    if not e50:
        raise EmptyPopulation("no user has a valid interaction")
    return AccuracySummary(e50, e95, percentile(list(e50.values()), 50),
                           percentile(list(e95.values()), 95), success_rate, excluded)


def write_outcomes_csv(outcomes: Sequence[InteractionOutcome], path) -> None:
    def fmt(v):
        return "" if v is None else repr(float(v))

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["target_id", "valid", "trigger_x", "trigger_y", "offset_dva"])
        for o in outcomes:
            w.writerow([o.target_id, int(o.valid), fmt(o.trigger_x), fmt(o.trigger_y), fmt(o.offset_dva)])
