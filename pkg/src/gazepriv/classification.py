"""Real-time fixation/saccade classification (I-DT and I-KF)."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np


class MovementLabel(enum.IntEnum):
    UNKNOWN = 0
    FIXATION = 1
    SACCADE = 2


@dataclass(frozen=True)
class FixationSegment:
    start_index: int
    end_index: int  # inclusive
    centroid_x: float
    centroid_y: float
    duration_ms: float
    onset_ms: float

    @property
    def n_samples(self) -> int:
        return self.end_index - self.start_index + 1


def velocity(p, fs: float) -> np.ndarray:
    """Instantaneous velocity in deg/s; the first sample gets 0."""
    p = np.asarray(p, dtype=float)
    v = np.zeros_like(p)
    v[1:] = (p[1:] - p[:-1]) * fs
    return v


def _segment(xs, ys, start, fs, t0) -> FixationSegment:
    n = len(xs)
    return FixationSegment(start, start + n - 1, float(np.mean(xs)), float(np.mean(ys)),
                           n * 1000.0 / fs, float(t0))


class IDTClassifier:
    """Streaming dispersion-threshold identification.

    The open window grows while (max x - min x) + (max y - min y) stays within
    the threshold. When a sample would break it, the window becomes a fixation
    if it already spans ``min_duration_ms``; otherwise samples are dropped
    from its front (labelled saccade) until the new sample fits. Labels of
    samples inside the open window are deferred until it closes.
    """

    def __init__(self, fs: float, dispersion_threshold: float = 0.5, min_duration_ms: float = 32.0):
        self.fs = float(fs)
        self.threshold = float(dispersion_threshold)
        self.min_duration_ms = float(min_duration_ms)
        self._i = 0
        self._start = 0
        self._xs: list[float] = []
        self._ys: list[float] = []
        self._ts: list[float] = []
        self._box = None

    def _long_enough(self, n):
        return n * 1000.0 / self.fs >= self.min_duration_ms - 1e-9

    def push(self, t: float, x: float, y: float):
        """Feed one sample; returns (finalized labels as (index, label) pairs, closed fixations)."""
        labels, fixations = [], []
        i = self._i
        self._i += 1
        if not self._xs:
            self._open(i, t, x, y)
            return labels, fixations
        x0, x1, y0, y1 = self._box
        nx0, nx1, ny0, ny1 = min(x0, x), max(x1, x), min(y0, y), max(y1, y)
        if (nx1 - nx0) + (ny1 - ny0) <= self.threshold:
            self._xs.append(x)
            self._ys.append(y)
            self._ts.append(t)
            self._box = (nx0, nx1, ny0, ny1)
            return labels, fixations
        if self._long_enough(len(self._xs)):
            fixations.append(_segment(self._xs, self._ys, self._start, self.fs, self._ts[0]))
            labels.extend((j, MovementLabel.FIXATION) for j in range(self._start, i))
            self._open(i, t, x, y)
            return labels, fixations
        # too short to be a fixation: shed the oldest samples until x fits
        xs, ys, ts = self._xs + [x], self._ys + [y], self._ts + [t]
        drop = 0
        while drop < len(xs) - 1 and _dispersion(xs[drop:], ys[drop:]) > self.threshold:
            drop += 1
        labels.extend((j, MovementLabel.SACCADE) for j in range(self._start, self._start + drop))
        self._start += drop
        self._xs, self._ys, self._ts = xs[drop:], ys[drop:], ts[drop:]
        self._box = (min(self._xs), max(self._xs), min(self._ys), max(self._ys))
        return labels, fixations

    def _open(self, i, t, x, y):
        self._start = i
        self._xs, self._ys, self._ts = [x], [y], [t]
        self._box = (x, x, y, y)

    def flush(self):
        """Close the stream, resolving the open window."""
        labels, fixations = [], []
        if self._xs:
            end = self._start + len(self._xs)
            if self._long_enough(len(self._xs)):
                fixations.append(_segment(self._xs, self._ys, self._start, self.fs, self._ts[0]))
                labels.extend((j, MovementLabel.FIXATION) for j in range(self._start, end))
            else:
                labels.extend((j, MovementLabel.SACCADE) for j in range(self._start, end))
            self._xs, self._ys, self._ts = [], [], []
        return labels, fixations


def _dispersion(xs, ys):
    return (max(xs) - min(xs)) + (max(ys) - min(ys))


class IKFClassifier:
    """Kalman-filter identification with a windowed chi-square test.

    Each channel runs a scalar Kalman filter on eye velocity (random-walk
    model, measurement variance ``deviation``). Per sample the squared
    difference between observed and predicted velocity, summed over both
    channels and divided by ``deviation``, is accumulated over the last
    ``window`` samples; a sum below ``chi_square`` means fixation. The filter
    is corrected on every sample, whatever the label, so a stale velocity
    estimate cannot lock the classifier into SACCADE. The first ``window - 1``
    samples are labelled UNKNOWN.
    """

    def __init__(self, fs: float, chi_square: float = 3.75, window: int = 5,
                 deviation: float = 1000.0, process_var: float = 10.0):
        self.fs = float(fs)
        self.chi_square = float(chi_square)
        self.window = int(window)
        self.deviation = float(deviation)
        self.process_var = float(process_var)
        self._i = 0
        self._prev = None
        self._v = [0.0, 0.0]
        self._P = [self.deviation, self.deviation]
        self._terms: list[float] = []

    def push(self, t: float, x: float, y: float) -> MovementLabel:
        i = self._i
        self._i += 1
        obs = (0.0, 0.0) if self._prev is None else ((x - self._prev[0]) * self.fs,
                                                     (y - self._prev[1]) * self.fs)
        self._prev = (x, y)
        P_pred = [p + self.process_var for p in self._P]
        resid = [o - v for o, v in zip(obs, self._v)]
        self._terms.append((resid[0] ** 2 + resid[1] ** 2) / self.deviation)
        if len(self._terms) > self.window:
            self._terms.pop(0)
        if i < self.window - 1:
            label = MovementLabel.UNKNOWN
        else:
            stat = sum(self._terms)
            label = MovementLabel.FIXATION if stat < self.chi_square else MovementLabel.SACCADE
        for c in range(2):
            k = P_pred[c] / (P_pred[c] + self.deviation)
            self._v[c] += k * resid[c]
            self._P[c] = (1.0 - k) * P_pred[c]
        return label


def segments_from_labels(labels, x, y, t, fs: float) -> list[FixationSegment]:
    """Group maximal runs of FIXATION labels into segments."""
    labels = np.asarray(labels)
    fix = labels == MovementLabel.FIXATION
    if not fix.any():
        return []
    edges = np.diff(np.concatenate([[0], fix.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [_segment(x[s:e], y[s:e], int(s), fs, t[s]) for s, e in zip(starts, ends)]


def idt_classify(x, y, fs: float, t=None, dispersion_threshold: float = 0.5,
                 min_duration_ms: float = 32.0):
    """Label a whole stream with :class:`IDTClassifier`. Returns (labels, fixations)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.arange(len(x)) * (1000.0 / fs) if t is None else np.asarray(t, dtype=float)
    clf = IDTClassifier(fs, dispersion_threshold, min_duration_ms)
    labels = np.full(len(x), MovementLabel.UNKNOWN, dtype=np.int8)
    fixations = []
    for ti, xi, yi in zip(t.tolist(), x.tolist(), y.tolist()):
        lab, fx = clf.push(ti, xi, yi)
        for j, l in lab:
            labels[j] = l
        fixations.extend(fx)
    lab, fx = clf.flush()
    for j, l in lab:
        labels[j] = l
    fixations.extend(fx)
    return labels, fixations


def ikf_labels(x, y, fs: float, chi_square: float = 3.75, window: int = 5,
               deviation: float = 1000.0, process_var: float = 10.0) -> np.ndarray:
    clf = IKFClassifier(fs, chi_square, window, deviation, process_var)
    return np.array([clf.push(0.0, xi, yi) for xi, yi in
                     zip(np.asarray(x, dtype=float).tolist(), np.asarray(y, dtype=float).tolist())],
                    dtype=np.int8)


def ikf_classify(x, y, fs: float, t=None, chi_square: float = 3.75, window: int = 5,
                 deviation: float = 1000.0, process_var: float = 10.0):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.arange(len(x)) * (1000.0 / fs) if t is None else np.asarray(t, dtype=float)
    labels = ikf_labels(x, y, fs, chi_square, window, deviation, process_var)
    return labels, segments_from_labels(labels, x, y, t, fs)


CLASSIFIERS = {
    "idt": (idt_classify, {"dispersion_threshold", "min_duration_ms"}),
    "ikf": (ikf_classify, {"chi_square", "window", "deviation", "process_var"}),
}


def classify(rec, spec: dict):
    """Run a classifier given a spec such as ``{"name": "idt"}`` on a filled recording."""
    spec = dict(spec)
    name = spec.pop("name")
    if name not in CLASSIFIERS:
        raise ValueError(f"unknown classifier {name!r}")
    fn, allowed = CLASSIFIERS[name]
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    return fn(rec.x, rec.y, rec.fs, t=rec.t, **spec)


def write_labels_csv(labels, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "label"])
        for i, l in enumerate(np.asarray(labels).tolist()):
            w.writerow([i, MovementLabel(l).name])
