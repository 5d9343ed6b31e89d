"""Gaze data model and the preprocessing applied before privatization.

A recording stores its samples column-wise (timestamps, x, y, validity) so that
operators can work on whole chunks; :class:`GazeSample` is the per-sample view
used by the streaming push interface.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np


class AllSamplesMissing(ValueError):
    pass


@dataclass(frozen=True)
class GazeSample:
    """One timestamped gaze observation in degrees of visual angle."""

    t: float
    x: float
    y: float
    valid: bool = True

    @classmethod
    def missing(cls, t: float) -> "GazeSample":
        return cls(t, float("nan"), float("nan"), False)


@dataclass(frozen=True)
class TargetEvent:
    onset_ms: float
    x: float
    y: float
    id: int


@dataclass(frozen=True)
class ScreenBounds:
    x_min: float = -23.3
    x_max: float = 23.3
    y_min: float = -18.5
    y_max: float = 11.7

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate screen bounds: {self}")

    def contains(self, x, y):
        # closed intervals: gaze exactly on the edge counts as on-screen
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)


@dataclass(frozen=True, eq=False)
class Recording:
    """A monocular gaze recording.

    ``x`` and ``y`` hold NaN wherever ``valid`` is False; the validity mask is
    the authoritative missing-data flag.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray
    fs: float
    subject_id: str = ""
    session_id: str = ""
    task_tag: str = ""
    targets: Optional[tuple[TargetEvent, ...]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        if n == 0:
            raise ValueError("recording must contain at least one sample")
        if not self.fs > 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")
        if not (len(self.x) == len(self.y) == len(self.valid) == n):
            raise ValueError("column lengths differ")
        if self.targets:
            onsets = [tg.onset_ms for tg in self.targets]
            if any(b <= a for a, b in zip(onsets, onsets[1:])):
                raise ValueError("target onsets must be strictly increasing")
            # a sample covers the period ending at its timestamp, so an onset
            # up to one period before the first sample is inside the span
            t0, t1 = self.t[0] - 1000.0 / self.fs, self.t[-1]
            if onsets[0] < t0 - 1e-9 or onsets[-1] > t1 + 1e-9:
                raise ValueError("target onsets fall outside the recording span")

    @classmethod
    def from_arrays(cls, x, y, fs: float, t=None, **kwargs) -> "Recording":
        """Build a recording from position arrays; NaN marks missing samples."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if t is None:
            t = np.arange(len(x)) * (1000.0 / fs)
        valid = ~(np.isnan(x) | np.isnan(y))
        x = np.where(valid, x, np.nan)
        y = np.where(valid, y, np.nan)
        return cls(np.asarray(t, dtype=float), x, y, valid, fs, **kwargs)

    @classmethod
    def from_samples(cls, samples: Sequence[GazeSample], fs: float, **kwargs) -> "Recording":
        t = np.array([s.t for s in samples], dtype=float)
        valid = np.array([s.valid for s in samples], dtype=bool)
        x = np.array([s.x if s.valid else np.nan for s in samples], dtype=float)
        y = np.array([s.y if s.valid else np.nan for s in samples], dtype=float)
        return cls(t, x, y, valid, fs, **kwargs)

    def __len__(self):
        return len(self.t)

    def samples(self) -> Iterator[GazeSample]:
        for t, x, y, v in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.valid.tolist()):
            yield GazeSample(t, x, y, v)

    def with_columns(self, **changes) -> "Recording":
        return replace(self, **changes)

    @property
    def key(self) -> str:
        return f"S{self.subject_id}_{self.session_id}_{self.task_tag}"

    @property
    def duration_ms(self) -> float:
        return float(self.t[-1] - self.t[0]) + 1000.0 / self.fs


def clamp_offscreen(rec: Recording, bounds: ScreenBounds = ScreenBounds()) -> Recording:
    """Mark samples that fall outside the screen as missing (both channels)."""
    with np.errstate(invalid="ignore"):
        inside = bounds.contains(rec.x, rec.y)
    valid = rec.valid & inside
    if np.array_equal(valid, rec.valid):
        return rec
    return rec.with_columns(
        x=np.where(valid, rec.x, np.nan),
        y=np.where(valid, rec.y, np.nan),
        valid=valid,
    )


def forward_fill_indices(valid: np.ndarray) -> np.ndarray:
    """Index of the most recent valid sample for every position.

    A missing prefix points at the first valid sample.
    """
    if not valid.any():
        raise AllSamplesMissing("recording has no valid samples")
    idx = np.where(valid, np.arange(len(valid)), 0)
    np.maximum.accumulate(idx, out=idx)
    first = int(np.argmax(valid))
    idx[:first] = first
    return idx


def forward_fill(rec: Recording) -> Recording:
    if rec.valid.all():
        return rec
    idx = forward_fill_indices(rec.valid)
    return rec.with_columns(
        x=rec.x[idx], y=rec.y[idx], valid=np.ones(len(rec), dtype=bool)
    )


def data_loss_rate(rec: Recording) -> float:
    return float(np.count_nonzero(~rec.valid)) / len(rec)


def preprocess(rec: Recording, bounds: ScreenBounds = ScreenBounds()) -> Recording:
    """Off-screen removal followed by forward-fill."""
    return forward_fill(clamp_offscreen(rec, bounds))
