"""Re-identification metric: velocity windows, embeddings and Rank-1 IR."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .classification import velocity
from .signal import Recording

WINDOW_SAMPLES = 5000
REQUIRED_FS = 1000.0
VELOCITY_LIMIT = 1000.0


class RateMismatch(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class ZeroNorm(ValueError):
    pass


class EmptyMatrix(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VelocityWindow:
    subject_id: str
    session_id: str
    task_tag: str
    index: int
    channels: np.ndarray  # shape (2, WINDOW_SAMPLES), deg/s or z-scores

    @property
    def key(self):
        return (self.subject_id, self.session_id, self.task_tag, self.index)


def make_velocity_windows(rec: Recording, window: int = WINDOW_SAMPLES,
                          limit: float = VELOCITY_LIMIT) -> list[VelocityWindow]:
    """Clamped horizontal/vertical velocity in non-overlapping windows.

    Missing positions yield NaN velocities, which survive until normalization.
    The trailing partial window is dropped.
    """
    if abs(rec.fs - REQUIRED_FS) > 1e-9:
        raise RateMismatch(
            f"{rec.key}: velocity windows are {window} samples at {REQUIRED_FS:g} Hz; "
            f"stream is sampled at {rec.fs:g} Hz")
    v = np.vstack([velocity(rec.x, rec.fs), velocity(rec.y, rec.fs)])
    with np.errstate(invalid="ignore"):
        v = np.clip(v, -limit, limit)
    n = v.shape[1] // window
    return [VelocityWindow(rec.subject_id, rec.session_id, rec.task_tag, k,
                           v[:, k * window:(k + 1) * window].copy()) for k in range(n)]


@dataclass(frozen=True)
class ZScoreStats:
    mean: tuple
    std: tuple

    def to_dict(self):
        return {"mean": [float(m) for m in self.mean], "std": [float(s) for s in self.std]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["mean"]), tuple(d["std"]))


def zscore_stats(windows: Sequence[VelocityWindow]) -> ZScoreStats:
    if not windows:
        raise ValueError("need at least one window")
    stacked = np.concatenate([w.channels for w in windows], axis=1)
    mean = np.nanmean(stacked, axis=1)
    std = np.nanstd(stacked, axis=1)
    if not np.all(std > 0):
        raise ZeroVariance(f"zero velocity variance on a channel (std={std.tolist()})")
    return ZScoreStats(tuple(mean.tolist()), tuple(std.tolist()))


def apply_zscore(windows: Sequence[VelocityWindow], stats: ZScoreStats) -> list[VelocityWindow]:
    mean = np.asarray(stats.mean)[:, None]
    std = np.asarray(stats.std)[:, None]
    out = []
    for w in windows:
        z = (w.channels - mean) / std
        out.append(replace(w, channels=np.nan_to_num(z, nan=0.0)))
    return out


def corpus_zscore(windows: Sequence[VelocityWindow]):
    """Normalize every window with per-channel statistics of the whole corpus."""
    stats = zscore_stats(windows)
    return apply_zscore(windows, stats), stats


class Embedder(Protocol):
    name: str
    dim: int

    def __call__(self, window: VelocityWindow) -> np.ndarray: ...


_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
_LAGS = (1, 2, 4, 8, 16, 32)
_BANDS_HZ = (0, 10, 20, 40, 80, 160, 320, 501)
_SPEED_EDGES = np.concatenate([[0.0], np.geomspace(0.01, 10.0, 15), [np.inf]])
_FIX_CLIP = 0.5  # z-units; keeps saccades from swamping fixational structure


def _slog(v, gain=1.0):
    return np.sign(v) * np.log1p(gain * np.abs(v))


class StatsEmbedder:
    """Hand-built 64-dim velocity descriptor.

    A deterministic stand-in for a trained network, used to exercise the
    metric end to end. Works on z-scored velocity. Per channel (24 values):
    five quantiles, spread and mean magnitude, the share of samples beyond
    the fixational clip, then autocorrelation at six lags, root power in seven
    frequency bands, mean absolute sample-to-sample change, a second spread
    and the zero-crossing rate, all measured on the clipped signal, where
    jitter and tremor live. Shared (16): root fractions of a log-spaced speed
    histogram. On an all-zero window every feature is 0 except the first
    histogram bin, which is 1.
    """

    name = "stats"
    dim = 64

    def __init__(self, fs: float = REQUIRED_FS):
        self.fs = fs

    def _channel(self, v):
        c = np.clip(v, -_FIX_CLIP, _FIX_CLIP)
        d = c - c.mean()
        var = float(np.mean(d * d))
        if var > 0:
            acf = [float(np.mean(d[:-k] * d[k:])) / var for k in _LAGS]
        else:
            acf = [0.0] * len(_LAGS)
        power = np.abs(np.fft.rfft(d)) ** 2
        freqs = np.fft.rfftfreq(len(v), 1.0 / self.fs)
        total = power.sum()
        bands = [float(np.sqrt(power[(freqs >= lo) & (freqs < hi)].sum() / total)) if total > 0 else 0.0
                 for lo, hi in zip(_BANDS_HZ[:-1], _BANDS_HZ[1:])]
        inner = np.clip(v, -0.1 * _FIX_CLIP, 0.1 * _FIX_CLIP)
        crossings = float(np.mean(np.signbit(d[1:]) != np.signbit(d[:-1]))) if var > 0 else 0.0
        return (
            _slog(np.quantile(v, _QUANTILES), 10.0).tolist()
            + [float(_slog(10.0 * var ** 0.5)), float(_slog(np.abs(v).mean())),
               float(np.mean(np.abs(v) > _FIX_CLIP))]
            + acf + bands
            + [float(_slog(np.abs(np.diff(c)).mean(), 10.0)), float(_slog(100.0 * inner.std())),
               crossings]
        )

    def __call__(self, window: VelocityWindow) -> np.ndarray:
        ch = np.asarray(window.channels, dtype=float)
        speed = np.hypot(ch[0], ch[1])
        hist = np.histogram(speed, bins=_SPEED_EDGES)[0] / speed.size
        return np.array(self._channel(ch[0]) + self._channel(ch[1]) + np.sqrt(hist).tolist())


class ConcatEmbedder:
    """Ensemble: concatenation of several embedders' outputs."""

    def __init__(self, members: Sequence[Embedder]):
        self.members = list(members)
        self.name = "concat(" + ",".join(m.name for m in self.members) + ")"
        self.dim = sum(m.dim for m in self.members)

    def __call__(self, window):
        return np.concatenate([embed(window, m) for m in self.members])


class PrecomputedEmbedder:
    """Looks windows up in an embedding matrix written by an external model."""

    name = "precomputed"

    def __init__(self, path):
        self.matrix, sidecar = read_embeddings(path)
        self.dim = int(sidecar["dimension"])
        self._rows = {(r["subject_id"], r["session_id"], r["task_tag"], int(r["index"])): i
                      for i, r in enumerate(sidecar["rows"])}

    def __call__(self, window):
        try:
            return self.matrix[self._rows[window.key]]
        except KeyError:
            raise KeyError(f"no precomputed embedding for window {window.key}") from None


def embed(window: VelocityWindow, embedder: Embedder) -> np.ndarray:
    vec = np.asarray(embedder(window), dtype=float)
    if vec.ndim != 1 or vec.size != embedder.dim:
        raise DimensionMismatch(f"{embedder.name} produced shape {vec.shape}, expected ({embedder.dim},)")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{embedder.name} produced non-finite values")
    return vec


def embed_all(windows: Sequence[VelocityWindow], embedder: Embedder) -> np.ndarray:
    if not windows:
        return np.empty((0, embedder.dim))
    return np.vstack([embed(w, embedder) for w in windows])


def similarity_matrix(enroll, auth) -> np.ndarray:
    """Cosine similarity, enrollment rows by authentication columns."""
    enroll = np.atleast_2d(np.asarray(enroll, dtype=float))
    auth = np.atleast_2d(np.asarray(auth, dtype=float))
    if enroll.shape[1] != auth.shape[1]:
        raise DimensionMismatch(f"embedding dimensions differ: {enroll.shape[1]} vs {auth.shape[1]}")
    ne = np.linalg.norm(enroll, axis=1)
    na = np.linalg.norm(auth, axis=1)
    if np.any(ne == 0) or np.any(na == 0):
        raise ZeroNorm("an embedding has zero norm")
    return (enroll / ne[:, None]) @ (auth / na[:, None]).T


def rank1_ir(S, Y) -> float:
    """Percentage of probes (columns) whose best-scoring gallery row is a true match.

    Ties go to the lowest gallery index; a probe without any true match in
    the gallery counts as a miss.
    """
    S = np.asarray(S, dtype=float)
    Y = np.asarray(Y)
    if S.shape != Y.shape:
        raise ValueError(f"shape mismatch: S {S.shape} vs Y {Y.shape}")
    if S.ndim != 2 or S.size == 0:
        raise EmptyMatrix("similarity matrix is empty")
    best = np.argmax(S, axis=0)
    hits = Y[best, np.arange(S.shape[1])] == 1
    return 100.0 * float(np.count_nonzero(hits)) / S.shape[1]


def ground_truth(enroll_ids: Sequence[str], auth_ids: Sequence[str]) -> np.ndarray:
    return (np.asarray(enroll_ids, dtype=object)[:, None]
            == np.asarray(auth_ids, dtype=object)[None, :]).astype(np.int8)


@dataclass
class PrivacyResult:
    rank1_ir: Optional[float]
    n_enroll: int
    n_auth: int
    reason: str = ""
    stats: Optional[ZScoreStats] = None


def evaluate_privacy(windows: Sequence[VelocityWindow], embedder: Embedder,
                     enroll_session: str = "1", auth_session: str = "2") -> PrivacyResult:
    """Corpus z-score, embed, and score session-to-session identification."""
    if not windows:
        return PrivacyResult(None, 0, 0, "no velocity windows")
    normed, stats = corpus_zscore(windows)
    enroll = [w for w in normed if w.session_id == enroll_session]
    auth = [w for w in normed if w.session_id == auth_session]
    if not enroll or not auth:
        return PrivacyResult(None, len(enroll), len(auth),
                             "enrollment or authentication set is empty", stats)
    S = similarity_matrix(embed_all(enroll, embedder), embed_all(auth, embedder))
    Y = ground_truth([w.subject_id for w in enroll], [w.subject_id for w in auth])
    return PrivacyResult(rank1_ir(S, Y), len(enroll), len(auth), "", stats)


def write_embeddings(matrix, windows: Sequence[VelocityWindow], path, embedder_name: str = "") -> None:
    """Write ``<path>.csv`` (one row per window) and ``<path>.json`` (sidecar)."""
    path = Path(path)
    matrix = np.asarray(matrix, dtype=float)
    with open(path.with_suffix(".csv"), "w", newline="") as f:
        w = csv.writer(f)
        for row in matrix.tolist():
            w.writerow([repr(v) for v in row])
    sidecar = {
        "dimension": int(matrix.shape[1]) if matrix.ndim == 2 else 0,
        "embedder": embedder_name,
        "rows": [{"subject_id": w.subject_id, "session_id": w.session_id,
                  "task_tag": w.task_tag, "index": w.index} for w in windows],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def read_embeddings(path):
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    matrix = np.loadtxt(path.with_suffix(".csv"), delimiter=",", ndmin=2)
    if matrix.shape != (len(sidecar["rows"]), sidecar["dimension"]):
        raise DimensionMismatch(f"{path}: matrix shape {matrix.shape} disagrees with sidecar")
    return matrix, sidecar


def write_window_csv(window: VelocityWindow, path) -> None:
    np.savetxt(path, window.channels.T, delimiter=",", header="vx,vy", comments="", fmt="%.17g")


EMBEDDERS: dict[str, Callable[..., Embedder]] = {
    "stats": StatsEmbedder,
    "precomputed": PrecomputedEmbedder,
}


def make_embedder(spec: dict) -> Embedder:
    spec = dict(spec)
    name = spec.pop("name", "stats")
    if name == "concat":
        return ConcatEmbedder([make_embedder(m) for m in spec["members"]])
    if name not in EMBEDDERS:
        raise ValueError(f"unknown embedder {name!r}")
    return EMBEDDERS[name](**spec)
