"""Causal, push-driven gaze privatization operators.

Every operator accepts one sample at a time through :meth:`push` or a block of
samples through :meth:`process`; both paths share one implementation, so
block-wise and sample-wise processing give bit-identical results.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .classification import MovementLabel
from .signal import GazeSample, Recording


class InvalidParameter(ValueError):
    pass


class InvalidFactor(InvalidParameter):
    pass


class InvalidVariance(InvalidParameter):
    pass


class InvalidWindow(InvalidParameter):
    pass


class InvalidBudget(InvalidParameter):
    pass


class InvalidCutoff(InvalidParameter):
    pass


class NonFiniteState(ArithmeticError):
    pass


@dataclass(frozen=True)
class PrivatizerMeta:
    name: str
    initialization_samples: int
    latency_samples: Fraction

    def latency_ms(self, fs: float) -> Fraction:
        return self.latency_samples * 1000 / Fraction(fs).limit_denominator(10**6)

    def reported_latency_ms(self, fs: float) -> int:
        # whole milliseconds, rounded down
        return math.floor(self.latency_ms(fs))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


class StreamingPrivatizer:
    """Base class: subclasses implement :meth:`_process` on column blocks."""

    name = "identity"
    needs_labels = False

    def __init__(self):
        self._held = None  # last valid (x, y), for internal forward-hold

    @property
    def meta(self) -> PrivatizerMeta:
        return PrivatizerMeta(self.name, 0, Fraction(0))

    def output_fs(self, fs: float) -> float:
        return fs

    @property
    def warmup_samples(self) -> int:
        return 0

    def push(self, sample: GazeSample, label: Optional[int] = None) -> list[GazeSample]:
        labels = None if label is None else np.array([label])
        t, x, y, v = self.process(
            np.array([sample.t]), np.array([sample.x]), np.array([sample.y]),
            np.array([sample.valid]), labels,
        )
        return [GazeSample(*s) for s in zip(t.tolist(), x.tolist(), y.tolist(), v.tolist())]

    def process(self, t, x, y, valid, labels=None):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        valid = np.asarray(valid, dtype=bool)
        if self.needs_labels and labels is None:
            raise ValueError(f"{self.name} requires per-sample movement labels")
        return self._process(t, x, y, valid, labels)

    def _process(self, t, x, y, valid, labels):
        return t, x.copy(), y.copy(), valid.copy()

    def _hold(self, x, y, valid):
        """Forward-hold missing samples using state carried across blocks.

        Returns filled copies plus a mask of samples preceding the first valid
        sample of the stream, which cannot be filled causally.
        """
        n = len(x)
        xs = np.empty(n + 1)
        ys = np.empty(n + 1)
        ok = np.empty(n + 1, dtype=bool)
        if self._held is None:
            xs[0] = ys[0] = np.nan
            ok[0] = False
        else:
            xs[0], ys[0] = self._held
            ok[0] = True
        xs[1:], ys[1:], ok[1:] = x, y, valid
        idx = np.where(ok, np.arange(n + 1), 0)
        np.maximum.accumulate(idx, out=idx)
        before_first = ~ok[idx]
        fx, fy = xs[idx], ys[idx]
        if ok.any():
            last = idx[-1]
            self._held = (float(xs[last]), float(ys[last]))
        return fx[1:], fy[1:], before_first[1:]


Identity = StreamingPrivatizer


class Median3(StreamingPrivatizer):
    """Causal three-sample median, padded with two copies of the first sample."""

    name = "median3"

    def __init__(self):
        super().__init__()
        self._hist = None  # (x[n-2], x[n-1]), (y[n-2], y[n-1])

    @property
    def meta(self):
        return PrivatizerMeta(self.name, 0, Fraction(1))

    def _process(self, t, x, y, valid, labels):
        fx, fy, pending = self._hold(x, y, valid)
        outx = np.full(len(x), np.nan)
        outy = np.full(len(y), np.nan)
        live = ~pending
        if live.any():
            cx, cy = fx[live], fy[live]
            if self._hist is None:
                self._hist = ((cx[0], cx[0]), (cy[0], cy[0]))
            (hx, hy) = self._hist
            ex = np.concatenate([hx, cx])
            ey = np.concatenate([hy, cy])
            outx[live] = _median3(ex[:-2], ex[1:-1], ex[2:])
            outy[live] = _median3(ey[:-2], ey[1:-1], ey[2:])
            self._hist = ((ex[-2], ex[-1]), (ey[-2], ey[-1]))
        return t.copy(), outx, outy, live


def _median3(a, b, c):
    return np.maximum(np.minimum(a, b), np.minimum(np.maximum(a, b), c))


class Downsample(StreamingPrivatizer):
    """Keep every ``factor``-th sample, starting with input index factor-1."""

    name = "downsample"

    def __init__(self, factor: int):
        super().__init__()
        if int(factor) != factor or factor < 1:
            raise InvalidFactor(f"decimation factor must be a positive integer, got {factor}")
        self.factor = int(factor)
        self._count = 0

    @property
    def meta(self):
        return PrivatizerMeta(self.name, self.factor - 1, Fraction(0))

    def output_fs(self, fs):
        return fs / self.factor

    def _process(self, t, x, y, valid, labels):
        idx = self._count + np.arange(len(t))
        keep = idx % self.factor == self.factor - 1
        self._count += len(t)
        return t[keep], x[keep], y[keep], valid[keep]


class GaussianNoise(StreamingPrivatizer):
    """Additive zero-mean Gaussian noise, drawn x-then-y for every sample."""

    name = "gaussian"

    def __init__(self, variance: float, seed=None):
        super().__init__()
        if not variance > 0:
            raise InvalidVariance(f"noise variance must be positive, got {variance}")
        self.variance = float(variance)
        self.sigma = math.sqrt(self.variance)
        self.rng = make_rng(seed)

    def _process(self, t, x, y, valid, labels):
        # draw for every sample, including missing ones, so the stream of
        # draws stays aligned with sample indices
        noise = self.rng.standard_normal((len(t), 2)) * self.sigma
        outx = np.where(valid, x + noise[:, 0], x)
        outy = np.where(valid, y + noise[:, 1], y)
        return t.copy(), outx, outy, valid.copy()


class LWMA(StreamingPrivatizer):
    """Causal linearly weighted moving average over ``window`` samples.

    The weight of the input ``k`` samples in the past is ``k + 1``, so the
    weights run from 1 to B across the window and sum to B(B+1)/2. The weight
    centroid sits 2(B-1)/3 samples in the past. The window starts zero-padded.
    """

    name = "lwma"

    def __init__(self, window: int):
        super().__init__()
        if int(window) != window or window < 1:
            raise InvalidWindow(f"window must be a positive integer, got {window}")
        self.window = B = int(window)
        self.denom = B * (B + 1) // 2
        # weights[k] multiplies s[i - k]
        self.weights = np.arange(1, B + 1, dtype=float) / self.denom
        self._buf = (np.zeros(B - 1), np.zeros(B - 1))

    @property
    def meta(self):
        B = self.window
        return PrivatizerMeta(self.name, B - 1, Fraction(2 * (B - 1), 3))

    @property
    def warmup_samples(self):
        return self.window - 1

    def _process(self, t, x, y, valid, labels):
        fx, fy, pending = self._hold(x, y, valid)
        live = ~pending
        outx = np.full(len(x), np.nan)
        outy = np.full(len(y), np.nan)
        if live.any():
            bx, by = self._buf
            ex = np.concatenate([bx, fx[live]])
            ey = np.concatenate([by, fy[live]])
            outx[live] = _causal_weighted_sum(ex, self.weights)
            outy[live] = _causal_weighted_sum(ey, self.weights)
            keep = self.window - 1
            self._buf = (ex[len(ex) - keep:], ey[len(ey) - keep:])
        return t.copy(), outx, outy, live


def _causal_weighted_sum(ext, weights):
    """out[j] = sum_k weights[k] * ext[j + L - 1 - k] for an L-tap kernel.

    ``ext`` is the L-1 sample history followed by the new block. Terms are
    accumulated in a fixed order so the result does not depend on block size.
    """
    L = len(weights)
    n = len(ext) - (L - 1)
    acc = np.zeros(n)
    for k in range(L):
        start = L - 1 - k
        acc += weights[k] * ext[start:start + n]
    return acc


class TargetedNoise(StreamingPrivatizer):
    """Planar Laplace noise applied to saccade samples only.

    Displacement direction is uniform on [0, 2pi); the radius is exponential
    with mean ``radius / epsilon`` (``interpretation="scale"``) or with that
    value as its rate (``interpretation="rate"``).
    """

    name = "targeted_noise"
    needs_labels = True

    def __init__(self, radius: float = 1.5, epsilon: float = 0.5, seed=None,
                 interpretation: str = "scale"):
        super().__init__()
        if not (radius > 0 and epsilon > 0):
            raise InvalidBudget(f"radius and epsilon must be positive, got r={radius}, eps={epsilon}")
        if interpretation not in ("scale", "rate"):
            raise InvalidParameter(f"unknown exponential interpretation {interpretation!r}")
        self.radius = float(radius)
        self.epsilon = float(epsilon)
        self.lam = self.radius / self.epsilon
        self.interpretation = interpretation
        self.rng = make_rng(seed)

    @property
    def mean_radius(self) -> float:
        return self.lam if self.interpretation == "scale" else 1.0 / self.lam

    def _process(self, t, x, y, valid, labels):
        labels = np.asarray(labels)
        u = self.rng.random((len(t), 2))
        theta = 2.0 * np.pi * u[:, 0]
        rho = -self.mean_radius * np.log1p(-u[:, 1])
        hit = valid & (labels == MovementLabel.SACCADE)
        outx = np.where(hit, x + rho * np.cos(theta), x)
        outy = np.where(hit, y + rho * np.sin(theta), y)
        return t.copy(), outx, outy, valid.copy()


def fir_design(fc: float, taps: int, fs: float) -> np.ndarray:
    """Hamming-windowed sinc low-pass, normalized to unit DC gain."""
    if not 0 < fc < fs / 2:
        raise InvalidCutoff(f"cutoff must lie in (0, fs/2) = (0, {fs / 2}), got {fc}")
    if int(taps) != taps or taps < 1:
        raise InvalidParameter(f"taps must be a positive integer, got {taps}")
    taps = int(taps)
    n = np.arange(taps) - (taps - 1) / 2.0
    wc = 2.0 * fc / fs
    h = wc * np.sinc(wc * n) * np.hamming(taps)
    h = (h + h[::-1]) / 2.0  # exact symmetry
    return h / h.sum()


def dump_fir_csv(h, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "coefficient"])
        for i, c in enumerate(h):
            w.writerow([i, repr(float(c))])


class FIR(StreamingPrivatizer):
    """Causal windowed-sinc FIR low-pass holding the last M-1 inputs as state."""

    name = "fir"

    def __init__(self, fc_hz: float, taps: int, fs: float = 1000.0, initial_state: str = "zeros"):
        super().__init__()
        self.fc = float(fc_hz)
        self.fs = float(fs)
        self.coefficients = fir_design(fc_hz, taps, fs)
        self.taps = len(self.coefficients)
        if initial_state not in ("zeros", "first"):
            raise InvalidParameter(f"unknown initial_state {initial_state!r}")
        self.initial_state = initial_state
        self._buf = None

    @property
    def meta(self):
        return PrivatizerMeta(self.name, 0, Fraction(self.taps - 1, 2))

    def _process(self, t, x, y, valid, labels):
        fx, fy, pending = self._hold(x, y, valid)
        live = ~pending
        outx = np.full(len(x), np.nan)
        outy = np.full(len(y), np.nan)
        if live.any():
            cx, cy = fx[live], fy[live]
            if self._buf is None:
                k = self.taps - 1
                if self.initial_state == "zeros":
                    self._buf = (np.zeros(k), np.zeros(k))
                else:
                    self._buf = (np.full(k, cx[0]), np.full(k, cy[0]))
            bx, by = self._buf
            ex = np.concatenate([bx, cx])
            ey = np.concatenate([by, cy])
            outx[live] = _causal_weighted_sum(ex, self.coefficients)
            outy[live] = _causal_weighted_sum(ey, self.coefficients)
            keep = self.taps - 1
            self._buf = (ex[len(ex) - keep:], ey[len(ey) - keep:])
        return t.copy(), outx, outy, live


def white_acceleration_q(q: float, dt: float) -> np.ndarray:
    return q * np.array([[dt**3 / 3, dt**2 / 2], [dt**2 / 2, dt]])


def kalman_step(state, P, z, A, Q, R):
    """One predict/update cycle of a position-velocity filter observing position.

    ``z=None`` runs the prediction only. Returns (state, P, gain); gain is
    None when no update happened.
    """
    state = A @ state
    P = A @ P @ A.T + Q
    if z is None:
        return state, P, None
    S = P[0, 0] + R
    K = P[:, 0] / S
    state = state + K * (z - state[0])
    P = P - np.outer(K, P[0, :])
    return state, P, K


class _KalmanChannel:
    """Scalar-arithmetic version of :func:`kalman_step` for one channel."""

    __slots__ = ("dt", "q11", "q12", "q22", "r", "p", "v", "P11", "P12", "P22", "ready")

    def __init__(self, dt, Q, r):
        self.dt = dt
        self.q11, self.q12, self.q22 = float(Q[0, 0]), float(Q[0, 1]), float(Q[1, 1])
        self.r = float(r)
        self.ready = False

    def start(self, z):
        self.p, self.v = z, 0.0
        self.P11, self.P12, self.P22 = 1.0, 0.0, 1.0
        self.ready = True

    def step(self, z):
        dt = self.dt
        p = self.p + dt * self.v
        v = self.v
        P11 = self.P11 + dt * (2.0 * self.P12 + dt * self.P22) + self.q11
        P12 = self.P12 + dt * self.P22 + self.q12
        P22 = self.P22 + self.q22
        if z is not None:
            s = P11 + self.r
            k1 = P11 / s
            k2 = P12 / s
            e = z - p
            p += k1 * e
            v += k2 * e
            P22 -= k2 * P12
            P12 -= k1 * P12
            P11 -= k1 * P11
        self.p, self.v, self.P11, self.P12, self.P22 = p, v, P11, P12, P22
        if not (math.isfinite(p) and math.isfinite(v) and math.isfinite(P11)
                and math.isfinite(P12) and math.isfinite(P22)):
            raise NonFiniteState("Kalman state or covariance became non-finite")
        return p


class Kalman(StreamingPrivatizer):
    """Independent constant-velocity Kalman filters on the x and y channels.

    The first valid sample initializes position (velocity 0, P = I); missing
    samples run the prediction step only.
    """

    name = "kalman"

    def __init__(self, fs: float = 1000.0, q: float = 500.0, r: float = 0.5):
        super().__init__()
        if not (q >= 0 and r > 0):
            raise InvalidParameter(f"need q >= 0 and r > 0, got q={q}, r={r}")
        self.fs = float(fs)
        self.q = float(q)
        self.r = float(r)
        dt = 1.0 / self.fs
        Q = white_acceleration_q(self.q, dt)
        self._cx = _KalmanChannel(dt, Q, self.r)
        self._cy = _KalmanChannel(dt, Q, self.r)

    @property
    def meta(self):
        return PrivatizerMeta(self.name, 0, Fraction(0))

    @property
    def velocity(self):
        return (self._cx.v, self._cy.v) if self._cx.ready else (math.nan, math.nan)

    def _process(self, t, x, y, valid, labels):
        n = len(t)
        outx = np.full(n, np.nan)
        outy = np.full(n, np.nan)
        live = np.zeros(n, dtype=bool)
        cx, cy = self._cx, self._cy
        for i, (xi, yi, ok) in enumerate(zip(x.tolist(), y.tolist(), valid.tolist())):
            if not cx.ready:
                if not ok:
                    continue
                cx.start(xi)
                cy.start(yi)
                outx[i], outy[i] = xi, yi
            elif ok:
                outx[i] = cx.step(xi)
                outy[i] = cy.step(yi)
            else:
                outx[i] = cx.step(None)
                outy[i] = cy.step(None)
            live[i] = True
        return t.copy(), outx, outy, live


def apply_privatizer(rec: Recording, op: StreamingPrivatizer, labels=None,
                     chunk_size: Optional[int] = None):
    """Stream a recording through an operator in timestamp order.

    Returns the privatized recording and the operator's metadata. Samples are
    pushed in blocks of ``chunk_size`` (whole recording when None).
    """
    n = len(rec)
    step = n if not chunk_size else int(chunk_size)
    parts = []
    for s in range(0, n, step):
        lab = None if labels is None else np.asarray(labels)[s:s + step]
        parts.append(op.process(rec.t[s:s + step], rec.x[s:s + step], rec.y[s:s + step],
                                rec.valid[s:s + step], lab))
    t, x, y, valid = (np.concatenate(c) for c in zip(*parts))
    if len(t) == 0:
        raise ValueError(f"{op.name} emitted no samples for a {n}-sample recording")
    meta = dict(rec.meta)
    meta["privatizer"] = op.name
    meta["warmup_samples"] = op.warmup_samples
    out = Recording(t, np.where(valid, x, np.nan), np.where(valid, y, np.nan), valid,
                    op.output_fs(rec.fs), rec.subject_id, rec.session_id, rec.task_tag,
                    rec.targets, meta)
    return out, op.meta


OPERATORS = {
    "identity": (Identity, set(), False),
    "median3": (Median3, set(), False),
    "downsample": (Downsample, {"factor"}, False),
    "gaussian": (GaussianNoise, {"variance"}, True),
    "lwma": (LWMA, {"window"}, False),
    "targeted_noise": (TargetedNoise, {"radius", "epsilon", "interpretation"}, True),
    "fir": (FIR, {"fc_hz", "taps", "initial_state"}, False),
    "kalman": (Kalman, {"q", "r"}, False),
}


def is_stochastic(spec: dict) -> bool:
    return OPERATORS[spec["op"]][2]


def make_privatizer(spec: dict, fs: float = 1000.0, seed=None) -> StreamingPrivatizer:
    """Build an operator from a declarative spec such as ``{"op": "fir", "fc_hz": 25, "taps": 49}``."""
    spec = dict(spec)
    name = spec.pop("op", None)
    spec.pop("label", None)
    if name not in OPERATORS:
        raise InvalidParameter(f"unknown privatizer {name!r}; choose from {sorted(OPERATORS)}")
    cls, allowed, stochastic = OPERATORS[name]
    unknown = set(spec) - allowed
    if unknown:
        raise InvalidParameter(f"unknown parameters for {name}: {sorted(unknown)}")
    if name in ("fir", "kalman"):
        spec["fs"] = fs
    if stochastic:
        if seed is None:
            raise InvalidParameter(f"{name} is stochastic and needs a seed")
        spec["seed"] = seed
    return cls(**spec)
