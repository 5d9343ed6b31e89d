"""Synthetic gaze recordings for tests, demos and the acceptance suite.

Two generators:

* :func:`on_target_recording` - gaze jumps onto each target and sits on it
  exactly, the noiseless best case for interaction simulation.
* :func:`subject_corpus` - RAN-like recordings for several simulated people.
  Every subject has persistent oculomotor traits (fixational jitter, tremor
  frequency, drift, saccade speed and latency), which gives re-identification
  something to find.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .signal import Recording, ScreenBounds, TargetEvent


def _seed_for(*parts) -> int:
    h = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "little")


def random_targets(n: int, rng, bounds: ScreenBounds = ScreenBounds(), margin: float = 2.0):
    xs = rng.uniform(bounds.x_min + margin, bounds.x_max - margin, n)
    ys = rng.uniform(bounds.y_min + margin, bounds.y_max - margin, n)
    return xs, ys


def on_target_recording(n_targets: int = 100, dwell_ms: float = 150.0, fs: float = 1000.0,
                        seed: int = 0, subject_id: str = "1", session_id: str = "1") -> Recording:
    """Gaze teleports onto each target at its onset and stays for ``dwell_ms``."""
    rng = np.random.default_rng(seed)
    tx, ty = random_targets(n_targets, rng)
    per = int(round(dwell_ms * fs / 1000.0))
    x = np.repeat(tx, per)
    y = np.repeat(ty, per)
    t = np.arange(len(x)) * (1000.0 / fs)
    targets = tuple(TargetEvent(float(k * per * 1000.0 / fs), float(tx[k]), float(ty[k]), k)
                    for k in range(n_targets))
    return Recording.from_arrays(x, y, fs, t=t, subject_id=subject_id, session_id=session_id,
                                 task_tag="RAN", targets=targets)


@dataclass(frozen=True)
class SubjectTraits:
    jitter: float          # white positional noise, dva
    tremor_hz: float
    tremor_amp: float      # dva
    drift_speed: float     # random-walk step scale, dva / sqrt(s)
    saccade_gain: float    # peak velocity multiplier on the main sequence
    latency_ms: float      # saccade reaction time after target onset
    undershoot: float      # fraction of the target step that is undershot
    blink_rate: float      # blinks per second


def draw_traits(subject_id, seed: int = 0) -> SubjectTraits:
    rng = np.random.default_rng(_seed_for("traits", seed, subject_id))
    return SubjectTraits(
        jitter=float(rng.uniform(0.002, 0.008)),
        tremor_hz=float(rng.uniform(30.0, 110.0)),
        tremor_amp=float(rng.uniform(0.001, 0.01)),
        drift_speed=float(rng.uniform(0.05, 0.5)),
        saccade_gain=float(rng.uniform(0.7, 1.3)),
        latency_ms=float(rng.uniform(140.0, 260.0)),
        undershoot=float(rng.uniform(0.0, 0.12)),
        blink_rate=float(rng.uniform(0.0, 0.3)),
    )


def _saccade_profile(n):
    # minimum-jerk position profile from 0 to 1 over n samples
    s = np.arange(1, n + 1) / n
    return 10 * s**3 - 15 * s**4 + 6 * s**5


def _ar1_velocity(rng, n, rms, tau_samples):
    # smooth drift velocity: stationary AR(1) with the given RMS (deg/s)
    a = float(np.exp(-1.0 / tau_samples))
    e = rng.standard_normal((2, n)) * rms * np.sqrt(1.0 - a * a)
    v = np.empty((2, n))
    v[:, 0] = rng.standard_normal(2) * rms
    for k in range(1, n):
        v[:, k] = a * v[:, k - 1] + e[:, k]
    return v


def ran_recording(traits: SubjectTraits, duration_s: float = 30.0, fs: float = 1000.0,
                  target_interval_ms: float = 1000.0, seed: int = 0, subject_id: str = "1",
                  session_id: str = "1", bounds: ScreenBounds = ScreenBounds()) -> Recording:
    """Random-saccade task: a target jumps every ``target_interval_ms``."""
    rng = np.random.default_rng(_seed_for("ran", seed, subject_id, session_id))
    n = int(round(duration_s * fs))
    dt = 1.0 / fs
    per = int(round(target_interval_ms * fs / 1000.0))
    n_targets = max(1, n // per)
    tx, ty = random_targets(n_targets, rng, bounds)

    x = np.empty(n)
    y = np.empty(n)
    gx, gy = 0.0, 0.0
    lat = int(round(traits.latency_ms * fs / 1000.0))
    i = 0
    for k in range(n_targets):
        seg_end = n if k == n_targets - 1 else (k + 1) * per
        start = k * per
        # hold the previous fixation through the reaction time
        hold_end = min(seg_end, start + lat)
        x[start:hold_end], y[start:hold_end] = gx, gy
        i = hold_end
        ax = tx[k] - gx
        ay = ty[k] - gy
        amp = float(np.hypot(ax, ay))
        if i < seg_end and amp > 0:
            land = 1.0 - traits.undershoot
            peak = traits.saccade_gain * 500.0 * (1.0 - np.exp(-amp / 14.0))  # deg/s
            dur = max(2, int(np.ceil(1.875 * amp * land / max(peak, 1e-6) * fs)))
            dur = min(dur, seg_end - i)
            prof = _saccade_profile(dur) * land
            x[i:i + dur] = gx + ax * prof
            y[i:i + dur] = gy + ay * prof
            gx, gy = gx + ax * land, gy + ay * land
            i += dur
            # corrective saccade halfway through the remaining time
            corr = min(seg_end, i + int(0.12 * fs))
            x[i:corr], y[i:corr] = gx, gy
            i = corr
            if i < seg_end:
                cdur = min(seg_end - i, max(2, int(0.012 * fs)))
                cprof = _saccade_profile(cdur)
                x[i:i + cdur] = gx + (tx[k] - gx) * cprof
                y[i:i + cdur] = gy + (ty[k] - gy) * cprof
                gx, gy = tx[k], ty[k]
                i += cdur
        x[i:seg_end], y[i:seg_end] = gx, gy

    t = np.arange(n) * dt
    drift = np.cumsum(_ar1_velocity(rng, n, traits.drift_speed, 0.2 * fs), axis=1) * dt
    # re-centre drift at each target onset so it stays small
    onset_idx = np.minimum(np.arange(n_targets) * per, n - 1)
    seg = np.searchsorted(onset_idx, np.arange(n), side="right") - 1
    drift -= drift[:, onset_idx][:, seg]
    phase = rng.uniform(0, 2 * np.pi, 2)
    tremor = traits.tremor_amp * np.sin(2 * np.pi * traits.tremor_hz * t[None, :] + phase[:, None])
    jitter = rng.standard_normal((2, n)) * traits.jitter
    x = x + drift[0] + tremor[0] + jitter[0]
    y = y + drift[1] + tremor[1] + jitter[1]

    n_blinks = rng.poisson(traits.blink_rate * duration_s)
    for b in rng.integers(0, n, n_blinks):
        ln = int(rng.uniform(0.08, 0.2) * fs)
        x[b:b + ln] = np.nan
        y[b:b + ln] = np.nan

    targets = tuple(TargetEvent(float(k * per * 1000.0 / fs), float(tx[k]), float(ty[k]), k)
                    for k in range(n_targets))
    return Recording.from_arrays(x, y, fs, t=t * 1000.0, subject_id=subject_id,
                                 session_id=session_id, task_tag="RAN", targets=targets)


def subject_corpus(n_subjects: int = 12, sessions=("1", "2"), duration_s: float = 30.0,
                   fs: float = 1000.0, seed: int = 0) -> list[Recording]:
    recs = []
    for s in range(1, n_subjects + 1):
        sid = str(s)
        traits = draw_traits(sid, seed)
        for sess in sessions:
            recs.append(ran_recording(traits, duration_s, fs, seed=seed, subject_id=sid,
                                      session_id=str(sess)))
    return recs


def write_recording_csv(rec: Recording, path) -> None:
    """Write a recording in the ingestion schema (targets repeated per row)."""
    cols = [rec.t, rec.x, rec.y]
    header = "t_ms,x_dva,y_dva"
    if rec.targets:
        onsets = np.array([tg.onset_ms for tg in rec.targets])
        k = np.searchsorted(onsets, rec.t, side="right") - 1
        txs = np.array([tg.x for tg in rec.targets])
        tys = np.array([tg.y for tg in rec.targets])
        cols += [np.where(k >= 0, txs[np.maximum(k, 0)], np.nan),
                 np.where(k >= 0, tys[np.maximum(k, 0)], np.nan)]
        header += ",target_x_dva,target_y_dva"
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in zip(*(c.tolist() for c in cols)):
            f.write(",".join("NaN" if v != v else repr(v) for v in row) + "\n")
