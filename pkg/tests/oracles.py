"""Reference implementations written independently of the package.

Straight loops and textbook formulas only; nothing here imports gazepriv.
"""
import math


def brute_rank1(S, Y):
    """Rank-1 identification rate by explicit loops (ties: first row wins)."""
    rows = len(S)
    cols = len(S[0])
    hits = 0
    for j in range(cols):
        best_i, best = 0, S[0][j]
        for i in range(1, rows):
            if S[i][j] > best:
                best_i, best = i, S[i][j]
        if Y[best_i][j] == 1:
            hits += 1
    return 100.0 * hits / cols


def windowed_sinc(fc, taps, fs):
    """Hamming-windowed sinc low-pass, normalized to unit DC gain."""
    wc = 2.0 * fc / fs
    mid = (taps - 1) / 2.0
    h = []
    for n in range(taps):
        k = n - mid
        s = wc if k == 0 else math.sin(math.pi * wc * k) / (math.pi * k)
        w = 0.54 - 0.46 * math.cos(2 * math.pi * n / (taps - 1)) if taps > 1 else 1.0
        h.append(s * w)
    total = sum(h)
    return [v / total for v in h]


def dtft_magnitude(h, f, fs):
    re = sum(c * math.cos(2 * math.pi * f * n / fs) for n, c in enumerate(h))
    im = sum(c * math.sin(2 * math.pi * f * n / fs) for n, c in enumerate(h))
    return math.hypot(re, im)


def kalman_cv_step(x, P, z, dt, Q, R):
    """Textbook constant-velocity predict/update with plain lists (2x2)."""
    # predict: x = A x, P = A P A' + Q with A = [[1, dt], [0, 1]]
    xp = [x[0] + dt * x[1], x[1]]
    a, b, c, d = P[0][0], P[0][1], P[1][0], P[1][1]
    AP = [[a + dt * c, b + dt * d], [c, d]]
    Pp = [[AP[0][0] + dt * AP[0][1] + Q[0][0], AP[0][1] + Q[0][1]],
          [AP[1][0] + dt * AP[1][1] + Q[1][0], AP[1][1] + Q[1][1]]]
    # update with H = [1, 0]
    S = Pp[0][0] + R
    K = [Pp[0][0] / S, Pp[1][0] / S]
    y = z - xp[0]
    xn = [xp[0] + K[0] * y, xp[1] + K[1] * y]
    Pn = [[(1 - K[0]) * Pp[0][0], (1 - K[0]) * Pp[0][1]],
          [Pp[1][0] - K[1] * Pp[0][0], Pp[1][1] - K[1] * Pp[0][1]]]
    return xn, Pn, K


def lwma_direct(s, B):
    """y[i] = sum_k w_k s[i-k], w_k = (k+1)/D, zero before the stream start."""
    D = B * (B + 1) / 2
    out = []
    for i in range(len(s)):
        acc = 0.0
        for k in range(B):
            if i - k >= 0:
                acc += (k + 1) / D * s[i - k]
        out.append(acc)
    return out


def median3_direct(s):
    out = []
    for i in range(len(s)):
        w = [s[max(i - 2, 0)], s[max(i - 1, 0)], s[i]]
        out.append(sorted(w)[1])
    return out


def linear_percentile(values, q):
    """Inclusive linear-interpolation percentile (q in 0..100)."""
    v = sorted(values)
    if len(v) == 1:
        return v[0]
    pos = (len(v) - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


def angle_between_dva(g, t):
    """Angle between gaze directions (tan a, tan b, 1) via arccos of the dot product."""
    u = [math.tan(math.radians(g[0])), math.tan(math.radians(g[1])), 1.0]
    v = [math.tan(math.radians(t[0])), math.tan(math.radians(t[1])), 1.0]
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(a * a for a in v))
    return math.degrees(math.acos(max(-1.0, min(1.0, dot / (nu * nv)))))


def idt_batch(x, y, threshold, min_samples):
    """Classic batch I-DT: returns a list of (start, end_inclusive) fixations."""
    def disp(a, b):
        xs, ys = x[a:b], y[a:b]
        return (max(xs) - min(xs)) + (max(ys) - min(ys))

    n = len(x)
    out = []
    i = 0
    while i + min_samples <= n:
        j = i + min_samples
        if disp(i, j) <= threshold:
            while j < n and disp(i, j + 1) <= threshold:
                j += 1
            out.append((i, j - 1))
            i = j
        else:
            i += 1
    return out
