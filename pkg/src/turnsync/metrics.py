"""Synchrony measures for simulated conversations.

* ``discrete_mutual_information`` - plug-in MI (bits) between symbol sequences
* ``ksg_mutual_information`` - Kraskov k-NN MI (nats), algorithm 1, max-norm
* ``analytic_signal`` / ``phase_locking_value`` - FFT-based phase locking
* ``convergence_tick`` - first tick after which a series stays inside a band
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Hashable, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from turnsync.errors import UsageError

PLV_EDGE_FRACTION = 0.05
KSG_JITTER = 1e-10


def _encode(seq: Sequence[Hashable]) -> list[Hashable]:
    return list(seq.tolist() if isinstance(seq, np.ndarray) else seq)


def discrete_mutual_information(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Plug-in mutual information in bits.

    Each joint cell contributes p(x,y) log2(p(x,y) / (p(x) p(y))) with the
    ratio formed from integer counts, and the terms are summed with
    ``math.fsum``, so swapping ``a`` and ``b`` gives the identical float.
    """
    a, b = _encode(a), _encode(b)
    n = len(a)
    if n != len(b):
        raise UsageError(f"sequence lengths differ: {n} != {len(b)}")
    if n == 0:
        raise UsageError("sequences must be non-empty")
    ca, cb = Counter(a), Counter(b)
    joint = Counter(zip(a, b))
    terms = [
        (c / n) * math.log2((c * n) / (ca[x] * cb[y]))
        for (x, y), c in joint.items()
    ]
    return max(0.0, math.fsum(terms))


def entropy_bits(a: Sequence[Hashable]) -> float:
    a = _encode(a)
    n = len(a)
    return max(0.0, -math.fsum((c / n) * math.log2(c / n) for c in Counter(a).values()))


def ksg_mutual_information(
    a: Sequence[float],
    b: Sequence[float],
    k: int = 4,
    jitter: bool = False,
    seed: int = 0,
) -> float:
    """Kraskov-Stoegbauer-Grassberger estimator (algorithm 1), in nats.

    ``eps_i`` is the max-norm distance from sample i to its k-th nearest
    neighbour in the joint space; ``n_x(i)`` counts samples strictly closer
    than ``eps_i`` in the x marginal (likewise ``n_y``), and

        I = psi(k) + psi(N) - < psi(n_x + 1) + psi(n_y + 1) >.

    Only the neighbour *distance* enters the formula, so which of several
    equidistant samples counts as the k-th neighbour does not matter.
    ``jitter`` adds uniform noise of amplitude 1e-10 (seeded) to break exact
    ties in heavily discretised series.
    """
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    n = x.size
    if n != y.size:
        raise UsageError(f"series lengths differ: {n} != {y.size}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise UsageError(f"k must be a positive integer, got {k!r}")
    if n <= k:
        raise UsageError(f"need more than k={k} samples, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise UsageError("series must be finite")
    if jitter:
        rng = np.random.default_rng(seed)
        x = x + rng.uniform(-KSG_JITTER, KSG_JITTER, n)
        y = y + rng.uniform(-KSG_JITTER, KSG_JITTER, n)

    joint = np.column_stack([x, y])
    # k + 1 because every point is its own nearest neighbour at distance 0.
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    eps = dist[:, k]
    nx = _count_strictly_within(x, eps)
    ny = _count_strictly_within(y, eps)
    return float(digamma(k) + digamma(n) - np.mean(digamma(nx + 1) + digamma(ny + 1)))


def _count_strictly_within(v: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """For each i, #{j != i : |v_j - v_i| < radius_i} in one dimension."""
    s = np.sort(v)
    n = v.size
    lo = np.searchsorted(s, v - radius, side="left")
    hi = np.searchsorted(s, v + radius, side="right")
    # v +/- radius is rounded; snap both edges to the float test used for eps.
    while (m := (lo > 0) & (np.abs(s[np.maximum(lo - 1, 0)] - v) < radius)).any():
        lo[m] -= 1
    while (m := (lo < hi) & (np.abs(s[np.minimum(lo, n - 1)] - v) >= radius)).any():
        lo[m] += 1
    while (m := (hi < n) & (np.abs(s[np.minimum(hi, n - 1)] - v) < radius)).any():
        hi[m] += 1
    while (m := (hi > lo) & (np.abs(s[np.maximum(hi - 1, 0)] - v) >= radius)).any():
        hi[m] -= 1
    return np.maximum(hi - lo - 1, 0)


def analytic_signal(x: Sequence[float]) -> np.ndarray:
    """Discrete analytic signal of the mean-removed series.

    Frequency-domain construction: keep DC (and Nyquist for even N), double
    the positive frequencies, zero the negative ones.
    """
    v = np.asarray(x, dtype=float).ravel()
    n = v.size
    if n < 4:
        raise UsageError(f"analytic signal needs N >= 4, got {n}")
    v = v - v.mean()
    spectrum = np.fft.fft(v)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(spectrum * h)


def plv_with_flag(a: Sequence[float], b: Sequence[float]) -> tuple[float, bool]:
    """PLV plus a flag that is True when either input has no variation."""
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    n = x.size
    if n != y.size:
        raise UsageError(f"series lengths differ: {n} != {y.size}")
    if n < 20:
        raise UsageError(f"phase locking needs N >= 20, got {n}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0, True
    taper = np.hanning(n)
    za = analytic_signal((x - x.mean()) * taper)
    zb = analytic_signal((y - y.mean()) * taper)
    edge = int(round(PLV_EDGE_FRACTION * n))
    keep = slice(edge, n - edge)
    dphi = np.angle(za[keep]) - np.angle(zb[keep])
    plv = float(np.abs(np.mean(np.exp(1j * dphi))))
    return min(1.0, max(0.0, plv)), False


def phase_locking_value(a: Sequence[float], b: Sequence[float]) -> float:
    """Magnitude of the mean phase-difference phasor, edges (5% per side) dropped."""
    return plv_with_flag(a, b)[0]


def convergence_tick(x: Sequence[float], window: int, epsilon: float) -> int | None:
    """Smallest t >= window with max - min of x[t-window .. t] below epsilon."""
    if window < 2:
        raise UsageError(f"window must be >= 2, got {window}")
    v = np.asarray(x, dtype=float).ravel()
    if v.size <= window:
        return None
    frames = np.lib.stride_tricks.sliding_window_view(v, window + 1)
    spread = frames.max(axis=1) - frames.min(axis=1)
    hits = np.flatnonzero(spread < epsilon)
    return int(hits[0]) + window if hits.size else None


def lagged(a: Sequence, b: Sequence, lag: int) -> tuple[list, list]:
    """Pair a[t] with b[t + lag]; both outputs have the overlap length."""
    a, b = list(a), list(b)
    if lag > 0:
        return a[:len(a) - lag], b[lag:]
    if lag < 0:
        return a[-lag:], b[:len(b) + lag]
    return a, b
