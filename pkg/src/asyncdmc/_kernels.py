"""Compiled scan loops for the simulation hot path (binary-output channels
with finite log-likelihood ratios).

The kernels fuse symbol generation and the sliding stop test, so a trial at
asynchronism level A costs O(A) with a few nanoseconds per symbol and O(N)
memory.  Symbol t of a trial is derived from the same counter-based mixer
as the numpy paths (`rng.mix64`); equality of the two implementations and
of kernel-vs-reference trial outcomes is pinned by tests.

All thresholds arrive as 53-bit integers (`rng.bit_threshold`) so the
Bernoulli draw is an exact integer comparison.
"""

from __future__ import annotations

import numpy as np
import numba
from numba import njit, prange

# The default TBB layer is version-gated on some systems and warns; OMP is
# always present with the toolchains we build against.
numba.config.THREADING_LAYER = "omp"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)


@njit(numba.uint64(numba.uint64, numba.uint64), cache=True, inline="always")
def _mix64(key, ctr):
    z = key + (ctr + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX_A
    z = (z ^ (z >> np.uint64(27))) * _MIX_B
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _scan_training_one(key, nu0, level, n, w, k_lo, k_hi, thr_noise, thr_code):
    """First 0-based time whose trailing w-window one-count lies in
    [k_lo, k_hi], scanning the full trial stream; -1 if none."""
    total = level + n - 1
    if w == 0 or k_lo > k_hi:
        return np.int64(-1)
    ring = np.zeros(w, dtype=np.int64)
    cnt = 0
    j = 0
    for t in range(total):
        if nu0 <= t < nu0 + n:
            thr = thr_code[t - nu0]
        else:
            thr = thr_noise
        b = 1 if (_mix64(key, np.uint64(t)) >> np.uint64(11)) >= thr else 0
        cnt += b - ring[j]
        ring[j] = b
        j += 1
        if j == w:
            j = 0
        if t >= w - 1 and k_lo <= cnt <= k_hi:
            return np.int64(t)
    return np.int64(-1)


@njit(cache=True, parallel=True)
def scan_training_batch(keys, nu0s, msgs, level, n, w, k_lo, k_hi, thr_noise, thr_code_by_msg):
    out = np.empty(keys.size, dtype=np.int64)
    for i in prange(keys.size):
        out[i] = _scan_training_one(
            keys[i], nu0s[i], level, n, w, k_lo, k_hi,
            thr_noise, thr_code_by_msg[msgs[i]],
        )
    return out


@njit(cache=True)
def _scan_joint_one(key, nu0, level, n, thr_noise, thr_code,
                    prune_open, llr, letters, threshold):
    """First 0-based time whose trailing N-window scores at least
    ``threshold`` for some codeword, and the best codeword there.

    ``prune_open[c]`` must be True whenever a window with one-count c can
    reach the threshold; windows with the prune closed are skipped without
    scoring, which never changes the first crossing.
    """
    total = level + n - 1
    num_msgs = letters.shape[0]
    ring = np.zeros(n, dtype=np.int64)
    cnt = 0
    j = 0
    for t in range(total):
        if nu0 <= t < nu0 + n:
            thr = thr_code[t - nu0]
        else:
            thr = thr_noise
        b = 1 if (_mix64(key, np.uint64(t)) >> np.uint64(11)) >= thr else 0
        cnt += b - ring[j]
        ring[j] = b
        j += 1
        if j == n:
            j = 0
        if t >= n - 1 and prune_open[cnt]:
            best = -np.inf
            best_m = -1
            for m in range(num_msgs):
                s = 0.0
                rr = j
                for p in range(n):
                    s += llr[letters[m, p], ring[rr]]
                    rr += 1
                    if rr == n:
                        rr = 0
                if s > best:
                    best = s
                    best_m = m
            if best >= threshold:
                return np.int64(t), np.int64(best_m)
    return np.int64(-1), np.int64(-1)


@njit(cache=True, parallel=True)
def scan_joint_batch(keys, nu0s, msgs, level, n, thr_noise, thr_code_by_msg,
                     prune_open, llr, letters, threshold):
    stop = np.empty(keys.size, dtype=np.int64)
    msg = np.empty(keys.size, dtype=np.int64)
    for i in prange(keys.size):
        stop[i], msg[i] = _scan_joint_one(
            keys[i], nu0s[i], level, n, thr_noise, thr_code_by_msg[msgs[i]],
            prune_open, llr, letters, threshold,
        )
    return stop, msg
