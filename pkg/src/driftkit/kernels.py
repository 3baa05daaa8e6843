"""numba kernels that run whole trials; bit-for-bit twins of
:func:`driftkit.processes.step` and :mod:`driftkit.rng`.

Every kernel fills ``out_t`` / ``out_capped`` for trials
``first .. first + count - 1`` and releases the GIL, so chunks can run on
threads.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def _seed(state, master, trial):
    key = _mix64(_mix64(master) + np.uint64(trial + 1) * _GOLDEN)
    for k in range(4):
        state[k] = _mix64(key + np.uint64(k + 1) * _GOLDEN)
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = _GOLDEN


@njit(cache=True, inline="always")
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True, inline="always")
def _random(s):
    return np.float64(_next(s) >> np.uint64(11)) * _INV_2_53


@njit(cache=True, inline="always")
def _below(s, n):
    return np.int64(_random(s) * n)


@njit(cache=True)
def _flip_count(s, n, q_n, ratio):
    if n == 1:
        return 1
    u = _random(s)
    k = 0
    prob = q_n
    cdf = prob
    while u >= cdf and k < n:
        prob = prob * (n - k) / (k + 1) * ratio
        k += 1
        cdf += prob
    return k


@njit(cache=True, nogil=True)
def bitstring_trials(family, n, weights, optimum, lo_target, threshold, init_bits, uniform,
                     q_n, ratio, master, first, count, step_cap, out_t, out_capped):
    """family: 0 OneMax, 1 linear, 2 LeadingOnes."""
    s = np.empty(4, dtype=np.uint64)
    bits = np.empty(n, dtype=np.int8)
    pos = np.empty(n, dtype=np.int64)
    for j in range(count):
        _seed(s, master, first + j)
        if uniform:
            for b in range(n):
                bits[b] = np.int8(_next(s) >> np.uint64(63))
        else:
            for b in range(n):
                bits[b] = init_bits[b]
        lo = 0
        if family == 2:
            while lo < n and bits[lo] == 1:
                lo += 1
            dist = max(0, lo_target - lo)
        else:
            dist = 0
            for b in range(n):
                if bits[b] != optimum[b]:
                    dist += 1
        t = 0
        while dist > threshold and t < step_cap:
            t += 1
            k = _flip_count(s, n, q_n, ratio)
            m = 0
            while m < k:
                p = _below(s, n)
                fresh = True
                for q in range(m):
                    if pos[q] == p:
                        fresh = False
                        break
                if fresh:
                    pos[m] = p
                    m += 1
            if family == 0:
                change = 0
                for q in range(k):
                    change += -1 if bits[pos[q]] == 0 else 1
                if change <= 0:
                    for q in range(k):
                        bits[pos[q]] ^= 1
                    dist += change
            elif family == 1:
                gain = 0.0
                change = 0
                for q in range(k):
                    b = pos[q]
                    if bits[b] == 0:
                        gain += weights[b]
                    else:
                        gain -= weights[b]
                    change += 1 if bits[b] == optimum[b] else -1
                if gain >= 0.0:
                    for q in range(k):
                        bits[pos[q]] ^= 1
                    dist += change
            else:
                ok = True
                for q in range(k):
                    if pos[q] < lo:
                        ok = False
                        break
                if ok:
                    for q in range(k):
                        bits[pos[q]] ^= 1
                    while lo < n and bits[lo] == 1:
                        lo += 1
                    dist = max(0, lo_target - lo)
        out_t[j] = t
        out_capped[j] = dist > threshold


@njit(cache=True, nogil=True)
def chain_trials(indptr, indices, data, hit, start_index, start_probs, master, first, count,
                 step_cap, out_t, out_capped):
    """Explicit chain runs; ``start_index < 0`` samples from ``start_probs``."""
    s = np.empty(4, dtype=np.uint64)
    for j in range(count):
        _seed(s, master, first + j)
        if start_index >= 0:
            x = start_index
        else:
            u = _random(s)
            cum = 0.0
            x = 0
            for c in range(start_probs.size):
                if start_probs[c] > 0:
                    x = c
                    cum += start_probs[c]
                    if u < cum:
                        break
        t = 0
        while not hit[x] and t < step_cap:
            t += 1
            u = _random(s)
            cum = 0.0
            nxt = x
            for e in range(indptr[x], indptr[x + 1]):
                if data[e] > 0:
                    nxt = indices[e]
                    cum += data[e]
                    if u < cum:
                        break
            x = nxt
        out_t[j] = t
        out_capped[j] = not hit[x]
