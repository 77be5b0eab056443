"""Optional numba-accelerated inner loops for the LDPC and polar decoders.

Importing this module never fails: when numba is unavailable the
``HAVE_NUMBA`` flag is False and callers fall back to the numpy paths.
The accelerated LDPC kernel uses a layered schedule (faster convergence);
the numpy fallback floods.  Both are normalized min-sum.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f
        return wrap(a[0]) if a and callable(a[0]) else wrap


@njit(cache=True)
def nms_layered(edge_cols, degrees, channel, max_iter, alpha):
    """Layered normalized min-sum over a padded check-row table.

    Returns (posterior totals, iterations used, parity_ok).
    """
    n_checks, max_deg = edge_cols.shape
    total = channel.copy()
    c2v = np.zeros((n_checks, max_deg))
    v2c = np.empty(max_deg)
    for it in range(max_iter):
        for ci in range(n_checks):
            d = degrees[ci]
            min1 = 1e300
            min2 = 1e300
            amin = -1
            sprod = 1.0
            for j in range(d):
                v = total[edge_cols[ci, j]] - c2v[ci, j]
                v2c[j] = v
                a = -v if v < 0 else v
                if v < 0:
                    sprod = -sprod
                if a < min1:
                    min2 = min1
                    min1 = a
                    amin = j
                elif a < min2:
                    min2 = a
            for j in range(d):
                s = -sprod if v2c[j] < 0 else sprod
                mag = min2 if j == amin else min1
                new = alpha * s * mag
                col = edge_cols[ci, j]
                total[col] += new - c2v[ci, j]
                c2v[ci, j] = new
        ok = True
        for ci in range(n_checks):
            parity = 0
            for j in range(degrees[ci]):
                if total[edge_cols[ci, j]] < 0:
                    parity ^= 1
            if parity:
                ok = False
                break
        if ok:
            return total, it + 1, True
    return total, max_iter, False


@njit(cache=True)
def _scl_update_llrs(llrs, bits, pos, stages):
    n_paths = llrs.shape[0]
    if pos == 0:
        next_level = stages
    else:
        bl = 0
        t = pos
        while t:
            t >>= 1
            bl += 1
        last_level = stages - bl + 1
        start = (1 << (last_level - 1)) - 1
        end = (1 << last_level) - 2
        size = end - start + 1
        for li in range(n_paths):
            for i in range(size):
                upper = llrs[li, end + 1 + i]
                lower = llrs[li, end + 1 + size + i]
                if bits[li, 0, start + i]:
                    llrs[li, start + i] = lower - upper
                else:
                    llrs[li, start + i] = lower + upper
        next_level = last_level - 1
    for level in range(next_level, 0, -1):
        start = (1 << (level - 1)) - 1
        end = (1 << level) - 2
        size = end - start + 1
        for li in range(n_paths):
            for i in range(size):
                a = llrs[li, end + 1 + i]
                b = llrs[li, end + 1 + size + i]
                aa = -a if a < 0 else a
                ab = -b if b < 0 else b
                m = aa if aa < ab else ab
                if (a < 0) != (b < 0):
                    m = -m
                llrs[li, start + i] = m


@njit(cache=True)
def _scl_update_bits(bits, latest, pos, n, stages):
    n_paths = bits.shape[0]
    if pos == n - 1:
        return
    if pos < n // 2:
        for li in range(n_paths):
            bits[li, 0, 0] = latest[li]
        return
    # first zero from the most significant bit of the stage-wide representation
    idx = 0
    for j in range(stages - 1, -1, -1):
        if not (pos >> j) & 1:
            idx = stages - 1 - j
            break
    last_level = idx + 1
    for li in range(n_paths):
        bits[li, 1, 0] = latest[li]
    for level in range(1, last_level - 1):
        start = (1 << (level - 1)) - 1
        end = (1 << level) - 2
        size = end - start + 1
        for li in range(n_paths):
            for i in range(size):
                s0 = bits[li, 0, start + i]
                s1 = bits[li, 1, start + i]
                bits[li, 1, end + 1 + i] = s0 ^ s1
                bits[li, 1, end + 1 + size + i] = s1
    level = last_level - 1
    start = (1 << (level - 1)) - 1
    end = (1 << level) - 2
    size = end - start + 1
    for li in range(n_paths):
        for i in range(size):
            s0 = bits[li, 0, start + i]
            s1 = bits[li, 1, start + i]
            bits[li, 0, end + 1 + i] = s0 ^ s1
            bits[li, 0, end + 1 + size + i] = s1


@njit(cache=True)
def scl_decode(channel_llrs, is_info, bit_rev, list_size):
    """Successive-cancellation list decoding; returns (u_hat, path metrics)."""
    n = channel_llrs.size
    stages = 0
    t = n
    while t > 1:
        t >>= 1
        stages += 1
    L = list_size
    dead = 1e30

    llrs = np.zeros((L, 2 * n - 1))
    bits = np.zeros((L, 2, n - 1), dtype=np.int8)
    u_hat = np.zeros((L, n), dtype=np.int8)
    pm = np.full(L, dead)
    pm[0] = 0.0
    for li in range(L):
        llrs[li, n - 1:] = channel_llrs

    cand = np.empty(2 * L)
    order = np.empty(2 * L, dtype=np.int64)
    latest = np.empty(L, dtype=np.int8)

    for phase in range(n):
        pos = bit_rev[phase]
        _scl_update_llrs(llrs, bits, pos, stages)
        if is_info[phase]:
            for li in range(L):
                leaf = llrs[li, 0]
                pen = -leaf if leaf < 0 else leaf
                if leaf < 0:
                    cand[li] = pm[li] + pen      # deciding 0 against the llr
                    cand[li + L] = pm[li]
                else:
                    cand[li] = pm[li]
                    cand[li + L] = pm[li] + pen  # deciding 1 against the llr
            # stable insertion sort of 2L candidate indices by metric
            for i in range(2 * L):
                order[i] = i
            for i in range(1, 2 * L):
                key = order[i]
                kv = cand[key]
                j = i - 1
                while j >= 0 and cand[order[j]] > kv:
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = key
            parent = np.empty(L, dtype=np.int64)
            value = np.empty(L, dtype=np.int8)
            new_pm = np.empty(L)
            for i in range(L):
                sel = order[i]
                parent[i] = sel % L
                value[i] = sel // L
                new_pm[i] = cand[sel]
            llrs = llrs[parent].copy()
            bits = bits[parent].copy()
            u_hat = u_hat[parent].copy()
            pm = new_pm
            for li in range(L):
                u_hat[li, phase] = value[li]
                latest[li] = value[li]
        else:
            for li in range(L):
                leaf = llrs[li, 0]
                if leaf < 0:
                    pm[li] += -leaf
                u_hat[li, phase] = 0
                latest[li] = 0
        _scl_update_bits(bits, latest, pos, n, stages)
    return u_hat, pm
