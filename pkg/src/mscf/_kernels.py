"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The fallback is selected by setting the environment variable
``MSCF_NO_NUMBA`` (any non-empty value) before import, or automatically
when numba is unavailable.  Both paths implement identical arithmetic;
``NUMBA_ENABLED`` reports which one is active.

The dominant kernel is the two-dimensional occupation-surface recursion.
It walks the product grid one gnomon at a time: after step ``m`` the
values ``p(t_a, t_m)`` (lower frontier) and ``p(t_m, t_b)`` (upper
frontier) are known for all ``a, b >= m``, and step ``m`` extends both
edges to index ``m+1``.  Off the sparse set of cells carrying coincident
jump pairs the surface increment is zero, so each cell update is three
adds; active cells additionally scatter the four-term product increment
and record the corner (left-limit) values of all state pairs for the
cash-flow assembly.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "gnomon_recursion",
    "pair_at_risk_counts",
    "forward_recursion_1d",
]

_DISABLED = bool(os.environ.get("MSCF_NO_NUMBA"))

if not _DISABLED:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def _gnomon_py(
    lowA,
    uppB,
    lower_ptr,
    lower_idx,
    upper_ptr,
    upper_idx,
    ea,
    eb,
    eg,
    et1,
    et2,
    et3,
    ev,
    corner_out,
    dense_pairs,
    dense_out,
):
    G, P = lowA.shape
    M = G - 1
    newA = np.empty_like(lowA)
    newB = np.empty_like(uppB)
    for m in range(M):
        # lower frontier: p(t_a, t_{m+1}) for a >= m; scatter interleaved so
        # an active cell's increment propagates down the rest of the edge
        newA[m, :] = uppB[m + 1, :]
        ptr = lower_ptr[m + 1]
        end = lower_ptr[m + 2]
        for a in range(m + 1, G):
            for q in range(P):
                newA[a, q] = lowA[a, q] + newA[a - 1, q] - lowA[a - 1, q]
            while ptr < end and ea[lower_idx[ptr]] == a:
                e = lower_idx[ptr]
                corner_out[e, :] = lowA[a - 1, :]
                val = lowA[a - 1, eg[e]] * ev[e]
                newA[a, et1[e]] += val
                newA[a, et2[e]] -= val
                newA[a, et3[e]] -= val
                newA[a, eg[e]] -= val
                ptr += 1
        # upper frontier: p(t_{m+1}, t_b) for b >= m
        newB[m, :] = lowA[m + 1, :]
        newB[m + 1, :] = newA[m + 1, :]
        ptr = upper_ptr[m + 1]
        end = upper_ptr[m + 2]
        for b in range(m + 2, G):
            for q in range(P):
                newB[b, q] = uppB[b, q] + newB[b - 1, q] - uppB[b - 1, q]
            while ptr < end and eb[upper_idx[ptr]] == b:
                e = upper_idx[ptr]
                corner_out[e, :] = uppB[b - 1, :]
                val = uppB[b - 1, eg[e]] * ev[e]
                newB[b, et1[e]] += val
                newB[b, et2[e]] -= val
                newB[b, et3[e]] -= val
                newB[b, eg[e]] -= val
                ptr += 1
        for d in range(dense_pairs.size):
            q = dense_pairs[d]
            for a in range(m + 1, G):
                dense_out[d, a, m + 1] = newA[a, q]
            for b in range(m + 1, G):
                dense_out[d, m + 1, b] = newB[b, q]
        lowA, newA = newA, lowA
        uppB, newB = newB, uppB
    return None


def _gnomon_numpy(
    lowA,
    uppB,
    lower_ptr,
    lower_idx,
    upper_ptr,
    upper_idx,
    ea,
    eb,
    eg,
    et1,
    et2,
    et3,
    ev,
    corner_out,
    dense_pairs,
    dense_out,
):
    """Vectorized variant: the edge recursion is a cumulative sum of the
    sparse cell increments, since those increments only read the previous
    frontier."""
    G, P = lowA.shape
    M = G - 1
    for m in range(M):
        lo, hi = lower_ptr[m + 1], lower_ptr[m + 2]
        delta = np.zeros((G - m - 1, P))
        for ptr in range(lo, hi):
            e = lower_idx[ptr]
            a = ea[e]
            corner_out[e, :] = lowA[a - 1, :]
            val = lowA[a - 1, eg[e]] * ev[e]
            row = a - (m + 1)
            delta[row, et1[e]] += val
            delta[row, et2[e]] -= val
            delta[row, et3[e]] -= val
            delta[row, eg[e]] -= val
        base = uppB[m + 1, :] - lowA[m, :]
        newA_seg = lowA[m + 1 :, :] + base + np.cumsum(delta, axis=0)

        lo, hi = upper_ptr[m + 1], upper_ptr[m + 2]
        delta = np.zeros((G - m - 2, P)) if G - m - 2 > 0 else np.zeros((0, P))
        for ptr in range(lo, hi):
            e = upper_idx[ptr]
            b = eb[e]
            corner_out[e, :] = uppB[b - 1, :]
            val = uppB[b - 1, eg[e]] * ev[e]
            row = b - (m + 2)
            delta[row, et1[e]] += val
            delta[row, et2[e]] -= val
            delta[row, et3[e]] -= val
            delta[row, eg[e]] -= val
        baseB = newA_seg[0, :] - uppB[m + 1, :]
        newB_seg = uppB[m + 2 :, :] + baseB + np.cumsum(delta, axis=0)

        lowA[m + 1 :, :] = newA_seg
        uppB[m + 1, :] = newA_seg[0, :]
        uppB[m + 2 :, :] = newB_seg
        for d in range(dense_pairs.size):
            q = dense_pairs[d]
            dense_out[d, m + 1 :, m + 1] = lowA[m + 1 :, q]
            dense_out[d, m + 1, m + 1 :] = uppB[m + 1 :, q]
    return None


def _pair_at_risk_py(S, a_idx, b_idx, s1, s2):
    n = S.shape[0]
    out = np.zeros(a_idx.size, np.int64)
    for e in range(a_idx.size):
        c = 0
        ai = a_idx[e]
        bi = b_idx[e]
        v1 = s1[e]
        v2 = s2[e]
        for l in range(n):
            if S[l, ai] == v1 and S[l, bi] == v2:
                c += 1
        out[e] = c
    return out


def _pair_at_risk_numpy(S, a_idx, b_idx, s1, s2):
    out = np.zeros(a_idx.size, np.int64)
    for e in range(a_idx.size):
        out[e] = np.count_nonzero((S[:, a_idx[e]] == s1[e]) & (S[:, b_idx[e]] == s2[e]))
    return out


def _forward_1d_py(dL, p0):
    G, J, _ = dL.shape
    p = np.empty((G, J))
    p[0, :] = p0
    for m in range(1, G):
        for j in range(J):
            acc = p[m - 1, j]
            for k in range(J):
                acc += p[m - 1, k] * dL[m, k, j]
            p[m, j] = acc
    return p


def _forward_1d_numpy(dL, p0):
    G = dL.shape[0]
    p = np.empty((G, dL.shape[1]))
    p[0, :] = p0
    for m in range(1, G):
        p[m, :] = p[m - 1, :] + p[m - 1, :] @ dL[m]
    return p


if NUMBA_ENABLED:
    _gnomon_jit = njit(cache=True)(_gnomon_py)
    pair_at_risk_counts = njit(cache=True)(_pair_at_risk_py)
    forward_recursion_1d = njit(cache=True)(_forward_1d_py)

    def gnomon_recursion(*args):
        return _gnomon_jit(*args)

else:
    gnomon_recursion = _gnomon_numpy
    pair_at_risk_counts = _pair_at_risk_numpy
    forward_recursion_1d = _forward_1d_numpy


def warmup() -> None:
    """Trigger jit compilation on tiny inputs so timings exclude compile cost."""
    G, P = 3, 4
    lowA = np.zeros((G, P))
    uppB = np.zeros((G, P))
    lowA[:, 0] = 1.0
    uppB[:, 0] = 1.0
    ptr = np.zeros(G + 1, np.int64)
    idx = np.zeros(0, np.int64)
    e = np.zeros(0, np.int64)
    ei = np.zeros(0, np.int32)
    ev = np.zeros(0)
    corner = np.zeros((0, P))
    gnomon_recursion(
        lowA, uppB, ptr, idx, ptr, idx, e, e, ei, ei, ei, ei, ev, corner,
        np.zeros(0, np.int64), np.zeros((0, G, G)),
    )
    S = np.zeros((2, G), np.int8)
    pair_at_risk_counts(
        S, np.zeros(1, np.int64), np.zeros(1, np.int64),
        np.zeros(1, np.int8), np.zeros(1, np.int8),
    )
    forward_recursion_1d(np.zeros((G, 2, 2)), np.array([1.0, 0.0]))
