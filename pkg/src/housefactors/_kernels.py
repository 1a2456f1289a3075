"""Numeric inner loops: pivoted-QR least squares and rolling-window screens.

The same source functions run either JIT-compiled through numba (default)
or as plain Python over numpy arrays. Set ``HOUSEFACTORS_DISABLE_NUMBA=1``
to force the pure-numpy path; the fallback also engages automatically when
numba is not importable. Both paths execute identical floating-point
operations in identical order.

``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_disabled_by_env() -> bool:
    flag = os.environ.get("HOUSEFACTORS_DISABLE_NUMBA", "").strip().lower()
    return flag in ("1", "true", "yes", "on")


def _ols_qr(X, y, rank_tol):
    """Least squares via column-pivoted Householder QR.

    Returns (beta, resid, xtx_inv, rank, perm, rdiag) where beta and
    xtx_inv are in original column order, perm[j] is the original index of
    pivoted column j, and rdiag holds |R[j,j]| in pivot order. When
    rank < k the numeric outputs are zero-filled and only rank/perm/rdiag
    are meaningful; the caller decides how to report the deficiency.
    """
    n, k = X.shape
    R = X.copy()
    qty = y.copy()
    perm = np.arange(k)
    v = np.empty(n)
    rdiag = np.zeros(k)

    steps = k if k < n else n
    for j in range(steps):
        # pivot on the largest remaining column sum of squares; recomputing
        # beats norm downdating for determinism at these sizes
        best_c = j
        best_ss = -1.0
        for c in range(j, k):
            ss = 0.0
            for i in range(j, n):
                ss += R[i, c] * R[i, c]
            if ss > best_ss:
                best_ss = ss
                best_c = c
        if best_c != j:
            for i in range(n):
                tmp = R[i, j]
                R[i, j] = R[i, best_c]
                R[i, best_c] = tmp
            tmp_p = perm[j]
            perm[j] = perm[best_c]
            perm[best_c] = tmp_p

        normx = np.sqrt(best_ss)
        if normx == 0.0:
            continue
        alpha = -normx if R[j, j] >= 0.0 else normx
        v[j] = R[j, j] - alpha
        for i in range(j + 1, n):
            v[i] = R[i, j]
        vnorm2 = 0.0
        for i in range(j, n):
            vnorm2 += v[i] * v[i]
        if vnorm2 > 0.0:
            for c in range(j + 1, k):
                dot = 0.0
                for i in range(j, n):
                    dot += v[i] * R[i, c]
                f = 2.0 * dot / vnorm2
                for i in range(j, n):
                    R[i, c] -= f * v[i]
            dot = 0.0
            for i in range(j, n):
                dot += v[i] * qty[i]
            f = 2.0 * dot / vnorm2
            for i in range(j, n):
                qty[i] -= f * v[i]
        R[j, j] = alpha
        for i in range(j + 1, n):
            R[i, j] = 0.0
        rdiag[j] = np.abs(alpha)

    max_diag = 0.0
    for j in range(k):
        if rdiag[j] > max_diag:
            max_diag = rdiag[j]
    rank = 0
    for j in range(k):
        if rdiag[j] > rank_tol * max_diag:
            rank += 1

    beta = np.zeros(k)
    resid = np.zeros(n)
    xtx_inv = np.zeros((k, k))
    if rank < k or max_diag == 0.0:
        return beta, resid, xtx_inv, rank, perm, rdiag

    # back-substitute R z = Q'y (pivoted order), then undo the pivot
    z = np.empty(k)
    for i in range(k - 1, -1, -1):
        s = qty[i]
        for c in range(i + 1, k):
            s -= R[i, c] * z[c]
        z[i] = s / R[i, i]
    for j in range(k):
        beta[perm[j]] = z[j]

    # (X'X)^-1 = P R^-1 R^-T P'; C = R^-1 by back substitution per column
    C = np.zeros((k, k))
    for col in range(k):
        for i in range(col, -1, -1):
            s = 1.0 if i == col else 0.0
            for c in range(i + 1, col + 1):
                s -= R[i, c] * C[c, col]
            C[i, col] = s / R[i, i]
    for i in range(k):
        for j2 in range(k):
            s = 0.0
            for c in range(k):
                s += C[i, c] * C[j2, c]
            xtx_inv[perm[i], perm[j2]] = s

    for i in range(n):
        s = y[i]
        for c in range(k):
            s -= X[i, c] * beta[c]
        resid[i] = s
    return beta, resid, xtx_inv, rank, perm, rdiag


def _rolling_idio(returns, market, window, rank_tol):
    """Trailing-window dispersion of squared single-factor residuals.

    For each asset and quarter t, fits intercept+market on the window
    ending at t and takes the sample standard deviation (n-1) of the
    squared residuals. Status codes per cell: 0 window incomplete,
    1 computed, 2 degenerate (market constant within the window).
    """
    a_count, t_count = returns.shape
    out = np.full((a_count, t_count), np.nan)
    status = np.zeros((a_count, t_count), dtype=np.int8)
    X = np.empty((window, 2))
    yw = np.empty(window)
    for a in range(a_count):
        for t in range(window - 1, t_count):
            ok = True
            for i in range(t - window + 1, t + 1):
                if np.isnan(returns[a, i]) or np.isnan(market[i]):
                    ok = False
                    break
            if not ok:
                continue
            for i in range(window):
                X[i, 0] = 1.0
                X[i, 1] = market[t - window + 1 + i]
                yw[i] = returns[a, t - window + 1 + i]
            beta, resid, xtx_inv, rank, perm, rdiag = ols_qr(X, yw, rank_tol)
            if rank < 2:
                status[a, t] = 2
                continue
            m = 0.0
            for i in range(window):
                m += resid[i] * resid[i]
            m /= window
            ss = 0.0
            for i in range(window):
                d = resid[i] * resid[i] - m
                ss += d * d
            out[a, t] = np.sqrt(ss / (window - 1))
            status[a, t] = 1
    return out, status


if _numba_disabled_by_env():
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    ols_qr = njit(cache=True)(_ols_qr)
    rolling_idio = njit(cache=True)(_rolling_idio)
else:
    ols_qr = _ols_qr
    rolling_idio = _rolling_idio


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
