"""Sequence acceleration for slowly or conditionally convergent lattice sums."""

import numpy as np


def wynn_epsilon(partial_sums):
    """Wynn epsilon extrapolation of sequences of partial sums.

    Parameters
    ----------
    partial_sums : array_like of complex, shape (..., n)
        Consecutive partial sums S_0, ..., S_{n-1} along the last axis.

    Returns
    -------
    value : complex or ndarray
        Extrapolated limit (last entry of the deepest usable even column).
    error : float or ndarray
        Estimate from the spread of the last two even-column estimates.
    """
    s = np.asarray(partial_sums, dtype=complex)
    scalar = s.ndim == 1
    s = np.atleast_2d(s)
    n = s.shape[-1]
    if n == 0:
        raise ValueError("need at least one partial sum")
    best = s[:, -1].copy()
    err = np.abs(s[:, -1] - s[:, -2]) if n > 1 else np.full(len(s), np.inf)
    if n >= 3:
        prev = np.zeros((len(s), n + 1), dtype=complex)
        cur = s.copy()
        alive = np.ones(len(s), dtype=bool)
        k = 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            while cur.shape[-1] > 1 and np.any(alive):
                diff = cur[:, 1:] - cur[:, :-1]
                scale = np.maximum(np.abs(cur[:, 1:]), 1e-300)
                # a column converged to rounding: freeze that sequence
                if k % 2 == 0:
                    alive &= ~np.any(np.abs(diff) <= 1e-15 * scale, axis=-1)
                nxt = prev[:, 1:cur.shape[-1]] + 1.0 / diff
                prev, cur = cur, nxt
                k += 1
                if k % 2 == 0:
                    est = cur[:, -1]
                    ok = alive & np.isfinite(est)
                    e = np.abs(est - best)
                    if cur.shape[-1] > 1:
                        e = np.maximum(e, np.abs(cur[:, -1] - cur[:, -2]))
                    err = np.where(ok, e, err)
                    best = np.where(ok, est, best)
                    alive &= ok
    if scalar:
        return best[0], float(err[0])
    return best, err
