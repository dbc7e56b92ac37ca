"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` exactly (same arguments, same tie-breaking) and
are used whenever the compiled extension is unavailable.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2

BLAND = 0
HYBRID = 1

RELATIVE_PIVOT = 0.1  # leaving candidates must be this close to the largest pivot
# consecutive degenerate pivots tolerated before HYBRID falls back to Bland
DEGENERATE_LIMIT = 50


def tabulate_fam(scen, costs, istar, nu, type_ii, snap):
    """Allocation and inspection of a favored-agent mechanism at every row of ``scen``."""
    scen = np.ascontiguousarray(scen, dtype=np.float64)
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    n, k = scen.shape
    net = scen - costs
    others = np.delete(net, istar, axis=1)
    m = others.max(axis=1)
    m = np.where(np.abs(m - nu) <= snap, nu, m)
    if type_ii:
        favored = m < nu
    else:
        favored = m <= nu
    best = net.max(axis=1)
    # smallest index within snap of the maximum
    winner = np.argmax(net >= (best - snap)[:, None], axis=1)
    p = np.zeros((n, k))
    q = np.zeros((n, k))
    rows = np.arange(n)
    p[rows[favored], istar] = 1.0
    contest = rows[~favored]
    p[contest, winner[contest]] = 1.0
    q[contest, winner[contest]] = 1.0
    return p, q


def line_extrema(a, b, shape, axis):
    """Per-line min of ``a`` and max of ``b`` along one grid axis.

    Lines are ordered by their base flat index; ties resolve to the first
    occurrence along the line. Returns ``(amin, amin_idx, bmax, bmax_idx)``
    with flat scenario indices.
    """
    shape = tuple(int(s) for s in shape)
    n = shape[axis]
    size = int(np.prod(shape))
    idx = np.moveaxis(np.arange(size).reshape(shape), axis, -1).reshape(-1, n)
    A = np.asarray(a, dtype=np.float64)[idx]
    B = np.asarray(b, dtype=np.float64)[idx]
    rows = np.arange(idx.shape[0])
    ia = A.argmin(axis=1)
    ib = B.argmax(axis=1)
    return A[rows, ia], idx[rows, ia], B[rows, ib], idx[rows, ib]


def simplex(T, basis, n_enter, rule, max_iter, tol, pivot_tol):
    """Primal simplex on a tableau, in place.

    ``T`` has the constraint rows first and the reduced-cost row last; the last
    column is the right-hand side. Only columns ``< n_enter`` may enter.
    Column entries below ``pivot_tol`` are treated as zero: a column with no
    larger entry cannot enter, and is a ray only if it has no entry above
    ``tol``. The leaving row comes from a two-pass ratio test that keeps every
    basic value above ``-tol`` and prefers the smallest basic index among
    pivots within ``RELATIVE_PIVOT`` of the largest. Drifted negative
    right-hand sides count as zero.
    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    use_bland = rule == BLAND
    degenerate = 0
    for it in range(max_iter):
        obj = T[m, :n_enter]
        cand = np.flatnonzero(obj < -tol)
        if not use_bland:
            cand = cand[np.argsort(obj[cand], kind="stable")]
        j = -1
        for k in cand:
            amax = T[:m, k].max(initial=0.0)
            if amax <= tol:
                return UNBOUNDED, it
            if amax >= pivot_tol:
                j = int(k)
                break
        if j < 0:
            # only columns whose pivots are round-off remain
            return OPTIMAL, it
        col = T[:m, j]
        pos = np.flatnonzero(col >= pivot_tol)
        a = col[pos]
        b = np.maximum(T[pos, -1], 0.0)
        # two passes: bound the step with a relaxed ratio, then take the
        # smallest basic index among well-sized pivots within that bound
        ratios = b / a
        near = ratios <= ((b + tol) / a).min()
        pos, a, ratios = pos[near], a[near], ratios[near]
        strong = a >= RELATIVE_PIVOT * a.max()
        pos, ratios = pos[strong], ratios[strong]
        r = int(pos[np.argmin(basis[pos])])
        rmin = ratios.min()
        if rmin <= tol:
            degenerate += 1
            if degenerate > DEGENERATE_LIMIT:
                use_bland = True
        else:
            degenerate = 0
        if T[r, -1] < 0.0:
            # drift below zero would push the step negative
            T[r, -1] = 0.0
        T[r] /= T[r, j]
        factor = T[:, j].copy()
        factor[r] = 0.0
        T -= np.outer(factor, T[r])
        basis[r] = j
    return ITERATION_LIMIT, max_iter
