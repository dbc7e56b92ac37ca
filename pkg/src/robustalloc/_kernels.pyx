# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Semantics match ``_kernels_py`` exactly."""

import numpy as np
from libc.math cimport fabs, fmax

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2

BLAND = 0
HYBRID = 1

RELATIVE_PIVOT = 0.1
DEGENERATE_LIMIT = 50


def tabulate_fam(scen_in, costs_in, Py_ssize_t istar, double nu, bint type_ii, double snap):
    cdef double[:, ::1] scen = np.ascontiguousarray(scen_in, dtype=np.float64)
    cdef double[::1] costs = np.ascontiguousarray(costs_in, dtype=np.float64)
    cdef Py_ssize_t n = scen.shape[0], k = scen.shape[1]
    p_arr = np.zeros((n, k))
    q_arr = np.zeros((n, k))
    cdef double[:, ::1] p = p_arr
    cdef double[:, ::1] q = q_arr
    cdef Py_ssize_t s, i, winner
    cdef double m, best, v
    cdef bint favored
    for s in range(n):
        m = -1e308
        best = -1e308
        for i in range(k):
            v = scen[s, i] - costs[i]
            if v > best:
                best = v
            if i != istar and v > m:
                m = v
        if fabs(m - nu) <= snap:
            m = nu
        if type_ii:
            favored = m < nu
        else:
            favored = m <= nu
        if favored:
            p[s, istar] = 1.0
        else:
            winner = 0
            for i in range(k):
                if scen[s, i] - costs[i] >= best - snap:
                    winner = i
                    break
            p[s, winner] = 1.0
            q[s, winner] = 1.0
    return p_arr, q_arr


def line_extrema(a_in, b_in, shape, Py_ssize_t axis):
    cdef double[::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t n = shape[axis]
    cdef Py_ssize_t size = 1, stride = 1, d
    for d in range(len(shape)):
        size *= <Py_ssize_t> shape[d]
        if d > axis:
            stride *= <Py_ssize_t> shape[d]
    cdef Py_ssize_t lines = size // n
    amin_arr = np.empty(lines)
    bmax_arr = np.empty(lines)
    ia_arr = np.empty(lines, dtype=np.intp)
    ib_arr = np.empty(lines, dtype=np.intp)
    cdef double[::1] amin = amin_arr
    cdef double[::1] bmax = bmax_arr
    cdef Py_ssize_t[::1] ia = ia_arr
    cdef Py_ssize_t[::1] ib = ib_arr
    cdef Py_ssize_t outer, inner, base, t, idx, line = 0
    cdef double lo, hi
    cdef Py_ssize_t ilo, ihi
    for outer in range(size // (n * stride)):
        for inner in range(stride):
            base = outer * n * stride + inner
            lo = a[base]
            hi = b[base]
            ilo = base
            ihi = base
            for t in range(1, n):
                idx = base + t * stride
                if a[idx] < lo:
                    lo = a[idx]
                    ilo = idx
                if b[idx] > hi:
                    hi = b[idx]
                    ihi = idx
            amin[line] = lo
            bmax[line] = hi
            ia[line] = ilo
            ib[line] = ihi
            line += 1
    return amin_arr, ia_arr, bmax_arr, ib_arr


def simplex(T_in, basis_in, Py_ssize_t n_enter, int rule, Py_ssize_t max_iter, double tol, double pivot_tol):
    cdef double[:, ::1] T = T_in
    cdef Py_ssize_t[::1] basis = basis_in
    cdef Py_ssize_t m = T.shape[0] - 1, ncol = T.shape[1], rhs = T.shape[1] - 1
    cdef Py_ssize_t it, j, r, i, col
    cdef bint use_bland = rule == BLAND
    cdef Py_ssize_t degenerate = 0
    cdef double best, ratio, rmin, piv, f, amax, theta, top
    cdef double best_ray
    cdef Py_ssize_t ray
    for it in range(max_iter):
        # entering column: entries below pivot_tol count as zero
        j = -1
        ray = -1
        best = 0.0
        best_ray = 0.0
        for col in range(n_enter):
            if T[m, col] >= -tol:
                continue
            if not use_bland and j >= 0 and T[m, col] >= best:
                continue
            amax = 0.0
            for i in range(m):
                if T[i, col] > amax:
                    amax = T[i, col]
            if amax <= tol:
                if ray < 0 or T[m, col] < best_ray:
                    ray = col
                    best_ray = T[m, col]
                if use_bland:
                    break
            elif amax >= pivot_tol:
                j = col
                best = T[m, col]
                if use_bland:
                    break
        if ray >= 0 and (j < 0 or best_ray < best or (best_ray == best and ray < j)):
            return UNBOUNDED, it
        if j < 0:
            return OPTIMAL, it
        theta = 1e308
        for i in range(m):
            if T[i, j] >= pivot_tol:
                ratio = (fmax(T[i, rhs], 0.0) + tol) / T[i, j]
                if ratio < theta:
                    theta = ratio
        top = 0.0
        for i in range(m):
            if T[i, j] >= pivot_tol and fmax(T[i, rhs], 0.0) / T[i, j] <= theta:
                if T[i, j] > top:
                    top = T[i, j]
        r = -1
        rmin = 1e308
        for i in range(m):
            if T[i, j] >= pivot_tol and T[i, j] >= RELATIVE_PIVOT * top:
                ratio = fmax(T[i, rhs], 0.0) / T[i, j]
                if ratio <= theta:
                    if ratio < rmin:
                        rmin = ratio
                    if r < 0 or basis[i] < basis[r]:
                        r = i
        if rmin <= tol:
            degenerate += 1
            if degenerate > DEGENERATE_LIMIT:
                use_bland = True
        else:
            degenerate = 0
        if T[r, rhs] < 0.0:
            # drift below zero would push the step negative
            T[r, rhs] = 0.0
        piv = T[r, j]
        for col in range(ncol):
            T[r, col] /= piv
        for i in range(m + 1):
            if i != r:
                f = T[i, j]
                if f != 0.0:
                    for col in range(ncol):
                        T[i, col] -= f * T[r, col]
        basis[r] = j
    return ITERATION_LIMIT, max_iter
