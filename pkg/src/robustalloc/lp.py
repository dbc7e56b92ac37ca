"""Small dense linear programs solved by a deterministic two-phase simplex."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

COST_TOL = 1e-9  # reduced-cost optimality
PIVOT_TOL = 1e-7  # smallest pivot accepted when a larger one exists
REFACTOR_EVERY = 64
FEAS_TOL = 1e-9  # primal residual accepted at the end, relative to the data scale


class LPError(RuntimeError):
    """Raised by callers that need an optimal solution but did not get one."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``min c.x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lower <= x <= upper``.

    Bounds default to ``0 <= x < inf``; ``-inf`` lower bounds make a variable free.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        object.__setattr__(self, "c", c)
        for A, b, name in ((self.A_ub, self.b_ub, "ub"), (self.A_eq, self.b_eq, "eq")):
            if A is None:
                A, b = np.zeros((0, n)), np.zeros(0)
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.asarray(b, dtype=float).ravel()
            if A.shape != (b.size, n):
                raise ValueError(f"A_{name} must have shape ({b.size}, {n}), got {A.shape}")
            object.__setattr__(self, f"A_{name}", A)
            object.__setattr__(self, f"b_{name}", b)
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if lower.size != n or upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def num_vars(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit" | "numerical_error"
    value: float
    x: np.ndarray | None
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _standard_form(lp: LinearProgram):
    """Rewrite as ``min c'.y + const`` s.t. rows with ``y >= 0``.

    Returns the pieces needed to build the tableau and to map ``y`` back to ``x``.
    """
    n = lp.num_vars
    cols = []  # (source var, sign, offset) per standard column
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            cols.append((j, 1.0, lo))
        elif np.isfinite(hi):
            cols.append((j, -1.0, hi))
        else:
            cols.append((j, 1.0, 0.0))
            cols.append((j, -1.0, 0.0))
    ncols = len(cols)
    M = np.zeros((n, ncols))  # x = M y + offset
    offset = np.zeros(n)
    for k, (j, sgn, off) in enumerate(cols):
        M[j, k] = sgn
        offset[j] = off
    ub_rows = [lp.A_ub @ M]
    ub_rhs = [lp.b_ub - lp.A_ub @ offset]
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo) and np.isfinite(hi):
            row = np.zeros((1, n))
            row[0, j] = 1.0
            ub_rows.append(row @ M)
            ub_rhs.append(np.array([hi - lo]))
    A_ub = np.vstack(ub_rows)
    b_ub = np.concatenate(ub_rhs)
    A_eq = lp.A_eq @ M
    b_eq = lp.b_eq - lp.A_eq @ offset
    c = lp.c @ M
    const = float(lp.c @ offset)
    return A_ub, b_ub, A_eq, b_eq, c, const, M, offset


def _rebuild(T, A0, b0, rows, basis, cost) -> bool:
    """Recompute the tableau as ``B^-1 [A | b]`` from the original rows.

    Removes the round-off that accumulates over long pivot sequences. Leaves
    ``T`` untouched and returns False if the basis matrix is singular.
    """
    m = basis.size
    A, b = A0[rows], b0[rows]
    try:
        lu = np.linalg.solve(A[:, basis], np.column_stack([A, b]))
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(lu)):
        return False
    T[:m] = lu
    cb = cost[basis]
    T[m, :-1] = cost - cb @ lu[:, :-1]
    T[m, -1] = -(cb @ lu[:, -1])
    # basic columns are exact unit vectors
    T[:m, basis] = np.eye(m)
    T[m, basis] = 0.0
    return True


def _run(T, basis, n_enter, code, budget, A0, b0, rows, cost):
    """Pivot in chunks, refactorizing between them; returns ``(status, iterations)``.

    For the hybrid rule, chunks after the first use Bland's rule so that long
    runs keep the anti-cycling guarantee.
    """
    used = 0
    while True:
        chunk = min(REFACTOR_EVERY, budget - used)
        status, it = kernels.simplex(T, basis, n_enter, code, chunk, COST_TOL, PIVOT_TOL)
        used += it
        _rebuild(T, A0, b0, rows, basis, cost)
        if status != kernels.ITERATION_LIMIT or used >= budget:
            return status, used
        code = kernels.BLAND


def lp_min(lp: LinearProgram, rule: str = "bland", max_iter: int | None = None) -> LPResult:
    """Two-phase primal simplex with fixed index order.

    ``rule="bland"`` uses Bland's rule throughout. ``rule="hybrid"`` prices by
    most negative reduced cost and switches permanently to Bland's rule after
    a run of degenerate pivots; both are deterministic. The tableau is
    refactorized from the original data every ``REFACTOR_EVERY`` pivots. The
    final point is checked against the original constraints. A Bland run that
    fails the check or exhausts its budget in phase 2 is re-solved with the
    hybrid rule; a hybrid run that fails the check reports ``"numerical_error"``.
    """
    code = {"bland": kernels.BLAND, "hybrid": kernels.HYBRID}[rule]
    A_ub, b_ub, A_eq, b_eq, c, const, M, offset = _standard_form(lp)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m, ny = m_ub + m_eq, c.size
    if max_iter is None:
        max_iter = 50 * (m + ny + 10)

    # columns: structural y | slacks (one per ub row) | artificials
    flip_ub = b_ub < 0
    need_art = np.concatenate([flip_ub, np.ones(m_eq, dtype=bool)])
    n_art = int(need_art.sum())
    n_slack = m_ub
    N = ny + n_slack + n_art
    T = np.zeros((m + 1, N + 1))
    T[:m_ub, :ny] = A_ub
    T[:m_ub, ny : ny + n_slack] = np.eye(m_ub)
    T[:m_ub, -1] = b_ub
    T[m_ub:m, :ny] = A_eq
    T[m_ub:m, -1] = b_eq
    sign = np.where(np.concatenate([flip_ub, b_eq < 0]), -1.0, 1.0)
    T[:m] *= sign[:, None]
    basis = np.empty(m, dtype=np.intp)
    art = ny + n_slack
    for r in range(m):
        if need_art[r]:
            T[r, art] = 1.0
            basis[r] = art
            art += 1
        else:
            basis[r] = ny + r
    n_enter = ny + n_slack
    iters = 0
    A0, b0 = T[:m, :N].copy(), T[:m, -1].copy()
    rows = np.arange(m)

    if n_art:
        cost1 = np.zeros(N)
        cost1[n_enter:] = 1.0
        T[m, :] = 0.0
        T[m, :] -= T[:m][need_art].sum(axis=0)
        T[m, ny + n_slack :N] = 0.0
        status, it = _run(T, basis, n_enter, code, max_iter, A0, b0, rows, cost1)
        iters += it
        if status == kernels.ITERATION_LIMIT:
            return LPResult("iteration_limit", float("nan"), None, iters)
        scale = 1.0 + np.abs(T[:m, -1]).max(initial=0.0)
        if -T[m, -1] > 1e-8 * scale:
            return LPResult("infeasible", float("nan"), None, iters)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n_enter:
                row = T[r, :n_enter]
                cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if cand.size == 0:
                    keep[r] = False
                    continue
                j = int(cand[0])
                T[r] /= T[r, j]
                f = T[:, j].copy()
                f[r] = 0.0
                T -= np.outer(f, T[r])
                basis[r] = j
        if not keep.all():
            T = np.ascontiguousarray(np.vstack([T[:m][keep], T[m : m + 1]]))
            basis = np.ascontiguousarray(basis[keep])
            rows = rows[keep]
            m = basis.size

    cost = np.zeros(N)
    cost[:ny] = c
    T[m, :] = 0.0
    T[m, :N] = cost
    for r in range(m):
        cb = cost[basis[r]]
        if cb != 0.0:
            T[m] -= cb * T[r]
    status, it = _run(T, basis, n_enter, code, max(max_iter - iters, 1), A0, b0, rows, cost)
    iters += it
    if status == kernels.UNBOUNDED:
        return LPResult("unbounded", float("-inf"), None, iters)
    if status == kernels.ITERATION_LIMIT:
        return _fallback(lp, rule, max_iter, iters, "iteration_limit")
    y = np.zeros(N)
    y[basis] = T[:m, -1]
    y = np.maximum(y[:ny], 0.0)
    x = M @ y + offset
    if not _feasible(lp, x):
        return _fallback(lp, rule, max_iter, iters, "numerical_error")
    value = float(lp.c @ x)
    return LPResult("optimal", value, x, iters)


def _fallback(lp, rule, max_iter, iters, status) -> LPResult:
    # Bland's rule can stall or wander through badly conditioned bases once
    # the ratio test carries tolerances; the hybrid rule is the second try
    if rule == "bland":
        res = lp_min(lp, "hybrid", max_iter)
        return LPResult(res.status, res.value, res.x, iters + res.iterations)
    return LPResult(status, float("nan"), None, iters)


def _feasible(lp: LinearProgram, x: np.ndarray) -> bool:
    scale = 1.0 + max(np.abs(lp.b_ub).max(initial=0.0), np.abs(lp.b_eq).max(initial=0.0),
                      np.abs(x).max(initial=0.0))
    tol = FEAS_TOL * scale
    lo = np.where(np.isfinite(lp.lower), lp.lower, -np.inf)
    return bool(
        np.all(lp.A_ub @ x <= lp.b_ub + tol)
        and np.all(np.abs(lp.A_eq @ x - lp.b_eq) <= tol)
        and np.all(x >= lo - tol)
        and np.all(x <= lp.upper + tol)
    )


def solve_or_raise(lp: LinearProgram, rule: str = "bland") -> LPResult:
    res = lp_min(lp, rule=rule)
    if not res.optimal:
        raise LPError(f"linear program is {res.status}")
    return res
