"""Pareto dominance between mechanisms and LP searches for dominating grid mechanisms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .ambiguity import construct_two_point_markov, two_point_epsilon
from .core import (
    DEFAULT_TOL,
    SNAP,
    Ambiguity,
    DomainError,
    Grid,
    Instance,
    PreconditionError,
    check_membership,
    expected_payoff,
)
from .lp import LinearProgram, LPError, lp_min
from .mechanisms import GridMechanism, payoff_function
from .optimality import _argmax_set, perturb_tied_instance


class Relation(str, enum.Enum):
    EQUAL = "equal"
    A_STRICTLY_DOMINATES = "A_strictly_dominates"
    B_STRICTLY_DOMINATES = "B_strictly_dominates"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class DominanceReport:
    """Gaps ``A - B`` per scenario or per distribution and the resulting relation."""

    relation: Relation
    gaps: tuple[float, ...]
    labels: tuple[Any, ...]
    witness: Mapping[str, Any] | None = None
    tolerance: float = DEFAULT_TOL

    @property
    def a_weakly_dominates(self) -> bool:
        return self.relation in (Relation.EQUAL, Relation.A_STRICTLY_DOMINATES)

    @property
    def max_gap(self) -> float:
        return max(self.gaps)

    @property
    def min_gap(self) -> float:
        return min(self.gaps)


def _classify(gaps: np.ndarray, labels: Sequence[Any], tol: float) -> DominanceReport:
    hi = int(np.argmax(gaps))
    lo = int(np.argmin(gaps))
    up = gaps[hi] > tol
    down = gaps[lo] < -tol
    if up and down:
        rel = Relation.INCOMPARABLE
        witness = {"A_better_at": labels[hi], "A_gap": float(gaps[hi]), "B_better_at": labels[lo], "B_gap": float(-gaps[lo])}
    elif up:
        rel = Relation.A_STRICTLY_DOMINATES
        witness = {"at": labels[hi], "gap": float(gaps[hi])}
    elif down:
        rel = Relation.B_STRICTLY_DOMINATES
        witness = {"at": labels[lo], "gap": float(-gaps[lo])}
    else:
        rel, witness = Relation.EQUAL, None
    return DominanceReport(rel, tuple(float(g) for g in gaps), tuple(labels), witness, tol)


def pointwise_dominance(mech_a: GridMechanism, mech_b: GridMechanism, tol: float = DEFAULT_TOL) -> DominanceReport:
    """Scenario-wise payoff comparison on a shared grid."""
    if mech_a.grid != mech_b.grid:
        raise ValueError("mechanisms must share the same grid")
    gaps = mech_a.payoffs() - mech_b.payoffs()
    labels = [tuple(t) for t in mech_a.grid.scenarios().tolist()]
    return _classify(gaps, labels, tol)


def distributional_dominance(mech_a, mech_b, dists: Sequence, inst: Instance, tol: float = DEFAULT_TOL) -> DominanceReport:
    """Expected-payoff gaps ``A - B`` under each supplied admissible law."""
    if len(dists) == 0:
        raise ValueError("at least one distribution is required")
    fa = payoff_function(mech_a, inst)
    fb = payoff_function(mech_b, inst)
    gaps = []
    for k, d in enumerate(dists):
        cert = check_membership(d, inst)
        if not cert.passed:
            raise DomainError(f"distribution {k} rejected: {cert.message}")
        gaps.append(expected_payoff(fa, d, inst) - expected_payoff(fb, d, inst))
    return _classify(np.array(gaps), list(range(len(dists))), tol)


# --- LP building blocks ----------------------------------------------------------


class _Layout:
    """Column layout ``[p | q | u | extra]`` shared by the Pareto LPs.

    ``p`` and ``q`` are scenario-major. ``u`` holds one variable per
    (agent, line): the largest ``p - q`` along that line, which every ``p`` on
    the line must match. This encodes grid incentive compatibility with
    ``2 n_i`` rows per line instead of ``n_i (n_i - 1)``.
    """

    def __init__(self, grid: Grid, n_extra: int):
        self.grid = grid
        self.S, self.I = grid.size, grid.num_agents
        self.n_pq = self.S * self.I
        self.lines = []
        idx = np.arange(self.S).reshape(grid.shape)
        for k in range(self.I):
            lines_k = np.moveaxis(idx, k, -1).reshape(-1, grid.shape[k])
            self.lines.extend((k, line) for line in lines_k)
        self.u0 = 2 * self.n_pq
        self.x0 = self.u0 + len(self.lines)
        self.n = self.x0 + n_extra

    def p(self, s, k):
        return s * self.I + k

    def q(self, s, k):
        return self.n_pq + s * self.I + k

    def feasibility_rows(self):
        rows, rhs = [], []
        for s in range(self.S):
            for k in range(self.I):
                r = np.zeros(self.n)
                r[self.q(s, k)] = 1.0
                r[self.p(s, k)] = -1.0
                rows.append(r)
                rhs.append(0.0)
            r = np.zeros(self.n)
            r[[self.p(s, k) for k in range(self.I)]] = 1.0
            rows.append(r)
            rhs.append(1.0)
        for j, (k, line) in enumerate(self.lines):
            u = self.u0 + j
            for s in line:
                r = np.zeros(self.n)
                r[self.p(s, k)] = 1.0
                r[self.q(s, k)] = -1.0
                r[u] = -1.0
                rows.append(r)
                rhs.append(0.0)
                r = np.zeros(self.n)
                r[u] = 1.0
                r[self.p(s, k)] = -1.0
                rows.append(r)
                rhs.append(0.0)
        return rows, rhs

    def payoff_matrix(self, costs) -> np.ndarray:
        """Row ``s`` maps the variables to the payoff at scenario ``s``."""
        P = np.zeros((self.S, self.n))
        scen = self.grid.scenarios()
        for s in range(self.S):
            for k in range(self.I):
                P[s, self.p(s, k)] = scen[s, k]
                P[s, self.q(s, k)] = -costs[k]
        return P

    def mechanism(self, x: np.ndarray, costs) -> GridMechanism:
        p = np.clip(x[: self.n_pq], 0.0, 1.0).reshape(self.S, self.I)
        q = np.clip(x[self.n_pq : 2 * self.n_pq], 0.0, 1.0).reshape(self.S, self.I)
        q = np.minimum(q, p)
        return GridMechanism(self.grid, p, q, costs)


@dataclass(frozen=True)
class ParetoResult:
    """Optimal total improvement over the base and a mechanism attaining it.

    Unpacks as ``(value, witness)``.
    """

    value: float
    witness: GridMechanism | None
    flags: tuple[str, ...] = ()
    resolution: Mapping[str, Any] = field(default_factory=dict)
    gaps: tuple[float, ...] = ()

    def __iter__(self):
        return iter((self.value, self.witness))

    @property
    def certifies_optimal(self) -> bool:
        return "degenerate" not in self.flags and self.value <= 1e-6


def _check_base(inst: Instance, grid: Grid, base: GridMechanism) -> None:
    if base.grid != grid:
        raise ValueError("base mechanism must be tabulated on the search grid")
    if grid.num_agents != inst.num_agents:
        raise ValueError("grid and instance disagree on the number of agents")


def pareto_search_support_only(inst: Instance, grid: Grid, base: GridMechanism) -> ParetoResult:
    """Largest total scenario-wise improvement over ``base`` by any feasible grid mechanism.

    A value of zero certifies that no grid mechanism weakly improves on
    ``base`` everywhere and strictly somewhere.
    """
    if inst.ambiguity is not Ambiguity.SUPPORT_ONLY:
        raise PreconditionError("pointwise search applies to support-only instances")
    _check_base(inst, grid, base)
    lay = _Layout(grid, grid.size)
    rows, rhs = lay.feasibility_rows()
    P = lay.payoff_matrix(inst.c)
    base_pay = base.payoffs()
    for s in range(grid.size):
        r = -P[s].copy()
        r[lay.x0 + s] = 1.0
        rows.append(r)
        rhs.append(-base_pay[s])
    c = np.zeros(lay.n)
    c[lay.x0 :] = -1.0
    res = lp_min(LinearProgram(c, np.array(rows), np.array(rhs)), rule="hybrid")
    if not res.optimal:
        raise LPError(f"pointwise Pareto LP is {res.status}")
    slack = res.x[lay.x0 :]
    value = max(0.0, math.fsum(slack))
    return ParetoResult(
        value,
        lay.mechanism(res.x, inst.c),
        resolution={"grid_shape": grid.shape, "scenarios": grid.size},
        gaps=tuple(float(v) for v in slack),
    )


def _bracket(axis: Sequence[float], v: float) -> list[tuple[int, float]]:
    """Two-point law on adjacent axis points with mean ``v`` (a Dirac if ``v`` is on the axis)."""
    ax = np.asarray(axis)
    j = int(np.argmin(np.abs(ax - v)))
    if abs(ax[j] - v) <= SNAP:
        return [(j, 1.0)]
    lo = int(np.searchsorted(ax, v)) - 1
    if lo < 0 or lo + 1 >= ax.size:
        raise DomainError(f"value {v:g} lies outside the grid axis")
    a, b = ax[lo], ax[lo + 1]
    wb = (v - a) / (b - a)
    return [(lo, 1.0 - wb), (lo + 1, wb)]


def probe_anchors(inst: Instance) -> list[list[float]]:
    """Axis points that keep grid probes inside the box where the favored agent leads."""
    eps = two_point_epsilon(_probe_instance(inst))
    return [[m - eps, m, m + eps] for m in inst.mu_lo]


def _probe_instance(inst: Instance) -> Instance:
    top = _argmax_set(inst.mu_lo)
    if len(top) == 1:
        return inst
    k = top[0]
    room = inst.mu_hi[k] - inst.mu_lo[k]
    if room <= 0:
        raise PreconditionError("tied mu_lo with degenerate mean bounds; supply probes explicitly")
    return perturb_tied_instance(inst, room / 2.0, k + 1)


def grid_probe(inst: Instance, grid: Grid, t) -> np.ndarray:
    """Admissible grid-supported law with positive mass on ``t``, as a weight vector.

    Built from the joint two-point construction; the partner profile is
    replaced by the product of its per-axis brackets, which keeps every mean.
    """
    dist = construct_two_point_markov(_probe_instance(inst), t)
    w = np.zeros(grid.size)
    for pt, weight in zip(dist.support, dist.weights):
        s = grid.index_of(pt)
        if s is not None:
            w[s] += weight
            continue
        brackets = [_bracket(ax, v) for ax, v in zip(grid.axes, pt)]
        for combo in np.ndindex(*[len(b) for b in brackets]):
            pos = [brackets[k][j][0] for k, j in enumerate(combo)]
            pw = math.prod(brackets[k][j][1] for k, j in enumerate(combo))
            w[int(np.ravel_multi_index(pos, grid.shape))] += weight * pw
    return w


def default_probes(inst: Instance, grid: Grid) -> np.ndarray:
    """One grid probe per scenario (rows of the returned matrix)."""
    return np.array([grid_probe(inst, grid, t) for t in grid.scenarios()])


def pareto_search_markov(
    inst: Instance,
    grid: Grid,
    base: GridMechanism,
    probes: np.ndarray | Sequence | None = None,
) -> ParetoResult:
    """Largest total probe improvement over ``base`` without losing under any grid law.

    The mechanism must satisfy feasibility and grid incentive compatibility
    and weakly improve on ``base`` under every law on the grid meeting the
    mean bounds; that robust constraint is replaced by its LP dual. The
    objective is the sum over probes of the expected improvement. Zero (up
    to 1e-6) certifies that no improvement is visible at this grid and probe
    resolution.
    """
    if inst.ambiguity is not Ambiguity.MARKOV:
        raise PreconditionError("the robust search applies to instances with mean bounds and no independence")
    _check_base(inst, grid, base)
    flags: list[str] = []
    if probes is None:
        Pk = default_probes(inst, grid)
        anchors = probe_anchors(inst)
        if not all(grid.contains_axis_values(k, vals) for k, vals in enumerate(anchors)):
            flags.append("coarse_probes")
    else:
        Pk = np.atleast_2d(np.asarray(probes, dtype=float)) if len(probes) else np.zeros((0, grid.size))
    resolution = {"grid_shape": grid.shape, "scenarios": grid.size, "probes": int(Pk.shape[0])}
    if Pk.shape[0] == 0:
        return ParetoResult(float("inf"), None, ("degenerate", "unbounded_delta"), resolution)
    if Pk.shape[1] != grid.size:
        raise ValueError("each probe must give one weight per grid scenario")
    scen = grid.scenarios()
    for k, w in enumerate(Pk):
        if np.any(w < -SNAP) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"probe {k} is not a probability vector")
        mean = w @ scen
        if np.any(mean < np.array(inst.mu_lo) - 1e-9) or np.any(mean > np.array(inst.mu_hi) + 1e-9):
            raise DomainError(f"probe {k} violates the mean bounds")

    I, K = inst.num_agents, Pk.shape[0]
    lay = _Layout(grid, 1 + 2 * I + K)
    lam, alpha0, beta0, delta0 = lay.x0, lay.x0 + 1, lay.x0 + 1 + I, lay.x0 + 1 + 2 * I
    rows, rhs = lay.feasibility_rows()
    P = lay.payoff_matrix(inst.c)
    base_pay = base.payoffs()
    # dual of the inner minimization: lam + (alpha - beta).t(s) <= payoff(s) - base(s)
    for s in range(grid.size):
        r = -P[s].copy()
        r[lam] = 1.0
        r[alpha0 : alpha0 + I] = scen[s]
        r[beta0 : beta0 + I] = -scen[s]
        rows.append(r)
        rhs.append(-base_pay[s])
    r = np.zeros(lay.n)
    r[lam] = -1.0
    r[alpha0 : alpha0 + I] = -np.array(inst.mu_lo)
    r[beta0 : beta0 + I] = np.array(inst.mu_hi)
    rows.append(r)
    rhs.append(0.0)
    for k in range(K):
        r = -(Pk[k] @ P)
        r[delta0 + k] = 1.0
        rows.append(r)
        rhs.append(-float(Pk[k] @ base_pay))
    c = np.zeros(lay.n)
    c[delta0:] = -1.0
    lower = np.zeros(lay.n)
    lower[lam] = -np.inf
    res = lp_min(LinearProgram(c, np.array(rows), np.array(rhs), lower=lower), rule="hybrid")
    if not res.optimal:
        raise LPError(f"robust Pareto LP is {res.status}")
    deltas = res.x[delta0:]
    value = max(0.0, math.fsum(deltas))
    return ParetoResult(value, lay.mechanism(res.x, inst.c), tuple(flags), resolution,
                        tuple(float(v) for v in deltas))
