"""Favored-agent mechanisms and tabulated direct mechanisms on grids."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .core import (
    DEFAULT_TOL,
    SNAP,
    Certificate,
    DomainError,
    Grid,
    Instance,
    PreconditionError,
)


class TieRule(str, enum.Enum):
    """Which branch a favored-agent mechanism takes when the runner-up ties the threshold."""

    TYPE_I = "I"  # favored agent keeps the good
    TYPE_II = "II"  # contest is run

    @classmethod
    def parse(cls, text: str) -> "TieRule":
        key = str(text).strip().upper().replace("TYPE", "").replace("_", "")
        if key in ("I", "1"):
            return cls.TYPE_I
        if key in ("II", "2"):
            return cls.TYPE_II
        raise ValueError(f"unknown tie rule {text!r}; use I or II")


@dataclass(frozen=True)
class FavoredAgentMechanism:
    """Favored agent ``i_star`` (1-based) with threshold ``nu``.

    If every other agent's net value ``t_i - c_i`` is below ``nu`` the
    favored agent gets the good uninspected. Otherwise the agent with the
    highest net value (smallest index on ties) is inspected and served.
    """

    i_star: int
    nu: float
    tie_rule: TieRule = TieRule.TYPE_I

    def __post_init__(self):
        object.__setattr__(self, "i_star", int(self.i_star))
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "tie_rule", TieRule(self.tie_rule))
        if self.i_star < 1:
            raise ValueError("i_star is a 1-based agent label")
        if not math.isfinite(self.nu):
            raise ValueError("nu must be finite")

    def check_agents(self, inst: Instance) -> None:
        if self.i_star > inst.num_agents:
            raise ValueError(f"i_star={self.i_star} exceeds the number of agents ({inst.num_agents})")

    def label(self) -> str:
        return f"FAM(i*={self.i_star}, nu={self.nu:.12g}, {self.tie_rule.value})"


def _contest(t: np.ndarray, c: np.ndarray, fam: FavoredAgentMechanism) -> int | None:
    """Index of the served agent in the contest branch, or ``None`` if the favored agent keeps it."""
    net = t - c
    star = fam.i_star - 1
    m = max(v for k, v in enumerate(net) if k != star)
    if abs(m - fam.nu) <= SNAP:
        m = fam.nu
    keeps = m < fam.nu or (m == fam.nu and fam.tie_rule is TieRule.TYPE_I)
    if keeps:
        return None
    best = net.max()
    return int(np.flatnonzero(net >= best - SNAP)[0])


def fam_allocate(fam: FavoredAgentMechanism, inst: Instance, t) -> tuple[np.ndarray, np.ndarray]:
    """Allocation and inspection probabilities ``(p, q)`` at profile ``t``."""
    fam.check_agents(inst)
    t = inst.require_contains(t)
    c = inst.costs
    p = np.zeros(inst.num_agents)
    q = np.zeros(inst.num_agents)
    winner = _contest(t, c, fam)
    if winner is None:
        p[fam.i_star - 1] = 1.0
    else:
        p[winner] = q[winner] = 1.0
    return p, q


def fam_payoff(fam: FavoredAgentMechanism, inst: Instance, t) -> float:
    fam.check_agents(inst)
    t = inst.require_contains(t)
    c = inst.costs
    winner = _contest(t, c, fam)
    if winner is None:
        return float(t[fam.i_star - 1])
    return float(t[winner] - c[winner])


@dataclass(frozen=True, eq=False)
class GridMechanism:
    """Direct mechanism tabulated on a grid.

    ``p`` and ``q`` have one row per scenario (grid C order) and one column per
    agent. ``costs`` are carried so payoffs can be computed without the instance.
    """

    grid: Grid
    p: np.ndarray
    q: np.ndarray
    costs: tuple[float, ...]

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        q = np.array(self.q, dtype=float)
        shape = (self.grid.size, self.grid.num_agents)
        if p.shape != shape or q.shape != shape:
            raise ValueError(f"p and q must have shape {shape}")
        costs = tuple(float(v) for v in self.costs)
        if len(costs) != self.grid.num_agents:
            raise ValueError("costs must have one entry per agent")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "costs", costs)

    def payoffs(self) -> np.ndarray:
        t = self.grid.scenarios()
        return (self.p * t).sum(axis=1) - (self.q * np.array(self.costs)).sum(axis=1)

    def payoff_at(self, t) -> float:
        s = self.grid.index_of(t)
        if s is None:
            raise DomainError(f"profile {tuple(np.asarray(t).tolist())} is not a grid point")
        return float(self.payoffs()[s])

    def with_values(self, t, agent: int, p: float | None = None, q: float | None = None) -> "GridMechanism":
        """Copy with ``p``/``q`` of the 1-based ``agent`` replaced at grid profile ``t``."""
        s = self.grid.index_of(t)
        if s is None:
            raise DomainError(f"profile {tuple(np.asarray(t).tolist())} is not a grid point")
        P, Q = self.p.copy(), self.q.copy()
        if p is not None:
            P[s, agent - 1] = p
        if q is not None:
            Q[s, agent - 1] = q
        return GridMechanism(self.grid, P, Q, self.costs)


def fam_to_grid(fam: FavoredAgentMechanism, inst: Instance, grid: Grid) -> GridMechanism:
    fam.check_agents(inst)
    if grid.num_agents != inst.num_agents:
        raise ValueError("grid and instance disagree on the number of agents")
    if not grid.within(inst):
        raise DomainError("grid has points outside the type space")
    p, q = kernels.tabulate_fam(
        grid.scenarios(), inst.costs, fam.i_star - 1, fam.nu, fam.tie_rule is TieRule.TYPE_II, SNAP
    )
    return GridMechanism(grid, p, q, inst.c)


def _point(grid: Grid, s: int) -> tuple[float, ...]:
    idx = np.unravel_index(int(s), grid.shape)
    return tuple(grid.axes[k][j] for k, j in enumerate(idx))


def check_fc(mech: GridMechanism, tol: float = DEFAULT_TOL) -> Certificate:
    """Feasibility: probabilities in [0, 1], ``q <= p`` and total allocation at most one."""
    p, q = mech.p, mech.q
    violations = [
        ("p >= 0", -p),
        ("q >= 0", -q),
        ("q <= p", q - p),
        ("sum p <= 1", (p.sum(axis=1) - 1.0)[:, None]),
    ]
    for name, excess in violations:
        worst = float(excess.max())
        if worst > tol:
            s, k = np.unravel_index(int(np.argmax(excess)), excess.shape)
            witness = {"scenario": _point(mech.grid, s), "constraint": name}
            if name != "sum p <= 1":
                witness["agent"] = int(k) + 1
            return Certificate("fc", False, f"{name} violated by {worst:.3g}", witness, worst, tol)
    return Certificate("fc", True, "feasible", gap=0.0, tolerance=tol)


def check_ic(mech: GridMechanism, tol: float = DEFAULT_TOL) -> Certificate:
    """Grid incentive compatibility: ``p_i(t) >= p_i(t'_i, t_-i) - q_i(t'_i, t_-i)``."""
    worst = 0.0
    witness = None
    shape = mech.grid.shape
    for k in range(mech.grid.num_agents):
        pk = np.ascontiguousarray(mech.p[:, k])
        net = np.ascontiguousarray(mech.p[:, k] - mech.q[:, k])
        amin, ia, bmax, ib = kernels.line_extrema(pk, net, shape, k)
        gaps = bmax - amin
        j = int(np.argmax(gaps))
        if gaps[j] > worst + SNAP:
            worst = float(gaps[j])
            truth = _point(mech.grid, ia[j])
            witness = {"agent": k + 1, "truth": truth, "misreport": _point(mech.grid, ib[j])[k]}
    if worst > tol:
        return Certificate(
            "ic", False, f"agent {witness['agent']} gains {worst:.3g} by misreporting", witness, worst, tol
        )
    return Certificate("ic", True, "incentive compatible on the grid", gap=worst, tolerance=tol)


def net_allocation_spread(mech: GridMechanism) -> tuple[float, dict | None]:
    """Largest variation of ``p_i - q_i`` along agent ``i``'s own axis."""
    worst, witness = 0.0, None
    for k in range(mech.grid.num_agents):
        net = np.ascontiguousarray(mech.p[:, k] - mech.q[:, k])
        amin, ia, bmax, ib = kernels.line_extrema(net, net, mech.grid.shape, k)
        spread = bmax - amin
        j = int(np.argmax(spread))
        if spread[j] > worst + SNAP:
            worst = float(spread[j])
            witness = {
                "agent": k + 1,
                "low_at": _point(mech.grid, ia[j]),
                "high_at": _point(mech.grid, ib[j]),
                "low": float(amin[j]),
                "high": float(bmax[j]),
            }
    return worst, witness


def check_constant_net_allocation(mech: GridMechanism, tol: float = DEFAULT_TOL) -> Certificate:
    """``p_i - q_i`` does not depend on agent ``i``'s own report."""
    spread, witness = net_allocation_spread(mech)
    if spread > tol:
        return Certificate(
            "constant_net_allocation", False, f"p-q varies by {spread:.3g} along agent {witness['agent']}'s axis",
            witness, spread, tol,
        )
    return Certificate("constant_net_allocation", True, "p-q constant along each own axis", gap=spread, tolerance=tol)


def mix(mechs: Sequence[GridMechanism], weights: Sequence[float]) -> GridMechanism:
    """Convex combination of mechanisms tabulated on the same grid."""
    if len(mechs) == 0 or len(mechs) != len(weights):
        raise ValueError("need one weight per mechanism")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > SNAP:
        raise ValueError("weights must be non-negative and sum to 1")
    base = mechs[0]
    for m in mechs[1:]:
        if m.grid != base.grid:
            raise ValueError("mechanisms must share the same grid")
        if m.costs != base.costs:
            raise ValueError("mechanisms must share the same costs")
    p = sum(wk * m.p for wk, m in zip(w, mechs))
    q = sum(wk * m.q for wk, m in zip(w, mechs))
    return GridMechanism(base.grid, p, q, base.costs)


def inspection_perturbation(fam: FavoredAgentMechanism, inst: Instance, grid: Grid) -> GridMechanism:
    """Add an avoidable inspection of the favored agent at ``(t_hi*, t_lo_-*)``.

    Requires the favored agent to have the largest lower bound and a threshold
    ``nu >= max t_lo`` with ``nu > max_i (t_hi_i - c_i)``, so the favored agent
    always keeps the good. The added inspection probability is
    ``min(1, (t_hi* - t_lo*) / c*)``, the most that leaves incentives intact.
    """
    fam.check_agents(inst)
    star = fam.i_star - 1
    t_lo = np.array(inst.t_lo)
    t_hi = np.array(inst.t_hi)
    if t_lo[star] < t_lo.max():
        raise PreconditionError(f"agent {fam.i_star} does not have the largest lower bound")
    if fam.nu < t_lo.max():
        raise PreconditionError(f"threshold {fam.nu:g} is below max t_lo = {t_lo.max():g}")
    if not fam.nu > (t_hi - inst.costs).max():
        raise PreconditionError(f"threshold {fam.nu:g} must exceed max (t_hi - c) = {(t_hi - inst.costs).max():g}")
    base = fam_to_grid(fam, inst, grid)
    t_hat = t_lo.copy()
    t_hat[star] = t_hi[star]
    if not grid.contains(t_hat):
        raise PreconditionError(f"grid does not contain the profile {tuple(t_hat.tolist())}")
    q_new = min(1.0, (t_hi[star] - t_lo[star]) / inst.c[star])
    return base.with_values(t_hat, fam.i_star, q=q_new)


def payoff_function(mech, inst: Instance | None = None) -> Callable[[np.ndarray], float]:
    """Uniform ``t -> payoff`` view of a FAM (needs ``inst``), a grid mechanism or a callable."""
    if isinstance(mech, FavoredAgentMechanism):
        if inst is None:
            raise ValueError("an instance is required to evaluate a favored-agent mechanism")
        return lambda t: fam_payoff(mech, inst, t)
    if isinstance(mech, GridMechanism):
        values = mech.payoffs()

        def lookup(t):
            s = mech.grid.index_of(t)
            if s is None:
                raise DomainError(f"profile {tuple(np.asarray(t).tolist())} is not a grid point")
            return float(values[s])

        return lookup
    if callable(mech):
        return mech
    raise TypeError(f"cannot evaluate payoffs of {type(mech).__name__}")


def payoff_vector(mech, grid: Grid, inst: Instance | None = None) -> np.ndarray:
    """Payoff at every scenario of ``grid``."""
    if isinstance(mech, GridMechanism):
        if mech.grid != grid:
            raise ValueError("mechanism is tabulated on a different grid")
        return mech.payoffs()
    if isinstance(mech, FavoredAgentMechanism):
        if inst is None:
            raise ValueError("an instance is required to evaluate a favored-agent mechanism")
        return fam_to_grid(mech, inst, grid).payoffs()
    if isinstance(mech, np.ndarray):
        if mech.shape != (grid.size,):
            raise ValueError("payoff vector does not match the grid")
        return mech
    fn = payoff_function(mech, inst)
    return np.array([fn(t) for t in grid.scenarios()])
