"""Optimal values, designated mechanisms, optimality certificates and region partitions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_TOL,
    SNAP,
    Ambiguity,
    Certificate,
    Instance,
    PreconditionError,
)
from .mechanisms import FavoredAgentMechanism, GridMechanism, TieRule


def _first_argmax(values: Sequence[float]) -> int:
    v = np.asarray(values, dtype=float)
    return int(np.flatnonzero(v >= v.max() - SNAP)[0])


def _argmax_set(values: Sequence[float]) -> list[int]:
    v = np.asarray(values, dtype=float)
    return [int(k) for k in np.flatnonzero(v >= v.max() - SNAP)]


def _ranking_values(inst: Instance) -> tuple[float, ...]:
    if inst.ambiguity is Ambiguity.SUPPORT_ONLY:
        return inst.t_lo
    if inst.mu_lo is None:
        raise PreconditionError("mean bounds are required")
    return inst.mu_lo


def optimal_value(inst: Instance) -> float:
    """Best worst-case expected payoff: ``max t_lo`` without means, ``max mu_lo`` with them."""
    return float(max(_ranking_values(inst)))


def designated_mechanism(inst: Instance) -> FavoredAgentMechanism:
    """The favored-agent mechanism that is optimal and not dominated for the instance's ambiguity set."""
    vals = _ranking_values(inst)
    star = _first_argmax(vals)
    if inst.ambiguity is Ambiguity.SUPPORT_ONLY:
        return FavoredAgentMechanism(star + 1, max(vals), TieRule.TYPE_I)
    if inst.ambiguity is Ambiguity.MARKOV:
        return FavoredAgentMechanism(star + 1, inst.t_hi[star], TieRule.TYPE_II)
    return FavoredAgentMechanism(star + 1, max(vals), TieRule.TYPE_I)


def optimal_family_contains(inst: Instance, fam: FavoredAgentMechanism) -> Certificate:
    """Whether ``fam`` belongs to the family of optimal favored-agent mechanisms."""
    vals = _ranking_values(inst)
    top = _argmax_set(vals)
    star = fam.i_star - 1
    name = "optimal_family"
    if star not in top:
        return Certificate(
            name, False, f"agent {fam.i_star} is not among the top-ranked agents {[k + 1 for k in top]}",
            {"i_star": fam.i_star, "allowed": [k + 1 for k in top]},
        )
    if inst.ambiguity is Ambiguity.MARKOV:
        floor, what = inst.t_hi[star], "t_hi of the favored agent"
    else:
        floor, what = max(vals), "max mu_lo" if inst.ambiguity.has_means else "max t_lo"
    if fam.nu < floor - SNAP:
        return Certificate(
            name, False, f"threshold {fam.nu:g} is below {what} = {floor:g}",
            {"nu": fam.nu, "required_at_least": floor}, floor - fam.nu,
        )
    return Certificate(name, True, f"{fam.label()} is optimal", gap=fam.nu - floor)


def _markov_favored(inst: Instance) -> int:
    if inst.mu_lo is None:
        raise PreconditionError("mean bounds are required")
    top = _argmax_set(inst.mu_lo)
    if len(top) != 1:
        raise PreconditionError(
            f"agents {[k + 1 for k in top]} tie for the largest mu_lo; the condition needs a unique favored agent"
        )
    return top[0]


def check_markov_optimality_condition(mech: GridMechanism, inst: Instance, tol: float = DEFAULT_TOL) -> Certificate:
    """Payoff is at least the favored agent's type at every grid scenario.

    On failure the witness is the scenario with the largest shortfall.
    """
    star = _markov_favored(inst)
    scen = mech.grid.scenarios()
    shortfall = scen[:, star] - mech.payoffs()
    s = int(np.flatnonzero(shortfall >= shortfall.max() - SNAP)[0])
    worst = float(shortfall[s])
    if worst > tol:
        return Certificate(
            "markov_optimality_condition", False,
            f"payoff falls short of t_{star + 1} by {worst:.6g}",
            {"scenario": tuple(scen[s].tolist()), "violations": int((shortfall > tol).sum())}, worst, tol,
        )
    return Certificate(
        "markov_optimality_condition", True, f"payoff >= t_{star + 1} everywhere", gap=max(worst, 0.0), tolerance=tol
    )


def forced_region_mask(grid_scenarios: np.ndarray, inst: Instance, star: int) -> np.ndarray:
    net = grid_scenarios - np.array(inst.c)
    others = np.delete(net, star, axis=1).max(axis=1)
    return others < inst.t_hi[star] - SNAP


def check_forced_allocation(mech: GridMechanism, inst: Instance, tol: float = DEFAULT_TOL) -> Certificate:
    """The favored agent wins uninspected wherever no rival's net value reaches its top type."""
    star = _markov_favored(inst)
    scen = mech.grid.scenarios()
    mask = forced_region_mask(scen, inst, star)
    name = "forced_allocation"
    if not mask.any():
        return Certificate(name, True, "no grid scenario lies in the forced region", gap=0.0, tolerance=tol,
                           flags=("vacuous",))
    dev = np.maximum(1.0 - mech.p[:, star], mech.q[:, star])
    dev = np.where(mask, dev, 0.0)
    s = int(np.argmax(dev))
    if dev[s] > tol:
        return Certificate(
            name, False, f"agent {star + 1} is not served uninspected at a forced scenario",
            {"scenario": tuple(scen[s].tolist()), "p": float(mech.p[s, star]), "q": float(mech.q[s, star])},
            float(dev[s]), tol,
        )
    return Certificate(name, True, f"agent {star + 1} served uninspected on {int(mask.sum())} forced scenarios",
                       gap=float(dev.max()), tolerance=tol)


def payoff_equivalence(mech_a: GridMechanism, mech_b: GridMechanism, tol: float = DEFAULT_TOL) -> Certificate:
    if mech_a.grid != mech_b.grid:
        raise ValueError("mechanisms must share the same grid")
    diff = np.abs(mech_a.payoffs() - mech_b.payoffs())
    s = int(np.argmax(diff))
    gap = float(diff[s])
    if gap > tol:
        t = tuple(mech_a.grid.scenarios()[s].tolist())
        return Certificate("payoff_equivalence", False, f"payoffs differ by {gap:.6g} at {t}", {"scenario": t}, gap, tol)
    return Certificate("payoff_equivalence", True, "payoffs coincide on the grid", gap=gap, tolerance=tol)


# --- region partitions -------------------------------------------------------


class Partition(str, enum.Enum):
    SUPPORT_ONLY = "support_only"  # four regions
    MARKOV = "markov"  # five regions
    INDEPENDENT = "independent"  # five regions


LABELS = {
    Partition.SUPPORT_ONLY: ("T_I", "T_II", "T_III", "T_IV"),
    Partition.MARKOV: ("T_I", "T_II", "T_III", "T_IV", "T_V"),
    Partition.INDEPENDENT: ("T_I", "T_II", "T_III", "T_IV", "T_V"),
}


@dataclass(frozen=True)
class RegionLabel:
    partition: Partition
    label: str


class _Cmp:
    """Comparisons that treat values within ``tol`` of each other as equal."""

    def __init__(self, tol: float = SNAP):
        self.tol = tol

    def lt(self, a, b) -> bool:
        return a < b - self.tol

    def le(self, a, b) -> bool:
        return a <= b + self.tol

    def eq(self, a, b) -> bool:
        return abs(a - b) <= self.tol

    def in_half_open(self, x, lo, hi) -> bool:
        """``x`` in ``(lo, hi]``."""
        return self.lt(lo, x) and self.le(x, hi)


def partition_favored(inst: Instance, partition: Partition) -> int:
    if partition is Partition.SUPPORT_ONLY:
        return _first_argmax(inst.t_lo)
    if inst.mu_lo is None:
        raise PreconditionError("this partition needs mean bounds")
    return _first_argmax(inst.mu_lo)


def region_predicates(inst: Instance, t, partition: Partition | str, tol: float = SNAP) -> dict[str, bool]:
    """Membership of ``t`` in every region of the general ``I``-agent partition."""
    partition = Partition(partition)
    t = inst.require_contains(t)
    star = partition_favored(inst, partition)
    cmp = _Cmp(tol)
    c = np.array(inst.c)
    rivals = [k for k in range(inst.num_agents) if k != star]
    ts = float(t[star])
    M = max(float(t[k]) for k in rivals)
    m = max(float(t[k] - c[k]) for k in rivals)
    if partition is Partition.SUPPORT_ONLY:
        lo = inst.t_lo[star]
        some_between = any(cmp.in_half_open(float(t[k] - c[k]), lo, ts) for k in rivals)
        return {
            "T_I": cmp.le(m, lo) and cmp.lt(M, ts),
            "T_II": cmp.le(m, lo) and cmp.le(ts, M),
            "T_III": cmp.lt(lo, m) and not some_between,
            "T_IV": cmp.lt(lo, m) and some_between,
        }
    if partition is Partition.MARKOV:
        hi = inst.t_hi[star]
        upper = cmp.le(ts, M) and cmp.le(hi, M)
        return {
            "T_I": cmp.lt(M, ts),
            "T_II": cmp.le(ts, M) and cmp.lt(M, hi),
            "T_III": upper and cmp.lt(m, ts),
            "T_IV": upper and cmp.le(ts, m) and cmp.lt(m, hi),
            "T_V": upper and cmp.le(ts, m) and cmp.le(hi, m),
        }
    mu_lo, mu_hi = inst.mu_lo[star], inst.mu_hi[star]
    inside = cmp.in_half_open(ts, mu_lo, mu_hi)
    return {
        "T_I": inside and cmp.le(M, mu_lo),
        "T_II": inside and cmp.lt(mu_lo, M) and cmp.le(m, mu_lo),
        "T_III": not inside and cmp.le(m, mu_lo),
        "T_IV": cmp.eq(ts, mu_lo) and cmp.lt(mu_lo, m),
        "T_V": not cmp.eq(ts, mu_lo) and cmp.lt(mu_lo, m),
    }


def display_predicates(inst: Instance, t, partition: Partition | str, tol: float = SNAP) -> dict[str, bool]:
    """Two-agent region definitions, written with the favored agent as ``a`` and the rival as ``b``.

    Kept separate from :func:`region_predicates` so the two can be cross-checked.
    """
    partition = Partition(partition)
    if inst.num_agents != 2:
        raise PreconditionError("the two-agent forms need exactly two agents")
    t = inst.require_contains(t)
    a = partition_favored(inst, partition)
    b = 1 - a
    cmp = _Cmp(tol)
    ta, tb, cb = float(t[a]), float(t[b]), inst.c[b]
    if partition is Partition.SUPPORT_ONLY:
        lo = inst.t_lo[a]
        return {
            "T_I": cmp.le(tb - cb, lo) and cmp.lt(tb, ta),
            "T_II": cmp.le(tb - cb, lo) and cmp.le(ta, tb),
            "T_III": cmp.lt(lo, tb - cb) and cmp.lt(ta, tb - cb),
            "T_IV": cmp.lt(lo, tb - cb) and cmp.le(tb - cb, ta),
        }
    if partition is Partition.MARKOV:
        hi = inst.t_hi[a]
        return {
            "T_I": cmp.lt(tb, ta),
            "T_II": cmp.le(ta, tb) and cmp.lt(tb, hi),
            "T_III": cmp.le(ta, tb) and cmp.le(hi, tb) and cmp.lt(tb - cb, ta),
            "T_IV": cmp.le(ta, tb) and cmp.le(hi, tb) and cmp.le(ta, tb - cb) and cmp.lt(tb - cb, hi),
            "T_V": cmp.le(ta, tb) and cmp.le(hi, tb) and cmp.le(ta, tb - cb) and cmp.le(hi, tb - cb),
        }
    mu_lo, mu_hi = inst.mu_lo[a], inst.mu_hi[a]
    inside = cmp.lt(mu_lo, ta) and cmp.le(ta, mu_hi)
    return {
        "T_I": inside and cmp.le(tb, mu_lo),
        "T_II": inside and cmp.lt(mu_lo, tb) and cmp.le(tb - cb, mu_lo),
        "T_III": not inside and cmp.le(tb - cb, mu_lo),
        "T_IV": cmp.eq(ta, mu_lo) and cmp.lt(mu_lo, tb - cb),
        "T_V": not cmp.eq(ta, mu_lo) and cmp.lt(mu_lo, tb - cb),
    }


def classify_region(inst: Instance, t, partition: Partition | str) -> RegionLabel:
    partition = Partition(partition)
    preds = region_predicates(inst, t, partition)
    hits = [k for k, v in preds.items() if v]
    if len(hits) != 1:
        raise RuntimeError(f"profile {tuple(np.asarray(t).tolist())} matched regions {hits}")
    return RegionLabel(partition, hits[0])


def region_payoff(inst: Instance, t, label: RegionLabel) -> float:
    """Payoff the designated mechanism earns in a region: the favored type or the best net value."""
    star = partition_favored(inst, label.partition)
    t = np.asarray(t, dtype=float)
    favored_regions = {
        Partition.SUPPORT_ONLY: ("T_I", "T_II"),
        Partition.MARKOV: ("T_I", "T_II", "T_III", "T_IV"),
        Partition.INDEPENDENT: ("T_I", "T_II", "T_III"),
    }[label.partition]
    if label.label in favored_regions:
        return float(t[star])
    return float((t - np.array(inst.c)).max())


# --- known-distribution threshold ----------------------------------------------


@dataclass(frozen=True)
class ThresholdResult:
    nu: float
    residual: float
    degenerate: bool
    monotone: bool


def classical_threshold(values: Sequence[float], weights: Sequence[float], c: float,
                        xtol: float = 1e-10) -> ThresholdResult:
    """Threshold ``nu`` with ``E[t] = E[max(t - c, nu)]`` for a finite-support type.

    Solved by bisection on ``[min t - c, max t]``; the bisection trace is
    checked for monotonicity of the right-hand side.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.size == 0 or v.shape != w.shape:
        raise ValueError("values and weights must be non-empty and of equal length")
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > SNAP:
        raise ValueError("weights must be non-negative and sum to 1")
    if not c > 0:
        raise ValueError("c must be positive")
    mean = math.fsum(w * v)

    def rhs(nu: float) -> float:
        return math.fsum(w * np.maximum(v - c, nu))

    lo, hi = float(v.min() - c), float(v.max())
    g_lo, g_hi = rhs(lo) - mean, rhs(hi) - mean
    if g_lo > 0 or g_hi < 0:
        nu = lo if g_lo > 0 else hi
        return ThresholdResult(nu, abs(rhs(nu) - mean), True, True)
    trace = [(lo, rhs(lo)), (hi, rhs(hi))]
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        r = rhs(mid)
        trace.append((mid, r))
        if r - mean < 0:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    trace.sort()
    monotone = all(b[1] >= a[1] - 1e-12 for a, b in zip(trace, trace[1:]))
    return ThresholdResult(nu, abs(rhs(nu) - mean), False, monotone)


def perturb_tied_instance(inst: Instance, eps: float, agent: int | None = None) -> Instance:
    """Raise ``mu_lo`` of one top-ranked agent by ``eps`` to break a tie.

    The perturbed mean-bounded set is a subset of the original, so laws built
    for it remain admissible. ``agent`` is 1-based; by default the first
    top-ranked agent is used.
    """
    if inst.mu_lo is None:
        raise PreconditionError("mean bounds are required")
    if not eps > 0:
        raise ValueError("eps must be positive")
    k = _first_argmax(inst.mu_lo) if agent is None else agent - 1
    mu_lo = list(inst.mu_lo)
    mu_lo[k] += eps
    if mu_lo[k] > inst.mu_hi[k]:
        raise PreconditionError(f"eps={eps:g} pushes mu_lo above mu_hi for agent {k + 1}")
    return Instance(inst.t_lo, inst.t_hi, inst.c, inst.ambiguity, tuple(mu_lo), inst.mu_hi)
