"""Worst-case payoffs over ambiguity sets and adversarial two-point distributions."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_TOL,
    SNAP,
    Ambiguity,
    DiscreteDistribution,
    DomainError,
    Grid,
    Instance,
    PreconditionError,
    ProductTwoPointDistribution,
    WorstCase,
    check_membership,
    dirac,
)
from .lp import LinearProgram, LPError, lp_min
from .mechanisms import payoff_vector


class MomentInfeasibleError(ValueError):
    """No grid-supported distribution meets the mean bounds."""


def _first_argmin(values: np.ndarray) -> int:
    return int(np.flatnonzero(values <= values.min() + SNAP)[0])


def worst_case_support_only(payoff, grid: Grid, inst: Instance | None = None) -> WorstCase:
    """Minimum payoff over the grid; the witness is the first minimizing scenario."""
    f = payoff_vector(payoff, grid, inst)
    s = _first_argmin(f)
    t = grid.scenarios()[s]
    return WorstCase(float(f[s]), dirac(t), "grid_minimum", details={"scenario": tuple(t.tolist())})


def worst_case_markov(payoff, grid: Grid, inst: Instance) -> WorstCase:
    """Minimum expected payoff over grid-supported laws meeting the mean bounds (an LP)."""
    if inst.mu_lo is None or inst.mu_hi is None:
        raise PreconditionError("mean bounds are required")
    for k, ax in enumerate(grid.axes):
        if inst.mu_lo[k] > ax[-1] + SNAP:
            raise MomentInfeasibleError(f"agent {k + 1}: mu_lo={inst.mu_lo[k]:g} exceeds the largest grid value {ax[-1]:g}")
        if inst.mu_hi[k] < ax[0] - SNAP:
            raise MomentInfeasibleError(f"agent {k + 1}: mu_hi={inst.mu_hi[k]:g} is below the smallest grid value {ax[0]:g}")
    f = payoff_vector(payoff, grid, inst)
    scen = grid.scenarios()
    lp = LinearProgram(
        c=f,
        A_ub=np.vstack([-scen.T, scen.T]),
        b_ub=np.concatenate([-np.array(inst.mu_lo), np.array(inst.mu_hi)]),
        A_eq=np.ones((1, grid.size)),
        b_eq=np.array([1.0]),
    )
    res = lp_min(lp, rule="hybrid")
    if res.status == "numerical_error":
        raise LPError("moment LP lost accuracy on this grid")
    if not res.optimal:
        raise MomentInfeasibleError(f"moment system is {res.status} on this grid")
    w = res.x
    keep = np.flatnonzero(w > 1e-14)
    weights = w[keep] / math.fsum(w[keep])
    dist = DiscreteDistribution(tuple(map(tuple, scen[keep])), tuple(weights))
    cert = check_membership(dist, inst, Ambiguity.MARKOV, DEFAULT_TOL)
    if not cert.passed:
        raise LPError(f"worst-case witness failed the membership re-check: {cert.message}")
    value = math.fsum(float(v) for v in f[keep] * weights)
    mean = dist.mean()
    binding = [
        f"agent {k + 1} at {'mu_lo' if abs(mean[k] - inst.mu_lo[k]) <= DEFAULT_TOL else 'mu_hi'}"
        for k in range(inst.num_agents)
        if abs(mean[k] - inst.mu_lo[k]) <= DEFAULT_TOL or abs(mean[k] - inst.mu_hi[k]) <= DEFAULT_TOL
    ]
    return WorstCase(value, dist, "moment_lp", details={"binding": binding, "lp_iterations": res.iterations})


def _marginal_candidates(axis: Sequence[float], mu_lo: float, mu_hi: float):
    """Extreme points of the laws on ``axis`` with mean in ``[mu_lo, mu_hi]``.

    These are Diracs at axis points inside the interval and two-point laws
    whose mean sits exactly at ``mu_lo`` or ``mu_hi``. Order: by target mean, Diracs
    first, then pairs by (lo, hi).
    """
    ax = np.array(axis)
    n = ax.size
    weights, params = [], []
    targets = sorted({mu_lo, mu_hi} | {float(v) for v in ax if mu_lo - SNAP <= v <= mu_hi + SNAP})
    for m in targets:
        on_axis = np.flatnonzero(np.abs(ax - m) <= SNAP)
        if on_axis.size:
            w = np.zeros(n)
            w[on_axis[0]] = 1.0
            weights.append(w)
            params.append((ax[on_axis[0]], ax[on_axis[0]], 0.0))
        if abs(m - mu_lo) > SNAP and abs(m - mu_hi) > SNAP:
            continue
        below = np.flatnonzero(ax < m - SNAP)
        above = np.flatnonzero(ax > m + SNAP)
        for a in below:
            for b in above:
                ph = (m - ax[a]) / (ax[b] - ax[a])
                w = np.zeros(n)
                w[a], w[b] = 1.0 - ph, ph
                weights.append(w)
                params.append((ax[a], ax[b], ph))
    return np.array(weights), params


def worst_case_independent(
    mech,
    inst: Instance,
    marginal_grid: Grid,
    cap: int = 5_000_000,
) -> WorstCase:
    """Smallest expected payoff over product laws supported on ``marginal_grid``.

    For each agent the candidate marginals are the extreme points of the laws
    on its axis whose mean lies in ``[mu_lo, mu_hi]``. When the product of
    candidate counts fits under ``cap`` every combination is evaluated;
    otherwise a deterministic coordinate descent is used. Either way the value
    is an upper bound on the infimum over all independent laws.
    """
    if inst.mu_lo is None or inst.mu_hi is None:
        raise PreconditionError("mean bounds are required")
    if marginal_grid.size == 0:
        raise ValueError("marginal grid is empty")
    F = payoff_vector(mech, marginal_grid, inst).reshape(marginal_grid.shape)
    cands = [
        _marginal_candidates(ax, lo, hi) for ax, lo, hi in zip(marginal_grid.axes, inst.mu_lo, inst.mu_hi)
    ]
    for k, (W, _) in enumerate(cands):
        if W.size == 0:
            raise MomentInfeasibleError(f"agent {k + 1}: no law on the marginal grid meets the mean bounds")
    counts = [len(p) for _, p in cands]
    if math.prod(counts) <= cap:
        E = F
        for W, _ in cands:
            # contract the leading axis; the new candidate axis goes last
            E = np.tensordot(E, W, axes=([0], [1]))
        flat = E.ravel()
        j = _first_argmin(flat)
        choice = np.unravel_index(j, E.shape)
        method = "enumeration"
    else:
        choice = [0] * len(cands)
        best = None
        for _ in range(100):
            improved = False
            for k in range(len(cands)):
                # expected payoff as a function of agent k's axis point
                E = F
                for kk, (W, _) in enumerate(cands):
                    if kk == k:
                        E = np.moveaxis(E, 0, -1)
                    else:
                        E = np.tensordot(E, W[choice[kk]], axes=([0], [0]))
                vals = cands[k][0] @ E
                j = _first_argmin(vals)
                if best is None or vals[j] < best - SNAP:
                    best = float(vals[j])
                    choice[k] = j
                    improved = True
            if not improved:
                break
        method = "coordinate_descent"
    lo, hi, ph = zip(*[cands[k][1][int(c)] for k, c in enumerate(choice)])
    dist = ProductTwoPointDistribution(lo, hi, ph)
    value = _product_expectation(F, marginal_grid, dist)
    return WorstCase(value, dist, method, upper_bound_only=True, details={"candidates": counts})


def _product_expectation(F: np.ndarray, grid: Grid, dist: ProductTwoPointDistribution) -> float:
    d = dist.to_discrete()
    flat = F.ravel()
    return math.fsum(w * float(flat[grid.index_of(pt)]) for pt, w in zip(d.support, d.weights))


def _singleton_favored(inst: Instance) -> int:
    if inst.mu_lo is None:
        raise PreconditionError("mean bounds are required")
    mu = np.array(inst.mu_lo)
    top = np.flatnonzero(mu >= mu.max() - SNAP)
    if top.size != 1:
        raise PreconditionError(
            f"agents {[int(k) + 1 for k in top]} tie for the largest mu_lo; a unique favored agent is required"
        )
    return int(top[0])


def two_point_epsilon(inst: Instance) -> float:
    """Half the largest admissible box radius around ``mu_lo`` for the joint construction."""
    star = _singleton_favored(inst)
    mu = np.array(inst.mu_lo)
    lo, hi = np.array(inst.t_lo), np.array(inst.t_hi)
    gap = mu[star] - np.delete(mu, star).max()
    return 0.5 * min((mu - lo).min(), (hi - mu).min(), gap / 2.0)


def construct_two_point_markov(inst: Instance, t) -> DiscreteDistribution:
    """Law ``alpha*delta_t + (1-alpha)*delta_t_hat`` with mean exactly ``mu_lo``.

    ``t_hat`` lies in the box of radius ``eps`` around ``mu_lo`` where the
    favored agent has the strictly largest type. Support order is ``(t, t_hat)``.
    """
    t = inst.require_contains(t)
    eps = two_point_epsilon(inst)
    mu = np.array(inst.mu_lo)
    dev = np.abs(mu - t).max()
    if dev <= SNAP:
        return dirac(mu)
    alpha = eps / (eps + dev)
    t_hat = (mu - alpha * t) / (1.0 - alpha)
    return DiscreteDistribution((tuple(t), tuple(t_hat)), (alpha, 1.0 - alpha))


def product_epsilon(inst: Instance) -> float:
    star = _singleton_favored(inst)
    mu = np.array(inst.mu_lo)
    gap = mu[star] - np.delete(mu, star).max()
    return 0.5 * min((np.array(inst.t_hi) - np.array(inst.mu_hi)).min(), gap / 2.0)


def construct_product_two_point(inst: Instance, t, mu_target_istar: float) -> ProductTwoPointDistribution:
    """Independent two-point marginals putting positive mass on ``t``.

    Agents other than the favored one get mean ``mu_lo``; the favored agent
    gets mean ``mu_target_istar``. Each marginal is supported on ``t_i`` and
    a partner ``t_hat_i`` chosen so the others stay below ``mu_lo`` of the
    favored agent.
    """
    t = inst.require_contains(t)
    star = _singleton_favored(inst)
    if not inst.mu_lo[star] - SNAP <= mu_target_istar <= inst.mu_hi[star] + SNAP:
        raise PreconditionError(
            f"target mean {mu_target_istar:g} outside [{inst.mu_lo[star]:g}, {inst.mu_hi[star]:g}]"
        )
    eps = product_epsilon(inst)
    lo, hi, ph = [], [], []
    for k in range(inst.num_agents):
        target = mu_target_istar if k == star else inst.mu_lo[k]
        tk = float(t[k])
        if abs(tk - target) <= SNAP:
            lo.append(tk)
            hi.append(tk)
            ph.append(0.0)
            continue
        partner = inst.t_lo[k] if tk > target else target + eps
        alpha = (target - partner) / (tk - partner)  # mass on t_k
        if tk > partner:
            lo.append(partner)
            hi.append(tk)
            ph.append(alpha)
        else:
            lo.append(tk)
            hi.append(partner)
            ph.append(1.0 - alpha)
    return ProductTwoPointDistribution(lo, hi, ph)


def counterexample_distribution(which: str, nu: float = 0.0, inst: Instance | None = None):
    """Adversarial laws showing that low thresholds lose worst-case payoff.

    ``R2`` and ``R3`` are fixed to the built-in mean-bounded example (types
    ``[1,6] x [0,10]``, means ``[4,5] x [3,7]``, costs 2) and need
    ``nu`` in ``[1, 6)`` and ``[1, 4)``. ``R2`` is a correlated two-point law,
    ``R3`` a product law with the first agent deterministic. ``R4`` ignores
    ``nu``: agent 1 sits at ``mu_lo_1`` and agent 2 is two-point with mean
    ``mu_lo_2`` and upper point ``(t_hi_1 + mu_hi_1)/2 + c_2``.
    """
    from .io import load_builtin

    key = which.upper()
    if key == "R2":
        if not 1.0 <= nu < 6.0:
            raise ValueError(f"R2 needs nu in [1, 6), got {nu:g}")
        dist = DiscreteDistribution(((6.0, 6.5 + nu / 4.0), (2.0, 0.0)), (0.5, 0.5))
        base = load_builtin("markov_example")
    elif key == "R3":
        if not 1.0 <= nu < 4.0:
            raise ValueError(f"R3 needs nu in [1, 4), got {nu:g}")
        dist = ProductTwoPointDistribution((4.0, 2.0), (4.0, 5.0 + nu / 4.0), (0.0, 0.5))
        base = load_builtin("independent_example")
    elif key == "R4":
        base = inst if inst is not None else load_builtin("independent_example")
        if base.num_agents != 2 or base.mu_lo is None:
            raise PreconditionError("R4 is defined for two agents with mean bounds")
        top = (base.t_hi[0] + base.mu_hi[0]) / 2.0 + base.c[1]
        alpha = (base.mu_lo[1] - base.t_lo[1]) / (top - base.t_lo[1])
        mu1 = base.mu_lo[0]
        dist = ProductTwoPointDistribution((mu1, base.t_lo[1]), (mu1, top), (0.0, alpha))
    else:
        raise ValueError(f"unknown counterexample {which!r}; use R2, R3 or R4")
    cert = check_membership(dist, base)
    if not cert.passed:
        raise DomainError(f"{key} is not admissible for this instance: {cert.message}")
    return dist
