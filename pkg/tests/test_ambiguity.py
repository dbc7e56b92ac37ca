import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robustalloc.ambiguity import (
    MomentInfeasibleError,
    construct_product_two_point,
    construct_two_point_markov,
    counterexample_distribution,
    product_epsilon,
    two_point_epsilon,
    worst_case_independent,
    worst_case_markov,
    worst_case_support_only,
)
from robustalloc.core import (
    Ambiguity,
    DiscreteDistribution,
    Grid,
    Instance,
    PreconditionError,
    ProductTwoPointDistribution,
    expected_payoff,
    make_grid,
)
from robustalloc.mechanisms import FavoredAgentMechanism, TieRule, payoff_function, payoff_vector
from robustalloc.optimality import designated_mechanism
from robustalloc.pareto import default_probes, probe_anchors

from strategies import instances


def fam(i, nu, tie="I"):
    return FavoredAgentMechanism(i, nu, TieRule(tie))


def markov_grid(inst, nu=2.0):
    return make_grid(inst, 2, {1: [1, 2, 4, 5, 6], 2: [0, 3, 6.5 + nu / 4, 7, 8, 10]})


# --- support only -----------------------------------------------------------


def test_support_only_designated(support_only):
    grid = make_grid(support_only, 2, {1: [2, 3], 2: [0, 2, 3, 10]})
    wc = worst_case_support_only(fam(1, 2.0), grid, support_only)
    assert wc.value == 2.0
    assert wc.method == "grid_minimum"


def test_support_only_low_threshold(support_only):
    grid = make_grid(support_only, 3, {1: [2], 2: [2.75]})
    assert worst_case_support_only(fam(1, 1.5, "II"), grid, support_only).value <= 1.75 + 1e-9


def test_support_only_constant_payoff():
    grid = Grid(((0.0, 1.0), (2.0, 3.0)))
    wc = worst_case_support_only(lambda t: 5.0, grid)
    assert wc.value == 5.0
    assert wc.details["scenario"] == (0.0, 2.0)


# --- mean bounds ------------------------------------------------------------


def test_markov_designated(markov):
    wc = worst_case_markov(fam(1, 6.0, "II"), markov_grid(markov), markov)
    assert wc.value == pytest.approx(4.0, abs=1e-9)


def test_markov_low_threshold(markov):
    wc = worst_case_markov(fam(1, 2.0, "II"), markov_grid(markov), markov)
    assert wc.value <= 3.5 + 1e-9
    assert wc.witness.mean()[0] >= 4.0 - 1e-9


def test_markov_linear_objective(markov):
    wc = worst_case_markov(lambda t: t[0], markov_grid(markov), markov)
    assert wc.value == pytest.approx(4.0, abs=1e-9)
    assert "agent 1 at mu_lo" in wc.details["binding"]


def test_markov_infeasible_grid(markov):
    with pytest.raises(MomentInfeasibleError):
        worst_case_markov(lambda t: 0.0, Grid(((1.0, 2.0), (0.0, 10.0))), markov)
    with pytest.raises(PreconditionError):
        worst_case_markov(lambda t: 0.0, Grid(((1.0,), (0.0,))), markov.with_ambiguity("support_only").__class__(
            (1, 0), (6, 10), (2, 2)))


def test_markov_matches_scipy(markov):
    linprog = pytest.importorskip("scipy.optimize").linprog
    grid = markov_grid(markov)
    scen = grid.scenarios()
    for nu in (1.0, 2.0, 3.5, 6.0):
        f = payoff_vector(fam(1, nu, "II"), grid, markov)
        ref = linprog(f, A_ub=np.vstack([-scen.T, scen.T]), b_ub=np.r_[-np.array(markov.mu_lo), markov.mu_hi],
                      A_eq=np.ones((1, grid.size)), b_eq=[1.0], method="highs")
        assert worst_case_markov(fam(1, nu, "II"), grid, markov).value == pytest.approx(ref.fun, abs=1e-9)


@given(instances("markov", agents=(2, 3), unique_top=True), st.floats(0.0, 12.0), st.sampled_from(["I", "II"]))
def test_markov_below_every_probe(inst, nu, tie):
    grid = make_grid(inst, 3, {k + 1: v for k, v in enumerate(probe_anchors(inst))})
    mech = fam(1, nu, tie)
    wc = worst_case_markov(mech, grid, inst)
    f = payoff_vector(mech, grid, inst)
    for w in default_probes(inst, grid):
        assert wc.value <= float(w @ f) + 1e-9


# --- independence -----------------------------------------------------------


def test_independent_designated(independent):
    wc = worst_case_independent(fam(1, 4.0), independent, make_grid(independent, 3))
    assert wc.value == pytest.approx(4.0, abs=1e-9)
    assert wc.upper_bound_only
    assert wc.witness.to_discrete().prob((4.0, 3.0)) == pytest.approx(1.0)


def test_independent_low_threshold(independent):
    grid = make_grid(independent, 2, {1: [4], 2: [5.5, 2]})
    assert worst_case_independent(fam(1, 2.0, "II"), independent, grid).value <= 3.75 + 1e-9


def test_independent_linear_objective(independent):
    wc = worst_case_independent(lambda t: t[0], independent, make_grid(independent, 3))
    assert wc.value == pytest.approx(4.0, abs=1e-12)


def _random_marginal(rng, axis, lo, hi):
    """Random law on ``axis`` with mean in ``[lo, hi]``: a mixture of a point below and above a target."""
    ax = np.asarray(axis)
    m = rng.uniform(lo, hi)
    below, above = ax[ax <= m], ax[ax >= m]
    a, b = rng.choice(below), rng.choice(above)
    w = np.zeros(ax.size)
    if a == b:
        w[np.flatnonzero(ax == a)[0]] = 1.0
    else:
        pb = (m - a) / (b - a)
        w[np.flatnonzero(ax == a)[0]] += 1 - pb
        w[np.flatnonzero(ax == b)[0]] += pb
    return w


@given(instances("markov_independent", agents=(2, 3)), st.floats(0.0, 10.0), st.integers(0, 1000))
def test_independent_below_sampled_products(inst, nu, seed):
    rng = np.random.default_rng(seed)
    grid = make_grid(inst, 4)
    mech = fam(1, nu, "II")
    wc = worst_case_independent(mech, inst, grid)
    F = payoff_vector(mech, grid, inst).reshape(grid.shape)
    for _ in range(10):
        E = F
        for ax, lo, hi in zip(grid.axes, inst.mu_lo, inst.mu_hi):
            # mixtures of two admissible laws stay admissible
            w = 0.5 * (_random_marginal(rng, ax, lo, hi) + _random_marginal(rng, ax, lo, hi))
            E = np.tensordot(w, E, axes=([0], [0]))
        assert wc.value <= float(E) + 1e-9


@given(instances("markov_independent", agents=(2, 3)), st.floats(0.0, 10.0))
def test_coordinate_descent_bounds_enumeration(inst, nu):
    grid = make_grid(inst, 4)
    mech = fam(1, nu, "II")
    exact = worst_case_independent(mech, inst, grid)
    local = worst_case_independent(mech, inst, grid, cap=1)
    assert local.method == "coordinate_descent"
    assert local.value >= exact.value - 1e-9
    assert local.value == pytest.approx(expected_payoff(payoff_function(mech, inst), local.witness, inst), abs=1e-9)


# --- constructions ----------------------------------------------------------


def test_two_point_example(markov):
    assert two_point_epsilon(markov) == 0.25
    d = construct_two_point_markov(markov, (6, 10))
    assert d.weights[0] == pytest.approx(1 / 29, abs=1e-15)
    np.testing.assert_allclose(d.support[1], (110 / 28, 77 / 28), atol=1e-12)
    np.testing.assert_allclose(d.mean(), (4.0, 3.0), atol=1e-12)


def test_two_point_fixed_point(markov):
    d = construct_two_point_markov(markov, (4, 3))
    assert d.support == ((4.0, 3.0),) and d.weights == (1.0,)


def test_two_point_needs_unique_leader():
    inst = Instance([1, 1], [6, 6], [1, 1], "markov", [3, 3], [4, 4])
    with pytest.raises(PreconditionError):
        construct_two_point_markov(inst, (2, 2))


def test_product_example(independent):
    assert product_epsilon(independent) == 0.25
    d = construct_product_two_point(independent, (6, 10), 4.0)
    assert (d.lo, d.hi) == ((1.0, 0.0), (6.0, 10.0))
    np.testing.assert_allclose(d.prob_hi, (0.6, 0.3))
    assert d.prob((6, 10)) == pytest.approx(0.18)
    np.testing.assert_allclose(d.marginal_mean(), (4.0, 3.0), atol=1e-12)


def test_product_fixed_point(independent):
    d = construct_product_two_point(independent, (4, 3), 4.0)
    assert d.to_discrete().support == ((4.0, 3.0),)
    with pytest.raises(PreconditionError):
        construct_product_two_point(independent, (4, 3), 6.0)


def _box_and_order(inst, t, d, star):
    return all(inst.contains(p, 1e-9) for p in d.support)


@given(instances("markov", agents=(2, 4), unique_top=True), st.data())
def test_two_point_properties(inst, data):
    t = np.array([data.draw(st.floats(lo, hi)) for lo, hi in zip(inst.t_lo, inst.t_hi)])
    d = construct_two_point_markov(inst, t)
    star = int(np.argmax(inst.mu_lo))
    # exact mean, computed here by hand
    mean = sum(w * np.array(p) for p, w in zip(d.support, d.weights))
    np.testing.assert_allclose(mean, inst.mu_lo, atol=1e-9)
    assert all(inst.contains(p, 1e-9) for p in d.support)
    assert d.prob(t) > 0
    t_hat = np.array(d.support[-1])
    if len(d.support) == 2:
        assert 0 < d.weights[0] < 1
        assert np.delete(t_hat, star).max() < t_hat[star]


@given(instances("markov_independent", agents=(2, 4), unique_top=True), st.data())
def test_product_properties(inst, data):
    t = np.array([data.draw(st.floats(lo, hi)) for lo, hi in zip(inst.t_lo, inst.t_hi)])
    star = int(np.argmax(inst.mu_lo))
    target = data.draw(st.floats(inst.mu_lo[star], inst.mu_hi[star]))
    d = construct_product_two_point(inst, t, target)
    means = [sum(v * p for v, p in d.marginal_atoms(k)) for k in range(inst.num_agents)]
    assert abs(means[star] - target) <= 1e-9
    for k in range(inst.num_agents):
        if k != star:
            assert abs(means[k] - inst.mu_lo[k]) <= 1e-9
    joint = d.to_discrete()
    assert joint.prob(t) > 0
    assert all(inst.contains(p, 1e-9) for p in joint.support)
    other = np.array(d.other_point(t))
    assert np.delete(other, star).max() < inst.mu_lo[star]


# --- counterexample laws ----------------------------------------------------


def test_r2():
    d = counterexample_distribution("R2", 2.0)
    assert set(d.support) == {(6.0, 7.0), (2.0, 0.0)}
    np.testing.assert_allclose(d.mean(), (4.0, 3.5))


def test_r3():
    d = counterexample_distribution("R3", 2.0)
    assert {v for v, _ in d.marginal_atoms(1)} == {5.5, 2.0}
    assert d.marginal_mean()[1] == pytest.approx(3.75)


def test_r4():
    d = counterexample_distribution("R4")
    assert d.prob_hi[1] == pytest.approx(0.4)
    assert set(d.to_discrete().support) == {(4.0, 7.5), (4.0, 0.0)}
    assert d.marginal_mean()[1] == pytest.approx(3.0)


def test_counterexample_ranges():
    with pytest.raises(ValueError):
        counterexample_distribution("R2", 6.0)
    with pytest.raises(ValueError):
        counterexample_distribution("R3", 0.5)
    with pytest.raises(ValueError):
        counterexample_distribution("R9")
