import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import fam_payoff_reference
from robustalloc.core import DomainError, Grid, Instance, PreconditionError, make_grid
from robustalloc.mechanisms import (
    FavoredAgentMechanism,
    GridMechanism,
    TieRule,
    check_constant_net_allocation,
    check_fc,
    check_ic,
    fam_allocate,
    fam_payoff,
    fam_to_grid,
    inspection_perturbation,
    mix,
    payoff_vector,
)

from strategies import instances


def fam(i, nu, tie="I"):
    return FavoredAgentMechanism(i, nu, TieRule(tie))


SECTION_GRID = Grid(((2.0, 5.0, 8.0), (0.0, 2.0, 3.0, 10.0)))


def test_tie_rule_parse():
    assert TieRule.parse("TypeII") is TieRule.TYPE_II
    assert TieRule.parse("1") is TieRule.TYPE_I
    with pytest.raises(ValueError):
        TieRule.parse("III")


def test_fam_validation(support_only):
    with pytest.raises(ValueError):
        fam(0, 1.0)
    with pytest.raises(ValueError):
        fam(1, float("inf"))
    with pytest.raises(ValueError):
        fam(3, 1.0).check_agents(support_only)


def test_low_threshold_runs_contest(support_only):
    # net values (1, 1): the tie goes to agent 1, inspected
    p, q = fam_allocate(fam(1, 0.5), support_only, (2, 2))
    np.testing.assert_array_equal(p, [1, 0])
    np.testing.assert_array_equal(q, [1, 0])


def test_favored_keeps_good(support_only):
    p, q = fam_allocate(fam(1, 2.0), support_only, (8, 0))
    np.testing.assert_array_equal(p, [1, 0])
    np.testing.assert_array_equal(q, [0, 0])


def test_threshold_tie(support_only):
    p, q = fam_allocate(fam(1, 2.0, "I"), support_only, (5, 3))
    np.testing.assert_array_equal((p, q), ([1, 0], [0, 0]))
    p, q = fam_allocate(fam(1, 2.0, "II"), support_only, (5, 3))
    np.testing.assert_array_equal((p, q), ([1, 0], [1, 0]))


def test_payoff_examples(support_only, markov):
    assert fam_payoff(fam(1, 1.5, "II"), support_only, (2, 2.75)) == pytest.approx(1.75)
    assert fam_payoff(fam(1, 6.0, "II"), markov, (4, 3)) == 4.0
    assert fam_payoff(fam(1, 2.0, "II"), markov, (6, 7)) == 5.0


def test_payoff_out_of_domain(markov):
    with pytest.raises(DomainError):
        fam_payoff(fam(1, 2.0), markov, (0.5, 3))


def test_tabulation_rows(support_only, markov):
    mech = fam_to_grid(fam(1, 2.0), support_only, make_grid(support_only, 3))
    assert mech.p.shape == (9, 2)
    s = mech.grid.index_of((2, 0))
    np.testing.assert_array_equal(mech.p[s], [1, 0])
    np.testing.assert_array_equal(mech.q[s], [0, 0])
    mech = fam_to_grid(fam(1, 6.0, "II"), markov, make_grid(markov, 2))
    s = mech.grid.index_of((1, 10))
    np.testing.assert_array_equal(mech.p[s], [0, 1])
    np.testing.assert_array_equal(mech.q[s], [0, 1])


def test_single_scenario_grid(support_only):
    grid = Grid(((2.0,), (0.0,)))
    mech = fam_to_grid(fam(2, 5.0), support_only, grid)
    np.testing.assert_array_equal(mech.p, [[0, 1]])
    assert mech.payoffs()[0] == 0.0


def test_grid_mechanism_is_read_only(support_only):
    mech = fam_to_grid(fam(1, 2.0), support_only, SECTION_GRID)
    with pytest.raises(ValueError):
        mech.p[0, 0] = 0.5


def test_fc_failures():
    grid = Grid(((0.0, 1.0), (0.0,)))
    p = np.array([[0.6, 0.6], [0.0, 0.0]])
    cert = check_fc(GridMechanism(grid, p, np.zeros((2, 2)), (1, 1)))
    assert not cert.passed and cert.witness["constraint"] == "sum p <= 1"
    p = np.array([[0.4, 0.0], [0.0, 0.0]])
    q = np.array([[0.5, 0.0], [0.0, 0.0]])
    cert = check_fc(GridMechanism(grid, p, q, (1, 1)))
    assert not cert.passed and cert.witness["constraint"] == "q <= p"


def test_ic_upward_deviation(support_only):
    grid = make_grid(support_only, 3)
    scen = grid.scenarios()
    p = np.zeros((grid.size, 2))
    p[scen[:, 0] == 8.0, 0] = 1.0
    cert = check_ic(GridMechanism(grid, p, np.zeros_like(p), support_only.c))
    assert not cert.passed
    assert cert.witness["agent"] == 1
    assert cert.witness["truth"] == (2.0, 0.0)
    assert cert.witness["misreport"] == 8.0


def test_mix_examples(support_only):
    grid = SECTION_GRID
    a = fam_to_grid(fam(1, 2.0), support_only, grid)
    np.testing.assert_array_equal(mix([a], [1.0]).p, a.p)
    b = fam_to_grid(fam(1, 10.0), support_only, grid)
    s = grid.index_of((8, 0))
    assert mix([a, b], [0.5, 0.5]).p[s, 0] == 1.0
    c = fam_to_grid(fam(2, 10.0), support_only, grid)
    np.testing.assert_array_equal(mix([b, c], [0.5, 0.5]).p[s], [0.5, 0.5])
    with pytest.raises(ValueError):
        mix([a, b], [0.7, 0.7])


def test_constant_net_allocation(support_only):
    grid = SECTION_GRID
    zero = GridMechanism(grid, np.zeros((12, 2)), np.zeros((12, 2)), (1, 1))
    assert check_constant_net_allocation(zero).passed
    pert = inspection_perturbation(fam(1, 10.0), support_only, grid)
    cert = check_constant_net_allocation(pert)
    assert not cert.passed
    assert cert.witness["agent"] == 1
    assert cert.witness["low_at"] == (8.0, 0.0)


def test_perturbation_values(support_only):
    base = fam_to_grid(fam(1, 10.0), support_only, SECTION_GRID)
    pert = inspection_perturbation(fam(1, 10.0), support_only, SECTION_GRID)
    s = SECTION_GRID.index_of((8, 0))
    assert pert.q[s, 0] == 1.0
    assert pert.payoff_at((8, 0)) == 7.0
    other = np.arange(SECTION_GRID.size) != s
    np.testing.assert_array_equal(pert.payoffs()[other], base.payoffs()[other])


def test_perturbation_capped_inspection():
    inst = Instance([2, 0], [8, 10], [12, 1])
    grid = Grid(((2.0, 8.0), (0.0, 10.0)))
    pert = inspection_perturbation(fam(1, 10.0), inst, grid)
    assert pert.q[grid.index_of((8, 0)), 0] == 0.5


def test_perturbation_preconditions(support_only):
    with pytest.raises(PreconditionError):
        inspection_perturbation(fam(1, 2.0), support_only, SECTION_GRID)
    with pytest.raises(PreconditionError):
        inspection_perturbation(fam(2, 10.0), support_only, SECTION_GRID)
    with pytest.raises(PreconditionError):
        inspection_perturbation(fam(1, 10.0), support_only, Grid(((2.0, 5.0), (0.0, 10.0))))


# --- properties -------------------------------------------------------------


@st.composite
def fam_cases(draw):
    inst = draw(instances(agents=(2, 4)))
    i = draw(st.integers(1, inst.num_agents))
    nu = draw(st.floats(-2.0, 14.0).map(lambda x: round(x, 2)))
    tie = draw(st.sampled_from(["I", "II"]))
    t = [draw(st.floats(lo, hi)) for lo, hi in zip(inst.t_lo, inst.t_hi)]
    return inst, fam(i, nu, tie), np.array(t)


@given(fam_cases())
def test_one_winner(case):
    inst, f, t = case
    p, q = fam_allocate(f, inst, t)
    assert p.sum() == 1.0
    assert sorted(p.tolist())[-1] == 1.0
    assert set(q.tolist()) <= {0.0, 1.0}
    assert np.all(q <= p)


@given(fam_cases())
def test_payoff_matches_rule(case):
    inst, f, t = case
    got = fam_payoff(f, inst, t)
    ref = fam_payoff_reference(t.tolist(), inst.c, f.i_star - 1, f.nu, f.tie_rule.value)
    assert got == pytest.approx(ref, abs=1e-12)
    assert got >= min(t[f.i_star - 1], (t - np.array(inst.c)).max()) - 1e-12


@given(instances(agents=(2, 3)), st.integers(2, 5), st.integers(1, 3), st.integers(0, 8))
def test_tie_rules_differ_only_on_ties(inst, k, i, nu):
    i = min(i, inst.num_agents)
    grid = make_grid(inst, k)
    a = fam_to_grid(fam(i, float(nu), "I"), inst, grid)
    b = fam_to_grid(fam(i, float(nu), "II"), inst, grid)
    net = grid.scenarios() - np.array(inst.c)
    m = np.delete(net, i - 1, axis=1).max(axis=1)
    differ = np.any(a.p != b.p, axis=1) | np.any(a.q != b.q, axis=1)
    assert np.all(np.abs(m[differ] - nu) <= 1e-12)


@given(instances(agents=(2, 3)), st.integers(2, 6), st.integers(1, 3), st.floats(-1, 12), st.sampled_from(["I", "II"]))
def test_tabulations_are_feasible_and_ic(inst, k, i, nu, tie):
    i = min(i, inst.num_agents)
    mech = fam_to_grid(fam(i, nu, tie), inst, make_grid(inst, k))
    assert check_fc(mech).passed
    assert check_ic(mech).passed
    assert check_constant_net_allocation(mech).passed
    np.testing.assert_allclose(payoff_vector(fam(i, nu, tie), mech.grid, inst), mech.payoffs(), atol=1e-12)


@given(instances(agents=(2, 3)), st.lists(st.tuples(st.integers(1, 3), st.floats(-1, 12)), min_size=2, max_size=4),
       st.data())
def test_mix_preserves_constraints(inst, specs, data):
    grid = make_grid(inst, 4)
    mechs = [fam_to_grid(fam(min(i, inst.num_agents), nu), inst, grid) for i, nu in specs]
    w = np.array([data.draw(st.floats(0.01, 1.0)) for _ in mechs])
    mixed = mix(mechs, w / w.sum())
    assert check_fc(mixed).passed
    assert check_ic(mixed).passed
    assert check_constant_net_allocation(mixed).passed
