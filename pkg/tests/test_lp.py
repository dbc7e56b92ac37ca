import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import enumerate_lp
from robustalloc.lp import LinearProgram, LPError, lp_min, solve_or_raise


def random_lp(rng, with_eq=False):
    n = int(rng.integers(1, 7))
    m = int(rng.integers(1, 7))
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    b = rng.integers(-4, 10, size=m).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    A_eq = b_eq = None
    if with_eq and n >= 2:
        A_eq = rng.integers(0, 4, size=(1, n)).astype(float)
        b_eq = np.array([float(rng.integers(1, 6))])
    return c, A, b, A_eq, b_eq


def test_single_lower_bound():
    res = lp_min(LinearProgram([1.0], [[-1.0]], [-3.0]))
    assert res.optimal
    assert res.value == pytest.approx(3.0)
    assert res.x[0] == pytest.approx(3.0)


def test_simplex_weights_pick_cheapest_vertex():
    res = lp_min(LinearProgram([1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[1.0]))
    assert res.value == pytest.approx(1.0)
    np.testing.assert_allclose(res.x, [1.0, 0.0])


def test_transport_matches_enumeration():
    # two sources (supply 3, 4), two sinks (demand 2, 5)
    c = np.array([1.0, 3.0, 2.0, 1.0])
    A_ub = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=float)
    b_ub = np.array([3.0, 4.0])
    A_eq = np.array([[1, 0, 1, 0], [0, 1, 0, 1]], dtype=float)
    b_eq = np.array([2.0, 5.0])
    status, value = enumerate_lp(c, A_ub, b_ub, A_eq, b_eq)
    res = lp_min(LinearProgram(c, A_ub, b_ub, A_eq, b_eq))
    assert status == "optimal" and res.optimal
    assert res.value == pytest.approx(value, abs=1e-9)
    assert value == pytest.approx(9.0)  # sink 2 needs one unit from source 1


def test_infeasible_and_unbounded():
    assert lp_min(LinearProgram([1.0], [[1.0], [-1.0]], [1.0, -2.0])).status == "infeasible"
    assert lp_min(LinearProgram([-1.0], [[-1.0]], [0.0])).status == "unbounded"
    with pytest.raises(LPError):
        solve_or_raise(LinearProgram([-1.0], [[-1.0]], [0.0]))


def test_free_and_boxed_variables():
    # min x - y with x free in [-2, inf), y in [0, 3]
    lp = LinearProgram([1.0, -1.0], lower=[-2.0, 0.0], upper=[np.inf, 3.0])
    res = lp_min(lp)
    assert res.value == pytest.approx(-5.0)
    free = LinearProgram([1.0], A_ub=[[-1.0]], b_ub=[4.0], lower=[-np.inf])
    assert lp_min(free).value == pytest.approx(-4.0)


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook largest-coefficient rule
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    for rule in ("bland", "hybrid"):
        res = lp_min(LinearProgram(c, A, b), rule=rule)
        assert res.optimal
        assert res.value == pytest.approx(-0.05)


def test_rules_agree_and_are_deterministic():
    rng = np.random.default_rng(7)
    for _ in range(50):
        c, A, b, A_eq, b_eq = random_lp(rng, with_eq=True)
        lp = LinearProgram(c, A, b, A_eq, b_eq)
        r1, r2 = lp_min(lp, "bland"), lp_min(lp, "hybrid")
        assert r1.status == r2.status
        if r1.optimal:
            assert r1.value == pytest.approx(r2.value, abs=1e-9)
        again = lp_min(lp, "bland")
        assert again.status == r1.status and again.iterations == r1.iterations


@pytest.mark.parametrize("seed", range(4))
def test_matches_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    for _ in range(50):
        c, A, b, A_eq, b_eq = random_lp(rng, with_eq=bool(rng.integers(2)))
        status, value = enumerate_lp(c, A, b, A_eq, b_eq)
        res = lp_min(LinearProgram(c, A, b, A_eq, b_eq))
        assert res.status == status
        if status == "optimal":
            assert abs(res.value - value) <= 1e-9


def test_matches_scipy():
    linprog = pytest.importorskip("scipy.optimize").linprog
    rng = np.random.default_rng(3)
    for _ in range(100):
        c, A, b, A_eq, b_eq = random_lp(rng, with_eq=True)
        ref = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        res = lp_min(LinearProgram(c, A, b, A_eq, b_eq))
        expected = {0: "optimal", 2: "infeasible", 3: "unbounded"}[ref.status]
        assert res.status == expected
        if res.optimal:
            assert res.value == pytest.approx(ref.fun, abs=1e-7)


def moment_lp(rng, gap):
    # mixture weights on a product grid with nearly pinned means
    axes = [np.sort(rng.uniform(0.0, 10.0, size=int(rng.integers(3, 7)))) for _ in range(3)]
    scen = np.array(np.meshgrid(*axes, indexing="ij")).reshape(3, -1).T
    lo = np.array([rng.uniform(ax[0], ax[-1]) for ax in axes])
    hi = np.minimum(lo + gap * rng.random(3), [ax[-1] for ax in axes])
    c = rng.uniform(0.0, 10.0, size=scen.shape[0])
    return LinearProgram(c, np.vstack([-scen.T, scen.T]), np.r_[-lo, hi], np.ones((1, scen.shape[0])), [1.0])


@pytest.mark.parametrize("rule", ["bland", "hybrid"])
def test_near_pinned_moment_lps_match_scipy(rule):
    linprog = pytest.importorskip("scipy.optimize").linprog
    rng = np.random.default_rng(11)
    for k in range(60):
        lp = moment_lp(rng, 10.0 ** rng.uniform(-8, -2))
        ref = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq, method="highs")
        res = lp_min(lp, rule)
        assert res.optimal, k
        assert res.value == pytest.approx(ref.fun, rel=1e-7), k
        scale = 1e-9 * (1.0 + np.abs(lp.b_ub).max())
        assert np.all(lp.A_ub @ res.x <= lp.b_ub + scale), k
        assert abs(res.x.sum() - 1.0) <= scale, k


@given(st.integers(1, 5), st.integers(0, 10_000))
def test_solution_is_feasible(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 2.0, size=(3, n))
    b = rng.uniform(1.0, 5.0, size=3)
    c = rng.uniform(-1.0, 1.0, size=n)
    res = lp_min(LinearProgram(c, A, b))
    assert res.optimal
    assert np.all(res.x >= -1e-12)
    assert np.all(A @ res.x <= b + 1e-9)
    assert res.value == pytest.approx(c @ res.x)


def test_shape_errors():
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], [[1.0]], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], lower=[2.0], upper=[1.0])
