import os
import subprocess
import sys

import numpy as np
import pytest

from robustalloc import kernels

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")


def test_backend_is_reported():
    assert kernels.BACKEND in BACKENDS


def test_env_forces_python_backend():
    code = "from robustalloc import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, ROBUSTALLOC_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_both
@pytest.mark.parametrize("seed", range(5))
def test_tabulate_fam_backends_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    # integer types make exact threshold ties common
    scen = rng.integers(0, 6, size=(200, n)).astype(float)
    costs = rng.integers(1, 3, size=n).astype(float)
    istar = int(rng.integers(n))
    nu = float(rng.integers(0, 5))
    for type_ii in (False, True):
        outs = [BACKENDS[name].tabulate_fam(scen, costs, istar, nu, type_ii, 1e-12) for name in ("python", "cython")]
        for x, y in zip(*outs):
            np.testing.assert_array_equal(x, y)


@needs_both
@pytest.mark.parametrize("axis", [0, 1, 2])
def test_line_extrema_backends_agree(axis):
    rng = np.random.default_rng(axis)
    shape = (3, 4, 5)
    a = rng.integers(0, 3, size=60).astype(float)
    b = rng.integers(0, 3, size=60).astype(float)
    outs = [BACKENDS[name].line_extrema(a, b, shape, axis) for name in ("python", "cython")]
    for x, y in zip(*outs):
        np.testing.assert_array_equal(x, y)


def test_line_extrema_values():
    a = np.arange(6, dtype=float)
    b = -np.arange(6, dtype=float)
    amin, amin_idx, bmax, bmax_idx = kernels.line_extrema(a, b, (2, 3), 1)
    np.testing.assert_array_equal(amin, [0.0, 3.0])
    np.testing.assert_array_equal(amin_idx, [0, 3])
    np.testing.assert_array_equal(bmax, [0.0, -3.0])
    amin, amin_idx, _, _ = kernels.line_extrema(a, b, (2, 3), 0)
    np.testing.assert_array_equal(amin, [0.0, 1.0, 2.0])


def _tableau(rng, m, n):
    A = rng.uniform(0.1, 2.0, size=(m, n))
    b = rng.uniform(1.0, 5.0, size=m)
    c = rng.uniform(-1.0, 1.0, size=n)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = c
    basis = np.arange(n, n + m, dtype=np.intp)
    return T, basis


@needs_both
@pytest.mark.parametrize("rule", [kernels.BLAND, kernels.HYBRID])
def test_simplex_backends_agree(rule):
    rng = np.random.default_rng(11)
    for _ in range(30):
        m, n = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        T0, b0 = _tableau(rng, m, n)
        results = []
        for name in ("python", "cython"):
            T, basis = T0.copy(), b0.copy()
            status, it = BACKENDS[name].simplex(T, basis, n + m, rule, 500, 1e-9, 1e-7)
            results.append((status, it, T, basis))
        (s1, i1, T1, B1), (s2, i2, T2, B2) = results
        assert (s1, i1) == (s2, i2)
        np.testing.assert_array_equal(B1, B2)
        np.testing.assert_allclose(T1, T2, rtol=0, atol=1e-12)


@needs_both
@pytest.mark.parametrize("rule", [kernels.BLAND, kernels.HYBRID])
def test_simplex_backends_agree_on_awkward_tableaux(rule):
    # zero right-hand sides, tied ratios, sub-tolerance entries and rays
    rng = np.random.default_rng(12)
    statuses = set()
    for _ in range(60):
        m, n = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        T0, b0 = _tableau(rng, m, n)
        T0[:m, :n] = rng.integers(-2, 3, size=(m, n))
        T0[:m, -1] = rng.integers(0, 3, size=m)
        T0[m, :n] = rng.integers(-3, 3, size=n)
        T0[rng.integers(m), rng.integers(n)] = 1e-8
        results = []
        for name in ("python", "cython"):
            T, basis = T0.copy(), b0.copy()
            status, it = BACKENDS[name].simplex(T, basis, n + m, rule, 200, 1e-9, 1e-7)
            results.append((status, it, T, basis))
        (s1, i1, T1, B1), (s2, i2, T2, B2) = results
        statuses.add(s1)
        assert (s1, i1) == (s2, i2)
        np.testing.assert_array_equal(B1, B2)
        np.testing.assert_allclose(T1, T2, rtol=0, atol=1e-12)
    assert {kernels.OPTIMAL, kernels.UNBOUNDED} <= statuses


def test_simplex_iteration_limit():
    T, basis = _tableau(np.random.default_rng(0), 3, 3)
    T[3, :3] = -1.0
    status, it = kernels.simplex(T, basis, 6, kernels.BLAND, 0, 1e-9, 1e-7)
    assert status == kernels.ITERATION_LIMIT and it == 0
