import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_sysid.errors import NotDecomposableError
from robust_sysid.lp import in_range, min_inf_norm_solve, range_residual


def vertex_oracle(basis, target):
    """``min ||g||_inf  s.t.  basis g = target`` by enumerating every vertex of
    ``{(g, t): basis g = target, -t <= g_j <= t}``.

    A vertex fixes ``k + 1`` independent active constraints; the equalities give
    ``rank`` of them, the rest are chosen among ``g_j = t`` / ``g_j = -t``.
    """
    r, k = basis.shape
    rank = np.linalg.matrix_rank(basis)
    best = np.inf
    picks = [(j, s) for j in range(k) for s in (1.0, -1.0)]
    for active in itertools.combinations(picks, k + 1 - rank):
        rows = [np.append(basis[i], 0.0) for i in range(r)]
        rhs = list(target)
        for j, s in active:
            row = np.zeros(k + 1)
            row[j], row[k] = 1.0, -s
            rows.append(row)
            rhs.append(0.0)
        mat = np.array(rows)
        if np.linalg.matrix_rank(mat) < k + 1:
            continue
        sol = np.linalg.lstsq(mat, np.array(rhs), rcond=None)[0]
        g, t = sol[:k], sol[k]
        if np.abs(basis @ g - target).max() > 1e-9 or np.abs(g).max() > t + 1e-9:
            continue
        best = min(best, t)
    return best


def test_two_variable_example():
    sol = min_inf_norm_solve(np.array([[1.0, 2.0]]), np.array([1.0]))
    np.testing.assert_allclose(sol.gamma, [1 / 3, 1 / 3], atol=1e-12)
    assert sol.value == pytest.approx(1 / 3, abs=1e-12)
    assert vertex_oracle(np.array([[1.0, 2.0]]), np.array([1.0])) == pytest.approx(1 / 3)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_identity_basis(k):
    for j in range(k):
        e = np.eye(k)[j]
        sol = min_inf_norm_solve(np.eye(k), e)
        np.testing.assert_allclose(sol.gamma, e, atol=1e-12)
        assert sol.value == pytest.approx(1.0)


def test_zero_target():
    sol = min_inf_norm_solve(np.random.default_rng(0).standard_normal((3, 7)), np.zeros(3))
    assert sol.value == 0.0 and np.all(sol.gamma == 0)


def test_out_of_range_target():
    basis = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert not in_range(basis, np.array([1.0, 0.0]))
    with pytest.raises(NotDecomposableError) as info:
        min_inf_norm_solve(basis, np.array([1.0, 0.0]))
    assert info.value.residual == pytest.approx(range_residual(basis, np.array([1.0, 0.0])))
    assert info.value.residual > 0.1


def test_rank_deficient_basis_in_range():
    basis = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])
    sol = min_inf_norm_solve(basis, np.array([3.0, 6.0]))
    assert sol.value == pytest.approx(1.5)
    assert np.abs(basis @ sol.gamma - [3.0, 6.0]).max() < 1e-10


@pytest.mark.parametrize("seed", range(60))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    r = int(rng.integers(1, k + 1))
    basis = rng.standard_normal((r, k))
    target = basis @ rng.standard_normal(k) * rng.uniform(0.1, 10)
    sol = min_inf_norm_solve(basis, target)
    assert abs(sol.value - vertex_oracle(basis, target)) <= 1e-8
    assert np.abs(basis @ sol.gamma - target).max() <= 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_beats_random_feasible_points(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(5, 51))
    r = int(rng.integers(1, min(k, 12)))
    basis = rng.standard_normal((r, k))
    target = basis @ rng.standard_normal(k)
    sol = min_inf_norm_solve(basis, target)
    null = np.linalg.svd(basis)[2][r:].T
    pts = sol.gamma[:, None] + null @ rng.standard_normal((k - r, 1000)) * rng.uniform(0.01, 1)
    assert np.all(sol.value <= np.abs(pts).max(axis=0) + 1e-8)


def test_agrees_with_scipy():
    linprog = pytest.importorskip("scipy.optimize").linprog
    rng = np.random.default_rng(42)
    for _ in range(30):
        r, k = 4, int(rng.integers(5, 30))
        basis = rng.standard_normal((r, k))
        target = rng.standard_normal(r)
        c = np.zeros(k + 1)
        c[-1] = 1.0
        a_ub = np.block([[np.eye(k), -np.ones((k, 1))], [-np.eye(k), -np.ones((k, 1))]])
        ref = linprog(c, A_ub=a_ub, b_ub=np.zeros(2 * k), A_eq=np.hstack([basis, np.zeros((r, 1))]),
                      b_eq=target, bounds=[(None, None)] * (k + 1), method="highs")
        assert min_inf_norm_solve(basis, target).value == pytest.approx(ref.fun, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_value_scales_with_target(seed, lam):
    rng = np.random.default_rng(seed)
    basis = rng.standard_normal((2, 6))
    target = rng.standard_normal(2)
    v1 = min_inf_norm_solve(basis, target).value
    v2 = min_inf_norm_solve(basis, lam * target).value
    assert v2 == pytest.approx(lam * v1, rel=1e-8, abs=1e-12)


def test_degenerate_duplicate_columns_terminate():
    # many tied ratio tests; exercises the anti-cycling switch
    basis = np.tile(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).T, (1, 8))
    sol = min_inf_norm_solve(basis, np.array([1.0, 1.0]))
    assert sol.value == pytest.approx(vertex_oracle(basis[:, :3], np.array([1.0, 1.0])) / 8)
