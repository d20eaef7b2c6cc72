import json
import math

import numpy as np
import pytest

from robust_sysid.certifier import (
    certify_via_xi,
    check_singular_value_nsp,
    full_row_rank,
    nsp_verdict,
    xi1_constant,
    xi1_recovery_threshold,
    xi_1,
    xi_s,
)
from robust_sysid.errors import EnumerationCapError, NotDecomposableError
from robust_sysid.lti import IndexSet, SystemMatrices, Trajectory, col_group_norm, simulate


def _hand_data(scale=1.0):
    """Columns 0,1 are 2*I (sigma_min = 2), column 2 is the attack (0.1, 0.1)."""
    return np.array([[2.0, 0.0, 0.1 * scale], [0.0, 2.0, 0.1 * scale]])


# -- singular-value test ------------------------------------------------------

def test_singular_value_hand_example():
    rep = check_singular_value_nsp(_hand_data(), IndexSet((2,), 3), 1.0)
    assert rep.details["lhs"] == pytest.approx(math.sqrt(0.02), rel=1e-12)
    assert rep.details["sigma_min_sc"] == pytest.approx(2.0)
    assert rep.details["holds"]
    assert rep.c_achieved == pytest.approx(math.sqrt(0.02) / 2, rel=1e-12)
    assert rep.recovery_certified


def test_singular_value_empty_support():
    for c in (0.01, 1.0, 5.0):
        rep = check_singular_value_nsp(_hand_data(), IndexSet((), 3), c)
        assert rep.details["lhs"] == 0.0 and rep.details["holds"]
        assert rep.c_achieved == 0.0 and rep.recovery_certified


def test_singular_value_scaled_attack_not_certified():
    rep = check_singular_value_nsp(_hand_data(100.0), IndexSet((2,), 3), 1.0)
    assert rep.applicable and not rep.details["holds"]
    assert rep.c_achieved > 1 and not rep.recovery_certified


def test_singular_value_inapplicable_when_complement_small():
    rep = check_singular_value_nsp(_hand_data(), IndexSet((1, 2), 3), 1.0)
    assert not rep.applicable and not rep.recovery_certified
    assert "inapplicable" in rep.inapplicable_reasons[0]


# -- amplitudes ---------------------------------------------------------------

def test_xi1_example():
    value, wits = xi_1(np.array([[1.0, 1.0, 2.0]]))
    assert value == pytest.approx(1.0)
    np.testing.assert_allclose([w.amplitude for w in wits], [1 / 3, 1 / 3, 1.0], atol=1e-12)
    v = np.array([[1.0, 1.0, 2.0]])
    for w in wits:
        assert w.residual(v) <= 1e-8 * np.linalg.norm(v[:, w.index_set.as_array()])


def test_xi1_duplicate_columns():
    value, _ = xi_1(np.array([[1.0, 1.0], [-3.0, -3.0]]))
    assert value == pytest.approx(1.0)


def test_xi1_orthogonal_not_decomposable():
    with pytest.raises(NotDecomposableError) as info:
        xi_1(np.eye(2))
    assert info.value.index == (0,)


def test_xi_s_example():
    value, wits = xi_s(np.array([[1.0, 1.0, 2.0, 4.0]]), 2)
    assert value == pytest.approx(3.0)
    assert tuple(wits[0].index_set) == (2, 3)
    np.testing.assert_allclose(np.abs(wits[0].gamma).max(axis=0), [1.0, 2.0], atol=1e-12)


def test_xi_s_with_s1_equals_xi1():
    v = np.random.default_rng(0).standard_normal((2, 7))
    assert xi_s(v, 1)[0] == pytest.approx(xi_1(v)[0], rel=1e-12)


def test_xi_s_refusals():
    v = np.random.default_rng(1).standard_normal((2, 5))
    with pytest.raises(ValueError):
        xi_s(v, 5)
    with pytest.raises(EnumerationCapError) as info:
        xi_s(np.ones((1, 30)), 10, subset_cap=1000)
    assert info.value.count == math.comb(30, 10)


@pytest.mark.parametrize("lam", [0.01, 100.0])
def test_xi_s_scale_invariant(lam):
    v = np.random.default_rng(2).standard_normal((2, 8))
    for s in (1, 2):
        assert xi_s(lam * v, s)[0] == pytest.approx(xi_s(v, s)[0], rel=1e-9)


@pytest.mark.parametrize("seed", range(15))
def test_decomposability_passes_down(seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((2, int(rng.integers(3, 8))))
    if rng.random() < 0.5:
        v[:, 0] = 0.0  # sometimes break decomposability of bigger sets
        v[1, 1:3] = 0.0
    horizon = v.shape[1]

    def decomposable(s):
        try:
            xi_s(v, s)
            return True
        except NotDecomposableError:
            return False

    flags = [decomposable(s) for s in range(1, horizon)]
    for s in range(1, horizon):
        if flags[s - 1]:
            assert all(flags[:s])


# -- self-decomposability constants ----------------------------------------------------

def test_xi1_constant_and_threshold():
    assert xi1_constant(0.2, 2) == pytest.approx(0.5)
    assert xi1_recovery_threshold(2) == pytest.approx(1 / 3)
    assert 0.2 < xi1_recovery_threshold(2)
    assert math.isinf(xi1_constant(0.6, 3))


def test_certify_xi1_precomputed_values():
    v = np.random.default_rng(3).standard_normal((2, 9))
    rep = certify_via_xi(v, IndexSet((0, 4), 9), "xi_1", xi_value=0.2)
    assert rep.c_achieved == pytest.approx(0.5) and rep.recovery_certified
    rep = certify_via_xi(v, IndexSet((0, 4), 9), "xi_1", xi_value=0.34)
    assert rep.applicable and not rep.recovery_certified
    rep = certify_via_xi(v, IndexSet((0, 4, 6), 9), "xi_1", xi_value=0.6)
    assert not rep.applicable and "1/(|S|-1)" in rep.inapplicable_reasons[0]


def test_certify_xi_hypotheses():
    rank_def = np.array([[1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0]])
    rep = certify_via_xi(rank_def, IndexSet((0,), 4), "xi_s")
    assert not rep.applicable and "row rank" in rep.inapplicable_reasons[0]
    v = np.random.default_rng(4).standard_normal((2, 6))
    assert not certify_via_xi(v, IndexSet((1,), 6), "xi_1").applicable
    rep = certify_via_xi(np.eye(2), IndexSet((0,), 2), "xi_s")
    assert not rep.applicable and rep.details["not_decomposable_at"] == (0,)
    with pytest.raises(ValueError):
        certify_via_xi(v, IndexSet((1,), 6), "xi_9")


# -- combined verdict ---------------------------------------------------------

def test_verdict_empty_support():
    v = np.random.default_rng(5).standard_normal((2, 6))
    rep = nsp_verdict(v, IndexSet((), 6))
    assert rep.recovery_certified and rep.c_achieved == 0.0


def test_verdict_hand_example_uses_singular_value():
    data = np.hstack([_hand_data()[:, :2], _hand_data()[:, :2] * 1.5, _hand_data()[:, 2:]])
    rep = nsp_verdict(data, IndexSet((4,), 5), methods=("singular_value",))
    assert rep.method == "singular_value" and rep.recovery_certified
    full = nsp_verdict(data, IndexSet((4,), 5))
    assert full.recovery_certified
    assert full.c_achieved <= rep.c_achieved + 1e-12


def test_verdict_adversarial_scaling_is_dont_know():
    data = np.hstack([_hand_data(1000.0), _hand_data(1000.0)[:, 2:] * np.array([[1.0], [-1.0]])])
    rep = nsp_verdict(data, IndexSet((2, 3), 4))
    assert not rep.recovery_certified
    assert rep.method in ("singular_value", "xi_s", "xi_1", "none")
    doc = json.loads(rep.to_json())
    assert set(doc) >= {"method", "c_achieved", "xi_value", "recovery_certified", "details",
                        "inapplicable_reasons"}


def test_verdict_order_independent_of_threads():
    v = np.random.default_rng(6).standard_normal((2, 9))
    s_set = IndexSet((1, 5), 9)
    a = nsp_verdict(v, s_set, workers=1)
    b = nsp_verdict(v, s_set, workers=4)
    assert a.to_dict() == b.to_dict()


def test_full_row_rank():
    assert full_row_rank(np.eye(2))
    assert not full_row_rank(np.ones((2, 4)))
    assert not full_row_rank(np.ones((3, 2)))


# -- soundness by sampling ----------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_singular_value_certificate_not_violated_by_sampling(seed):
    """When the singular-value certificate holds, no sampled direction breaks the
    null-space inequality ``||(H V)_S||_{2,col} < c ||(H V)_Sc||_{2,col}``."""
    rng = np.random.default_rng(seed)
    n, m, horizon = 2, 1, 60
    support = IndexSet((3, 17), horizon)
    for _ in range(50):  # draw until the certificate holds with some margin
        a = rng.standard_normal((n, n))
        a *= 0.6 / np.abs(np.linalg.eigvals(a)).max()
        sys = SystemMatrices(a, rng.standard_normal((n, m)))
        d = 0.5 * rng.standard_normal((n, horizon))
        traj = simulate(sys, rng.standard_normal(n), rng.standard_normal((m, horizon)), d)
        rep = check_singular_value_nsp(traj, support, 1.0)
        if rep.c_achieved < 0.9:
            break
    assert rep.recovery_certified
    v = traj.data_matrix()
    s_cols, sc_cols = support.as_array(), support.complement().as_array()
    for _ in range(1000):
        h = rng.standard_normal((n, n + m)) * rng.uniform(1e-3, 1e3)
        hv = h @ v
        assert col_group_norm(hv[:, s_cols]) < rep.c_achieved * col_group_norm(hv[:, sc_cols]) * (1 + 1e-12)


def test_trajectory_input_accepted():
    rng = np.random.default_rng(7)
    traj = Trajectory(rng.standard_normal((2, 8)), rng.standard_normal((1, 7)))
    rep = check_singular_value_nsp(traj, IndexSet((0,), 7))
    assert rep.details["s_size"] == 1
