import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hstori.errors import (
    DegenerateMetricError,
    InvalidMotionError,
    NormalFormError,
    RealityError,
    UnsupportedOrderError,
)
from hstori.fixtures import random_potential
from hstori.kahler_potential import (
    J_REAL,
    K1,
    FrameParams,
    PotentialPolynomial,
    apply_motion,
    complex_curvature,
    eval_jet,
    f_r,
    f_r_gradient,
    f_r_hessian,
    load_potential,
    metric_at,
    potential_from_dict,
    potential_to_dict,
    rescale_potential,
    save_potential,
    unit_motion,
)

from conftest import as_complex

QUARTIC_1 = {(2, 0, 2, 0): 1.0}
MIXED = {(1, 1, 1, 1): 1.0}


def _real_unitary(U):
    """Real 4x4 matrix of z -> U z in (Re z1, Im z1, Re z2, Im z2)."""
    out = np.zeros((4, 4))
    for j in range(2):
        for k in range(2):
            a, b = U[j, k].real, U[j, k].imag
            out[2 * j : 2 * j + 2, 2 * k : 2 * k + 2] = [[a, -b], [b, a]]
    return out


# ------------------------------------------------------------ construction


def test_reality_enforced():
    with pytest.raises(RealityError):
        PotentialPolynomial({(2, 0, 0, 2): 1.0})


def test_normal_form_enforced():
    with pytest.raises(NormalFormError):
        PotentialPolynomial({(1, 0, 1, 0): 1.0})
    PotentialPolynomial({(1, 0, 1, 0): 1.0}, normal_form=False)


def test_negative_rho_rejected():
    with pytest.raises(ValueError):
        PotentialPolynomial(QUARTIC_1, rho=-0.1)


# ------------------------------------------------------------ jets


def test_euclidean_jet_is_half_identity():
    jet = eval_jet(PotentialPolynomial.euclidean(), (0.3 - 0.2j, 1.1j), 2)
    np.testing.assert_allclose(jet.hermitian(), 0.5 * np.eye(2), atol=0)
    assert jet[(2, 0, 0, 0)] == 0 and jet[(0, 2, 0, 0)] == 0 and jet[(1, 1, 0, 0)] == 0


def test_quartic_fourth_derivative_at_origin():
    jet = eval_jet(PotentialPolynomial(QUARTIC_1), (0, 0), 4)
    for alpha, val in jet.derivs.items():
        expected = 4.0 if alpha == (2, 0, 2, 0) else (0.5 if alpha in ((1, 0, 1, 0), (0, 1, 0, 1)) else 0.0)
        assert val == pytest.approx(expected, abs=1e-14), alpha


def test_mixed_second_derivative():
    d = PotentialPolynomial(MIXED).derivatives([(1, 0, 1, 0)], (1, 1), part="hat")
    assert d[(1, 0, 1, 0)] == pytest.approx(1.0)


@pytest.mark.parametrize("order", [0, 1, 5])
def test_unsupported_order(order):
    with pytest.raises(UnsupportedOrderError):
        eval_jet(PotentialPolynomial.euclidean(), (0, 0), order)


def test_derivatives_match_symbolic_oracle(oracle, nondeg):
    pot, _ = nondeg
    p = [as_complex(x) for x in oracle["point"]]
    alphas = {tuple(int(c) for c in k.split(",")): as_complex(v) for k, v in oracle["derivatives"].items()}
    got = pot.derivatives(alphas, p)
    for alpha, want in alphas.items():
        assert abs(got[alpha] - want) <= 1e-12 * max(1, abs(want)), alpha


# ------------------------------------------------------------ metric


def test_euclidean_real_forms():
    _, g, omega = metric_at(eval_jet(PotentialPolynomial.euclidean(), (0.1, 0.2), 2))
    np.testing.assert_allclose(g, np.eye(4), atol=1e-15)
    np.testing.assert_allclose(omega, -J_REAL, atol=1e-15)  # omega = dx1^dy1 + dx2^dy2


def test_metric_value_with_quartic():
    pot = PotentialPolynomial(QUARTIC_1, rho=0.1)
    h, _, _ = metric_at(eval_jet(pot, (1, 0), 2))
    assert h[0, 0].real == pytest.approx(0.54, abs=1e-14)


def test_metric_matches_oracle(oracle, nondeg):
    pot, _ = nondeg
    p = [as_complex(x) for x in oracle["point"]]
    h, _, _ = metric_at(eval_jet(pot, p, 2))
    want = np.array([[as_complex(x) for x in row] for row in oracle["metric"]])
    np.testing.assert_allclose(h, want, atol=1e-12)


def test_degenerate_metric():
    pot = PotentialPolynomial({(2, 0, 2, 0): -1.0})
    with pytest.raises(DegenerateMetricError):
        metric_at(eval_jet(pot, (1.0, 0), 2))


@given(st.integers(0, 2**31 - 1))
def test_compatibility_omega_g_J(seed):
    rng = np.random.default_rng(seed)
    pot = random_potential(rng, (4,), scale=0.05)
    z = 0.1 * (rng.normal(size=2) + 1j * rng.normal(size=2))
    _, g, omega = metric_at(eval_jet(pot, z, 2))
    X, Y = rng.normal(size=4), rng.normal(size=4)
    assert X @ omega @ Y == pytest.approx((J_REAL @ X) @ g @ Y, abs=1e-12)
    np.testing.assert_allclose(g, g.T, atol=1e-14)
    np.testing.assert_allclose(omega, -omega.T, atol=1e-14)


@given(st.integers(0, 2**31 - 1))
def test_real_on_random_points(seed):
    rng = np.random.default_rng(seed)
    pot = random_potential(rng, (4, 5, 6))
    z = rng.normal(size=(2, 1000)) + 1j * rng.normal(size=(2, 1000))
    d = pot.derivatives([(0, 0, 0, 0)], z)[(0, 0, 0, 0)]
    assert np.abs(d.imag).max() <= 1e-12 * max(1.0, np.abs(d).max())


# ------------------------------------------------------------ motions


def test_non_unitary_rejected():
    with pytest.raises(InvalidMotionError):
        apply_motion(PotentialPolynomial(QUARTIC_1), np.diag([1.0, 1.1]), (0, 0))


def test_identity_motion_preserves_terms(nondeg):
    pot, _ = nondeg
    assert apply_motion(pot, np.eye(2), (0, 0)).allclose(pot, atol=1e-15)


def test_euclidean_under_motion():
    U = FrameParams([0, 0, 0, 0, 0.4, -0.3]).motion()[0]
    tau = np.array([0.2 - 0.1j, 0.5j])
    moved = apply_motion(PotentialPolynomial.euclidean(), U, tau)
    rng = np.random.default_rng(3)
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    w = U @ z + tau
    assert moved.evaluate(z) == pytest.approx(0.5 * np.vdot(w, w).real, abs=1e-13)
    h, _, _ = metric_at(eval_jet(moved, z, 2))
    np.testing.assert_allclose(h, 0.5 * np.eye(2), atol=1e-14)


def test_rotation_rate_of_coupling(oracle):
    """Coefficient of |z1|^2|z2|^2 under exp(i t K1) grows like the symbolic rate."""
    t = 1e-3
    pot = PotentialPolynomial({**QUARTIC_1, **MIXED})
    U = unit_motion(4, t)[0]
    c = apply_motion(pot, U, (0, 0)).terms.get((1, 1, 1, 1), 0)
    rate = (c.real - 1.0) / t
    assert rate == pytest.approx(oracle["toric_K1_rate"]["coupling_rate"], abs=1e-2)


@given(st.integers(0, 2**31 - 1))
def test_motion_is_isometry(seed):
    rng = np.random.default_rng(seed)
    pot = random_potential(rng, (4, 5), scale=0.05)
    frame = FrameParams(np.r_[rng.uniform(-0.05, 0.05, 4), rng.uniform(-np.pi, np.pi, 2)])
    U, tau = frame.motion()
    z = 0.1 * (rng.normal(size=2) + 1j * rng.normal(size=2))
    g_moved = metric_at(eval_jet(apply_motion(pot, U, tau), z, 2))[1]
    g_image = metric_at(eval_jet(pot, U @ z + tau, 2))[1]
    A = _real_unitary(U)
    np.testing.assert_allclose(g_moved, A.T @ g_image @ A, atol=1e-10)


# ------------------------------------------------------------ rescaling


def test_rescale_degrees():
    pot = PotentialPolynomial({**QUARTIC_1, (3, 0, 2, 0): 1.0, (2, 0, 3, 0): 1.0})
    out = rescale_potential(pot, 0.1)
    assert out.terms[(2, 0, 2, 0)] == pytest.approx(1.0)
    assert out.terms[(3, 0, 2, 0)] == pytest.approx(0.1)
    assert out.rho == pytest.approx(0.1)


@given(st.floats(0.01, 1.0))
def test_rescale_round_trip(rho):
    pot = random_potential(np.random.default_rng(7), (4, 5, 6))
    back = rescale_potential(rescale_potential(pot, rho), 1 / rho)
    assert back.allclose(pot, atol=1e-9)


# ------------------------------------------------------------ curvature


def test_flat_curvature_vanishes():
    c = complex_curvature(PotentialPolynomial.euclidean(), (0.4, -0.1j))
    assert np.abs(c.R).max() == 0


def test_curvature_of_mixed_quartic():
    c = complex_curvature(PotentialPolynomial(MIXED), (0, 0))
    assert c.R[0, 0, 1, 1] == pytest.approx(1.0)
    assert c.R[0, 0, 0, 0] == pytest.approx(0.0)
    np.testing.assert_allclose(np.diag(c.ricci).real, [1.0, 1.0])


def test_curvature_of_pure_quartic():
    c = complex_curvature(PotentialPolynomial(QUARTIC_1), (0, 0))
    assert c.R[0, 0, 0, 0] == pytest.approx(4.0)
    np.testing.assert_allclose(np.diag(c.ricci).real, [4.0, 0.0])


@pytest.mark.parametrize("where", ["curvature_at_point", "curvature_at_origin"])
def test_curvature_matches_oracle(oracle, nondeg, where):
    pot, _ = nondeg
    p = [as_complex(x) for x in oracle["point"]] if where == "curvature_at_point" else (0, 0)
    R = complex_curvature(pot, p).R
    for key, val in oracle[where].items():
        k, l, m, n = (int(c) for c in key.split(","))
        assert abs(R[k, l, m, n] - as_complex(val)) <= 1e-11, key


@given(st.integers(0, 2**31 - 1))
def test_origin_curvature_is_fourth_derivative(seed):
    pot = random_potential(np.random.default_rng(seed), (4, 5, 6))
    R = complex_curvature(pot, (0, 0)).R
    d = pot.derivatives([(1, 1, 2, 0), (1, 1, 1, 1), (0, 2, 0, 2)], (0, 0), part="hat")
    assert R[0, 0, 1, 0] == pytest.approx(d[(1, 1, 2, 0)], abs=1e-12)
    assert R[0, 0, 1, 1] == pytest.approx(d[(1, 1, 1, 1)], abs=1e-12)
    assert R[1, 1, 1, 1] == pytest.approx(d[(0, 2, 0, 2)], abs=1e-12)


def test_normalized_curvature_independent_of_rho():
    pot = PotentialPolynomial(QUARTIC_1, rho=0.3)
    c = complex_curvature(pot, (0, 0), normalized=True)
    assert c.R[0, 0, 0, 0] == pytest.approx(4.0)
    assert complex_curvature(pot, (0, 0)).R[0, 0, 0, 0] == pytest.approx(0.36)


# ------------------------------------------------------------ frame functional


def test_f_r_examples():
    s = 1 / np.sqrt(2)
    assert f_r(PotentialPolynomial(MIXED), None, (s, s)) == pytest.approx(1.0)
    assert f_r(PotentialPolynomial(QUARTIC_1), None, (0.6, 0.8)) == pytest.approx(4 * 0.36)
    assert f_r(PotentialPolynomial.euclidean(), [0.1, 0, 0, 0, 0.2, 0.3], (0.6, 0.8)) == 0


@pytest.mark.parametrize("name", ["identity", "rotation", "mixed"])
def test_f_r_matches_oracle(oracle, nondeg, name):
    pot, r = nondeg
    assert f_r(pot, oracle["frames"][name], r) == pytest.approx(oracle["f_r"][name], rel=1e-10)


def test_f_r_gradient_flat_and_translation():
    r = (0.6, 0.8)
    np.testing.assert_allclose(f_r_gradient(PotentialPolynomial.euclidean(), None, r), 0, atol=0)
    g = f_r_gradient(PotentialPolynomial({**QUARTIC_1, **MIXED}), None, r)
    np.testing.assert_allclose(g[:4], 0, atol=1e-9)


def test_f_r_gradient_K1_matches_oracle(oracle):
    r = (0.6, 0.8)
    g = f_r_gradient(PotentialPolynomial({**QUARTIC_1, **MIXED}), None, r)
    assert g[4] == pytest.approx(oracle["toric_K1_rate"]["fr_derivative"], abs=1e-8)
    Hs = f_r_hessian(PotentialPolynomial({**QUARTIC_1, **MIXED}), None, r)
    assert Hs[4, 4] == pytest.approx(oracle["toric_K1_rate"]["fr_second_derivative"], rel=1e-5)


@given(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_f_r_diagonal_invariance(a, b):
    pot, r = random_potential(np.random.default_rng(11), (4, 5)), (0.6, 0.8)
    D = np.diag([np.exp(1j * a), np.exp(1j * b)])
    U, tau = FrameParams([0.05, -0.02, 0.01, 0.03, 0.2, -0.1]).motion()
    direct = f_r(pot, [0.05, -0.02, 0.01, 0.03, 0.2, -0.1], r)
    from hstori.kahler_potential import _f_r_motion

    assert _f_r_motion(pot, (U @ D, tau), r) == pytest.approx(direct, abs=1e-10)


# ------------------------------------------------------------ files


def test_round_trip_file(tmp_path, nondeg):
    pot, _ = nondeg
    path = tmp_path / "pot.yaml"
    save_potential(pot, path)
    assert load_potential(path).allclose(pot)
    assert potential_from_dict(potential_to_dict(pot)).allclose(pot)


def test_asymmetric_file_is_symmetrised(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("terms:\n  - {deg: [2, 0, 0, 2], re: 1.0}\n")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        pot = load_potential(path)
    assert any("symmetris" in str(x.message) for x in w)
    assert pot.terms[(2, 0, 0, 2)] == pytest.approx(0.5)
    assert pot.terms[(0, 2, 2, 0)] == pytest.approx(0.5)
