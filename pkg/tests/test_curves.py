import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveext import curves as cv


# ---------------------------------------------------------------------------
# exponents and beta
# ---------------------------------------------------------------------------


def test_beta_closed_form_values():
    # hand-computed from the piecewise formula
    assert cv.beta_alpha(2.0, 2) == pytest.approx(3.0)
    assert cv.beta_alpha(1.0, 2) == pytest.approx(2.0)
    assert cv.beta_alpha(0.5, 2) == pytest.approx(1.0 + 0.0)  # j=1: 2*0.5 + 0
    assert cv.beta_alpha(3.0, 3) == pytest.approx(6.0)
    assert cv.beta_alpha(1.5, 3) == pytest.approx(2 * 1.5 + 1.0)  # j=1
    assert cv.beta_alpha(d := 4, d=d) == pytest.approx(d * (d + 1) / 2)


def test_beta_full_dimension_is_triangular_number():
    for d in range(2, 7):
        assert cv.beta_alpha(float(d), d) == pytest.approx(d * (d + 1) / 2)


def test_beta_rejects_out_of_range():
    with pytest.raises(ValueError):
        cv.beta_alpha(0.0, 2)
    with pytest.raises(ValueError):
        cv.beta_alpha(2.5, 2)


@given(st.integers(2, 6), st.floats(0.01, 1.0, exclude_min=True))
def test_beta_monotone_and_continuous(d, frac):
    alpha = frac * d
    b = cv.beta_alpha(alpha, d)
    b2 = cv.beta_alpha(min(alpha + 1e-6, d), d)
    assert b2 >= b - 1e-12
    # continuity at bracket endpoints
    for j in range(1, d):
        lo = cv.beta_alpha(float(j) + 1e-9, d)
        hi = cv.beta_alpha(float(j), d)
        assert lo == pytest.approx(hi, abs=1e-6)


def test_exponent_tuple_validation():
    with pytest.raises(ValueError):
        cv.ExponentTuple((2, 2))
    with pytest.raises(ValueError):
        cv.ExponentTuple((0, 1))
    assert cv.nondegenerate_tuple(3).is_nondegenerate()
    assert not cv.ExponentTuple((1, 3)).is_nondegenerate()


def test_sigma_exponent_nondegenerate_is_one():
    for d in range(2, 6):
        a = cv.nondegenerate_tuple(d)
        assert cv.sigma_exponent(a, float(d)) == pytest.approx(1.0)


def test_sigma_exponent_oracle_value():
    # a=(2,3), d=2, alpha=2: (5-3)/3 + 1 = 5/3
    assert cv.sigma_exponent((2, 3), 2.0) == pytest.approx(5.0 / 3.0)


# ---------------------------------------------------------------------------
# curve evaluation, torsion, minors
# ---------------------------------------------------------------------------


def test_model_curve_point_and_derivatives():
    g = cv.model_curve(3)
    t = 0.5
    np.testing.assert_allclose(g.point(t), [t, t**2 / 2, t**3 / 6])
    np.testing.assert_allclose(g.derivative(t, 1), [1.0, t, t**2 / 2])
    np.testing.assert_allclose(g.derivative(t, 3), [0.0, 0.0, 1.0])


def test_model_curve_torsion_is_one():
    for d in range(2, 6):
        g = cv.model_curve(d)
        ts = np.linspace(0, 1, 11)
        np.testing.assert_allclose(cv.torsion(g, ts), np.ones_like(ts), atol=1e-12)


def test_torsion_oracle_degenerate_curve():
    # gamma = (t, t^3/6): torsion = det[[1, 0], [t^2/2, t]] = t
    g = cv.monomial_model((1, 3))
    ts = np.linspace(0, 1, 9)
    np.testing.assert_allclose(cv.torsion(g, ts), ts, atol=1e-12)


def test_torsion_oracle_helix_like_polynomial():
    # gamma = (t, t^2, t^3): det[[1,0,0],[2t,2,0],[3t^2,6t,6]] = 12
    g = cv.CurveSpec(d=3, coeffs=((0, 1), (0, 0, 1), (0, 0, 0, 1)))
    np.testing.assert_allclose(cv.torsion(g, np.array([0.0, 0.3, 1.0])), 12.0)


def test_minor_determinant_oracle():
    g = cv.model_curve(3)
    # rows (1,2) against (gamma', gamma''): det[[1, 0], [t, 1]] = 1
    assert cv.minor_determinant(g, (1, 2), 0.7) == pytest.approx(1.0)
    # rows (2,3): det[[t, 1], [t^2/2, t]] = t^2/2
    assert cv.minor_determinant(g, (2, 3), 0.4) == pytest.approx(0.08)


def test_det_exact_matches_numpy():
    rng = np.random.default_rng(7)
    for n in range(1, 6):
        m = rng.standard_normal((n, n))
        assert cv.det_exact(m) == pytest.approx(np.linalg.det(m), rel=1e-9)


def test_derivative_order_budget_enforced():
    g = cv.model_curve(2)
    with pytest.raises(cv.CapabilityError):
        g.derivative(0.5, g.order_budget + 1)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_curve_text_round_trip():
    g = cv.CurveSpec(d=2, coeffs=((0, 1, 0.25), (0, 0, 0.5)),
                     a=cv.ExponentTuple((1, 2)), label="demo")
    back = cv.CurveSpec.from_text(g.to_text())
    assert back.d == g.d
    assert back.coeffs == g.coeffs
    assert back.a.values == g.a.values
    assert back.label == "demo"


def test_curve_text_rejects_malformed():
    with pytest.raises(ValueError):
        cv.CurveSpec.from_text("dimension = 2\ncomponent_1 = 0 1\n")


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def test_normalize_model_curve_is_fixed_point():
    # the model curve renormalizes to itself at tau=0 for any h
    g = cv.model_curve(3)
    for h in (1.0, 0.5, 0.125):
        norm = cv.normalize_curve(g, 0.0, h)
        dist = cv.class_distance(norm).value
        assert dist < 1e-10


def test_normalize_phase_identity_exact():
    # x . (gamma(h t + tau) - gamma(tau)) == (D_h M^t x) . normalized(t)
    g = cv.CurveSpec(d=3, coeffs=((0, 1, 0.3), (0, 0.2, 0.5, 0.1), (0, 0, 0, 0.4)))
    tau, h = 0.2, 0.3
    a = cv.nondegenerate_tuple(3)
    norm = cv.normalize_curve(g, tau, h, a)
    frame = cv.frame_matrix(g, tau, a)
    dh = cv.diagonal_scaling(h, a)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.standard_normal(3)
        t = rng.uniform(0, 1)
        lhs = x @ (g.point(h * t + tau) - g.point(tau))
        rhs = (dh @ frame.matrix.T @ x) @ norm.point(t)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_normalization_linear_convergence_to_model():
    # distance to the model class decays at least linearly in h
    g = cv.CurveSpec(d=2, coeffs=((0, 1, 0.2, 0.05), (0, 0.1, 0.6, 0.3)))
    tau = 0.1
    hs = [2.0 ** (-k) for k in range(1, 7)]
    dists = [cv.class_distance(cv.normalize_curve(g, tau, h)).value for h in hs]
    ratios = [dists[i] / dists[i + 1] for i in range(len(dists) - 1)]
    assert all(r > 1.9 for r in ratios)


def test_normalize_rejects_singular_frame():
    # gamma' and gamma'' are parallel at tau=0 for this curve
    g = cv.CurveSpec(d=2, coeffs=((0, 1, 0.5), (0, 2, 1.0)))
    with pytest.raises(cv.SingularFrameError):
        cv.normalize_curve(g, 0.0, 0.5)


def test_normalize_rejects_interval_escape():
    g = cv.model_curve(2)
    with pytest.raises(ValueError):
        cv.normalize_curve(g, 0.9, 0.5)


def test_normalize_monomial_type_tuple():
    # gamma = (t, t^3/6) at tau=0 with tuple (1,3) normalizes to its own model
    g = cv.monomial_model((1, 3))
    norm = cv.normalize_curve(g, 0.0, 0.5, cv.ExponentTuple((1, 3)))
    dist = cv.class_distance(norm, model=(1, 3)).value
    assert dist < 1e-10


# ---------------------------------------------------------------------------
# class distance
# ---------------------------------------------------------------------------


def test_class_distance_detects_perturbation_size():
    d1 = cv.class_distance(cv.model_curve(2)).value
    assert d1 < 1e-14
    g = cv.CurveSpec(d=2, coeffs=((0, 1), (0, 0, 0.5, 0.01)))
    d2 = cv.class_distance(g).value
    # C^3 norm of 0.01 t^3 on [0,1] is 0.06 (third derivative)
    assert d2 == pytest.approx(0.06, rel=0.02)


def test_class_distance_monomial_infinite_when_low_terms_present():
    g = cv.CurveSpec(d=2, coeffs=((0, 1), (0, 0.5, 0, 1 / 6)))
    assert math.isinf(cv.class_distance(g, model=(1, 3)).value)


# ---------------------------------------------------------------------------
# finite type detection
# ---------------------------------------------------------------------------


def test_detect_finite_type_nondegenerate():
    data = cv.detect_finite_type(cv.model_curve(3), 0.3)
    assert data.a.values == (1, 2, 3)


def test_detect_finite_type_cusp_curve():
    # gamma = (t^2, t^3) at the origin has tuple (2, 3)
    g = cv.CurveSpec(d=2, coeffs=((0, 0, 1), (0, 0, 0, 1)), label="cusp")
    data = cv.detect_finite_type(g, 0.0)
    assert data.a.values == (2, 3)
    # phi_k(0) = 1/a_k! after frame normalization
    assert data.phi(0, 0.0) == pytest.approx(1.0 / 2.0)
    assert data.phi(1, 0.0) == pytest.approx(1.0 / 6.0)


def test_detect_finite_type_away_from_cusp_is_nondegenerate():
    g = cv.CurveSpec(d=2, coeffs=((0, 0, 1), (0, 0, 0, 1)))
    data = cv.detect_finite_type(g, 0.5)
    assert data.a.values == (1, 2)


def test_detect_finite_type_flat_curve_raises():
    # second component identically zero: never spans R^2
    g = cv.CurveSpec(d=2, coeffs=((0, 1), (0.0,)))
    with pytest.raises(cv.NotFiniteTypeError):
        cv.detect_finite_type(g, 0.0)


def test_phi_normalization_general_curve():
    g = cv.CurveSpec(d=2, coeffs=((0, 0, 3, 1), (0, 0, 0, 2, 0.5)), label="scaled")
    data = cv.detect_finite_type(g, 0.0)
    assert data.a.values == (2, 3)
    for k in range(2):
        assert data.phi(k, 0.0) == pytest.approx(1.0 / math.factorial(data.a[k]))


# ---------------------------------------------------------------------------
# weights and the weight rescaling identity
# ---------------------------------------------------------------------------


def test_affine_weight_model_curve_is_one():
    g = cv.model_curve(3)
    ts = np.linspace(0, 1, 5)
    np.testing.assert_allclose(cv.affine_weight(g, 3.0, ts), 1.0)


def test_affine_weight_oracle_value():
    # gamma=(t, t^3/6): torsion = t, alpha=2 -> beta=3 -> weight = t^{1/3}
    g = cv.monomial_model((1, 3))
    ts = np.array([0.125, 0.5, 1.0])
    np.testing.assert_allclose(cv.affine_weight(g, 2.0, ts), ts ** (1 / 3), atol=1e-12)


def test_weight_scaling_identity_nondegenerate():
    g = cv.CurveSpec(d=2, coeffs=((0, 1, 0.2), (0, 0.3, 0.7, 0.1)))
    err = cv.weight_scaling_check(g, 0.1, 0.4, (1, 2), alpha=2.0)
    assert err < 1e-10


def test_weight_scaling_identity_monomial_type():
    g = cv.monomial_model((1, 3))
    err = cv.weight_scaling_check(g, 0.0, 0.5, (1, 3), alpha=2.0)
    assert err < 1e-10


@settings(deadline=None, max_examples=25)
@given(st.floats(0.05, 0.45), st.floats(0.05, 0.5))
def test_weight_scaling_identity_property(tau, h):
    g = cv.CurveSpec(d=2, coeffs=((0, 1, 0.1, 0.05), (0, 0.2, 0.5, 0.2)))
    err = cv.weight_scaling_check(g, tau, h, (1, 2), alpha=1.5)
    assert err < 1e-8


# ---------------------------------------------------------------------------
# sum map and nested-integral recursion
# ---------------------------------------------------------------------------


def test_gamma_sum_map_oracle():
    g = cv.model_curve(2)
    probe = cv.JacobianProbe((0.2, 0.8))
    point, jac = cv.gamma_sum_map(g, probe)
    np.testing.assert_allclose(point, [1.0, 0.02 + 0.32])
    # det[[1, 1], [0.2, 0.8]] = 0.6
    assert jac == pytest.approx(0.6)


def test_ik_recursion_model_d2():
    g = cv.model_curve(2)
    probe = cv.JacobianProbe((0.25, 0.75), b=cv.ExponentTuple((1, 2)))
    val = cv.ik_recursion(g, probe)
    assert val == pytest.approx(0.5, abs=1e-10)  # t2 - t1


def test_ik_recursion_monomial_13():
    g = cv.monomial_model((1, 3))
    t1, t2 = 0.3, 0.9
    probe = cv.JacobianProbe((t1, t2), b=cv.ExponentTuple((1, 3)))
    val = cv.ik_recursion(g, probe)
    assert val == pytest.approx((t2**2 - t1**2) / 2, abs=1e-8)


def test_ik_recursion_model_d3():
    g = cv.model_curve(3)
    t = (0.2, 0.5, 0.9)
    probe = cv.JacobianProbe(t, b=cv.ExponentTuple((1, 2, 3)))
    val = cv.ik_recursion(g, probe)
    expected = (t[1] - t[0]) * (t[2] - t[0]) * (t[2] - t[1]) / 2
    assert val == pytest.approx(expected, abs=1e-7)


def test_ik_recursion_matches_sum_map_jacobian():
    # on the ordered simplex the recursion reproduces det dGamma/dt
    g = cv.model_curve(2)
    rng = np.random.default_rng(3)
    for _ in range(5):
        t = np.sort(rng.uniform(0.1, 1.0, 2))
        probe = cv.JacobianProbe(tuple(t), b=cv.ExponentTuple((1, 2)))
        _, jac = cv.gamma_sum_map(g, probe)
        assert cv.ik_recursion(g, probe) == pytest.approx(jac, abs=1e-8)


def test_jacobian_lower_bound_holds_for_model():
    g = cv.model_curve(3)
    rng = np.random.default_rng(11)
    for _ in range(50):
        t = np.sort(rng.uniform(0.05, 1.0, 3))
        if np.min(np.diff(t)) < 1e-3:
            continue
        probe = cv.JacobianProbe(tuple(t), b=cv.ExponentTuple((1, 2, 3)))
        _, jac = cv.gamma_sum_map(g, probe)
        lb = cv.jacobian_lower_bound((1, 2, 3), tuple(t))
        assert abs(jac) >= lb - 1e-12


def test_adaptive_quad_polynomial_exactness():
    val = cv.adaptive_quad(lambda s: s**3, 0.0, 2.0)
    assert val == pytest.approx(4.0, abs=1e-12)


def test_adaptive_quad_orientation():
    assert cv.adaptive_quad(lambda s: 1.0, 1.0, 0.0) == pytest.approx(-1.0)
