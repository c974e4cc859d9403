import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from affine_shift.core import (
    AffineParams,
    BoundaryClass,
    MultiParams,
    char_fn,
    classify_boundary,
    expm1_over,
    growth,
    growth_dbeta,
    log_g,
    mean,
    riccati_h,
    riccati_residual,
    validate_params,
)
from affine_shift.errors import DomainError


def ode_h(t, theta, p):
    """Integrate dh/dt = (alpha/2) h^2 + beta h, h(0) = i theta, as a real system."""

    def rhs(_, u):
        h = complex(u[0], u[1])
        d = 0.5 * p.alpha * h * h + p.beta * h
        return [d.real, d.imag]

    sol = solve_ivp(rhs, (0.0, t), [0.0, theta], method="DOP853", rtol=1e-13, atol=1e-14)
    return complex(sol.y[0, -1], sol.y[1, -1])


def test_validate_params_examples():
    assert validate_params(1.0, 0.0, 0.5) == AffineParams(1.0, 0.0, 0.5)
    assert validate_params(4.0, 0.0, 2.0).b == 2.0
    with pytest.raises(DomainError):
        validate_params(0.0, 1.0, 1.0)


@pytest.mark.parametrize("args", [(-1, 0, 0), (1, 0, -0.1), (math.nan, 0, 0), (1, math.inf, 0)])
def test_params_rejected(args):
    with pytest.raises(DomainError):
        AffineParams(*args)


def test_expm1_over_is_smooth_through_zero():
    assert expm1_over(0.0) == 1.0
    for z in (1e-12, -1e-9, 1e-5, 0.3, -2.0):
        assert expm1_over(z) == pytest.approx(math.expm1(z) / z, rel=1e-15)


def test_growth_derivative_matches_finite_difference():
    for beta, t in ((0.0, 1.0), (0.7, 1.5), (-1.3, 0.25), (1e-10, 2.0)):
        h = 1e-5
        fd = (growth(beta + h, t) - growth(beta - h, t)) / (2 * h)
        assert growth_dbeta(beta, t) == pytest.approx(fd, rel=1e-8)


def test_riccati_h_examples():
    p = AffineParams(2.0, 0.0, 1.0)
    assert riccati_h(0.0, 3.7, AffineParams(1.3, -0.4, 0.2)) == 3.7j
    assert riccati_h(2.0, 0.0, p) == 0
    assert riccati_h(1.0, 1.0, p) == pytest.approx(-0.5 + 0.5j, abs=1e-15)


@pytest.mark.parametrize("p", [AffineParams(2.0, 0.0, 1.0), AffineParams(3.0, -2.0, 1.0), AffineParams(0.5, 1.0, 0.0)])
@pytest.mark.parametrize("theta", [-4.0, 0.7, 10.0])
def test_riccati_h_matches_ode_integration(p, theta):
    for t in (0.1, 1.0, 2.5):
        assert abs(riccati_h(t, theta, p) - ode_h(t, theta, p)) <= 1e-10 * max(1.0, abs(theta))


def test_log_g_examples():
    p = AffineParams(2.0, 0.0, 1.0)
    assert log_g(0.0, 4.0, p) == 0
    assert log_g(3.0, 0.0, p) == 0
    assert log_g(1.0, 1.0, p) == pytest.approx(cmath.log(1 / (1 - 1j)), abs=1e-15)


def test_char_fn_examples():
    p = AffineParams(1.0, 0.3, 0.5)
    assert char_fn(2.0, 0.0, 1.5, p) == 1 + 0j
    assert char_fn(0.0, 1.7, 0.8, p) == pytest.approx(cmath.exp(1.7j * 0.8), abs=1e-15)
    want = cmath.exp(log_g(1.0, 1.0, p) + riccati_h(1.0, 1.0, p))
    assert char_fn(1.0, 1.0, 1.0, p) == pytest.approx(want, abs=1e-15)
    assert abs(char_fn(1.0, 1.0, 1.0, p)) <= 1.0


def test_char_fn_beta_zero_keeps_time():
    # at beta = 0 the exponent carries 2 - alpha i theta t, not 2 - alpha i theta
    p = AffineParams(1.0, 0.0, 0.5)
    t, th, x = 3.0, 0.9, 0.0
    d = 2 - p.alpha * 1j * th * t
    assert char_fn(t, th, x, p) == pytest.approx((2 / d) ** (2 * p.b / p.alpha), abs=1e-14)


def test_riccati_residual_examples():
    assert riccati_residual(1.0, 2.0, AffineParams(1.0, 0.0, 0.0), 1e-5) <= 1e-8
    assert riccati_residual(1.0, 0.0, AffineParams(1.0, 0.5, 0.0), 1e-5) == 0.0
    assert riccati_residual(0.5, 5.0, AffineParams(3.0, -2.0, 1.0), 1e-5) <= 1e-7


def test_classify_boundary_examples():
    assert classify_boundary(AffineParams(1.0, 0.0, 0.0)) is BoundaryClass.ABSORBED_AT_ZERO
    assert classify_boundary(AffineParams(1.0, 1.0, 0.4)) is BoundaryClass.REFLECTS_AT_ZERO
    assert classify_boundary(AffineParams(1.0, -1.0, 0.5)) is BoundaryClass.NEVER_HITS_ZERO


def test_mean_beta_limit():
    p = AffineParams(1.0, 0.0, 0.7)
    assert mean(2.0, 1.5, p) == pytest.approx(1.5 + 0.7 * 2.0, rel=1e-15)


def test_multi_params_shift_only_touches_one_coordinate():
    mp = MultiParams.from_arrays([1.0, 2.0], [0.1, -0.2], [0.5, 1.0])
    s = mp.shift(1, 2)
    assert s[0] == mp[0]
    assert s[1].b == pytest.approx(1.0 + 2 * 2.0 / 2)
    with pytest.raises(DomainError):
        MultiParams.from_arrays([1.0], [0.0, 1.0], [0.0])


params = st.builds(
    AffineParams,
    st.floats(0.05, 5.0),
    st.floats(-3.0, 3.0),
    st.floats(0.0, 4.0),
)


@settings(max_examples=200, deadline=None)
@given(params, st.floats(0.01, 5.0), st.floats(-50.0, 50.0), st.floats(0.0, 5.0))
def test_char_fn_properties(p, t, theta, x):
    phi = char_fn(t, theta, x, p)
    assert abs(phi) <= 1.0
    assert char_fn(t, -theta, x, p) == phi.conjugate()


@settings(max_examples=100, deadline=None)
@given(params, st.floats(0.05, 3.0), st.sampled_from([1e-7, -1e-7, 1e-9]))
def test_beta_continuity_property(p, t, eps):
    p0 = p.with_beta(0.0)
    a = char_fn(t, 1.3, 0.8, p0.with_beta(eps))
    b = char_fn(t, 1.3, 0.8, p0)
    assert abs(a - b) <= 1e-5
