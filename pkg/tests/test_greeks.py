import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_shift.core import AffineParams, MultiParams, char_fn
from affine_shift.errors import DomainError, FellerViolation, UnsupportedError
from affine_shift.greeks import (
    Density,
    FDTarget,
    Inversion,
    Method,
    MonteCarlo,
    TensorFunction,
    dbeta_coefficients,
    dbeta_shift,
    delta_combined,
    delta_factor,
    delta_shift,
    fd_oracle,
    ibp_factor,
    ibp_shift,
    multi_combined,
    multi_delta,
    multi_fd_oracle,
    multi_ibp,
)
from affine_shift.simulate import MCConfig
from affine_shift.transforms import DampedCosine, Gaussian, MollifiedWindow, QuadratureConfig

TIGHT = QuadratureConfig(1e-14, 1e-13)
INV = Inversion(TIGHT)
DEN = Density(TIGHT)
F = Gaussian(1.0, 1.0)


def test_factor_examples():
    assert delta_factor(AffineParams(2.0, 0.0, 1.0), 1.0) == 1.0
    assert ibp_factor(AffineParams(2.0, 0.0, 1.0), 1.0) == 1.0
    assert delta_factor(AffineParams(2.0, 1e-9, 1.0), 1.0) == pytest.approx(1.0, rel=1e-7)


def test_factors_nonzero_beta_closed_form():
    a, be, t = 1.7, -0.6, 0.9
    p = AffineParams(a, be, 1.0)
    e = math.exp(be * t)
    assert delta_factor(p, t) == pytest.approx(2 * be * e / (a * (e - 1)), rel=1e-14)
    assert ibp_factor(p, t) == pytest.approx(2 * be / (a * (e - 1)), rel=1e-14)


@pytest.mark.parametrize("beta", [-0.8, 0.0, 1e-7, 0.7])
def test_dbeta_coefficients_reproduce_dbeta_of_phi(beta):
    # d/dbeta phi_b = A phi_{b + alpha} + B phi_{b + alpha/2} + C0 phi_b, pointwise in theta
    p, t, x = AffineParams(1.3, beta, 0.4), 1.2, 0.9
    a, b, c = dbeta_coefficients(p, t, x)
    h = 1e-5
    for th in (-2.0, 0.5, 3.0):
        fd = (char_fn(t, th, x, p.with_beta(beta + h)) - char_fn(t, th, x, p.with_beta(beta - h))) / (2 * h)
        rhs = a * char_fn(t, th, x, p.shift(2)) + b * char_fn(t, th, x, p.shift(1)) + c * char_fn(t, th, x, p)
        assert abs(fd - rhs) <= 1e-8


def test_dbeta_zero_beta_limit():
    x, a, b, t = 1.3, 0.8, 0.6, 1.7
    got = dbeta_coefficients(AffineParams(a, 0.0, b), t, x)
    assert got == pytest.approx((x / a, b * t / a, -(b * t + x) / a), rel=1e-14)


def test_dbeta_sum_zero_example():
    assert abs(math.fsum(dbeta_coefficients(AffineParams(1.0, 0.7, 0.3), 1.5, 2.0))) <= 1e-12


def test_dbeta_matches_fd_example():
    p, t, x = AffineParams(1.0, 0.4, 0.5), 1.0, 1.0
    f = Gaussian(0.0, 1.0)
    got = dbeta_shift(f, t, x, p, INV)
    assert got.value == pytest.approx(fd_oracle(FDTarget.IN_BETA, f, t, x, p, INV), rel=1e-5)
    assert got.kind == "dbeta" and [q.b for q in got.shifted_params] == [1.5, 1.0, 0.5]


@pytest.mark.parametrize("p,x,t", [
    (AffineParams(1.0, 0.3, 0.6), 1.0, 1.0),
    (AffineParams(0.5, -1.0, 2.0), 0.5, 0.25),
    (AffineParams(4.0, 0.0, 2.0), 1.0, 1.0),
])
def test_shift_estimators_against_oracles(p, x, t):
    fd = fd_oracle(FDTarget.IN_X, F, t, x, p, INV)
    for be in (INV, DEN):
        assert delta_shift(F, t, x, p, be).value == pytest.approx(fd, rel=1e-7)
        assert delta_combined(F, t, x, p, be).value == pytest.approx(fd, rel=1e-7)
        assert ibp_shift(F, t, x, p, be).value == pytest.approx(be.derivative_expectation(F, t, x, p), rel=1e-9)


def test_combined_at_zero_beta_is_shifted_derivative():
    p, t, x = AffineParams(1.0, 0.0, 0.5), 1.0, 1.0
    assert delta_combined(F, t, x, p, INV).value == pytest.approx(INV.derivative_expectation(F, t, x, p.shift(1)), rel=1e-15)


def test_feller_gate_and_input_checks():
    with pytest.raises(FellerViolation):
        ibp_shift(F, 1.0, 1.0, AffineParams(4.0, 0.0, 1.0), INV)
    with pytest.raises(DomainError):
        delta_shift(F, 1.0, 0.0, AffineParams(1.0, 0.0, 1.0), INV)
    with pytest.raises(UnsupportedError):
        delta_combined(DampedCosine(1.0, 1.0), 1.0, 1.0, AffineParams(1.0, 0.0, 1.0), INV)


def test_window_payoff_delta():
    f = MollifiedWindow(0.5, 1.5, 0.1)
    p, t, x = AffineParams(1.0, -0.3, 0.8), 0.5, 1.0
    assert delta_shift(f, t, x, p, INV).value == pytest.approx(fd_oracle(FDTarget.IN_X, f, t, x, p, INV), rel=1e-6)


class _LinearBackend:
    method = Method.INVERSION

    def expectation(self, f, t, x, p):
        return 3.0 * x - 2.0 * p.beta + 0.5


def test_fd_oracle_exact_on_linear_backend():
    p = AffineParams(1.0, 0.2, 0.5)
    assert abs(fd_oracle(FDTarget.IN_X, F, 1.0, 1.0, p, _LinearBackend()) - 3.0) <= 1e-10
    assert abs(fd_oracle(FDTarget.IN_BETA, F, 1.0, 1.0, p, _LinearBackend(), h=0.25) + 2.0) <= 1e-14
    with pytest.raises(DomainError):
        fd_oracle(FDTarget.IN_X, F, 1.0, 1e-5, p, _LinearBackend())


def test_fd_oracle_converges_at_fourth_order():
    p, t, x = AffineParams(1.0, 0.3, 0.6), 1.0, 1.0
    exact = delta_shift(F, t, x, p, INV).value
    e1 = abs(fd_oracle(FDTarget.IN_X, F, t, x, p, INV, h=0.2) - exact)
    e2 = abs(fd_oracle(FDTarget.IN_X, F, t, x, p, INV, h=0.1) - exact)
    assert e2 <= e1 / 4


def test_monte_carlo_backend_agrees():
    p, t, x = AffineParams(1.0, 0.3, 0.6), 1.0, 1.0
    mc = MonteCarlo(MCConfig(n_samples=400_000, master_seed=3))
    for fn in (delta_shift, ibp_shift, delta_combined, dbeta_shift):
        r = fn(F, t, x, p, mc)
        assert r.method is Method.MC
        assert abs(r.value - fn(F, t, x, p, INV).value) <= 3 * r.std_error
    d1 = delta_shift(F, t, x, p, mc)
    d2 = delta_combined(F, t, x, p, mc)
    assert abs(d1.value - d2.value) <= 3 * math.hypot(d1.std_error, d2.std_error)


MP = MultiParams.from_arrays([1.0, 0.5, 2.0], [-0.5, 0.0, 0.3], [1.0, 0.5, 1.5])
X3 = (1.0, 0.5, 0.8)
F3 = TensorFunction((Gaussian(1.0, 1.0), Gaussian(0.5, 0.7), Gaussian(1.5, 1.2)))


def test_multi_reduces_to_one_dimension():
    p, x = AffineParams(1.0, 0.3, 0.6), 1.0
    one = TensorFunction((F,))
    mp = MultiParams((p,))
    assert multi_delta(0, one, 1.0, (x,), mp, INV).value == pytest.approx(delta_shift(F, 1.0, x, p, INV).value, rel=1e-14)
    assert multi_ibp(0, one, 1.0, (x,), mp, INV).value == pytest.approx(ibp_shift(F, 1.0, x, p, INV).value, rel=1e-14)
    assert multi_combined(0, one, 1.0, (x,), mp, INV).value == pytest.approx(
        delta_combined(F, 1.0, x, p, INV).value, rel=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_multi_against_fd(k):
    fd = multi_fd_oracle(k, F3, 0.7, X3, MP, INV)
    assert multi_delta(k, F3, 0.7, X3, MP, INV).value == pytest.approx(fd, rel=1e-7)
    assert multi_combined(k, F3, 0.7, X3, MP, INV).value == pytest.approx(fd, rel=1e-7)
    assert multi_ibp(k, F3, 0.7, X3, MP, DEN).value == pytest.approx(
        DEN.multi_expectation(F3, 0.7, X3, MP, derivative_in=k), rel=1e-8)


def test_multi_monte_carlo():
    mc = MonteCarlo(MCConfig(n_samples=300_000, master_seed=21))
    r = multi_delta(2, F3, 0.7, X3, MP, mc)
    assert abs(r.value - multi_delta(2, F3, 0.7, X3, MP, INV).value) <= 3 * r.std_error


def test_multi_input_checks():
    with pytest.raises(DomainError):
        multi_delta(3, F3, 0.7, X3, MP, INV)
    with pytest.raises(DomainError):
        multi_delta(0, F3, 0.7, (1.0, 0.5), MP, INV)
    with pytest.raises(FellerViolation):
        multi_ibp(2, F3, 0.7, X3, MultiParams.from_arrays([1.0, 0.5, 4.0], [0, 0, 0], [1.0, 0.5, 1.0]), INV)


def test_result_serialises():
    d = delta_shift(F, 1.0, 1.0, AffineParams(1.0, 0.0, 1.0), INV).as_dict()
    assert d["method"] == "Inversion" and d["std_error"] is None
    assert d["weights"] == [2.0, -2.0]
    assert d["shifted_params"][0] == {"alpha": 1.0, "beta": 0.0, "b": 1.5}


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(-3.0, 3.0), st.floats(0.0, 4.0), st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_dbeta_weights_sum_to_zero(alpha, beta, b, t, x):
    a, bb, c = dbeta_coefficients(AffineParams(alpha, beta, b), t, x)
    assert abs(math.fsum((a, bb, c))) <= 1e-12 * max(1.0, abs(a), abs(bb), abs(c))
