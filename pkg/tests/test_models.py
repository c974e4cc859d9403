import math

import numpy as np
import pytest

from affine_shift.core import AffineParams, mean
from affine_shift.errors import DomainError, FellerViolation, ResourceError
from affine_shift.greeks import FDTarget, Inversion, delta_combined, delta_shift, fd_oracle, ibp_shift
from affine_shift.models import (
    CIRParams,
    OffspringDist,
    PopulationParams,
    affine_to_cir,
    cir_combined,
    cir_delta,
    cir_ibp,
    cir_mean,
    cir_to_affine,
    galton_watson_ensemble,
    galton_watson_simulate,
    population_gamma_sensitivity,
)
from affine_shift.simulate import child_rng
from affine_shift.transforms import Gaussian, QuadratureConfig

INV = Inversion(QuadratureConfig(1e-14, 1e-13))
RATE_F = Gaussian(0.05, 0.03)


def test_cir_to_affine_example():
    p = cir_to_affine(CIRParams(0.2, 1.5, 0.04, 0.03))
    assert (p.alpha, p.beta, p.b) == pytest.approx((0.04, -1.5, 0.06), rel=1e-15)


def test_cir_round_trip():
    c = CIRParams(0.3, 0.7, 0.05, 0.02)
    back = affine_to_cir(cir_to_affine(c), c.r0)
    assert back.k == c.k and back.r0 == c.r0
    assert back.sigma == pytest.approx(c.sigma, rel=1e-15)
    assert back.theta == pytest.approx(c.theta, rel=1e-15)
    with pytest.raises(DomainError):
        affine_to_cir(AffineParams(1.0, 0.5, 1.0), 0.1)


def test_cir_mean_matches_affine_mean():
    c = CIRParams(0.2, 1.5, 0.04, 0.07)
    assert cir_mean(2.0, c) == pytest.approx(mean(2.0, c.r0, cir_to_affine(c)), rel=1e-14)


def test_feller_examples():
    good = CIRParams(0.2, 1.5, 0.04, 0.05)
    bad = CIRParams(0.4, 0.5, 0.04, 0.05)
    assert good.feller_satisfied and not bad.feller_satisfied
    assert math.isfinite(cir_ibp(RATE_F, 1.0, good, INV).value)
    with pytest.raises(FellerViolation):
        cir_ibp(RATE_F, 1.0, bad, INV)


def test_cir_adapters_delegate():
    c = CIRParams(0.2, 1.5, 0.04, 0.05)
    p = cir_to_affine(c)
    assert cir_delta(RATE_F, 1.0, c, INV).value == delta_shift(RATE_F, 1.0, c.r0, p, INV).value
    assert cir_ibp(RATE_F, 1.0, c, INV).value == ibp_shift(RATE_F, 1.0, c.r0, p, INV).value
    assert cir_combined(RATE_F, 1.0, c, INV).value == delta_combined(RATE_F, 1.0, c.r0, p, INV).value
    # the combined prefactor e^{-kt} lies in (0, 1)
    assert 0 < cir_combined(RATE_F, 1.0, c, INV).weights[0] < 1
    fd = fd_oracle(FDTarget.IN_X, RATE_F, 1.0, c.r0, p, INV, h=1e-3)
    assert cir_delta(RATE_F, 1.0, c, INV).value == pytest.approx(fd, rel=1e-6)


def test_ibp_shifted_long_run_mean():
    c = CIRParams(0.2, 1.5, 0.04, 0.05)
    shifted = cir_ibp(RATE_F, 1.0, c, INV).shifted_params[1]
    assert shifted.b / c.k == pytest.approx(c.theta - c.sigma**2 / (2 * c.k), rel=1e-14)


def test_cir_params_validation():
    with pytest.raises(DomainError):
        CIRParams(0.2, 0.0, 0.04, 0.05)


def test_population_sensitivity_matches_fd():
    pp = PopulationParams(0.4, 0.8, 1.2)
    f = Gaussian(1.0, 1.0)
    got = population_gamma_sensitivity(f, 1.0, pp, INV)
    assert got.value == pytest.approx(fd_oracle(FDTarget.IN_BETA, f, 1.0, pp.x0, pp.affine(), INV), rel=1e-5)
    assert [q.b for q in got.shifted_params] == pytest.approx([0.8, 0.4, 0.0])


def test_population_zero_growth_weights():
    # d/dgamma E[Z_t] = x t at gamma = 0, so the weights are (x, 0, -x)/sigma^2
    x, s2 = 1.3, 0.8
    res = population_gamma_sensitivity(Gaussian(1.0, 1.0), 1.0, PopulationParams(0.0, s2, x), INV)
    assert res.weights == pytest.approx((x / s2, 0.0, -x / s2), abs=1e-15)
    assert abs(math.fsum(res.weights)) <= 1e-15


def test_offspring_parse_and_moments():
    assert OffspringDist.parse("geom:0.5") == OffspringDist("geom", 0.5)
    g = OffspringDist.calibrated("geom", 0.5, 2000)
    assert g.mean == pytest.approx(1 + 0.5 / 2000, rel=1e-14)
    assert OffspringDist.calibrated("poisson", -1.0, 10).mean == pytest.approx(0.9)
    assert OffspringDist.calibrated("binary", 1.0, 10).variance == pytest.approx(4 * 0.55 * 0.45)
    for bad in ("geom:0", "binary:1.5", "fixed:1.5", "weird:1", "geom"):
        with pytest.raises(DomainError):
            OffspringDist.parse(bad)


@pytest.mark.parametrize("spec", ["geom:0.45", "poisson:1.1", "binary:0.55"])
def test_aggregate_law_matches_individual_sums(spec):
    od = OffspringDist.parse(spec)
    rng = child_rng(30, 0)
    parents = 40
    totals = od.draw_total(rng, np.full(50_000, parents))
    indiv = od.draw_each(rng, 50_000 * parents).reshape(50_000, parents).sum(axis=1)
    for sample in (totals, indiv):
        assert abs(sample.mean() - parents * od.mean) <= 4 * math.sqrt(parents * od.variance / sample.size)
    assert totals.var() == pytest.approx(parents * od.variance, rel=0.05)
    assert indiv.var() == pytest.approx(parents * od.variance, rel=0.05)


def test_gw_trivial_cases():
    rng = child_rng(0, 0)
    assert galton_watson_simulate(100, 0.001, OffspringDist("geom", 0.5), 1.0, rng) == 0.0
    assert galton_watson_simulate(100, 1.234, OffspringDist("fixed", 1), 3.0, rng) == 1.23
    assert galton_watson_simulate(50, 1.0, OffspringDist("geom", 0.5), 1.0, rng, per_individual=True) >= 0
    with pytest.raises(ResourceError):
        galton_watson_simulate(100, 1.0, OffspringDist("fixed", 2), 1.0, rng, cap=10**6)


def test_gw_ensemble_mean_and_determinism():
    N, gamma = 2000, 0.5
    od = OffspringDist.calibrated("geom", gamma, N)
    ens = galton_watson_ensemble(N, 1.0, od, 1.0, 10_000, seed=77)
    gamma_n, _ = od.implied_limit(N)
    # the discrete mean is [N x0] (1 + gamma/N)^[N t] / N, within 5e-2 of x0 e^{gamma t}
    assert abs(ens.terminal.mean() - math.exp(gamma_n)) <= 5e-2
    again = galton_watson_ensemble(N, 1.0, od, 1.0, 10_000, seed=77, workers=4)
    assert np.array_equal(ens.terminal, again.terminal) and ens.sum_xy == again.sum_xy


def test_gw_slope_fixed_offspring_is_exact():
    ens = galton_watson_ensemble(10, 1.0, OffspringDist("fixed", 1), 1.0, 5, seed=1)
    assert ens.slope == 1.0 and ens.slope_stderr == 0.0
