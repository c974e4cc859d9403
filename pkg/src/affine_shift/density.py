"""Transition law of the affine diffusion as a scaled noncentral chi-square.

``X_t = c * Y`` with ``Y ~ chi'^2(k, lambda)`` where

    c = alpha m / 4,   k = 4 b / alpha,   lambda = 4 x e^{beta t} / (alpha m),
    m = (e^{beta t} - 1) / beta.

For ``k = 0`` the law has an atom ``exp(-lambda/2)`` at zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .core import AffineParams, growth
from .errors import DomainError, QuadratureError
from .transforms import QuadratureConfig, TestFunction

_LOG_TERM_FLOOR = math.log(1e-20)


@dataclass(frozen=True)
class NoncentralChiSquareRep:
    scale_c: float
    dof_k: float
    noncentrality_lambda: float

    def __post_init__(self):
        if not self.scale_c > 0:
            raise DomainError("scale_c must be > 0")
        if not (self.dof_k >= 0 and self.noncentrality_lambda >= 0):
            raise DomainError("dof_k and noncentrality_lambda must be >= 0")

    @property
    def zero_mass(self) -> float:
        return math.exp(-0.5 * self.noncentrality_lambda) if self.dof_k == 0 else 0.0

    @property
    def mean(self) -> float:
        return self.scale_c * (self.dof_k + self.noncentrality_lambda)

    @property
    def variance(self) -> float:
        return 2.0 * self.scale_c**2 * (self.dof_k + 2.0 * self.noncentrality_lambda)

    def transform(self, theta):
        """``E[exp(i theta X)] = exp(i lambda c theta / (1 - 2 i c theta)) / (1 - 2 i c theta)^(k/2)``."""
        theta = np.asarray(theta, dtype=float)
        c, k, lam = self.scale_c, self.dof_k, self.noncentrality_lambda
        d = 1.0 - 2j * c * theta
        out = np.exp(1j * lam * c * theta / d - 0.5 * k * np.log(d))
        return complex(out) if out.ndim == 0 else out

    def poisson_window(self) -> np.ndarray:
        """Mixture indices ``n`` whose Poisson(lambda/2) weight is not negligible."""
        mu = 0.5 * self.noncentrality_lambda
        first = 1 if self.dof_k == 0 else 0
        if mu == 0.0:
            return np.array([first])
        mode = max(first, int(math.floor(mu)))

        def logw(n):
            return -mu + n * math.log(mu) - math.lgamma(n + 1)

        top = logw(mode)
        lo = mode
        while lo > first and logw(lo - 1) - top > _LOG_TERM_FLOOR:
            lo -= 1
        hi = mode
        while logw(hi + 1) - top > _LOG_TERM_FLOOR:
            hi += 1
        return np.arange(lo, hi + 1)

    def as_dict(self) -> dict:
        return {
            "scale_c": self.scale_c,
            "dof_k": self.dof_k,
            "noncentrality_lambda": self.noncentrality_lambda,
            "zero_mass": self.zero_mass,
        }


def transition_rep(t: float, x: float, p: AffineParams) -> NoncentralChiSquareRep:
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    m = growth(p.beta, t)
    return NoncentralChiSquareRep(
        scale_c=p.alpha * m / 4.0,
        dof_k=4.0 * p.b / p.alpha,
        noncentrality_lambda=4.0 * x * math.exp(p.beta * t) / (p.alpha * m),
    )


def _log_terms(y: np.ndarray, rep: NoncentralChiSquareRep, power: float) -> np.ndarray:
    """log of each mixture term divided by ``y**power``; shape (len(n), len(y))."""
    n = rep.poisson_window()
    mu = 0.5 * rep.noncentrality_lambda
    logw = -mu + special.xlogy(n, mu) - special.gammaln(n + 1)
    shape = 0.5 * rep.dof_k + n
    scale = 2.0 * rep.scale_c
    with np.errstate(divide="ignore", invalid="ignore"):
        # xlogy keeps 0 * log(0) == 0 for the exponent that cancels exactly
        lp = (
            special.xlogy(shape[:, None] - 1.0 - power, y[None, :])
            - y[None, :] / scale
            - special.gammaln(shape)[:, None]
            - shape[:, None] * math.log(scale)
        )
    return logw[:, None] + lp


def transition_density(y, rep: NoncentralChiSquareRep, power: float = 0.0):
    """Density of the absolutely continuous part of the law at ``y``.

    Poisson(lambda/2)-weighted mixture of Gamma(k/2 + n, 2c) densities. With
    ``power`` set, returns ``density(y) / y**power`` (used to factor out the
    algebraic singularity at 0).
    """
    y = np.asarray(y, dtype=float)
    flat = np.atleast_1d(y).ravel()
    out = np.zeros(flat.shape)
    pos = flat >= 0
    if power == 0.0:
        pos = flat > 0
    if pos.any():
        out[pos] = np.exp(_log_terms(flat[pos], rep, power)).sum(axis=0)
    out = out.reshape(y.shape)
    return float(out) if out.ndim == 0 else out


def upper_quantile_bound(rep: NoncentralChiSquareRep, eps: float = 1e-13) -> float:
    """``y`` with ``P(X > y) <= eps`` from the Chernoff bound on the MGF."""
    k, lam = rep.dof_k, rep.noncentrality_lambda
    if k + lam == 0:
        return 0.0

    def log_bound(z):
        # min over s of log E[e^{sY}] - s z, Y the unscaled chi-square, at z >= k + lam
        if lam > 0:
            u = (-k + math.sqrt(k * k + 4.0 * lam * z)) / (2.0 * lam)
        else:
            u = z / k
        s = 0.5 * (1.0 - 1.0 / u)
        return lam * s * u + 0.5 * k * math.log(u) - s * z

    target = math.log(eps)
    lo = k + lam
    hi = 2.0 * lo + 10.0
    while log_bound(hi) > target:
        hi *= 2.0
    z = optimize.brentq(lambda z: log_bound(z) - target, lo, hi, xtol=1e-10 * hi)
    return rep.scale_c * z


def expectation_via_density(f: TestFunction, rep: NoncentralChiSquareRep,
                            cfg: QuadratureConfig | None = None, derivative: bool = False) -> float:
    """``zero_mass * f(0) + int_0^Y f(y) density(y) dy`` with ``Y`` the 1 - 1e-13 quantile bound.

    When ``0 < k < 2`` the density behaves like ``y^(k/2 - 1)`` at 0; that factor
    is handed to QUADPACK's algebraic-weight rule instead of being integrated
    directly.
    """
    cfg = cfg or QuadratureConfig()
    fn = f.derivative if derivative else f.evaluate
    atom = rep.zero_mass * float(fn(0.0)) if rep.zero_mass else 0.0
    upper = upper_quantile_bound(rep)
    if upper == 0.0:
        return atom
    k = rep.dof_k
    singular = 0.0 < k < 2.0
    power = 0.5 * k - 1.0 if singular else 0.0

    def integrand(y):
        return float(fn(y)) * transition_density(y, rep, power)

    kw = dict(epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=min(cfg.max_intervals, 5000), full_output=1)
    if singular:
        out = integrate.quad(integrand, 0.0, upper, weight="alg", wvar=(power, 0.0), **kw)
    else:
        out = integrate.quad(integrand, 0.0, upper, **kw)
    value, err = out[0], out[1]
    if len(out) > 3 and err > max(cfg.abs_tol, cfg.rel_tol * abs(value)):
        raise QuadratureError(f"density quadrature failed: {out[3]} (error {err:.3e})")
    return atom + value
