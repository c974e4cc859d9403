"""Parameter-shift sensitivity estimators.

Each estimator turns a derivative into a weighted sum of plain expectations
under laws whose drift intercept is shifted to ``b + i alpha / 2``:

* ``delta_shift``     d/dx E f(X)      = C (E f(X^{+1}) - E f(X))
* ``ibp_shift``       E f'(X)          = C' (E f(X) - E f(X^{-1}))
* ``delta_combined``  d/dx E f(X)      = e^{beta t} E f'(X^{+1})
* ``dbeta_shift``     d/dbeta E f(X)   = A E f(X^{+2}) + B E f(X^{+1}) + C0 E f(X)

with ``C = 2 e^{beta t} / (alpha m)``, ``C' = 2 / (alpha m)``,
``m = (e^{beta t} - 1) / beta``. The expectations come from any backend:
Fourier inversion, density quadrature or Monte Carlo.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import AffineParams, MultiParams, growth, growth_dbeta
from .density import expectation_via_density, transition_rep
from .errors import CoefficientIdentityError, DomainError, FellerViolation, UnsupportedError
from .simulate import MCConfig, mc_expectation, run_chunks, sample_exact, sample_exact_coupled
from .transforms import (
    QuadratureConfig,
    TestFunction,
    expectation_of_derivative_via_inversion,
    expectation_via_inversion,
)

SUM_ZERO_TOL = 1e-12


class Method(enum.Enum):
    INVERSION = "Inversion"
    DENSITY = "Density"
    MC = "MC"


@dataclass(frozen=True)
class TensorFunction:
    """``F(y) = prod_i f_i(y_i)`` built from one-dimensional test functions."""

    factors: tuple[TestFunction, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def d(self) -> int:
        return len(self.factors)

    def evaluate(self, y, derivative_in: int | None = None):
        y = np.asarray(y, dtype=float)
        out = 1.0
        for i, f in enumerate(self.factors):
            fn = f.derivative if i == derivative_in else f.evaluate
            out = out * fn(y[..., i])
        return out

    def spec(self) -> str:
        return " x ".join(f.spec() for f in self.factors)


# --- backends ----------------------------------------------------------------

class _QuadratureBackend:
    """Shared combination logic for the deterministic backends."""

    def expectation(self, f, t, x, p) -> float:
        raise NotImplementedError

    def derivative_expectation(self, f, t, x, p) -> float:
        raise NotImplementedError

    def _single(self, f, t, x, p, derivative):
        if derivative:
            if not f.derivative_available:
                raise UnsupportedError(f"{f.spec()} has no derivative")
            return self.derivative_expectation(f, t, x, p)
        return self.expectation(f, t, x, p)

    def combination(self, f, t, x, p: AffineParams, shifts, weights, derivative=False):
        terms = [w * self._single(f, t, x, p.shift(i), derivative) for i, w in zip(shifts, weights)]
        return math.fsum(terms), None

    def multi_expectation(self, F: TensorFunction, t, x, mp: MultiParams, derivative_in=None):
        # coordinates are independent, so the d-variate expectation factorises
        out = 1.0
        for i, (f, xi, pi) in enumerate(zip(F.factors, x, mp.components)):
            out *= self._single(f, t, xi, pi, i == derivative_in)
        return out

    def multi_combination(self, F, t, x, mp: MultiParams, k, shifts, weights, derivative_in=None):
        terms = [w * self.multi_expectation(F, t, x, mp.shift(k, i), derivative_in)
                 for i, w in zip(shifts, weights)]
        return math.fsum(terms), None


@dataclass(frozen=True)
class Inversion(_QuadratureBackend):
    cfg: QuadratureConfig = field(default_factory=QuadratureConfig)
    method = Method.INVERSION

    def expectation(self, f, t, x, p):
        return expectation_via_inversion(f, t, x, p, self.cfg)

    def derivative_expectation(self, f, t, x, p):
        return expectation_of_derivative_via_inversion(f, t, x, p, self.cfg)


@dataclass(frozen=True)
class Density(_QuadratureBackend):
    cfg: QuadratureConfig = field(default_factory=QuadratureConfig)
    method = Method.DENSITY

    def expectation(self, f, t, x, p):
        return expectation_via_density(f, transition_rep(t, x, p), self.cfg)

    def derivative_expectation(self, f, t, x, p):
        return expectation_via_density(f, transition_rep(t, x, p), self.cfg, derivative=True)


@dataclass(frozen=True)
class MonteCarlo:
    """Exact-sampling backend. Shifted laws in one combination share random
    numbers through :func:`sample_exact_coupled`, and the standard error is
    that of the per-sample weighted sum."""

    cfg: MCConfig = field(default_factory=MCConfig)
    method = Method.MC

    def expectation(self, f, t, x, p):
        return mc_expectation(f, t, x, p, self.cfg).value

    def derivative_expectation(self, f, t, x, p):
        return mc_expectation(f, t, x, p, self.cfg, derivative=True).value

    def combination(self, f, t, x, p, shifts, weights, derivative=False):
        if t <= 0:
            raise DomainError("t must be > 0")
        fn = f.derivative if derivative else f.evaluate

        def draw(rng, size):
            xs = sample_exact_coupled(t, x, p, shifts, rng, size)
            return sum(w * fn(xs[i]) for i, w in zip(shifts, weights))

        est = run_chunks(self.cfg.n_samples, self.cfg, draw)
        return est.value, est.std_error

    def multi_expectation(self, F, t, x, mp, derivative_in=None):
        return self.multi_combination(F, t, x, mp, 0, (0,), (1.0,), derivative_in)[0]

    def multi_combination(self, F, t, x, mp, k, shifts, weights, derivative_in=None):
        def draw(rng, size):
            cols = {}
            for i, (xi, pi) in enumerate(zip(x, mp.components)):
                if i == k:
                    cols[i] = sample_exact_coupled(t, xi, pi, shifts, rng, size)
                else:
                    cols[i] = sample_exact(t, xi, pi, rng, size)
            total = 0.0
            for s, w in zip(shifts, weights):
                y = np.column_stack([cols[i][s] if i == k else cols[i] for i in range(mp.d)])
                total = total + w * F.evaluate(y, derivative_in)
            return total

        est = run_chunks(self.cfg.n_samples, self.cfg, draw)
        return est.value, est.std_error


# --- results -------------------------------------------------------------------

@dataclass(frozen=True)
class GreekResult:
    value: float
    std_error: float | None
    method: Method
    base_params: AffineParams | MultiParams
    shifted_params: tuple
    weights: tuple[float, ...]
    kind: str = ""

    def __post_init__(self):
        if len(self.shifted_params) != len(self.weights):
            raise ValueError("shifted_params and weights must have equal length")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method.value,
            "base_params": self.base_params.as_dict(),
            "shifted_params": [q.as_dict() for q in self.shifted_params],
            "weights": list(self.weights),
        }


# --- coefficients --------------------------------------------------------------

def delta_factor(p: AffineParams, t: float) -> float:
    """``2 beta e^{beta t} / (alpha (e^{beta t} - 1))``; ``2 / (alpha t)`` at ``beta = 0``."""
    return 2.0 * math.exp(p.beta * t) / (p.alpha * growth(p.beta, t))


def ibp_factor(p: AffineParams, t: float) -> float:
    """``2 beta / (alpha (e^{beta t} - 1))``; ``2 / (alpha t)`` at ``beta = 0``."""
    return 2.0 / (p.alpha * growth(p.beta, t))


def dbeta_coefficients(p: AffineParams, t: float, x: float) -> tuple[float, float, float]:
    """Weights ``(A, B, C0)`` on the expectations under ``b + alpha``, ``b + alpha/2`` and ``b``.

    From ``d/dbeta log phi = (2/(alpha m))(b m' + x t E)(psi - 1)
    + (2 x E m' / (alpha m^2))(psi - 1)^2`` with ``psi`` the factor that
    shifts ``b`` by ``alpha/2``, ``E = e^{beta t}`` and ``m' = dm/dbeta``.
    At ``beta = 0``: ``A = x/alpha``, ``B = b t/alpha``, ``C0 = -(b t + x)/alpha``.
    """
    m = growth(p.beta, t)
    dm = growth_dbeta(p.beta, t)
    e = math.exp(p.beta * t)
    quad = 2.0 * x * e * dm / (p.alpha * m * m)
    lin = 2.0 * (p.b * dm + x * t * e) / (p.alpha * m)
    return quad, lin - 2.0 * quad, quad - lin


def _check_tx(t, x):
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    if not x > 0:
        raise DomainError(f"x must be > 0, got {x!r}")


def _check_feller(p: AffineParams):
    if p.b < 0.5 * p.alpha:
        raise FellerViolation(
            f"b - alpha/2 = {p.b - 0.5 * p.alpha:.6g} < 0: shifted parameters leave the domain"
        )


# --- one-dimensional estimators -----------------------------------------------

def delta_shift(f: TestFunction, t: float, x: float, p: AffineParams, be) -> GreekResult:
    """``d/dx E[f(X_t)]`` as ``C (E f(X^{+1}_t) - E f(X_t))``."""
    _check_tx(t, x)
    c = delta_factor(p, t)
    value, se = be.combination(f, t, x, p, (1, 0), (c, -c))
    return GreekResult(value, se, be.method, p, (p.shift(1), p), (c, -c), "delta")


def ibp_shift(f: TestFunction, t: float, x: float, p: AffineParams, be) -> GreekResult:
    """``E[f'(X_t)]`` as ``C' (E f(X_t) - E f(X^{-1}_t))``; needs ``b >= alpha/2``."""
    _check_tx(t, x)
    _check_feller(p)
    c = ibp_factor(p, t)
    value, se = be.combination(f, t, x, p, (0, -1), (c, -c))
    return GreekResult(value, se, be.method, p, (p, p.shift(-1)), (c, -c), "ibp")


def delta_combined(f: TestFunction, t: float, x: float, p: AffineParams, be) -> GreekResult:
    _check_tx(t, x)
    if not f.derivative_available:
        raise UnsupportedError(f"{f.spec()} has no derivative")
    w = math.exp(p.beta * t)
    value, se = be.combination(f, t, x, p, (1,), (w,), derivative=True)
    return GreekResult(value, se, be.method, p, (p.shift(1),), (w,), "combined")


def dbeta_shift(f: TestFunction, t: float, x: float, p: AffineParams, be) -> GreekResult:
    _check_tx(t, x)
    a, b, c = dbeta_coefficients(p, t, x)
    residual = math.fsum((a, b, c))
    # B and C0 are formed by subtraction, so rounding scales with the largest weight
    if abs(residual) > SUM_ZERO_TOL * max(1.0, abs(a), abs(b), abs(c)):
        raise CoefficientIdentityError(f"dbeta weights sum to {residual:.3e}, expected 0")
    value, se = be.combination(f, t, x, p, (2, 1, 0), (a, b, c))
    return GreekResult(value, se, be.method, p, (p.shift(2), p.shift(1), p), (a, b, c), "dbeta")


class FDTarget(enum.Enum):
    IN_X = "x"
    IN_BETA = "beta"


def richardson_central(func, v: float, h: float) -> float:
    """Central difference at steps ``h`` and ``h/2`` combined to fourth order."""
    d1 = (func(v + h) - func(v - h)) / (2.0 * h)
    h2 = 0.5 * h
    d2 = (func(v + h2) - func(v - h2)) / (2.0 * h2)
    return (4.0 * d2 - d1) / 3.0


def fd_oracle(target: FDTarget, f, t: float, x: float, p: AffineParams, be, h: float = 1e-4) -> float:
    """Richardson-extrapolated central difference of ``be.expectation`` in ``x`` or ``beta``."""
    if not h > 0:
        raise DomainError("h must be > 0")
    target = FDTarget(target)
    if target is FDTarget.IN_X:
        if not x - h > 0:
            raise DomainError("x - h must stay positive")
        return richardson_central(lambda v: be.expectation(f, t, v, p), x, h)
    return richardson_central(lambda v: be.expectation(f, t, x, p.with_beta(v)), p.beta, h)


# --- diagonal multi-dimensional estimators ------------------------------------

def _check_multi(k, t, x, mp: MultiParams, F: TensorFunction):
    if not 0 <= k < mp.d:
        raise DomainError(f"coordinate {k} outside 0..{mp.d - 1}")
    if F.d != mp.d or len(x) != mp.d:
        raise DomainError("test function, start point and parameters disagree on dimension")
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    if not all(xi > 0 for xi in x):
        raise DomainError("all start coordinates must be > 0")


def multi_delta(k: int, F: TensorFunction, t: float, x: Sequence[float], mp: MultiParams, be) -> GreekResult:
    """``d/dx_k E[F(X_t)]`` shifting ``b_k`` by ``alpha_k/2``, with the one-dimensional delta factor."""
    _check_multi(k, t, x, mp, F)
    c = delta_factor(mp[k], t)
    value, se = be.multi_combination(F, t, x, mp, k, (1, 0), (c, -c))
    return GreekResult(value, se, be.method, mp, (mp.shift(k, 1), mp), (c, -c), f"multi_delta[{k}]")


def multi_ibp(k: int, F: TensorFunction, t: float, x: Sequence[float], mp: MultiParams, be) -> GreekResult:
    """``E[(d F / d y_k)(X_t)]`` shifting ``b_k`` by ``-alpha_k/2``, with the one-dimensional IBP factor."""
    _check_multi(k, t, x, mp, F)
    _check_feller(mp[k])
    c = ibp_factor(mp[k], t)
    value, se = be.multi_combination(F, t, x, mp, k, (0, -1), (c, -c))
    return GreekResult(value, se, be.method, mp, (mp, mp.shift(k, -1)), (c, -c), f"multi_ibp[{k}]")


def multi_combined(k: int, F: TensorFunction, t: float, x: Sequence[float], mp: MultiParams, be) -> GreekResult:
    _check_multi(k, t, x, mp, F)
    if not F.factors[k].derivative_available:
        raise UnsupportedError(f"{F.factors[k].spec()} has no derivative")
    w = math.exp(mp[k].beta * t)
    value, se = be.multi_combination(F, t, x, mp, k, (1,), (w,), derivative_in=k)
    return GreekResult(value, se, be.method, mp, (mp.shift(k, 1),), (w,), f"multi_combined[{k}]")


def multi_fd_oracle(k: int, F: TensorFunction, t: float, x: Sequence[float], mp: MultiParams, be,
                    h: float = 1e-4) -> float:
    """Richardson central difference of the d-variate expectation in ``x_k``."""
    x = list(x)

    def at(v):
        xs = list(x)
        xs[k] = v
        return be.multi_expectation(F, t, xs, mp)

    return richardson_central(at, x[k], h)
