"""Test functions with closed-form Fourier transforms and the inversion
expectation engine

    E[f(X_t)] = (1 / 2 pi) int f^(theta) phi_t^x(theta) d theta,

with the transform convention ``f^(theta) = int f(y) exp(-i theta y) dy``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .core import AffineParams, char_fn
from .errors import DomainError, NonRealError, UnsupportedError
from .quadrature import gauss_kronrod

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_intervals: int = 2**14
    truncation_theta: float | None = None  # None: choose automatically

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be > 0")
        if self.max_intervals < 16:
            raise DomainError("max_intervals must be >= 16")
        if self.truncation_theta is not None and not self.truncation_theta > 0:
            raise DomainError("truncation_theta must be > 0")


def _gaussian_moment_tail(scale: float, s: float, theta: float, moment: int) -> float:
    """``int_{|u| > theta} |u|^moment * scale * exp(-s^2 u^2 / 2) du``."""
    a = 0.5 * s * s
    half = (moment + 1) / 2.0
    upper = special.gammaincc(half, a * theta * theta) * special.gamma(half)
    return 2.0 * scale * 0.5 * a ** (-half) * upper


class TestFunction:
    """A payoff ``f`` together with its Fourier transform.

    Subclasses implement ``evaluate``, ``transform`` and ``tail_mass``; those
    that are differentiable also implement ``derivative``.
    """

    __test__ = False  # keep pytest from collecting this class
    derivative_available = False
    fourier_certified = True

    def evaluate(self, y):
        raise NotImplementedError

    def __call__(self, y):
        return self.evaluate(y)

    def transform(self, theta):
        raise NotImplementedError

    def derivative(self, y):
        raise UnsupportedError(f"{self.spec()} has no derivative")

    def tail_mass(self, theta: float, moment: int = 0) -> float:
        """Upper bound on ``int_{|u| > theta} |u|^moment |f^(u)| du``."""
        raise NotImplementedError

    def min_truncation(self) -> float:
        return 1.0

    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(TestFunction):
    """``exp(-(y - m)^2 / (2 s^2))``."""

    m: float = 0.0
    s: float = 1.0
    derivative_available = True

    def __post_init__(self):
        if not self.s > 0:
            raise DomainError("Gaussian width s must be > 0")

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        return np.exp(-0.5 * ((y - self.m) / self.s) ** 2)

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        return -(y - self.m) / self.s**2 * self.evaluate(y)

    def transform(self, theta):
        return gaussian_transform(self.m, self.s, theta)

    def tail_mass(self, theta, moment=0):
        return _gaussian_moment_tail(self.s * SQRT_2PI, self.s, theta, moment)

    def min_truncation(self):
        return 8.0 / self.s

    def spec(self):
        return f"gaussian:{self.m!r},{self.s!r}"


def gaussian_transform(m: float, s: float, theta):
    """Fourier transform of ``exp(-(y - m)^2 / (2 s^2))``."""
    if not s > 0:
        raise DomainError("s must be > 0")
    theta = np.asarray(theta, dtype=float)
    out = s * SQRT_2PI * np.exp(-0.5 * (s * theta) ** 2) * np.exp(-1j * theta * m)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HermiteGaussian(TestFunction):
    """``H_order((y - m) / s) * exp(-(y - m)^2 / (2 s^2))`` for order 0 or 1."""

    order: int = 1
    m: float = 0.0
    s: float = 1.0
    derivative_available = True

    def __post_init__(self):
        if self.order not in (0, 1):
            raise DomainError("HermiteGaussian order must be 0 or 1")
        if not self.s > 0:
            raise DomainError("HermiteGaussian width s must be > 0")

    def _base(self):
        return Gaussian(self.m, self.s)

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        base = self._base().evaluate(y)
        return base if self.order == 0 else (y - self.m) / self.s * base

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        if self.order == 0:
            return self._base().derivative(y)
        u = (y - self.m) / self.s
        return (1.0 - u * u) / self.s * np.exp(-0.5 * u * u)

    def transform(self, theta):
        g = self._base().transform(theta)
        if self.order == 0:
            return g
        # (y - m)/s * base = -s * d/dy base  ->  -s * (i theta) * base^
        return -1j * self.s * np.asarray(theta, dtype=float) * g

    def tail_mass(self, theta, moment=0):
        if self.order == 0:
            return self._base().tail_mass(theta, moment)
        return _gaussian_moment_tail(self.s**2 * SQRT_2PI, self.s, theta, moment + 1)

    def min_truncation(self):
        return 8.0 / self.s

    def spec(self):
        return f"hermite{self.order}:{self.m!r},{self.s!r}"


@dataclass(frozen=True)
class DampedCosine(TestFunction):
    """``exp(-a |y|) cos(w y)``; its transform is a pair of Lorentzians."""

    a: float = 1.0
    w: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("DampedCosine decay a must be > 0")

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        return np.exp(-self.a * np.abs(y)) * np.cos(self.w * y)

    def transform(self, theta):
        theta = np.asarray(theta, dtype=float)
        a, w = self.a, self.w
        out = a / (a * a + (theta - w) ** 2) + a / (a * a + (theta + w) ** 2)
        out = out.astype(complex)
        return complex(out) if out.ndim == 0 else out

    def tail_mass(self, theta, moment=0):
        if moment > 0:
            return math.inf
        a, w = self.a, abs(self.w)
        # each Lorentzian a/(a^2+(u-c)^2) has tail pi/2 - arctan((theta-c)/a) on each side
        one_side = sum(0.5 * math.pi - math.atan((theta - c) / a) for c in (w, -w))
        return 2.0 * one_side

    def min_truncation(self):
        return 8.0 * (self.a + abs(self.w))

    def spec(self):
        return f"dampedcos:{self.a!r},{self.w!r}"


@dataclass(frozen=True)
class MollifiedWindow(TestFunction):
    """Indicator of ``[lo, hi]`` smoothed by a Gaussian kernel of width ``width``.

    ``f(y) = Phi((y - lo)/width) - Phi((y - hi)/width)``. Stands in for digital
    payoffs, whose transforms are not integrable.
    """

    lo: float = 0.0
    hi: float = 1.0
    width: float = 0.05
    derivative_available = True

    def __post_init__(self):
        if not self.hi > self.lo:
            raise DomainError("MollifiedWindow needs hi > lo")
        if not self.width > 0:
            raise DomainError("MollifiedWindow width must be > 0")

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        return special.ndtr((y - self.lo) / self.width) - special.ndtr((y - self.hi) / self.width)

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        u1 = (y - self.lo) / self.width
        u2 = (y - self.hi) / self.width
        return (np.exp(-0.5 * u1 * u1) - np.exp(-0.5 * u2 * u2)) / (self.width * SQRT_2PI)

    def transform(self, theta):
        theta = np.asarray(theta, dtype=float)
        span = self.hi - self.lo
        centre = 0.5 * (self.hi + self.lo)
        box = span * np.sinc(theta * span / (2.0 * math.pi)) * np.exp(-1j * theta * centre)
        out = box * np.exp(-0.5 * (self.width * theta) ** 2)
        return complex(out) if out.ndim == 0 else out

    def tail_mass(self, theta, moment=0):
        return _gaussian_moment_tail(self.hi - self.lo, self.width, theta, moment)

    def min_truncation(self):
        return 8.0 / self.width

    def spec(self):
        return f"window:{self.lo!r},{self.hi!r},{self.width!r}"


@dataclass(frozen=True)
class Constant(TestFunction):
    """``f = c``. Not integrable, so only simulation backends accept it."""

    c: float = 1.0
    fourier_certified = False
    derivative_available = True

    def evaluate(self, y):
        return np.full(np.shape(y), self.c, dtype=float)

    def derivative(self, y):
        return np.zeros(np.shape(y), dtype=float)

    def transform(self, theta):
        raise UnsupportedError("a constant has no integrable Fourier transform")

    def tail_mass(self, theta, moment=0):
        raise UnsupportedError("a constant has no integrable Fourier transform")

    def spec(self):
        return f"const:{self.c!r}"


def _phi1(z):
    # (e^z - 1)/z and ((z - 1)e^z + 1)/z^2, with series near 0
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    e = np.exp(zs)
    p1 = np.where(small, 1 + z / 2 + z * z / 6 + z**3 / 24, (e - 1) / zs)
    p2 = np.where(small, 0.5 + z / 3 + z * z / 8 + z**3 / 30, ((zs - 1) * e + 1) / (zs * zs))
    return p1, p2


class UserTable(TestFunction):
    """Piecewise-linear interpolant of tabulated ``(y, f(y))``, zero outside the table.

    The transform is the exact transform of the interpolant. Integrability of
    the transform is not certified, so inversion results are exploratory.
    """

    def __init__(self, y: Sequence[float], fy: Sequence[float], source: str = "<table>"):
        y = np.asarray(y, dtype=float)
        fy = np.asarray(fy, dtype=float)
        if y.ndim != 1 or y.shape != fy.shape or y.size < 2:
            raise DomainError("table needs at least two (y, f) rows")
        if not np.all(np.diff(y) > 0):
            raise DomainError("table y values must be strictly increasing")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(fy))):
            raise DomainError("table values must be finite")
        self.y, self.fy, self.source = y, fy, source
        self._dy = np.diff(y)
        self._slope = np.diff(fy) / self._dy
        warnings.warn(
            "table test functions have no certified integrable transform; "
            "inversion results are not error-controlled",
            stacklevel=2,
        )

    fourier_certified = False

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        return np.interp(y, self.y, self.fy, left=0.0, right=0.0)

    def transform(self, theta):
        theta = np.asarray(theta, dtype=float)
        flat = theta.ravel()
        out = np.empty(flat.shape, dtype=complex)
        step = max(1, 2_000_000 // self._dy.size)
        for i in range(0, flat.size, step):
            th = flat[i:i + step, None]
            z = -1j * th * self._dy[None, :]
            p1, p2 = _phi1(z)
            seg = self._dy * (self.fy[:-1] * p1 + self._slope * self._dy * p2)
            out[i:i + step] = np.sum(seg * np.exp(-1j * th * self.y[None, :-1]), axis=1)
        out = out.reshape(theta.shape)
        return complex(out) if out.ndim == 0 else out

    def tail_mass(self, theta, moment=0):
        # |f^(u)| <= 2 * (sum of slope jumps) / u^2 once the end values vanish
        slopes = np.concatenate([[0.0], self._slope, [0.0]])
        kinks = np.abs(np.diff(slopes)).sum()
        jumps = abs(self.fy[0]) + abs(self.fy[-1])
        if moment > 0 or jumps > 0:
            return math.inf
        return 4.0 * kinks / theta

    def min_truncation(self):
        return 40.0 * math.pi / self._dy.min()

    def spec(self):
        return f"table:{self.source}"


def load_table(path: str | Path) -> UserTable:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise DomainError(f"malformed table row {row!r} in {path}")
                continue  # header
    if not rows:
        raise DomainError(f"table {path} has no data rows")
    y, fy = zip(*rows)
    return UserTable(y, fy, source=str(path))


def parse_test_function(text: str) -> TestFunction:
    """Parse ``gaussian:m,s``, ``hermite1:m,s``, ``dampedcos:a,w``,
    ``window:lo,hi,width``, ``const:c`` or ``table:<path.csv>``."""
    kind, _, args = text.partition(":")
    kind = kind.strip().lower()
    if kind == "table":
        return load_table(args)
    try:
        vals = [float(v) for v in args.split(",")] if args.strip() else []
    except ValueError:
        raise DomainError(f"bad test function arguments in {text!r}") from None
    arity = {"gaussian": 2, "hermite0": 2, "hermite1": 2, "dampedcos": 2, "window": 3, "const": 1}
    if kind not in arity:
        raise DomainError(f"unknown test function kind {kind!r}")
    if len(vals) != arity[kind]:
        raise DomainError(f"{kind} takes {arity[kind]} arguments, got {len(vals)}")
    if kind == "gaussian":
        return Gaussian(*vals)
    if kind in ("hermite0", "hermite1"):
        return HermiteGaussian(int(kind[-1]), *vals)
    if kind == "dampedcos":
        return DampedCosine(*vals)
    if kind == "window":
        return MollifiedWindow(*vals)
    return Constant(*vals)


def auto_truncation(f: TestFunction, p: AffineParams | None, t: float | None, tol: float, moment: int = 0) -> float:
    """Smallest ``Theta`` (not below ``f.min_truncation()``) with
    ``int_{|u|>Theta} |u|^moment |f^(u)| du <= tol``.

    Uses only ``|phi| <= 1``, so ``p`` and ``t`` do not enter the bound.
    """
    if not tol > 0:
        raise DomainError("tol must be > 0")
    if isinstance(f, UserTable):
        return f.min_truncation()
    floor = f.min_truncation()
    if f.tail_mass(floor, moment) <= tol:
        return floor
    hi = floor
    while f.tail_mass(hi, moment) > tol:
        hi *= 2.0
        if hi > 1e15:
            raise UnsupportedError(f"{f.spec()}: transform tail not integrable at moment {moment}")
    return float(optimize.brentq(lambda th: f.tail_mass(th, moment) - tol, hi / 2.0, hi, xtol=1e-12 * hi))


def _inversion_integral(f, t, x, p, cfg, moment):
    if not f.fourier_certified and not isinstance(f, UserTable):
        raise UnsupportedError(f"{f.spec()} has no integrable Fourier transform")
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    cfg = cfg or QuadratureConfig()
    two_pi = 2.0 * math.pi
    # tail beyond the cut contributes at most 10% of the absolute budget
    theta_max = cfg.truncation_theta or auto_truncation(f, p, t, 0.1 * two_pi * cfg.abs_tol, moment)

    def integrand(th):
        both = np.concatenate([th, -th])
        vals = f.transform(both) * char_fn(t, both, x, p)
        if moment:
            vals = vals * (1j * both)
        n = th.size
        return vals[:n] + vals[n:]

    # slowly decaying transforms can push theta_max far beyond the scale
    # where f^ lives; doubling breakpoints from that scale keep it resolved
    scale = f.min_truncation()
    cuts = scale * 2.0 ** np.arange(0, max(0, math.ceil(math.log2(theta_max / scale))))
    res = gauss_kronrod(
        integrand, 0.0, theta_max,
        abs_tol=0.9 * two_pi * cfg.abs_tol,
        rel_tol=cfg.rel_tol,
        max_intervals=cfg.max_intervals,
        breakpoints=cuts,
    )
    value = complex(res.value) / two_pi
    if abs(value.imag) > 10.0 * cfg.abs_tol:
        raise NonRealError(f"imaginary residual {value.imag:.3e} exceeds 10 * abs_tol")
    return value.real


def expectation_via_inversion(f: TestFunction, t: float, x: float, p: AffineParams,
                              cfg: QuadratureConfig | None = None) -> float:
    """``E[f(X_t)]`` by Fourier inversion against the closed-form characteristic function.

    The integrand is evaluated at ``+theta`` and ``-theta`` together and
    integrated over ``[0, Theta]``; for real ``f`` the pair sum is real and its
    imaginary part is checked against ``abs_tol``.
    """
    return _inversion_integral(f, t, x, p, cfg, moment=0)


def expectation_of_derivative_via_inversion(f: TestFunction, t: float, x: float, p: AffineParams,
                                            cfg: QuadratureConfig | None = None) -> float:
    """``E[f'(X_t)]`` from ``(1/2pi) int i theta f^(theta) phi(theta) d theta``."""
    if not f.derivative_available:
        raise UnsupportedError(f"{f.spec()} has no derivative")
    return _inversion_integral(f, t, x, p, cfg, moment=1)
