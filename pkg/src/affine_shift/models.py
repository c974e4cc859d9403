"""Domain adapters: the CIR short-rate model and the Feller-diffusion limit of
Galton-Watson branching populations."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import AffineParams
from .errors import DomainError, ResourceError
from .greeks import GreekResult, dbeta_shift, delta_combined, delta_shift, ibp_shift
from .simulate import child_rng


@dataclass(frozen=True)
class CIRParams:
    """``dr = k (theta - r) dt + sigma sqrt(r) dW``, ``r_0 = r0``."""

    sigma: float
    k: float
    theta: float
    r0: float

    def __post_init__(self):
        for name in ("sigma", "k", "theta", "r0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"CIR {name} must be finite and > 0, got {v!r}")

    @property
    def feller_satisfied(self) -> bool:
        return 2.0 * self.k * self.theta >= self.sigma**2


def cir_to_affine(c: CIRParams) -> AffineParams:
    return AffineParams(c.sigma**2, -c.k, c.k * c.theta)


def affine_to_cir(p: AffineParams, r0: float) -> CIRParams:
    if not (p.beta < 0 and p.b > 0):
        raise DomainError("only beta < 0 and b > 0 correspond to a CIR model")
    k = -p.beta
    return CIRParams(math.sqrt(p.alpha), k, p.b / k, r0)


def cir_delta(f, t: float, c: CIRParams, be) -> GreekResult:
    return delta_shift(f, t, c.r0, cir_to_affine(c), be)


def cir_ibp(f, t: float, c: CIRParams, be) -> GreekResult:
    """IBP estimator; the shifted model has long-run mean ``theta - sigma^2/(2k)``."""
    return ibp_shift(f, t, c.r0, cir_to_affine(c), be)


def cir_combined(f, t: float, c: CIRParams, be) -> GreekResult:
    return delta_combined(f, t, c.r0, cir_to_affine(c), be)


def cir_mean(t: float, c: CIRParams) -> float:
    return c.theta + (c.r0 - c.theta) * math.exp(-c.k * t)


@dataclass(frozen=True)
class PopulationParams:
    """Limit population ``dZ = gamma Z dt + sigma sqrt(Z) dB``, ``Z_0 = x0``."""

    gamma: float
    sigma2: float
    x0: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.sigma2)):
            raise DomainError("gamma and sigma2 must be finite")
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be > 0")
        if not self.x0 > 0:
            raise DomainError("x0 must be > 0")

    def affine(self) -> AffineParams:
        return AffineParams(self.sigma2, self.gamma, 0.0)


def population_gamma_sensitivity(f, t: float, pp: PopulationParams, be) -> GreekResult:
    """``d/dgamma E[f(Z_t)]`` through the three-law beta-shift representation
    with ``b = 0``; the shifted laws have ``b = sigma^2/2`` and ``sigma^2``."""
    return dbeta_shift(f, t, pp.x0, pp.affine(), be)


_OFFSPRING_KINDS = ("geom", "poisson", "binary", "fixed")


@dataclass(frozen=True)
class OffspringDist:
    """Offspring law on the nonnegative integers.

    ``geom:p``     P(j) = p (1 - p)^j          mean (1-p)/p, variance (1-p)/p^2
    ``poisson:m``  Poisson(m)                  mean m, variance m
    ``binary:p2``  two children w.p. p2, else none
    ``fixed:n``    exactly n children
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in _OFFSPRING_KINDS:
            raise DomainError(f"unknown offspring kind {self.kind!r}")
        v = self.param
        ok = {
            "geom": 0 < v <= 1,
            "poisson": v >= 0,
            "binary": 0 <= v <= 1,
            "fixed": v >= 0 and float(v).is_integer(),
        }[self.kind]
        if not (math.isfinite(v) and ok):
            raise DomainError(f"invalid parameter {v!r} for {self.kind} offspring")

    @classmethod
    def parse(cls, text: str) -> OffspringDist:
        kind, _, arg = text.partition(":")
        try:
            return cls(kind.strip().lower(), float(arg))
        except ValueError:
            raise DomainError(f"bad offspring specification {text!r}") from None

    @classmethod
    def calibrated(cls, kind: str, gamma: float, n: int) -> OffspringDist:
        """Law with mean ``1 + gamma/n``."""
        mu = 1.0 + gamma / n
        if mu < 0:
            raise DomainError("1 + gamma/N must be >= 0")
        if kind == "geom":
            return cls("geom", 1.0 / (1.0 + mu))
        if kind == "poisson":
            return cls("poisson", mu)
        if kind == "binary":
            return cls("binary", 0.5 * mu)
        raise DomainError(f"cannot calibrate {kind!r} offspring")

    @property
    def mean(self) -> float:
        v = self.param
        return {"geom": (1 - v) / v, "poisson": v, "binary": 2 * v, "fixed": v}[self.kind]

    @property
    def variance(self) -> float:
        v = self.param
        return {"geom": (1 - v) / v**2, "poisson": v, "binary": 4 * v * (1 - v), "fixed": 0.0}[self.kind]

    def implied_limit(self, n: int) -> tuple[float, float]:
        """``(gamma_N, sigma2_N) = (N (E xi - 1), Var xi)``."""
        return n * (self.mean - 1.0), self.variance

    def spec(self) -> str:
        return f"{self.kind}:{self.param!r}"

    def draw_total(self, rng: np.random.Generator, parents: np.ndarray) -> np.ndarray:
        """Total offspring of ``parents`` individuals, drawn from the exact law of the sum."""
        parents = np.asarray(parents, dtype=np.int64)
        live = parents > 0
        out = np.zeros(parents.shape, dtype=np.int64)
        if not live.any():
            return out
        n = parents[live]
        if self.kind == "geom":
            out[live] = rng.negative_binomial(n, self.param) if self.param < 1 else 0
        elif self.kind == "poisson":
            out[live] = rng.poisson(n * self.param)
        elif self.kind == "binary":
            out[live] = 2 * rng.binomial(n, self.param)
        else:
            out[live] = n * int(self.param)
        return out

    def draw_each(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` individual offspring numbers."""
        if self.kind == "geom":
            return rng.geometric(self.param, size=count) - 1
        if self.kind == "poisson":
            return rng.poisson(self.param, size=count)
        if self.kind == "binary":
            return 2 * (rng.random(count) < self.param)
        return np.full(count, int(self.param))


DEFAULT_DRAW_CAP = 10**9
_EXACT_SUM_LIMIT = 10**5


def _generations(n: int, t: float) -> int:
    return int(math.floor(n * t))


def _initial(n: int, x0: float) -> int:
    return int(math.floor(n * x0))


def galton_watson_simulate(N: int, x0: float, od: OffspringDist, t: float, rng: np.random.Generator,
                           cap: int = DEFAULT_DRAW_CAP, per_individual: bool = False) -> float:
    """One replica of ``X^{N}_{[N t]} / N`` started from ``[N x0]`` individuals.

    Generations are advanced with the exact law of the offspring total
    (negative binomial, Poisson or scaled binomial). ``per_individual`` draws
    and sums each offspring count instead while the population is at most
    1e5. Extinction simply returns 0.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if not (x0 > 0 and t > 0):
        raise DomainError("x0 and t must be > 0")
    pop = _initial(N, x0)
    drawn = 0
    for _ in range(_generations(N, t)):
        if pop == 0:
            break
        drawn += pop
        if drawn > cap:
            raise ResourceError(f"offspring draws exceeded cap {cap}")
        if per_individual and pop <= _EXACT_SUM_LIMIT:
            pop = int(od.draw_each(rng, pop).sum())
        else:
            pop = int(od.draw_total(rng, np.array([pop]))[0])
    return pop / N


@dataclass(frozen=True)
class GWEnsemble:
    """Terminal values of many replicas plus one-step regression sums.

    The regression sums pool every (X_n, X_{n+1}) pair across generations and
    replicas for the slope of ``E[X_{n+1} | X_n] = X_n (1 + gamma_N / N)``.
    """

    terminal: np.ndarray  # Z-bar at time t, one entry per replica
    sum_x: int
    sum_y: int
    sum_xx: int
    sum_xy: int
    sum_yy: int

    @property
    def slope(self) -> float:
        return self.sum_y / self.sum_x

    @property
    def slope_stderr(self) -> float:
        # heteroscedasticity-robust error of the ratio estimator sum(Y)/sum(X)
        s = self.slope
        resid = self.sum_yy - 2.0 * s * self.sum_xy + s * s * self.sum_xx
        return math.sqrt(max(resid, 0.0)) / self.sum_x


def galton_watson_ensemble(N: int, x0: float, od: OffspringDist, t: float, replicas: int, seed: int,
                           chunk: int = 1024, workers: int = 1, cap: int = DEFAULT_DRAW_CAP) -> GWEnsemble:
    """Vectorised replicas; chunk ``i`` of replicas uses ``child_rng(seed, i)``."""
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    if N < 1 or not (x0 > 0 and t > 0):
        raise DomainError("need N >= 1, x0 > 0, t > 0")
    sizes = [chunk] * (replicas // chunk) + ([replicas % chunk] if replicas % chunk else [])
    steps = _generations(N, t)
    start = _initial(N, x0)

    def job(i):
        rng = child_rng(seed, i)
        pop = np.full(sizes[i], start, dtype=np.int64)
        drawn = np.zeros(sizes[i], dtype=np.int64)
        sx = sy = sxx = sxy = syy = 0
        for _ in range(steps):
            drawn += pop
            if drawn.max() > cap:
                raise ResourceError(f"offspring draws exceeded cap {cap}")
            nxt = od.draw_total(rng, pop)
            sx += int(pop.sum())
            sy += int(nxt.sum())
            sxx += int((pop * pop).sum())
            sxy += int((pop * nxt).sum())
            syy += int((nxt * nxt).sum())
            pop = nxt
        return pop, (sx, sy, sxx, sxy, syy)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    terminal = np.concatenate([p[0] for p in parts]) / N
    sums = [sum(p[1][j] for p in parts) for j in range(5)]
    return GWEnsemble(terminal, *sums)
