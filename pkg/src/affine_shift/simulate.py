"""Exact transition sampling, full-truncation Euler paths and a deterministic
chunked Monte Carlo engine."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import AffineParams, MultiParams
from .density import transition_rep
from .errors import DomainError
from .transforms import TestFunction


@dataclass(frozen=True)
class MCConfig:
    n_samples: int = 1_000_000
    master_seed: int = 0
    chunk_size: int = 2**16
    workers: int = 1  # scheduling only; results do not depend on it

    def __post_init__(self):
        if self.n_samples < 1 or self.chunk_size < 1 or self.workers < 1:
            raise DomainError("n_samples, chunk_size and workers must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n: int

    def as_dict(self, seed: int | None = None) -> dict:
        out = {"value": self.value, "std_error": self.std_error, "n": self.n}
        if seed is not None:
            out["seed"] = seed
        return out


@dataclass(frozen=True)
class PathGrid:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 1 or times[0] != 0.0:
            raise DomainError("times must be a 1-D grid starting at 0")
        if np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing")
        if values.shape[-1:] != times.shape:
            raise DomainError("values must end in an axis matching times")
        if np.any(values < 0):
            raise DomainError("path values must be >= 0")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


def child_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for chunk ``index``: Philox keyed on (master_seed, index)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


def standard_gamma(rng: np.random.Generator, shape: np.ndarray) -> np.ndarray:
    """Gamma(shape, 1) draws; ``shape == 0`` yields exactly 0.

    Shapes below 1 are boosted: ``G_a = G_{a+1} * U^(1/a)``.
    """
    shape = np.asarray(shape, dtype=float)
    out = np.zeros(shape.shape)
    small = (shape > 0) & (shape < 1)
    big = shape >= 1
    if big.any():
        out[big] = rng.standard_gamma(shape[big])
    if small.any():
        a = shape[small]
        u = rng.random(a.shape)
        out[small] = rng.standard_gamma(a + 1.0) * u ** (1.0 / a)
    return out


def sample_exact(t: float, x: float, p: AffineParams, rng: np.random.Generator, size: int | None = None):
    """Draw ``X_t`` from its exact law: ``N ~ Poisson(lambda/2)``,
    ``G ~ Gamma(k/2 + N, 2)``, ``X = c G``."""
    rep = transition_rep(t, x, p)
    n = rng.poisson(0.5 * rep.noncentrality_lambda, size=size)
    g = standard_gamma(rng, 0.5 * rep.dof_k + np.asarray(n))
    out = rep.scale_c * 2.0 * g
    return float(out) if size is None else out


def sample_exact_coupled(t: float, x: float, p: AffineParams, shifts: Sequence[int],
                         rng: np.random.Generator, size: int) -> dict[int, np.ndarray]:
    """Jointly sample ``X_t`` under drift intercepts ``b + i alpha / 2`` for each ``i`` in ``shifts``.

    Raising ``b`` by ``alpha/2`` raises the Gamma shape by one with ``c`` and
    ``lambda`` unchanged, so the draws are built upward from the lowest shift
    by adding independent ``2c * Exp(1)`` increments. Each marginal is exact;
    the coupling only reduces the variance of differences.
    """
    lo, hi = min(shifts), max(shifts)
    base = p.shift(lo)
    rep = transition_rep(t, x, base)
    n = rng.poisson(0.5 * rep.noncentrality_lambda, size=size)
    g = standard_gamma(rng, 0.5 * rep.dof_k + n)
    scale = 2.0 * rep.scale_c
    draws = {lo: scale * g}
    for i in range(lo + 1, hi + 1):
        g = g + rng.standard_exponential(size)
        draws[i] = scale * g
    return {i: draws[i] for i in shifts}


def sample_path_euler(times: Sequence[float], x: float, p: AffineParams, rng: np.random.Generator,
                      n_paths: int | None = None, increments: np.ndarray | None = None) -> PathGrid:
    """Full-truncation Euler scheme.

    The internal state keeps its sign; drift and diffusion see ``max(X, 0)``.
    Reported values are truncated at zero. ``increments`` (standard normals of
    shape ``(n_paths, steps)``) may be supplied to couple grids.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing and start at 0")
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    dts = np.diff(times)
    shape = () if n_paths is None else (n_paths,)
    if increments is None:
        increments = rng.standard_normal(shape + (dts.size,))
    state = np.full(shape, float(x))
    out = np.empty(shape + (times.size,))
    out[..., 0] = x
    for j, dt in enumerate(dts):
        pos = np.maximum(state, 0.0)
        state = state + (p.beta * pos + p.b) * dt + np.sqrt(p.alpha * pos * dt) * increments[..., j]
        out[..., j + 1] = np.maximum(state, 0.0)
    return PathGrid(times, out)


def _chunk_stats(y: np.ndarray) -> tuple[int, float, float]:
    n = y.size
    mu = math.fsum(y) / n
    return n, mu, math.fsum((y - mu) ** 2)


def run_chunks(n_samples: int, cfg: MCConfig, draw: Callable[[np.random.Generator, int], np.ndarray]) -> MCEstimate:
    """Evaluate ``draw(rng, size)`` chunk by chunk and reduce in fixed chunk order.

    Chunk ``i`` always gets ``child_rng(master_seed, i)`` and the same size, so
    the estimate is bit-identical for any worker count.
    """
    sizes = [cfg.chunk_size] * (n_samples // cfg.chunk_size)
    if n_samples % cfg.chunk_size:
        sizes.append(n_samples % cfg.chunk_size)

    def job(i):
        return _chunk_stats(np.asarray(draw(child_rng(cfg.master_seed, i), sizes[i]), dtype=float))

    if cfg.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            stats = list(pool.map(job, range(len(sizes))))
    else:
        stats = [job(i) for i in range(len(sizes))]

    total = sum(s[0] for s in stats)
    mean = math.fsum(s[0] * s[1] for s in stats) / total
    m2 = math.fsum([s[2] for s in stats] + [s[0] * (s[1] - mean) ** 2 for s in stats])
    var = m2 / (total - 1) if total > 1 else 0.0
    return MCEstimate(mean, math.sqrt(var / total), total)


def mc_expectation(f: TestFunction, t: float, x: float, p: AffineParams, cfg: MCConfig,
                   derivative: bool = False) -> MCEstimate:
    """Monte Carlo ``E[f(X_t)]`` (or ``E[f'(X_t)]``) from exact samples."""
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    fn = f.derivative if derivative else f.evaluate
    return run_chunks(cfg.n_samples, cfg, lambda rng, m: fn(sample_exact(t, x, p, rng, m)))


def sample_multi(t: float, x: Sequence[float], mp: MultiParams, rng: np.random.Generator,
                 size: int | None = None) -> np.ndarray:
    """Independent exact draws per coordinate; shape ``(d,)`` or ``(size, d)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (mp.d,):
        raise DomainError(f"x must have length {mp.d}")
    cols = [sample_exact(t, float(xi), pi, rng, size) for xi, pi in zip(x, mp.components)]
    return np.array(cols) if size is None else np.column_stack(cols)
