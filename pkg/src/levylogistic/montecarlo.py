"""Euler-Maruyama Monte Carlo estimators used as an independent check on the PDE solvers.

Paths are simulated in fixed-size blocks; block b draws from the stream
(seed, b), so results do not depend on how blocks are spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .core import DomainError, ModelParams, make_rng, stable_from_uniforms

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    t_max: float = 1e3
    seed: int = 0
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if not self.dt > 0 or not self.t_max > 0:
            raise DomainError("dt and t_max must be > 0")
        if not self.domain[0] < self.domain[1]:
            raise DomainError(f"invalid domain {self.domain}")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_effective: int
    censored: int

    @property
    def n_paths(self) -> int:
        return self.n_effective + self.censored

    @property
    def censored_warning(self) -> bool:
        return self.censored > 0

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        z = stats.norm.ppf(0.5 + level / 2)
        return self.mean - z * self.std_error, self.mean + z * self.std_error


class AllCensoredError(RuntimeError):
    pass


def simulate_step(x, params: ModelParams, dt: float, dB=0.0, dL=0.0):
    """One Euler-Maruyama step with N(0,1) draw dB and standard stable draw dL."""
    x = np.asarray(x, dtype=float)
    out = x + params.r * x * (1 - x / params.K) * dt
    if params.lam:
        out = out + params.lam * x * math.sqrt(dt) * dB
    if params.sigma:
        out = out + params.sigma * x * dt ** (1 / params.alpha) * dL
    return out if out.ndim else float(out)


@dataclass
class ExitSample:
    """Raw per-path results of a first-exit simulation."""

    time: np.ndarray       # exit time, t_max for censored paths
    position: np.ndarray   # post-step position at exit (overshoot kept)
    exited: np.ndarray     # False for censored paths


def _increments(params, rng, m, dt):
    step = np.zeros(m)
    if params.lam:
        step += params.lam * math.sqrt(dt) * rng.standard_normal(m)
    if params.sigma:
        v = rng.uniform(-np.pi / 2, np.pi / 2, size=m)
        w = rng.standard_exponential(size=m)
        step += params.sigma * dt ** (1 / params.alpha) * stable_from_uniforms(params.alpha, v, w)
    return step


def _exit_block(params, x0, cfg, block, size, drift, intensity):
    rng = make_rng(cfg.seed, block)
    r1, r2 = cfg.domain
    x = np.full(size, float(x0))
    time = np.full(size, cfg.t_max)
    pos = np.full(size, np.nan)
    exited = np.zeros(size, dtype=bool)
    alive = np.arange(size)
    nsteps = int(math.ceil(cfg.t_max / cfg.dt - 1e-9))
    for k in range(1, nsteps + 1):
        xa = x[alive]
        f = drift(xa) if drift is not None else params.r * xa * (1 - xa / params.K)
        amp = intensity(xa) if intensity is not None else xa
        xa = xa + f * cfg.dt + amp * _increments(params, rng, alive.size, cfg.dt)
        x[alive] = xa
        out = (xa <= r1) | (xa >= r2)
        if out.any():
            idx = alive[out]
            time[idx] = k * cfg.dt
            pos[idx] = xa[out]
            exited[idx] = True
            alive = alive[~out]
            if alive.size == 0:
                break
    return time, pos, exited


def _blocks(n_paths):
    nb = -(-n_paths // BLOCK_SIZE)
    return [(b, min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE)) for b in range(nb)]


def simulate_exits(params: ModelParams, x0: float, config: MCConfig, jobs: int = 1,
                   drift: Optional[Callable] = None, intensity: Optional[Callable] = None) -> ExitSample:
    """Simulate until the first step outside (r1, r2) or t_max.

    ``drift`` and ``intensity`` override r x (1 - x/K) and the noise amplitude x
    (which multiplies lam dB and sigma dL).
    """
    r1, r2 = config.domain
    if not r1 < x0 < r2:
        raise DomainError(f"x0 = {x0} is not inside the domain {config.domain}")
    tasks = _blocks(config.n_paths)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            futs = [pool.submit(_exit_block, params, x0, config, b, s, drift, intensity) for b, s in tasks]
            parts = [f.result() for f in futs]
    else:
        parts = [_exit_block(params, x0, config, b, s, drift, intensity) for b, s in tasks]
    return ExitSample(*(np.concatenate(p) for p in zip(*parts)))


def _mean_se(values):
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, math.inf
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def met_from_sample(sample: ExitSample) -> MCEstimate:
    """Mean exit time; censored paths enter with t_max, which biases the mean low."""
    n_exit = int(sample.exited.sum())
    if n_exit == 0:
        raise AllCensoredError("no path left the domain before t_max")
    mean, se = _mean_se(sample.time)
    return MCEstimate(mean, se, n_exit, sample.time.size - n_exit)


def ep_from_sample(sample: ExitSample, r1: float, target: str = "left") -> MCEstimate:
    """Fraction of exited paths landing in (-inf, r1] (or beyond r2 for target='right').

    The standard error uses p~ = (k + 1/2)/(n + 1) so that an all-or-nothing count
    still carries a nonzero error.
    """
    n_exit = int(sample.exited.sum())
    if n_exit == 0:
        raise AllCensoredError("no path left the domain before t_max")
    pos = sample.position[sample.exited]
    hits = int((pos <= r1).sum()) if target == "left" else int((pos > r1).sum())
    p = hits / n_exit
    pt = (hits + 0.5) / (n_exit + 1)
    se = math.sqrt(pt * (1 - pt) / n_exit)
    return MCEstimate(p, se, n_exit, sample.time.size - n_exit)


def estimate_met(params: ModelParams, x0: float, config: MCConfig, jobs: int = 1, **overrides) -> MCEstimate:
    return met_from_sample(simulate_exits(params, x0, config, jobs, **overrides))


def estimate_ep(params: ModelParams, x0: float, config: MCConfig, jobs: int = 1,
                target: str = "left", **overrides) -> MCEstimate:
    return ep_from_sample(simulate_exits(params, x0, config, jobs, **overrides), config.domain[0], target)


@dataclass
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    surviving_fraction: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def mass(self) -> float:
        return float((self.density * np.diff(self.edges)).sum())


def _density_block(params, x0, t, cfg, block, size, bump_width):
    rng = make_rng(cfg.seed, block)
    r1, r2 = cfg.domain
    if bump_width:
        x = x0 + rng.standard_normal(size) / math.sqrt(2 * bump_width)
    else:
        x = np.full(size, float(x0))
    alive = (x > r1) & (x < r2)
    nsteps = int(round(t / cfg.dt))
    for _ in range(nsteps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        xa = x[idx]
        xa = xa + params.r * xa * (1 - xa / params.K) * cfg.dt + xa * _increments(params, rng, idx.size, cfg.dt)
        x[idx] = xa
        alive[idx] = (xa > r1) & (xa < r2)
    return x[alive]


def empirical_density(params: ModelParams, x0: float, t: float, config: MCConfig, bins: int = 50,
                      bump_width: float = 40.0, jobs: int = 1,
                      hist_range: Optional[tuple[float, float]] = None) -> Histogram:
    """Histogram at time t of the paths that have not left (r1, r2).

    Starting points are drawn from the bump sqrt(w/pi) exp(-w (x - x0)^2)
    (w = bump_width; 0 starts every path at x0). The histogram is normalised by
    the total path count, so its mass is the surviving fraction. ``hist_range``
    sets the binned interval when the domain is unbounded.
    """
    if t > config.t_max:
        raise DomainError("t must not exceed t_max")
    tasks = _blocks(config.n_paths)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_density_block, *zip(*[(params, x0, t, config, b, s, bump_width) for b, s in tasks])))
    else:
        parts = [_density_block(params, x0, t, config, b, s, bump_width) for b, s in tasks]
    survivors = np.concatenate(parts)
    lo, hi = hist_range if hist_range is not None else config.domain
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("histogram range must be finite; pass hist_range for unbounded domains")
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(survivors, edges)
    density = counts / (config.n_paths * np.diff(edges))
    return Histogram(edges, density, survivors.size / config.n_paths)
