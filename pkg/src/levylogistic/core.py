"""Model parameters, Levy-measure constant, samplers and the deterministic logistic baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class DomainError(ValueError):
    """A parameter lies outside the range where a quantity is defined."""


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of dX = rX(1 - X/K)dt + lambda X dB + sigma X dL^alpha.

    ``time_scale`` is the factor mapping scaled time back to physical time
    (physical = scaled / time_scale); it is 1 for unscaled parameter sets.
    """

    r: float = 1.0
    K: float = 1.0
    lam: float = 0.0
    sigma: float = 0.0
    alpha: float = 1.0
    time_scale: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"growth rate r must be > 0, got {self.r}")
        if not self.K > 0:
            raise DomainError(f"carrying capacity K must be > 0, got {self.K}")
        if self.lam < 0 or self.sigma < 0:
            raise DomainError("noise intensities must be nonnegative")
        if self.sigma > 0 and not 0 < self.alpha < 2:
            raise DomainError(f"alpha must lie in (0, 2) when sigma > 0, got {self.alpha}")

    @property
    def is_gaussian(self) -> bool:
        return self.sigma == 0

    @property
    def is_levy(self) -> bool:
        return self.lam == 0 and self.sigma > 0

    def to_physical_time(self, t):
        return np.asarray(t) / self.time_scale


@dataclass(frozen=True)
class LevyConstant:
    alpha: float
    c_alpha: float


def _check_alpha(alpha):
    if not 0 < alpha < 2:
        raise DomainError(f"alpha must lie in the open interval (0, 2), got {alpha}")


def levy_constant(alpha: float) -> LevyConstant:
    """Normalising constant c(1, alpha) of the symmetric alpha-stable jump measure.

    With this constant the jump part of the generator equals -(-Laplacian)^(alpha/2).
    """
    _check_alpha(alpha)
    c = alpha * math.gamma((1 + alpha) / 2) / (
        2 ** (1 - alpha) * math.sqrt(math.pi) * math.gamma(1 - alpha / 2)
    )
    return LevyConstant(alpha, c)


def deterministic_solution(x0, t, r=1.0, K=1.0):
    """Closed-form logistic trajectory x0 K / (x0 + (K - x0) exp(-r t))."""
    x0 = np.asarray(x0, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(x0 < 0) or np.any(t < 0):
        raise DomainError("deterministic_solution needs x0 >= 0 and t >= 0")
    out = x0 * K / (x0 + (K - x0) * np.exp(-r * t))
    return out if out.ndim else float(out)


def potential(x, r=1.0, K=1.0):
    """U(x) with -U'(x) equal to the logistic drift."""
    x = np.asarray(x, dtype=float)
    out = -0.5 * r * x**2 + r * x**3 / (3 * K)
    return out if out.ndim else float(out)


def nondimensionalize(params: ModelParams) -> ModelParams:
    """Rescale population by K (and, for pure Gaussian noise, time by r).

    Gaussian case: t = r t~, X = X~/K, lambda = lambda~/sqrt(r), giving r' = 1.
    Levy case: only the population is rescaled; r stays as the drift coefficient.
    """
    if params.is_gaussian:
        return replace(params, r=1.0, K=1.0, lam=params.lam / math.sqrt(params.r),
                       time_scale=params.time_scale * params.r)
    return replace(params, K=1.0)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for the (seed, stream) pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def stable_from_uniforms(alpha: float, v, w):
    """Chambers-Mallows-Stuck transform for the symmetric case.

    ``v`` is uniform on (-pi/2, pi/2) and ``w`` standard exponential. The
    result has characteristic function exp(-|u|^alpha).
    """
    if alpha == 1.0:
        return np.tan(v)
    return (np.sin(alpha * v) / np.cos(v) ** (1 / alpha)
            * (np.cos((1 - alpha) * v) / w) ** ((1 - alpha) / alpha))


def sample_alpha_stable(alpha: float, n: int, seed: int = 0, stream: int = 0, rng=None) -> np.ndarray:
    """n draws from the standard symmetric alpha-stable law S_alpha(1, 0, 0)."""
    _check_alpha(alpha)
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = rng if rng is not None else make_rng(seed, stream)
    v = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
    w = rng.standard_exponential(size=n)
    return stable_from_uniforms(alpha, v, w)


def sample_gaussian(n: int, seed: int = 0, stream: int = 0, rng=None) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = rng if rng is not None else make_rng(seed, stream)
    return rng.standard_normal(size=n)
