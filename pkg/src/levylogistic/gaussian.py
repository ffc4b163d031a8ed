"""Closed forms, quadratures and boundary-value solves for the scaled Gaussian model

    dX = X(1 - X) dt + lam X dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .core import DomainError
from .grid import Grid1D, ScalarField

SQRT2 = math.sqrt(2.0)


class ThresholdError(DomainError):
    """Raised when lam >= sqrt(2) makes a Gaussian-case quantity undefined."""


class SeriesConvergenceError(RuntimeError):
    pass


class SingularSystemError(RuntimeError):
    pass


def _check_lam(lam):
    if not lam > 0:
        raise DomainError(f"noise intensity lam must be > 0, got {lam}")


def exact_path(x0, lam, increments, dt):
    """Strong solution along a Brownian path given by its N(0, dt) increments.

    Returns the N + 1 values X(0), X(dt), ..., X(N dt). The time integral in the
    denominator uses the trapezoid rule on the same grid.
    """
    if not x0 > 0 or not dt > 0:
        raise DomainError("exact_path needs x0 > 0 and dt > 0")
    dB = np.asarray(increments, dtype=float)
    t = dt * np.arange(dB.size + 1)
    B = np.concatenate([[0.0], np.cumsum(dB)])
    expo = np.exp((1 - lam**2 / 2) * t + lam * B)
    integral = integrate.cumulative_trapezoid(expo, dx=dt, initial=0.0)
    return x0 * expo / (1 + x0 * integral)


@dataclass(frozen=True)
class StationaryDensity:
    """q(x) proportional to x^(2/lam^2 - 2) exp(-2x/lam^2) on (0, inf).

    ``normalization`` is the integral of the unnormalised density; it can be
    very small for small lam, so evaluation goes through ``log_normalization``.
    """

    lam: float
    log_normalization: float

    @property
    def normalization(self) -> float:
        return math.exp(self.log_normalization)

    @property
    def power(self) -> float:
        return 2 * (1 / self.lam**2 - 1)

    @property
    def rate(self) -> float:
        return 2 / self.lam**2

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.power * np.log(x) - self.rate * x - self.log_normalization

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, np.exp(self.log_pdf(np.where(x > 0, x, 1.0))), 0.0)
        return out if out.ndim else float(out)

    def mode(self) -> float:
        return max(self.power / self.rate, 0.0)


def stationary_density(lam: float) -> StationaryDensity:
    """Normalised stationary density of the Gaussian model; exists only for lam < sqrt(2)."""
    _check_lam(lam)
    if lam >= SQRT2:
        raise ThresholdError(
            f"stationary density does not exist for lam = {lam}: the normalisation "
            "integral of x^(2/lam^2 - 2) exp(-2x/lam^2) diverges at 0 unless λ < √2"
        )
    a = 2 * (1 / lam**2 - 1)
    b = 2 / lam**2
    # shift by the log of the integrand's peak so tiny normalisations keep full precision
    m = a / b if a > 0 else 1.0
    shift = a * math.log(m) - b * m
    # x^a at the origin is handled by the algebraic-weight rule
    near, _ = integrate.quad(lambda x: math.exp(-b * x - shift), 0.0, 1.0,
                             weight="alg", wvar=(a, 0.0), epsabs=0, epsrel=1e-13)
    far, _ = integrate.quad(lambda x: math.exp(a * math.log(x) - b * x - shift), 1.0, np.inf,
                            epsabs=0, epsrel=1e-13, limit=200)
    return StationaryDensity(lam, shift + math.log(near + far))


def scale_integral(a: float, b: float, lam: float) -> float:
    """Integral of eta^(-2/lam^2) exp(2 eta/lam^2) over [a, b], 0 <= a <= b.

    Integrates in s = ln(eta), in unit-width pieces, so the power-law blow-up
    at small eta stays well resolved. a = 0 is allowed when the integral
    converges (lam > sqrt(2)).
    """
    _check_lam(lam)
    if a > b:
        return -scale_integral(b, a, lam)
    beta = 2 / lam**2
    if a == 0.0:
        if beta >= 1:
            raise DomainError(f"integral from 0 diverges for lam = {lam} <= sqrt(2)")
        a0 = min(b, 1e-3)
        head, _ = integrate.quad(lambda e: math.exp(beta * e), 0.0, a0, weight="alg",
                                 wvar=(-beta, 0.0), epsabs=0, epsrel=1e-13)
        return head + (scale_integral(a0, b, lam) if b > a0 else 0.0)
    if a == b:
        return 0.0
    sa, sb = math.log(a), math.log(b)
    if not math.isfinite(sa):
        raise DomainError(f"lower limit {a} underflows the representable range")
    edges = np.append(np.arange(sa, sb, 1.0), sb)

    def f(s):
        return math.exp((1 - beta) * s + beta * math.exp(s))

    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            total += integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]
    return total


def u2(x: float, L: float = 1.0, lam: float = 1.0) -> float:
    """Nonconstant fundamental solution -int_x^L eta^(-2/lam^2) exp(2 eta/lam^2) d eta."""
    if not 0 < x <= L:
        raise DomainError(f"u2 needs 0 < x <= L, got x={x}, L={L}")
    val = -scale_integral(x, L, lam)
    if not math.isfinite(val):
        raise DomainError(f"u2 quadrature diverged at x={x}, lam={lam}")
    return val


@dataclass(frozen=True)
class ExitProblemSpec:
    epsilon: float
    L: float
    lam: float
    x: float

    def __post_init__(self):
        if not 0 <= self.epsilon < self.x < self.L:
            raise DomainError(f"need 0 < epsilon < x < L, got {self}")
        _check_lam(self.lam)


def exit_prob_left(spec: ExitProblemSpec) -> float:
    """Probability of reaching epsilon before L, starting from x.

    epsilon = 0 gives the limiting value, finite only for lam > sqrt(2).
    """
    if spec.x <= spec.epsilon:
        return 1.0
    num = scale_integral(spec.x, spec.L, spec.lam)
    den = scale_integral(spec.epsilon, spec.L, spec.lam)
    return float(min(max(num / den, 0.0), 1.0))


def exit_prob_right(x: float, epsilon: float, lam: float) -> float:
    """Probability of reaching 1 before epsilon: 1 - u2(x)/u2(epsilon) with L = 1."""
    _check_lam(lam)
    if lam >= SQRT2:
        raise ThresholdError(f"exit_prob_right needs lam < sqrt(2) (u2(eps) -> -inf as eps -> 0), got lam = {lam}")
    if not 0 < epsilon <= x <= 1:
        raise DomainError(f"need 0 < epsilon <= x <= 1, got x={x}, epsilon={epsilon}")
    if x == 1.0:
        return 1.0
    return 1.0 - u2(x, 1.0, lam) / u2(epsilon, 1.0, lam)


@dataclass(frozen=True)
class SeriesSolution:
    """Particular solution Y(x) = -a0 ln x - sum_{n>=1} a_n x^n of the MET equation."""

    lam: float
    log_coefficient: float
    coefficients: np.ndarray
    tol: float

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        poly = np.polynomial.polynomial.polyval(x, np.concatenate([[0.0], self.coefficients[1:]]))
        out = -self.log_coefficient * np.log(x) - poly
        return out if out.ndim else float(out)


MAX_SERIES_TERMS = 100_000


def series_solution(lam: float, x_max: float = 1.0, tol: float = 1e-12,
                    max_terms: int = MAX_SERIES_TERMS) -> SeriesSolution:
    """Coefficients a_0..a_N with a_1 = a_0 = 1/(1 - lam^2/2) and
    a_{n+1} = n a_n / ((n+1)(1 + lam^2 n/2)), cut once |a_N x_max^N| < tol."""
    _check_lam(lam)
    if lam >= SQRT2:
        raise ThresholdError("the MET series needs lam < sqrt(2)")
    if not 0 < x_max <= 1:
        raise DomainError("series is evaluated on 0 < x <= 1")
    a0 = 1.0 / (1.0 - lam**2 / 2)
    coeffs = [a0, a0]
    n = 1
    while abs(coeffs[-1]) * x_max**n >= tol:
        if n >= max_terms:
            raise SeriesConvergenceError(f"series did not reach tol={tol} within {max_terms} terms")
        coeffs.append(n * coeffs[-1] / ((n + 1) * (1 + lam**2 * n / 2)))
        n += 1
    return SeriesSolution(lam, a0, np.array(coeffs), tol)


def met_series_Y(x, lam: float, tol: float = 1e-12):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0) or np.any(x_arr > 1):
        raise DomainError("met_series_Y needs 0 < x <= 1")
    return series_solution(lam, 1.0, tol)(x)


def met_gaussian(x, lam: float, tol: float = 1e-12):
    """Mean time to reach 1 from x in (0, 1]: Y(x) - Y(1)."""
    Y = series_solution(lam, 1.0, tol)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0) or np.any(x_arr > 1):
        raise DomainError("met_gaussian needs 0 < x <= 1")
    return Y(x) - Y(1.0)


def met_gaussian_finite(x, epsilon: float, lam: float, tol: float = 1e-12):
    """Exact MET on (epsilon, 1) with zero data at both ends, via the series and u2.

    u(x; eps) = Y(x) - Y(1) + (Y(1) - Y(eps)) u2(x)/u2(eps).
    """
    Y = series_solution(lam, 1.0, tol)
    u2e = u2(epsilon, 1.0, lam)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([Y(xi) - Y(1.0) + (Y(1.0) - Y(epsilon)) * u2(xi, 1.0, lam) / u2e for xi in xs])
    return out if np.ndim(x) else float(out[0])


def _solve_bvp(left: float, right: float, lam: float, n_points: int, rhs: float = -1.0,
               bc_left: float = 0.0, bc_right: float = 0.0, spacing: str = "log") -> ScalarField:
    """(lam^2 x^2/2) u'' + x(1-x) u' = rhs on (left, right), Dirichlet data.

    Second-order central differences and a tridiagonal solve. With the default
    log spacing the equation is discretised in s = ln x, where it reads
    (lam^2/2) u_ss + (1 - lam^2/2 - x) u_s = rhs; this keeps the boundary layer
    at a small left end resolved.
    """
    _check_lam(lam)
    if not 0 < left < right:
        raise DomainError(f"need 0 < left < right, got ({left}, {right})")
    if n_points < 3:
        raise DomainError("n_points must be >= 3")
    grid = Grid1D(left, right, n_points - 2, spacing)
    x, h = grid.x, grid.h
    if spacing == "log":
        diff = np.full(grid.n, lam**2 / (2 * h**2))
        adv = (1 - lam**2 / 2 - x) / (2 * h)
    else:
        diff = lam**2 * x**2 / (2 * h**2)
        adv = x * (1 - x) / (2 * h)
    lower = diff - adv
    upper = diff + adv
    main = -2 * diff
    b = np.full(grid.n, rhs, dtype=float)
    b[0] -= lower[0] * bc_left
    b[-1] -= upper[-1] * bc_right
    ab = np.zeros((3, grid.n))
    ab[0, 1:] = upper[:-1]
    ab[1] = main
    ab[2, :-1] = lower[1:]
    if np.any(main == 0):
        raise SingularSystemError("zero pivot on the diagonal")
    try:
        u = linalg.solve_banded((1, 1), ab, b)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"tridiagonal factorisation hit a zero pivot: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("tridiagonal solve produced non-finite values")
    return ScalarField(grid, u, bc_left, bc_right, {"h": h, "n_points": n_points, "spacing": spacing})


def met_bvp_solve(epsilon: float, lam: float, n_points: int, spacing: str = "log") -> ScalarField:
    """Finite-difference MET on (epsilon, 1) with u(epsilon) = u(1) = 0."""
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    return _solve_bvp(epsilon, 1.0, lam, n_points, spacing=spacing)


def met_two_sided(epsilon: float, L: float, lam: float, n_points: int, spacing: str = "log") -> ScalarField:
    """Finite-difference MET on (epsilon, L) with u(epsilon) = u(L) = 0."""
    return _solve_bvp(epsilon, L, lam, n_points, spacing=spacing)


def exit_prob_bvp(epsilon: float, L: float, lam: float, n_points: int, left_value: float = 1.0,
                  spacing: str = "log") -> ScalarField:
    """Finite-difference solve of the exit-probability BVP (zero right-hand side)."""
    return _solve_bvp(epsilon, L, lam, n_points, rhs=0.0, bc_left=left_value,
                      bc_right=1.0 - left_value, spacing=spacing)
