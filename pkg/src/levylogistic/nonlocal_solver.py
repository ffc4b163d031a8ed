"""Finite-difference discretisation of the nonlocal generator of

    dX = r X (1 - X) dt + sigma X dL^alpha

on a bounded domain (r1, r2) with Dirichlet-type exterior data, and solvers for
the mean exit time, the escape probability and the nonlocal Fokker-Planck
equation built on it.

Jump part. For an interior node x with delta = min(x - r1, r2 - x) the integral

    C PV int_{r1-x}^{r2-x} (u(x+z) - u(x)) |z|^{-1-alpha} dz

is split into the symmetric window (-delta, delta), integrated in the
compensated form int_0^delta (u(x+y) + u(x-y) - 2u(x)) y^{-1-alpha} dy, and the
remaining one-sided tail. The part of the measure outside (r1 - x, r2 - x)
gives the killing coefficient (C/alpha)[(x-r1)^-alpha + (r2-x)^-alpha]. On every
grid panel [kh, (k+1)h], k >= 1, the field is interpolated linearly and the
kernel integrated exactly; on [0, h] the second difference is taken quadratic
in y. Because all panels are grid aligned the resulting matrix only depends on
|i - j| and is symmetric.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack
from scipy.special import erf

from .core import DomainError, ModelParams, levy_constant
from .grid import Grid1D, ScalarField

log = logging.getLogger(__name__)

MIN_NODES = 8


class SolverError(RuntimeError):
    pass


def panel_weights(alpha: float, h: float, m: int):
    """Jump weights for offsets k = 1..m (kernel y^{-1-alpha}, no constant).

    Returns (interior, endpoint): ``interior[k-1]`` is the weight of a node at
    distance k h strictly inside the integration range, ``endpoint[k-1]`` the
    weight when that node is the last one (a boundary point).
    """
    k = np.arange(1, m + 1, dtype=float)
    i0 = h**-alpha * (k**-alpha - (k + 1) ** -alpha) / alpha
    if alpha == 1.0:
        i1 = np.log((k + 1) / k)
    else:
        i1 = h ** (1 - alpha) * ((k + 1) ** (1 - alpha) - k ** (1 - alpha)) / (1 - alpha)
    left = ((k + 1) * h * i0 - i1) / h    # weight of u(kh) from panel [kh, (k+1)h]
    right = (i1 - k * h * i0) / h         # weight of u((k+1)h) from the same panel
    first = h**-alpha / (2 - alpha)       # quadratic model on [0, h]
    endpoint = np.concatenate([[first], right[:-1]])
    interior = endpoint + left
    return interior, endpoint


def jump_matrix(alpha: float, grid: Grid1D):
    """Discrete C_alpha-scaled nonlocal operator with zero exterior extension.

    Returns (J, b_left, b_right) where J acts on interior values and b_left,
    b_right multiply a constant exterior value on (-inf, r1] and [r2, inf):
    the boundary-point weight plus the whole kernel mass beyond it.
    """
    if grid.spacing != "linear":
        raise ValueError("the nonlocal scheme needs a uniformly spaced grid")
    n, h = grid.n, grid.h
    c = levy_constant(alpha).c_alpha
    interior, endpoint = panel_weights(alpha, h, n + 1)
    col = np.concatenate([[0.0], interior[: n - 1]])
    J = linalg.toeplitz(col)
    idx = np.arange(1, n + 1)
    x = grid.x
    b_left = endpoint[idx - 1] + (x - grid.r1) ** -alpha / alpha
    b_right = endpoint[n - idx] + (grid.r2 - x) ** -alpha / alpha
    # everything the jumps carry away: other nodes, boundary points and the exterior
    total = 2 * h**-alpha * (1 / (2 - alpha) + 1 / alpha)
    J[np.diag_indices(n)] = -total
    return c * J, c * b_left, c * b_right


def killing_coefficient(alpha: float, grid: Grid1D) -> np.ndarray:
    """(C/alpha)[(x - r1)^-alpha + (r2 - x)^-alpha] at the interior nodes."""
    c = levy_constant(alpha).c_alpha
    x = grid.x
    return c / alpha * ((x - grid.r1) ** -alpha + (grid.r2 - x) ** -alpha)


@dataclass
class GeneratorMatrix:
    """Interior block of the discrete generator plus its couplings to the exterior data.

    ``matrix @ u + left * u_left + right * u_right`` approximates A u at the
    interior nodes when u equals u_left on (-inf, r1] and u_right on [r2, inf).
    """

    matrix: np.ndarray
    left: np.ndarray
    right: np.ndarray
    grid: Grid1D
    alpha: float
    sigma: float
    r: float
    drift_scheme: str
    jump: np.ndarray = field(repr=False)
    intensity: np.ndarray = field(repr=False)
    drift: np.ndarray = field(repr=False)

    def apply(self, u, u_left=0.0, u_right=0.0):
        return self.matrix @ u + self.left * u_left + self.right * u_right


def _check_levy(params: ModelParams):
    if params.lam != 0:
        raise DomainError("the nonlocal solver covers the pure-jump model only (lam must be 0)")
    if not params.sigma > 0:
        raise DomainError("sigma must be > 0 for the nonlocal solver")
    if not 0 < params.alpha < 2:
        raise DomainError("alpha must lie in (0, 2)")


def assemble_generator(params: ModelParams, grid: Grid1D, drift_scheme: str = "upwind",
                       drift: Optional[Callable] = None, intensity: Optional[Callable] = None
                       ) -> GeneratorMatrix:
    """Matrix form of r x(1-x) u' + |sigma x|^alpha (jump integral of u).

    ``drift`` overrides the logistic drift r x (1 - x) and ``intensity`` the
    factor x in the noise amplitude sigma x (both callables of x); the jump
    integral is scaled by |sigma intensity(x)|^alpha.
    """
    _check_levy(params)
    if grid.n < MIN_NODES:
        raise DomainError(f"grid too coarse for the symmetric window: n = {grid.n} < {MIN_NODES}")
    if drift_scheme not in ("upwind", "central"):
        raise ValueError(f"unknown drift scheme {drift_scheme!r}")
    alpha = params.alpha
    x, h, n = grid.x, grid.h, grid.n
    f = drift(x) if drift is not None else params.r * x * (1 - x / params.K)
    f = np.broadcast_to(np.asarray(f, dtype=float), x.shape).copy()
    amp = params.sigma * (intensity(x) if intensity is not None else x)
    g = np.abs(np.broadcast_to(np.asarray(amp, dtype=float), x.shape)) ** alpha

    J, bl, br = jump_matrix(alpha, grid)
    A = g[:, None] * J
    left = g * bl
    right = g * br

    # first-derivative term
    if drift_scheme == "central":
        up = f / (2 * h)
        lo = -f / (2 * h)
        dg = np.zeros(n)
    else:
        fp, fm = np.maximum(f, 0.0), np.minimum(f, 0.0)
        up = fp / h
        lo = -fm / h
        dg = (fm - fp) / h
    A[np.diag_indices(n)] += dg
    A[np.arange(n - 1), np.arange(1, n)] += up[:-1]
    A[np.arange(1, n), np.arange(n - 1)] += lo[1:]
    left = left.copy()
    right = right.copy()
    left[0] += lo[0]
    right[-1] += up[-1]
    return GeneratorMatrix(A, left, right, grid, alpha, params.sigma, params.r, drift_scheme,
                           jump=J, intensity=g, drift=f)


def _solve(A: np.ndarray, b: np.ndarray):
    try:
        lu, piv = linalg.lu_factor(A, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"LU factorisation failed: {exc}") from exc
    anorm = np.abs(A).sum(axis=0).max()
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if rcond == 0 or info != 0:
        raise SolverError(f"generator matrix is singular (rcond = {rcond})")
    u = linalg.lu_solve((lu, piv), b)
    if not np.all(np.isfinite(u)):
        raise SolverError(f"linear solve produced non-finite values (condition ~ {1 / rcond:.3e})")
    return u, 1.0 / rcond


def solve_met(params: ModelParams, grid: Grid1D, drift_scheme: str = "upwind",
              rhs_scale: float = 1.0, **overrides) -> ScalarField:
    """Mean exit time from (r1, r2): A u = -1 inside, u = 0 outside."""
    gen = assemble_generator(params, grid, drift_scheme, **overrides)
    u, cond = _solve(gen.matrix, -rhs_scale * np.ones(grid.n))
    return ScalarField(grid, u, 0.0, 0.0, {"condition": cond, "quantity": "met"})


def solve_ep(params: ModelParams, grid: Grid1D, target: str = "left",
             drift_scheme: str = "upwind", **overrides) -> ScalarField:
    """Probability that the first exit lands in E.

    target="left": E = (-inf, r1] (extinction side); "right": E = [r2, inf).
    """
    if target not in ("left", "right"):
        raise ValueError("target must be 'left' or 'right'")
    gen = assemble_generator(params, grid, drift_scheme, **overrides)
    pl, pr = (1.0, 0.0) if target == "left" else (0.0, 1.0)
    p, cond = _solve(gen.matrix, -(gen.left * pl + gen.right * pr))
    return ScalarField(grid, p, pl, pr, {"condition": cond, "quantity": "ep", "target": target})


@dataclass
class DensitySnapshot:
    field: ScalarField
    time: float

    @property
    def mass(self) -> float:
        # trapezoid with zero density at r1 and r2
        return float(self.field.grid.h * self.field.values.sum())

    @property
    def leaked_mass(self) -> float:
        return 1.0 - self.mass

    @property
    def peak(self) -> float:
        return float(self.field.values.max())

    def mean(self) -> float:
        p = self.field.values
        return float((self.field.x * p).sum() / p.sum())


def initial_bump(x, x0, width: float = 40.0):
    """sqrt(w/pi) exp(-w (x - x0)^2), unit mass on the real line."""
    return math.sqrt(width / math.pi) * np.exp(-width * (np.asarray(x) - x0) ** 2)


def fpe_operator(params: ModelParams, grid: Grid1D, **overrides) -> np.ndarray:
    """Discrete right-hand side of p_t = -(f p)_x + jump adjoint of p.

    Drift flux is upwinded at cell faces; density outside (r1, r2) is zero.
    """
    _check_levy(params)
    if grid.n < MIN_NODES:
        raise DomainError(f"grid too coarse: n = {grid.n} < {MIN_NODES}")
    drift = overrides.get("drift")
    intensity = overrides.get("intensity")
    x, h, n = grid.x, grid.h, grid.n
    faces = grid.x_full[:-1] + h / 2
    ff = drift(faces) if drift is not None else params.r * faces * (1 - faces / params.K)
    ff = np.broadcast_to(np.asarray(ff, dtype=float), faces.shape)
    amp = params.sigma * (intensity(x) if intensity is not None else x)
    g = np.abs(np.broadcast_to(np.asarray(amp, dtype=float), x.shape)) ** params.alpha
    J, _, _ = jump_matrix(params.alpha, grid)
    M = J * g[None, :]
    # flux through face k (between node k-1 and node k; node 0 and n+1 are the boundary points)
    # F_k = max(f,0) p_{k-1} + min(f,0) p_k, with p = 0 at the boundary points
    fp, fm = np.maximum(ff, 0.0), np.minimum(ff, 0.0)
    i = np.arange(n)
    # -(F_{i+1} - F_i)/h for interior node i (0-based), faces indexed 0..n
    M[i, i] += (-fp[i + 1] + fm[i]) / h
    M[i[:-1], i[:-1] + 1] += -fm[i[:-1] + 1] / h
    M[i[1:], i[1:] - 1] += fp[i[1:]] / h
    return M


class StepRejected(SolverError):
    pass


def evolve_fpe(params: ModelParams, grid: Grid1D, x0: float, T: float, dt: Optional[float] = None,
               snapshot_every: Optional[float] = None, theta: float = 0.5, **overrides) -> list[DensitySnapshot]:
    """Integrate the nonlocal Fokker-Planck equation from a Gaussian bump at x0.

    theta = 0.5 is the trapezoidal (Crank-Nicolson) rule, theta = 1 backward
    Euler. Snapshots are emitted at t = 0, every ``snapshot_every`` and at T.
    """
    if not grid.r1 < x0 < grid.r2:
        raise DomainError(f"x0 = {x0} must lie inside ({grid.r1}, {grid.r2})")
    if not T > 0:
        raise DomainError("T must be > 0")
    dt = grid.h if dt is None else dt
    if not dt > 0:
        raise DomainError("dt must be > 0")
    inside = 0.5 * (erf(math.sqrt(40) * (grid.r2 - x0)) - erf(math.sqrt(40) * (grid.r1 - x0)))
    if inside < 0.999:
        raise DomainError(f"initial bump at x0 = {x0} has only {inside:.4f} of its mass inside the domain")

    nsteps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / nsteps
    if snapshot_every is None:
        marks = {nsteps}
    else:
        marks = {min(nsteps, max(1, round(j * snapshot_every / dt)))
                 for j in range(1, math.ceil(T / snapshot_every - 1e-9) + 1)} | {nsteps}

    M = fpe_operator(params, grid, **overrides)
    eye = np.eye(grid.n)
    rhs_op = eye + (1 - theta) * dt * M
    try:
        lu = linalg.lu_factor(eye - theta * dt * M)
    except (linalg.LinAlgError, ValueError) as exc:
        raise StepRejected(f"implicit step matrix is singular: {exc}") from exc

    p = initial_bump(grid.x, x0)
    snaps = [DensitySnapshot(ScalarField(grid, p.copy()), 0.0)]
    for k in range(1, nsteps + 1):
        p = linalg.lu_solve(lu, rhs_op @ p)
        if not np.all(np.isfinite(p)):
            raise StepRejected(f"non-finite density at step {k}")
        if k in marks:
            snaps.append(DensitySnapshot(ScalarField(grid, p.copy()), k * dt))
    return snaps


@dataclass
class ConvergenceRow:
    n: int
    h: float
    error: float
    order: float


def convergence_study(params: ModelParams, base_grid: Grid1D, levels: int = 3,
                      drift_scheme: str = "upwind", **overrides) -> list[ConvergenceRow]:
    """Re-solve the MET on nested refinements (n -> 2n + 1) and compare at the base nodes.

    Row k holds max |u_{k+1} - u_k| over the base nodes and the order implied by
    consecutive differences (nan where undefined).
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    grids = [base_grid]
    for _ in range(levels - 1):
        grids.append(grids[-1].refine())
    sols = []
    for k, g in enumerate(grids):
        u = solve_met(params, g, drift_scheme, **overrides).values
        stride = 2**k
        sols.append(u[stride - 1 :: stride][: base_grid.n])
    diffs = [float(np.max(np.abs(b - a))) for a, b in zip(sols[:-1], sols[1:])]
    rows = []
    for k, d in enumerate(diffs):
        order = math.nan
        if k > 0 and d > 0 and diffs[k - 1] > 0:
            order = math.log2(diffs[k - 1] / d)
        rows.append(ConvergenceRow(grids[k].n, grids[k].h, d, order))
    return rows
