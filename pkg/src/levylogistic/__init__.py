"""Exit times, escape probabilities and densities for the stochastic logistic model
with multiplicative Gaussian or symmetric alpha-stable noise."""

from .core import (
    DomainError,
    LevyConstant,
    ModelParams,
    deterministic_solution,
    levy_constant,
    make_rng,
    nondimensionalize,
    potential,
    sample_alpha_stable,
    sample_gaussian,
)
from .grid import Grid1D, ScalarField
from .gaussian import (
    ExitProblemSpec,
    SeriesConvergenceError,
    SingularSystemError,
    StationaryDensity,
    ThresholdError,
    exact_path,
    exit_prob_left,
    exit_prob_right,
    met_bvp_solve,
    met_gaussian,
    met_gaussian_finite,
    met_series_Y,
    met_two_sided,
    series_solution,
    stationary_density,
    u2,
)
from .nonlocal_solver import (
    DensitySnapshot,
    GeneratorMatrix,
    SolverError,
    StepRejected,
    assemble_generator,
    convergence_study,
    evolve_fpe,
    solve_ep,
    solve_met,
)
from .montecarlo import (
    AllCensoredError,
    MCConfig,
    MCEstimate,
    empirical_density,
    estimate_ep,
    estimate_met,
    simulate_step,
)

__version__ = "0.1.0"
