"""Mutation processes on the ancestral line of the two-type Moran model with selection.

Exact solvers for the finite population, diffusion and deterministic regimes,
plus stochastic simulation oracles and figure/validation pipelines.
"""
from .deterministic import DetSolution, det_equilibrium, det_geometric, det_rates_and_flux, geometric_p
from .diffusion import (
    DerivativeBundle,
    DiffusionSolution,
    alpha_from_beta,
    alpha_tail,
    beta_recursion,
    derivatives_fd,
    diffusion_derivatives,
    diffusion_fluxes_rates,
    solve_diffusion,
    wright_moments,
    wright_normalizer,
)
from .errors import *  # noqa: F401,F403
from .experiments import (
    FluxComparison,
    RunSpec,
    compare_fluxes,
    find_s_for_b1,
    run_figure,
    run_spec,
    validate_suite,
)
from .finite import (
    AncestralSummary,
    FiniteSolution,
    FluxReport,
    ancestral_type_distribution,
    flux_identity_residuals,
    flux_report,
    moran_stationary,
    mutation_fluxes,
    mutation_rates,
    sampling_probs,
    solve_finite,
    tail_probs,
)
from .numerics import TridiagonalSystem, falling_factorial_ratio, solve_tridiagonal
from .params import DetParams, DiffusionParams, FiniteParams, validate
from .simulate import (
    EventLog,
    SimConfig,
    SimEstimate,
    simulate_ancestral_line,
    simulate_killed_asg,
    simulate_line_counting,
    simulate_moran,
)

__version__ = "0.1.0"
