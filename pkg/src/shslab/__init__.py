"""Numerical laboratory for the stochastic Hunter-Saxton equation.

The equation under study is

    dq + (u q)_x dt + (sigma q)_x o dW = (1/2) q^2 dt,      u_x = q,

with spatially linear transport noise sigma(x) = a x + b.  For step-function
initial data the characteristics are exactly solvable, and every module here
is built on those closed forms:

``paths``
    Brownian paths on uniform grids and the exponential functionals
    Z(t) = exp(-a W(t)), A(t) = (1/2) int_0^t Z ds that drive everything.
``yor``
    Law of int_0^t exp(2 W) ds (density / distribution function) via
    oscillatory quadrature with cancellation-aware precision control.
``breaking``
    Pathwise blow-up times of characteristics and their law, tied to the
    exponential-functional distribution by a time change.
``characteristics``
    The Lagrangian solution field: slopes, velocities, Jacobians and
    characteristic positions for step initial data, conservative or
    dissipative continuation through blow-up.
``eulerian``
    Inversion of the characteristic map into Eulerian slices, energy
    bookkeeping, and velocity-increment statistics.
``deterministic``
    The noiseless solution with its defect-measure ledger, used as an exact
    reference in the sigma -> 0 limit.
``diagnostics``
    Weak-form residuals, ensemble statistics, a priori bound checks and
    distributional goodness-of-fit tests.
``cli``
    Scenario-driven command line front end.
"""

from .breaking import (
    BreakingTime,
    breaking_cdf,
    breaking_cdf_batch,
    breaking_time,
    mc_breaking_cdf,
    mc_breaking_times,
)
from .characteristics import (
    CharacteristicField,
    ContinuationMode,
    SigmaSpec,
    StepInitialData,
    build_field,
    build_X,
    project_initial,
    q_lagrangian,
    sde_cross_check,
    singular_mask,
    stratonovich_heun,
    u_frak,
)
from .deterministic import (
    DefectLedger,
    defect_ledger,
    det_breaking_times,
    det_energy,
    det_solution,
    sigma_zero_consistency,
)
from .diagnostics import (
    EnsembleStats,
    SupportError,
    TestFunction,
    WeakFormResult,
    apriori_bounds_check,
    apriori_space_time_norm,
    bessel_timechange_check,
    breaking_law_ks,
    energy_form_residual,
    ensemble_energies,
    ensemble_stats,
    expected_energy_check,
    holder_exponent,
    meeting_time_check,
    weak_form_residual,
)
from .eulerian import (
    EulerianSlice,
    energy_eulerian,
    energy_lagrangian,
    eulerian_slice,
    invert_X,
    oleinik_report,
    u_l2_increment,
)
from .paths import (
    BrownianPath,
    ExpFunctionals,
    TimeGrid,
    a_mu_functional,
    exp_functionals,
    path_seed,
    refine_bridge,
    sample_brownian,
)
from .scenario import DEFAULT_SCENARIO, Scenario, ScenarioError, load_scenario, parse_scenario
from .yor import (
    YorConvergenceError,
    YorQuadratureParams,
    yor_cdf,
    yor_cdf_batch,
    yor_density,
    yor_density_batch,
    yor_density_nested,
)

__version__ = "0.1.0"

__all__ = [
    "TimeGrid",
    "BrownianPath",
    "ExpFunctionals",
    "path_seed",
    "sample_brownian",
    "refine_bridge",
    "exp_functionals",
    "a_mu_functional",
    "YorQuadratureParams",
    "YorConvergenceError",
    "yor_density",
    "yor_density_batch",
    "yor_density_nested",
    "yor_cdf",
    "yor_cdf_batch",
    "BreakingTime",
    "breaking_time",
    "breaking_cdf",
    "breaking_cdf_batch",
    "mc_breaking_times",
    "mc_breaking_cdf",
    "SigmaSpec",
    "StepInitialData",
    "ContinuationMode",
    "CharacteristicField",
    "project_initial",
    "build_field",
    "q_lagrangian",
    "u_frak",
    "singular_mask",
    "build_X",
    "stratonovich_heun",
    "sde_cross_check",
    "EulerianSlice",
    "invert_X",
    "eulerian_slice",
    "energy_lagrangian",
    "energy_eulerian",
    "u_l2_increment",
    "oleinik_report",
    "DefectLedger",
    "det_breaking_times",
    "det_solution",
    "det_energy",
    "defect_ledger",
    "sigma_zero_consistency",
    "SupportError",
    "TestFunction",
    "EnsembleStats",
    "ensemble_stats",
    "WeakFormResult",
    "weak_form_residual",
    "energy_form_residual",
    "ensemble_energies",
    "expected_energy_check",
    "apriori_space_time_norm",
    "apriori_bounds_check",
    "meeting_time_check",
    "bessel_timechange_check",
    "holder_exponent",
    "breaking_law_ks",
    "Scenario",
    "ScenarioError",
    "DEFAULT_SCENARIO",
    "load_scenario",
    "parse_scenario",
    "__version__",
]
