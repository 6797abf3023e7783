"""Spectral-Galerkin integrators for semilinear SPDEs with multiplicative
trace-class noise, plus a coupled-path Monte Carlo experiment harness."""

__version__ = "0.1.0"

from .basis import (
    Field,
    SpectralBasis,
    apply_resolvent,
    apply_semigroup,
    field_from_grid,
    field_from_spectral,
    fractional_norm,
    load_field,
    project,
    save_field,
    spectral_derivative_1d,
    to_grid,
    to_spectral,
)
from .coefficients import (
    NemytskiiPair,
    derivative_mismatch,
    eval_diffusion_factor,
    eval_drift,
    eval_milstein_correction,
)
from .harness import (
    ConvergenceReport,
    ExperimentConfig,
    emit_csv,
    estimate_rms_error,
    fit_slopes,
    parse_config,
)
from .noise import (
    RNG_ALGORITHM,
    MasterPath,
    QWienerSpec,
    count_random_variables,
    quadrature_field,
    sample_increment,
)
from .problems import ProblemSpec, preset, preset_names
from .schemes import (
    DivergenceError,
    IdentityReport,
    Integrator,
    RunResult,
    SchemeConfig,
    iterated_integral_oracle,
    run_scheme,
)

__all__ = [
    "Field",
    "SpectralBasis",
    "apply_resolvent",
    "apply_semigroup",
    "field_from_grid",
    "field_from_spectral",
    "fractional_norm",
    "load_field",
    "project",
    "save_field",
    "spectral_derivative_1d",
    "to_grid",
    "to_spectral",
    "NemytskiiPair",
    "derivative_mismatch",
    "eval_diffusion_factor",
    "eval_drift",
    "eval_milstein_correction",
    "ConvergenceReport",
    "ExperimentConfig",
    "emit_csv",
    "estimate_rms_error",
    "fit_slopes",
    "parse_config",
    "RNG_ALGORITHM",
    "MasterPath",
    "QWienerSpec",
    "count_random_variables",
    "quadrature_field",
    "sample_increment",
    "ProblemSpec",
    "preset",
    "preset_names",
    "DivergenceError",
    "IdentityReport",
    "Integrator",
    "RunResult",
    "SchemeConfig",
    "iterated_integral_oracle",
    "run_scheme",
]
