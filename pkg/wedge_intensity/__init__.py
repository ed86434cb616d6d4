"""
Wedge Intensity - Default intensities of two firms under discrete asset observation.

The asset log-distances of two firms follow a correlated Brownian motion with drift;
the market sees them only at observation times plus the default indicators. This
package computes the resulting default intensities, conditional default-time and
asset-value distributions, and checks them against a Monte Carlo oracle.

Usage:
    from wedge_intensity import ModelParams, InformationState, lambda2

    model = ModelParams(mu=(2, 3), sigma1=4, sigma2=5, rho=-0.5, x0=(9, 10))
    info = InformationState(obs_times=(0.0,), last_obs_index=0, x_obs=(9, 10), as_of=1.0)
    print(lambda2(1.0, info, model).lambda2)
"""

from .cache import SURVIVAL_CACHE, Cache
from .densities import (
    DensityValue,
    EvalQuality,
    b_reflect,
    b_series,
    exit_onset,
    exit_probability,
    f_exit,
    g_integral,
    g_joint,
    g_tail,
    h_reflect,
    h_survive,
    l_kernel,
    p_kernel,
    pi_hit,
    pi_hit_argmax_level,
    pi_hit_argmax_time,
    pi_survival,
    pi_tilde,
    surviving_position_reflect,
    survival_prob,
)
from .errors import (
    ConfigError,
    DegenerateConditioningError,
    DomainError,
    InsufficientSampleError,
    InvalidStateError,
    QuadratureError,
    SingularCovarianceError,
    ValidationFailure,
    WedgeIntensityError,
)
from .geometry import (
    ModelParams,
    ReflectionSet,
    WedgeState,
    build_model,
    reflection_set,
    special_case_k,
    tilde_model,
    wedge_angle,
)
from .intensity import (
    InformationState,
    IntensitySample,
    compensator,
    conditional_asset_density,
    conditional_default_density,
    intensity_path,
    lambda1,
    lambda2,
    regime_of,
)
from .montecarlo import Conditioning, SimConfig, SimEstimates, conditional_rate, simulate
from .quadrature import DEFAULT_QUAD, QuadConfig, QuadResult, integrate_1d, integrate_wedge
from .regime import Regime, RegimeTag
from .scenario import BUILTIN_SCENARIOS, Scenario, get_scenario, load_scenario, save_scenario
from .special_fn import SeriesBudget, bessel_i, bessel_i_scaled, gauss2, truncation_length
from .validation import ValidationReport, ValidationRow, run_validation

__version__ = "0.1.0"
__all__ = [
    "__version__",
    # special functions
    "SeriesBudget",
    "bessel_i",
    "bessel_i_scaled",
    "gauss2",
    "truncation_length",
    # geometry
    "ModelParams",
    "WedgeState",
    "ReflectionSet",
    "wedge_angle",
    "build_model",
    "tilde_model",
    "reflection_set",
    "special_case_k",
    # quadrature
    "QuadConfig",
    "QuadResult",
    "DEFAULT_QUAD",
    "integrate_1d",
    "integrate_wedge",
    # densities
    "EvalQuality",
    "DensityValue",
    "pi_hit",
    "pi_survival",
    "pi_tilde",
    "pi_hit_argmax_level",
    "pi_hit_argmax_time",
    "b_series",
    "f_exit",
    "h_survive",
    "survival_prob",
    "exit_onset",
    "exit_probability",
    "g_joint",
    "g_tail",
    "g_integral",
    "l_kernel",
    "p_kernel",
    "b_reflect",
    "h_reflect",
    "surviving_position_reflect",
    # intensity
    "Regime",
    "RegimeTag",
    "InformationState",
    "IntensitySample",
    "regime_of",
    "lambda1",
    "lambda2",
    "conditional_default_density",
    "conditional_asset_density",
    "intensity_path",
    "compensator",
    "Cache",
    "SURVIVAL_CACHE",
    # monte carlo
    "SimConfig",
    "SimEstimates",
    "Conditioning",
    "simulate",
    "conditional_rate",
    # scenarios and validation
    "Scenario",
    "BUILTIN_SCENARIOS",
    "get_scenario",
    "load_scenario",
    "save_scenario",
    "ValidationRow",
    "ValidationReport",
    "run_validation",
    # errors
    "WedgeIntensityError",
    "DomainError",
    "SingularCovarianceError",
    "InvalidStateError",
    "QuadratureError",
    "DegenerateConditioningError",
    "InsufficientSampleError",
    "ConfigError",
    "ValidationFailure",
]
