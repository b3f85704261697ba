"""Lower bounds on the Bayesian h-outage error probability and the MSE.

The package evaluates the tightest outage bound and its order-p subclass,
the single-coefficient and general coefficient bounds, and the Ziv-Zakai
outage curve for scalar posteriors, integrates them into distortion, moment
and MSE bounds, and measures the h-MAP, MAP and MMSE estimators by Monte
Carlo.
"""

from ._validation import CapabilityError, ConfigurationError
from .estimators import (
    ConstantEstimator,
    EmpiricalPerformance,
    EstimatorSpec,
    HMAPEstimator,
    MAPEstimator,
    MMSEEstimator,
    empirical_mse,
    empirical_outage,
    empirical_outage_curve,
    h_map_estimate,
    map_estimate,
    min_outage_numeric,
    mmse_estimate,
)
from .models import (
    CallableModel,
    ContinuousDensity,
    ContinuousSampler,
    DiscreteAtoms,
    GaussianMixturePosterior,
    LinearGaussian,
    PosteriorModel,
    TwoSidedExponential,
    UniformIntervalsGaussian,
    posterior_pdf,
    sample_joint,
)
from .mse import (
    DistortionSpec,
    HIntegrationConfig,
    TruncationError,
    distortion_bound,
    moment_bound,
    mse_bound_cp,
    mse_bound_tightest,
    single_coeff_mse_bound,
    zzlb_mse,
)
from .outage import (
    P_ONE_PLUS,
    BoundCurve,
    BoundKind,
    FourierCoefficientSet,
    general_class_bound,
    min_outage_oracle,
    outage_curve,
    single_coeff_bound,
    tightest_bound,
    tightest_subclass_bound,
    valley_fill,
    zzlb_outage,
)
from .quadrature import QuadratureConfig, integrate, lattice_max, lattice_norm, lattice_sum

__version__ = "0.1.0"

__all__ = [
    "BoundCurve",
    "BoundKind",
    "CallableModel",
    "CapabilityError",
    "ConfigurationError",
    "ConstantEstimator",
    "ContinuousDensity",
    "ContinuousSampler",
    "DiscreteAtoms",
    "DistortionSpec",
    "EmpiricalPerformance",
    "EstimatorSpec",
    "FourierCoefficientSet",
    "GaussianMixturePosterior",
    "HIntegrationConfig",
    "HMAPEstimator",
    "LinearGaussian",
    "MAPEstimator",
    "MMSEEstimator",
    "P_ONE_PLUS",
    "PosteriorModel",
    "QuadratureConfig",
    "TruncationError",
    "TwoSidedExponential",
    "UniformIntervalsGaussian",
    "distortion_bound",
    "empirical_mse",
    "empirical_outage",
    "empirical_outage_curve",
    "general_class_bound",
    "h_map_estimate",
    "integrate",
    "lattice_max",
    "lattice_norm",
    "lattice_sum",
    "map_estimate",
    "min_outage_numeric",
    "min_outage_oracle",
    "mmse_estimate",
    "moment_bound",
    "mse_bound_cp",
    "mse_bound_tightest",
    "outage_curve",
    "posterior_pdf",
    "sample_joint",
    "single_coeff_bound",
    "single_coeff_mse_bound",
    "tightest_bound",
    "tightest_subclass_bound",
    "valley_fill",
    "zzlb_mse",
    "zzlb_outage",
]
