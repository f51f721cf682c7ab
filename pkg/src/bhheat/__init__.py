"""Stochastic biharmonic heat field on the torus: exact second-order calculus,
exact sampling, and hitting-probability / fractal-dimension experiments."""

from .covariance import (
    EnvelopeReport,
    ScanRegion,
    SecondOrderEngine,
    SpaceTimePoint,
    anisotropy_envelope,
    canonical_distance,
    correlation,
    covariance,
    engine,
    green_increment_energy_ratio,
    inclusion_exclusion,
    increment_norm_sq,
    ratio_scan,
    space_exponent_fit,
    stp,
    time_exponent_fit,
    variance,
    wiener_isometry_oracle,
)
from .errors import (
    ConfigError,
    DomainError,
    NumericalFailure,
    ResourceLimit,
    UnsupportedDimension,
)
from .geometry import (
    BallTarget,
    BoxTarget,
    CompositeGauge,
    GaugeReciprocalKernel,
    GaugeSpec,
    PointTarget,
    PowerGauge,
    RieszKernel,
    UnionTarget,
    box_counting_dimension,
    capacity_estimate,
    critical_dimension,
    discretize,
    energy,
    gauge_eval,
    generalized_dimension_scan,
    hausdorff_estimate,
)
from .hitprob import (
    HitExperiment,
    HitResult,
    estimate_hit_prob,
    hit_indicator,
    image_dimension_experiment,
    polarity_scan,
)
from .simulate import (
    FieldSample,
    InitialCondition,
    SimGrid,
    cholesky_oracle,
    deterministic_drift,
    ou_mode_path,
    simulate,
    solution_field,
    synthesize,
)
from .spectral import (
    GreenValue,
    Mode,
    Truncation,
    basis_eval,
    eigenvalue,
    enumerate_modes,
    green,
)

__version__ = "0.1.0"
