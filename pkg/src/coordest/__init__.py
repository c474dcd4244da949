"""Unbiased estimators for coordinated (shared-seed) samples."""

__version__ = "0.1.0"

from .sampling import (  # noqa: E402
    Outcome,
    SampleSet,
    ThresholdScheme,
    consistent_bounds,
    sample_matrix,
    sample_vector,
    seed_from_key,
    threshold,
)
from .functions import CustomLowerBound, RgP, RgPPlus, TightFamily  # noqa: E402
from .curves import (  # noqa: E402
    OptimalRange,
    PiecewiseCurve,
    curve_from_data,
    curve_suffix_from_outcome,
    existence_checks,
    lambda_bounds,
    lambda_value,
    lower_hull,
    v_optimal,
)
from .estimators import (  # noqa: E402
    HT,
    LSTAR,
    USTAR,
    OrderOptimal,
    VOptOracle,
    estimate,
    ht_estimate,
    lstar_estimate,
    ustar_estimate,
)
from .order_optimal import EstimatorTable, order_optimal_build, order_optimal_estimate  # noqa: E402
from .verification import (  # noqa: E402
    aggregate_error_experiment,
    competitive_ratio,
    moments,
    property_suite,
    tightness_family,
)
