"""Budget allocation and Monte Carlo validation for crowdsourced job latency."""

from .distributions import (
    DEFAULT_QUADRATURE,
    Erlang,
    Exponential,
    Hypoexponential,
    LatencyDistribution,
    MaxOfIID,
    QuadratureConfig,
    cdf,
    expected_max_iid_erlang,
    expected_max_iid_exp,
    expected_max_two_exp,
    expected_parallel_max,
    harmonic_number,
    mean,
    parallel_latency_cdf,
    pdf,
)
from .errors import (
    ConfigError,
    CrowdTuneError,
    InconsistentProbeError,
    InsufficientBudgetError,
    InsufficientDataError,
    QuadratureError,
    StateSpaceError,
)

__version__ = "0.1.0"
