"""Simulator and verification suite for quantum private membership aggregation."""

from .errors import (
    DimensionGuardError,
    ProtocolAbort,
    QpmaError,
    ScenarioParseError,
    ValidationError,
    ZeroProbabilityCondition,
)
from .field import PrimeField, omega_power, smallest_prime_geq
from .protocol import (
    AggregationReport,
    ByzantineSpec,
    Scenario,
    SummationConfig,
    TamperMode,
    download_cost,
    run_qpma,
    run_summation,
)
from .states import BYZANTINE, DenseBlockState, PhaseBlockState

__version__ = "0.1.0"
