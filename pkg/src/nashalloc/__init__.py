"""Nash capital-allocation rules for systemic risk measures."""

from .aggregation import (
    Affine,
    AggregationSystem,
    EisenbergNoe,
    MeanField,
    ShiftedLog,
    UtilitySum,
    WeightedAffine,
    aggregator_from_json,
    check_decomposition,
)
from .clearing import (
    ClearingResult,
    clearing_jacobian,
    clearing_payments_batch,
    clearing_vector,
    society_payment_components,
)
from .linprog import (
    LinearProgram,
    LPResult,
    minimal_capital_en,
    nash_lp_en,
    solve_lp,
)
from .nash import (
    AllocationReport,
    SolverConfig,
    best_response,
    best_response_all,
    nash_deterministic_en,
    nash_fixed_point,
    nash_insensitive,
    verify_nash,
)
from .network import (
    FinancialNetwork,
    load_network,
    save_network,
    self_preferential_bound,
    validate_network,
)
from .risk import (
    RiskMeasureSpec,
    avar,
    entropic,
    expectation,
    is_acceptable,
    oce,
    parse_risk_spec,
    rho,
)
from .scenarios import (
    ScenarioSet,
    comonotonic_copula,
    ess_bounds,
    gaussian_copula_sample,
    load_scenarios,
    save_scenarios,
)

__version__ = "0.1.0"
