"""Distortion risk measures and optimal reinsurance under the marginal sign rule."""
from .closed_form import StopLossParams, stoploss_cvar, stoploss_var, var_vs_var
from .contract import (
    IndemnificationFunction,
    MarginalIndemnification,
    convex_combination,
    identity,
    push_forward,
    quota_share,
    retained,
    stop_loss,
    validate,
    zero,
)
from .dist_model import (
    Empirical,
    Exponential,
    LossDistribution,
    Lognormal,
    Truncated,
    Uniform,
    discretize,
    truncate,
)
from .distortion import (
    CVaRRamp,
    Distortion,
    ExpectedValue,
    PiecewiseLinear,
    ProportionalHazard,
    RiskFunctional,
    VaRStep,
    Wang,
    check_regularity,
    from_g,
    risk_value,
    risk_value_survival_form,
    to_g,
)
from .errors import (
    DivergenceError,
    DomainError,
    PreconditionError,
    ReinsoptError,
    SolverError,
    ValidationError,
)
from .solver import (
    ReinsuranceProblem,
    Solution,
    build_ceding,
    build_reinsurer,
    build_social,
    objective,
    optimal_marginal,
    psi,
    solve,
)

__version__ = "0.1.0"
