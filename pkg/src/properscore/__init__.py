"""Binary proper scoring rules that incentivize precise forecasts.

Main entry points: ``build_rule`` / ``parse_rule_spec`` for rules,
``normalize_rule`` and ``incentivization_index`` for comparisons,
``optimal_rule`` for index minimizers, ``build_polynomial_rule`` for
respectful near-optimal rules and ``monte_carlo`` for expert simulations.
"""

__version__ = "0.1.0"

from .approx import BernsteinPoly, PhiClamp, bernstein_fit, build_polynomial_rule, clamped_phi
from .calculus import integrate_open, mean_reward, normalize_rule
from .errors import ScoringError
from .index import (
    gaussian_moment,
    incentivization_index,
    load_rule,
    precision_ratio,
    predicted_error,
)
from .optimal import kappa, optimal_rule, optimal_rule_limit, phi_opt
from .rules import (
    build_rule,
    check_proper,
    check_respectful,
    evaluate,
    extend_half_derivative,
    parse_rule_spec,
)
from .simulate import (
    SimConfig,
    build_global_policy,
    marginal_gain,
    monte_carlo,
    posterior_mean,
    run_global_trajectory,
    run_local_trajectory,
)

__all__ = [
    "BernsteinPoly", "PhiClamp", "ScoringError", "SimConfig", "bernstein_fit",
    "build_global_policy", "build_polynomial_rule", "build_rule", "check_proper",
    "check_respectful", "clamped_phi", "evaluate", "extend_half_derivative",
    "gaussian_moment", "incentivization_index", "integrate_open", "kappa", "load_rule",
    "marginal_gain", "mean_reward", "monte_carlo", "normalize_rule", "optimal_rule",
    "optimal_rule_limit", "parse_rule_spec", "phi_opt", "posterior_mean",
    "precision_ratio", "predicted_error", "run_global_trajectory", "run_local_trajectory",
]
