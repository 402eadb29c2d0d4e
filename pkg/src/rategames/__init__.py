"""Constrained training of linear classifiers under generalized rate metrics.

Three-player Lagrangian games over model parameters, slack variables, and
multipliers: oracle- and surrogate-based optimizers for convex functions of
classification rates, two heuristics for sum-of-ratios constraints, and a
shrinking LP that turns training traces into sparse stochastic classifiers.
"""

from .data import (ColumnSchema, Dataset, Example, GroupwiseModel, LinearModel,
                   RateDefinition, StochasticModel, evaluate_rate,
                   evaluate_rate_vector, load_tabular_dataset,
                   minibatch_rate_estimate, split_dataset, standardize_splits,
                   stochastic_rates)
from .metrics import (ConstraintSpec, LinearRateConstraint, MetricSpec,
                      RatioTerm, SumOfRatiosSpec, best_response_xi,
                      build_metric, compile_parity_constraint, concat_metrics,
                      constraint_from_metric, psi_grad)
from .surrogates import SurrogateRate, surrogate_subgrad, surrogate_value
from .projections import (project_box, project_l2_ball,
                          project_nonneg_l1_ball)
from .cso import CsoOracle, enumeration_oracle, plugin_oracle
from .games import (OgdConfig, ProblemSpec, Trace, TraceSnapshot, kappa_preset,
                    run_biconvex, run_oracle_game, run_slack_ratios,
                    run_spade_plus, run_surrogate_game)
from .shrinking import (ShrinkProblem, ShrinkResult, best_iterate, shrink,
                        solve_lp_simplex, uniform_mixture)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
