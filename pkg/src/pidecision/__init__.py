"""Discrete decisions under partial identification.

Maximum risk is averaged over posterior, quasi-posterior or bootstrap draws
of the point-identified parameter, and the choice with the smallest average
is selected. Applications: treatment assignment from intersection bounds and
pricing from revealed-preference demand bounds.
"""
from .core import (
    LOWEST_INDEX, ChoiceSet, DecisionError, DecisionReport, DrawSet, ReducedForm, RiskEvaluationError,
    RiskProfile, TieRule, averaged_decision, excess_risk, oracle_decision, plugin_decision,
)
from .posterior import (
    BootstrapPlan, GaussianQuasiPosterior, MultinomialPosterior, bootstrap, sample_dirichlet, sample_gaussian,
)

__version__ = "0.1.0"

__all__ = [
    "LOWEST_INDEX", "ChoiceSet", "DecisionError", "DecisionReport", "DrawSet", "ReducedForm",
    "RiskEvaluationError", "RiskProfile", "TieRule", "averaged_decision", "excess_risk", "oracle_decision",
    "plugin_decision", "BootstrapPlan", "GaussianQuasiPosterior", "MultinomialPosterior", "bootstrap",
    "sample_dirichlet", "sample_gaussian",
]
