"""
Causal calculus: probability expressions, latent projection, do-calculus
rules and effect identification.
"""

from cmdesign.calculus.expr import P, ProbExpr, evaluate_expr, to_text
from cmdesign.calculus.identify import Identifiable, NotIdentifiable, identify, identify_effect
from cmdesign.calculus.latent import LatentGraph, latent_project
from cmdesign.calculus.rules import backdoor_admissible, frontdoor_admissible, rule_applicable

__all__ = [
    "P",
    "ProbExpr",
    "evaluate_expr",
    "to_text",
    "Identifiable",
    "NotIdentifiable",
    "identify",
    "identify_effect",
    "LatentGraph",
    "latent_project",
    "backdoor_admissible",
    "frontdoor_admissible",
    "rule_applicable",
]
