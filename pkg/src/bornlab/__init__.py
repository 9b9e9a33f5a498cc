"""Numerical toolkit for testing probability rules for quantum measurements."""

__version__ = "0.1.0"

from .linalg import POVM, DensityMatrix, Effect, OrthonormalBasis, Ray, Unitary, inner_product, tensor
from .rules import BornRule, MaxOverlapRule, PreskillRule, ProbabilityRule, RuleContext, parse_rule
from .sampling import SeededRng

__all__ = [
    "POVM",
    "DensityMatrix",
    "Effect",
    "OrthonormalBasis",
    "Ray",
    "Unitary",
    "inner_product",
    "tensor",
    "BornRule",
    "MaxOverlapRule",
    "PreskillRule",
    "ProbabilityRule",
    "RuleContext",
    "parse_rule",
    "SeededRng",
]
