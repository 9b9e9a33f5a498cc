"""Transition-probability rules P_N(psi -> Phi_i | {Phi_j}).

Every rule exposes a distribution over a whole basis; single-outcome
evaluation reads one entry of it. Context-dependent rules are only coherent
per basis, so this is the primitive.

Rule identifiers (used by the CLI)::

    born
    preskill:g=<expr>
    maxoverlap[:tie_epsilon=<float>]
    first-coordinate        # deliberately broken, harness self-test
    n-scaled                # deliberately broken, harness self-test
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .config import tolerances
from .errors import DimensionError, InvariantError, RuleSpecError, ZeroDenominatorError
from .linalg import OrthonormalBasis, Ray, overlaps
from .ruledsl import GFunction, compile_g

__all__ = [
    "RuleContext",
    "ProbabilityRule",
    "BornRule",
    "PreskillRule",
    "MaxOverlapRule",
    "FirstCoordinateRule",
    "NScaledRule",
    "born_evaluate",
    "preskill_evaluate",
    "max_overlap_distribution",
    "parse_rule",
    "BUILTIN_RULES",
]


@dataclass(frozen=True)
class RuleContext:
    basis: OrthonormalBasis
    outcome_index: int

    def __post_init__(self):
        if not 0 <= self.outcome_index < self.basis.dim:
            raise InvariantError(f"outcome index {self.outcome_index} out of range for dim {self.basis.dim}")


def _check_dims(psi: Ray, basis: OrthonormalBasis) -> None:
    if psi.dim != basis.dim:
        raise DimensionError(f"state has dim {psi.dim} but basis has dim {basis.dim}")


class ProbabilityRule:
    """Base class. Subclasses implement :meth:`distribution`.

    ``claims_context_free`` and ``claims_continuous`` are declarations the
    harness uses to tell violations from advertised behaviour.
    """

    name = "rule"
    claims_context_free = True
    claims_continuous = True

    @property
    def identifier(self) -> str:
        return self.name

    def distribution(self, psi: Ray, basis: OrthonormalBasis) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, psi: Ray, context: RuleContext) -> float:
        return float(self.distribution(psi, context.basis)[context.outcome_index])

    def describe(self) -> dict:
        return {
            "rule": self.identifier,
            "claims_context_free": self.claims_context_free,
            "claims_continuous": self.claims_continuous,
        }

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.identifier}>"


class BornRule(ProbabilityRule):
    name = "born"

    def distribution(self, psi, basis):
        _check_dims(psi, basis)
        return overlaps(psi, basis) ** 2


class PreskillRule(ProbabilityRule):
    """P_i = g(|<psi|Phi_i>|) / sum_j g(|<psi|Phi_j>|)."""

    name = "preskill"
    claims_context_free = False

    def __init__(self, g: GFunction):
        self.g = g

    @property
    def identifier(self) -> str:
        return f"preskill:g={self.g.canonical}"

    def distribution(self, psi, basis):
        _check_dims(psi, basis)
        weights = np.asarray(self.g(overlaps(psi, basis)), dtype=float)
        total = weights.sum()
        if total < tolerances().zero_denominator:
            raise ZeroDenominatorError(
                f"sum of g over the basis is {total!r}; g vanishes on a positive overlap"
            )
        return weights / total


class MaxOverlapRule(ProbabilityRule):
    """All weight on the largest |overlap|, split evenly over near-ties."""

    name = "maxoverlap"
    claims_context_free = False
    claims_continuous = False

    def __init__(self, tie_epsilon: float | None = None):
        self.tie_epsilon = tolerances().tie_epsilon if tie_epsilon is None else float(tie_epsilon)
        if self.tie_epsilon < 0:
            raise ValueError("tie_epsilon must be >= 0")

    @property
    def identifier(self) -> str:
        return f"maxoverlap:tie_epsilon={self.tie_epsilon!r}"

    def distribution(self, psi, basis):
        return np.array([float(p) for p in max_overlap_distribution(psi, basis, self.tie_epsilon)])


class FirstCoordinateRule(ProbabilityRule):
    """Self-test rule: Born weights tilted by |(Phi_i)_1|^2, renormalised.

    Still consistent (sums to one, delta on basis states) but depends on the
    standard basis, so unitary invariance fails. It claims otherwise.
    """

    name = "first-coordinate"

    def distribution(self, psi, basis):
        _check_dims(psi, basis)
        tilt = 1.0 + np.abs(basis.matrix[0, :]) ** 2
        w = overlaps(psi, basis) ** 2 * tilt
        return w / w.sum()


class NScaledRule(ProbabilityRule):
    """Self-test rule: Born weighted N/(N+1), the x^4 Preskill rule the rest.

    Consistent and unitarily invariant, but the mixing weight moves with N,
    so the probabilities change under zero-padding. It claims otherwise.
    """

    name = "n-scaled"

    def distribution(self, psi, basis):
        _check_dims(psi, basis)
        n = basis.dim
        ov = overlaps(psi, basis)
        born = ov**2
        quartic = ov**4 / np.sum(ov**4)
        return (n / (n + 1)) * born + (1 / (n + 1)) * quartic


BUILTIN_RULES = {
    "born": BornRule,
    "preskill": PreskillRule,
    "maxoverlap": MaxOverlapRule,
    "first-coordinate": FirstCoordinateRule,
    "n-scaled": NScaledRule,
}


def born_evaluate(psi: Ray, context: RuleContext) -> float:
    return BornRule().evaluate(psi, context)


def preskill_evaluate(g: GFunction, psi: Ray, context: RuleContext) -> float:
    return PreskillRule(g).evaluate(psi, context)


def max_overlap_distribution(psi: Ray, basis: OrthonormalBasis, tie_epsilon: float = 1e-9) -> list[Fraction]:
    """Exact distribution: 1/|T| on the tie set T, 0 elsewhere.

    T = {i : |<psi|Phi_i>| >= max_j |<psi|Phi_j>| - tie_epsilon}.
    """
    _check_dims(psi, basis)
    if tie_epsilon < 0:
        raise ValueError("tie_epsilon must be >= 0")
    ov = overlaps(psi, basis)
    ties = ov >= ov.max() - tie_epsilon
    share = Fraction(1, int(ties.sum()))
    return [share if t else Fraction(0) for t in ties]


def parse_rule(spec: str) -> ProbabilityRule:
    """Build a rule from its CLI identifier. DSL errors propagate unchanged."""
    spec = spec.strip()
    head, _, tail = spec.partition(":")
    head = head.strip()
    if head == "born" and not tail:
        return BornRule()
    if head == "preskill":
        key, eq, source = tail.partition("=")
        if key.strip() != "g" or not eq:
            raise RuleSpecError("expected preskill:g=<expression>")
        return PreskillRule(compile_g(source))
    if head == "maxoverlap":
        if not tail:
            return MaxOverlapRule()
        key, eq, value = tail.partition("=")
        if key.strip() != "tie_epsilon" or not eq:
            raise RuleSpecError("expected maxoverlap[:tie_epsilon=<float>]")
        try:
            return MaxOverlapRule(float(value))
        except ValueError as exc:
            raise RuleSpecError(f"bad tie_epsilon {value!r}: {exc}") from None
    if head == "first-coordinate" and not tail:
        return FirstCoordinateRule()
    if head == "n-scaled" and not tail:
        return NScaledRule()
    raise RuleSpecError(f"unknown rule {spec!r}; known: {', '.join(BUILTIN_RULES)}")
