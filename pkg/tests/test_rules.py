from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from bornlab.errors import DimensionError, InvariantError, RuleSpecError, ZeroDenominatorError
from bornlab.errors import ConstraintError, DSLSyntaxError
from bornlab.linalg import OrthonormalBasis, apply, standard_basis
from bornlab.ruledsl import compile_g
from bornlab.rules import (
    BornRule,
    MaxOverlapRule,
    PreskillRule,
    RuleContext,
    born_evaluate,
    max_overlap_distribution,
    parse_rule,
    preskill_evaluate,
)

from conftest import SQ2, ray, scenarios

THIRD = ray(1, 1, 1)
ROTATED = OrthonormalBasis((ray(1, 0, 0), ray(0, 1, 1), ray(0, 1, -1)))


def ctx(basis, i=0):
    return RuleContext(basis, i)


class TestBorn:
    def test_examples(self):
        b = OrthonormalBasis((ray(1, 1), ray(1, -1)))
        assert born_evaluate(b[0], ctx(b)) == pytest.approx(1, abs=1e-15)
        assert born_evaluate(b[1], ctx(b)) == pytest.approx(0, abs=1e-15)
        assert born_evaluate(ray(1, 0), ctx(b)) == pytest.approx(0.5, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            born_evaluate(ray(1, 0), ctx(standard_basis(3)))

    def test_outcome_range(self):
        with pytest.raises(InvariantError):
            ctx(standard_basis(2), 2)

    @given(scenarios())
    def test_parseval(self, s):
        psi, basis, _, _ = s
        assert abs(BornRule().distribution(psi, basis).sum() - 1) < 1e-10


class TestPreskill:
    @given(scenarios())
    def test_square_is_born(self, s):
        psi, basis, _, i = s
        g = compile_g("x^2")
        assert abs(preskill_evaluate(g, psi, ctx(basis, i)) - born_evaluate(psi, ctx(basis, i))) < 1e-12

    def test_linear_g_standard_basis(self):
        assert preskill_evaluate(compile_g("x"), THIRD, ctx(standard_basis(3))) == pytest.approx(1 / 3, abs=1e-15)

    def test_linear_g_rotated_basis(self):
        p = preskill_evaluate(compile_g("x"), THIRD, ctx(ROTATED))
        assert p == pytest.approx(1 / (1 + SQ2), abs=1e-15)

    def test_zero_denominator_is_an_error(self):
        rule = PreskillRule(compile_g("max(x - 0.9, 0)"))
        with pytest.raises(ZeroDenominatorError):
            rule.distribution(THIRD, standard_basis(3))

    @given(scenarios())
    def test_distribution_sums_to_one(self, s):
        psi, basis, _, _ = s
        assert abs(PreskillRule(compile_g("x")).distribution(psi, basis).sum() - 1) < 1e-10

    @given(scenarios())
    def test_unitary_covariance(self, s):
        psi, basis, u, i = s
        rule = PreskillRule(compile_g("sqrt(x)"))
        moved = OrthonormalBasis.from_matrix(u.entries @ basis.matrix)
        assert abs(rule.evaluate(psi, ctx(basis, i)) - rule.evaluate(apply(u, psi), ctx(moved, i))) < 1e-10

    def test_declares_context_dependence(self):
        rule = PreskillRule(compile_g("x"))
        assert not rule.claims_context_free and rule.claims_continuous


class TestMaxOverlap:
    def test_self_transition(self):
        b = standard_basis(3)
        assert max_overlap_distribution(b[1], b) == [0, 1, 0]

    def test_even_split_on_tie(self):
        assert max_overlap_distribution(ray(1, 1), standard_basis(2)) == [Fraction(1, 2)] * 2

    def test_strict_maximum(self):
        psi = ray(np.sqrt(0.6), np.sqrt(0.4))
        assert max_overlap_distribution(psi, standard_basis(2)) == [1, 0]

    def test_three_way_tie_is_exact(self):
        dist = max_overlap_distribution(THIRD, standard_basis(3))
        assert dist == [Fraction(1, 3)] * 3 and sum(dist) == 1

    def test_tie_epsilon_widens_ties(self):
        psi = ray(1, 1 - 1e-6)
        assert max_overlap_distribution(psi, standard_basis(2)) == [1, 0]
        assert max_overlap_distribution(psi, standard_basis(2), 1e-5) == [Fraction(1, 2)] * 2

    @given(scenarios())
    def test_sums_to_exactly_one(self, s):
        psi, basis, _, _ = s
        assert sum(max_overlap_distribution(psi, basis)) == 1

    @given(scenarios())
    def test_delta_on_basis_members(self, s):
        _, basis, _, i = s
        dist = MaxOverlapRule().distribution(basis[i], basis)
        assert dist[i] == 1 and dist.sum() == 1

    def test_claims(self):
        r = MaxOverlapRule()
        assert not r.claims_continuous and not r.claims_context_free


class TestSelfTestRules:
    @given(scenarios())
    def test_consistent_but_wrong(self, s):
        psi, basis, _, i = s
        for spec in ("first-coordinate", "n-scaled"):
            rule = parse_rule(spec)
            assert abs(rule.distribution(psi, basis).sum() - 1) < 1e-10
            assert abs(rule.distribution(basis[i], basis)[i] - 1) < 1e-10
            assert rule.claims_context_free and rule.claims_continuous

    def test_first_coordinate_breaks_under_a_permutation(self):
        rule = parse_rule("first-coordinate")
        # swapping the coordinates of psi and of every basis vector is unitary
        b = OrthonormalBasis((ray(1, 0), ray(0, 1)))
        flipped = OrthonormalBasis((ray(0, 1), ray(1, 0)))
        p = rule.evaluate(ray(1, 2), ctx(b))
        q = rule.evaluate(ray(2, 1), ctx(flipped, 0))
        assert abs(p - q) > 0.05

    def test_n_scaled_changes_with_padding(self):
        rule = parse_rule("n-scaled")
        small = rule.evaluate(ray(1, 2), ctx(standard_basis(2)))
        big = rule.evaluate(ray(1, 2, 0), ctx(standard_basis(3)))
        assert abs(small - big) > 1e-3


class TestParseRule:
    def test_specs(self):
        assert parse_rule("born").identifier == "born"
        assert parse_rule("preskill:g=x^2").identifier == "preskill:g=x^2"
        assert parse_rule("preskill:g= x * x ").identifier == "preskill:g=x * x"
        assert parse_rule("maxoverlap").tie_epsilon == 1e-9
        assert parse_rule("maxoverlap:tie_epsilon=0.001").tie_epsilon == 0.001

    def test_round_trip_through_spec(self):
        for spec in ("born", "preskill:g=min(x, 0.5)", "maxoverlap:tie_epsilon=1e-06", "n-scaled"):
            rule = parse_rule(spec)
            assert parse_rule(rule.identifier).identifier == rule.identifier

    @pytest.mark.parametrize("spec", ["bogus", "born:1", "preskill:x", "maxoverlap:eps=1", "maxoverlap:tie_epsilon=a"])
    def test_bad_specs(self, spec):
        with pytest.raises(RuleSpecError):
            parse_rule(spec)

    def test_dsl_errors_pass_through(self):
        with pytest.raises(ConstraintError):
            parse_rule("preskill:g=x+0.1")
        with pytest.raises(DSLSyntaxError):
            parse_rule("preskill:g=x*(1-x")
