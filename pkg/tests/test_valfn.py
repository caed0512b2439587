from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shillproof.dist import AtomGrid, MarginalDist, Unreachable
from shillproof.mech import AllocationRule, PriorityOrder
from shillproof.valfn import (
    ValueFunction,
    check_interdep,
    conditional_value,
    cross_differences,
    emit_valfn,
    more_commonly_valued,
    parse_valfn,
)

G3 = AtomGrid.of([0, 1, 2])
G4 = AtomGrid.of([0, 1, 3, 4])


class TestValues:
    def test_private(self):
        assert ValueFunction.private().value(G3, 2, [1]) == 2

    def test_additive(self):
        v = ValueFunction.additive("1/2")
        assert v.value(G3, 1, [2, 2]) == 3

    def test_max_common(self):
        assert ValueFunction.max_common().value(G3, 0, [2]) == 2

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ValueFunction("median")

    def test_asymmetric_table_rejected(self):
        with pytest.raises(ValueError, match="sorted"):
            ValueFunction("table", table={(0, (2, 1)): 1})

    def test_at_uses_profile_slot(self):
        v = ValueFunction.additive(1)
        assert v.at(G3, (1, 2, 0), 1) == 3

    def test_kappa_zero_is_private(self):
        assert ValueFunction.additive(0).is_private


class TestInterdependence:
    @pytest.mark.parametrize("v", [ValueFunction.private(), ValueFunction.additive("1/2"), ValueFunction.max_common()])
    @pytest.mark.parametrize("grid", [G3, G4])
    @pytest.mark.parametrize("n", [2, 3])
    def test_catalog_functions_satisfy_conditions(self, v, grid, n):
        verdict = check_interdep(v, grid, n)
        assert verdict.holds, verdict.failing()

    def test_broken_normalization_is_witnessed(self):
        table = {(k, (j,)): G3[k] + 1 for k in range(3) for j in range(3)}
        verdict = check_interdep(ValueFunction("table", table=table), G3, 2)
        assert "normalization" in verdict.failing()
        assert verdict.conditions["normalization"][1] == (0, (0,))

    def test_decreasing_in_others_is_witnessed(self):
        table = {(k, (j,)): G3[k] + 2 - G3[j] if j else G3[k] for k in range(3) for j in range(3)}
        verdict = check_interdep(ValueFunction("table", table=table), G3, 2)
        assert "increasing_in_others" in verdict.failing()


class TestCommonality:
    @given(st.fractions(0, 1), st.fractions(0, 1))
    def test_additive_ordered_by_kappa(self, a, b):
        lo, hi = sorted((a, b))
        assert more_commonly_valued(ValueFunction.additive(hi), ValueFunction.additive(lo), G3, 2)

    def test_private_not_more_common_than_additive(self):
        assert not more_commonly_valued(ValueFunction.private(), ValueFunction.additive("1/2"), G3, 2)

    def test_max_common_dominates_private(self):
        assert more_commonly_valued(ValueFunction.max_common(), ValueFunction.private(), G4, 3)

    def test_cross_differences_vanish_for_linear(self):
        assert set(cross_differences(ValueFunction.additive("1/3"), G4, 2).values()) <= {0}


class TestConditionalValue:
    def setup_method(self):
        self.prior = MarginalDist.uniform(range(3)).iid(2)
        self.winner = AllocationRule(1, PriorityOrder.natural(2)).winner

    def test_private_value_is_own_atom(self):
        sets = ((0, 1, 2), (0, 1, 2))
        assert conditional_value(ValueFunction.private(), self.prior, self.winner, 0, 2, 2, sets) == 2

    def test_additive_averages_over_losers(self):
        # Bidder 0 at type 2 beats every opponent (0, 1 or 2): E[2 + θ_1/2] = 2 + 1/2.
        sets = ((0, 1, 2), (0, 1, 2))
        v = ValueFunction.additive("1/2")
        assert conditional_value(v, self.prior, self.winner, 0, 2, 2, sets) == Fraction(5, 2)

    def test_acted_versus_true(self):
        sets = ((0, 1, 2), (0, 1, 2))
        v = ValueFunction.additive("1/2")
        acted = conditional_value(v, self.prior, self.winner, 1, 2, 1, sets, evaluate="acted")
        true = conditional_value(v, self.prior, self.winner, 1, 2, 1, sets, evaluate="true")
        assert acted - true == 1

    def test_never_wins(self):
        with pytest.raises(Unreachable):
            conditional_value(ValueFunction.private(), self.prior, self.winner, 0, 0, 0, ((0, 1, 2), (0, 1, 2)))


class TestSerialization:
    @pytest.mark.parametrize("v", [ValueFunction.private(), ValueFunction.additive("2/3"), ValueFunction.max_common()])
    def test_round_trip(self, v):
        assert parse_valfn(emit_valfn(v)) == v

    def test_table_round_trip(self):
        table = {(k, (j,)): G3[k] + G3[j] for k in range(3) for j in range(3)}
        v = ValueFunction("table", table=table)
        assert parse_valfn(emit_valfn(v, G3), G3) == v

    def test_table_needs_grid(self):
        with pytest.raises(ValueError):
            parse_valfn({"kind": "table", "table": {"0|0": 0}})
