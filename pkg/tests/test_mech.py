import itertools
from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import dutch_price, myerson_revenue, second_price_revenue
from shillproof.dist import AtomGrid, MarginalDist, is_regular, optimal_reserve_index
from shillproof.mech import (
    AllocationRule,
    Mechanism,
    PriorityOrder,
    TransferRule,
    bid_fn,
    bid_fn_closed_form,
    envelope_violation,
    expected_revenue,
    make_mechanism,
    pay_as_bid_violation,
    validate,
)
from shillproof.suite import affiliated_variant
from shillproof.valfn import ValueFunction

U3 = MarginalDist.uniform(range(3))


def regular_iid(draw_weights):
    total = sum(draw_weights)
    return MarginalDist(AtomGrid.of(range(len(draw_weights))), tuple(Fraction(w, total) for w in draw_weights))


regular_marginals = (
    st.lists(st.integers(1, 6), min_size=3, max_size=4).map(regular_iid).filter(is_regular)
)


class TestPriority:
    def test_permutation_required(self):
        with pytest.raises(ValueError):
            PriorityOrder((0, 0))

    def test_ties_go_to_priority(self):
        alloc = AllocationRule(0, PriorityOrder((1, 0)))
        assert alloc.winner((2, 2)) == 1
        assert AllocationRule(0, PriorityOrder.natural(2)).winner((2, 2)) == 0

    def test_reserve_blocks_sale(self):
        assert AllocationRule(2, PriorityOrder.natural(2)).winner((1, 1)) is None

    def test_min_winning_type(self):
        alloc = AllocationRule(1, PriorityOrder.natural(2))
        # Bidder 1 must strictly beat bidder 0 at type 1.
        assert alloc.min_winning_type(1, (1, 0), 3) == 2
        assert alloc.min_winning_type(0, (0, 1), 3) == 1


class TestTransferRules:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            TransferRule("vickrey")

    def test_uniform_revenue_split(self):
        prior = U3.iid(2)
        assert expected_revenue(make_mechanism(prior, 1, "pab-optimal")) == Fraction(10, 9)
        assert expected_revenue(make_mechanism(prior, 1, "second-price")) == 1

    def test_dutch_price_hand_value(self):
        m = make_mechanism(U3.iid(2), 1)
        assert m.outcome((1, 2)).transfers == (0, Fraction(3, 2))

    @given(regular_marginals, st.integers(2, 3))
    def test_optimal_revenue_matches_myerson(self, d, n):
        r = optimal_reserve_index(d)
        m = make_mechanism(d.iid(n), r)
        assert expected_revenue(m) == myerson_revenue(d.atoms, d.pmf, n)

    @given(regular_marginals, st.integers(2, 3))
    def test_threshold_is_revenue_equivalent(self, d, n):
        r = optimal_reserve_index(d)
        p = d.iid(n)
        assert expected_revenue(make_mechanism(p, r, "threshold")) == expected_revenue(make_mechanism(p, r))

    @given(regular_marginals, st.integers(2, 3))
    def test_second_price_matches_oracle(self, d, n):
        r = optimal_reserve_index(d)
        assert expected_revenue(make_mechanism(d.iid(n), r, "second-price")) == second_price_revenue(d.atoms, d.pmf, n, r)

    @given(regular_marginals, st.integers(2, 3), st.data())
    def test_pay_as_bid_price_matches_envelope_oracle(self, d, n, data):
        r = optimal_reserve_index(d)
        i = data.draw(st.integers(0, n - 1))
        k = data.draw(st.integers(r, d.M - 1))
        m = make_mechanism(d.iid(n), r)
        assert bid_fn(m.alloc, m.prior, i, k) == dutch_price(d.atoms, d.pmf, n, i, k, r)

    def test_printed_closed_form_is_not_the_price(self):
        # Read literally, the published exponents give 0 for the top-priority bidder at N=2;
        # the exact price (confirmed by the envelope oracle) is 1/2 at type 1.
        d = MarginalDist.uniform(range(3))
        m = make_mechanism(d.iid(2), 0)
        assert bid_fn(m.alloc, m.prior, 0, 1) == Fraction(1, 2) == dutch_price(d.atoms, d.pmf, 2, 0, 1, 0)
        assert bid_fn_closed_form(d, 2, 0, 1) == 0
        assert bid_fn_closed_form(d, 2, 1, 1) is None

    def test_shill_revenue_excludes_shills(self):
        m = make_mechanism(U3.iid(2), 1, "second-price")
        # Shill 1 pinned to 0: bidder 0 pays the reserve 1 at types 1 and 2.
        assert expected_revenue(m, shills=[1]) == Fraction(2, 3)
        assert expected_revenue(m, shills=[0, 1]) == 0


class TestValidators:
    @given(regular_marginals, st.integers(2, 3))
    def test_optimal_rule_properties(self, d, n):
        r = optimal_reserve_index(d)
        rep = validate(make_mechanism(d.iid(n), r))
        for name in ("ic", "ex_post_ir", "winner_paying", "monotone", "orderly", "pay_as_bid"):
            assert rep[name], name
        assert envelope_violation(make_mechanism(d.iid(n), r)) is None

    @given(regular_marginals, st.integers(2, 3))
    def test_second_price_properties(self, d, n):
        r = optimal_reserve_index(d)
        assume(r <= d.M - 2)
        rep = validate(make_mechanism(d.iid(n), r, "second-price"))
        assert rep["ex_post_ic"] and rep["ic"]
        assert not rep["pay_as_bid"]

    def test_pay_as_bid_witness(self):
        w = pay_as_bid_violation(make_mechanism(U3.iid(2), 1, "second-price"))
        assert w is not None and w["bidder"] in (0, 1)

    def test_affiliated_prior_keeps_ic(self):
        p = affiliated_variant(U3, 2)
        rep = validate(make_mechanism(p, 1))
        assert rep["ic"] and rep["pay_as_bid"]

    def test_table_transfers_that_overcharge_fail_ir(self):
        prior = U3.iid(2)
        alloc = AllocationRule(0, PriorityOrder.natural(2))
        table = {}
        for prof in itertools.product(range(3), repeat=2):
            w = alloc.winner(prof)
            t = [Fraction(0), Fraction(0)]
            if w is not None:
                t[w] = Fraction(5)
            table[prof] = tuple(t)
        m = Mechanism(alloc, TransferRule("table", table=table), prior)
        rep = validate(m)
        assert not rep["ex_post_ir"]
        assert rep.checks["ex_post_ir"].witness is not None

    def test_interdependent_revenue_is_exact(self):
        p = U3.iid(2)
        m = make_mechanism(p, 1, valfn=ValueFunction.additive("1/2"))
        rev = expected_revenue(m)
        assert isinstance(rev, Fraction) and rev > expected_revenue(make_mechanism(p, 1))


@pytest.mark.parametrize("n", [2, 3])
def test_every_profile_has_one_or_no_winner(n):
    m = make_mechanism(U3.iid(n), 1)
    for prof in itertools.product(range(3), repeat=n):
        o = m.outcome(prof)
        assert sum(1 for t in o.transfers if t) <= 1
        if o.winner is None:
            assert max(prof) < 1
