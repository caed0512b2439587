from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import brute_force_shill_gap
from shillproof.auctions import (
    custom,
    dutch,
    english,
    first_price_sealed,
    hybrid,
    screening,
    second_price_sealed,
)
from shillproof.dist import AtomGrid, MarginalDist, is_regular, optimal_reserve_index
from shillproof.engine import (
    SizeCapExceeded,
    credibility_check,
    reachable_nodes,
    replay_strong,
    replay_weak,
    state_cap,
    strong_sp_all,
    strong_sp_check,
    trace,
    validate_menu,
    weak_sp_all,
    weak_sp_check,
    weak_witness_nodes,
)
from shillproof.mech import expected_revenue
from shillproof.suite import affiliated_variant, example_distributions

U3 = MarginalDist.uniform(range(3))


def weights(ws):
    t = sum(ws)
    return MarginalDist(AtomGrid.of(range(len(ws))), tuple(Fraction(w, t) for w in ws))


regular = st.lists(st.integers(1, 6), min_size=3, max_size=4).map(weights).filter(is_regular)
any_dist = st.lists(st.integers(1, 6), min_size=3, max_size=4).map(weights)
BUILDERS = {
    "dutch": lambda p, r: dutch(p, r),
    "english": lambda p, r: english(p, r),
    "english-threshold": lambda p, r: english(p, r, transfer="threshold"),
    "fp-sealed": lambda p, r: first_price_sealed(p, r),
    "fp-public": lambda p, r: first_price_sealed(p, r, public=True),
    "sp-sealed": lambda p, r: second_price_sealed(p, r),
}


class TestEnglishWitness:
    def test_gap_and_revenues(self):
        a = english(U3.iid(2), 1)
        v = strong_sp_all(a)
        assert not v.holds and v.gap == 1
        w = v.witness
        assert (w["deviation_revenue"], w["truthful_revenue"]) == (2, 1)
        assert w["profile"] == [2, 0] and w["shills"] == [1]

    def test_replay(self):
        a = english(U3.iid(2), 1)
        v = strong_sp_all(a)
        assert replay_strong(a, v.witness) == v.gap

    def test_trace_of_truthful_play(self):
        t = trace(english(U3.iid(2), 1), (2, 0), [1])
        assert t.winner == 0 and t.revenue([0]) == 1
        assert all(not s.shill or 0 in s.chosen for s in t.steps)


class TestDutch:
    @given(any_dist, st.integers(2, 3))
    def test_strongly_sp_at_every_reserve(self, d, n):
        for r in range(optimal_reserve_index(d) + 1):
            assert strong_sp_all(dutch(d.iid(n), r)).holds

    def test_affiliated(self):
        assert strong_sp_all(dutch(affiliated_variant(U3, 3), 1)).holds


class TestWeak:
    def test_second_price_sealed_gap(self):
        # After bidder 0 reports the top type, a shill tie at the top makes her pay 2 instead of 1.
        v = weak_sp_all(second_price_sealed(U3.iid(2), 1))
        assert not v.holds and v.gap == Fraction(1, 3)
        assert v.witness["deviations"] == [{"state": [[2], [0, 1, 2]], "mover": 1, "cell": [2]}]

    def test_hybrid_f2_gap_frozen(self):
        _, F2 = example_distributions()
        a = hybrid(F2.iid(2))
        v = weak_sp_check(a, [1])
        assert abs(float(v.gap) - 1.2396276497) < 1e-9
        assert replay_weak(a, v.witness) == v.gap

    def test_literal_english_tie_gap_by_enumeration(self):
        a = english(U3.iid(3), 1)
        assert weak_sp_check(a, [2]).gap == brute_force_shill_gap(a, [2]) == Fraction(1, 9)

    def test_irregular_english_gap_by_enumeration(self):
        d = weights([1, 4, 1, 3])
        a = english(d.iid(2), optimal_reserve_index(d))
        gap = weak_sp_all(a).gap
        assert gap == Fraction(1, 9)
        assert max(brute_force_shill_gap(a, [s]) for s in (0, 1)) == gap

    def test_hybrid_f1_holds(self):
        F1, _ = example_distributions()
        assert weak_sp_all(hybrid(F1.iid(2))).holds

    def test_all_shills_earn_nothing(self):
        v = weak_sp_check(english(U3.iid(2), 1), [0, 1])
        assert v.holds and v.detail["best"] == 0

    def test_zero_play_value_is_shill_revenue(self):
        a = dutch(U3.iid(2), 1)
        v = weak_sp_check(a, [1])
        assert v.detail["zero"] == expected_revenue(a.mech, shills=[1])

    def test_unknown_shill_prior(self):
        with pytest.raises(ValueError):
            weak_sp_check(dutch(U3.iid(2), 1), [1], shill_prior="psychic")

    def test_priors_agree_on_products(self):
        a = english(U3.iid(3), 1)
        c = weak_sp_check(a, [2], shill_prior="conditioned")
        m = weak_sp_check(a, [2], shill_prior="marginal")
        assert c.gap == m.gap

    def test_witness_nodes_end_in_revenues(self):
        _, F2 = example_distributions()
        a = hybrid(F2.iid(2))
        v = weak_sp_check(a, [1])
        nodes = weak_witness_nodes(a, v.witness)
        assert any(n.get("deviates") for n in nodes)
        ends = [n for n in nodes if n.get("terminal")]
        assert ends and all("revenue" in n for n in ends)
        assert sum(n["prob"] for n in ends) == 1


class TestProperties:
    @given(any_dist, st.sampled_from(sorted(BUILDERS)))
    def test_strong_implies_weak(self, d, name):
        a = BUILDERS[name](d.iid(2), optimal_reserve_index(d))
        if strong_sp_all(a).holds:
            assert weak_sp_all(a).holds

    @given(any_dist, st.sampled_from(sorted(BUILDERS)), st.integers(0, 1))
    def test_weak_gap_is_never_negative(self, d, name, s):
        a = BUILDERS[name](d.iid(2), optimal_reserve_index(d))
        assert weak_sp_check(a, [s]).gap >= 0

    @given(any_dist, st.sampled_from(sorted(BUILDERS)))
    def test_witnesses_replay_exactly(self, d, name):
        a = BUILDERS[name](d.iid(2), optimal_reserve_index(d))
        s = strong_sp_all(a)
        if not s.holds:
            assert replay_strong(a, s.witness) == s.gap
        w = weak_sp_all(a)
        if not w.holds:
            assert replay_weak(a, w.witness) == w.gap

    @settings(max_examples=15)
    @given(st.lists(st.integers(1, 6), min_size=3, max_size=3).map(weights), st.sampled_from(sorted(BUILDERS)), st.integers(0, 1))
    def test_solver_matches_policy_enumeration(self, d, name, s):
        a = BUILDERS[name](d.iid(2), optimal_reserve_index(d))
        brute = brute_force_shill_gap(a, [s])
        assume(brute is not None)
        assert weak_sp_check(a, [s]).gap == brute

    @given(regular, st.sampled_from(sorted(BUILDERS)))
    def test_catalog_menus_valid(self, d, name):
        assert validate_menu(BUILDERS[name](d.iid(2), optimal_reserve_index(d))).holds

    @given(any_dist)
    def test_strong_check_ignores_shill_coordinates(self, d):
        a = english(d.iid(2), optimal_reserve_index(d))
        for k in range(d.M):
            assert strong_sp_check(a, [1], (d.M - 1, k)).gap == strong_sp_check(a, [1], (d.M - 1, 0)).gap


class TestMenuValidator:
    def test_single_cell_menu_caught(self):
        table = {(((0, 1, 2), (0, 1, 2)), 0): [((0, 1, 2), None)]}
        v = validate_menu(custom(U3.iid(2), 1, table, 0))
        assert not v.holds and v.witness["failure"] == "single-cell menu"

    def test_terminal_variation_caught(self):
        table = {(((0, 1, 2), (0, 1, 2)), 0): [((0,), None), ((1, 2), None)]}
        v = validate_menu(custom(U3.iid(2), 1, table, 0))
        assert not v.holds and v.witness["failure"] == "terminal outcome varies"

    def test_uninformative_split_caught(self):
        # Below the reserve 2 the types 0 and 1 of bidder 1 lead to the same outcomes.
        root = ((0, 1, 2), (0, 1, 2))
        table = {(root, 1): [((0,), 0), ((1,), 0), ((2,), 0)]}
        for k in range(3):
            table[(((0, 1, 2), (k,)), 0)] = [((0, 1), None), ((2,), None)]
        v = validate_menu(custom(U3.iid(2), 2, table, 1))
        assert not v.holds
        assert v.witness["failure"] == "uninformative" and v.witness["cells"] == [[0], [1]]

    def test_partition_caught(self):
        table = {(((0, 1, 2), (0, 1, 2)), 0): [((0,), None), ((2,), None)]}
        v = validate_menu(custom(U3.iid(2), 1, table, 0))
        assert not v.holds and v.witness["failure"] == "partition"


class TestCredibility:
    def test_static_first_price_credible(self):
        assert credibility_check(first_price_sealed(U3.iid(2), 1)).holds

    def test_tie_reallocation_at_zero_reserve(self):
        v = credibility_check(first_price_sealed(U3.iid(2), 0))
        assert not v.holds
        assert v.witness["profile"] == [1, 1]
        assert (v.witness["deviation_revenue"], v.witness["truthful_revenue"]) == (1, Fraction(1, 2))

    def test_multi_action_rejected(self):
        with pytest.raises(ValueError):
            credibility_check(english(U3.iid(2), 1))


class TestCaps:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("SHILLPROOF_STATE_CAP", "7")
        assert state_cap() == 7
        assert state_cap(3) == 3

    def test_weak_cap(self):
        with pytest.raises(SizeCapExceeded):
            weak_sp_all(english(MarginalDist.uniform(range(4)).iid(3), 1), cap=10)

    def test_reachable_cap(self):
        with pytest.raises(SizeCapExceeded):
            reachable_nodes(screening(MarginalDist.uniform(range(5)).iid(3), 1, 2), cap=5)

    def test_strong_cap(self):
        with pytest.raises(SizeCapExceeded):
            strong_sp_all(dutch(MarginalDist.uniform(range(4)).iid(3), 1), cap=5)
