"""Acceptance criteria, one PASS/FAIL line each.

Scenario reports come from one shared suite run; a second run in criterion
10 checks byte-identical JSON.  Criteria that cannot hold as stated are
split: the attainable parts are asserted normally, and the stated claim is a
strict xfail whose reason records the analysis.
"""

from fractions import Fraction

import pytest

from oracles import exponential_pmf_decimal
from shillproof.auctions import english, hybrid
from shillproof.dist import MarginalDist, exponential_family_member, is_regular, optimal_reserve_index
from shillproof.engine import replay_strong, strong_sp_all
from shillproof.suite import example_distributions, report_json, run_suite

U3 = MarginalDist.uniform(range(3))


@pytest.fixture(scope="module")
def reports():
    return {r.id: r for r in run_suite()}


def passed(rep, *names):
    """Every named expectation in a scenario passed (all of them when no names are given)."""
    items = [e for e in rep.expectations if not names or e.name in names]
    assert items, f"no expectations {names} in {rep.id}"
    return all(e.status == "pass" for e in items)


def expectation(rep, name):
    return next(e for e in rep.expectations if e.name == name)


# 1 ----------------------------------------------------------------------


def test_c1_attainable_parts(reports):
    F1, F2 = example_distributions()
    rate = Fraction(1, 10)
    tol = Fraction(1, 10**50)
    for F in (F1, F2):
        ref = exponential_pmf_decimal(F.atoms, rate, digits=80)
        assert all(abs(p - Fraction(r)) < tol for p, r in zip(F.pmf, ref))
        assert F.atoms[optimal_reserve_index(F)] == 14
    assert is_regular(F2)
    rep = reports["ex-robust-wsp"]
    names = [e.name for e in rep.expectations if e.name != "F1 regular"]
    assert passed(rep, *names)
    assert expectation(rep, "F2 witness picks the screen cell, N=2").observed == [7, 14]


@pytest.mark.xfail(
    strict=True,
    reason=(
        "F1 is not regular: with masses from 1 - exp(-x/10) pooled upward, the virtual values at atoms 5 and 9 "
        "are -1.16598 and -1.16622, a decrease of about 2.5e-4. The reserve (14), the hybrid verdicts and the F2 "
        "witness are unaffected, so only the regularity claim fails."
    ),
)
def test_c1_example_reproduction(reports, criterion):
    F1, _ = example_distributions()
    rep = reports["ex-robust-wsp"]
    ok = is_regular(F1) and passed(rep)
    criterion(1, "F1/F2 example: reserve 14, hybrid weakly SP under F1 only, witness at the 9-cell", ok,
              "F1 regular fails; every other part passes")
    assert ok


# 2 ----------------------------------------------------------------------


def test_c2_attainable_parts(reports):
    rep = reports["qratio"]
    for m in range(3, 9):
        F = exponential_family_member(m)
        assert optimal_reserve_index(F) == 1
        assert passed(
            rep,
            f"m={m} screen bound, reserve 4",
            f"m={m} weak SP (forced reserve)",
            f"m={m} ex-post IC (forced reserve)",
            f"m={m} menu valid (forced reserve)",
            f"m={m} weak SP (computed reserve)",
            f"m={m} ex-post IC (computed reserve)",
        )
    # With the reserve forced to value 4 the ratio is 2/(m-1).
    forced = rep.tables["reserve forced to value 4"]
    assert [r["ratio"] for r in forced] == [Fraction(2, m - 1) for m in range(3, 9)]


@pytest.mark.xfail(
    strict=True,
    reason=(
        "For the rate-1 exponential on {0,2,...,2m} the virtual value at atom 2 is about 1.687 > 0, "
        "so the reserve is value 2, not 4. Forcing the reserve to 4 reproduces the screening bound (value 4), "
        "ex-post IC and weak SP. The English count M - rho + 1 with M = m + 1 atoms and the reserve at the third "
        "atom is m - 1, not m - 2, so the ratio is 2/(m-1)."
    ),
)
def test_c2_screening_family(reports, criterion):
    rep = reports["qratio"]
    ok = passed(rep)
    criterion(2, "F_m family: reserve 4, screening bound 4, ex-post IC, weakly SP, ratio 2/(m-2)", ok,
              "reserve value is 2 and ratio 2/(m-2) does not hold; bound, IC and weak SP pass")
    assert ok


# 3 ----------------------------------------------------------------------


def test_c3_dutch_strongly_sp(reports, criterion):
    rep = reports["dutch-ssp-catalog"]
    ok = passed(rep) and expectation(rep, "instances checked").observed == 96
    criterion(3, "Dutch passes strong SP on every catalog instance", ok, "96 instances, 0 counterexamples")
    assert ok


# 4 ----------------------------------------------------------------------


def test_c4_negative_witnesses(reports, criterion):
    a = english(U3.iid(2), 1)
    v = strong_sp_all(a)
    direct = (
        v.gap == 1
        and (v.witness["deviation_revenue"], v.witness["truthful_revenue"]) == (2, 1)
        and replay_strong(a, v.witness) == 1
    )
    ok = direct and passed(reports["negative-witnesses"])
    criterion(4, "English, public first-price and second-price sealed witnesses replay exactly", ok,
              "English gap 1, revenue 2 vs 1")
    assert ok


# 5 ----------------------------------------------------------------------


def test_c5_trilemma(reports, criterion):
    ok = passed(reports["trilemma"])
    criterion(5, "no single-action instance is mild ex-post IC and weakly SP; pairwise combinations occur", ok)
    assert ok


# 6 ----------------------------------------------------------------------


def test_c6_transfer_oracles(reports, criterion):
    split = reports["uniform-revenue-split"]
    ok = passed(reports["transfer-oracles"]) and passed(split)
    ok = ok and expectation(split, "pay-as-bid optimal revenue").observed == Fraction(10, 9)
    criterion(6, "transfer rules pass envelope, IC and pay-as-bid oracles; revenue 10/9 vs 1", ok)
    assert ok


# 7 ----------------------------------------------------------------------


def test_c7_attainable_parts(reports):
    rep = reports["credibility-nesting"]
    assert passed(
        rep,
        "credible => weak SP violations",
        "every strong-not-credible witness is a tie reallocation",
        "first-price static credible, uniform {0,1,2}, N=2, optimal reserve",
    )


@pytest.mark.xfail(
    strict=True,
    reason=(
        "Strong SP does not imply credibility when the allocation breaks ties by priority: static first-price "
        "at reserve 0 on uniform {0,1,2} is strongly SP, yet at profile (1,1) the auctioneer can tell bidder 1 "
        "that bidder 0 bid 0, win with bidder 1 instead, and collect 1 instead of 1/2. Every violation found is "
        "such a tie reallocation; credible => weak SP holds everywhere."
    ),
)
def test_c7_credibility_nesting(reports, criterion):
    rep = reports["credibility-nesting"]
    ok = passed(
        rep,
        "strong SP => credible violations",
        "credible => weak SP violations",
        "first-price static credible, uniform {0,1,2}, N=2, optimal reserve",
    )
    criterion(7, "strong SP => credible => weak SP on single-action instances", ok,
              "strong => credible fails at ties; credible => weak SP and static first-price pass")
    assert ok


# 8 ----------------------------------------------------------------------


def test_c8_robustness(reports, criterion):
    ok = passed(reports["robustness"])
    criterion(8, "sparse regular breakers for non-semi-Dutch auctions; none for Dutch", ok)
    assert ok


# 9 ----------------------------------------------------------------------


def test_c9_affiliation(reports, criterion):
    rep = reports["affiliation-monotonicity"]
    ok = passed(
        rep,
        "at least 10 ordered prior pairs",
        "nesting violations (shills integrate their own coordinates)",
        "planted control flagged",
    )
    criterion(9, "SP sets nest along affiliation and common-value orders; planted bug flagged", ok,
              f"{len(rep.findings['prior pairs'])} prior pairs")
    assert ok


# 10 ---------------------------------------------------------------------


def test_c10_validator_and_determinism(reports, criterion):
    menus = passed(reports["menu-validation"])
    first = report_json(list(reports.values()))
    second = report_json(run_suite())
    ok = menus and first == second
    criterion(10, "every catalog menu is valid; two suite runs give identical JSON", ok,
              f"{reports['menu-validation'].findings['menus validated']} menus")
    assert ok


def test_hybrid_fixture_is_the_example_auction():
    # Guards the reading used in criterion 1: the screen cell [7,14] is the mid cell under F2.
    _, F2 = example_distributions()
    a = hybrid(F2.iid(2))
    assert [F2.atoms[k] for k in a.menu(((0, 1, 2, 3), (0, 1, 2, 3)), 1)[1].types] == [7, 14]
