"""
Shills in English and Dutch auctions
====================================

Two bidders with values uniform on {0, 1, 2}, reserve at value 1.
"""

from shillproof.auctions import dutch, english
from shillproof.dist import MarginalDist
from shillproof.engine import strong_sp_all, trace
from shillproof.mech import expected_revenue

prior = MarginalDist.uniform(range(3)).iid(2)

# The English auction: a seller who knows bidder 0 has value 2 can bid up to 2 with a shill.
eng = english(prior, 1)
v = strong_sp_all(eng)
print("English strongly shill-proof:", v.holds)
print("  profile", v.witness["profile"], "shills", v.witness["shills"])
print("  revenue", v.witness["deviation_revenue"], "with the shill vs", v.witness["truthful_revenue"], "without")

# Truthful play for comparison: the shill drops out at once and bidder 0 pays the reserve.
for step in trace(eng, (2, 0), [1]).steps:
    print("  bidder", step.mover, "shill" if step.shill else "real", "keeps", step.chosen)

# The Dutch auction charges the winner her own bid, so there is nothing to push up.
dut = dutch(prior, 1)
print("Dutch strongly shill-proof:", strong_sp_all(dut).holds)
print("Dutch expected revenue:", expected_revenue(dut.mech))
