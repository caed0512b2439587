"""
Weak shill-proofness depends on the distribution
================================================

The hybrid auction is a Dutch auction that, once everyone is below 20, asks
whether values reach 9.  Under F1 a shill gains nothing; under F2 answering
yes to the screen question pays off.
"""

from shillproof.auctions import hybrid
from shillproof.engine import replay_weak, weak_sp_check
from shillproof.suite import example_distributions

F1, F2 = example_distributions()
for name, F in (("F1", F1), ("F2", F2)):
    a = hybrid(F.iid(2))
    v = weak_sp_check(a, [1])
    print(name, "weakly shill-proof:", v.holds, "gap", float(v.gap))
    if not v.holds:
        for d in v.witness["deviations"]:
            print("  shill picks", [str(F.atoms[k]) for k in d["cell"]], "at", d["state"])
        print("  replayed gap", float(replay_weak(a, v.witness)))
