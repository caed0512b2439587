"""
How few queries a weakly shill-proof auction needs
==================================================

Ascending-screening auctions run an English phase up to a screen level and
then a sealed second-price round.  On the exponential family F_m the screen
sits near the bottom of the grid while the English auction walks the whole
grid, so the query ratio falls with m.
"""

from shillproof.dist import exponential_family_member, optimal_reserve_index
from shillproof.suite import qratio_experiment, screening_bound

for m in (3, 5, 8):
    F = exponential_family_member(m)
    b = screening_bound(F, 2)
    forced = screening_bound(F, 2, reserve=2)
    print(f"m={m}: reserve value {F.atoms[optimal_reserve_index(F)]}, screen value {F.atoms[b.index]},"
          f" screen value {F.atoms[forced.index]} with the reserve raised to 4")

# With the reserve at 4: weak SP, ex-post IC and menu validity are checked exactly for each m.
for row in qratio_experiment(range(3, 9), reserve=2):
    print(row["m"], "ratio", row["ratio"], "weak SP", row["weak_sp"], "ex-post IC", row["ex_post_ic"])
