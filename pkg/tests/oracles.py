"""Independent reference computations used by the tests.

Nothing here imports the package's pricing or solver code; each function
recomputes a quantity from first principles on small instances.
"""

import itertools
from decimal import Decimal, getcontext
from fractions import Fraction


def virtual_values(atoms, pmf):
    """φ^k = θ^k − (θ^{k+1} − θ^k)·P[w > θ^k]/f^k, top atom maps to itself."""
    out = []
    for k in range(len(atoms)):
        if k == len(atoms) - 1:
            out.append(Fraction(atoms[k]))
            continue
        tail = sum(pmf[k + 1 :], Fraction(0))
        out.append(Fraction(atoms[k]) - (atoms[k + 1] - atoms[k]) * tail / pmf[k])
    return out


def myerson_revenue(atoms, pmf, n):
    """E[max_i φ(θ_i)^+] over iid draws: optimal revenue for a regular marginal."""
    phi = virtual_values(atoms, pmf)
    total = Fraction(0)
    for prof in itertools.product(range(len(atoms)), repeat=n):
        p = Fraction(1)
        for k in prof:
            p *= pmf[k]
        total += p * max(Fraction(0), max(phi[k] for k in prof))
    return total


def dutch_price(atoms, pmf, n, bidder, k, reserve):
    """Pay-as-bid price of ``bidder`` at type position ``k`` under natural priority.

    Win probability X(j) is counted by enumeration; the price comes from the
    envelope identity U(k) = Σ_{j<k} X(j)(θ^{j+1} − θ^j) with U(0) = 0.
    """

    def wins(j):
        p = Fraction(0)
        for rest in itertools.product(range(len(atoms)), repeat=n - 1):
            prof = rest[:bidder] + (j,) + rest[bidder:]
            if j < reserve:
                continue
            beaten = all(prof[o] < j or (prof[o] == j and o > bidder) for o in range(n) if o != bidder)
            if beaten:
                w = Fraction(1)
                for o, t in enumerate(prof):
                    if o != bidder:
                        w *= pmf[t]
                p += w
        return p

    x = wins(k)
    rent = sum((wins(j) * (atoms[j + 1] - atoms[j]) for j in range(k)), Fraction(0))
    return (atoms[k] * x - rent) / x


def exponential_pmf_decimal(atoms, rate, digits=60):
    """Upward-pooled exponential masses via the decimal module."""
    getcontext().prec = digits
    lam = Decimal(rate.numerator) / Decimal(rate.denominator)

    def cdf(x):
        x = Decimal(x.numerator) / Decimal(x.denominator)
        return Decimal(0) if x <= 0 else 1 - (-lam * x).exp()

    cdfs = [cdf(Fraction(a)) for a in atoms[:-1]]
    return [cdfs[0]] + [b - a for a, b in zip(cdfs, cdfs[1:])] + [1 - cdfs[-1]]


def second_price_revenue(atoms, pmf, n, reserve):
    """E[transfer] when the winner pays max(θ^ρ, highest other type)."""
    total = Fraction(0)
    for prof in itertools.product(range(len(atoms)), repeat=n):
        p = Fraction(1)
        for k in prof:
            p *= pmf[k]
        top = max(prof)
        if top < reserve:
            continue
        w = prof.index(top)
        others = [t for i, t in enumerate(prof) if i != w]
        total += p * atoms[max([reserve] + others)]
    return total


def brute_force_shill_gap(auction, shills, limit=20000):
    """Best expected real revenue over every pure shill policy, minus type-0 play.

    Uses only the menu interface: a policy assigns a cell to every shill
    node reachable under some play.  Returns None when there are more than
    ``limit`` policies.  Product priors only.
    """
    S = frozenset(shills)
    game = auction.for_shills(S)
    real = [j for j in range(game.n) if j not in S]
    pmf = game.mech.prior.iid.pmf

    def extend(state, i, cell):
        return state[:i] + (tuple(cell),) + state[i + 1 :]

    nodes, stack, seen = [], [(game.root(), game.initial())], set()
    while stack:
        node = stack.pop()
        if node in seen or node[1] is None:
            continue
        seen.add(node)
        state, mover = node
        cells = game.menu(state, mover)
        if mover in S:
            nodes.append((node, [c.types for c in cells]))
        for c in cells:
            stack.append((extend(state, mover, c.types), c.next))
    count = 1
    for _, cells in nodes:
        count *= len(cells)
    if count > limit:
        return None

    def play(policy, prof):
        state, mover = game.root(), game.initial()
        while mover is not None:
            cells = game.menu(state, mover)
            if mover in S:
                want = policy[(state, mover)]
                cell = next(c for c in cells if c.types == want)
            else:
                cell = next(c for c in cells if prof[mover] in c.types)
            state, mover = extend(state, mover, cell.types), cell.next
        out = game.mech.outcome(tuple(s[0] for s in state))
        return sum((out.transfers[j] for j in real), Fraction(0))

    def value(policy):
        total = Fraction(0)
        for rest in itertools.product(range(game.M), repeat=len(real)):
            prof = [0] * game.n
            p = Fraction(1)
            for j, k in zip(real, rest):
                prof[j] = k
                p *= pmf[k]
            total += p * play(policy, prof)
        return total

    keys = [k for k, _ in nodes]
    # Nodes without a 0-cell are off the type-0 path, so any default will do there.
    zero = {k: min(cells) for k, cells in nodes}
    best = value(zero)
    base = best
    for choice in itertools.product(*[cells for _, cells in nodes]):
        best = max(best, value(dict(zip(keys, choice))))
    return best - base
