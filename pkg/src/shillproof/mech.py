"""Direct mechanisms: orderly allocation, ex-interim outcome functions, transfers.

Bidders are 0-based integers.  Types are atom positions.  A game state Θ is
a tuple with one sorted tuple of positions per bidder.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .dist import JointDist, MarginalDist, Unreachable
from .valfn import ValueFunction, conditional_value

Profile = tuple[int, ...]
PossibleValues = tuple[tuple[int, ...], ...]

TRANSFER_KINDS = ("pab-optimal", "second-price", "threshold", "table", "pay-as-bid-at-state")


class BidUndefined(ValueError):
    """b¹ requested for a type that never wins."""


def root_state(n: int, M: int) -> PossibleValues:
    return tuple(tuple(range(M)) for _ in range(n))


def with_cell(state: PossibleValues, i: int, cell: Iterable[int]) -> PossibleValues:
    return state[:i] + (tuple(sorted(cell)),) + state[i + 1 :]


def state_profiles(state: PossibleValues) -> Iterator[Profile]:
    return itertools.product(*state)


def representative(state: PossibleValues) -> Profile:
    return tuple(s[0] for s in state)


@dataclass(frozen=True)
class PriorityOrder:
    """Bidders listed from highest to lowest tie-breaking priority."""

    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"priority must be a permutation of 0..n-1, got {self.order}")

    @classmethod
    def natural(cls, n: int) -> "PriorityOrder":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.order)

    def rank(self, i: int) -> int:
        return self.order.index(i)

    def key(self, pos: int, i: int) -> tuple[int, int]:
        """Sort key for ⊳: larger means ⊳-greater."""
        return (pos, -self.rank(i))

    def beats(self, a: tuple[int, int], b: tuple[int, int]) -> bool:
        """(pos_a, i_a) ⊳ (pos_b, i_b)."""
        return self.key(*a) > self.key(*b)


@dataclass(frozen=True)
class AllocationRule:
    """x̃^ρ: the ⊳-max bidder wins if her type is at least θ^ρ (ρ is a 0-based position)."""

    reserve: int
    priority: PriorityOrder

    @property
    def n(self) -> int:
        return self.priority.n

    def winner(self, profile: Sequence[int]) -> Optional[int]:
        best = max(range(len(profile)), key=lambda i: self.priority.key(profile[i], i))
        return best if profile[best] >= self.reserve else None

    def min_winning_type(self, i: int, profile: Sequence[int], M: int) -> Optional[int]:
        """Smallest own position that still wins against the opponents in ``profile``."""
        for k in range(M):
            if self.winner(profile[:i] + (k,) + profile[i + 1 :]) == i:
                return k
        return None


@dataclass(frozen=True)
class TransferRule:
    """How the winner's payment is set.

    pab-optimal          b¹ at the root state (t̃¹; interdependent form when v is not private)
    second-price         max(θ^ρ, highest opponent type), or v at that type (t̃²)
    threshold            the smallest own type that still wins, given the opponents
    table                explicit per-profile transfers
    pay-as-bid-at-state  T(w;Θ)/X(w;Θ) where ``locator(profile, i)`` returns (Θ, cell)
    """

    kind: str = "pab-optimal"
    table: Optional[Mapping[Profile, tuple[Fraction, ...]]] = None
    locator: Optional[Callable] = field(default=None, compare=False)
    # Whether the price depends on the extensive form; menus then settle on allocation only.
    path_dependent: bool = False

    def __post_init__(self):
        if self.kind not in TRANSFER_KINDS:
            raise ValueError(f"unknown transfer kind {self.kind!r}")
        if self.kind == "table" and self.table is None:
            raise ValueError("table transfers need a table")
        if self.kind == "pay-as-bid-at-state" and self.locator is None:
            raise ValueError("pay-as-bid-at-state needs a locator")


@dataclass(frozen=True)
class Outcome:
    winner: Optional[int]
    transfers: tuple[Fraction, ...]

    def revenue(self, real: Iterable[int]) -> Fraction:
        return sum((self.transfers[j] for j in real), Fraction(0))


def ex_interim_alloc(
    alloc: AllocationRule,
    prior: JointDist,
    i: int,
    k: int,
    state: PossibleValues,
    shills: Iterable[int] = (),
    true_type: Optional[int] = None,
) -> Fraction:
    """X_i(θ^k; Θ): win probability at type k against opponents drawn from Θ_{-i}.

    With a correlated prior the opponents are conditioned on ``true_type``
    (default ``k``); shill coordinates are pinned to 0.  A zero-mass
    conditioning event yields 0.
    """
    fixed = {s: 0 for s in shills if s != i}
    fixed[i] = k if true_type is None else true_type
    try:
        post = prior.conditional(state, fixed)
    except Unreachable:
        return Fraction(0)
    total = Fraction(0)
    for prof, p in post:
        acted = prof[:i] + (k,) + prof[i + 1 :]
        if alloc.winner(acted) == i:
            total += p
    return total


def _value_when_winning(
    alloc: AllocationRule, prior: JointDist, v: ValueFunction, i: int, acted: int, true: int, state
) -> Fraction:
    if v.is_private:
        return prior.atoms[true]
    return conditional_value(v, prior, alloc.winner, i, acted, true, state, evaluate="true")


def information_rent(
    alloc: AllocationRule,
    prior: JointDist,
    i: int,
    k: int,
    state: PossibleValues,
    v: Optional[ValueFunction] = None,
) -> Fraction:
    """U_i(θ^k; Θ) with every adjacent downward constraint binding and U = 0 at the bottom of Θ_i."""
    v = v or ValueFunction.private()
    atoms = state[i]
    if k not in atoms:
        raise ValueError(f"position {k} is not in Θ_{i} = {atoms}")
    rent = Fraction(0)
    for lo, hi in zip(atoms, atoms[1:]):
        if lo >= k:
            break
        x_lo = ex_interim_alloc(alloc, prior, i, lo, state)
        if x_lo == 0:
            continue
        cross = ex_interim_alloc(alloc, prior, i, lo, state, true_type=hi)
        if cross == 0:
            rent = Fraction(0)
            continue
        gain = _value_when_winning(alloc, prior, v, i, lo, hi, state) - _value_when_winning(
            alloc, prior, v, i, lo, lo, state
        )
        rent = cross * gain + cross * rent / x_lo
    return rent


def ex_interim_transfer(
    alloc: AllocationRule,
    prior: JointDist,
    i: int,
    k: int,
    state: PossibleValues,
    v: Optional[ValueFunction] = None,
) -> Fraction:
    """T_i(θ^k; Θ) = X·(value when winning) − U, the optimal pay-as-bid ex-interim transfer.

    For private values and an iid prior this is X(θ)θ − Σ X(θ^{j_m})(θ^{j_{m+1}} − θ^{j_m}).
    """
    v = v or ValueFunction.private()
    x = ex_interim_alloc(alloc, prior, i, k, state)
    if x == 0:
        return Fraction(0)
    return x * _value_when_winning(alloc, prior, v, i, k, k, state) - information_rent(
        alloc, prior, i, k, state, v
    )


def pay_as_bid_price(
    alloc: AllocationRule,
    prior: JointDist,
    i: int,
    k: int,
    state: PossibleValues,
    v: Optional[ValueFunction] = None,
) -> Fraction:
    x = ex_interim_alloc(alloc, prior, i, k, state)
    if x == 0:
        raise BidUndefined(f"bidder {i} never wins at position {k} on {state}")
    return ex_interim_transfer(alloc, prior, i, k, state, v) / x


def bid_fn(alloc: AllocationRule, prior: JointDist, i: int, k: int, v: Optional[ValueFunction] = None) -> Fraction:
    """b¹_i(θ^k) = T_i(θ^k; ϑ^N) / X_i(θ^k; ϑ^N)."""
    return pay_as_bid_price(alloc, prior, i, k, root_state(prior.n, prior.M), v)


def bid_fn_closed_form(marginal: MarginalDist, n: int, rank: int, m: int) -> Optional[Fraction]:
    """The published closed form of b¹ for the bidder of 0-based priority ``rank``.

    Kept only for comparison with :func:`bid_fn`; returns None when a
    denominator vanishes.  Exponents are used exactly as printed.
    """
    a = marginal.atoms
    F = lambda j: marginal.cdf(j) if j >= 0 else Fraction(0)  # noqa: E731
    p, q = rank, n - rank - 2

    def weight(j):
        if q < 0 and F(j - 1) == 0:
            return None
        return F(j) ** p * F(j - 1) ** q

    den = weight(m)
    if den is None or den == 0:
        return None
    total = Fraction(0)
    for j in range(m):
        w = weight(j)
        if w is None:
            return None
        total += (a[j + 1] - a[j]) * w / den
    return a[m] - total


@dataclass
class Mechanism:
    """A direct mechanism (x̃, t̃) together with the prior that prices it."""

    alloc: AllocationRule
    transfer: TransferRule
    prior: JointDist
    valfn: ValueFunction = field(default_factory=ValueFunction.private)
    _outcomes: dict = field(default_factory=dict, repr=False, compare=False)
    _prices: dict = field(default_factory=dict, repr=False, compare=False)
    _settled: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.prior.n

    @property
    def M(self) -> int:
        return self.prior.M

    @property
    def atoms(self):
        return self.prior.atoms

    def winner(self, profile: Sequence[int]) -> Optional[int]:
        return self.alloc.winner(tuple(profile))

    def price_at(self, i: int, k: int, state: PossibleValues) -> Fraction:
        key = (i, k, state)
        if key not in self._prices:
            self._prices[key] = pay_as_bid_price(self.alloc, self.prior, i, k, state, self.valfn)
        return self._prices[key]

    def _winner_payment(self, profile: Profile, w: int) -> Fraction:
        kind = self.transfer.kind
        if kind == "pab-optimal":
            return self.price_at(w, profile[w], root_state(self.n, self.M))
        if kind == "second-price":
            others = [k for j, k in enumerate(profile) if j != w]
            level = max([self.alloc.reserve] + others)
            if self.valfn.is_private:
                return self.atoms[level]
            return self.valfn.value(self.prior.grid, level, others)
        if kind == "threshold":
            others = [k for j, k in enumerate(profile) if j != w]
            level = self.alloc.min_winning_type(w, tuple(profile), self.M)
            if self.valfn.is_private:
                return self.atoms[level]
            return self.valfn.value(self.prior.grid, level, others)
        if kind == "pay-as-bid-at-state":
            state, cell = self.transfer.locator(profile, w)
            for k in cell:
                if ex_interim_alloc(self.alloc, self.prior, w, k, state) > 0:
                    return self.price_at(w, k, state)
            # A win with zero ex-interim probability (a zero-mass atom); IR caps the price at 0.
            return Fraction(0)
        raise AssertionError(kind)

    def outcome(self, profile: Sequence[int]) -> Outcome:
        profile = tuple(profile)
        hit = self._outcomes.get(profile)
        if hit is not None:
            return hit
        if self.transfer.kind == "table":
            ts = tuple(Fraction(t) for t in self.transfer.table[profile])
            out = Outcome(self.winner(profile), ts)
        else:
            w = self.winner(profile)
            ts = [Fraction(0)] * self.n
            if w is not None:
                ts[w] = self._winner_payment(profile, w)
            out = Outcome(w, tuple(ts))
        self._outcomes[profile] = out
        return out

    def transfers(self, profile: Sequence[int]) -> tuple[Fraction, ...]:
        return self.outcome(profile).transfers

    def utility(self, i: int, true_profile: Profile, reported: Profile) -> Fraction:
        out = self.outcome(reported)
        value = self.valfn.at(self.prior.grid, true_profile, i) if out.winner == i else Fraction(0)
        return value - out.transfers[i]

    # Menu helpers -------------------------------------------------------

    def settled(self, state: PossibleValues) -> bool:
        """Whether the outcome (allocation only, for path-dependent prices) is constant on Θ."""
        hit = self._settled.get(state)
        if hit is not None:
            return hit
        profs = state_profiles(state)
        if self.transfer.path_dependent:
            first = self.winner(next(profs))
            ok = all(self.winner(p) == first for p in profs)
        else:
            first = self.outcome(next(profs))
            ok = all(self.outcome(p) == first for p in profs)
        self._settled[state] = ok
        return ok

    def informative(self, state: PossibleValues, i: int) -> bool:
        """Whether bidder i's type can still change the (allocation or) outcome on Θ."""
        if len(state[i]) < 2:
            return False
        f = self.winner if self.transfer.path_dependent else self.outcome
        others = [s for j, s in enumerate(state) if j != i]
        for rest in itertools.product(*others):
            seen = {f(rest[:i] + (k,) + rest[i:]) for k in state[i]}
            if len(seen) > 1:
                return True
        return False


def evaluate(mech: Mechanism, profile: Sequence[int]) -> Outcome:
    return mech.outcome(profile)


def expected_revenue(mech: Mechanism, shills: Iterable[int] = ()) -> Fraction:
    """Σ_θ P[θ] Σ_{j real} t̃_j(θ) with shill coordinates pinned to 0."""
    shills = tuple(sorted(set(shills)))
    real = [j for j in range(mech.n) if j not in shills]
    if not real:
        return Fraction(0)
    fixed = {s: 0 for s in shills}
    total = Fraction(0)
    for prof, p in mech.prior.conditional(root_state(mech.n, mech.M), fixed):
        total += p * mech.outcome(prof).revenue(real)
    return total


# Validation ------------------------------------------------------------


@dataclass
class Check:
    holds: bool
    witness: Optional[dict] = None


@dataclass
class MechanismReport:
    checks: dict[str, Check]

    def __getitem__(self, name: str) -> bool:
        return self.checks[name].holds

    def as_dict(self) -> dict:
        return {k: {"holds": c.holds, "witness": c.witness} for k, c in self.checks.items()}


def _profiles(mech: Mechanism) -> list[Profile]:
    return list(itertools.product(range(mech.M), repeat=mech.n))


def bayesian_ic_violation(mech: Mechanism) -> Optional[dict]:
    """Commit-to-misreport deviations against truthful opponents, in expectation."""
    root = root_state(mech.n, mech.M)
    for i in range(mech.n):
        for k in range(mech.M):
            try:
                post = mech.prior.conditional(root, {i: k})
            except Unreachable:
                continue
            truth = sum((p * mech.utility(i, prof, prof) for prof, p in post), Fraction(0))
            for k2 in range(mech.M):
                if k2 == k:
                    continue
                dev = sum(
                    (p * mech.utility(i, prof, prof[:i] + (k2,) + prof[i + 1 :]) for prof, p in post),
                    Fraction(0),
                )
                if dev > truth:
                    return {"bidder": i, "type": k, "misreport": k2, "gain": dev - truth}
    return None


def ex_post_ic_violation(mech: Mechanism, bidders: Optional[Iterable[int]] = None) -> Optional[dict]:
    bidders = range(mech.n) if bidders is None else bidders
    profs = _profiles(mech)
    for i in bidders:
        for prof in profs:
            truth = mech.utility(i, prof, prof)
            for k2 in range(mech.M):
                if k2 == prof[i]:
                    continue
                rep = prof[:i] + (k2,) + prof[i + 1 :]
                if mech.utility(i, prof, rep) > truth:
                    return {"bidder": i, "profile": list(prof), "misreport": k2}
    return None


def validate(mech: Mechanism, last_mover: Optional[int] = None) -> MechanismReport:
    """Exhaustive checks of the direct mechanism; every failure carries a witness."""
    profs = _profiles(mech)
    checks: dict[str, Check] = {}

    w = bayesian_ic_violation(mech)
    checks["ic"] = Check(w is None, w)

    bad = next(
        (p for p in profs for i in range(mech.n) if mech.utility(i, p, p) < 0),
        None,
    )
    checks["ex_post_ir"] = Check(bad is None, None if bad is None else {"profile": list(bad)})

    bad = None
    for p in profs:
        o = mech.outcome(p)
        for i in range(mech.n):
            if o.winner != i and o.transfers[i] != 0:
                bad = {"profile": list(p), "bidder": i}
                break
        if bad:
            break
    checks["winner_paying"] = Check(bad is None, bad)

    # Monotone: raising one's own report never lowers one's allocation or, when still winning, raises nothing else.
    bad = None
    for p in profs:
        for i in range(mech.n):
            if p[i] + 1 < mech.M:
                q = p[:i] + (p[i] + 1,) + p[i + 1 :]
                a, b = mech.outcome(p), mech.outcome(q)
                lost = a.winner == i and b.winner != i
                cheaper = a.winner == i and b.winner == i and b.transfers[i] < a.transfers[i]
                if lost or cheaper:
                    bad = {"profile": list(p), "bidder": i}
                    break
        if bad:
            break
    checks["monotone"] = Check(bad is None, bad)

    bad = None
    for p in profs:
        w_ = mech.outcome(p).winner
        if w_ != mech.alloc.winner(p):
            bad = {"profile": list(p)}
            break
        if w_ is not None:
            for j in range(mech.n):
                if j != w_ and mech.alloc.priority.beats((p[j], j), (p[w_], w_)):
                    bad = {"profile": list(p)}
    checks["orderly"] = Check(bad is None, bad)

    w = pay_as_bid_violation(mech)
    checks["pay_as_bid"] = Check(w is None, w)

    w = ex_post_ic_violation(mech)
    checks["ex_post_ic"] = Check(w is None, w)

    movers = [i for i in range(mech.n) if i != last_mover]
    mild = any(ex_post_ic_violation(mech, [i]) is None for i in movers)
    checks["mild_ex_post_ic"] = Check(mild, None if mild else {"bidders": movers})
    return MechanismReport(checks)


def pay_as_bid_violation(mech: Mechanism) -> Optional[dict]:
    """Same own type and same allocation must mean the same own transfer."""
    seen: dict = {}
    for p in _profiles(mech):
        o = mech.outcome(p)
        for i in range(mech.n):
            key = (i, p[i], o.winner == i)
            t = o.transfers[i]
            if key in seen and seen[key][1] != t:
                return {"bidder": i, "profiles": [list(seen[key][0]), list(p)]}
            seen.setdefault(key, (p, t))
    return None


def envelope_violation(mech: Mechanism) -> Optional[dict]:
    """Under t̃¹: expected utility equals the accumulated rent Σ X(θ^{j})(θ^{j+1}−θ^{j}) for every type."""
    root = root_state(mech.n, mech.M)
    for i in range(mech.n):
        for k in range(mech.M):
            try:
                post = mech.prior.conditional(root, {i: k})
            except Unreachable:
                continue
            u = sum((p * mech.utility(i, prof, prof) for prof, p in post), Fraction(0))
            rent = sum(
                (
                    ex_interim_alloc(mech.alloc, mech.prior, i, j, root) * (mech.atoms[j + 1] - mech.atoms[j])
                    for j in range(k)
                ),
                Fraction(0),
            )
            if u != rent:
                return {"bidder": i, "type": k, "utility": u, "rent": rent}
    return None


def make_mechanism(
    prior: JointDist,
    reserve: int,
    transfer: str = "pab-optimal",
    priority: Optional[Sequence[int]] = None,
    valfn: Optional[ValueFunction] = None,
) -> Mechanism:
    order = PriorityOrder(tuple(priority)) if priority is not None else PriorityOrder.natural(prior.n)
    return Mechanism(AllocationRule(reserve, order), TransferRule(transfer), prior, valfn or ValueFunction.private())


__all__ = [
    "Profile",
    "PossibleValues",
    "BidUndefined",
    "PriorityOrder",
    "AllocationRule",
    "TransferRule",
    "Outcome",
    "Mechanism",
    "Check",
    "MechanismReport",
    "root_state",
    "with_cell",
    "state_profiles",
    "representative",
    "ex_interim_alloc",
    "information_rent",
    "ex_interim_transfer",
    "pay_as_bid_price",
    "bid_fn",
    "bid_fn_closed_form",
    "evaluate",
    "expected_revenue",
    "validate",
    "bayesian_ic_violation",
    "ex_post_ic_violation",
    "pay_as_bid_violation",
    "envelope_violation",
    "make_mechanism",
]
