"""Extensive-form auctions as menu rules, plus single-action auctions.

A menu rule maps a node (Θ, mover) to a list of cells.  Each cell is a
subset of the mover's remaining types together with the next mover (or
None to end the game).  Outcomes come from the auction's direct mechanism
evaluated on any profile of the terminal state.

Every built-in rule ends the game as soon as the outcome is settled and
never hands the move to a bidder whose type can no longer matter.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .dist import JointDist
from .mech import (
    AllocationRule,
    Mechanism,
    PossibleValues,
    PriorityOrder,
    Profile,
    TransferRule,
    make_mechanism,
    root_state,
    with_cell,
)
from .valfn import ValueFunction


class MenuError(ValueError):
    """A menu rule was asked for something it cannot produce."""


@dataclass(frozen=True)
class Cell:
    types: tuple[int, ...]
    next: Optional[int]


def choose_next(
    mech: Mechanism, state: PossibleValues, designated: Optional[int], candidates: Iterable[int] = ()
) -> Optional[int]:
    """END when settled; otherwise the designated mover if informative, else the first informative candidate."""
    if mech.settled(state):
        return None
    if designated is not None and mech.informative(state, designated):
        return designated
    for i in candidates:
        if mech.informative(state, i):
            return i
    for i in mech.alloc.priority.order:
        if mech.informative(state, i):
            return i
    raise MenuError(f"state {state} is unsettled but no bidder is informative")


def _split(types: Sequence[int], keep: Callable[[int], bool]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    a = tuple(k for k in types if keep(k))
    b = tuple(k for k in types if not keep(k))
    return a, b


def _pool_by_outcome(mech: Mechanism, state: PossibleValues, mover: int) -> list[tuple[int, ...]]:
    """Group the mover's types whose outcomes agree against every remaining opponent profile."""
    others = [s for j, s in enumerate(state) if j != mover]
    classes: dict = {}
    for k in state[mover]:
        sig = tuple(mech.outcome(rest[:mover] + (k,) + rest[mover:]) for rest in itertools.product(*others))
        classes.setdefault(sig, []).append(k)
    return [tuple(c) for c in classes.values()]


class MenuRule:
    kind = "abstract"

    def initial(self, mech: Mechanism) -> Optional[int]:
        raise NotImplementedError

    def cells(self, mech: Mechanism, state: PossibleValues, mover: int) -> list[Cell]:
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class DutchMenu(MenuRule):
    """Descending offers in priority order; taking an offer ends the game."""

    kind = "dutch"

    def __init__(self, reserve: int):
        self.reserve = reserve

    def params(self):
        return {"reserve": self.reserve}

    def _next(self, mech, state, mover):
        pr = mech.alloc.priority
        eligible = [
            i for i in range(mech.n) if i != mover and len(state[i]) > 1 and state[i][-1] >= self.reserve
        ]
        eligible.sort(key=lambda i: pr.key(state[i][-1], i), reverse=True)
        return eligible

    def initial(self, mech):
        order = mech.alloc.priority.order
        return choose_next(mech, root_state(mech.n, mech.M), order[0], order)

    def cells(self, mech, state, mover):
        top = state[mover][-1]
        high = (top,)
        low = state[mover][:-1]
        out = []
        if low:
            s = with_cell(state, mover, low)
            cand = self._next(mech, s, mover)
            out.append(Cell(low, choose_next(mech, s, cand[0] if cand else None, cand)))
        out.append(Cell(high, choose_next(mech, with_cell(state, mover, high), None)))
        return out


class EnglishMenu(MenuRule):
    """Ascending clock: the mover either drops at her floor or stays above it."""

    kind = "english"

    def __init__(self, reserve: int):
        self.reserve = reserve

    def params(self):
        return {"reserve": self.reserve}

    def _active(self, mech, state, exclude=None):
        pr = mech.alloc.priority
        top = mech.M - 1
        act = [i for i in range(mech.n) if i != exclude and len(state[i]) > 1 and state[i][-1] == top]
        act.sort(key=lambda i: pr.key(state[i][0], i))
        return act

    def initial(self, mech):
        pr = mech.alloc.priority
        first = min(range(mech.n), key=lambda i: pr.key(0, i))
        root = root_state(mech.n, mech.M)
        return choose_next(mech, root, first, self._active(mech, root))

    def _drop_cell(self, mech, state, mover):
        floor = state[mover][0]
        # With interdependent values a dropout's exact type enters the price.
        pool = mech.valfn.is_private
        return _split(state[mover], lambda k: k == floor or (pool and k < self.reserve))

    def cells(self, mech, state, mover):
        out = []
        for part in self._drop_cell(mech, state, mover):
            if not part:
                continue
            s = with_cell(state, mover, part)
            cand = self._active(mech, s, exclude=mover)
            out.append(Cell(part, choose_next(mech, s, cand[0] if cand else None, cand)))
        return out


class ScreeningMenu(MenuRule):
    """English clock up to the screen level, then one sealed report among the survivors.

    The sealed phase is played sequentially in priority order, except that
    bidders in ``first`` report before everyone else.  Real bidders report
    truthfully whatever they have seen, so putting the shills first is the
    same as hiding the other reports from them.
    """

    kind = "screening"

    def __init__(self, reserve: int, screen: int, first: Iterable[int] = (), sealed: bool = True):
        if screen < reserve:
            raise MenuError(f"screen level {screen} lies below the reserve {reserve}")
        self.reserve = reserve
        self.screen = screen
        self.first = frozenset(first)
        self.sealed = sealed

    def params(self):
        return {"reserve": self.reserve, "screen": self.screen, "sealed": self.sealed}

    def sealed_for(self, shills: Iterable[int]) -> "ScreeningMenu":
        if not self.sealed:
            return self
        return ScreeningMenu(self.reserve, self.screen, shills, True)

    def _active(self, mech, state):
        top = mech.M - 1
        return [i for i in range(mech.n) if len(state[i]) > 1 and state[i][-1] == top]

    def _designated(self, mech, state):
        pr = mech.alloc.priority
        act = self._active(mech, state)
        climbing = sorted((i for i in act if state[i][0] < self.screen), key=lambda i: pr.key(state[i][0], i))
        if climbing:
            return climbing[0], climbing
        survivors = sorted((i for i in act), key=lambda i: (i not in self.first, pr.rank(i)))
        return (survivors[0] if survivors else None), survivors

    def initial(self, mech):
        root = root_state(mech.n, mech.M)
        d, cand = self._designated(mech, root)
        return choose_next(mech, root, d, cand)

    def cells(self, mech, state, mover):
        types = state[mover]
        if types[0] < self.screen:
            floor = types[0]
            pool = mech.valfn.is_private
            parts = _split(types, lambda k: k == floor or (pool and k < self.reserve))
        else:
            parts = _pool_by_outcome(mech, state, mover)
        out = []
        for part in parts:
            if not part:
                continue
            s = with_cell(state, mover, part)
            d, cand = self._designated(mech, s)
            out.append(Cell(part, choose_next(mech, s, d, cand)))
        return out


class HybridMenu(MenuRule):
    """Dutch offer at the top atom, then a screen at ``mid`` and a check for ``high``.

    Phase 1 offers the top atom in priority order.  Phase 2 asks every
    remaining bidder, lowest priority first, whether her type is at least
    ``mid``.  If someone says yes, those bidders are asked, lowest priority
    first, whether their type is ``high``; otherwise a reserve-0 Dutch
    auction runs below ``mid``.
    """

    kind = "hybrid"

    def __init__(self, top: int, mid: int, high: int):
        if not 0 < mid < high < top:
            raise MenuError("hybrid needs 0 < mid < high < top")
        self.top, self.mid, self.high = top, mid, high

    def params(self):
        return {"top": self.top, "mid": self.mid, "high": self.high}

    def _protocol(self, mech, state):
        pr = mech.alloc.priority.order
        low_first = tuple(reversed(pr))
        full = tuple(range(self.top + 1))
        below_top = tuple(range(self.top))
        screened = tuple(range(self.mid, self.top))
        for i in pr:
            if state[i] == full:
                return i
        for i in low_first:
            if state[i] == below_top:
                return i
        for i in low_first:
            if state[i] == screened:
                return i
        # Reserve-0 Dutch below the screen.
        caps = [i for i in pr if len(state[i]) > 1 and state[i][-1] < self.mid]
        if caps:
            return max(caps, key=lambda i: mech.alloc.priority.key(state[i][-1], i))
        return None

    def _step(self, mech, state):
        if mech.settled(state):
            return None
        nxt = self._protocol(mech, state)
        if nxt is None or not mech.informative(state, nxt):
            raise MenuError(f"hybrid protocol stalled at {state} (designated {nxt})")
        return nxt

    def initial(self, mech):
        return self._step(mech, root_state(mech.n, mech.M))

    def cells(self, mech, state, mover):
        types = state[mover]
        if types[-1] == self.top:
            parts = (types[:-1], (self.top,))
        elif types == tuple(range(self.top)):
            parts = _split(types, lambda k: k < self.mid)
        elif types[0] >= self.mid:
            parts = _split(types, lambda k: k < self.high)
        else:
            parts = (types[:-1], (types[-1],))
        return [Cell(p, self._step(mech, with_cell(state, mover, p))) for p in parts if p]


class TableMenu(MenuRule):
    """Explicit state table: {(state, mover): [(cell, next), ...]} plus an initial mover."""

    kind = "custom"

    def __init__(self, table: Mapping, initial_mover: Optional[int]):
        self.table = {(tuple(map(tuple, s)), m): [Cell(tuple(c), nx) for c, nx in cells] for (s, m), cells in table.items()}
        self.initial_mover = initial_mover

    def initial(self, mech):
        return self.initial_mover

    def cells(self, mech, state, mover):
        try:
            return list(self.table[(state, mover)])
        except KeyError:
            raise MenuError(f"custom menu has no entry for mover {mover} at {state}") from None


class SingleActionMenu(MenuRule):
    """Each bidder moves once, in ``order``; types with identical continuations are pooled."""

    kind = "single-action"

    def __init__(self, order: Sequence[int]):
        self.order = tuple(order)

    def params(self):
        return {"order": list(self.order)}

    def _after(self, mover):
        idx = self.order.index(mover)
        return self.order[idx + 1 :]

    def initial(self, mech):
        return self._first_informative(mech, root_state(mech.n, mech.M), self.order)

    def _first_informative(self, mech, state, bidders):
        if mech.settled(state):
            return None
        for i in bidders:
            if mech.informative(state, i):
                return i
        return None

    def cells(self, mech, state, mover):
        out = []
        for part in _pool_by_outcome(mech, state, mover):
            s = with_cell(state, mover, part)
            out.append(Cell(tuple(part), self._first_informative(mech, s, self._after(mover))))
        return out


EXPERIMENTS = ("empty", "identity", "partition")


@dataclass(frozen=True)
class Experiment:
    """What a bidder learns about earlier bidders' types before acting.

    ``empty`` reveals nothing, ``identity`` reveals each earlier type exactly,
    ``partition`` reveals which block of ``blocks`` each earlier type lies in.
    """

    kind: str = "empty"
    blocks: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        if self.kind not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.kind!r}")
        if self.kind == "partition":
            if not self.blocks:
                raise ValueError("partition experiments need blocks")
            flat = sorted(k for b in self.blocks for k in b)
            if flat != list(range(len(flat))):
                raise ValueError("partition blocks must cover every atom exactly once")

    def block_of(self, k: int, M: int) -> tuple[int, ...]:
        if self.kind == "empty":
            return tuple(range(M))
        if self.kind == "identity":
            return (k,)
        return next(b for b in self.blocks if k in b)


def observed_state(order: Sequence[int], exp: Experiment, profile: Profile, i: int, M: int) -> PossibleValues:
    """Θ^obs for bidder i: signal-consistent sets for earlier bidders, full sets for the rest."""
    earlier = set(order[: order.index(i)])
    return tuple(
        exp.block_of(profile[j], M) if j in earlier else tuple(range(M)) for j in range(len(profile))
    )


@dataclass
class Auction:
    name: str
    mech: Mechanism
    rule: MenuRule
    single_action: bool = False
    order: tuple[int, ...] = ()
    experiment: Optional[Experiment] = None
    efficient: bool = False
    _menus: dict = field(default_factory=dict, repr=False)
    _initial: object = field(default="unset", repr=False)
    _views: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.mech.n

    @property
    def M(self) -> int:
        return self.mech.M

    def root(self) -> PossibleValues:
        return root_state(self.n, self.M)

    def initial(self) -> Optional[int]:
        if self._initial == "unset":
            self._initial = self.rule.initial(self.mech)
        return self._initial

    def menu(self, state: PossibleValues, mover: int) -> list[Cell]:
        key = (state, mover)
        hit = self._menus.get(key)
        if hit is None:
            hit = self.rule.cells(self.mech, state, mover)
            self._menus[key] = hit
        return hit

    def for_shills(self, shills: Iterable[int]) -> "Auction":
        """The game as shills face it: sealed stages are played with the shills reporting first."""
        S = frozenset(shills)
        sealed = getattr(self.rule, "sealed_for", None)
        if sealed is None or not S:
            return self
        if S not in self._views:
            self._views[S] = Auction(
                self.name, self.mech, sealed(S), self.single_action, self.order, self.experiment, self.efficient
            )
        return self._views[S]

    def last_mover(self) -> Optional[int]:
        return self.order[-1] if self.single_action and self.order else None

    def describe(self) -> dict:
        return {
            "name": self.name,
            "kind": self.rule.kind,
            "params": self.rule.params(),
            "reserve": self.mech.alloc.reserve,
            "priority": list(self.mech.alloc.priority.order),
            "transfer": self.mech.transfer.kind,
            "valfn": self.mech.valfn.label(),
            "experiment": None if self.experiment is None else self.experiment.kind,
        }


def truthful_path(auction: Auction, profile: Profile):
    """Nodes (state, mover, chosen cell) along the truthful play of ``profile``, and the terminal state."""
    state = auction.root()
    mover = auction.initial()
    nodes = []
    while mover is not None:
        cells = auction.menu(state, mover)
        cell = next((c for c in cells if profile[mover] in c.types), None)
        if cell is None:
            raise MenuError(f"type {profile[mover]} of bidder {mover} is in no cell at {state}")
        nodes.append((state, mover, cell.types))
        state = with_cell(state, mover, cell.types)
        mover = cell.next
    return nodes, state


def _last_action_locator(holder: dict):
    def locate(profile, i):
        nodes, _ = truthful_path(holder["auction"], profile)
        mine = [(s, c) for s, m, c in nodes if m == i]
        if not mine:
            raise MenuError(f"bidder {i} wins {profile} without ever acting")
        return mine[-1]

    return locate


# Catalog constructors ---------------------------------------------------


def _mech(prior, reserve, transfer, priority, valfn):
    return make_mechanism(prior, reserve, transfer, priority, valfn)


def dutch(prior: JointDist, reserve: int, priority=None, valfn: Optional[ValueFunction] = None) -> Auction:
    m = _mech(prior, reserve, "pab-optimal", priority, valfn)
    return Auction(f"dutch(r={reserve})", m, DutchMenu(reserve), efficient=reserve == 0)


def _tag(transfer: str) -> str:
    return "" if transfer == "second-price" else f",{transfer}"


def english(
    prior: JointDist, reserve: int, priority=None, valfn: Optional[ValueFunction] = None, transfer: str = "second-price"
) -> Auction:
    m = _mech(prior, reserve, transfer, priority, valfn)
    return Auction(f"english(r={reserve}{_tag(transfer)})", m, EnglishMenu(reserve), efficient=reserve == 0)


def screening(
    prior: JointDist, reserve: int, screen: int, priority=None, valfn=None, sealed: bool = True, transfer: str = "second-price"
) -> Auction:
    """Ascending, screening auction; ``sealed=False`` lets shills see the final-phase reports."""
    m = _mech(prior, reserve, transfer, priority, valfn)
    name = f"screening(r={reserve},y={screen}{'' if sealed else ',public'}{_tag(transfer)})"
    return Auction(name, m, ScreeningMenu(reserve, screen, sealed=sealed), efficient=reserve == 0)


def _path_priced(prior, reserve, priority, valfn, rule, name, efficient):
    holder: dict = {}
    order = PriorityOrder(tuple(priority)) if priority is not None else PriorityOrder.natural(prior.n)
    t = TransferRule("pay-as-bid-at-state", locator=_last_action_locator(holder), path_dependent=True)
    m = Mechanism(AllocationRule(reserve, order), t, prior, valfn or ValueFunction.private())
    a = Auction(name, m, rule, efficient=efficient)
    holder["auction"] = a
    return a


def hybrid(prior: JointDist, mid: int = 2, high: int = 3, priority=None, valfn=None) -> Auction:
    """The efficient Dutch variant with a screen; winners pay the pay-as-bid price of their last action."""
    top = prior.M - 1
    return _path_priced(prior, 0, priority, valfn, HybridMenu(top, mid, high), f"hybrid(mid={mid},high={high})", True)


def dutch_last_action(prior: JointDist, reserve: int, priority=None, valfn=None) -> Auction:
    """Dutch menu priced by the last-action rule; must agree with :func:`dutch`."""
    return _path_priced(prior, reserve, priority, valfn, DutchMenu(reserve), f"dutch-la(r={reserve})", reserve == 0)


def custom(prior: JointDist, reserve: int, table: Mapping, initial_mover, transfer="pab-optimal", priority=None, valfn=None, name="custom") -> Auction:
    rule = TableMenu(table, initial_mover)
    if transfer == "last-action":
        return _path_priced(prior, reserve, priority, valfn, rule, name, reserve == 0)
    return Auction(name, _mech(prior, reserve, transfer, priority, valfn), rule, efficient=reserve == 0)


def single_action(
    prior: JointDist,
    reserve: int,
    pricing: str = "first-price",
    experiment: Experiment | str = "empty",
    order: Optional[Sequence[int]] = None,
    priority=None,
    valfn=None,
) -> Auction:
    """A single-action auction: bidders move once in ``order`` after observing ``experiment``.

    ``first-price``: the winner pays the pay-as-bid price at her observed state.
    ``second-price``: the winner pays t̃².
    ``threshold``: the winner pays her smallest winning type.
    """
    exp = Experiment(experiment) if isinstance(experiment, str) else experiment
    order = tuple(order) if order is not None else tuple(range(prior.n))
    pr = PriorityOrder(tuple(priority)) if priority is not None else PriorityOrder.natural(prior.n)
    alloc = AllocationRule(reserve, pr)
    v = valfn or ValueFunction.private()
    if pricing == "first-price":

        def locate(profile, i):
            return observed_state(order, exp, profile, i, prior.M), (profile[i],)

        t = TransferRule("pay-as-bid-at-state", locator=locate)
    elif pricing in ("second-price", "threshold"):
        t = TransferRule(pricing)
    else:
        raise ValueError(f"unknown pricing {pricing!r}")
    m = Mechanism(alloc, t, prior, v)
    name = f"{pricing}-{'sealed' if exp.kind == 'empty' else exp.kind}(r={reserve})"
    return Auction(name, m, SingleActionMenu(order), single_action=True, order=order, experiment=exp, efficient=reserve == 0)


def first_price_sealed(prior, reserve, public: bool = False, **kw) -> Auction:
    return single_action(prior, reserve, "first-price", "identity" if public else "empty", **kw)


def second_price_sealed(prior, reserve, threshold: bool = False, **kw) -> Auction:
    return single_action(prior, reserve, "threshold" if threshold else "second-price", "empty", **kw)


# Structural predicates -------------------------------------------------


def is_semi_dutch(auction: Auction, cutoff: int) -> bool:
    """Efficient auction that reaches {w < θ^cutoff}^N whenever all types lie below the cutoff, then runs reserve-0 Dutch."""
    if auction.mech.alloc.reserve != 0:
        return False
    n = auction.n
    below = tuple(range(cutoff))
    target = tuple(below for _ in range(n))
    ref = DutchMenu(0)
    if cutoff == 0:
        return True
    for prof in itertools.product(range(cutoff), repeat=n):
        nodes, terminal = truthful_path(auction, prof)
        states = [s for s, _, _ in nodes]
        idx = next((j for j, s in enumerate(states) if s == target), None)
        if idx is None:
            # Reaching the target as a terminal state leaves nothing for Dutch to do.
            if terminal == target:
                continue
            return False
        for state, mover, _ in nodes[idx:]:
            mine = auction.menu(state, mover)
            theirs = ref.cells(auction.mech, state, mover)
            if [(c.types, c.next) for c in mine] != [(c.types, c.next) for c in theirs]:
                return False
        # The mover at the target must be the one Dutch would pick there.
        expect = max(range(n), key=lambda i: auction.mech.alloc.priority.key(target[i][-1], i))
        if nodes[idx][1] != expect:
            return False
    return True


def max_actions(auction: Auction) -> int:
    """Worst case, over truthful profiles, of the number of actions taken by any one bidder."""
    worst = 0
    for prof in itertools.product(range(auction.M), repeat=auction.n):
        nodes, _ = truthful_path(auction, prof)
        counts: dict = {}
        for _, m, _ in nodes:
            counts[m] = counts.get(m, 0) + 1
        worst = max([worst] + list(counts.values()))
    return worst


@dataclass(frozen=True)
class QueryCounts:
    english: int
    screening: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.screening, self.english)


def query_counts(reserve: int, screen: int, M: int) -> QueryCounts:
    """Closed forms Q^E = M − ρ* + 1 and Q^{AS,Y} = Y − ρ* + 2, translated to 0-based positions."""
    return QueryCounts(english=M - reserve, screening=screen - reserve + 2)


__all__ = [
    "Cell",
    "MenuError",
    "MenuRule",
    "DutchMenu",
    "EnglishMenu",
    "ScreeningMenu",
    "HybridMenu",
    "TableMenu",
    "SingleActionMenu",
    "Experiment",
    "Auction",
    "choose_next",
    "observed_state",
    "truthful_path",
    "dutch",
    "dutch_last_action",
    "english",
    "screening",
    "hybrid",
    "custom",
    "single_action",
    "first_price_sealed",
    "second_price_sealed",
    "is_semi_dutch",
    "max_actions",
    "QueryCounts",
    "query_counts",
]
