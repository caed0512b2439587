"""Game-tree solvers: menu validation, traces, shill-deviation checks, credibility.

All checks are exhaustive and exact.  A node of the game is a pair
(Θ, mover); terminal nodes have mover None.  Revenue is always the sum of
real bidders' transfers, and shill bidders have true type 0.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .auctions import Auction
from .dist import Unreachable, fmt_rational
from .mech import PossibleValues, Profile, representative, state_profiles, with_cell

DEFAULT_STATE_CAP = 1_000_000


class SizeCapExceeded(RuntimeError):
    """The reachable state space is larger than the configured cap."""


def state_cap(override: Optional[int] = None) -> int:
    if override is not None:
        return override
    env = os.environ.get("SHILLPROOF_STATE_CAP")
    return int(env) if env else DEFAULT_STATE_CAP


@dataclass
class Verdict:
    holds: bool
    gap: Fraction = Fraction(0)
    witness: Optional[dict] = None
    states_enumerated: int = 0
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "holds": self.holds,
            "gap": fmt_rational(self.gap),
            "witness": _jsonable(self.witness),
            "states_enumerated": self.states_enumerated,
            "detail": _jsonable(self.detail),
        }


def _jsonable(x):
    if isinstance(x, Fraction):
        return fmt_rational(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _state_json(state: PossibleValues) -> list[list[int]]:
    return [list(s) for s in state]


def _state_from_json(obj) -> PossibleValues:
    return tuple(tuple(s) for s in obj)


# Menu validation -------------------------------------------------------


def reachable_nodes(auction: Auction, cap: Optional[int] = None):
    """Every (Θ, mover) node reachable under some sequence of choices, plus terminal states."""
    limit = state_cap(cap)
    start = (auction.root(), auction.initial())
    seen = {start}
    stack = [start]
    terminals = set()
    while stack:
        state, mover = stack.pop()
        if mover is None:
            terminals.add(state)
            continue
        for cell in auction.menu(state, mover):
            node = (with_cell(state, mover, cell.types), cell.next)
            if node not in seen:
                seen.add(node)
                if len(seen) > limit:
                    raise SizeCapExceeded(f"more than {limit} reachable nodes in {auction.name}")
                stack.append(node)
    return seen, terminals


def _distinguishable(auction: Auction, state, mover, a: Sequence[int], b: Sequence[int]) -> bool:
    others = [s for j, s in enumerate(state) if j != mover]
    out = auction.mech.outcome
    for rest in itertools.product(*others):
        for x in a:
            ox = out(rest[:mover] + (x,) + rest[mover:])
            for y in b:
                if ox != out(rest[:mover] + (y,) + rest[mover:]):
                    return True
    return False


def validate_menu(auction: Auction, cap: Optional[int] = None) -> Verdict:
    """Partition, at least two cells, informative cells, constant outcomes on terminal states."""
    nodes, terminals = reachable_nodes(auction, cap)
    for state, mover in sorted(nodes, key=repr):
        if mover is None:
            continue
        cells = auction.menu(state, mover)
        flat = sorted(k for c in cells for k in c.types)
        where = {"state": _state_json(state), "mover": mover}
        if flat != list(state[mover]):
            return Verdict(False, witness={"failure": "partition", **where}, states_enumerated=len(nodes))
        if len(cells) < 2:
            return Verdict(False, witness={"failure": "single-cell menu", **where}, states_enumerated=len(nodes))
        for c1, c2 in itertools.combinations(cells, 2):
            if not _distinguishable(auction, state, mover, c1.types, c2.types):
                return Verdict(
                    False,
                    witness={"failure": "uninformative", "cells": [list(c1.types), list(c2.types)], **where},
                    states_enumerated=len(nodes),
                )
    for state in sorted(terminals):
        profs = state_profiles(state)
        first = auction.mech.outcome(next(profs))
        for p in profs:
            if auction.mech.outcome(p) != first:
                return Verdict(
                    False,
                    witness={"failure": "terminal outcome varies", "state": _state_json(state), "profile": list(p)},
                    states_enumerated=len(nodes),
                )
    return Verdict(True, states_enumerated=len(nodes))


# Traces ----------------------------------------------------------------

Policy = Callable[[PossibleValues, int], Sequence[int]]


@dataclass
class TraceStep:
    state: PossibleValues
    mover: int
    cells: list
    chosen: tuple[int, ...]
    shill: bool


@dataclass
class Trace:
    steps: list[TraceStep]
    terminal: PossibleValues
    winner: Optional[int]
    transfers: tuple[Fraction, ...]

    def revenue(self, real: Iterable[int]) -> Fraction:
        return sum((self.transfers[j] for j in real), Fraction(0))


def zero_policy(state: PossibleValues, mover: int) -> Sequence[int]:
    """Play as a real bidder of type 0 would."""
    return (0,)


def table_policy(choices: dict) -> Policy:
    """Follow recorded choices, defaulting to type-0 play elsewhere."""

    def pick(state, mover):
        return choices.get((state, mover), (0,))

    return pick


def trace(auction: Auction, profile: Profile, shills: Iterable[int] = (), policy: Policy = zero_policy) -> Trace:
    """Real bidders pick the cell holding their type; shills follow ``policy`` (a type or a cell)."""
    shills = set(shills)
    auction = auction.for_shills(shills)
    state, mover = auction.root(), auction.initial()
    steps = []
    while mover is not None:
        cells = auction.menu(state, mover)
        if mover in shills:
            want = tuple(policy(state, mover))
            cell = next((c for c in cells if c.types == want), None)
            if cell is None:
                cell = next((c for c in cells if want and want[0] in c.types and len(want) == 1), None)
            if cell is None:
                raise ValueError(f"shill policy chose {want}, which is not a cell at {state}")
        else:
            cell = next(c for c in cells if profile[mover] in c.types)
        steps.append(TraceStep(state, mover, [c.types for c in cells], cell.types, mover in shills))
        state = with_cell(state, mover, cell.types)
        mover = cell.next
    out = auction.mech.outcome(representative(state))
    return Trace(steps, state, out.winner, out.transfers)


# Weak shill-proofness ----------------------------------------------------


SHILL_PRIORS = ("conditioned", "marginal")


class _WeakSolver:
    """Backward induction for one shill set.

    ``shill_prior="conditioned"`` draws real types from F given θ_S = 0;
    ``"marginal"`` draws them from F's marginal on the real bidders.  The
    two agree for independent priors.
    """

    def __init__(self, auction: Auction, shills: frozenset, cap: Optional[int], shill_prior: str = "conditioned"):
        if shill_prior not in SHILL_PRIORS:
            raise ValueError(f"unknown shill prior {shill_prior!r}")
        self.a = auction
        self.S = shills
        self.real = [j for j in range(auction.n) if j not in shills]
        self.fixed = {s: 0 for s in shills} if shill_prior == "conditioned" else {}
        self.free = () if shill_prior == "conditioned" else tuple(sorted(shills))
        self.best: dict = {}
        self.zero: dict = {}
        self.choice: dict = {}
        self.cap = state_cap(cap)

    def _posterior(self, state, mover, cells):
        post = self.a.mech.prior.conditional(state, self.fixed, self.free)
        probs = []
        for c in cells:
            members = set(c.types)
            probs.append(sum((p for prof, p in post if prof[mover] in members), Fraction(0)))
        return probs

    def _terminal(self, state):
        return self.a.mech.outcome(representative(state)).revenue(self.real)

    def value(self, state, mover, optimize: bool) -> Optional[Fraction]:
        memo = self.best if optimize else self.zero
        key = (state, mover)
        if key in memo:
            return memo[key]
        if len(self.best) + len(self.zero) > self.cap:
            raise SizeCapExceeded(f"weak-SP search exceeded {self.cap} states")
        try:
            self.a.mech.prior.conditional(state, self.fixed, self.free)
        except Unreachable:
            memo[key] = None
            return None
        if mover is None:
            v = self._terminal(state)
        else:
            cells = self.a.menu(state, mover)
            if mover in self.S:
                if optimize:
                    v, pick = None, None
                    for c in cells:
                        cv = self.value(with_cell(state, mover, c.types), c.next, True)
                        if cv is not None and (v is None or cv > v):
                            v, pick = cv, c.types
                    self.choice[key] = pick
                else:
                    c = next(c for c in cells if 0 in c.types)
                    v = self.value(with_cell(state, mover, c.types), c.next, False)
            else:
                v = Fraction(0)
                for c, p in zip(cells, self._posterior(state, mover, cells)):
                    if p == 0:
                        continue
                    cv = self.value(with_cell(state, mover, c.types), c.next, optimize)
                    v += p * cv
        memo[key] = v
        return v

    def deviations(self):
        """Shill choices on the optimal policy that differ from type-0 play, in a canonical order."""
        out = []
        for (state, mover), pick in sorted(self.choice.items(), key=lambda kv: repr(kv[0])):
            if pick is not None and 0 not in pick and self.best.get((state, mover)) is not None:
                out.append({"state": _state_json(state), "mover": mover, "cell": list(pick)})
        return out


def _reachable_deviations(auction: Auction, solver: _WeakSolver) -> list[dict]:
    """Keep only deviating shill nodes that the optimal policy actually reaches."""
    root = (auction.root(), auction.initial())
    seen = {root}
    stack = [root]
    out = []
    while stack:
        state, mover = stack.pop()
        if mover is None:
            continue
        cells = auction.menu(state, mover)
        if mover in solver.S:
            pick = solver.choice.get((state, mover))
            nxt = [c for c in cells if c.types == pick]
            if pick is not None and 0 not in pick:
                out.append({"state": _state_json(state), "mover": mover, "cell": list(pick)})
        else:
            probs = solver._posterior(state, mover, cells)
            nxt = [c for c, p in zip(cells, probs) if p > 0]
        for c in nxt:
            node = (with_cell(state, mover, c.types), c.next)
            if node not in seen:
                seen.add(node)
                stack.append(node)
    out.sort(key=repr)
    return out


def weak_sp_check(
    auction: Auction, shills: Iterable[int], cap: Optional[int] = None, shill_prior: str = "conditioned"
) -> Verdict:
    """Exact backward induction of the shills' decision problem against truthful real bidders."""
    S = frozenset(shills)
    auction = auction.for_shills(S)
    solver = _WeakSolver(auction, S, cap, shill_prior)
    root, first = auction.root(), auction.initial()
    best = solver.value(root, first, True)
    base = solver.value(root, first, False)
    gap = best - base
    holds = gap <= 0
    witness = None
    if not holds:
        witness = {
            "shills": sorted(S),
            "shill_prior": shill_prior,
            "deviations": _reachable_deviations(auction, solver),
            "deviation_revenue": best,
            "truthful_revenue": base,
        }
    return Verdict(
        holds,
        gap,
        witness,
        len(solver.best) + len(solver.zero),
        {"shills": sorted(S), "best": best, "zero": base, "shill_prior": shill_prior},
    )


def replay_weak(auction: Auction, witness: dict) -> Fraction:
    """Expected revenue under a recorded deviation, minus type-0 play; reproduces the verdict gap."""
    S = frozenset(witness["shills"])
    auction = auction.for_shills(S)
    choices = {(_state_from_json(d["state"]), d["mover"]): tuple(d["cell"]) for d in witness["deviations"]}
    solver = _WeakSolver(auction, S, None, witness.get("shill_prior", "conditioned"))
    root, first = auction.root(), auction.initial()

    def follow(state, mover):
        key = (state, mover)
        if mover is None:
            return solver._terminal(state)
        cells = auction.menu(state, mover)
        if mover in S:
            want = choices.get(key)
            c = next(c for c in cells if (c.types == want if want else 0 in c.types))
            return follow(with_cell(state, mover, c.types), c.next)
        total = Fraction(0)
        for c, p in zip(cells, solver._posterior(state, mover, cells)):
            if p:
                total += p * follow(with_cell(state, mover, c.types), c.next)
        return total

    return follow(root, first) - solver.value(root, first, False)


def weak_witness_nodes(auction: Auction, witness: dict, limit: int = 10_000) -> list[dict]:
    """Depth-first walk of the game under a recorded weak-SP deviation.

    Shill nodes record the chosen cell; real-bidder nodes record the
    posterior probability of each cell; terminals record real revenue.
    Zero-probability branches are skipped.
    """
    S = frozenset(witness["shills"])
    auction = auction.for_shills(S)
    choices = {(_state_from_json(d["state"]), d["mover"]): tuple(d["cell"]) for d in witness["deviations"]}
    solver = _WeakSolver(auction, S, None, witness.get("shill_prior", "conditioned"))
    out: list[dict] = []

    def walk(state, mover, depth, prob):
        if len(out) >= limit:
            return
        if mover is None:
            out.append({"depth": depth, "state": state, "terminal": True, "prob": prob, "revenue": solver._terminal(state)})
            return
        cells = auction.menu(state, mover)
        node = {"depth": depth, "state": state, "mover": mover, "shill": mover in S, "cells": [c.types for c in cells], "prob": prob}
        out.append(node)
        if mover in S:
            want = choices.get((state, mover))
            c = next(c for c in cells if (c.types == want if want else 0 in c.types))
            node["chosen"] = c.types
            node["deviates"] = want is not None
            walk(with_cell(state, mover, c.types), c.next, depth + 1, prob)
        else:
            probs = solver._posterior(state, mover, cells)
            node["posterior"] = probs
            for c, p in zip(cells, probs):
                if p:
                    walk(with_cell(state, mover, c.types), c.next, depth + 1, prob * p)

    walk(auction.root(), auction.initial(), 0, Fraction(1))
    return out


def _shill_sets(n: int, include_all: bool = True):
    for r in range(1, n + 1 if include_all else n):
        yield from itertools.combinations(range(n), r)


def weak_sp_all(auction: Auction, cap: Optional[int] = None, shill_prior: str = "conditioned") -> Verdict:
    total = 0
    worst = None
    for S in _shill_sets(auction.n):
        v = weak_sp_check(auction, S, cap, shill_prior)
        total += v.states_enumerated
        if not v.holds:
            v.states_enumerated = total
            return v
        if worst is None or v.gap > worst.gap:
            worst = v
    return Verdict(True, worst.gap if worst else Fraction(0), None, total)


# Strong shill-proofness --------------------------------------------------


def _best_response(auction: Auction, profile: Profile, S: frozenset, real: list, memo: dict, state, mover):
    key = (state, mover)
    if key in memo:
        return memo[key]
    if mover is None:
        res = (auction.mech.outcome(representative(state)).revenue(real), ())
    else:
        cells = auction.menu(state, mover)
        if mover in S:
            res = None
            for c in cells:
                v, path = _best_response(auction, profile, S, real, memo, with_cell(state, mover, c.types), c.next)
                if res is None or v > res[0]:
                    res = (v, ((state, mover, c.types),) + path)
        else:
            c = next(c for c in cells if profile[mover] in c.types)
            v, path = _best_response(auction, profile, S, real, memo, with_cell(state, mover, c.types), c.next)
            res = (v, path)
    memo[key] = res
    return res


def strong_sp_check(auction: Auction, shills: Iterable[int], profile: Profile) -> Verdict:
    """Ex-post check at one realization; shill coordinates of ``profile`` are ignored (set to 0)."""
    S = frozenset(shills)
    auction = auction.for_shills(S)
    real = [j for j in range(auction.n) if j not in S]
    prof = tuple(0 if j in S else k for j, k in enumerate(profile))
    memo: dict = {}
    best, path = _best_response(auction, prof, S, real, memo, auction.root(), auction.initial())
    base = trace(auction, prof, S, zero_policy).revenue(real)
    gap = best - base
    witness = None
    if gap > 0:
        witness = {
            "shills": sorted(S),
            "profile": list(prof),
            "deviations": [
                {"state": _state_json(s), "mover": m, "cell": list(c)} for s, m, c in path if m in S
            ],
            "deviation_revenue": best,
            "truthful_revenue": base,
        }
    return Verdict(gap <= 0, gap, witness, len(memo))


def replay_strong(auction: Auction, witness: dict) -> Fraction:
    S = frozenset(witness["shills"])
    real = [j for j in range(auction.n) if j not in S]
    prof = tuple(witness["profile"])
    choices = {(_state_from_json(d["state"]), d["mover"]): tuple(d["cell"]) for d in witness["deviations"]}
    dev = trace(auction, prof, S, table_policy(choices)).revenue(real)
    return dev - trace(auction, prof, S, zero_policy).revenue(real)


def support_profiles(auction: Auction, S: frozenset):
    fixed = {s: 0 for s in S}
    try:
        post = auction.mech.prior.conditional(auction.root(), fixed)
    except Unreachable:
        return []
    return [prof for prof, _ in post]


def strong_sp_all(auction: Auction, cap: Optional[int] = None) -> Verdict:
    limit = state_cap(cap)
    total = 0
    for S in _shill_sets(auction.n, include_all=False):
        S = frozenset(S)
        for prof in support_profiles(auction, S):
            v = strong_sp_check(auction, S, prof)
            total += v.states_enumerated
            if total > limit:
                raise SizeCapExceeded(f"strong-SP search exceeded {limit} states")
            if not v.holds:
                v.states_enumerated = total
                return v
    return Verdict(True, Fraction(0), None, total)


# Credibility -------------------------------------------------------------


def credibility_check(auction: Auction, cap: Optional[int] = None) -> Verdict:
    """Direct characterization for single-action auctions.

    For every θ the auctioneer may show each bidder i a profile that keeps
    θ_i, keeps every earlier nonzero type up to what i's experiment reveals,
    and is free elsewhere; at most one bidder may be told she wins.
    """
    if not auction.single_action:
        raise ValueError("credibility is implemented for single-action auctions only")
    mech = auction.mech
    n, M = auction.n, auction.M
    order = auction.order
    exp = auction.experiment
    limit = state_cap(cap)
    count = 0
    for theta in support_profiles(auction, frozenset()):
        truthful = sum(mech.outcome(theta).transfers, Fraction(0))
        best_win: list = [None] * n
        best_lose: list = [None] * n
        for i in range(n):
            earlier = set(order[: order.index(i)])
            axes = []
            for j in range(n):
                if j == i:
                    axes.append((theta[i],))
                elif j in earlier and theta[j] != 0:
                    axes.append(exp.block_of(theta[j], M))
                else:
                    axes.append(tuple(range(M)))
            for rep in itertools.product(*axes):
                count += 1
                if count > limit:
                    raise SizeCapExceeded(f"credibility search exceeded {limit} reports")
                o = mech.outcome(rep)
                t = o.transfers[i]
                if o.winner == i:
                    if best_win[i] is None or t > best_win[i][0]:
                        best_win[i] = (t, rep)
                else:
                    if best_lose[i] is None or t > best_lose[i][0]:
                        best_lose[i] = (t, rep)
        base = [bl for bl in best_lose]
        options = []
        if all(b is not None for b in base):
            options.append((sum((b[0] for b in base), Fraction(0)), None))
        for k in range(n):
            if best_win[k] is None:
                continue
            if all(base[j] is not None for j in range(n) if j != k):
                val = best_win[k][0] + sum((base[j][0] for j in range(n) if j != k), Fraction(0))
                options.append((val, k))
        best, k = max(options, key=lambda o: o[0])
        if best > truthful:
            reports = [list((best_win[j] if j == k else base[j])[1]) for j in range(n)]
            return Verdict(
                False,
                best - truthful,
                {"profile": list(theta), "reports": reports, "deviation_revenue": best, "truthful_revenue": truthful},
                count,
            )
    return Verdict(True, Fraction(0), None, count)


__all__ = [
    "Verdict",
    "SizeCapExceeded",
    "state_cap",
    "reachable_nodes",
    "validate_menu",
    "Trace",
    "TraceStep",
    "trace",
    "zero_policy",
    "table_policy",
    "weak_sp_check",
    "weak_witness_nodes",
    "weak_sp_all",
    "replay_weak",
    "strong_sp_check",
    "strong_sp_all",
    "replay_strong",
    "support_profiles",
    "credibility_check",
]
