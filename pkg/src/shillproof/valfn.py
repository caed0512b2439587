"""Interdependent value functions v(θ_i, θ_{-i}) on an atom grid.

Arguments are atom positions; the returned value is an exact rational.
Opponents enter only as a multiset, so every kind is symmetric in them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

from .dist import AtomGrid, JointDist, Unreachable, as_rational, fmt_rational

KINDS = ("private", "additive", "max-common", "table")


@dataclass(frozen=True)
class ValueFunction:
    kind: str = "private"
    kappa: Fraction = Fraction(0)
    # (own position, sorted opponent positions) -> value
    table: Optional[Mapping[tuple[int, tuple[int, ...]], Fraction]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown value-function kind {self.kind!r}")
        object.__setattr__(self, "kappa", as_rational(self.kappa))
        if self.kind == "table":
            if not self.table:
                raise ValueError("table kind needs a table")
            fixed = {}
            for (own, others), val in self.table.items():
                key = (own, tuple(others))
                if tuple(sorted(others)) != key[1]:
                    raise ValueError(f"table key {key} must list opponents sorted; asymmetric tables are rejected")
                fixed[key] = as_rational(val)
            object.__setattr__(self, "table", fixed)

    @classmethod
    def private(cls) -> "ValueFunction":
        return cls("private")

    @classmethod
    def additive(cls, kappa) -> "ValueFunction":
        return cls("additive", kappa=as_rational(kappa))

    @classmethod
    def max_common(cls) -> "ValueFunction":
        return cls("max-common")

    @property
    def is_private(self) -> bool:
        return self.kind == "private" or (self.kind == "additive" and self.kappa == 0)

    def value(self, grid: AtomGrid, own: int, others: Sequence[int]) -> Fraction:
        a = grid.atoms
        if self.kind == "private":
            return a[own]
        if self.kind == "additive":
            return a[own] + self.kappa * sum((a[k] for k in others), Fraction(0))
        if self.kind == "max-common":
            return max([a[own]] + [a[k] for k in others])
        key = (own, tuple(sorted(others)))
        try:
            return self.table[key]
        except KeyError:
            raise ValueError(f"value table has no entry for {key}") from None

    def at(self, grid: AtomGrid, profile: Sequence[int], i: int) -> Fraction:
        """v for bidder ``i`` at a full profile."""
        return self.value(grid, profile[i], [k for j, k in enumerate(profile) if j != i])

    def label(self) -> str:
        if self.kind == "additive":
            return f"additive({fmt_rational(self.kappa)})"
        return self.kind


@dataclass
class InterdepVerdict:
    holds: bool
    conditions: dict = field(default_factory=dict)
    scope: str = "condition (iv) checked on stencils lying entirely in the region own >= max(others)"

    def failing(self) -> list[str]:
        return [name for name, (ok, _) in self.conditions.items() if not ok]


def _vec_value(v: ValueFunction, grid: AtomGrid, x: Sequence[int]) -> Fraction:
    # Coordinate 0 is the bidder's own type, the rest are opponents.
    return v.value(grid, x[0], x[1:])


def _in_region(x: Sequence[int]) -> bool:
    return all(x[0] >= k for k in x[1:])


def _bump(x: Sequence[int], *axes: int) -> tuple[int, ...]:
    y = list(x)
    for ax in axes:
        y[ax] += 1
    return tuple(y)


def check_interdep(v: ValueFunction, grid: AtomGrid, n: int) -> InterdepVerdict:
    """Enumerate the four interdependence conditions and return per-condition witnesses."""
    M = grid.M
    a = grid.atoms
    conds: dict[str, tuple[bool, Optional[tuple]]] = {}
    profiles = list(itertools.product(range(M), repeat=n))

    def first(pred, items):
        for item in items:
            if not pred(item):
                return item
        return None

    zeros = (0,) * (n - 1)
    w = first(lambda k: v.value(grid, k, zeros) == a[k], range(M))
    conds["normalization"] = (w is None, None if w is None else (w, zeros))

    def increasing(x):
        for ax in range(1, n):
            if x[ax] + 1 < M and _vec_value(v, grid, _bump(x, ax)) < _vec_value(v, grid, x):
                return False
        return True

    w = first(increasing, profiles)
    conds["increasing_in_others"] = (w is None, w)

    def single_crossing(x):
        for j in range(1, n):
            if x[0] >= x[j]:
                swapped = list(x)
                swapped[0], swapped[j] = x[j], x[0]
                if _vec_value(v, grid, x) < _vec_value(v, grid, swapped):
                    return False
        return True

    w = first(single_crossing, profiles)
    conds["single_crossing"] = (w is None, w)

    def supermodular(x):
        for p, q in itertools.combinations(range(n), 2):
            pts = [x, _bump(x, p), _bump(x, q), _bump(x, p, q)]
            if any(max(pt) >= M for pt in pts) or not all(_in_region(pt) for pt in pts):
                continue
            vals = [_vec_value(v, grid, pt) for pt in pts]
            if vals[3] - vals[1] - vals[2] + vals[0] < 0:
                return False
        return True

    def decreasing_differences(x):
        # Divided differences so unequal grid gaps do not masquerade as curvature.
        for ax in range(n):
            pts = [x, _bump(x, ax), _bump(x, ax, ax)]
            if any(max(pt) >= M for pt in pts) or not all(_in_region(pt) for pt in pts):
                continue
            vals = [_vec_value(v, grid, pt) for pt in pts]
            g1 = a[x[ax] + 1] - a[x[ax]]
            g2 = a[x[ax] + 2] - a[x[ax] + 1]
            if (vals[2] - vals[1]) / g2 > (vals[1] - vals[0]) / g1:
                return False
        return True

    w = first(supermodular, profiles)
    conds["supermodular_in_region"] = (w is None, w)
    w = first(decreasing_differences, profiles)
    conds["decreasing_differences_in_region"] = (w is None, w)
    return InterdepVerdict(all(ok for ok, _ in conds.values()), conds)


def cross_differences(v: ValueFunction, grid: AtomGrid, n: int) -> dict:
    """All in-region axis-pair second differences keyed by (profile, axes)."""
    M = grid.M
    out = {}
    for x in itertools.product(range(M), repeat=n):
        for p, q in itertools.combinations(range(n), 2):
            pts = [x, _bump(x, p), _bump(x, q), _bump(x, p, q)]
            if any(max(pt) >= M for pt in pts) or not all(_in_region(pt) for pt in pts):
                continue
            vals = [_vec_value(v, grid, pt) for pt in pts]
            out[(x, (p, q))] = vals[3] - vals[1] - vals[2] + vals[0]
    return out


def more_commonly_valued(v_more: ValueFunction, v_less: ValueFunction, grid: AtomGrid, n: int) -> bool:
    """Pointwise dominance and dominance of every in-region cross difference."""
    for x in itertools.product(range(grid.M), repeat=n):
        if _vec_value(v_more, grid, x) < _vec_value(v_less, grid, x):
            return False
    da = cross_differences(v_more, grid, n)
    db = cross_differences(v_less, grid, n)
    return all(da[key] >= db[key] for key in da)


def conditional_value(
    v: ValueFunction,
    joint: JointDist,
    winner: Callable[[tuple[int, ...]], Optional[int]],
    i: int,
    k: int,
    k_true: int,
    sets: Sequence[Sequence[int]],
    evaluate: str = "acted",
    fixed: Optional[Mapping[int, int]] = None,
) -> Fraction:
    """E[v(·, θ_{-i}) | θ_i = θ^{k_true}, θ_{-i} ∈ Θ_{-i}, i wins when acting as θ^k].

    ``evaluate="acted"`` puts θ^k in the own slot of v; ``"true"`` puts
    θ^{k_true} there, which is the value a deviating type actually enjoys.
    ``winner`` maps a profile to the winning bidder (or None).
    """
    if evaluate not in ("acted", "true"):
        raise ValueError(f"evaluate must be 'acted' or 'true', not {evaluate!r}")
    pin = dict(fixed or {})
    pin[i] = k_true
    own_slot = k if evaluate == "acted" else k_true
    num = Fraction(0)
    den = Fraction(0)
    for prof, p in joint.conditional(sets, pin):
        acted = prof[:i] + (k,) + prof[i + 1 :]
        if winner(acted) != i:
            continue
        others = prof[:i] + prof[i + 1 :]
        num += p * v.value(joint.grid, own_slot, others)
        den += p
    if den == 0:
        raise Unreachable(f"bidder {i} never wins acting as position {k} on {tuple(map(tuple, sets))}")
    return num / den


def parse_valfn(spec: Mapping, grid: Optional[AtomGrid] = None) -> ValueFunction:
    """Config block: {"kind": "additive", "kappa": "1/2"} or a table keyed "own|o1,o2" by value."""
    kind = spec.get("kind", "private")
    if kind == "additive":
        return ValueFunction.additive(spec["kappa"])
    if kind == "table":
        if grid is None:
            raise ValueError("table value functions need the grid")
        table = {}
        for key, val in spec["table"].items():
            own, _, rest = key.partition("|")
            others = tuple(grid.position(o) for o in rest.split(",") if o.strip())
            if list(others) != sorted(others):
                raise ValueError(f"table key {key!r}: opponents must be sorted")
            table[(grid.position(own), others)] = as_rational(val)
        return ValueFunction("table", table=table)
    return ValueFunction(kind)


def emit_valfn(v: ValueFunction, grid: Optional[AtomGrid] = None) -> dict:
    if v.kind == "additive":
        return {"kind": "additive", "kappa": fmt_rational(v.kappa)}
    if v.kind == "table":
        a = grid.atoms
        return {
            "kind": "table",
            "table": {
                f"{fmt_rational(a[own])}|{','.join(fmt_rational(a[o]) for o in others)}": fmt_rational(val)
                for (own, others), val in sorted(v.table.items())
            },
        }
    return {"kind": v.kind}


__all__ = [
    "ValueFunction",
    "InterdepVerdict",
    "check_interdep",
    "cross_differences",
    "more_commonly_valued",
    "conditional_value",
    "parse_valfn",
    "emit_valfn",
]
