"""Discrete type distributions on an atom grid.

Everything is exact: masses are ``Fraction`` objects.  Continuous cdfs are
evaluated once at 50 significant digits and converted to rationals, after
which no floating point is involved.

Atom positions are 0-based throughout the package: position ``k`` holds
``grid.atoms[k]``, and position 0 is the zero type.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import mpmath

Profile = tuple[int, ...]

CDF_DIGITS = 50
AFFILIATION_PROFILE_CAP = 20_000


class DistributionError(ValueError):
    """Malformed distribution input."""


class UndefinedVirtualValue(DistributionError):
    """Virtual value requested at a zero-mass atom."""


class ConstructionFailed(DistributionError):
    """A distribution constructor could not meet its post-conditions."""


class Unreachable(DistributionError):
    """Conditioning on an event of probability zero."""


def as_rational(x) -> Fraction:
    """Parse ints, Fractions and decimal or ``p/q`` strings exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise DistributionError(f"refusing float {x!r}; pass a string or Fraction")
    try:
        return Fraction(str(x).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DistributionError(f"not a rational number: {x!r}") from exc


def fmt_rational(x: Fraction) -> str:
    """Inverse of :func:`as_rational` for emission: ``"p/q"`` or ``"p"``."""
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class AtomGrid:
    atoms: tuple[Fraction, ...]

    def __post_init__(self):
        atoms = tuple(as_rational(a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if len(atoms) < 2:
            raise DistributionError("a grid needs at least two atoms")
        if atoms[0] != 0:
            raise DistributionError("the first atom must be exactly 0")
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            raise DistributionError("atoms must be strictly increasing")

    @classmethod
    def of(cls, values: Iterable) -> "AtomGrid":
        return cls(tuple(as_rational(v) for v in values))

    @property
    def M(self) -> int:
        return len(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __getitem__(self, k: int) -> Fraction:
        return self.atoms[k]

    @property
    def max_gap(self) -> Fraction:
        return max(b - a for a, b in zip(self.atoms, self.atoms[1:]))

    def position(self, value) -> int:
        v = as_rational(value)
        try:
            return self.atoms.index(v)
        except ValueError:
            raise DistributionError(f"{v} is not an atom of the grid") from None


@dataclass(frozen=True)
class MarginalDist:
    grid: AtomGrid
    pmf: tuple[Fraction, ...]

    def __post_init__(self):
        pmf = tuple(as_rational(p) for p in self.pmf)
        object.__setattr__(self, "pmf", pmf)
        if len(pmf) != self.grid.M:
            raise DistributionError("pmf length does not match the grid")
        if any(p < 0 for p in pmf):
            raise DistributionError("negative mass")
        if sum(pmf) != 1:
            raise DistributionError(f"masses sum to {sum(pmf)}, not 1")
        # Only the zero atom may carry no mass (exponential discretizations).
        if any(p == 0 for p in pmf[1:]):
            raise DistributionError("every atom above 0 needs positive mass")

    @classmethod
    def uniform(cls, atoms: Iterable) -> "MarginalDist":
        grid = AtomGrid.of(atoms)
        return cls(grid, tuple(Fraction(1, grid.M) for _ in range(grid.M)))

    @property
    def M(self) -> int:
        return self.grid.M

    @property
    def atoms(self) -> tuple[Fraction, ...]:
        return self.grid.atoms

    def f(self, k: int) -> Fraction:
        return self.pmf[k]

    def cdf(self, k: int) -> Fraction:
        return sum(self.pmf[: k + 1], Fraction(0))

    def survival(self, k: int) -> Fraction:
        """P[w > θ^k]."""
        return 1 - self.cdf(k)

    def mass_of(self, positions: Iterable[int]) -> Fraction:
        return sum((self.pmf[k] for k in positions), Fraction(0))

    def iid(self, n: int) -> "JointDist":
        return JointDist.product(self, n)


def virtual_value(d: MarginalDist, k: int) -> Fraction:
    """φ^k = θ^k − (θ^{k+1} − θ^k)(1 − F(θ^k))/f(θ^k); the top atom maps to itself."""
    if k == d.M - 1:
        return d.atoms[k]
    if d.f(k) == 0:
        raise UndefinedVirtualValue(f"atom {d.atoms[k]} has zero mass")
    gap = d.atoms[k + 1] - d.atoms[k]
    return d.atoms[k] - gap * d.survival(k) / d.f(k)


def virtual_values(d: MarginalDist) -> tuple[Optional[Fraction], ...]:
    """All virtual values, with ``None`` at a zero-mass atom."""
    return tuple(
        None if (d.f(k) == 0 and k < d.M - 1) else virtual_value(d, k) for k in range(d.M)
    )


def is_regular(d: MarginalDist) -> bool:
    defined = [phi for phi in virtual_values(d) if phi is not None]
    return all(a <= b for a, b in zip(defined, defined[1:]))


def regularity_violations(d: MarginalDist) -> list[tuple[int, int, Fraction]]:
    """Adjacent defined pairs (k, k', φ^k − φ^{k'}) where φ decreases."""
    phis = virtual_values(d)
    defined = [(k, phi) for k, phi in enumerate(phis) if phi is not None]
    return [
        (k, k2, a - b) for (k, a), (k2, b) in zip(defined, defined[1:]) if a > b
    ]


def optimal_reserve_index(d: MarginalDist) -> int:
    """Position ρ* of the smallest atom with a non-negative virtual value."""
    for k, phi in enumerate(virtual_values(d)):
        if phi is not None and phi >= 0:
            return k
    raise DistributionError("no atom has a non-negative virtual value")


def sparsity_terms(d: MarginalDist) -> dict[int, Fraction]:
    """θ^k − (θ^{k+1}−θ^k) f(θ^{k+1})/f(θ^k) for every positive-mass k below ρ*."""
    r = optimal_reserve_index(d)
    out = {}
    for k in range(r):
        if d.f(k) == 0:
            continue
        gap = d.atoms[k + 1] - d.atoms[k]
        out[k] = d.atoms[k] - gap * d.f(k + 1) / d.f(k)
    return out


def is_sparse(d: MarginalDist) -> bool:
    return all(term < 0 for term in sparsity_terms(d).values())


def hazards(d: MarginalDist) -> list[Fraction]:
    """Discrete hazard f/(1−F) on atoms with F < 1."""
    return [d.f(k) / d.survival(k) for k in range(d.M) if d.survival(k) > 0]


MHR_SLACK = Fraction(1, 10 ** (CDF_DIGITS - 10))


def is_mhr(d: MarginalDist, family: Optional["ContinuousFamily"] = None) -> bool:
    """Non-decreasing discrete hazard, up to :data:`MHR_SLACK` so cdf rounding in discretized inputs is not mistaken for a dip."""
    h = hazards(d)
    discrete_ok = all(b - a >= -MHR_SLACK for a, b in zip(h, h[1:]))
    if family is None:
        return discrete_ok
    return discrete_ok and family.has_increasing_hazard()


@dataclass(frozen=True)
class ContinuousFamily:
    """A continuous value distribution used only through its cdf.

    ``kind`` is ``"exponential"`` (parameter ``rate``) or ``"table"`` (a
    mapping from atom value to cdf value, which must cover the grid).
    """

    kind: str
    rate: Optional[Fraction] = None
    table: Optional[Mapping[Fraction, Fraction]] = None

    @classmethod
    def exponential(cls, rate) -> "ContinuousFamily":
        r = as_rational(rate)
        if r <= 0:
            raise DistributionError("rate must be positive")
        return cls("exponential", rate=r)

    @classmethod
    def from_table(cls, table: Mapping) -> "ContinuousFamily":
        t = {as_rational(k): as_rational(v) for k, v in table.items()}
        xs = sorted(t)
        if any(t[a] > t[b] for a, b in zip(xs, xs[1:])) or any(v < 0 or v > 1 for v in t.values()):
            raise DistributionError("cdf table must be non-decreasing within [0, 1]")
        return cls("table", table=t)

    def cdf(self, x: Fraction) -> Fraction:
        x = as_rational(x)
        if self.kind == "table":
            try:
                return self.table[x]
            except KeyError:
                raise DistributionError(f"cdf table has no entry for {x}") from None
        if x <= 0:
            return Fraction(0)
        with mpmath.workdps(CDF_DIGITS + 20):
            lam = mpmath.mpf(self.rate.numerator) / self.rate.denominator
            xv = mpmath.mpf(x.numerator) / x.denominator
            val = -mpmath.expm1(-lam * xv)
            return Fraction(mpmath.nstr(val, CDF_DIGITS, strip_zeros=False, min_fixed=-1, max_fixed=1))

    def has_increasing_hazard(self) -> bool:
        # Exponential hazard is constant; tables carry no density information.
        return self.kind == "exponential"


def discretize(family: ContinuousFamily, grid: AtomGrid) -> MarginalDist:
    """Pool continuous draws upward onto the atoms: mass of (θ^{k−1}, θ^k] goes to θ^k."""
    cdfs = [family.cdf(a) for a in grid.atoms[:-1]]
    pmf = [cdfs[0]] + [b - a for a, b in zip(cdfs, cdfs[1:])] + [1 - cdfs[-1]]
    return MarginalDist(grid, tuple(pmf))


def exponential_family_member(m: int) -> MarginalDist:
    """Rate-1 exponential discretized on {0, 2, …, 2m}."""
    return discretize(ContinuousFamily.exponential(1), AtomGrid.of(range(0, 2 * m + 1, 2)))


def construct_sparse(reserve, n_below: int, n_above: int) -> MarginalDist:
    """A regular, sparse distribution with ``n_below`` atoms under ``reserve``.

    Lower atoms are ``0, δ, …, (n_below−1)δ`` with ``δ = reserve/n_below``;
    their masses grow geometrically with ratio ``s = n_below + 1`` so that
    every sparsity term is negative.  The reserve and the ``n_above − 1``
    atoms above it are spaced by ``reserve/n_above`` and share one common
    mass ``s`` times the last lower mass, which keeps φ non-decreasing with
    φ(reserve) = reserve/n_above > 0.  All post-conditions are re-checked.
    """
    rho = as_rational(reserve)
    if n_below < 1 or n_above < 1:
        raise ConstructionFailed("need at least one atom below and one at or above the reserve")
    if rho <= 0:
        raise ConstructionFailed("reserve must be positive")
    delta = rho / n_below
    step = rho / n_above
    atoms = [k * delta for k in range(n_below)] + [rho + j * step for j in range(n_above)]
    s = n_below + 1
    weights = [Fraction(s) ** k for k in range(n_below)] + [Fraction(s) ** n_below] * n_above
    total = sum(weights)
    d = MarginalDist(AtomGrid.of(atoms), tuple(w / total for w in weights))
    problems = []
    if not is_regular(d):
        problems.append("not regular")
    if not is_sparse(d):
        problems.append("not sparse")
    if optimal_reserve_index(d) != n_below:
        problems.append(f"reserve landed at {d.atoms[optimal_reserve_index(d)]}")
    if problems:
        raise ConstructionFailed(f"construct_sparse({rho}, {n_below}, {n_above}): " + ", ".join(problems))
    return d


def _profiles(m: int, n: int) -> Iterator[Profile]:
    return itertools.product(range(m), repeat=n)


@dataclass(frozen=True)
class JointDist:
    """Joint type distribution over ϑ^N, stored densely.

    ``iid`` is set when the joint is a product of one marginal; conditioning
    then uses independence, which keeps zero-mass own types meaningful.
    """

    grid: AtomGrid
    n: int
    mass: Mapping[Profile, Fraction]
    iid: Optional[MarginalDist] = None
    degenerate: bool = False
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        full = {}
        for prof in _profiles(self.grid.M, self.n):
            full[prof] = as_rational(self.mass.get(prof, 0))
        extra = set(self.mass) - set(full)
        if extra:
            raise DistributionError(f"profiles outside the grid: {sorted(extra)[:3]}")
        object.__setattr__(self, "mass", full)
        if any(p < 0 for p in full.values()):
            raise DistributionError("negative mass")
        if sum(full.values()) != 1:
            raise DistributionError("joint masses must sum to 1")
        for prof, p in full.items():
            for perm in itertools.permutations(prof):
                if full[perm] != p:
                    raise DistributionError(f"joint is not symmetric at {prof}")
        if self.iid is None and not self.degenerate and any(p == 0 for p in full.values()):
            raise DistributionError("joint must have full support unless flagged degenerate")

    @classmethod
    def product(cls, marginal: MarginalDist, n: int) -> "JointDist":
        mass = {}
        for prof in _profiles(marginal.M, n):
            p = Fraction(1)
            for k in prof:
                p *= marginal.pmf[k]
            mass[prof] = p
        return cls(marginal.grid, n, mass, iid=marginal)

    @property
    def M(self) -> int:
        return self.grid.M

    @property
    def atoms(self) -> tuple[Fraction, ...]:
        return self.grid.atoms

    def profiles(self) -> Iterator[Profile]:
        return _profiles(self.M, self.n)

    def conditional(
        self,
        sets: Sequence[Sequence[int]],
        fixed: Optional[Mapping[int, int]] = None,
        integrate: Iterable[int] = (),
    ) -> tuple[tuple[Profile, Fraction], ...]:
        """Posterior over the product of ``sets`` with coordinates in ``fixed`` pinned.

        Pinned coordinates are conditioned on, so for an iid joint their own
        mass is irrelevant (a zero-mass pinned type is still a valid event).
        Coordinates in ``integrate`` are summed over every atom and reported
        as 0.  Returns (profile, probability) pairs in lexicographic order.
        """
        fixed = dict(fixed or {})
        free = frozenset(integrate)
        if self.iid is not None and free:
            # Independence: integrating a coordinate out is the same as pinning it.
            fixed.update({i: 0 for i in free})
            free = frozenset()
        key = (tuple(tuple(s) for s in sets), tuple(sorted(fixed.items())), tuple(sorted(free)))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        full = tuple(range(self.M))
        axes = [(fixed[i],) if i in fixed else full if i in free else tuple(sets[i]) for i in range(self.n)]
        acc: dict = {}
        for prof in itertools.product(*axes):
            if self.iid is not None:
                w = Fraction(1)
                for i, k in enumerate(prof):
                    if i not in fixed and i not in free:
                        w *= self.iid.pmf[k]
            else:
                w = self.mass[prof]
            if w:
                shown = tuple(0 if i in free else k for i, k in enumerate(prof)) if free else prof
                acc[shown] = acc.get(shown, Fraction(0)) + w
        weights = sorted(acc.items())
        total = sum((w for _, w in weights), Fraction(0))
        if total == 0:
            raise Unreachable(f"zero-mass event: sets={key[0]}, fixed={fixed}")
        out = tuple((prof, w / total) for prof, w in weights)
        self._cache[key] = out
        return out

    def marginal(self, i: int = 0) -> MarginalDist:
        if self.iid is not None:
            return self.iid
        pmf = [Fraction(0)] * self.M
        for prof, p in self.mass.items():
            pmf[prof[i]] += p
        return MarginalDist(self.grid, tuple(pmf))

    def marginal_pmf(self, i: int = 0) -> tuple[Fraction, ...]:
        """Marginal masses without the positivity validation of MarginalDist."""
        if self.iid is not None:
            return self.iid.pmf
        pmf = [Fraction(0)] * self.M
        for prof, p in self.mass.items():
            pmf[prof[i]] += p
        return tuple(pmf)

    def product_of_marginals(self) -> "JointDist":
        pmf = self.marginal_pmf(0)
        mass = {}
        for prof in self.profiles():
            p = Fraction(1)
            for k in prof:
                p *= pmf[k]
            mass[prof] = p
        return JointDist(self.grid, self.n, mass, degenerate=any(p == 0 for p in mass.values()))


def join(x: Profile, y: Profile) -> Profile:
    return tuple(max(a, b) for a, b in zip(x, y))


def meet(x: Profile, y: Profile) -> Profile:
    return tuple(min(a, b) for a, b in zip(x, y))


def _check_cap(j: JointDist) -> None:
    if j.M ** j.n > AFFILIATION_PROFILE_CAP:
        raise DistributionError(
            f"{j.M}^{j.n} profiles exceed the affiliation cap of {AFFILIATION_PROFILE_CAP}"
        )


def _incomparable_pairs(j: JointDist) -> Iterator[tuple[Profile, Profile]]:
    profs = list(j.profiles())
    for a, x in enumerate(profs):
        for y in profs[a + 1 :]:
            lo = meet(x, y)
            if lo != x and lo != y:
                yield x, y


def affiliation_violation(j: JointDist) -> Optional[tuple[Profile, Profile]]:
    """First pair with f(x∨y)f(x∧y) < f(x)f(y), or None."""
    _check_cap(j)
    m = j.mass
    for x, y in _incomparable_pairs(j):
        if m[join(x, y)] * m[meet(x, y)] < m[x] * m[y]:
            return x, y
    return None


def is_affiliated(j: JointDist) -> bool:
    return affiliation_violation(j) is None


def _same_marginals(a: JointDist, b: JointDist) -> bool:
    return (
        a.grid == b.grid
        and a.n == b.n
        and all(a.marginal_pmf(i) == b.marginal_pmf(i) for i in range(a.n))
    )


def more_affiliated(j_more: JointDist, j_less: JointDist, form: str = "interaction") -> bool:
    """Whether ``j_more`` is at least as affiliated as ``j_less``.

    ``form="interaction"`` (default) compares the log-supermodularity gap
    pair by pair: f′(x∨y)f′(x∧y)·f(x)f(y) ≥ f(x∨y)f(x∧y)·f′(x)f′(y).
    ``form="literal"`` evaluates f′(x∨y)·f(x∧y) ≥ f′(x)·f(y) over all pairs;
    with equal marginals that order only relates a distribution to itself
    in the families we tested, so it is kept for reference.
    """
    if not _same_marginals(j_more, j_less):
        raise DistributionError("the affiliation order needs identical marginals")
    _check_cap(j_more)
    a, b = j_more.mass, j_less.mass
    if form == "literal":
        profs = list(j_more.profiles())
        return all(
            a[join(x, y)] * b[meet(x, y)] >= a[x] * b[y] for x in profs for y in profs
        )
    if form != "interaction":
        raise ValueError(f"unknown form {form!r}")
    for x, y in _incomparable_pairs(j_more):
        hi, lo = join(x, y), meet(x, y)
        if a[hi] * a[lo] * b[x] * b[y] < b[hi] * b[lo] * a[x] * a[y]:
            return False
    return True


def correlated_joint(marginal: MarginalDist, n: int, c, pattern: Sequence | None = None) -> JointDist:
    """Product of ``marginal`` plus ``c`` times a symmetric zero-marginal perturbation.

    The perturbation is Σ over bidder pairs of u⊗u⊗p⊗…, where ``pattern``
    is a vector ``u`` with Σu = 0 (default: −1 at the bottom, +1 at the top).
    Marginals are preserved exactly; positivity is checked.
    """
    c = as_rational(c)
    M = marginal.M
    u = [Fraction(0)] * M if pattern is None else [as_rational(x) for x in pattern]
    if pattern is None:
        u[0], u[-1] = Fraction(-1), Fraction(1)
    if sum(u) != 0 or len(u) != M:
        raise DistributionError("pattern must have one entry per atom and sum to 0")
    p = marginal.pmf
    mass = {}
    for prof in _profiles(M, n):
        base = Fraction(1)
        for k in prof:
            base *= p[k]
        pert = Fraction(0)
        for a, b in itertools.combinations(range(n), 2):
            term = u[prof[a]] * u[prof[b]]
            for r in range(n):
                if r not in (a, b):
                    term *= p[prof[r]]
            pert += term
        mass[prof] = base + c * pert
    if any(v <= 0 for v in mass.values()):
        raise DistributionError(f"c={c} leaves a non-positive mass")
    return JointDist(marginal.grid, n, mass)


def parse_distribution(spec: Mapping) -> MarginalDist:
    """Build a marginal from a config block (pmf or family form)."""
    if "family" in spec:
        grid = AtomGrid.of(spec["atoms"])
        fam = spec["family"]
        if fam == "exponential":
            return discretize(ContinuousFamily.exponential(spec["rate"]), grid)
        if fam == "table":
            return discretize(ContinuousFamily.from_table(spec["cdf"]), grid)
        raise DistributionError(f"unknown family {fam!r}")
    if "uniform" in spec:
        return MarginalDist.uniform(spec["uniform"])
    return MarginalDist(AtomGrid.of(spec["atoms"]), tuple(as_rational(p) for p in spec["pmf"]))


def emit_distribution(d: MarginalDist) -> dict:
    return {"atoms": [fmt_rational(a) for a in d.atoms], "pmf": [fmt_rational(p) for p in d.pmf]}


__all__ = [
    "AtomGrid",
    "MarginalDist",
    "JointDist",
    "ContinuousFamily",
    "DistributionError",
    "UndefinedVirtualValue",
    "ConstructionFailed",
    "Unreachable",
    "as_rational",
    "fmt_rational",
    "virtual_value",
    "virtual_values",
    "is_regular",
    "regularity_violations",
    "optimal_reserve_index",
    "is_sparse",
    "sparsity_terms",
    "hazards",
    "is_mhr",
    "discretize",
    "exponential_family_member",
    "construct_sparse",
    "is_affiliated",
    "affiliation_violation",
    "more_affiliated",
    "correlated_joint",
    "parse_distribution",
    "emit_distribution",
]
