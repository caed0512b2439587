"""Config files: schemas, built-in names, and the builders that turn configs into auctions.

A distribution is a marginal block plus optional joint keys:

    {"atoms": ["0", "1", "2"], "pmf": ["1/3", "1/3", "1/3"], "bidders": 2}
    {"family": "exponential", "rate": "0.1", "atoms": ["0", "5", "9", "14", "20"]}
    {"uniform": ["0", "1", "2"], "bidders": 3, "correlation": "1/200"}

An auction is a name (``"dutch"``) or a block such as

    {"kind": "screening", "reserve_index": "optimal", "screen_index": 2}

A run config bundles both with the checks to run.  Every block is
validated against its schema before any computation; unknown keys fail.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Optional, Union

import jsonschema

from .auctions import (
    Auction,
    Experiment,
    custom,
    dutch,
    dutch_last_action,
    english,
    hybrid,
    screening,
    single_action,
)
from .dist import (
    DistributionError,
    JointDist,
    MarginalDist,
    correlated_joint,
    emit_distribution,
    exponential_family_member,
    optimal_reserve_index,
    parse_distribution,
)
from .engine import SHILL_PRIORS
from .valfn import ValueFunction, emit_valfn, parse_valfn

CHECKS = ("weak-sp", "strong-sp", "credible", "validate", "revenue")
AUCTION_KINDS = ("dutch", "dutch-last-action", "english", "screening", "hybrid", "custom", "single-action")


class ConfigError(ValueError):
    """A config failed its schema or could not be turned into an instance."""


_RATIONAL = {"type": ["string", "integer"]}
_RATIONALS = {"type": "array", "items": _RATIONAL, "minItems": 2}

VALFN_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["private", "additive", "max-common", "table"]},
        "kappa": _RATIONAL,
        "table": {"type": "object", "additionalProperties": _RATIONAL},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_JOINT_KEYS = {
    "bidders": {"type": "integer", "minimum": 1},
    "correlation": _RATIONAL,
    "pattern": _RATIONALS,
}

DIST_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"atoms": _RATIONALS, "pmf": _RATIONALS, **_JOINT_KEYS},
            "required": ["atoms", "pmf"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"uniform": _RATIONALS, **_JOINT_KEYS},
            "required": ["uniform"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "family": {"enum": ["exponential", "table"]},
                "rate": _RATIONAL,
                "cdf": {"type": "object", "additionalProperties": _RATIONAL},
                "atoms": _RATIONALS,
                **_JOINT_KEYS,
            },
            "required": ["family", "atoms"],
            "additionalProperties": False,
        },
    ]
}

_CELL = {
    "type": "object",
    "properties": {
        "types": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "next": {"type": ["integer", "null"]},
    },
    "required": ["types", "next"],
    "additionalProperties": False,
}

AUCTION_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(AUCTION_KINDS)},
        "reserve_index": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "optimal"}]},
        "screen_index": {"type": "integer", "minimum": 0},
        "priority": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "transfer": {"enum": ["pab-optimal", "second-price", "threshold", "last-action"]},
        "pricing": {"enum": ["first-price", "second-price", "threshold"]},
        "experiment": {
            "oneOf": [
                {"enum": ["empty", "identity"]},
                {
                    "type": "object",
                    "properties": {"partition": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}},
                    "required": ["partition"],
                    "additionalProperties": False,
                },
            ]
        },
        "order": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "sealed": {"type": "boolean"},
        "mid": {"type": "integer", "minimum": 1},
        "high": {"type": "integer", "minimum": 2},
        "initial_mover": {"type": ["integer", "null"]},
        "menu": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "state": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
                    "mover": {"type": "integer"},
                    "cells": {"type": "array", "items": _CELL, "minItems": 1},
                },
                "required": ["state", "mover", "cells"],
                "additionalProperties": False,
            },
        },
        "valfn": VALFN_SCHEMA,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "distribution": {"oneOf": [{"type": "string"}, DIST_SCHEMA]},
        "bidders": {"type": "integer", "minimum": 1},
        "auction": {"oneOf": [{"type": "string"}, AUCTION_SCHEMA]},
        "valfn": VALFN_SCHEMA,
        "checks": {"type": "array", "items": {"enum": list(CHECKS)}, "minItems": 1},
        "shill_sets": {
            "oneOf": [
                {"const": "all"},
                {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}},
            ]
        },
        "shill_prior": {"enum": list(SHILL_PRIORS)},
        "state_cap": {"type": "integer", "minimum": 1},
        "expect": {"enum": ["pass", "fail"]},
        "output": {
            "type": "object",
            "properties": {"format": {"enum": ["table", "json", "csv"]}, "path": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "required": ["distribution", "auction"],
    "additionalProperties": False,
}


def _validate(obj, schema, what: str) -> None:
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{what}: {exc.message} at {where}") from None


def load_json(path: str) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


# Built-in names -----------------------------------------------------------

_UNIFORM = re.compile(r"uniform(\d+)$")
_FM = re.compile(r"F_?m[:=](\d+)$")
BUILTIN_DISTS = ("uniform<M>", "F1", "F2", "Fm:<m>")


def builtin_distribution(name: str) -> dict:
    """Expand a built-in name into an explicit distribution block."""
    m = _UNIFORM.match(name)
    if m:
        M = int(m.group(1))
        if M < 2:
            raise ConfigError("uniform grids need at least two atoms")
        return {"uniform": [str(k) for k in range(M)]}
    if name == "F1":
        return {"family": "exponential", "rate": "1/10", "atoms": ["0", "5", "9", "14", "20"]}
    if name == "F2":
        return {"family": "exponential", "rate": "1/10", "atoms": ["0", "3", "7", "14", "20"]}
    m = _FM.match(name)
    if m:
        return emit_distribution(exponential_family_member(int(m.group(1))))
    raise ConfigError(f"unknown distribution {name!r}; built-ins: {', '.join(BUILTIN_DISTS)}")


BUILTIN_AUCTIONS = {
    "dutch": {"kind": "dutch"},
    "dutch-last-action": {"kind": "dutch-last-action"},
    "english": {"kind": "english"},
    "english-threshold": {"kind": "english", "transfer": "threshold"},
    "screening": {"kind": "screening"},
    "hybrid": {"kind": "hybrid"},
    "first-price": {"kind": "single-action", "pricing": "first-price", "experiment": "empty"},
    "first-price-public": {"kind": "single-action", "pricing": "first-price", "experiment": "identity"},
    "second-price": {"kind": "single-action", "pricing": "second-price", "experiment": "empty"},
}


def builtin_auction(name: str) -> dict:
    try:
        return dict(BUILTIN_AUCTIONS[name])
    except KeyError:
        raise ConfigError(f"unknown auction {name!r}; built-ins: {', '.join(BUILTIN_AUCTIONS)}") from None


# Instances ---------------------------------------------------------------


@dataclass
class Instance:
    """A fully resolved (prior, auction) pair and the canonical config that produced it."""

    prior: JointDist
    auction: Auction
    config: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def resolve_distribution(spec: Union[str, dict], bidders: Optional[int] = None) -> tuple[MarginalDist, dict]:
    """Parse and validate a distribution; returns the marginal and the block with joint keys."""
    block = builtin_distribution(spec) if isinstance(spec, str) else dict(spec)
    _validate(block, DIST_SCHEMA, "distribution")
    joint = {k: block.pop(k) for k in list(block) if k in _JOINT_KEYS}
    if bidders is not None:
        joint["bidders"] = bidders
    try:
        marginal = parse_distribution(block)
    except (DistributionError, KeyError) as exc:
        raise ConfigError(f"distribution: {exc}") from None
    return marginal, joint


def build_prior(marginal: MarginalDist, joint: dict) -> JointDist:
    n = int(joint.get("bidders", 2))
    if "correlation" in joint:
        try:
            return correlated_joint(marginal, n, joint["correlation"], joint.get("pattern"))
        except DistributionError as exc:
            raise ConfigError(f"distribution: {exc}") from None
    if "pattern" in joint:
        raise ConfigError("distribution: 'pattern' needs 'correlation'")
    return marginal.iid(n)


def _reserve(spec: dict, marginal: MarginalDist, default) -> int:
    r = spec.get("reserve_index", default)
    if r == "optimal":
        return optimal_reserve_index(marginal)
    if not 0 <= r < marginal.M:
        raise ConfigError(f"reserve_index {r} is outside the grid")
    return r


def build_auction(spec: Union[str, dict], prior: JointDist, valfn: Optional[ValueFunction] = None) -> Auction:
    block = builtin_auction(spec) if isinstance(spec, str) else dict(spec)
    _validate(block, AUCTION_SCHEMA, "auction")
    marginal = prior.marginal()
    if "valfn" in block:
        valfn = parse_valfn(block["valfn"], prior.grid)
    kind = block["kind"]
    pr = block.get("priority")
    if pr is not None and sorted(pr) != list(range(prior.n)):
        raise ConfigError("priority must list every bidder exactly once")
    try:
        if kind == "dutch":
            return dutch(prior, _reserve(block, marginal, "optimal"), pr, valfn)
        if kind == "dutch-last-action":
            return dutch_last_action(prior, _reserve(block, marginal, "optimal"), pr, valfn)
        if kind == "english":
            return english(prior, _reserve(block, marginal, "optimal"), pr, valfn, block.get("transfer", "second-price"))
        if kind == "screening":
            r = _reserve(block, marginal, "optimal")
            y = block.get("screen_index", max(r, 1))
            return screening(prior, r, y, pr, valfn, block.get("sealed", True), block.get("transfer", "second-price"))
        if kind == "hybrid":
            return hybrid(prior, block.get("mid", 2), block.get("high", 3), pr, valfn)
        if kind == "single-action":
            exp = block.get("experiment", "empty")
            if isinstance(exp, dict):
                exp = Experiment("partition", tuple(tuple(b) for b in exp["partition"]))
            return single_action(
                prior, _reserve(block, marginal, "optimal"), block.get("pricing", "first-price"), exp, block.get("order"), pr, valfn
            )
        if kind == "custom":
            if "menu" not in block:
                raise ConfigError("custom auctions need a 'menu' table")
            table = {
                (tuple(map(tuple, row["state"])), row["mover"]): [(tuple(c["types"]), c["next"]) for c in row["cells"]]
                for row in block["menu"]
            }
            first = block.get("initial_mover", 0)
            return custom(prior, _reserve(block, marginal, 0), table, first, block.get("transfer", "pab-optimal"), pr, valfn)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"auction: {exc}") from None
    raise ConfigError(f"unknown auction kind {kind!r}")


def build_instance(dist, auction, bidders: Optional[int] = None, valfn: Optional[dict] = None) -> Instance:
    """Resolve a distribution and auction (names or blocks) into an :class:`Instance`."""
    marginal, joint = resolve_distribution(dist, bidders)
    prior = build_prior(marginal, joint)
    vf = None
    if valfn is not None:
        _validate(valfn, VALFN_SCHEMA, "valfn")
        try:
            vf = parse_valfn(valfn, prior.grid)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"valfn: {exc}") from None
    a_block = builtin_auction(auction) if isinstance(auction, str) else dict(auction)
    a = build_auction(a_block, prior, vf)
    canonical = {
        "distribution": {**emit_distribution(marginal), **_canon_joint(joint)},
        "auction": a_block,
        "valfn": emit_valfn(a.mech.valfn, prior.grid),
    }
    return Instance(prior, a, canonical)


def _canon_joint(joint: dict) -> dict:
    out = {"bidders": int(joint.get("bidders", 2))}
    for k in ("correlation", "pattern"):
        if k in joint:
            out[k] = joint[k]
    return out


@dataclass
class RunConfig:
    distribution: Union[str, dict]
    auction: Union[str, dict]
    bidders: Optional[int] = None
    valfn: Optional[dict] = None
    checks: list = field(default_factory=lambda: ["validate"])
    shill_sets: Union[str, list] = "all"
    shill_prior: str = "conditioned"
    state_cap: Optional[int] = None
    expect: Optional[str] = None
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        _validate(obj, RUN_SCHEMA, "run config")
        return cls(**obj)

    def instance(self) -> Instance:
        return build_instance(self.distribution, self.auction, self.bidders, self.valfn)


__all__ = [
    "AUCTION_SCHEMA",
    "BUILTIN_AUCTIONS",
    "CHECKS",
    "ConfigError",
    "DIST_SCHEMA",
    "Instance",
    "RUN_SCHEMA",
    "RunConfig",
    "VALFN_SCHEMA",
    "build_auction",
    "build_instance",
    "build_prior",
    "builtin_auction",
    "builtin_distribution",
    "config_hash",
    "load_json",
    "resolve_distribution",
]
