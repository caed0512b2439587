from fractions import Fraction

import pytest

from shillproof.config import (
    BUILTIN_AUCTIONS,
    ConfigError,
    RunConfig,
    build_instance,
    builtin_distribution,
    config_hash,
    resolve_distribution,
)


class TestBuiltins:
    def test_uniform(self):
        assert builtin_distribution("uniform3") == {"uniform": ["0", "1", "2"]}

    def test_fm(self):
        block = builtin_distribution("Fm:4")
        m, _ = resolve_distribution(block)
        assert m.atoms == tuple(Fraction(2 * k) for k in range(5))

    @pytest.mark.parametrize("name", ["uniform1", "F3", "gaussian"])
    def test_unknown_names(self, name):
        with pytest.raises(ConfigError):
            builtin_distribution(name)

    @pytest.mark.parametrize("name", sorted(BUILTIN_AUCTIONS))
    def test_every_builtin_auction_builds(self, name):
        inst = build_instance("uniform5", name)
        assert inst.auction.n == 2


class TestSchemas:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="distribution"):
            resolve_distribution({"uniform": ["0", "1"], "colour": "red"})

    def test_masses_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="9/10"):
            resolve_distribution({"atoms": ["0", "1"], "pmf": ["1/2", "2/5"]})

    def test_bad_reserve(self):
        with pytest.raises(ConfigError, match="outside the grid"):
            build_instance("uniform3", {"kind": "dutch", "reserve_index": 7})

    def test_bad_priority(self):
        with pytest.raises(ConfigError, match="priority"):
            build_instance("uniform3", {"kind": "dutch", "priority": [0, 0]})

    def test_pattern_without_correlation(self):
        with pytest.raises(ConfigError):
            build_instance({"uniform": ["0", "1", "2"], "pattern": ["1", "1"]}, "dutch")

    def test_custom_needs_menu(self):
        with pytest.raises(ConfigError, match="menu"):
            build_instance("uniform3", {"kind": "custom"})

    def test_run_config_rejects_unknown_check(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"distribution": "uniform3", "auction": "dutch", "checks": ["vibes"]})


class TestInstances:
    def test_hash_ignores_key_order(self):
        a = {"distribution": {"uniform": ["0", "1"]}, "auction": {"kind": "dutch"}}
        b = {"auction": {"kind": "dutch"}, "distribution": {"uniform": ["0", "1"]}}
        assert config_hash(a) == config_hash(b)

    def test_canonical_config_rebuilds(self):
        inst = build_instance("F2", "hybrid")
        again = build_instance(inst.config["distribution"], inst.config["auction"], valfn=inst.config["valfn"])
        assert again.config_hash == inst.config_hash

    def test_bidders_override(self):
        inst = build_instance({"uniform": ["0", "1", "2"], "bidders": 2}, "dutch", bidders=3)
        assert inst.prior.n == 3 and inst.config["distribution"]["bidders"] == 3

    def test_correlated_prior(self):
        inst = build_instance({"uniform": ["0", "1", "2"], "correlation": "1/20"}, "dutch")
        assert inst.prior.marginal().pmf == (Fraction(1, 3),) * 3

    def test_optimal_reserve_default(self):
        inst = build_instance("F1", "dutch")
        assert inst.auction.mech.alloc.reserve == 3

    def test_run_config_defaults(self):
        cfg = RunConfig.from_dict({"distribution": "uniform3", "auction": "english"})
        assert cfg.checks == ["validate"] and cfg.shill_sets == "all"
        assert cfg.instance().auction.name.startswith("english")
