"""Tests for scenario parsing, validation, and derived sampling quantities."""

import json

import pytest

from fedsust.config import ConfigError, EnergyModel, config_digest, load_scenario, parse_config


BASE = dict(
    name="cfg",
    num_clients=8,
    total_rounds=10,
    selection_rate=0.25,
    local_rounds=1,
    dataset_size=100,
    model_size=1000,
    client_hardware="Intel Core i7-1250U",
    client_locations="CH",
    server_hardware="Intel Core i7-1250U",
    server_location="CH",
    seed=1,
)


def cfg(**kwargs):
    data = dict(BASE)
    data.update(kwargs)
    return parse_config(data)


class TestSamplingFields:
    def test_rate_only_derives_sample_size(self):
        c = cfg(selection_rate=0.25)
        assert c.sample_size == 2
        assert c.selection_rate == 0.25

    def test_sample_size_only_derives_rate(self):
        data = dict(BASE)
        del data["selection_rate"]
        data["sample_size"] = 2
        c = parse_config(data)
        assert c.selection_rate == 0.25

    def test_rate_not_matching_any_integer_draw_keeps_configured_rate(self):
        # 0.3 of 8 clients has no exact integer draw; the nearest (2) is used
        # for simulation while 0.3 stays the scored raw value
        c = cfg(selection_rate=0.3)
        assert c.sample_size == 2
        assert c.selection_rate == 0.3

    def test_both_must_agree(self):
        with pytest.raises(ConfigError, match="selection_rate"):
            cfg(selection_rate=0.5, sample_size=2)
        c = cfg(selection_rate=0.25, sample_size=2)
        assert c.sample_size == 2

    def test_one_of_them_required(self):
        data = dict(BASE)
        del data["selection_rate"]
        with pytest.raises(ConfigError, match="sample_size.*selection_rate"):
            parse_config(data)

    def test_bounds(self):
        with pytest.raises(ConfigError):
            cfg(selection_rate=0.0)
        with pytest.raises(ConfigError):
            cfg(selection_rate=1.2)
        data = dict(BASE)
        del data["selection_rate"]
        data["sample_size"] = 9
        with pytest.raises(ConfigError, match="sample_size"):
            parse_config(data)


class TestMixParsing:
    def test_single_string_is_full_share(self):
        assert cfg().client_locations == ((1.0, "CH"),)

    def test_per_client_list_groups_to_shares(self):
        c = cfg(num_clients=4, client_locations=["CH", "CH", "ZA", "GM"])
        assert dict((v, s) for s, v in c.client_locations) == {"CH": 0.5, "ZA": 0.25, "GM": 0.25}

    def test_per_client_list_length_must_match(self):
        with pytest.raises(ConfigError, match="num_clients"):
            cfg(num_clients=3, client_locations=["CH", "ZA"])

    def test_share_objects(self):
        c = cfg(client_hardware=[{"share": 0.75, "model": "A"}, {"share": 0.25, "model": "B"}])
        assert c.client_hardware == ((0.75, "A"), (0.25, "B"))

    def test_shares_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="sum"):
            cfg(client_hardware=[{"share": 0.7, "model": "A"}, {"share": 0.2, "model": "B"}])

    def test_share_bounds_and_shape(self):
        with pytest.raises(ConfigError):
            cfg(client_hardware=[{"share": 0.0, "model": "A"}, {"share": 1.0, "model": "B"}])
        with pytest.raises(ConfigError):
            cfg(client_hardware=[{"model": "A"}])
        with pytest.raises(ConfigError):
            cfg(client_hardware=[])


class TestFieldValidation:
    def test_unknown_fields_rejected(self):
        with pytest.raises(ConfigError, match="bananas"):
            cfg(bananas=3)

    def test_integer_fields_validated(self):
        for field in ("num_clients", "total_rounds", "local_rounds", "dataset_size", "model_size"):
            with pytest.raises(ConfigError, match=field):
                cfg(**{field: 0})
            with pytest.raises(ConfigError, match=field):
                cfg(**{field: "ten"})

    def test_json_float_literals_for_integers_accepted(self):
        # 1.1E+06-style literals parse as floats; integral values are fine
        c = cfg(dataset_size=1.1e6, model_size=1e13)
        assert c.dataset_size == 1_100_000
        assert c.model_size == 10**13

    def test_seed_range(self):
        with pytest.raises(ConfigError, match="seed"):
            cfg(seed=-1)
        with pytest.raises(ConfigError, match="seed"):
            cfg(seed=2**64)
        assert cfg(seed=2**64 - 1).seed == 2**64 - 1

    def test_override_scores_validated(self):
        with pytest.raises(ConfigError, match="score_overrides"):
            cfg(score_overrides={"x": 1.5})
        assert cfg(score_overrides={"sustainability": 0.5}).score_overrides == {"sustainability": 0.5}

    def test_energy_model_fields_validated(self):
        with pytest.raises(ConfigError, match="cpu_utilization"):
            cfg(energy_model={"cpu_utilization": 1.5})
        with pytest.raises(ConfigError, match="comm_energy_per_byte"):
            cfg(energy_model={"comm_energy_per_byte": -1})
        with pytest.raises(ConfigError, match="unknown"):
            cfg(energy_model={"warp_drive": 1})
        assert cfg(energy_model={"idle_fraction": 0.2}).energy_model.idle_fraction == 0.2


class TestEnergyModel:
    def test_defaults(self):
        em = EnergyModel()
        assert em.cpu_utilization == 1.0
        assert em.comm_energy_per_byte == 0.0
        assert em.effective_utilization() == 1.0


class TestLoadScenario:
    def test_loads_bundled_scenarios(self, scenario_dir):
        for path in sorted(scenario_dir.glob("*.json")):
            config = load_scenario(path)
            assert config.num_clients >= 1, path.name

    def test_name_defaults_to_stem(self, tmp_path):
        data = dict(BASE)
        del data["name"]
        p = tmp_path / "my_run.json"
        p.write_text(json.dumps(data))
        assert load_scenario(p).name == "my_run"

    def test_digest_is_stable_and_sensitive(self):
        a, b = cfg(), cfg()
        assert config_digest(a) == config_digest(b)
        assert config_digest(a) != config_digest(cfg(seed=2))
        assert config_digest(a).startswith("sha256:")
