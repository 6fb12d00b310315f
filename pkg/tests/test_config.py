"""Test scenario loading and validation.

:author: Shay Hill
:created: 2025-02-26
"""

from decimal import Decimal
from pathlib import Path

import pytest
from conftest import TEST_OUTPUT, small_scenario, small_scenario_data

from intralayer_sim.config import load_scenario, scenario_from_mapping, with_overrides
from intralayer_sim.errors import ScenarioParseError, ScenarioValidationError
from intralayer_sim.globs import REFERENCE_SCENARIO


def _errors(**overrides: object) -> list[str]:
    with pytest.raises(ScenarioValidationError) as info:
        _ = small_scenario(**overrides)
    return info.value.errors


def _write(name: str, text: str) -> Path:
    path = TEST_OUTPUT / name
    _ = path.write_text(text, encoding="utf-8")
    return path


class TestLoad:
    def test_reference_scenario(self):
        cfg = load_scenario(REFERENCE_SCENARIO)
        assert cfg.horizon == 12
        assert cfg.hub_asset == "HUB"

    def test_floats_read_exactly(self):
        cfg = small_scenario(treasury=0.003, alpha=0.1)
        assert cfg.treasury == Decimal("0.003")
        assert cfg.betas == (Decimal("0.1"),)

    def test_scalar_schedule(self):
        cfg = small_scenario(fees={"DC": 2, "VT": [1, 2]})
        assert cfg.fees.DC == (Decimal(2),)
        assert cfg.fees.VT == (Decimal(1), Decimal(2))
        assert cfg.fees.KE == (Decimal(0),)

    def test_not_yaml(self):
        with pytest.raises(ScenarioParseError):
            _ = load_scenario(_write("broken.yaml", "a: [1, 2\n"))

    def test_not_utf8(self):
        path = TEST_OUTPUT / "not_utf8.yaml"
        _ = path.write_bytes(b"seed: \xff\xff\n")
        with pytest.raises(ScenarioParseError):
            _ = load_scenario(path)

    def test_not_a_mapping(self):
        with pytest.raises(ScenarioValidationError):
            _ = load_scenario(_write("listed.yaml", "- 1\n- 2\n"))

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            _ = load_scenario(TEST_OUTPUT / "no_such_scenario.yaml")


class TestValidation:
    def test_schema_version(self):
        assert _errors(schema_version=2) == ["schema_version: expected 1, got 2"]

    def test_structural_errors_name_their_location(self):
        errors = _errors(horizon=0, colour="blue")
        assert any(e.startswith("horizon: ") for e in errors)
        assert any(e.startswith("colour: ") for e in errors)

    def test_every_reference_error_is_reported(self):
        data = small_scenario_data()
        data["agents"][1]["holdings"][0]["chain"] = "sol"
        data["channels"] = [{"id": "c", "src_chain": "hub", "dst_chain": "btc"}]
        with pytest.raises(ScenarioValidationError) as info:
            _ = scenario_from_mapping(data)
        assert info.value.errors == [
            "agents[1].holdings[0].chain: unknown chain sol",
            "channels[0].dst_chain: unknown chain btc",
        ]

    def test_duplicate_ids(self):
        errors = _errors(chains=[{"id": "hub"}, {"id": "eth"}, {"id": "eth"}])
        assert errors == ["chains[2].id: duplicate id eth"]

    def test_hub_asset_is_fixed(self):
        assets = small_scenario_data()["assets"]
        assets[0]["initial_price"] = 2
        assert _errors(assets=assets) == [
            "assets[0]: the hub asset must be priced at 1 in every epoch"
        ]

    def test_short_price_table(self):
        assets = small_scenario_data()["assets"]
        assets[1]["path"] = [2000, 2100]
        assert _errors(assets=assets) == ["assets[1].path: price table has 2 entries for 3 epochs"]

    def test_conversion_fee_below_one(self):
        assert _errors(fees={"VC": [0.1, 1]}) == ["fees.VC: conversion fee rates must be below 1"]

    def test_actions(self):
        actions = [
            {"epoch": 5, "kind": "slash", "chain": "eth", "asset": "ETH", "fraction": 0.1},
            {"epoch": 1, "step": 2, "kind": "deposit", "agent": "zed", "chain": "eth", "asset": "ETH"},
        ]
        assert _errors(actions=actions) == [
            "actions[0].epoch: 5 is past the horizon 3",
            "actions[1].step: 2 is not below steps_per_epoch 2",
            "actions[1].qty: required for deposit",
            "actions[1].agent: unknown agent zed",
        ]

    def test_lease_terms_order(self):
        terms = [{"asset": "ETH", "rho_min": 1.2, "rho_maint": 1.5}]
        assert _errors(lease_terms=terms) == ["lease_terms[0].rho_maint: exceeds rho_min 1.2"]


class TestOverrides:
    def test_seed(self):
        assert with_overrides(small_scenario(), seed=99).seed == 99

    def test_shorter_horizon_drops_later_events(self):
        cfg = with_overrides(load_scenario(REFERENCE_SCENARIO), epochs=4)
        assert cfg.horizon == 4
        assert cfg.actions
        assert all(a.epoch <= 4 for a in cfg.actions)
        assert all(e <= 4 for c in cfg.channels for e in c.outages)

    def test_zero_epochs(self):
        with pytest.raises(ScenarioValidationError):
            _ = with_overrides(small_scenario(), epochs=0)
