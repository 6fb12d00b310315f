"""See full diffs in pytest. Shared scenario builders.

:author: Shay Hill
:created: 2025-02-22
"""

import copy
from decimal import Decimal
from pathlib import Path
from typing import Any

import pytest

from intralayer_sim.config import ScenarioConfig, scenario_from_mapping
from intralayer_sim.core import BalanceSheet
from intralayer_sim.type_hints import Account


def pytest_assertrepr_compare(config: Any, op: str, left: str, right: str):
    """See full error diffs"""
    if op in ("==", "!="):
        return ["{0} {1} {2}".format(left, op, right)]


TEST_RESOURCES = Path(__file__).parent / "resources"
TEST_OUTPUT = Path(__file__).parent / "output"

TEST_OUTPUT.mkdir(exist_ok=True)

# two chains, a hub and one spoke, two agents. Every fee and budget is zero.
_SMALL: dict[str, Any] = {
    "schema_version": 1,
    "seed": 11,
    "horizon": 3,
    "steps_per_epoch": 2,
    "hub_asset": "HUB",
    "hub_chain": "hub",
    "chains": [{"id": "hub"}, {"id": "eth"}],
    "assets": [
        {"id": "HUB", "initial_price": 1, "dfmm_inventory": 100000},
        {
            "id": "ETH",
            "initial_price": 2000,
            "depth": 1000000,
            "dfmm_inventory": 100,
            "nol_ke": 10,
        },
    ],
    "agents": [
        {
            "id": "alice",
            "holdings": [
                {"chain": "hub", "asset": "HUB", "qty": 1000},
                {"chain": "eth", "asset": "ETH", "qty": 10},
            ],
        },
        {"id": "bob", "holdings": [{"chain": "hub", "asset": "HUB", "qty": 1000}]},
    ],
    "treasury": 5000,
}


def small_scenario_data(**overrides: Any) -> dict[str, Any]:
    """A fresh copy of the small scenario tree with top-level keys replaced."""
    data = copy.deepcopy(_SMALL)
    data.update(overrides)
    return data


def small_scenario(**overrides: Any) -> ScenarioConfig:
    """The small scenario, validated."""
    return scenario_from_mapping(small_scenario_data(**overrides))


def funded_sheet(*holdings: tuple[str, str, str, int | str]) -> BalanceSheet:
    """A sheet with (owner, chain, asset, qty) minted under the tag "test"."""
    sheet = BalanceSheet()
    for owner, chain, asset, qty in holdings:
        account = sheet.open(owner, chain)
        sheet.mint(account, asset, Decimal(qty), "test")
    return sheet


@pytest.fixture
def small() -> ScenarioConfig:
    return small_scenario()


@pytest.fixture
def alice_eth() -> Account:
    return Account("alice", "eth")
