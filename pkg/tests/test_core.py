"""Test the balance sheet, prices, and random streams.

:author: Shay Hill
:created: 2025-02-22
"""

from decimal import Decimal

import pytest
from conftest import funded_sheet
from hypothesis import given
from hypothesis import strategies as st

from intralayer_sim.core import (
    BalanceSheet,
    PricePath,
    PriceProcess,
    advance_price,
    mark_to_market,
    quantize_qty,
    scheduled,
    spawn_rng,
    to_decimal,
    uniform,
)
from intralayer_sim.errors import (
    InsufficientBalance,
    MissingPrice,
    NegativeQuantity,
    UnknownAccount,
)
from intralayer_sim.type_hints import Account

_OWNERS = ("a", "b", "c")

_moves = st.lists(
    st.tuples(
        st.sampled_from(_OWNERS),
        st.sampled_from(_OWNERS),
        st.decimals(min_value=0, max_value=50, places=6),
    ),
    max_size=40,
)


class TestBalanceSheet:
    def test_post_entry_moves_quantity(self):
        sheet = funded_sheet(("a", "eth", "ETH", 5))
        b = sheet.open("b", "eth")
        _ = sheet.post_entry(Account("a", "eth"), b, "ETH", Decimal(2))
        assert sheet.balance(Account("a", "eth"), "ETH") == 3
        assert sheet.balance(b, "ETH") == 2

    def test_overdraw_raises_and_changes_nothing(self):
        sheet = funded_sheet(("a", "eth", "ETH", 1))
        b = sheet.open("b", "eth")
        before = sheet.as_dict()
        with pytest.raises(InsufficientBalance):
            _ = sheet.post_entry(Account("a", "eth"), b, "ETH", Decimal(2))
        assert sheet.as_dict() == before

    def test_negative_quantity(self):
        sheet = funded_sheet(("a", "eth", "ETH", 1))
        b = sheet.open("b", "eth")
        with pytest.raises(NegativeQuantity):
            _ = sheet.post_entry(Account("a", "eth"), b, "ETH", Decimal(-1))

    def test_unopened_account(self):
        sheet = funded_sheet(("a", "eth", "ETH", 1))
        with pytest.raises(UnknownAccount):
            _ = sheet.post_entry(Account("a", "eth"), Account("z", "eth"), "ETH", Decimal(1))

    def test_zero_balances_are_dropped(self):
        sheet = funded_sheet(("a", "eth", "ETH", 1))
        b = sheet.open("b", "eth")
        _ = sheet.post_entry(Account("a", "eth"), b, "ETH", Decimal(1))
        assert ("a", "eth", "ETH") not in sheet.holdings

    def test_burn_tracks_issuance(self):
        sheet = funded_sheet(("a", "eth", "ETH", 4))
        sheet.burn(Account("a", "eth"), "ETH", Decimal(1), "slash")
        assert sheet.net_issued("ETH", "test") == 4
        assert sheet.net_issued("ETH", "slash") == -1
        assert sheet.supply("ETH") == sheet.net_issued("ETH") == 3

    def test_atomic_restores_on_error(self):
        sheet = funded_sheet(("a", "eth", "ETH", 4))
        b = sheet.open("b", "eth")
        before = sheet.as_dict()
        with pytest.raises(InsufficientBalance), sheet.atomic():
            _ = sheet.post_entry(Account("a", "eth"), b, "ETH", Decimal(3))
            _ = sheet.post_entry(Account("a", "eth"), b, "ETH", Decimal(3))
        assert sheet.as_dict() == before

    def test_view_keeps_selected_owners(self):
        sheet = funded_sheet(("a", "eth", "ETH", 1), ("b", "eth", "ETH", 2))
        view = sheet.view(["b"])
        assert view.positions("b") == {("eth", "ETH"): Decimal(2)}
        assert view.positions("a") == {}

    def test_liabilities_reduce_mark_to_market(self):
        sheet = funded_sheet(("a", "eth", "ETH", 2))
        sheet.post_liability(Account("a", "eth"), "USDC", Decimal(500))
        prices = {"ETH": Decimal(1000), "USDC": Decimal(1)}
        assert mark_to_market(sheet, prices) == 1500

    def test_release_more_than_owed(self):
        sheet = BalanceSheet()
        account = sheet.open("a", "eth")
        sheet.post_liability(account, "USDC", Decimal(1))
        with pytest.raises(InsufficientBalance):
            sheet.release_liability(account, "USDC", Decimal(2))

    def test_missing_price(self):
        sheet = funded_sheet(("a", "eth", "ETH", 1))
        with pytest.raises(MissingPrice):
            _ = mark_to_market(sheet, {})

    @given(_moves)
    def test_supply_equals_net_issued(self, moves: list[tuple[str, str, Decimal]]):
        """Entries between accounts never change supply."""
        sheet = funded_sheet(*((o, "eth", "ETH", 100) for o in _OWNERS))
        for src, dst, qty in moves:
            try:
                _ = sheet.post_entry(Account(src, "eth"), Account(dst, "eth"), "ETH", qty)
            except InsufficientBalance:
                continue
        assert sheet.supply("ETH") == sheet.net_issued("ETH") == 300
        assert all(q > 0 for q in sheet.holdings.values())


class TestDecimals:
    def test_float_reads_shortest_repr(self):
        assert to_decimal(0.1) == Decimal("0.1")

    def test_quantize_rounds_down_by_default(self):
        third = Decimal(1) / Decimal(3)
        assert quantize_qty(third) < third < quantize_qty(third, up=True)

    def test_schedule_keeps_last_value(self):
        values = (Decimal(1), Decimal(2), Decimal(3))
        assert [scheduled(values, u) for u in (1, 2, 3, 9)] == [1, 2, 3, 3]

    def test_schedule_starts_at_one(self):
        with pytest.raises(ValueError):
            _ = scheduled((Decimal(1),), 0)


class TestRandomStreams:
    def test_same_label_same_draws(self):
        a = spawn_rng(7, "price/ETH")
        b = spawn_rng(7, "price/ETH")
        assert [uniform(a) for _ in range(5)] == [uniform(b) for _ in range(5)]

    def test_labels_are_independent(self):
        a = spawn_rng(7, "price/ETH")
        b = spawn_rng(7, "price/SOL")
        assert [uniform(a) for _ in range(5)] != [uniform(b) for _ in range(5)]

    def test_uniform_range(self):
        rng = spawn_rng(1, "x")
        assert all(0 <= uniform(rng) < 1 for _ in range(100))


class TestPrices:
    def test_table_mode(self):
        process = PriceProcess({"BTC": PricePath(Decimal(10), (Decimal(11), Decimal(12)))})
        rng = spawn_rng(0, "price/BTC")
        assert advance_price(process, "BTC", 1, rng) == 11
        assert advance_price(process, "BTC", 2, rng) == 12
        assert advance_price(process, "BTC", 5, rng) == 12

    def test_constant_without_volatility(self):
        process = PriceProcess({"HUB": PricePath(Decimal(1))})
        rng = spawn_rng(0, "price/HUB")
        assert all(advance_price(process, "HUB", u, rng) == 1 for u in range(1, 6))

    def test_walk_is_reproducible(self):
        def walk() -> list[Decimal]:
            process = PriceProcess({"ETH": PricePath(Decimal(2000), volatility=0.1)})
            rng = spawn_rng(3, "price/ETH")
            return [advance_price(process, "ETH", u, rng) for u in range(1, 10)]

        prices = walk()
        assert prices == walk()
        assert all(p > 0 for p in prices)

    def test_unknown_asset(self):
        process = PriceProcess({})
        with pytest.raises(MissingPrice):
            _ = advance_price(process, "ETH", 1, spawn_rng(0, "x"))
