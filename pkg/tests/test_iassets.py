"""Test iAsset minting, redemption, transfers, slashing, and rewards.

:author: Shay Hill
:created: 2025-02-23
"""

from decimal import Decimal

import pytest
from conftest import funded_sheet
from hypothesis import given
from hypothesis import strategies as st

from intralayer_sim import iassets
from intralayer_sim.errors import InsufficientShares, NoMatchingDeposit
from intralayer_sim.globs import VAULT
from intralayer_sim.iassets import IAssetBook
from intralayer_sim.type_hints import Account, Underlying

ETH = Underlying("ETH", "eth")


def _book(*deposits: tuple[str, int | str]) -> IAssetBook:
    """Book with each (holder, qty) deposited into the eth vault and minted."""
    sheet = funded_sheet(*((h, "eth", "ETH", 100) for h, _ in deposits))
    vault = sheet.open(VAULT, "eth")
    book = IAssetBook(sheet)
    for holder, qty in deposits:
        _ = sheet.post_entry(Account(holder, "eth"), vault, "ETH", Decimal(qty))
        book.record_deposit(holder, ETH, Decimal(qty))
        _ = iassets.mint(book, holder, ETH, Decimal(qty))
    return book


class TestMintBurn:
    def test_first_mint_is_one_to_one(self):
        book = _book(("alice", 5))
        assert book.supply(ETH).shares_of("alice") == 5
        assert iassets.backing_gaps(book) == {}

    def test_mint_needs_a_deposit(self):
        book = _book()
        with pytest.raises(NoMatchingDeposit):
            _ = iassets.mint(book, "alice", ETH, Decimal(1))

    def test_burn_releases_underlying(self):
        book = _book(("alice", 5))
        qty = iassets.burn(book, "alice", ETH, Decimal(2))
        assert qty == 2
        assert book.ledger.balance(Account("alice", "eth"), "ETH") == 97
        assert iassets.backing_gaps(book) == {}

    def test_burn_more_than_held(self):
        book = _book(("alice", 5))
        with pytest.raises(InsufficientShares):
            _ = iassets.burn(book, "alice", ETH, Decimal(6))

    def test_atomic_restores(self):
        book = _book(("alice", 5))
        with pytest.raises(InsufficientShares), book.atomic():
            iassets.transfer(book, "alice", "bob", ETH, Decimal(2))
            iassets.transfer(book, "alice", "bob", ETH, Decimal(9))
        assert book.supply(ETH).shares_of("alice") == 5
        assert book.supply(ETH).shares_of("bob") == 0


class TestSlash:
    def test_claims_shrink_together(self):
        book = _book(("alice", 30), ("bob", 10))
        lost = iassets.rebase_on_slash(book, ETH, Decimal("0.25"))
        assert lost == 10
        supply = book.supply(ETH)
        assert supply.redeemable("alice") == Decimal("22.5")
        assert supply.redeemable("bob") == Decimal("7.5")
        assert book.ledger.net_issued("ETH", "slash") == -10
        assert iassets.backing_gaps(book) == {}

    def test_fraction_range(self):
        book = _book(("alice", 1))
        with pytest.raises(ValueError):
            _ = iassets.rebase_on_slash(book, ETH, Decimal("1.5"))

    def test_mint_after_slash(self):
        """New deposits buy shares at the slashed price."""
        book = _book(("alice", 10))
        _ = iassets.rebase_on_slash(book, ETH, Decimal("0.5"))
        vault = Account(VAULT, "eth")
        _ = book.ledger.post_entry(Account("alice", "eth"), vault, "ETH", Decimal(4))
        book.record_deposit("alice", ETH, Decimal(4))
        assert iassets.mint(book, "alice", ETH, Decimal(4)) == 8
        assert iassets.backing_gaps(book) == {}

    @given(
        st.lists(st.integers(min_value=1, max_value=50), min_size=1, max_size=5),
        st.lists(st.decimals(min_value=0, max_value=1, places=4), max_size=4),
    )
    def test_backing_survives_slashes(self, deposits: list[int], fractions: list[Decimal]):
        book = _book(*((f"h{i}", q) for i, q in enumerate(deposits)))
        shares_before = dict(book.supply(ETH).holder_shares)
        for fraction in fractions:
            _ = iassets.rebase_on_slash(book, ETH, fraction)
        assert iassets.backing_gaps(book) == {}
        assert book.supply(ETH).holder_shares == shares_before


class TestTransferAndRewards:
    def test_transfer_moves_shares(self):
        book = _book(("alice", 5))
        iassets.transfer(book, "alice", "bob", ETH, Decimal(2))
        assert book.supply(ETH).shares_of("bob") == 2
        assert book.supply(ETH).total_shares == 5

    def test_rewards_follow_holders_of_record(self):
        book = _book(("alice", 10))
        iassets.transfer(book, "alice", "bob", ETH, Decimal(4))
        accruals = iassets.accrue_rewards(book, 1, {"ETH": Decimal("0.1")})
        assert accruals == {
            ("alice", ETH): Decimal("0.6"),
            ("bob", ETH): Decimal("0.4"),
        }

    def test_rewards_accumulate(self):
        book = _book(("alice", 10))
        for u in (1, 2):
            _ = iassets.accrue_rewards(book, u, {"ETH": Decimal("0.1")})
        assert book.rewards[("alice", ETH)] == 2

    def test_unrated_asset_earns_nothing(self):
        book = _book(("alice", 10))
        assert iassets.accrue_rewards(book, 1, {"SOL": Decimal(1)}) == {}
