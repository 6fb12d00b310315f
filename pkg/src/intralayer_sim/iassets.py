"""Claim tokens on vault deposits.

Each underlying (asset, chain) has a share ledger. A holder's redeemable
quantity is shares * share_price. Slashing lowers share_price, so every holder's
claim shrinks by the same fraction and ownership fractions never move.

The vault posts a liability equal to total_shares * share_price for every
underlying, and its holdings of the underlying equal that liability at all times:

* mint rounds shares down and hands the rounding dust to the market maker
* burn releases exactly shares * share_price
* a slash burns exactly the drop in the liability

:author: Shay Hill
:created: 2025-02-10
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from intralayer_sim.core import ONE, ZERO, quantize_price, quantize_qty
from intralayer_sim.errors import (
    InsufficientShares,
    InsufficientVaultLiquidity,
    NoMatchingDeposit,
)
from intralayer_sim.globs import DFMM, VAULT
from intralayer_sim.type_hints import Underlying

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping
    from decimal import Decimal

    from intralayer_sim.core import BalanceSheet
    from intralayer_sim.type_hints import AgentId, AssetId


@dataclass
class IAssetSupply:
    """Share ledger of one underlying.

    :param total_shares: shares outstanding
    :param share_price: underlying units per share, 1 at genesis
    :param holder_shares: shares per holder, zero entries dropped
    """

    total_shares: Decimal = ZERO
    share_price: Decimal = ONE
    holder_shares: dict[AgentId, Decimal] = field(default_factory=dict)

    def shares_of(self, holder: AgentId) -> Decimal:
        """Shares held by holder."""
        return self.holder_shares.get(holder, ZERO)

    def redeemable(self, holder: AgentId) -> Decimal:
        """Underlying quantity holder could redeem."""
        return self.shares_of(holder) * self.share_price

    def adjust(self, holder: AgentId, shares: Decimal) -> None:
        """Add shares (negative to remove) to holder."""
        new = self.shares_of(holder) + shares
        if new:
            self.holder_shares[holder] = new
        else:
            _ = self.holder_shares.pop(holder, None)


@dataclass
class IAssetBook:
    """Every iAsset supply, pending deposits, and accrued rewards.

    :param ledger: the balance sheet holding vault deposits
    :param supplies: share ledger per underlying
    :param pending: deposited quantity not yet minted, per (holder, underlying)
    :param rewards: accrued native rewards per (holder, underlying)
    """

    ledger: BalanceSheet
    supplies: dict[Underlying, IAssetSupply] = field(default_factory=dict)
    pending: dict[tuple[AgentId, Underlying], Decimal] = field(default_factory=dict)
    rewards: dict[tuple[AgentId, Underlying], Decimal] = field(default_factory=dict)

    def supply(self, underlying: Underlying) -> IAssetSupply:
        """Return the share ledger of underlying, creating it if needed."""
        return self.supplies.setdefault(underlying, IAssetSupply())

    def record_deposit(self, holder: AgentId, underlying: Underlying, qty: Decimal) -> None:
        """Note an executed vault deposit that a mint may claim."""
        key = (holder, underlying)
        self.pending[key] = self.pending.get(key, ZERO) + qty

    def holdings_of(self, holder: AgentId) -> dict[Underlying, Decimal]:
        """Redeemable quantity per underlying for one holder."""
        return {
            u: s.redeemable(holder)
            for u, s in sorted(self.supplies.items())
            if s.shares_of(holder)
        }

    @contextmanager
    def atomic(self) -> Iterator[IAssetBook]:
        """Restore supplies, pending deposits, and rewards if the block raises."""
        saved = (
            {
                u: IAssetSupply(s.total_shares, s.share_price, dict(s.holder_shares))
                for u, s in self.supplies.items()
            },
            dict(self.pending),
            dict(self.rewards),
        )
        try:
            yield self
        except BaseException:
            self.supplies, self.pending, self.rewards = saved
            raise

    def as_dict(self) -> dict[str, object]:
        """Return a canonical, json-ready dump for digests."""
        return {
            f"{u.asset}@{u.chain}": {
                "total_shares": str(s.total_shares),
                "share_price": str(s.share_price),
                "holders": {h: str(q) for h, q in sorted(s.holder_shares.items())},
            }
            for u, s in sorted(self.supplies.items())
        }


def mint(book: IAssetBook, holder: AgentId, underlying: Underlying, qty: Decimal) -> Decimal:
    """Issue shares against a deposit the holder already made.

    :param book: iAsset state
    :param holder: depositing agent
    :param underlying: deposited asset and chain
    :param qty: deposited quantity to claim
    :return: shares issued, qty / share_price rounded down
    :raise NoMatchingDeposit: if the holder has less than qty deposited and
        unclaimed
    """
    key = (holder, underlying)
    if qty < 0:
        msg = f"cannot mint against a negative quantity {qty}"
        raise ValueError(msg)
    if qty == 0:
        return ZERO
    if book.pending.get(key, ZERO) < qty:
        msg = f"{holder} has no deposit of {qty} {underlying.asset}@{underlying.chain}"
        raise NoMatchingDeposit(msg)
    supply = book.supply(underlying)
    shares = quantize_qty(qty / supply.share_price)
    backed = shares * supply.share_price
    vault = book.ledger.open(VAULT, underlying.chain)
    book.ledger.post_liability(vault, underlying.asset, backed)
    if dust := qty - backed:
        dfmm = book.ledger.open(DFMM, underlying.chain)
        _ = book.ledger.post_entry(vault, dfmm, underlying.asset, dust)

    book.pending[key] -= qty
    if not book.pending[key]:
        del book.pending[key]
    supply.total_shares += shares
    supply.adjust(holder, shares)
    return shares


def burn(book: IAssetBook, holder: AgentId, underlying: Underlying, shares: Decimal) -> Decimal:
    """Redeem shares for underlying out of the vault.

    :param book: iAsset state
    :param holder: redeeming agent. Receives the underlying on the vault's chain.
    :param underlying: asset and chain to redeem
    :param shares: shares to burn
    :return: quantity released, shares * share_price
    :raise InsufficientShares: if the holder owns fewer shares
    :raise InsufficientVaultLiquidity: if the vault holds less than the release
    """
    supply = book.supply(underlying)
    if shares < 0:
        msg = f"cannot burn a negative number of shares {shares}"
        raise ValueError(msg)
    if supply.shares_of(holder) < shares:
        msg = f"{holder} holds {supply.shares_of(holder)} shares, burns {shares}"
        raise InsufficientShares(msg)
    qty = shares * supply.share_price
    vault = book.ledger.open(VAULT, underlying.chain)
    available = book.ledger.balance(vault, underlying.asset)
    if available < qty:
        msg = f"vault on {underlying.chain} holds {available} {underlying.asset}, owes {qty}"
        raise InsufficientVaultLiquidity(msg)
    book.ledger.release_liability(vault, underlying.asset, qty)
    account = book.ledger.open(holder, underlying.chain)
    _ = book.ledger.post_entry(vault, account, underlying.asset, qty)
    supply.total_shares -= shares
    supply.adjust(holder, -shares)
    return qty


def transfer(
    book: IAssetBook,
    sender: AgentId,
    receiver: AgentId,
    underlying: Underlying,
    shares: Decimal,
) -> None:
    """Move shares, and the right to future rewards on them, between holders.

    :raise InsufficientShares: if sender owns fewer shares
    """
    supply = book.supply(underlying)
    if shares < 0:
        msg = f"cannot transfer a negative number of shares {shares}"
        raise ValueError(msg)
    if supply.shares_of(sender) < shares:
        msg = f"{sender} holds {supply.shares_of(sender)} shares, sends {shares}"
        raise InsufficientShares(msg)
    if sender == receiver:
        return
    supply.adjust(sender, -shares)
    supply.adjust(receiver, shares)


def rebase_on_slash(book: IAssetBook, underlying: Underlying, slash_fraction: Decimal) -> Decimal:
    """Cut every claim on underlying by slash_fraction.

    :param book: iAsset state
    :param underlying: the slashed deposit
    :param slash_fraction: share of the deposit lost, in [0, 1]
    :return: underlying quantity burned out of the vault
    """
    if not ZERO <= slash_fraction <= ONE:
        msg = f"slash fraction must be in [0, 1], got {slash_fraction}"
        raise ValueError(msg)
    supply = book.supply(underlying)
    if slash_fraction == 0:
        return ZERO
    new_price = quantize_price(supply.share_price * (ONE - slash_fraction))
    lost = supply.total_shares * (supply.share_price - new_price)
    vault = book.ledger.open(VAULT, underlying.chain)
    book.ledger.burn(vault, underlying.asset, lost, "slash")
    book.ledger.release_liability(vault, underlying.asset, lost)
    supply.share_price = new_price
    return lost


def accrue_rewards(
    book: IAssetBook, epoch: int, rates: Mapping[AssetId, Decimal]
) -> dict[tuple[AgentId, Underlying], Decimal]:
    """Credit each holder of record with redeemable quantity * rate.

    :param book: iAsset state
    :param epoch: closing epoch, for the caller's records
    :param rates: per-epoch reward rate per underlying asset. Missing assets
        earn nothing.
    :return: this epoch's accrual per (holder, underlying), non-zero entries only
    """
    del epoch
    if any(r < 0 for r in rates.values()):
        msg = f"reward rates must be non-negative: {dict(rates)}"
        raise ValueError(msg)
    accruals: dict[tuple[AgentId, Underlying], Decimal] = {}
    for underlying, supply in sorted(book.supplies.items()):
        rate = rates.get(underlying.asset, ZERO)
        for holder in sorted(supply.holder_shares):
            if amount := supply.redeemable(holder) * rate:
                key = (holder, underlying)
                accruals[key] = amount
                book.rewards[key] = book.rewards.get(key, ZERO) + amount
    return accruals


def backing_gaps(book: IAssetBook) -> dict[Underlying, Decimal]:
    """Underlyings whose vault holdings or liability differ from their claims.

    :return: vault holdings minus claims, for every underlying that is off. An
        empty dict means every claim is exactly backed.
    """
    gaps: dict[Underlying, Decimal] = {}
    for underlying, supply in sorted(book.supplies.items()):
        claims = supply.total_shares * supply.share_price
        vault = book.ledger.open(VAULT, underlying.chain)
        held = book.ledger.balance(vault, underlying.asset)
        owed = book.ledger.owed(vault, underlying.asset)
        shares = sum(supply.holder_shares.values(), ZERO)
        if held != claims or owed != claims or shares != supply.total_shares:
            gaps[underlying] = held - claims
    return gaps
