"""Ledger, price, and seeding primitives shared by every module.

Quantities and prices are `decimal.Decimal`. The module sets a 100-digit context
on import so that products of quantities and prices are exact and sums of them
never round. Results of division are quantized explicitly with `quantize_qty`
(rounding down, so the ledger never pays out more than it computed) or
`quantize_price`.

The ledger is double entry in the sense that every movement debits one account
and credits another by the same quantity of the same asset. The only ways to
change the global supply of an asset are `BalanceSheet.mint` and
`BalanceSheet.burn`, and both carry a tag, so

    sheet.supply(asset) == sheet.net_issued(asset)

holds after any sequence of operations.

:author: Shay Hill
:created: 2025-02-03
"""

from __future__ import annotations

import hashlib
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, ROUND_HALF_EVEN, ROUND_UP, Decimal, getcontext
from typing import TYPE_CHECKING

import numpy as np

from intralayer_sim.errors import (
    InsufficientBalance,
    MissingPrice,
    NegativeQuantity,
    UnknownAccount,
)
from intralayer_sim.globs import (
    DECIMAL_PRECISION,
    METRIC_STEP,
    PRICE_STEP,
    QTY_STEP,
)
from intralayer_sim.type_hints import Account

if TYPE_CHECKING:
    from collections.abc import Collection, Iterator, Mapping, Sequence

    from intralayer_sim.type_hints import AssetId, ChainId, OwnerId

getcontext().prec = DECIMAL_PRECISION

HoldingKey = tuple["OwnerId", "ChainId", "AssetId"]

ZERO = Decimal(0)
ONE = Decimal(1)


# ===================================================================================
#   Decimal helpers
# ===================================================================================


def to_decimal(value: Decimal | int | float | str) -> Decimal:
    """Convert a number to Decimal, reading floats by their shortest repr.

    :param value: a Decimal, int, float, or numeric string
    :return: the value as a Decimal. 0.003 becomes Decimal("0.003"), not the
        binary expansion of the float.

    >>> to_decimal(0.003)
    Decimal('0.003')
    """
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(value)


def quantize_qty(value: Decimal, *, up: bool = False) -> Decimal:
    """Round a derived quantity to 18 fractional digits.

    :param value: quantity from a division
    :param up: round away from zero instead of toward it
    :return: value on the quantity grid
    """
    return value.quantize(QTY_STEP, rounding=ROUND_UP if up else ROUND_DOWN)


def quantize_price(value: Decimal) -> Decimal:
    """Round a price to 12 fractional digits."""
    return value.quantize(PRICE_STEP, rounding=ROUND_HALF_EVEN)


def quantize_metric(value: Decimal) -> Decimal:
    """Round an exported metric to 12 fractional digits."""
    return value.quantize(METRIC_STEP, rounding=ROUND_HALF_EVEN)


# ===================================================================================
#   Random streams
# ===================================================================================


def spawn_rng(seed: int, label: str) -> np.random.Generator:
    """Create the random stream for one labelled consumer.

    :param seed: scenario master seed
    :param label: consumer name, e.g. "price/ETH" or "channel/oracle"
    :return: a Generator that depends only on (seed, label), so adding a
        consumer never shifts the draws of another.
    """
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def uniform(rng: np.random.Generator) -> Decimal:
    """Draw from U[0, 1) and return it as an exact Decimal."""
    return Decimal(repr(float(rng.random())))


# ===================================================================================
#   Balance sheet
# ===================================================================================


@dataclass
class BalanceSheet:
    """Holdings and liabilities per (owner, chain, asset).

    :param holdings: quantity held, never negative. Zero entries are dropped.
    :param liabilities: quantity owed by the owner to outside claimants
    :param accounts: opened (owner, chain) accounts
    :param issued: net quantity minted per (asset, tag)
    :param equity: last recorded system equity R
    :param requirement: last recorded system requirement Gamma
    """

    holdings: dict[HoldingKey, Decimal] = field(default_factory=dict)
    liabilities: dict[HoldingKey, Decimal] = field(default_factory=dict)
    accounts: set[Account] = field(default_factory=set)
    issued: dict[tuple[AssetId, str], Decimal] = field(default_factory=dict)
    equity: Decimal = ZERO
    requirement: Decimal = ZERO

    def open(self, owner: OwnerId, chain: ChainId) -> Account:
        """Open an account if it is not already open and return it."""
        account = Account(owner, chain)
        self.accounts.add(account)
        return account

    def _require(self, account: Account) -> None:
        if account not in self.accounts:
            msg = f"account {account.owner}@{account.chain} is not open"
            raise UnknownAccount(msg)

    def balance(self, account: Account, asset: AssetId) -> Decimal:
        """Return the quantity of asset held in an open account."""
        self._require(account)
        return self.holdings.get((account.owner, account.chain, asset), ZERO)

    def owed(self, account: Account, asset: AssetId) -> Decimal:
        """Return the quantity of asset an open account owes."""
        self._require(account)
        return self.liabilities.get((account.owner, account.chain, asset), ZERO)

    def _add(
        self, book: dict[HoldingKey, Decimal], account: Account, asset: str, qty: Decimal
    ) -> None:
        key = (account.owner, account.chain, asset)
        new = book.get(key, ZERO) + qty
        if new:
            book[key] = new
        else:
            _ = book.pop(key, None)

    def post_entry(
        self, debit: Account, credit: Account, asset: AssetId, qty: Decimal
    ) -> BalanceSheet:
        """Move qty of asset from the debit account to the credit account.

        :param debit: account giving up the asset
        :param credit: account receiving the asset
        :param asset: asset moved
        :param qty: non-negative quantity. Zero is a no-op.
        :return: self
        :raise NegativeQuantity: if qty < 0
        :raise UnknownAccount: if either account is not open
        :raise InsufficientBalance: if the debit account holds less than qty
        """
        if qty < 0:
            msg = f"cannot post a negative quantity {qty} of {asset}"
            raise NegativeQuantity(msg)
        self._require(debit)
        self._require(credit)
        if qty == 0:
            return self
        held = self.balance(debit, asset)
        if held < qty:
            msg = f"{debit.owner}@{debit.chain} holds {held} {asset}, needs {qty}"
            raise InsufficientBalance(msg)
        self._add(self.holdings, debit, asset, -qty)
        self._add(self.holdings, credit, asset, qty)
        return self

    def mint(self, account: Account, asset: AssetId, qty: Decimal, tag: str) -> None:
        """Create qty of asset in account and record it under tag."""
        if qty < 0:
            msg = f"cannot mint a negative quantity {qty} of {asset}"
            raise NegativeQuantity(msg)
        self._require(account)
        if qty == 0:
            return
        self._add(self.holdings, account, asset, qty)
        self.issued[asset, tag] = self.issued.get((asset, tag), ZERO) + qty

    def burn(self, account: Account, asset: AssetId, qty: Decimal, tag: str) -> None:
        """Destroy qty of asset held in account and record it under tag."""
        if qty < 0:
            msg = f"cannot burn a negative quantity {qty} of {asset}"
            raise NegativeQuantity(msg)
        if qty == 0:
            return
        held = self.balance(account, asset)
        if held < qty:
            msg = f"{account.owner}@{account.chain} holds {held} {asset}, burns {qty}"
            raise InsufficientBalance(msg)
        self._add(self.holdings, account, asset, -qty)
        self.issued[asset, tag] = self.issued.get((asset, tag), ZERO) - qty

    def post_liability(self, account: Account, asset: AssetId, qty: Decimal) -> None:
        """Record that account owes qty of asset."""
        if qty < 0:
            msg = f"cannot post a negative liability {qty} of {asset}"
            raise NegativeQuantity(msg)
        self._require(account)
        self._add(self.liabilities, account, asset, qty)

    def release_liability(self, account: Account, asset: AssetId, qty: Decimal) -> None:
        """Reduce what account owes of asset by qty."""
        owed = self.owed(account, asset)
        if qty < 0 or qty > owed:
            msg = f"{account.owner}@{account.chain} owes {owed} {asset}, releases {qty}"
            raise InsufficientBalance(msg)
        self._add(self.liabilities, account, asset, -qty)

    def supply(self, asset: AssetId) -> Decimal:
        """Return the global quantity of asset across all accounts."""
        return sum((q for (_, _, a), q in self.holdings.items() if a == asset), ZERO)

    def net_issued(self, asset: AssetId, tag: str | None = None) -> Decimal:
        """Return net minted quantity of asset, for one tag or all of them."""
        return sum(
            (
                q
                for (a, t), q in self.issued.items()
                if a == asset and (tag is None or t == tag)
            ),
            ZERO,
        )

    def assets(self) -> list[AssetId]:
        """Return every asset ever issued, sorted."""
        return sorted({a for a, _ in self.issued})

    def positions(self, owner: OwnerId) -> dict[tuple[ChainId, AssetId], Decimal]:
        """Return the non-zero holdings of one owner across chains."""
        return {(c, a): q for (o, c, a), q in self.holdings.items() if o == owner}

    def view(self, owners: Collection[OwnerId]) -> BalanceSheet:
        """Return a copy restricted to the holdings and liabilities of owners."""
        keep = set(owners)
        return BalanceSheet(
            holdings={k: v for k, v in self.holdings.items() if k[0] in keep},
            liabilities={k: v for k, v in self.liabilities.items() if k[0] in keep},
            accounts={a for a in self.accounts if a.owner in keep},
        )

    @contextmanager
    def atomic(self) -> Iterator[BalanceSheet]:
        """Restore the sheet if the block raises."""
        saved = (
            dict(self.holdings),
            dict(self.liabilities),
            set(self.accounts),
            dict(self.issued),
            self.equity,
            self.requirement,
        )
        try:
            yield self
        except BaseException:
            (
                self.holdings,
                self.liabilities,
                self.accounts,
                self.issued,
                self.equity,
                self.requirement,
            ) = saved
            raise

    def as_dict(self) -> dict[str, object]:
        """Return a canonical, json-ready dump for digests and snapshots."""

        def dump(book: Mapping[HoldingKey, Decimal]) -> list[list[str]]:
            return [[o, c, a, str(q)] for (o, c, a), q in sorted(book.items())]

        return {
            "holdings": dump(self.holdings),
            "liabilities": dump(self.liabilities),
            "issued": [[a, t, str(q)] for (a, t), q in sorted(self.issued.items())],
        }


def _price(prices: Mapping[AssetId, Decimal], asset: AssetId) -> Decimal:
    try:
        return prices[asset]
    except KeyError as e:
        msg = f"no price for {asset}"
        raise MissingPrice(msg) from e


def mark_to_market(sheet: BalanceSheet, prices: Mapping[AssetId, Decimal]) -> Decimal:
    """Value assets minus liabilities in hub units.

    :param sheet: holdings and liabilities to value
    :param prices: hub units per asset unit for every asset in the sheet
    :return: sum of qty * price over holdings less the same over liabilities
    :raise MissingPrice: if a held or owed asset has no price
    """
    total = ZERO
    for (_, _, asset), qty in sheet.holdings.items():
        total += qty * _price(prices, asset)
    for (_, _, asset), qty in sheet.liabilities.items():
        total -= qty * _price(prices, asset)
    return total


# ===================================================================================
#   Prices
# ===================================================================================


@dataclass(frozen=True)
class PricePath:
    """How one asset's price evolves.

    :param initial: price before epoch 1
    :param table: if non-empty, the price at epoch u is table[min(u, len) - 1]
    :param drift: per-epoch log drift of the multiplicative walk
    :param volatility: per-epoch log volatility of the multiplicative walk
    """

    initial: Decimal
    table: tuple[Decimal, ...] = ()
    drift: float = 0.0
    volatility: float = 0.0


@dataclass
class PriceProcess:
    """Current prices and the paths that move them."""

    paths: dict[AssetId, PricePath]
    current: dict[AssetId, Decimal] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for asset, path in self.paths.items():
            _ = self.current.setdefault(asset, path.initial)

    def prices(self) -> dict[AssetId, Decimal]:
        """Return a copy of the current price map."""
        return dict(self.current)


def advance_price(
    process: PriceProcess, asset: AssetId, u: int, rng: np.random.Generator
) -> Decimal:
    """Move one asset's price to epoch u.

    :param process: price state, updated in place
    :param asset: asset to move
    :param u: epoch index, 1 or greater
    :param rng: the asset's own stream. Walk mode draws one standard normal per
        call.
    :return: the new price
    """
    if u < 1:
        msg = f"epoch index must be at least 1, got {u}"
        raise ValueError(msg)
    try:
        path = process.paths[asset]
    except KeyError as e:
        msg = f"no price process for {asset}"
        raise MissingPrice(msg) from e
    if path.table:
        price = path.table[min(u, len(path.table)) - 1]
    else:
        shock = float(rng.standard_normal())
        vol = path.volatility
        factor = math.exp(path.drift - vol * vol / 2 + vol * shock)
        price = quantize_price(process.current[asset] * Decimal(repr(factor)))
        price = max(price, PRICE_STEP)
    process.current[asset] = price
    return price


def scheduled(values: Sequence[Decimal], u: int) -> Decimal:
    """Value of a per-epoch schedule at epoch u.

    A schedule lists one value per epoch; epochs past its end keep the last value,
    so a one-element schedule is a constant.

    >>> scheduled((Decimal(1), Decimal(2)), 5)
    Decimal('2')
    """
    if not values:
        msg = "a schedule needs at least one value"
        raise ValueError(msg)
    if u < 1:
        msg = f"epoch index must be at least 1, got {u}"
        raise ValueError(msg)
    return values[min(u, len(values)) - 1]
