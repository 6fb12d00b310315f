"""Collateralized leasing of network-owned inventory.

A lessee escrows collateral and receives leased inventory on a target chain. The
lease is a hub-denominated loan out of the @nol_ke portfolio: at opening the
portfolio gives up inventory worth L and books a receivable of L, so its value
does not move. The collateralization rate

    rho = (H * p_collateral + deployed_qty * p_leased) / L

falls as prices move against the position. Below the maintenance rate the lease
is liquidated in full: inventory covering L goes back to the portfolio,
collateral covering any shortfall is seized, and what neither covers is booked
as a loss.

:author: Shay Hill
:created: 2025-02-13
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import TYPE_CHECKING, Literal

from intralayer_sim.core import ZERO, quantize_qty
from intralayer_sim.errors import (
    BelowMinimumRate,
    InsufficientInventory,
    PathUnavailable,
    UnknownConductor,
    UnknownPosition,
    ZeroLease,
    ZeroPrice,
    ZeroRate,
)
from intralayer_sim.globs import DEPLOYED_PREFIX, ESCROW_PREFIX, NOL_KE, TREASURY
from intralayer_sim.type_hints import Account

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping

    from intralayer_sim.core import BalanceSheet
    from intralayer_sim.liquidity import VaultState
    from intralayer_sim.type_hints import AgentId, AssetId, ChainId

logger = logging.getLogger(__name__)

MarkAction = Literal["none", "margin_call", "liquidate"]


@dataclass(frozen=True)
class LeaseTerms:
    """Risk terms of a lease.

    :param rho_min: rate required to open. Below 1 the lease is leveraged.
    :param rho_maint: rate below which the lease is liquidated, <= rho_min
    :param fee_rate: share of L charged per epoch
    """

    rho_min: Decimal
    rho_maint: Decimal
    fee_rate: Decimal = ZERO

    def __post_init__(self) -> None:
        if self.rho_min <= 0:
            msg = f"rho_min must be positive, got {self.rho_min}"
            raise ValueError(msg)
        if self.rho_maint > self.rho_min:
            msg = f"rho_maint {self.rho_maint} exceeds rho_min {self.rho_min}"
            raise ValueError(msg)
        if self.fee_rate < 0:
            msg = f"lease fee rate must be non-negative, got {self.fee_rate}"
            raise ValueError(msg)


@dataclass
class CollateralPosition:
    """One lease.

    :param id: position id, also the suffix of its escrow and deployed accounts
    :param owner: the lessee
    :param collateral_asset: escrowed asset
    :param collateral_qty: H, escrowed quantity
    :param collateral_chain: chain the collateral is escrowed on
    :param leased_asset: leased asset
    :param deployed_qty: leased quantity deployed on the target chain
    :param leased_value: L, hub value of the deployed quantity at opening
    :param deployed_chain: target chain
    :param terms: risk terms
    :param opened_epoch: epoch the lease opened
    :param open: False once closed or liquidated
    """

    id: str
    owner: AgentId
    collateral_asset: AssetId
    collateral_qty: Decimal
    collateral_chain: ChainId
    leased_asset: AssetId
    deployed_qty: Decimal
    leased_value: Decimal
    deployed_chain: ChainId
    terms: LeaseTerms
    opened_epoch: int = 0
    open: bool = True

    @property
    def escrow(self) -> Account:
        """Account holding the collateral."""
        return Account(ESCROW_PREFIX + self.id, self.collateral_chain)

    @property
    def deployed(self) -> Account:
        """Account holding the leased inventory."""
        return Account(DEPLOYED_PREFIX + self.id, self.deployed_chain)


@dataclass
class LeaseBook:
    """Every lease, the receivables of open ones, and booked losses."""

    positions: dict[str, CollateralPosition] = field(default_factory=dict)
    receivables: dict[str, Decimal] = field(default_factory=dict)
    losses: dict[str, Decimal] = field(default_factory=dict)
    next_id: int = 1

    def get(self, position_id: str) -> CollateralPosition:
        """Return an open position.

        :raise UnknownPosition: if there is no open position with that id
        """
        pos = self.positions.get(position_id)
        if pos is None or not pos.open:
            msg = f"no open position {position_id}"
            raise UnknownPosition(msg)
        return pos

    def open_positions(self) -> list[CollateralPosition]:
        """Open positions in id order."""
        return [p for _, p in sorted(self.positions.items()) if p.open]

    @property
    def receivable_total(self) -> Decimal:
        """Hub value owed to the portfolio by open leases."""
        return sum(self.receivables.values(), ZERO)

    @property
    def loss_total(self) -> Decimal:
        """Hub value lost to under-collateralized liquidations."""
        return sum(self.losses.values(), ZERO)

    @contextmanager
    def atomic(self) -> Iterator[LeaseBook]:
        """Restore the book if the block raises."""
        saved = (
            {k: replace(p) for k, p in self.positions.items()},
            dict(self.receivables),
            dict(self.losses),
            self.next_id,
        )
        try:
            yield self
        except BaseException:
            self.positions, self.receivables, self.losses, self.next_id = saved
            raise

    def as_dict(self) -> dict[str, object]:
        """Return a canonical, json-ready dump for digests."""
        return {
            "open": [p.id for p in self.open_positions()],
            "receivables": {k: str(v) for k, v in sorted(self.receivables.items())},
            "losses": {k: str(v) for k, v in sorted(self.losses.items())},
        }


# ===================================================================================
#   Rates
# ===================================================================================


def collateralization_rate(
    pos: CollateralPosition, prices: Mapping[AssetId, Decimal]
) -> Decimal:
    """Current rate (H * p_c + deployed_qty * p_l) / L.

    :raise ZeroLease: if L is zero
    """
    if pos.leased_value <= 0:
        msg = f"position {pos.id} has no leased value"
        raise ZeroLease(msg)
    collateral = pos.collateral_qty * prices[pos.collateral_asset]
    deployed = pos.deployed_qty * prices[pos.leased_asset]
    return (collateral + deployed) / pos.leased_value


def max_lease_value(collateral_value: Decimal, rho_min: Decimal) -> Decimal | None:
    """Largest L a collateral value supports at opening, when the deployed value is L.

    Above 1, (C + L) / L >= rho_min gives L <= C / (rho_min - 1). Below 1 the
    opening rate always clears rho_min, and rho_min is read as a leverage cap
    L <= C / (1 - rho_min).

    :return: the cap, or None for rho_min == 1 (no cap)

    >>> max_lease_value(Decimal(40), Decimal("1.25")) == 160
    True
    >>> max_lease_value(Decimal(40), Decimal("0.8")) == 200
    True
    """
    if rho_min == 1:
        return None
    return collateral_value / abs(rho_min - 1)


def mark(pos: CollateralPosition, prices: Mapping[AssetId, Decimal]) -> MarkAction:
    """Classify a position at prices. Only a rate strictly below a bound triggers."""
    rho = collateralization_rate(pos, prices)
    if rho < pos.terms.rho_maint:
        return "liquidate"
    if rho < pos.terms.rho_min:
        return "margin_call"
    return "none"


def leveraged_pnl(
    pos: CollateralPosition,
    p_dc_t: Decimal,
    p_vn_t: Decimal,
    p_vn_t1: Decimal,
    rho: Decimal,
    *,
    leased_next: Decimal | None = None,
) -> Decimal:
    """Profit of a leveraged exposure over one period.

    ((H * p_dc_t + L_next) / rho) * (p_vn_t1 / p_vn_t - 1)

    :param pos: supplies the collateral quantity H
    :param p_dc_t: collateral price at t
    :param p_vn_t: price of the exposed asset at t
    :param p_vn_t1: price of the exposed asset at t + 1
    :param rho: collateralization rate
    :param leased_next: leased value at t + 1. Defaults to the deployed quantity
        at p_vn_t1.
    :raise ZeroRate: if rho <= 0
    :raise ZeroPrice: if p_vn_t <= 0
    """
    if rho <= 0:
        msg = f"collateralization rate must be positive, got {rho}"
        raise ZeroRate(msg)
    if p_vn_t <= 0:
        msg = f"opening price must be positive, got {p_vn_t}"
        raise ZeroPrice(msg)
    if leased_next is None:
        leased_next = pos.deployed_qty * p_vn_t1
    notional = (pos.collateral_qty * p_dc_t + leased_next) / rho
    return notional * (p_vn_t1 / p_vn_t - 1)


# ===================================================================================
#   Lifecycle
# ===================================================================================


def open_lease(
    ledger: BalanceSheet,
    book: LeaseBook,
    vaults: Mapping[ChainId, VaultState],
    prices: Mapping[AssetId, Decimal],
    *,
    owner: AgentId,
    collateral: tuple[AssetId, ChainId, Decimal],
    leased_asset: AssetId,
    requested_value: Decimal,
    deployed_chain: ChainId,
    terms: LeaseTerms,
    nol_chain: ChainId,
    epoch: int = 0,
) -> CollateralPosition:
    """Escrow collateral and deploy leased inventory.

    :param ledger: balance sheet, updated in place
    :param book: lease book, updated in place
    :param vaults: vault per chain. The target chain's vault must lease.
    :param prices: current prices
    :param owner: the lessee
    :param collateral: (asset, chain, quantity) escrowed from the owner
    :param leased_asset: asset to lease
    :param requested_value: hub value to lease. The deployed quantity is rounded
        down and L is its exact value.
    :param deployed_chain: chain to deploy the inventory on
    :param terms: risk terms
    :param nol_chain: chain of the @nol_ke inventory
    :param epoch: opening epoch
    :return: the open position
    :raise ZeroLease: if the request rounds to nothing
    :raise BelowMinimumRate: if the collateral does not support L
    :raise InsufficientInventory: if @nol_ke holds too little of the asset
    :raise PathUnavailable: if the target chain's vault cannot lease
    """
    c_asset, c_chain, c_qty = collateral
    if requested_value <= 0:
        msg = f"cannot lease a value of {requested_value}"
        raise ZeroLease(msg)
    price = prices[leased_asset]
    qty = quantize_qty(requested_value / price)
    if qty == 0:
        msg = f"{requested_value} buys no {leased_asset}"
        raise ZeroLease(msg)
    leased_value = qty * price

    cap = max_lease_value(c_qty * prices[c_asset], terms.rho_min)
    if cap is not None and leased_value > cap:
        msg = f"collateral supports a lease of {cap}, requested {leased_value}"
        raise BelowMinimumRate(msg)
    inventory = ledger.open(NOL_KE, nol_chain)
    if ledger.balance(inventory, leased_asset) < qty:
        held = ledger.balance(inventory, leased_asset)
        msg = f"{NOL_KE} holds {held} {leased_asset}, lease needs {qty}"
        raise InsufficientInventory(msg)
    vault = vaults.get(deployed_chain)
    if vault is None:
        msg = f"cannot lease onto {deployed_chain}: the chain has no vault"
        raise PathUnavailable(msg)
    try:
        _ = vault.dispatch("lease")
    except UnknownConductor as e:
        msg = f"cannot lease onto {deployed_chain}: {e}"
        raise PathUnavailable(msg) from e

    pos = CollateralPosition(
        id=f"lease-{book.next_id}",
        owner=owner,
        collateral_asset=c_asset,
        collateral_qty=c_qty,
        collateral_chain=c_chain,
        leased_asset=leased_asset,
        deployed_qty=qty,
        leased_value=leased_value,
        deployed_chain=deployed_chain,
        terms=terms,
        opened_epoch=epoch,
    )
    escrow = ledger.open(pos.escrow.owner, c_chain)
    deployed = ledger.open(pos.deployed.owner, deployed_chain)
    _ = ledger.post_entry(Account(owner, c_chain), escrow, c_asset, c_qty)
    _ = ledger.post_entry(inventory, deployed, leased_asset, qty)

    book.positions[pos.id] = pos
    book.receivables[pos.id] = leased_value
    book.next_id += 1
    return pos


@dataclass(frozen=True)
class Settlement:
    """How a closed position repaid L.

    :param reclaimed: leased quantity returned to the portfolio
    :param paid: hub units the owner paid toward a shortfall
    :param seized: collateral quantity taken by the portfolio
    :param loss: hub value nothing covered
    """

    position: str
    reclaimed: Decimal
    paid: Decimal
    seized: Decimal
    loss: Decimal


def _covering(value: Decimal, price: Decimal) -> Decimal:
    """Smallest quantity on the grid worth at least value."""
    return quantize_qty(value / price, up=True)


def _settle(
    ledger: BalanceSheet,
    book: LeaseBook,
    pos: CollateralPosition,
    prices: Mapping[AssetId, Decimal],
    *,
    nol_chain: ChainId,
    hub: AssetId | None,
    hub_chain: ChainId | None,
) -> Settlement:
    """Return L to the portfolio and everything left over to the owner.

    With a hub asset given, the owner pays any shortfall in cash before
    collateral is seized.
    """
    inventory = ledger.open(NOL_KE, nol_chain)
    p_l = prices[pos.leased_asset]
    p_c = prices[pos.collateral_asset]

    reclaimed = min(pos.deployed_qty, _covering(pos.leased_value, p_l))
    _ = ledger.post_entry(pos.deployed, inventory, pos.leased_asset, reclaimed)
    excess = pos.deployed_qty - reclaimed
    owner_deployed = ledger.open(pos.owner, pos.deployed_chain)
    _ = ledger.post_entry(pos.deployed, owner_deployed, pos.leased_asset, excess)
    shortfall = max(ZERO, pos.leased_value - reclaimed * p_l)

    paid = ZERO
    if shortfall and hub is not None and hub_chain is not None:
        cash = ledger.open(pos.owner, hub_chain)
        paid = min(shortfall, ledger.balance(cash, hub))
        _ = ledger.post_entry(cash, inventory, hub, paid)
        shortfall -= paid

    seized = ZERO
    if shortfall:
        seized = min(pos.collateral_qty, _covering(shortfall, p_c))
        seized_to = ledger.open(NOL_KE, pos.collateral_chain)
        _ = ledger.post_entry(pos.escrow, seized_to, pos.collateral_asset, seized)
        shortfall = max(ZERO, shortfall - seized * p_c)
    owner_collateral = ledger.open(pos.owner, pos.collateral_chain)
    _ = ledger.post_entry(
        pos.escrow, owner_collateral, pos.collateral_asset, pos.collateral_qty - seized
    )

    if shortfall:
        book.losses[pos.id] = shortfall
        logger.warning("position %s closed with a loss of %s", pos.id, shortfall)
    del book.receivables[pos.id]
    pos.open = False
    return Settlement(pos.id, reclaimed, paid, seized, shortfall)


def close_lease(
    ledger: BalanceSheet,
    book: LeaseBook,
    position_id: str,
    prices: Mapping[AssetId, Decimal],
    *,
    hub: AssetId,
    hub_chain: ChainId,
    nol_chain: ChainId,
) -> Settlement:
    """Close a lease at the owner's request.

    At unchanged prices the deployed inventory is worth exactly L, so the
    portfolio gets its inventory back and the owner gets the collateral back.

    :raise UnknownPosition: if the position is not open
    """
    pos = book.get(position_id)
    return _settle(ledger, book, pos, prices, nol_chain=nol_chain, hub=hub, hub_chain=hub_chain)


@dataclass(frozen=True)
class MarkResult:
    """Outcome of marking one position."""

    position: str
    action: MarkAction
    rho: Decimal
    settlement: Settlement | None = None


def mark_and_liquidate(
    ledger: BalanceSheet,
    book: LeaseBook,
    position_id: str,
    prices: Mapping[AssetId, Decimal],
    *,
    nol_chain: ChainId,
) -> MarkResult:
    """Mark a position and liquidate it if its rate is below maintenance.

    Liquidation is of the whole position. The owner is not asked for cash; the
    shortfall is taken from collateral and the rest is booked as a loss.
    """
    pos = book.get(position_id)
    rho = collateralization_rate(pos, prices)
    action = mark(pos, prices)
    if action != "liquidate":
        return MarkResult(pos.id, action, rho)
    settlement = _settle(
        ledger, book, pos, prices, nol_chain=nol_chain, hub=None, hub_chain=None
    )
    return MarkResult(pos.id, action, rho, settlement)


@dataclass(frozen=True)
class LeaseFee:
    """One epoch's fee on one position. Unpaid fees are not carried forward."""

    position: str
    owner: AgentId
    due: Decimal
    paid: Decimal


def accrue_lease_fees(
    ledger: BalanceSheet, book: LeaseBook, *, hub: AssetId, hub_chain: ChainId
) -> list[LeaseFee]:
    """Charge fee_rate * L on every open position, paid in hub to the treasury.

    An owner short of cash pays what it holds.
    """
    treasury = ledger.open(TREASURY, hub_chain)
    fees: list[LeaseFee] = []
    for pos in book.open_positions():
        due = pos.terms.fee_rate * pos.leased_value
        if not due:
            continue
        cash = ledger.open(pos.owner, hub_chain)
        paid = min(due, ledger.balance(cash, hub))
        _ = ledger.post_entry(cash, treasury, hub, paid)
        fees.append(LeaseFee(pos.id, pos.owner, due, paid))
    return fees
