"""Vaults, the star conversion network, value transfer, and network-owned liquidity.

Every conversion routes through the hub asset: a spoke-to-spoke conversion is two
hops, spoke -> hub and hub -> spoke, and never a direct spoke-to-spoke edge. Each
hop costs fee_rate * v + v^2 / (2 * depth) on the hub value v of the input. The
fee part is paid from the market maker's hub inventory to the treasury; the
slippage part stays with the market maker. The depth of an edge is its configured
(pLP) depth plus the hub value of the network-owned liquidity held in its spoke
asset.

:author: Shay Hill
:created: 2025-02-11
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal, localcontext
from typing import TYPE_CHECKING

from intralayer_sim import iassets
from intralayer_sim.apportion import apportion, proportions
from intralayer_sim.core import ONE, ZERO, mark_to_market, quantize_qty
from intralayer_sim.errors import (
    CostExceedsValue,
    NegativePortfolio,
    NegativeQuantity,
    NoVolume,
    PathUnavailable,
    ReconciliationError,
    UnknownChain,
    UnknownConductor,
    ZeroDepth,
    ZeroTransfer,
)
from intralayer_sim.globs import DECIMAL_PRECISION, DFMM, TREASURY, VAULT
from intralayer_sim.type_hints import Account, Underlying

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from intralayer_sim.core import BalanceSheet
    from intralayer_sim.type_hints import AgentId, AssetId, ChainId, OwnerId

logger = logging.getLogger(__name__)

VAULT_OPERATIONS = ("deposit", "withdraw", "transfer", "lease")


# ===================================================================================
#   Vaults
# ===================================================================================


@dataclass(frozen=True)
class Conductor:
    """Binding of one vault operation to an external contract."""

    operation: str
    contract: str


@dataclass
class VaultState:
    """The pooled custody contract of one chain.

    Every operation enters through the proxy (`dispatch`), which resolves it to a
    conductor through the directory of registered conductors.

    :param chain: chain the vault lives on
    :param ledger: balance sheet holding the vault's pool
    :param gas_reserve: hub units set aside for execution
    :param contracts: connected contracts conductors may bind to
    :param conductors: registry of conductors by operation
    :param directory: message-validation parameters
    """

    chain: ChainId
    ledger: BalanceSheet
    gas_reserve: Decimal = ZERO
    contracts: set[str] = field(default_factory=set)
    conductors: dict[str, Conductor] = field(default_factory=dict)
    directory: dict[str, str] = field(default_factory=dict)

    def register(self, conductor: Conductor) -> None:
        """Add a conductor to the registry."""
        if conductor.contract not in self.contracts:
            msg = f"{conductor.contract} is not a connected contract on {self.chain}"
            raise ValueError(msg)
        self.conductors[conductor.operation] = conductor

    def dispatch(self, operation: str) -> Conductor:
        """Resolve an operation to its conductor.

        :raise UnknownConductor: if no conductor handles the operation
        """
        try:
            return self.conductors[operation]
        except KeyError as e:
            msg = f"vault on {self.chain} has no conductor for {operation}"
            raise UnknownConductor(msg) from e

    @property
    def pool(self) -> dict[AssetId, Decimal]:
        """Quantity of each asset the vault holds."""
        positions = self.ledger.positions(VAULT)
        return {a: q for (c, a), q in sorted(positions.items()) if c == self.chain}


def new_vault(
    chain: ChainId,
    ledger: BalanceSheet,
    operations: Iterable[str] = VAULT_OPERATIONS,
    gas_reserve: Decimal = ZERO,
) -> VaultState:
    """Create a vault with one conductor per operation, each on its own contract."""
    _ = ledger.open(VAULT, chain)
    vault = VaultState(
        chain,
        ledger,
        gas_reserve=gas_reserve,
        directory={"chain": chain, "signature": "hub-attested"},
    )
    for operation in operations:
        contract = f"{chain}/{operation}"
        vault.contracts.add(contract)
        vault.register(Conductor(operation, contract))
    return vault


def _vault(vaults: Mapping[ChainId, VaultState], chain: ChainId) -> VaultState:
    try:
        return vaults[chain]
    except KeyError as e:
        msg = f"chain {chain} has no vault"
        raise UnknownChain(msg) from e


@dataclass(frozen=True)
class DepositReceipt:
    """Outcome of a vault deposit."""

    agent: AgentId
    chain: ChainId
    asset: AssetId
    qty: Decimal
    shares: Decimal


def deposit(
    ledger: BalanceSheet,
    vaults: Mapping[ChainId, VaultState],
    book: iassets.IAssetBook,
    agent: AgentId,
    chain: ChainId,
    asset: AssetId,
    qty: Decimal,
) -> DepositReceipt:
    """Move qty of asset from an agent into its chain's vault and mint claims.

    :raise UnknownChain: if the chain has no vault
    :raise InsufficientBalance: if the agent holds less than qty on chain
    """
    vault = _vault(vaults, chain)
    _ = vault.dispatch("deposit")
    if qty == 0:
        return DepositReceipt(agent, chain, asset, ZERO, ZERO)
    _ = ledger.post_entry(Account(agent, chain), Account(VAULT, chain), asset, qty)
    underlying = Underlying(asset, chain)
    book.record_deposit(agent, underlying, qty)
    shares = iassets.mint(book, agent, underlying, qty)
    return DepositReceipt(agent, chain, asset, qty, shares)


def withdraw(
    vaults: Mapping[ChainId, VaultState],
    book: iassets.IAssetBook,
    agent: AgentId,
    chain: ChainId,
    asset: AssetId,
    shares: Decimal,
) -> Decimal:
    """Burn an agent's claims and release the underlying from the vault."""
    vault = _vault(vaults, chain)
    _ = vault.dispatch("withdraw")
    return iassets.burn(book, agent, Underlying(asset, chain), shares)


# ===================================================================================
#   Conversion network
# ===================================================================================


@dataclass(frozen=True)
class ConversionEdge:
    """The edge between the hub asset and one spoke asset.

    :param asset: the spoke asset
    :param depth: depth D in hub units
    :param fee_rate: fee rate phi in [0, 1)
    """

    asset: AssetId
    depth: Decimal
    fee_rate: Decimal = ZERO

    def __post_init__(self) -> None:
        if not ZERO <= self.fee_rate < ONE:
            msg = f"fee rate of {self.asset} must be in [0, 1), got {self.fee_rate}"
            raise ValueError(msg)


@dataclass
class ConversionGraph:
    """The star of conversion edges around the hub asset.

    :param hub: the accounting asset every price is quoted in
    :param hub_chain: chain the market maker and the treasury live on
    :param edges: one edge per spoke asset
    :param ce: last cost efficiency value / cost seen per (src, dst)
    :param demand: hub value converted per spoke asset this epoch
    :param trailing: demand of the last closed epoch
    """

    hub: AssetId
    hub_chain: ChainId
    edges: dict[AssetId, ConversionEdge]
    ce: dict[tuple[AssetId, AssetId], Decimal] = field(default_factory=dict)
    demand: dict[AssetId, Decimal] = field(default_factory=dict)
    trailing: dict[AssetId, Decimal] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.hub in self.edges:
            msg = f"the hub asset {self.hub} cannot be a spoke"
            raise ValueError(msg)

    def route(self, src: AssetId, dst: AssetId) -> list[tuple[AssetId, AssetId]]:
        """Hops from src to dst through the hub, at most two.

        :raise PathUnavailable: if either end is neither the hub nor a spoke
        """
        for asset in (src, dst):
            if asset != self.hub and asset not in self.edges:
                msg = f"{asset} has no conversion edge"
                raise PathUnavailable(msg)
        if src == dst:
            return []
        if self.hub in (src, dst):
            return [(src, dst)]
        return [(src, self.hub), (self.hub, dst)]

    def spoke(self, hop: tuple[AssetId, AssetId]) -> AssetId:
        """The spoke end of a hop."""
        return hop[1] if hop[0] == self.hub else hop[0]

    def set_fee_rate(self, fee_rate: Decimal) -> None:
        """Apply one fee rate to every edge."""
        self.edges = {a: replace(e, fee_rate=fee_rate) for a, e in self.edges.items()}

    def roll_demand(self) -> dict[AssetId, Decimal]:
        """Close the demand window and return the closed epoch's demand."""
        self.trailing, self.demand = self.demand, {}
        return self.trailing


def conversion_cost(edge: ConversionEdge, v: Decimal) -> Decimal:
    """Cost of converting hub value v across one edge.

    :param edge: the edge crossed
    :param v: hub value converted, non-negative
    :return: fee_rate * v + v^2 / (2 * depth)
    :raise ZeroDepth: if the edge has no depth
    """
    if edge.depth <= 0:
        msg = f"edge {edge.asset} has depth {edge.depth}"
        raise ZeroDepth(msg)
    if v < 0:
        msg = f"cannot convert a negative value {v}"
        raise NegativeQuantity(msg)
    return edge.fee_rate * v + v * v / (2 * edge.depth)


def effective_edge(
    graph: ConversionGraph,
    asset: AssetId,
    ledger: BalanceSheet,
    prices: Mapping[AssetId, Decimal],
    nol_owner: OwnerId,
) -> ConversionEdge:
    """The edge of a spoke with network-owned liquidity added to its depth."""
    edge = graph.edges[asset]
    nol = ledger.holdings.get((nol_owner, graph.hub_chain, asset), ZERO)
    return replace(edge, depth=edge.depth + nol * prices[asset])


@dataclass(frozen=True)
class ConversionResult:
    """Outcome of one conversion.

    :param value: hub value of the input
    :param fee: fee part of the cost, paid to the treasury
    :param slippage: slippage part of the cost, kept by the market maker
    :param received: quantity of dst delivered
    :param hops: edges crossed
    """

    src: AssetId
    dst: AssetId
    qty: Decimal
    value: Decimal
    fee: Decimal
    slippage: Decimal
    received: Decimal
    hops: int

    @property
    def cost(self) -> Decimal:
        """Total cost in hub units."""
        return self.fee + self.slippage

    @property
    def ce(self) -> Decimal | None:
        """Cost efficiency value / cost, None when nothing was spent."""
        return self.value / self.cost if self.cost else None


def convert(
    ledger: BalanceSheet,
    graph: ConversionGraph,
    prices: Mapping[AssetId, Decimal],
    account: Account,
    src: AssetId,
    dst: AssetId,
    qty: Decimal,
    nol_owner: OwnerId,
) -> ConversionResult:
    """Convert qty of src held in account into dst through the hub.

    :param ledger: balance sheet, updated in place
    :param graph: conversion star, whose ce and demand are updated
    :param prices: current prices
    :param account: the converting agent's account. Receives dst there.
    :param src: asset given
    :param dst: asset received
    :param qty: quantity of src given
    :param nol_owner: owner of the network-owned liquidity deepening the edges
    :return: the conversion's value, cost split, and received quantity
    :raise ZeroDepth: if an edge has no depth
    :raise CostExceedsValue: if the cost would consume the whole value
    """
    if qty < 0:
        msg = f"cannot convert a negative quantity {qty}"
        raise NegativeQuantity(msg)
    hops = graph.route(src, dst)
    value = qty * prices[src]
    if not hops or qty == 0:
        return ConversionResult(src, dst, qty, value, ZERO, ZERO, qty, 0)

    fee = slippage = ZERO
    for hop in hops:
        edge = effective_edge(graph, graph.spoke(hop), ledger, prices, nol_owner)
        cost = conversion_cost(edge, value)
        fee += edge.fee_rate * value
        slippage += cost - edge.fee_rate * value
    if fee + slippage >= value:
        msg = f"converting {qty} {src} to {dst} costs {fee + slippage} of {value}"
        raise CostExceedsValue(msg)
    received = quantize_qty((value - fee - slippage) / prices[dst])

    dfmm = ledger.open(DFMM, graph.hub_chain)
    treasury = ledger.open(TREASURY, graph.hub_chain)
    _ = ledger.post_entry(account, dfmm, src, qty)
    _ = ledger.post_entry(dfmm, account, dst, received)
    _ = ledger.post_entry(dfmm, treasury, graph.hub, fee)

    result = ConversionResult(src, dst, qty, value, fee, slippage, received, len(hops))
    if result.ce is not None:
        graph.ce[src, dst] = result.ce
    for asset in {src, dst} - {graph.hub}:
        graph.demand[asset] = graph.demand.get(asset, ZERO) + value
    return result


# ===================================================================================
#   Value transfer
# ===================================================================================


@dataclass(frozen=True)
class TransferResult:
    """Outcome of one value transfer.

    :param value: hub value sent
    :param fee: transfer fee paid, NF_VT
    :param security: expected security cost pi_fail * value
    :param delivered: quantity delivered, zero for a failed transfer
    """

    src: Account
    dst: Account
    asset: AssetId
    qty: Decimal
    value: Decimal
    fee: Decimal
    security: Decimal
    delivered: Decimal

    @property
    def cost(self) -> Decimal:
        """C_VT, the fee plus the expected security cost."""
        return self.fee + self.security

    @property
    def ce(self) -> Decimal:
        """Cost efficiency value / C_VT."""
        return self.value / self.cost


def transfer_value(
    ledger: BalanceSheet,
    vaults: Mapping[ChainId, VaultState],
    graph: ConversionGraph,
    prices: Mapping[AssetId, Decimal],
    src: Account,
    dst: Account,
    asset: AssetId,
    qty: Decimal,
    *,
    fee: Decimal,
    base_failure: Decimal,
    quality: Decimal,
    fail: bool = False,
) -> TransferResult:
    """Send qty of asset from src to dst through the vaults of both chains.

    :param ledger: balance sheet, updated in place
    :param vaults: vault per chain
    :param graph: supplies the hub asset and chain the fee is paid in
    :param prices: current prices
    :param src: sending account
    :param dst: receiving account
    :param asset: asset sent
    :param qty: quantity sent, positive
    :param fee: transfer fee, paid from the sender's hub account
    :param base_failure: pi_0, failure probability of an unsecured transfer
    :param quality: stake quality factor of the securing channel
    :param fail: deliver nothing and burn the quantity sent
    :return: the transfer with its cost split
    :raise ZeroTransfer: if qty is zero or the transfer would cost nothing
    :raise PathUnavailable: if either chain lacks a vault or a transfer conductor
    """
    if qty <= 0:
        msg = f"cannot transfer {qty} {asset}"
        raise ZeroTransfer(msg)
    for chain in (src.chain, dst.chain):
        try:
            _ = _vault(vaults, chain).dispatch("transfer")
        except (UnknownChain, UnknownConductor) as e:
            msg = f"no transfer path {src.chain} -> {dst.chain}: {e}"
            raise PathUnavailable(msg) from e
    value = qty * prices[asset]
    security = base_failure * quality * value
    if fee + security == 0:
        msg = f"transfer of {qty} {asset} would cost nothing"
        raise ZeroTransfer(msg)

    payer = Account(src.owner, graph.hub_chain)
    treasury = Account(TREASURY, graph.hub_chain)
    _ = ledger.post_entry(payer, treasury, graph.hub, fee)
    if fail:
        ledger.burn(src, asset, qty, "vt_loss")
        delivered = ZERO
    else:
        _ = ledger.post_entry(src, dst, asset, qty)
        delivered = qty
    return TransferResult(src, dst, asset, qty, value, fee, security, delivered)


# ===================================================================================
#   Cost-efficiency aggregates
# ===================================================================================


def _volume(values: Sequence[Decimal]) -> Decimal:
    if any(v < 0 for v in values):
        msg = f"volumes must be non-negative: {list(values)}"
        raise ValueError(msg)
    volume = sum(values, ZERO)
    if volume == 0:
        msg = "no volume to weight"
        raise NoVolume(msg)
    return volume


def conversion_weights(values: Sequence[Decimal]) -> list[Decimal]:
    """Each volume's share of the total, summing to exactly 1.

    :raise NoVolume: if the volumes sum to zero
    """
    _ = _volume(values)
    return list(proportions(dict(enumerate(values))).values())


def _weighted_ce(records: Sequence[tuple[Decimal, Decimal]]) -> Decimal:
    """Value-weighted mean of (value, ce) records, sum(V * CE) / sum(V).

    The numerator is summed exactly, so the only rounding is the division and
    the mean lies inside [min ce, max ce].
    """
    volume = _volume([v for v, _ in records])
    with localcontext() as ctx:
        ctx.prec = 3 * DECIMAL_PRECISION
        weighted = sum((v * ce for v, ce in records), ZERO)
    return weighted / volume


def aggregate_ce_vt(records: Sequence[tuple[Decimal, Decimal]]) -> Decimal:
    """Aggregate value-transfer cost efficiency, sum(V * CE) / sum(V).

    :param records: (value, ce) per transfer
    :raise NoVolume: if no value moved
    """
    return _weighted_ce(records)


def aggregate_ce_vc(records: Sequence[tuple[Decimal, Decimal]]) -> Decimal:
    """Aggregate conversion cost efficiency, sum(w * CE), w = V / sum(V).

    :param records: (value, ce) per conversion
    :raise NoVolume: if nothing was converted
    """
    return _weighted_ce(records)


# ===================================================================================
#   Network-owned liquidity
# ===================================================================================


@dataclass(frozen=True)
class NoLPortfolio:
    """A system-owned portfolio with no outside claim on it.

    :param owner: ledger owner, "@nol_vc" or "@nol_ke"
    :param chain: chain the portfolio is held on
    :param hub: the hub asset
    """

    owner: OwnerId
    chain: ChainId
    hub: AssetId

    @property
    def account(self) -> Account:
        """The portfolio's ledger account."""
        return Account(self.owner, self.chain)

    def holdings(self, ledger: BalanceSheet) -> dict[AssetId, Decimal]:
        """Quantity per asset."""
        positions = ledger.positions(self.owner)
        return {a: q for (c, a), q in sorted(positions.items()) if c == self.chain}

    def value(self, ledger: BalanceSheet, prices: Mapping[AssetId, Decimal]) -> Decimal:
        """Hub value of the portfolio."""
        return mark_to_market(ledger.view([self.owner]), prices)


def nol_apply_budget(
    ledger: BalanceSheet,
    portfolio: NoLPortfolio,
    budget: Decimal,
    prices: Mapping[AssetId, Decimal],
    demand: Mapping[AssetId, Decimal],
) -> Decimal:
    """Change a portfolio's hub value by exactly budget and rebalance it.

    A positive budget moves hub asset from the treasury into the portfolio; a
    negative one moves hub asset back. The portfolio then swaps with the market
    maker, at current prices, toward holdings proportional to demand. Swaps at
    current prices change composition, never value. Swaps are limited by what
    the market maker and the portfolio hold.

    :param ledger: balance sheet, updated in place
    :param portfolio: the portfolio to adjust
    :param budget: B_K, hub value added (negative to withdraw)
    :param prices: current prices
    :param demand: trailing demand per spoke asset. No positive demand, no
        rebalancing.
    :return: the portfolio's new hub value
    :raise NegativePortfolio: if value + budget < 0
    :raise ReconciliationError: if the value moved by anything but budget
    """
    before = portfolio.value(ledger, prices)
    if before + budget < 0:
        msg = f"{portfolio.owner} holds {before}, cannot absorb budget {budget}"
        raise NegativePortfolio(msg)
    hub = portfolio.hub
    treasury = ledger.open(TREASURY, portfolio.chain)
    account = ledger.open(portfolio.owner, portfolio.chain)
    dfmm = ledger.open(DFMM, portfolio.chain)

    if budget > 0:
        _ = ledger.post_entry(treasury, account, hub, budget)
    elif budget < 0:
        _ = ledger.post_entry(account, treasury, hub, -budget)

    wanted = {a: d for a, d in sorted(demand.items()) if a != hub and d > 0}
    if wanted:
        _rebalance(ledger, portfolio, before + budget, prices, wanted, dfmm)
        logger.debug("%s rebalanced toward %s", portfolio.owner, sorted(wanted))
    after = portfolio.value(ledger, prices)
    if after != before + budget:
        msg = f"{portfolio.owner} moved {after - before} for budget {budget}"
        raise ReconciliationError(msg)
    return after


def _rebalance(
    ledger: BalanceSheet,
    portfolio: NoLPortfolio,
    total: Decimal,
    prices: Mapping[AssetId, Decimal],
    wanted: Mapping[AssetId, Decimal],
    dfmm: Account,
) -> None:
    """Swap at current prices toward apportion(total, wanted)."""
    hub = portfolio.hub
    account = portfolio.account
    targets = apportion(total, wanted)
    held = portfolio.holdings(ledger)
    assets = sorted((set(held) | set(targets)) - {hub})
    goal = {a: quantize_qty(targets.get(a, ZERO) / prices[a]) for a in assets}

    for asset in assets:
        excess = held.get(asset, ZERO) - goal[asset]
        if excess <= 0:
            continue
        afford = quantize_qty(ledger.balance(dfmm, hub) / prices[asset])
        qty = min(excess, afford)
        _ = ledger.post_entry(account, dfmm, asset, qty)
        _ = ledger.post_entry(dfmm, account, hub, qty * prices[asset])

    for asset in assets:
        short = goal[asset] - held.get(asset, ZERO)
        if short <= 0:
            continue
        afford = quantize_qty(ledger.balance(account, hub) / prices[asset])
        qty = min(short, afford, ledger.balance(dfmm, asset))
        _ = ledger.post_entry(account, dfmm, hub, qty * prices[asset])
        _ = ledger.post_entry(dfmm, account, asset, qty)
