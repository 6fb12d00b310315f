"""The epoch/step event loop, snapshots, and runs.

One logical clock of (epoch, step). Time in steps is the global step index, so a
lag of 1.5 is a step and a half. Each step runs, in order:

    scripted actions of the step, in file order
    random activity (transfer, convert, message, obligation)
    messages waiting on a channel outage
    UFC rounds that are due, by controller id

and each epoch closes with the hooks in CLOSE_HOOKS, in that order. Every action
runs inside one atomic block over the ledger, the iAsset book, the fee credits,
and the lease book: it either takes effect whole or is logged as an
"action_failed" record naming the error, and the run goes on.

Every random draw comes from a stream labelled by its consumer ("price/<asset>",
"channel/<id>", "activity"), so a scenario and seed fix the log byte for byte.

A snapshot is one json header line followed by a pickle of the Simulation:

    {"epoch": 3, "log_hash": "...", "schema_version": 1}

:author: Shay Hill
:created: 2025-02-18
"""

from __future__ import annotations

import hashlib
import json
import logging
import pickle
from dataclasses import dataclass, field, replace
from decimal import Decimal
from functools import partial
from typing import TYPE_CHECKING, Any, TypeVar

from intralayer_sim import iassets
from intralayer_sim.brokerage import (
    LeaseBook,
    LeaseTerms,
    accrue_lease_fees,
    close_lease,
    mark_and_liquidate,
    open_lease,
)
from intralayer_sim.clearing import TransactionCluster, UFCInstance, execute_ufc_round
from intralayer_sim.comms import (
    Channel,
    ChannelParams,
    GuarantorStake,
    MessageEvent,
    MessageRequest,
    deliver,
)
from intralayer_sim.config import ActionConfig, BudgetsConfig
from intralayer_sim.core import (
    ONE,
    ZERO,
    BalanceSheet,
    PricePath,
    PriceProcess,
    advance_price,
    mark_to_market,
    quantize_qty,
    spawn_rng,
    uniform,
)
from intralayer_sim.errors import (
    ChannelDown,
    IntraLayerError,
    PathUnavailable,
    SchemaMismatch,
    UnknownAgent,
    UnknownPosition,
)
from intralayer_sim.event_log import EventLog
from intralayer_sim.fiscal import (
    Candidate,
    CreditBook,
    FeeCharge,
    FeeSchedule,
    FiscalParams,
    FiscalState,
    close_epoch,
    collect_fee,
    open_books,
)
from intralayer_sim.globs import (
    ACQUISITION,
    CLEARING,
    DFMM,
    NOL_KE,
    NOL_VC,
    OPERATORS,
    SNAPSHOT_SCHEMA_VERSION,
    TREASURY,
)
from intralayer_sim.liquidity import (
    ConversionEdge,
    ConversionGraph,
    NoLPortfolio,
    VaultState,
    convert,
    deposit,
    new_vault,
    transfer_value,
    withdraw,
)
from intralayer_sim.metrics import CSV_COLUMNS, EpochMetrics, epoch_metrics
from intralayer_sim.topology import EcosystemGraph
from intralayer_sim.type_hints import Account, Underlying

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    import numpy as np

    from intralayer_sim.config import ScenarioConfig
    from intralayer_sim.type_hints import AgentId, AssetId, ChainId

logger = logging.getLogger(__name__)

_T = TypeVar("_T")

CLOSE_HOOKS = ("prices", "comms", "clearing", "brokerage", "iassets", "fiscal", "metrics")

_SYSTEM_OWNERS = (TREASURY, DFMM, NOL_VC, NOL_KE, CLEARING, OPERATORS, ACQUISITION)


@dataclass(frozen=True)
class PendingMessage:
    """A message held back by a channel outage."""

    agent: AgentId
    channel: str
    needed_at: Decimal


@dataclass
class Simulation:
    """All mutable state of one run.

    :param config: the validated scenario
    :param header: data of the log's "scenario" record
    :param ledger: the balance sheet
    :param vaults: vault per chain
    :param graph: the conversion star
    :param channels: channel per id
    :param channel_services: service (DC, VT, PL) per channel id
    :param ufcs: controller per cluster id
    :param leases: the lease book
    :param lease_terms: lease risk terms per leasable asset
    :param iassets: the iAsset book
    :param fiscal: fiscal state
    :param fee_schedule: fee per service and epoch
    :param ecosystem: agents and transactional paths
    :param prices: price state
    :param rngs: random stream per label
    :param log: the event log
    :param active: active agents, genesis agents first, then in acquisition order
    :param candidates: agents the network may acquire
    :param retries: messages waiting on a channel outage
    :param metrics: one row per closed epoch
    :param objective: master objective through the last closed epoch
    :param epoch: last closed epoch, 0 before the first
    """

    config: ScenarioConfig
    header: dict[str, Any]
    ledger: BalanceSheet
    vaults: dict[ChainId, VaultState]
    graph: ConversionGraph
    channels: dict[str, Channel]
    channel_services: dict[str, str]
    ufcs: dict[str, UFCInstance]
    leases: LeaseBook
    lease_terms: dict[AssetId, tuple[Decimal, Decimal]]
    iassets: iassets.IAssetBook
    fiscal: FiscalState
    fee_schedule: FeeSchedule
    ecosystem: EcosystemGraph
    prices: PriceProcess
    rngs: dict[str, np.random.Generator]
    log: EventLog
    active: list[AgentId]
    candidates: list[Candidate]
    retries: list[PendingMessage] = field(default_factory=list)
    metrics: list[EpochMetrics] = field(default_factory=list)
    objective: Decimal = ZERO
    epoch: int = 0

    @property
    def hub(self) -> AssetId:
        """The hub asset."""
        return self.config.hub_asset

    @property
    def hub_chain(self) -> ChainId:
        """Chain of the hub's accounts."""
        return self.config.hub_chain

    def transfer_quality(self, src_chain: ChainId, dst_chain: ChainId) -> Decimal:
        """Quality factor of the VT channel between two chains, 1 if none."""
        for channel_id in sorted(self.channels):
            channel = self.channels[channel_id]
            if self.channel_services[channel_id] != "VT":
                continue
            if (channel.src_chain, channel.dst_chain) == (src_chain, dst_chain):
                return channel.quality
        return ONE


# ===================================================================================
#   Genesis
# ===================================================================================


def _header(config: ScenarioConfig) -> dict[str, Any]:
    dumped = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return {
        "schema_version": config.schema_version,
        "seed": config.seed,
        "horizon": config.horizon,
        "steps_per_epoch": config.steps_per_epoch,
        "hub_asset": config.hub_asset,
        "kappa": config.kappa,
        "path_exponent": config.path_exponent,
        "output_coefficient": config.output_coefficient,
        "alpha": config.alpha,
        "beta": list(config.betas),
        "alpha_psi": config.alpha_psi,
        "alpha_d": config.alpha_d,
        "phase_end": config.phase_end,
        "network": config.network.model_dump(),
        "config_digest": hashlib.sha256(dumped.encode("utf-8")).hexdigest(),
    }


def genesis(config: ScenarioConfig) -> Simulation:
    """Build the state of epoch 0 and open the log.

    :param config: a validated scenario
    :return: a simulation ready for its first epoch
    """
    hub, hub_chain = config.hub_asset, config.hub_chain
    ledger = BalanceSheet()
    vaults = {
        c.id: new_vault(c.id, ledger, c.vault_operations, c.gas_reserve) for c in config.chains
    }
    owners = [a.id for a in config.agents] + [c.id for c in config.candidates]
    for owner in owners:
        for chain in config.chains:
            _ = ledger.open(owner, chain.id)
    for owner in _SYSTEM_OWNERS:
        _ = ledger.open(owner, hub_chain)

    for agent in config.agents:
        for holding in agent.holdings:
            account = Account(agent.id, holding.chain)
            ledger.mint(account, holding.asset, holding.qty, "genesis")
    for asset in config.assets:
        ledger.mint(Account(DFMM, hub_chain), asset.id, asset.dfmm_inventory, "genesis")
        ledger.mint(Account(NOL_VC, hub_chain), asset.id, asset.nol_vc, "genesis")
        ledger.mint(Account(NOL_KE, hub_chain), asset.id, asset.nol_ke, "genesis")
    ledger.mint(Account(TREASURY, hub_chain), hub, config.treasury, "genesis")

    prices = PriceProcess(
        {
            a.id: PricePath(a.initial_price, a.path, a.drift, a.volatility)
            for a in config.assets
        }
    )
    graph = ConversionGraph(
        hub,
        hub_chain,
        {a.id: ConversionEdge(a.id, a.depth) for a in config.assets if a.id != hub},
    )

    channels: dict[str, Channel] = {}
    for c in config.channels:
        guarantor = c.guarantor.agent if c.guarantor else ""
        stake = dict(c.guarantor.stake) if c.guarantor else {}
        params = ChannelParams(
            base_lag=c.base_lag,
            lag_jitter=c.lag_jitter,
            miss_rate=c.miss_rate,
            spur_rate=c.spur_rate,
            stake_scale=c.stake_scale,
            fee=c.fee,
            outages=frozenset(c.outages),
        )
        channel = Channel(
            c.id,
            c.src_chain,
            c.dst_chain,
            params,
            GuarantorStake(guarantor, c.service, stake),
            required_keys=frozenset(c.required_keys),
        )
        _ = channel.mark_stake(prices.current)
        channels[c.id] = channel

    ufcs = {
        c.id: UFCInstance(
            c.id,
            TransactionCluster(
                id=c.id,
                members=c.members,
                execution_logic=c.execution_logic,
                c_dc=c.c_dc,
                c_vc=c.c_vc,
                c_p=c.c_p,
                hub_p=c.hub_p,
                interaction_model=c.interaction_model,
            ),
            c.interval,
            c.channel,
        )
        for c in config.clusters
    }

    caps = {name: getattr(config.budgets, name) for name in BudgetsConfig.model_fields}
    fiscal = FiscalState(
        FiscalParams(
            hub=hub,
            hub_chain=hub_chain,
            caps=caps,
            gamma=config.gamma,
            nol_share=config.nol_share,
            nol_ke_fraction=config.nol_ke_fraction,
            phase_end=config.phase_end,
        ),
        CreditBook(config.credit_ttl, config.phase_end),
        vc=NoLPortfolio(NOL_VC, hub_chain, hub),
        ke=NoLPortfolio(NOL_KE, hub_chain, hub),
    )
    equity = open_books(fiscal, ledger, prices.current)

    rngs = {f"price/{a.id}": spawn_rng(config.seed, f"price/{a.id}") for a in config.assets}
    rngs.update({f"channel/{c}": spawn_rng(config.seed, f"channel/{c}") for c in channels})
    rngs["activity"] = spawn_rng(config.seed, "activity")

    header = _header(config)
    log = EventLog()
    header = log.append(0, 0, "scenario", header).data
    _ = log.append(0, 0, "genesis", {"R": equity, "K": fiscal.nol_value})

    active = [a.id for a in config.agents]
    return Simulation(
        config=config,
        header=header,
        ledger=ledger,
        vaults=vaults,
        graph=graph,
        channels=channels,
        channel_services={c.id: c.service for c in config.channels},
        ufcs=ufcs,
        leases=LeaseBook(),
        lease_terms={t.asset: (t.rho_min, t.rho_maint) for t in config.lease_terms},
        iassets=iassets.IAssetBook(ledger),
        fiscal=fiscal,
        fee_schedule=FeeSchedule(
            {s: getattr(config.fees, s) for s in ("DC", "VT", "VC", "PL", "KE")}
        ),
        ecosystem=EcosystemGraph(active),
        prices=prices,
        rngs=rngs,
        log=log,
        active=active,
        candidates=[Candidate(c.id, c.cost, c.value) for c in config.candidates],
    )


# ===================================================================================
#   Actions
# ===================================================================================


@dataclass
class _Effects:
    """What a successful action logs, charges, and leaves waiting."""

    records: list[tuple[str, dict[str, Any]]] = field(default_factory=list)
    fees: list[FeeCharge] = field(default_factory=list)
    retries: list[PendingMessage] = field(default_factory=list)


def _given(value: _T | None) -> _T:
    if value is None:
        msg = "action is missing a required field"
        raise ValueError(msg)
    return value


def _require_active(sim: Simulation, *agents: AgentId | None) -> None:
    for agent in agents:
        if agent is not None and agent not in sim.active:
            msg = f"{agent} is not an active agent"
            raise UnknownAgent(msg)


def _fee_record(fee: FeeCharge) -> tuple[str, dict[str, Any]]:
    data = {"agent": fee.agent, "service": fee.service, "gross": fee.gross, "credit": fee.credit}
    return "fee", data


def _message_record(event: MessageEvent) -> dict[str, Any]:
    return {
        "src": event.src,
        "dst": event.dst,
        "needed_at": event.needed_at,
        "delivered_at": event.delivered_at,
        "required": event.required,
        "delivered": event.delivered,
        "channel": event.channel,
    }


def _charge(sim: Simulation, agent: AgentId, service: str, amount: Decimal, u: int) -> FeeCharge:
    return collect_fee(
        sim.ledger,
        sim.fiscal.credits,
        agent=agent,
        service=service,  # pyright: ignore[reportArgumentType]
        amount=amount,
        epoch=u,
        hub=sim.hub,
        hub_chain=sim.hub_chain,
    )


def _do_deposit(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del u, now
    agent, chain, asset = _given(a.agent), _given(a.chain), _given(a.asset)
    receipt = deposit(sim.ledger, sim.vaults, sim.iassets, agent, chain, asset, _given(a.qty))
    data = {"agent": agent, "chain": chain, "asset": asset, "qty": receipt.qty}
    return _Effects([("deposit", {**data, "shares": receipt.shares})])


def _do_withdraw(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del u, now
    agent, chain, asset = _given(a.agent), _given(a.chain), _given(a.asset)
    qty = withdraw(sim.vaults, sim.iassets, agent, chain, asset, _given(a.shares))
    data = {"agent": agent, "chain": chain, "asset": asset, "shares": a.shares, "qty": qty}
    return _Effects([("withdraw", data)])


def _do_transfer(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del now
    agent, to = _given(a.agent), _given(a.to)
    _require_active(sim, to)
    src = Account(agent, _given(a.chain))
    dst = Account(to, _given(a.dst_chain))
    fee = sim.fee_schedule.rate("VT", u)
    result = transfer_value(
        sim.ledger,
        sim.vaults,
        sim.graph,
        sim.prices.current,
        src,
        dst,
        _given(a.asset),
        _given(a.qty),
        fee=fee,
        base_failure=sim.config.security_base,
        quality=sim.transfer_quality(src.chain, dst.chain),
        fail=a.fail,
    )
    effects = _Effects()
    effects.records.append(
        (
            "transfer",
            {
                "src": agent,
                "dst": to,
                "src_chain": src.chain,
                "dst_chain": dst.chain,
                "asset": result.asset,
                "qty": result.qty,
                "value": result.value,
                "fee": result.fee,
                "security": result.security,
                "delivered": result.delivered,
                "cost": result.cost,
                "ce": result.ce,
            },
        )
    )
    if agent != to:
        effects.records.append(("path", {"src": agent, "dst": to, "value": result.value}))
    if fee:
        effects.fees.append(FeeCharge(agent, "VT", fee))
    return effects


def _do_convert(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del u, now
    agent, chain = _given(a.agent), _given(a.chain)
    result = convert(
        sim.ledger,
        sim.graph,
        sim.prices.current,
        Account(agent, chain),
        _given(a.asset),
        _given(a.dst_asset),
        _given(a.qty),
        NOL_VC,
    )
    data = {
        "agent": agent,
        "chain": chain,
        "src": result.src,
        "dst": result.dst,
        "qty": result.qty,
        "value": result.value,
        "fee": result.fee,
        "slippage": result.slippage,
        "received": result.received,
        "hops": result.hops,
        "cost": result.cost,
        "ce": result.ce,
    }
    effects = _Effects([("conversion", data)])
    if result.fee:
        effects.fees.append(FeeCharge(agent, "VC", result.fee))
    return effects


def _deliver(sim: Simulation, pending: PendingMessage, u: int, now: Decimal) -> _Effects:
    """Deliver a message now, or leave it waiting if its channel is down."""
    channel = sim.channels[pending.channel]
    request = MessageRequest(
        pending.agent, channel.dst_chain, pending.needed_at, channel.required_keys
    )
    try:
        event = deliver(channel, request, sim.rngs[f"channel/{channel.id}"], u)
    except ChannelDown:
        data = {"agent": pending.agent, "channel": channel.id, "needed_at": pending.needed_at}
        return _Effects([("message_deferred", data)], retries=[pending])
    event = replace(event, delivered_at=event.delivered_at + now - pending.needed_at)
    effects = _Effects([("message", _message_record(event))])
    amount = sim.fee_schedule.rate("DC", u) + channel.params.fee
    if amount:
        effects.fees.append(_charge(sim, pending.agent, "DC", amount, u))
    return effects


def _do_message(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    return _deliver(sim, PendingMessage(_given(a.agent), _given(a.channel), now), u, now)


def _do_obligation(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del u, now
    agent, to, amount = _given(a.agent), _given(a.to), _given(a.amount)
    _require_active(sim, to)
    cluster = _given(a.cluster)
    sim.ufcs[cluster].add_obligation(agent, to, amount)
    data = {"cluster": cluster, "debtor": agent, "creditor": to, "amount": amount}
    return _Effects(
        [("obligation", data), ("path", {"src": agent, "dst": to, "value": amount})]
    )


def _do_open_lease(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del now
    asset = _given(a.asset)
    if asset not in sim.lease_terms:
        msg = f"{asset} has no lease terms"
        raise PathUnavailable(msg)
    rho_min, rho_maint = sim.lease_terms[asset]
    terms = LeaseTerms(rho_min, rho_maint, sim.fee_schedule.rate("KE", u))
    pos = open_lease(
        sim.ledger,
        sim.leases,
        sim.vaults,
        sim.prices.current,
        owner=_given(a.agent),
        collateral=(
            _given(a.collateral_asset),
            _given(a.collateral_chain),
            _given(a.collateral_qty),
        ),
        leased_asset=asset,
        requested_value=_given(a.value),
        deployed_chain=_given(a.dst_chain),
        terms=terms,
        nol_chain=sim.hub_chain,
        epoch=u,
    )
    data = {
        "position": pos.id,
        "owner": pos.owner,
        "collateral_asset": pos.collateral_asset,
        "collateral_qty": pos.collateral_qty,
        "leased_asset": pos.leased_asset,
        "deployed_qty": pos.deployed_qty,
        "leased_value": pos.leased_value,
        "deployed_chain": pos.deployed_chain,
        "rho_min": terms.rho_min,
        "fee_rate": terms.fee_rate,
    }
    return _Effects([("lease_open", data)])


def _do_close_lease(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del u, now
    position = _given(a.position)
    if sim.leases.get(position).owner != a.agent:
        msg = f"{a.agent} does not own {position}"
        raise UnknownPosition(msg)
    settled = close_lease(
        sim.ledger,
        sim.leases,
        position,
        sim.prices.current,
        hub=sim.hub,
        hub_chain=sim.hub_chain,
        nol_chain=sim.hub_chain,
    )
    data = {
        "position": settled.position,
        "reclaimed": settled.reclaimed,
        "paid": settled.paid,
        "seized": settled.seized,
        "loss": settled.loss,
    }
    return _Effects([("lease_close", data)])


def _do_iasset_transfer(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del u, now
    agent, to = _given(a.agent), _given(a.to)
    _require_active(sim, to)
    underlying = Underlying(_given(a.asset), _given(a.chain))
    shares = _given(a.shares)
    iassets.transfer(sim.iassets, agent, to, underlying, shares)
    data = {"src": agent, "dst": to, "asset": underlying.asset, "chain": underlying.chain}
    return _Effects([("iasset_transfer", {**data, "shares": shares})])


def _do_slash(sim: Simulation, a: ActionConfig, u: int, now: Decimal) -> _Effects:
    del u, now
    underlying = Underlying(_given(a.asset), _given(a.chain))
    fraction = _given(a.fraction)
    lost = iassets.rebase_on_slash(sim.iassets, underlying, fraction)
    data = {"asset": underlying.asset, "chain": underlying.chain, "fraction": fraction}
    return _Effects([("slash", {**data, "lost": lost})])


_HANDLERS: dict[str, Callable[[Simulation, ActionConfig, int, Decimal], _Effects]] = {
    "deposit": _do_deposit,
    "withdraw": _do_withdraw,
    "transfer": _do_transfer,
    "convert": _do_convert,
    "message": _do_message,
    "obligation": _do_obligation,
    "open_lease": _do_open_lease,
    "close_lease": _do_close_lease,
    "iasset_transfer": _do_iasset_transfer,
    "slash": _do_slash,
}


def _commit(
    sim: Simulation,
    u: int,
    step: int,
    summary: dict[str, Any],
    run: Callable[[], _Effects],
) -> bool:
    """Run one action atomically and log it, or log why it failed.

    :return: whether the action took effect
    """
    try:
        with (
            sim.ledger.atomic(),
            sim.iassets.atomic(),
            sim.fiscal.credits.atomic(),
            sim.leases.atomic(),
        ):
            effects = run()
    except (IntraLayerError, ValueError) as e:
        failed = {**summary, "error": type(e).__name__, "message": str(e)}
        _ = sim.log.append(u, step, "action_failed", failed)
        logger.debug("epoch %d step %d: %s failed: %s", u, step, summary["kind"], e)
        return False
    _ = sim.log.append(u, step, "action", summary)
    for kind, data in effects.records:
        record = sim.log.append(u, step, kind, data)
        if kind == "path":
            sim.ecosystem.add_path(data["src"], data["dst"], Decimal(record.data["value"]))
    for fee in effects.fees:
        kind, data = _fee_record(fee)
        _ = sim.log.append(u, step, kind, data)
    sim.fiscal.fees.extend(effects.fees)
    sim.retries.extend(effects.retries)
    return True


def execute_action(
    sim: Simulation, action: ActionConfig, step: int, now: Decimal, source: str = "script"
) -> bool:
    """Run one scripted or random action in the open epoch.

    :return: whether the action took effect
    """
    u = sim.epoch + 1
    summary = {
        "source": source,
        **action.model_dump(exclude_none=True, exclude={"epoch", "step", "fail"}),
    }
    if action.fail:
        summary["fail"] = True

    def run() -> _Effects:
        _require_active(sim, action.agent)
        return _HANDLERS[action.kind](sim, action, u, now)

    return _commit(sim, u, step, summary, run)


# ===================================================================================
#   Random activity
# ===================================================================================


def _choice(rng: np.random.Generator, options: Sequence[_T]) -> _T:
    return options[int(rng.integers(len(options)))]


def _holdings(sim: Simulation, agent: AgentId) -> list[tuple[tuple[ChainId, AssetId], Decimal]]:
    return sorted((k, q) for k, q in sim.ledger.positions(agent).items() if q > 0)


def _random_transfer(sim: Simulation, rng: np.random.Generator) -> ActionConfig | None:
    if len(sim.active) < 2:
        return None
    agent = _choice(rng, sim.active)
    holdings = _holdings(sim, agent)
    if not holdings:
        return None
    (chain, asset), held = _choice(rng, holdings)
    to = _choice(rng, [a for a in sim.active if a != agent])
    dst_chain = _choice(rng, [c.id for c in sim.config.chains])
    qty = quantize_qty(held * sim.config.activity.max_fraction * uniform(rng))
    if not qty:
        return None
    return ActionConfig(
        epoch=sim.epoch + 1,
        kind="transfer",
        agent=agent,
        to=to,
        chain=chain,
        dst_chain=dst_chain,
        asset=asset,
        qty=qty,
    )


def _random_convert(sim: Simulation, rng: np.random.Generator) -> ActionConfig | None:
    if not sim.active:
        return None
    agent = _choice(rng, sim.active)
    holdings = _holdings(sim, agent)
    if not holdings:
        return None
    (chain, asset), held = _choice(rng, holdings)
    targets = [a.id for a in sim.config.assets if a.id != asset]
    if not targets:
        return None
    dst_asset = _choice(rng, targets)
    qty = quantize_qty(held * sim.config.activity.max_fraction * uniform(rng))
    if not qty:
        return None
    return ActionConfig(
        epoch=sim.epoch + 1,
        kind="convert",
        agent=agent,
        chain=chain,
        asset=asset,
        dst_asset=dst_asset,
        qty=qty,
    )


def _random_message(sim: Simulation, rng: np.random.Generator) -> ActionConfig | None:
    if not sim.active or not sim.channels:
        return None
    agent = _choice(rng, sim.active)
    channel = _choice(rng, sorted(sim.channels))
    return ActionConfig(epoch=sim.epoch + 1, kind="message", agent=agent, channel=channel)


def _random_obligation(sim: Simulation, rng: np.random.Generator) -> ActionConfig | None:
    clusters = [
        u
        for _, u in sorted(sim.ufcs.items())
        if sum(m in sim.active for m in u.cluster.members) >= 2
    ]
    if not clusters:
        return None
    ufc = _choice(rng, clusters)
    members = [m for m in ufc.cluster.members if m in sim.active]
    debtor = _choice(rng, members)
    creditor = _choice(rng, [m for m in members if m != debtor])
    cash = sim.ledger.balance(Account(debtor, sim.hub_chain), sim.hub)
    amount = quantize_qty(cash * sim.config.activity.max_fraction * uniform(rng))
    if not amount:
        return None
    return ActionConfig(
        epoch=sim.epoch + 1,
        kind="obligation",
        cluster=ufc.id,
        agent=debtor,
        to=creditor,
        amount=amount,
    )


_RANDOM_KINDS: tuple[
    tuple[str, Callable[[Simulation, np.random.Generator], ActionConfig | None]], ...
] = (
    ("transfer", _random_transfer),
    ("convert", _random_convert),
    ("message", _random_message),
    ("obligation", _random_obligation),
)


def random_actions(sim: Simulation) -> list[ActionConfig]:
    """Draw this step's random actions from the "activity" stream."""
    rng = sim.rngs["activity"]
    actions: list[ActionConfig] = []
    for kind, pick in _RANDOM_KINDS:
        chance: Decimal = getattr(sim.config.activity, kind)
        if not chance or uniform(rng) >= chance:
            continue
        if (action := pick(sim, rng)) is not None:
            actions.append(action)
    return actions


# ===================================================================================
#   Steps
# ===================================================================================


def _retry_messages(sim: Simulation, u: int, step: int, now: Decimal) -> None:
    waiting, sim.retries = sim.retries, []
    for pending in waiting:
        summary = {"source": "retry", "kind": "message", "agent": pending.agent}
        summary["channel"] = pending.channel
        _ = _commit(sim, u, step, summary, partial(_deliver, sim, pending, u, now))


def _run_round(sim: Simulation, ufc: UFCInstance, u: int, step: int, now: Decimal) -> None:
    """Run one due UFC round and log it. Fees stick only if the round settles."""
    charged: list[FeeCharge] = []
    rate = sim.fee_schedule.rate("PL", u)

    def charge(member: AgentId) -> None:
        if rate:
            charged.append(_charge(sim, member, "PL", rate, u))

    outcome = execute_ufc_round(
        ufc,
        sim.ledger,
        sim.channels[ufc.channel],
        sim.rngs[f"channel/{ufc.channel}"],
        hub=sim.hub,
        hub_chain=sim.hub_chain,
        epoch=u,
        now=now,
        credits=sim.fiscal.credits,
        charge_fee=charge,
    )
    data: dict[str, Any] = {
        "ufc": ufc.id,
        "status": outcome.status,
        "savings": outcome.savings,
        "reason": outcome.reason,
        "flow": list(outcome.flow),
    }
    if outcome.plan is not None:
        data["nets"] = outcome.plan.nets
        data["settled_value"] = outcome.plan.settled_value
    _ = sim.log.append(u, step, "ufc_round", data)
    for event in outcome.messages:
        _ = sim.log.append(u, step, "message", _message_record(event))
    if outcome.status != "settled":
        return
    for fee in charged:
        kind, fee_data = _fee_record(fee)
        _ = sim.log.append(u, step, kind, fee_data)
    sim.fiscal.fees.extend(charged)


def run_step(sim: Simulation, step: int) -> None:
    """Run one step of the open epoch."""
    u = sim.epoch + 1
    global_step = (u - 1) * sim.config.steps_per_epoch + step
    now = Decimal(global_step)
    for action in sim.config.actions:
        if (action.epoch, action.step) == (u, step):
            _ = execute_action(sim, action, step, now)
    for action in random_actions(sim):
        _ = execute_action(sim, action, step, now, source="random")
    _retry_messages(sim, u, step, now)
    for ufc_id in sorted(sim.ufcs):
        if sim.ufcs[ufc_id].due(global_step):
            _run_round(sim, sim.ufcs[ufc_id], u, step, now)


# ===================================================================================
#   Epoch close
# ===================================================================================


def _close_prices(sim: Simulation, u: int, step: int) -> None:
    for asset in sorted(sim.prices.paths):
        if asset != sim.hub:
            _ = advance_price(sim.prices, asset, u, sim.rngs[f"price/{asset}"])
    _ = sim.log.append(u, step, "prices", {"prices": sim.prices.prices()})


def _close_comms(sim: Simulation, u: int, step: int) -> None:
    for channel_id in sorted(sim.channels):
        channel = sim.channels[channel_id]
        value = channel.mark_stake(sim.prices.current)
        data = {"channel": channel_id, "stake_value": value, "quality": channel.quality}
        _ = sim.log.append(u, step, "stake", data)


def _close_clearing(sim: Simulation, u: int, step: int) -> None:
    summary = {
        ufc_id: {
            "pending": len(ufc.pending),
            "deferred": ufc.deferred,
            "settled": len(ufc.settlement_log),
        }
        for ufc_id, ufc in sorted(sim.ufcs.items())
    }
    _ = sim.log.append(u, step, "clearing_summary", {"ufcs": summary})


def _close_brokerage(sim: Simulation, u: int, step: int) -> None:
    prices = sim.prices.current
    for pos in sim.leases.open_positions():
        result = mark_and_liquidate(
            sim.ledger, sim.leases, pos.id, prices, nol_chain=sim.hub_chain
        )
        data: dict[str, Any] = {
            "position": result.position,
            "action": result.action,
            "rho": result.rho,
        }
        if result.settlement is not None:
            data["seized"] = result.settlement.seized
            data["loss"] = result.settlement.loss
        _ = sim.log.append(u, step, "lease_mark", data)
    for lease_fee in accrue_lease_fees(
        sim.ledger, sim.leases, hub=sim.hub, hub_chain=sim.hub_chain
    ):
        data = {"position": lease_fee.position, "due": lease_fee.due, "paid": lease_fee.paid}
        _ = sim.log.append(u, step, "lease_fee", data)
        if lease_fee.paid:
            fee = FeeCharge(lease_fee.owner, "KE", lease_fee.paid)
            kind, fee_data = _fee_record(fee)
            _ = sim.log.append(u, step, kind, fee_data)
            sim.fiscal.fees.append(fee)


def _close_iassets(sim: Simulation, u: int, step: int) -> None:
    accruals = iassets.accrue_rewards(sim.iassets, u, sim.config.reward_rates)
    total = sum(accruals.values(), ZERO)
    _ = sim.log.append(u, step, "rewards", {"holders": len(accruals), "total": total})
    gaps = iassets.backing_gaps(sim.iassets)
    if gaps:
        logger.warning("epoch %d: iAsset backing is off for %s", u, sorted(gaps))
        data = {f"{k.asset}@{k.chain}": v for k, v in gaps.items()}
        _ = sim.log.append(u, step, "backing_gap", data)


def agent_capital(sim: Simulation, agent: AgentId) -> Decimal:
    """Hub value of an agent's holdings and iAsset claims at current prices."""
    prices = sim.prices.current
    held = mark_to_market(sim.ledger.view([agent]), prices)
    claims = sum(
        (qty * prices[u.asset] for u, qty in sim.iassets.holdings_of(agent).items()), ZERO
    )
    return held + claims


def _close_fiscal(sim: Simulation, u: int, step: int) -> None:
    demand = sim.graph.roll_demand()
    open_candidates = [c for c in sim.candidates if c.id not in sim.active]
    report = close_epoch(
        sim.fiscal,
        sim.ledger,
        sim.iassets,
        epoch=u,
        prices=sim.prices.current,
        stakes=[c.stake for _, c in sorted(sim.channels.items())],
        receivables=sim.leases.receivable_total,
        demand=demand,
        candidates=open_candidates,
    )
    _ = sim.log.append(u, step, "fiscal_close", report.as_record())
    if (breach := report.floor_error) is not None:
        record = {"R": report.equity, "gamma": report.gamma, "error": type(breach).__name__}
        _ = sim.log.append(u, step, "breach", record)
    costs = {c.id: c.cost for c in sim.candidates}
    for agent in report.acquired:
        sim.active.append(agent)
        sim.ecosystem.add_agent(agent)
        _ = sim.log.append(u, step, "agent_acquired", {"agent": agent, "cost": costs[agent]})
    for agent in sim.active:
        data = {"agent": agent, "capital": agent_capital(sim, agent)}
        _ = sim.log.append(u, step, "agent_capital", data)


def _close_metrics(sim: Simulation, u: int, step: int) -> None:
    row, _ = epoch_metrics(u, sim.log.by_epoch(u), sim.header, sim.objective)
    sim.objective = row.objective
    sim.metrics.append(row)
    _ = sim.log.append(u, step, "metrics", dict(zip(CSV_COLUMNS, row.as_row(), strict=True)))


_CLOSE: dict[str, Callable[[Simulation, int, int], None]] = {
    "prices": _close_prices,
    "comms": _close_comms,
    "clearing": _close_clearing,
    "brokerage": _close_brokerage,
    "iassets": _close_iassets,
    "fiscal": _close_fiscal,
    "metrics": _close_metrics,
}


def close(sim: Simulation) -> EpochMetrics:
    """Apply the close hooks to the open epoch and return its metrics row."""
    u = sim.epoch + 1
    step = sim.config.steps_per_epoch
    for hook in CLOSE_HOOKS:
        _ = sim.log.append(u, step, "hook", {"hook": hook})
        _CLOSE[hook](sim, u, step)
    sim.epoch = u
    row = sim.metrics[-1]
    logger.debug("epoch %d closed: R=%s NF=%s B=%s", u, row.equity, row.nf, row.b)
    return row


def advance_epoch(sim: Simulation) -> EpochMetrics:
    """Run every step of the next epoch and close it.

    :raise ValueError: if the horizon is already reached
    """
    if sim.epoch >= sim.config.horizon:
        msg = f"the run already reached its horizon {sim.config.horizon}"
        raise ValueError(msg)
    u = sim.epoch + 1
    sim.graph.set_fee_rate(sim.fee_schedule.rate("VC", u))
    _ = sim.log.append(u, 0, "epoch_open", {"n_agents": len(sim.active)})
    for step in range(sim.config.steps_per_epoch):
        run_step(sim, step)
    return close(sim)


def run_until(sim: Simulation, epoch: int) -> Simulation:
    """Advance the simulation through epoch (capped at the horizon)."""
    while sim.epoch < min(epoch, sim.config.horizon):
        _ = advance_epoch(sim)
    return sim


# ===================================================================================
#   Snapshots and runs
# ===================================================================================


def state_digest(sim: Simulation) -> str:
    """SHA-256 of the books, prices, equity, and log of a simulation."""
    payload = {
        "epoch": sim.epoch,
        "ledger": sim.ledger.as_dict(),
        "iassets": sim.iassets.as_dict(),
        "leases": sim.leases.as_dict(),
        "credits": sim.fiscal.credits.as_dict(),
        "prices": {a: str(p) for a, p in sorted(sim.prices.current.items())},
        "equity": str(sim.fiscal.equity),
        "active": sim.active,
        "log": sim.log.digest(),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def snapshot(sim: Simulation) -> bytes:
    """Serialize a simulation between epochs."""
    header = {
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "epoch": sim.epoch,
        "log_hash": sim.log.digest(),
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    return head + b"\n" + pickle.dumps(sim, protocol=pickle.HIGHEST_PROTOCOL)


def restore(blob: bytes) -> Simulation:
    """Rebuild a simulation from snapshot.

    :raise SchemaMismatch: if the blob is not a snapshot of this schema version
    """
    head, _, body = blob.partition(b"\n")
    try:
        header = json.loads(head)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        msg = "not a snapshot: the header line is not json"
        raise SchemaMismatch(msg) from e
    version = header.get("schema_version") if isinstance(header, dict) else None
    if version != SNAPSHOT_SCHEMA_VERSION:
        msg = f"snapshot schema {version}, expected {SNAPSHOT_SCHEMA_VERSION}"
        raise SchemaMismatch(msg)
    sim: Simulation = pickle.loads(body)  # noqa: S301
    if sim.log.digest() != header["log_hash"]:
        msg = "snapshot body does not match its header"
        raise SchemaMismatch(msg)
    return sim


@dataclass(frozen=True)
class RunResult:
    """Everything a finished run produces."""

    log: EventLog
    metrics: list[EpochMetrics]
    snapshot: bytes
    digest: str

    @property
    def log_hash(self) -> str:
        """SHA-256 of the event log as written."""
        return self.log.digest()


def run(config: ScenarioConfig) -> RunResult:
    """Run a scenario through its horizon."""
    logger.info("run: seed %d, %d epochs", config.seed, config.horizon)
    sim = run_until(genesis(config), config.horizon)
    result = RunResult(sim.log, list(sim.metrics), snapshot(sim), state_digest(sim))
    logger.info("run finished: %d records, log hash %s", len(sim.log), result.log_hash)
    return result
