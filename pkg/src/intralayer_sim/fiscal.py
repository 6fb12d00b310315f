"""Fees, fee credits, budgets, and the fiscal close of an epoch.

Every service fee is quoted and paid in the hub asset and lands in the treasury.
At the close of an epoch the treasury spends an eleven-component budget:

    S_DC S_VT S_PL          guarantor incentives, by stake
    Omega_DC Omega_VT ...   operator rewards
    L                       staking rewards to iAsset holders (bootstrap only)
    L_prime                 fee credits redeemed this epoch
    AA                      agent acquisition
    VC_K KE_K               contributions to network-owned liquidity

System equity is R = MTM(treasury) + K, where K is the hub value of both
network-owned portfolios plus the receivables of open leases. The treasury only
ever receives fees and pays budget items, so each close satisfies

    R_next = R + NF - B + (K_next - K)

exactly.

:author: Shay Hill
:created: 2025-02-14
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import TYPE_CHECKING, Literal, NamedTuple

from intralayer_sim.apportion import apportion, proportions
from intralayer_sim.core import ZERO, mark_to_market, scheduled
from intralayer_sim.errors import (
    Expired,
    IssuanceClosed,
    ReconciliationError,
    ResourceFloorBreached,
)
from intralayer_sim.globs import ACQUISITION, OPERATORS, TREASURY
from intralayer_sim.liquidity import nol_apply_budget
from intralayer_sim.type_hints import Account

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping, Sequence

    from intralayer_sim.comms import GuarantorStake
    from intralayer_sim.core import BalanceSheet
    from intralayer_sim.iassets import IAssetBook
    from intralayer_sim.liquidity import NoLPortfolio
    from intralayer_sim.type_hints import AgentId, AssetId, ChainId, Service

logger = logging.getLogger(__name__)

BUDGET_COMPONENTS = (
    "S_DC",
    "S_VT",
    "S_PL",
    "Omega_DC",
    "Omega_VT",
    "Omega_PL",
    "L",
    "L_prime",
    "AA",
    "VC_K",
    "KE_K",
)

# components spent up to a configured per-epoch cap
CAPPED_COMPONENTS = ("S_DC", "S_VT", "S_PL", "Omega_DC", "Omega_VT", "Omega_PL", "L", "AA")

REVENUE_STREAMS = ("NF_DC", "NF_VT", "NF_VC", "NF_PL", "NF_KE")

# services whose fees fee credits may offset
CREDIT_SERVICES = ("DC", "PL")

Phase = Literal["bootstrap", "matured"]
Constraint = Literal["eq", "le"]

# DC incentives spend their whole budget; the others may fall short of it.
INCENTIVE_CONSTRAINTS: dict[str, Constraint] = {
    "S_DC": "eq",
    "S_VT": "le",
    "S_PL": "le",
    "L": "le",
}


class IncentiveBound(NamedTuple):
    """Incentives paid under one budget component.

    :param constraint: "eq" if paid must equal budget, "le" if it may fall short
    :param budget: the budget committed to the component. Zero when nobody was
        eligible to receive it.
    :param paid: incentives actually paid
    """

    constraint: Constraint
    budget: Decimal
    paid: Decimal

    @property
    def holds(self) -> bool:
        """Whether paid meets the constraint."""
        if self.constraint == "eq":
            return self.paid == self.budget
        return self.paid <= self.budget


def _bound(component: str, budget: Decimal, paid: Decimal) -> IncentiveBound:
    bound = IncentiveBound(INCENTIVE_CONSTRAINTS[component], budget, paid)
    if not bound.holds:
        msg = f"{component} paid {paid} against budget {budget} ({bound.constraint})"
        raise ReconciliationError(msg)
    return bound


def _check_components(values: Mapping[str, Decimal], names: Sequence[str]) -> None:
    if set(values) != set(names):
        msg = f"expected components {list(names)}, got {sorted(values)}"
        raise ValueError(msg)
    negative = [k for k, v in values.items() if v < 0]
    if negative:
        msg = f"components must be non-negative: {negative}"
        raise ValueError(msg)


@dataclass(frozen=True)
class BudgetVector:
    """One epoch's spend per budget component."""

    components: dict[str, Decimal]

    def __post_init__(self) -> None:
        _check_components(self.components, BUDGET_COMPONENTS)

    @classmethod
    def zero(cls) -> BudgetVector:
        """A budget that spends nothing."""
        return cls({k: ZERO for k in BUDGET_COMPONENTS})

    @property
    def total(self) -> Decimal:
        """B, the sum of the components."""
        return sum((self.components[k] for k in BUDGET_COMPONENTS), ZERO)


@dataclass(frozen=True)
class FeeCharge:
    """One itemized fee.

    :param agent: payer
    :param service: DC, VT, VC, PL, or KE
    :param gross: the full fee, counted as revenue
    :param credit: part offset by fee credits
    """

    agent: AgentId
    service: Service
    gross: Decimal
    credit: Decimal = ZERO

    @property
    def cash(self) -> Decimal:
        """Part paid in hub asset."""
        return self.gross - self.credit


@dataclass(frozen=True)
class RevenueVector:
    """One epoch's fee revenue per service."""

    streams: dict[str, Decimal]

    def __post_init__(self) -> None:
        _check_components(self.streams, REVENUE_STREAMS)

    @classmethod
    def from_fees(cls, fees: Sequence[FeeCharge]) -> RevenueVector:
        """Sum itemized fees into their streams."""
        streams = {k: ZERO for k in REVENUE_STREAMS}
        for fee in fees:
            streams["NF_" + fee.service] += fee.gross
        return cls(streams)

    @property
    def total(self) -> Decimal:
        """NF, the sum of the streams."""
        return sum((self.streams[k] for k in REVENUE_STREAMS), ZERO)


@dataclass(frozen=True)
class FeeSchedule:
    """Per-epoch fee per service.

    DC, VT, and PL are flat fees per message, transfer, and cluster member per
    round. VC is the fee rate of every conversion edge; KE the per-epoch rate on
    the value of leases opened in that epoch.
    """

    rates: dict[str, tuple[Decimal, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for service, values in self.rates.items():
            if any(v < 0 for v in values):
                msg = f"fees for {service} must be non-negative"
                raise ValueError(msg)

    def rate(self, service: Service, epoch: int) -> Decimal:
        """Fee of service in epoch. Services without a schedule are free."""
        values = self.rates.get(service)
        return scheduled(values, epoch) if values else ZERO


@dataclass(frozen=True)
class IncentivePlan:
    """Distributed incentives of one epoch.

    :param zeta: (staking rewards paid, fee credits issued)
    :param weights: W, the share of staking rewards per asset pool. Sums to 1
        when any reward was allocated.
    """

    zeta: tuple[Decimal, Decimal]
    weights: dict[AssetId, Decimal]

    def __post_init__(self) -> None:
        if self.weights and sum(self.weights.values(), ZERO) != 1:
            msg = f"incentive weights must sum to 1: {self.weights}"
            raise ValueError(msg)


# ===================================================================================
#   Fee credits
# ===================================================================================


@dataclass
class CreditGrant:
    """Credits issued to one agent at the close of one epoch.

    :param expires_after: last epoch the credits can be drawn in
    """

    agent: AgentId
    amount: Decimal
    issued_epoch: int
    expires_after: int

    def draw(self, amount: Decimal, epoch: int) -> Decimal:
        """Use up to amount of the grant and return what was used.

        :raise Expired: if epoch is after expires_after
        """
        if epoch > self.expires_after:
            msg = f"credits of {self.agent} from epoch {self.issued_epoch} expired"
            raise Expired(msg)
        used = min(amount, self.amount)
        self.amount -= used
        return used


@dataclass
class CreditBook:
    """Non-transferable, expiring fee credits.

    :param ttl: epochs a grant stays usable after the epoch it was issued in
    :param phase_end: e', the last epoch credits may be issued in
    :param grants: live grants in issuance order
    :param redeemed: credits used per epoch
    :param issued: credits issued per epoch
    """

    ttl: int
    phase_end: int
    grants: list[CreditGrant] = field(default_factory=list)
    redeemed: dict[int, Decimal] = field(default_factory=dict)
    issued: dict[int, Decimal] = field(default_factory=dict)

    def balance(self, agent: AgentId, epoch: int) -> Decimal:
        """Credits agent can draw in epoch."""
        return sum(
            (g.amount for g in self.grants if g.agent == agent and epoch <= g.expires_after),
            ZERO,
        )

    def issue(self, agent: AgentId, amount: Decimal, epoch: int) -> None:
        """Grant credits usable in epochs epoch + 1 through epoch + ttl.

        :raise IssuanceClosed: after the bootstrapping phase
        """
        if epoch > self.phase_end:
            msg = f"no fee credits after epoch {self.phase_end}, requested in {epoch}"
            raise IssuanceClosed(msg)
        if amount < 0:
            msg = f"cannot issue negative credits {amount}"
            raise ValueError(msg)
        if amount == 0:
            return
        self.grants.append(CreditGrant(agent, amount, epoch, epoch + self.ttl))
        self.issued[epoch] = self.issued.get(epoch, ZERO) + amount

    def apply(self, agent: AgentId, fee: Decimal, epoch: int) -> Decimal:
        """Offset a fee with the agent's oldest live credits first.

        :return: the part of fee covered by credits
        """
        covered = ZERO
        for grant in self.grants:
            if covered == fee:
                break
            if grant.agent != agent or epoch > grant.expires_after:
                continue
            covered += grant.draw(fee - covered, epoch)
        if covered:
            self.redeemed[epoch] = self.redeemed.get(epoch, ZERO) + covered
        return covered

    def expire(self, epoch: int) -> Decimal:
        """Drop grants that cannot be drawn after epoch and return what they held."""
        dropped = [g for g in self.grants if g.expires_after <= epoch or not g.amount]
        self.grants = [g for g in self.grants if g.expires_after > epoch and g.amount]
        return sum((g.amount for g in dropped), ZERO)

    @contextmanager
    def atomic(self) -> Iterator[CreditBook]:
        """Restore the book if the block raises."""
        saved = ([replace(g) for g in self.grants], dict(self.redeemed), dict(self.issued))
        try:
            yield self
        except BaseException:
            self.grants, self.redeemed, self.issued = saved
            raise

    def as_dict(self) -> dict[str, object]:
        """Return a canonical, json-ready dump for digests."""
        return {
            "grants": [
                [g.agent, str(g.amount), g.issued_epoch, g.expires_after]
                for g in self.grants
            ]
        }


def collect_fee(
    ledger: BalanceSheet,
    credits: CreditBook,
    *,
    agent: AgentId,
    service: Service,
    amount: Decimal,
    epoch: int,
    hub: AssetId,
    hub_chain: ChainId,
) -> FeeCharge:
    """Charge a fee, offsetting DC and PL fees with credits before cash.

    :raise InsufficientBalance: if the agent's hub account cannot pay the cash
        part. Credits drawn for the fee are restored.
    """
    if amount < 0:
        msg = f"fees must be non-negative, got {amount}"
        raise ValueError(msg)
    with credits.atomic():
        credit = credits.apply(agent, amount, epoch) if service in CREDIT_SERVICES else ZERO
        payer = ledger.open(agent, hub_chain)
        treasury = ledger.open(TREASURY, hub_chain)
        _ = ledger.post_entry(payer, treasury, hub, amount - credit)
    return FeeCharge(agent, service, amount, credit)


def issue_fee_credits(
    credits: CreditBook, budget: Decimal, usage: Mapping[AgentId, Decimal], epoch: int
) -> dict[AgentId, Decimal]:
    """Issue a credit budget in proportion to each agent's DC and PL fees.

    :param credits: the credit book
    :param budget: credits to issue this epoch
    :param usage: fees per agent on credit-eligible services
    :param epoch: closing epoch
    :return: credits issued per agent
    :raise IssuanceClosed: after the bootstrapping phase
    """
    if epoch > credits.phase_end:
        msg = f"no fee credits after epoch {credits.phase_end}, requested in {epoch}"
        raise IssuanceClosed(msg)
    grants = allocate_incentives(budget, usage)
    for agent, amount in grants.items():
        credits.issue(agent, amount, epoch)
    return grants


# ===================================================================================
#   Allocation
# ===================================================================================


def allocate_incentives(budget: Decimal, demand: Mapping[str, Decimal]) -> dict[str, Decimal]:
    """Split budget in proportion to demand.

    :return: one share per key, summing to budget exactly when any demand is
        positive, otherwise all zero

    >>> shares = allocate_incentives(Decimal(100), {"a": Decimal(30), "b": Decimal(70)})
    >>> shares == {"a": 30, "b": 70}
    True
    """
    if budget < 0:
        msg = f"budget must be non-negative, got {budget}"
        raise ValueError(msg)
    return apportion(budget, demand)


class Candidate(NamedTuple):
    """An agent the network could pay to onboard.

    :param id: agent id
    :param cost: acquisition cost Delta I_AA, positive
    :param value: estimated network value added Delta V
    """

    id: AgentId
    cost: Decimal
    value: Decimal


def acquire_agents(budget: Decimal, candidates: Sequence[Candidate]) -> list[Candidate]:
    """Pick candidates greedily by value per unit cost.

    A candidate is skipped if it would take total cost past budget or total
    value below total cost.

    >>> picks = acquire_agents(
    ...     Decimal(10),
    ...     [Candidate("a", Decimal(4), Decimal(8)), Candidate("b", Decimal(7), Decimal(7))],
    ... )
    >>> [c.id for c in picks]
    ['a']
    """
    if any(c.cost <= 0 for c in candidates):
        msg = "candidate costs must be positive"
        raise ValueError(msg)
    ranked = sorted(candidates, key=lambda c: (-(c.value / c.cost), c.id))
    chosen: list[Candidate] = []
    spent = gained = ZERO
    for candidate in ranked:
        if spent + candidate.cost > budget:
            continue
        if gained + candidate.value < spent + candidate.cost:
            continue
        chosen.append(candidate)
        spent += candidate.cost
        gained += candidate.value
    return chosen


def guarantor_incentives(
    budget: Decimal,
    service: str,
    stakes: Sequence[GuarantorStake],
    prices: Mapping[AssetId, Decimal],
) -> tuple[dict[AssetId, Decimal], dict[AgentId, Decimal]]:
    """Split a guarantor budget across staked assets, then across guarantors.

    :return: (allocation per staked asset, payout per guarantor). Both sum to
        budget when any stake backs the service, otherwise they are empty.
    """
    by_asset: dict[AssetId, dict[AgentId, Decimal]] = {}
    for stake in stakes:
        if stake.service != service:
            continue
        for asset, qty in sorted(stake.quantities.items()):
            guarantors = by_asset.setdefault(asset, {})
            guarantors[stake.guarantor] = guarantors.get(stake.guarantor, ZERO) + qty * prices[asset]
    demand = {a: sum(g.values(), ZERO) for a, g in sorted(by_asset.items())}
    if not any(demand.values()):
        return {}, {}
    per_asset = allocate_incentives(budget, demand)
    payouts: dict[AgentId, Decimal] = {}
    for asset, amount in per_asset.items():
        for guarantor, share in apportion(amount, by_asset[asset]).items():
            payouts[guarantor] = payouts.get(guarantor, ZERO) + share
    return per_asset, payouts


def staking_rewards(
    budget: Decimal,
    book: IAssetBook,
    demand: Mapping[AssetId, Decimal],
    prices: Mapping[AssetId, Decimal],
) -> tuple[dict[AssetId, Decimal], dict[AgentId, Decimal]]:
    """Split staking rewards across asset pools by W, then across holders.

    W is proportional to trailing conversion demand over the assets that have
    iAsset holders; with no demand the pools share equally.

    :return: (W, payout per holder). Empty if nobody holds an iAsset.
    """
    held: dict[AssetId, dict[AgentId, Decimal]] = {}
    for underlying, supply in sorted(book.supplies.items()):
        for holder in sorted(supply.holder_shares):
            value = supply.redeemable(holder) * prices[underlying.asset]
            pool = held.setdefault(underlying.asset, {})
            pool[holder] = pool.get(holder, ZERO) + value
    held = {a: h for a, h in held.items() if any(h.values())}
    if not held:
        return {}, {}
    weights = proportions({a: demand.get(a, ZERO) for a in sorted(held)})
    payouts: dict[AgentId, Decimal] = {}
    for asset, amount in apportion(budget, weights).items():
        for holder, share in apportion(amount, held[asset]).items():
            payouts[holder] = payouts.get(holder, ZERO) + share
    return weights, payouts


# ===================================================================================
#   Epoch close
# ===================================================================================


@dataclass(frozen=True)
class FiscalParams:
    """Scenario constants of the fiscal close.

    :param caps: per-epoch cap schedule of each CAPPED_COMPONENTS item, plus
        "fee_credits" for the credit issuance budget
    :param gamma: requirement Gamma schedule
    :param nol_share: varpi, share of revenue reserved for network-owned liquidity
    :param nol_ke_fraction: part of that reserve going to the leasing portfolio
    :param phase_end: e', the last bootstrapping epoch
    """

    hub: AssetId
    hub_chain: ChainId
    caps: dict[str, tuple[Decimal, ...]]
    gamma: tuple[Decimal, ...]
    nol_share: Decimal
    nol_ke_fraction: Decimal
    phase_end: int

    def cap(self, component: str, epoch: int) -> Decimal:
        """Cap of one component in epoch; missing components are zero."""
        values = self.caps.get(component)
        return scheduled(values, epoch) if values else ZERO

    def phase(self, epoch: int) -> Phase:
        """Bootstrap through e', matured after."""
        return "bootstrap" if epoch <= self.phase_end else "matured"


@dataclass
class FiscalState:
    """What the fiscal close carries between epochs.

    :param params: scenario constants
    :param credits: fee credit book
    :param vc: network-owned liquidity deepening conversion edges
    :param ke: network-owned liquidity leased through CIMS
    :param fees: itemized fees of the open epoch
    :param equity: R at the last close
    :param nol_value: K at the last close
    :param reports: one report per closed epoch
    """

    params: FiscalParams
    credits: CreditBook
    vc: NoLPortfolio
    ke: NoLPortfolio
    fees: list[FeeCharge] = field(default_factory=list)
    equity: Decimal = ZERO
    nol_value: Decimal = ZERO
    reports: list[FiscalReport] = field(default_factory=list)

    @property
    def treasury(self) -> Account:
        """The treasury's hub account."""
        return Account(TREASURY, self.params.hub_chain)


def resources(
    state: FiscalState,
    ledger: BalanceSheet,
    prices: Mapping[AssetId, Decimal],
    receivables: Decimal,
) -> tuple[Decimal, Decimal]:
    """(R, K) recomputed from the ledger.

    K is the hub value of both portfolios plus lease receivables; R adds the
    treasury.
    """
    k = state.vc.value(ledger, prices) + state.ke.value(ledger, prices) + receivables
    treasury = mark_to_market(ledger.view([TREASURY]), prices)
    return treasury + k, k


def open_books(
    state: FiscalState,
    ledger: BalanceSheet,
    prices: Mapping[AssetId, Decimal],
) -> Decimal:
    """Record genesis R and K and return R."""
    _ = ledger.open(TREASURY, state.params.hub_chain)
    state.equity, state.nol_value = resources(state, ledger, prices, ZERO)
    ledger.equity = state.equity
    return state.equity


class FiscalPoint(NamedTuple):
    """One epoch of a fiscal trajectory."""

    sr: Decimal
    gamma: Decimal
    equity: Decimal


@dataclass(frozen=True)
class FiscalReport:
    """Result of one fiscal close.

    :param equity_before: R at the previous close
    :param equity: R after the recurrence
    :param recomputed: R recomputed from the ledger, equal to equity
    :param delta_k: change in K since the previous close
    :param incentives: allocation per service ("S_DC", "S_VT", "S_PL") by staked
        asset, and "L" by asset pool
    :param credits_issued: fee credits issued per agent
    :param credits_expired: fee credits dropped at this close
    :param acquired: agents onboarded
    :param bounds: incentives paid against budget per constrained component.
        "L" appears only in the bootstrapping phase.
    """

    epoch: int
    phase: Phase
    revenue: RevenueVector
    budget: BudgetVector
    equity_before: Decimal
    equity: Decimal
    recomputed: Decimal
    delta_k: Decimal
    gamma: Decimal
    plan: IncentivePlan
    incentives: dict[str, dict[str, Decimal]]
    credits_issued: dict[AgentId, Decimal]
    credits_expired: Decimal
    acquired: tuple[AgentId, ...]
    bounds: dict[str, IncentiveBound] = field(default_factory=dict)

    @property
    def sr(self) -> Decimal:
        """System revenue NF - B."""
        return self.revenue.total - self.budget.total

    @property
    def breach(self) -> bool:
        """Whether R fell below Gamma."""
        return self.equity < self.gamma

    @property
    def floor_error(self) -> ResourceFloorBreached | None:
        """The breach as an error to record, if R fell below Gamma."""
        if not self.breach:
            return None
        msg = f"epoch {self.epoch}: R {self.equity} is below Gamma {self.gamma}"
        return ResourceFloorBreached(msg)

    @property
    def point(self) -> FiscalPoint:
        """This close as a trajectory point."""
        return FiscalPoint(self.sr, self.gamma, self.equity)

    def as_record(self) -> dict[str, object]:
        """Event log payload."""
        return {
            "phase": self.phase,
            "revenue": dict(self.revenue.streams),
            "budget": dict(self.budget.components),
            "NF": self.revenue.total,
            "B": self.budget.total,
            "R_before": self.equity_before,
            "R": self.equity,
            "R_recomputed": self.recomputed,
            "delta_K": self.delta_k,
            "gamma": self.gamma,
            "breach": self.breach,
            "zeta": list(self.plan.zeta),
            "W": dict(self.plan.weights),
            "incentives": self.incentives,
            "credits_issued": self.credits_issued,
            "credits_expired": self.credits_expired,
            "acquired": list(self.acquired),
            "bounds": {k: b._asdict() for k, b in self.bounds.items()},
        }


def _pay(ledger: BalanceSheet, state: FiscalState, to: str, amount: Decimal) -> None:
    account = ledger.open(to, state.params.hub_chain)
    _ = ledger.post_entry(state.treasury, account, state.params.hub, amount)


def close_epoch(
    state: FiscalState,
    ledger: BalanceSheet,
    book: IAssetBook,
    *,
    epoch: int,
    prices: Mapping[AssetId, Decimal],
    stakes: Sequence[GuarantorStake],
    receivables: Decimal,
    demand: Mapping[AssetId, Decimal],
    candidates: Sequence[Candidate] = (),
) -> FiscalReport:
    """Spend the epoch's budget, update R, and clear the fee list.

    Spending order: network-owned liquidity (varpi * NF, split by
    nol_ke_fraction), guarantor incentives, operator rewards, staking rewards
    (bootstrap only), then acquisition. Every capped item spends
    min(cap, treasury balance).

    :param state: fiscal state, updated in place
    :param ledger: balance sheet, updated in place
    :param book: iAsset holders, paid staking rewards
    :param epoch: closing epoch
    :param prices: closing prices
    :param stakes: guarantor stakes
    :param receivables: open lease receivables, part of K
    :param demand: conversion demand per spoke asset over the closing epoch
    :param candidates: agents available for acquisition
    :return: the report, also appended to state.reports
    """
    params = state.params
    phase = params.phase(epoch)
    revenue = RevenueVector.from_fees(state.fees)
    spend = {k: ZERO for k in BUDGET_COMPONENTS}
    spend["L_prime"] = sum((f.credit for f in state.fees), ZERO)
    incentives: dict[str, dict[str, Decimal]] = {}
    bounds: dict[str, IncentiveBound] = {}

    def available(cap: Decimal) -> Decimal:
        return min(cap, ledger.balance(state.treasury, params.hub))

    reserve = params.nol_share * revenue.total
    ke_share = reserve * params.nol_ke_fraction
    for component, portfolio, amount in (
        ("VC_K", state.vc, reserve - ke_share),
        ("KE_K", state.ke, ke_share),
    ):
        spend[component] = available(amount)
        _ = nol_apply_budget(ledger, portfolio, spend[component], prices, demand)

    for service in ("DC", "VT", "PL"):
        component = "S_" + service
        budget = available(params.cap(component, epoch))
        per_asset, payouts = guarantor_incentives(budget, service, stakes, prices)
        for guarantor, amount in payouts.items():
            _pay(ledger, state, guarantor, amount)
        incentives[component] = per_asset
        spend[component] = sum(payouts.values(), ZERO)
        committed = budget if payouts else ZERO
        bounds[component] = _bound(component, committed, spend[component])

    for service in ("DC", "VT", "PL"):
        component = "Omega_" + service
        spend[component] = available(params.cap(component, epoch))
        _pay(ledger, state, OPERATORS, spend[component])

    weights: dict[AssetId, Decimal] = {}
    if phase == "bootstrap":
        budget = available(params.cap("L", epoch))
        weights, payouts = staking_rewards(budget, book, demand, prices)
        for holder, amount in payouts.items():
            _pay(ledger, state, holder, amount)
        spend["L"] = sum(payouts.values(), ZERO)
        incentives["L"] = apportion(spend["L"], weights)
        bounds["L"] = _bound("L", budget if payouts else ZERO, spend["L"])

    acquired = acquire_agents(available(params.cap("AA", epoch)), candidates)
    for candidate in acquired:
        _pay(ledger, state, ACQUISITION, candidate.cost)
    spend["AA"] = sum((c.cost for c in acquired), ZERO)

    credits_issued: dict[AgentId, Decimal] = {}
    if phase == "bootstrap":
        usage: dict[AgentId, Decimal] = {}
        for fee in state.fees:
            if fee.service in CREDIT_SERVICES:
                usage[fee.agent] = usage.get(fee.agent, ZERO) + fee.gross
        budget = params.cap("fee_credits", epoch)
        issued = issue_fee_credits(state.credits, budget, dict(sorted(usage.items())), epoch)
        credits_issued = {a: q for a, q in issued.items() if q}
    credits_expired = state.credits.expire(epoch)
    if credits_expired:
        logger.info("epoch %d: %s fee credits expired", epoch, credits_expired)

    budget_vector = BudgetVector(spend)
    recomputed, nol_value = resources(state, ledger, prices, receivables)
    delta_k = nol_value - state.nol_value
    equity = state.equity + revenue.total - budget_vector.total + delta_k
    if equity != recomputed:
        msg = f"epoch {epoch}: R {equity} differs from the books by {recomputed - equity}"
        raise ReconciliationError(msg)
    gamma = scheduled(params.gamma, epoch)

    report = FiscalReport(
        epoch=epoch,
        phase=phase,
        revenue=revenue,
        budget=budget_vector,
        equity_before=state.equity,
        equity=equity,
        recomputed=recomputed,
        delta_k=delta_k,
        gamma=gamma,
        plan=IncentivePlan((spend["L"], sum(credits_issued.values(), ZERO)), weights),
        incentives=incentives,
        credits_issued=credits_issued,
        credits_expired=credits_expired,
        acquired=tuple(c.id for c in acquired),
        bounds=bounds,
    )
    if (breach := report.floor_error) is not None:
        logger.warning("%s", breach)
    state.equity, state.nol_value = equity, nol_value
    ledger.equity, ledger.requirement = equity, gamma
    state.fees = []
    state.reports.append(report)
    return report


def fiscal_objective(trajectory: Sequence[FiscalPoint], alpha: Decimal) -> Decimal:
    """Sum over epochs of SR - alpha * (Gamma - R).

    >>> fiscal_objective([FiscalPoint(Decimal(3), Decimal(0), Decimal(5))], Decimal("0.5"))
    Decimal('5.5')
    """
    if not 0 <= alpha <= 1:
        msg = f"alpha must be in [0, 1], got {alpha}"
        raise ValueError(msg)
    return sum((p.sr - alpha * (p.gamma - p.equity) for p in trajectory), ZERO)
