"""Transaction clusters and the universal financial controller (UFC).

A cluster of n agents that settles bilaterally exchanges n(n - 1) messages per
round; settling through the hub takes n inbound and n outbound messages. A UFC
collects the cluster's obligations between rounds and, each aggregation
interval, settles them in five steps:

    1. ingest pending obligations
    2. collect inbound legs into the clearing account
    3. fetch state: one inbound message from each member to the hub
    4. net, pay outbound legs, and charge the processing fee
    5. route: one outbound message from the hub to each member

A settled round of n members carries 2n messages, or 2n - 1 when the cluster
counts interactions that way.

A round either completes or leaves the ledger, the fee credits, and the
obligations exactly as they were.

:author: Shay Hill
:created: 2025-02-12
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import Decimal
from typing import TYPE_CHECKING, Any, Literal

from intralayer_sim.comms import MessageRequest, deliver
from intralayer_sim.core import ZERO
from intralayer_sim.errors import ChannelDown, InsufficientBalance, UnknownAgent
from intralayer_sim.globs import CLEARING, HUB_NODE
from intralayer_sim.type_hints import Account

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    import numpy as np

    from intralayer_sim.comms import Channel, MessageEvent
    from intralayer_sim.core import BalanceSheet
    from intralayer_sim.fiscal import CreditBook
    from intralayer_sim.type_hints import AgentId

logger = logging.getLogger(__name__)

ExecutionLogic = Literal["multilateral", "gross"]
InteractionModel = Literal["2n", "2n-1"]


@dataclass(frozen=True)
class TransactionCluster:
    """Agents that share one execution logic and one cost model.

    :param id: cluster id
    :param members: member agents
    :param execution_logic: "multilateral" nets positions through the hub;
        "gross" settles each obligation on its own
    :param c_dc: data connectivity cost per interaction
    :param c_vc: value connectivity cost per interaction
    :param c_p: processing cost per agent when settling bilaterally
    :param hub_p: hub processing cost C*_P per round
    :param interaction_model: count hub interactions as 2n or 2n - 1
    """

    id: str
    members: tuple[AgentId, ...]
    execution_logic: ExecutionLogic = "multilateral"
    c_dc: Decimal = ZERO
    c_vc: Decimal = ZERO
    c_p: Decimal = ZERO
    hub_p: Decimal = ZERO
    interaction_model: InteractionModel = "2n"

    def __post_init__(self) -> None:
        if min(self.c_dc, self.c_vc, self.c_p, self.hub_p) < 0:
            msg = f"cluster {self.id} has a negative cost"
            raise ValueError(msg)
        if len(set(self.members)) != len(self.members):
            msg = f"cluster {self.id} lists a member twice"
            raise ValueError(msg)

    @property
    def n(self) -> int:
        """Number of members."""
        return len(self.members)


# ===================================================================================
#   Cost model
# ===================================================================================


def bilateral_cost(tc: TransactionCluster) -> Decimal:
    """n(n - 1)(c_dc + c_vc) + n * c_p."""
    n = tc.n
    return n * (n - 1) * (tc.c_dc + tc.c_vc) + n * tc.c_p


def hub_interaction_count(tc: TransactionCluster) -> int:
    """2n, or 2n - 1 under the alternative model (never below zero)."""
    if tc.interaction_model == "2n-1":
        return max(0, 2 * tc.n - 1)
    return 2 * tc.n


def hub_cost(tc: TransactionCluster) -> Decimal:
    """m(c_dc + c_vc) + C*_P with m hub interactions."""
    return hub_interaction_count(tc) * (tc.c_dc + tc.c_vc) + tc.hub_p


def cost_savings(tc: TransactionCluster) -> Decimal:
    """Bilateral cost less hub cost. Negative when the hub costs more."""
    return bilateral_cost(tc) - hub_cost(tc)


def bilateral_interactions(members: Sequence[AgentId]) -> list[tuple[AgentId, AgentId]]:
    """Every message of a bilateral round: one per ordered pair of members."""
    return [(a, b) for a in members for b in members if a != b]


def hub_interactions(
    members: Sequence[AgentId], interaction_model: InteractionModel = "2n"
) -> list[tuple[str, str]]:
    """Every message of a hub round: each member to the hub, then back.

    Under "2n-1" the last member's return message is dropped.
    """
    inbound = [(m, HUB_NODE) for m in members]
    outbound = [(HUB_NODE, m) for m in members]
    if interaction_model == "2n-1" and outbound:
        outbound = outbound[:-1]
    return inbound + outbound


def enumerated_cost(
    tc: TransactionCluster, interactions: Sequence[tuple[str, str]], processing: Decimal
) -> Decimal:
    """Price a list of interactions at c_dc + c_vc each, plus processing."""
    return len(interactions) * (tc.c_dc + tc.c_vc) + processing


# ===================================================================================
#   Obligations and netting
# ===================================================================================


@dataclass(frozen=True)
class SettlementLeg:
    """One hub-asset payment of a settlement plan.

    :param agent: the paying or receiving member
    :param direction: "in" pays the hub, "out" is paid by the hub
    :param amount: hub units
    """

    agent: AgentId
    direction: Literal["in", "out"]
    amount: Decimal


@dataclass(frozen=True)
class SettlementPlan:
    """Net position per member and the legs that settle them."""

    nets: dict[AgentId, Decimal]
    legs: tuple[SettlementLeg, ...]

    @property
    def settled_value(self) -> Decimal:
        """Total paid into the hub."""
        return sum((leg.amount for leg in self.legs if leg.direction == "in"), ZERO)


@dataclass
class UFCInstance:
    """A cluster's controller.

    :param id: controller id
    :param cluster: the cluster it settles
    :param interval: aggregation interval in steps
    :param channel: id of the channel state is fetched over
    :param pending: owed amount per (debtor, creditor)
    :param settlement_log: settled plans, oldest first
    :param deferred: rounds that could not settle
    """

    id: str
    cluster: TransactionCluster
    interval: int
    channel: str
    pending: dict[tuple[AgentId, AgentId], Decimal] = field(default_factory=dict)
    settlement_log: list[SettlementPlan] = field(default_factory=list)
    deferred: int = 0

    def __post_init__(self) -> None:
        if self.interval < 1:
            msg = f"aggregation interval must be at least 1, got {self.interval}"
            raise ValueError(msg)

    def add_obligation(self, debtor: AgentId, creditor: AgentId, amount: Decimal) -> None:
        """Record that debtor owes creditor amount in hub units."""
        for agent in (debtor, creditor):
            if agent not in self.cluster.members:
                msg = f"{agent} is not a member of cluster {self.cluster.id}"
                raise UnknownAgent(msg)
        if debtor == creditor:
            msg = f"{debtor} cannot owe itself"
            raise ValueError(msg)
        if amount <= 0:
            msg = f"obligations must be positive, got {amount}"
            raise ValueError(msg)
        key = (debtor, creditor)
        self.pending[key] = self.pending.get(key, ZERO) + amount

    def due(self, global_step: int) -> bool:
        """Whether a round runs after global step global_step (0-based)."""
        return (global_step + 1) % self.interval == 0


def net_positions(
    members: Sequence[AgentId], obligations: dict[tuple[AgentId, AgentId], Decimal]
) -> dict[AgentId, Decimal]:
    """Owed-to less owed-by per member. The positions sum to zero."""
    nets = {m: ZERO for m in members}
    for (debtor, creditor), amount in obligations.items():
        nets[debtor] -= amount
        nets[creditor] += amount
    return nets


def net_obligations(ufc: UFCInstance) -> SettlementPlan:
    """Plan the hub legs that settle a controller's pending obligations.

    Multilateral logic pays each member's net position through the hub: members
    with a negative position pay in, members with a positive one are paid out,
    so a multilateral plan has at most n legs.

    Gross logic routes every obligation through the hub on its own, one leg in
    and one leg out per obligation. The n-leg bound does not apply to it.
    """
    members = ufc.cluster.members
    nets = net_positions(members, ufc.pending)
    legs: list[SettlementLeg] = []
    if ufc.cluster.execution_logic == "gross":
        for (debtor, creditor), amount in sorted(ufc.pending.items()):
            legs.append(SettlementLeg(debtor, "in", amount))
            legs.append(SettlementLeg(creditor, "out", amount))
    else:
        legs.extend(SettlementLeg(m, "in", -nets[m]) for m in members if nets[m] < 0)
        legs.extend(SettlementLeg(m, "out", nets[m]) for m in members if nets[m] > 0)
    return SettlementPlan(nets, tuple(legs))


# ===================================================================================
#   Rounds
# ===================================================================================


@dataclass(frozen=True)
class RoundOutcome:
    """What one round did.

    :param status: "settled", "noop" (nothing pending), or "deferred"
    :param flow: one record per flow step, in order
    :param messages: delivered messages, inbound then outbound. A noop round
        carries only the inbound state fetch, a deferred one nothing.
    :param plan: the executed plan, None unless settled
    :param savings: cost savings of settling through the hub, zero unless settled
    :param reason: why a round was deferred
    """

    status: Literal["settled", "noop", "deferred"]
    flow: tuple[dict[str, Any], ...]
    messages: tuple[MessageEvent, ...] = ()
    plan: SettlementPlan | None = None
    savings: Decimal = ZERO
    reason: str = ""


def execute_ufc_round(
    ufc: UFCInstance,
    ledger: BalanceSheet,
    channel: Channel,
    rng: np.random.Generator,
    *,
    hub: str,
    hub_chain: str,
    epoch: int,
    now: Decimal,
    credits: CreditBook,
    charge_fee: Callable[[AgentId], None],
) -> RoundOutcome:
    """Run the five-step flow for one controller.

    :param ufc: the controller, whose pending obligations clear on success
    :param ledger: balance sheet, restored if the round fails
    :param channel: channel for the step-3 state fetch
    :param rng: the channel's stream
    :param hub: hub asset settlement legs are paid in
    :param hub_chain: chain of members' hub accounts and the clearing account
    :param epoch: current epoch, checked against channel outages
    :param now: current time in steps
    :param credits: fee credits, restored if the round fails
    :param charge_fee: charges one member the processing fee
    :return: the outcome. A round that fails on a channel outage or a short
        balance returns status "deferred" with nothing changed.
    """
    flow: list[dict[str, Any]] = []
    plan = net_obligations(ufc)
    clearing = ledger.open(CLEARING, hub_chain)
    requests = [
        MessageRequest(src, dst, now, channel.required_keys)
        for src, dst in hub_interactions(ufc.cluster.members, ufc.cluster.interaction_model)
    ]
    inbound_requests = [r for r in requests if r.dst == HUB_NODE]
    outbound_requests = [r for r in requests if r.src == HUB_NODE]
    try:
        with ledger.atomic(), credits.atomic():
            flow.append({"step": 1, "obligations": len(ufc.pending)})
            inbound = [leg for leg in plan.legs if leg.direction == "in"]
            for leg in inbound:
                payer = Account(leg.agent, hub_chain)
                _ = ledger.post_entry(payer, clearing, hub, leg.amount)
            flow.append({"step": 2, "collected": str(plan.settled_value)})
            fetched = tuple(deliver(channel, r, rng, epoch) for r in inbound_requests)
            flow.append({"step": 3, "channel": channel.id, "messages": len(fetched)})
            if not ufc.pending:
                return RoundOutcome("noop", tuple(flow), fetched)
            for leg in plan.legs:
                if leg.direction == "out":
                    payee = Account(leg.agent, hub_chain)
                    _ = ledger.post_entry(clearing, payee, hub, leg.amount)
            for member in ufc.cluster.members:
                charge_fee(member)
            flow.append({"step": 4, "legs": len(plan.legs)})
            routing = [
                {"agent": leg.agent, "direction": leg.direction, "amount": str(leg.amount)}
                for leg in plan.legs
            ]
            routed = tuple(deliver(channel, r, rng, epoch) for r in outbound_requests)
            flow.append({"step": 5, "routing": routing, "messages": len(routed)})
    except (ChannelDown, InsufficientBalance) as e:
        ufc.deferred += 1
        logger.debug("round of %s deferred: %s", ufc.id, e)
        return RoundOutcome("deferred", (), reason=type(e).__name__)

    ufc.pending.clear()
    ufc.settlement_log.append(plan)
    return RoundOutcome(
        "settled", tuple(flow), fetched + routed, plan, cost_savings(ufc.cluster)
    )
