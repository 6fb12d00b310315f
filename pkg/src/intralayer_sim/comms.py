"""Simulated message and oracle channels.

A channel carries state messages between chains and the hub. Each delivery is
late by a sampled lag and may drop required keys or add spurious ones. Guarantor
stake improves a channel: the quality factor 1 / (1 + stake / s0) scales the
miss rate, the spur rate, and the lag jitter.

Every delivery draws the same uniforms in the same order (one for the lag, then a
miss and a spur draw per required key in sorted order) whatever the rates are.
Two channels that differ only in stake therefore see the same draws, and a
larger stake can only remove errors from a delivery, never add them.

:author: Shay Hill
:created: 2025-02-07
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import TYPE_CHECKING

from intralayer_sim.core import ONE, ZERO, quantize_qty, uniform
from intralayer_sim.errors import ChannelDown, EmptyEventSet, EmptyRequiredSet

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    import numpy as np

    from intralayer_sim.type_hints import AssetId, ChainId, GuarantorService

SPURIOUS_SUFFIX = "~spurious"


@dataclass(frozen=True)
class MessageEvent:
    """One delivered message.

    :param src: sender
    :param dst: receiver
    :param needed_at: time t* the receiver needed the data, in steps
    :param delivered_at: time t the data arrived, in steps
    :param required: keys D* the receiver needed
    :param delivered: keys D it got
    :param channel: id of the carrying channel
    """

    src: str
    dst: str
    needed_at: Decimal
    delivered_at: Decimal
    required: frozenset[str]
    delivered: frozenset[str]
    channel: str = ""

    def __post_init__(self) -> None:
        if self.needed_at < 0 or self.delivered_at < 0:
            msg = f"message times must be non-negative: {self}"
            raise ValueError(msg)


@dataclass(frozen=True)
class MessageRequest:
    """A message before delivery."""

    src: str
    dst: str
    needed_at: Decimal
    required: frozenset[str]


@dataclass(frozen=True)
class ChannelParams:
    """Design parameters of one channel.

    :param base_lag: steps every delivery takes
    :param lag_jitter: largest extra lag of an unstaked channel
    :param miss_rate: chance an unstaked channel drops a required key
    :param spur_rate: chance an unstaked channel adds a wrong key per required key
    :param stake_scale: s0, the stake that halves the error rates
    :param fee: data connectivity fee F_DC per delivered message
    :param outages: epochs in which the channel delivers nothing
    """

    base_lag: Decimal = ZERO
    lag_jitter: Decimal = ZERO
    miss_rate: Decimal = ZERO
    spur_rate: Decimal = ZERO
    stake_scale: Decimal = ONE
    fee: Decimal = ZERO
    outages: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        for name in ("miss_rate", "spur_rate"):
            rate: Decimal = getattr(self, name)
            if not ZERO <= rate <= ONE:
                msg = f"{name} must be in [0, 1], got {rate}"
                raise ValueError(msg)
        if self.stake_scale <= 0:
            msg = f"stake_scale must be positive, got {self.stake_scale}"
            raise ValueError(msg)
        if min(self.base_lag, self.lag_jitter, self.fee) < 0:
            msg = "base_lag, lag_jitter, and fee must be non-negative"
            raise ValueError(msg)


@dataclass
class GuarantorStake:
    """Per-asset quantities a guarantor stakes behind one service.

    :param guarantor: the staking agent
    :param service: the service secured, DC, VT, or PL
    :param quantities: staked quantity per asset
    """

    guarantor: str
    service: GuarantorService
    quantities: dict[AssetId, Decimal] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if any(q < 0 for q in self.quantities.values()):
            msg = f"stake quantities must be non-negative: {self.quantities}"
            raise ValueError(msg)

    def value(self, prices: Mapping[AssetId, Decimal]) -> Decimal:
        """Hub value of the stake."""
        return sum((q * prices[a] for a, q in self.quantities.items()), ZERO)


@dataclass
class Channel:
    """A configured channel and the current hub value of its stake.

    :param id: channel id
    :param src_chain: chain the channel reads from
    :param dst_chain: chain the channel delivers to
    :param params: design parameters
    :param stake: guarantor stake securing the channel
    :param required_keys: state keys a delivery must carry
    :param stake_value: hub value of stake at the last price update
    """

    id: str
    src_chain: ChainId
    dst_chain: ChainId
    params: ChannelParams
    stake: GuarantorStake
    required_keys: frozenset[str] = frozenset({"balance", "nonce", "state_root"})
    stake_value: Decimal = ZERO

    def mark_stake(self, prices: Mapping[AssetId, Decimal]) -> Decimal:
        """Revalue the stake at prices and return the new value."""
        self.stake_value = self.stake.value(prices)
        return self.stake_value

    @property
    def quality(self) -> Decimal:
        """Quality factor of the channel at its current stake value."""
        return stake_quality_factor(self.stake_value, self.params.stake_scale)


# ===================================================================================
#   Epoch aggregates
# ===================================================================================


def epoch_lag(events: Sequence[MessageEvent]) -> Decimal:
    """Mean delay of delivered data behind the time it was needed.

    :param events: one or more message events
    :return: mean of max(0, t - t*). Early deliveries count as on time.
    :raise EmptyEventSet: if events is empty
    """
    if not events:
        msg = "cannot average the lag of zero events"
        raise EmptyEventSet(msg)
    total = sum((max(ZERO, e.delivered_at - e.needed_at) for e in events), ZERO)
    return total / len(events)


def message_discrepancy(event: MessageEvent) -> Decimal:
    """Missing plus spurious keys of one event, over the number required.

    :raise EmptyRequiredSet: if the event required no keys
    """
    if not event.required:
        msg = f"message {event.src}->{event.dst} has no required keys"
        raise EmptyRequiredSet(msg)
    missing = len(event.required - event.delivered)
    spurious = len(event.delivered - event.required)
    return Decimal(missing + spurious) / len(event.required)


def epoch_discrepancy(events: Sequence[MessageEvent]) -> Decimal:
    """Total discrepancy of an epoch's deliveries, zero for no events."""
    return sum((message_discrepancy(e) for e in events), ZERO)


def data_connectivity_cost(
    psi: Decimal,
    lag: Decimal,
    fee: Decimal,
    alpha_psi: Decimal = ONE,
    alpha_lag: Decimal = ONE,
) -> Decimal:
    """Linear data connectivity cost alpha_psi * psi + alpha_lag * lag + fee.

    :param psi: epoch discrepancy
    :param lag: epoch lag
    :param fee: data connectivity fee paid
    :param alpha_psi: weight on discrepancy
    :param alpha_lag: weight on lag
    :return: the cost, non-decreasing in each input
    """
    if min(psi, lag, fee, alpha_psi, alpha_lag) < 0:
        msg = "data connectivity cost inputs must be non-negative"
        raise ValueError(msg)
    return alpha_psi * psi + alpha_lag * lag + fee


def stake_quality_factor(total_stake: Decimal, stake_scale: Decimal) -> Decimal:
    """Fraction of base error rates a channel keeps under stake.

    :param total_stake: hub value staked, non-negative
    :param stake_scale: s0, positive
    :return: 1 / (1 + stake / s0), in (0, 1]
    """
    if total_stake < 0:
        msg = f"stake must be non-negative, got {total_stake}"
        raise ValueError(msg)
    if stake_scale <= 0:
        msg = f"stake scale must be positive, got {stake_scale}"
        raise ValueError(msg)
    return ONE / (ONE + total_stake / stake_scale)


# ===================================================================================
#   Delivery
# ===================================================================================


def deliver(
    channel: Channel, message: MessageRequest, rng: np.random.Generator, epoch: int
) -> MessageEvent:
    """Carry a message over a channel.

    :param channel: the carrying channel
    :param message: what is sent and when it is needed
    :param rng: the channel's own stream
    :param epoch: current epoch, checked against the outage list
    :return: the delivered event
    :raise ChannelDown: if epoch is an outage epoch of the channel. Nothing is
        drawn from rng.
    """
    params = channel.params
    if epoch in params.outages:
        msg = f"channel {channel.id} is down in epoch {epoch}"
        raise ChannelDown(msg)
    quality = channel.quality
    lag = params.base_lag + quantize_qty(params.lag_jitter * quality * uniform(rng))
    miss_rate = params.miss_rate * quality
    spur_rate = params.spur_rate * quality

    delivered: set[str] = set()
    for key in sorted(message.required):
        missed = uniform(rng) < miss_rate
        spurious = uniform(rng) < spur_rate
        if not missed:
            delivered.add(key)
        if spurious:
            delivered.add(key + SPURIOUS_SUFFIX)

    return MessageEvent(
        src=message.src,
        dst=message.dst,
        needed_at=message.needed_at,
        delivered_at=message.needed_at + lag,
        required=message.required,
        delivered=frozenset(delivered),
        channel=channel.id,
    )
