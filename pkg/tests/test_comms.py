"""Test message channels, discrepancy, lag, and stake quality.

:author: Shay Hill
:created: 2025-02-22
"""

from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from intralayer_sim.comms import (
    SPURIOUS_SUFFIX,
    Channel,
    ChannelParams,
    GuarantorStake,
    MessageEvent,
    MessageRequest,
    data_connectivity_cost,
    deliver,
    epoch_discrepancy,
    epoch_lag,
    message_discrepancy,
    stake_quality_factor,
)
from intralayer_sim.core import spawn_rng
from intralayer_sim.errors import ChannelDown, EmptyEventSet, EmptyRequiredSet

_KEYS = frozenset({"balance", "nonce", "state_root"})


def _event(needed: int, delivered: int, got: set[str] | None = None) -> MessageEvent:
    return MessageEvent(
        "a", "b", Decimal(needed), Decimal(delivered), _KEYS, frozenset(got or _KEYS)
    )


def _channel(stake: int = 0, **params: Decimal | frozenset[int]) -> Channel:
    channel = Channel(
        "c",
        "eth",
        "sol",
        ChannelParams(**params),  # pyright: ignore[reportArgumentType]
        GuarantorStake("g", "DC", {"ETH": Decimal(stake)}),
    )
    _ = channel.mark_stake({"ETH": Decimal(1)})
    return channel


class TestDiscrepancy:
    def test_exact_delivery(self):
        assert message_discrepancy(_event(0, 0)) == 0

    def test_missing_and_spurious_keys(self):
        got = {"balance", "nonce~spurious", "extra"}
        assert message_discrepancy(_event(0, 0, got)) == Decimal(4) / 3

    def test_no_required_keys(self):
        event = MessageEvent("a", "b", Decimal(0), Decimal(0), frozenset(), frozenset())
        with pytest.raises(EmptyRequiredSet):
            _ = message_discrepancy(event)

    def test_epoch_discrepancy_of_nothing(self):
        assert epoch_discrepancy([]) == 0


class TestLag:
    def test_early_counts_as_on_time(self):
        assert epoch_lag([_event(5, 3), _event(5, 9)]) == 2

    def test_no_events(self):
        with pytest.raises(EmptyEventSet):
            _ = epoch_lag([])

    def test_negative_times(self):
        with pytest.raises(ValueError):
            _ = _event(-1, 0)


class TestCosts:
    def test_linear_cost(self):
        cost = data_connectivity_cost(Decimal(1), Decimal(2), Decimal(3), Decimal(2))
        assert cost == 7

    def test_negative_input(self):
        with pytest.raises(ValueError):
            _ = data_connectivity_cost(Decimal(-1), Decimal(0), Decimal(0))

    def test_quality_halves_at_scale(self):
        assert stake_quality_factor(Decimal(10), Decimal(10)) == Decimal("0.5")
        assert stake_quality_factor(Decimal(0), Decimal(10)) == 1

    @given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=0, max_value=10**6))
    def test_quality_falls_with_stake(self, a: int, b: int):
        low, high = sorted((Decimal(a), Decimal(b)))
        scale = Decimal(1000)
        assert stake_quality_factor(high, scale) <= stake_quality_factor(low, scale) <= 1


class TestDeliver:
    def test_perfect_channel(self):
        channel = _channel(base_lag=Decimal(2))
        request = MessageRequest("a", "sol", Decimal(1), _KEYS)
        event = deliver(channel, request, spawn_rng(0, "channel/c"), 1)
        assert event.delivered == _KEYS
        assert event.delivered_at == 3

    def test_outage(self):
        channel = _channel(outages=frozenset({2}))
        request = MessageRequest("a", "sol", Decimal(0), _KEYS)
        with pytest.raises(ChannelDown):
            _ = deliver(channel, request, spawn_rng(0, "channel/c"), 2)

    def test_certain_errors(self):
        channel = _channel(miss_rate=Decimal(1), spur_rate=Decimal(1))
        request = MessageRequest("a", "sol", Decimal(0), _KEYS)
        event = deliver(channel, request, spawn_rng(0, "channel/c"), 1)
        assert event.delivered == {k + SPURIOUS_SUFFIX for k in _KEYS}
        assert message_discrepancy(event) == 2

    def test_stake_only_removes_errors(self):
        """Same draws under both stakes: the staked channel does no worse."""
        params = {
            "miss_rate": Decimal("0.4"),
            "spur_rate": Decimal("0.4"),
            "lag_jitter": Decimal(3),
            "stake_scale": Decimal(100),
        }
        bare, staked = _channel(0, **params), _channel(300, **params)
        rng_bare, rng_staked = spawn_rng(5, "channel/c"), spawn_rng(5, "channel/c")
        for i in range(50):
            request = MessageRequest("a", "sol", Decimal(i), _KEYS)
            e_bare = deliver(bare, request, rng_bare, 1)
            e_staked = deliver(staked, request, rng_staked, 1)
            assert message_discrepancy(e_staked) <= message_discrepancy(e_bare)
            assert e_staked.delivered_at <= e_bare.delivered_at

    def test_rates_out_of_range(self):
        with pytest.raises(ValueError):
            _ = ChannelParams(miss_rate=Decimal(2))
