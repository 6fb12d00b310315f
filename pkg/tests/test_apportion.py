"""Pruebas del reparto proporcional.

:author: Shay Hill
:created: 2025-02-22
"""

from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from intralayer_sim.apportion import apportion, proportions

_weights = st.dictionaries(
    st.text(alphabet="abcdefgh", min_size=1, max_size=3),
    st.decimals(min_value=0, max_value=10**6, places=4),
    min_size=1,
    max_size=12,
)


class TestApportion:
    def test_exact_split(self):
        shares = apportion(Decimal(10), {"a": Decimal(1), "b": Decimal(4)})
        assert shares == {"a": Decimal(2), "b": Decimal(8)}

    def test_residue_goes_to_largest_remainder(self):
        """Tres tercios de 1 no caben en la rejilla: el primero recibe el residuo."""
        shares = apportion(Decimal(1), dict.fromkeys("abc", Decimal(1)))
        assert sum(shares.values()) == 1
        assert shares["a"] > shares["b"] == shares["c"]

    def test_zero_weights(self):
        assert apportion(Decimal(5), {"a": Decimal(0)}) == {"a": Decimal(0)}

    def test_no_keys(self):
        assert apportion(Decimal(5), {}) == {}

    def test_keeps_key_order(self):
        shares = apportion(Decimal(3), {"z": Decimal(1), "a": Decimal(2)})
        assert list(shares) == ["z", "a"]

    def test_negative_total(self):
        with pytest.raises(ValueError):
            _ = apportion(Decimal(-1), {"a": Decimal(1)})

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            _ = apportion(Decimal(1), {"a": Decimal(-1)})

    @given(st.decimals(min_value=0, max_value=10**9, places=18), _weights)
    def test_sum_is_exact(self, total: Decimal, weights: dict[str, Decimal]):
        shares = apportion(total, weights)
        if sum(weights.values()) == 0:
            assert all(s == 0 for s in shares.values())
        else:
            assert sum(shares.values()) == total
        assert all(s >= 0 for s in shares.values())


class TestProportions:
    def test_sum_to_one(self):
        fractions = proportions({"a": Decimal(1), "b": Decimal(2)})
        assert sum(fractions.values()) == 1

    def test_all_zero_splits_evenly(self):
        fractions = proportions({"a": Decimal(0), "b": Decimal(0)})
        assert fractions == {"a": Decimal("0.5"), "b": Decimal("0.5")}
