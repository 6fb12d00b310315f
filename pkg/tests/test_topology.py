"""Test the ecosystem graph, setup costs, and network value.

:author: Shay Hill
:created: 2025-02-22
"""

from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from intralayer_sim.errors import MissingComponent, UnknownAgent
from intralayer_sim.topology import (
    COST_COMPONENTS,
    EcosystemGraph,
    NetworkValueModel,
    TransactionalPath,
    gateway_diameter,
    network_value,
    network_value_increment,
    path_count,
    path_total_cost,
    reachable_pairs,
    setup_cost_bilateral,
    setup_cost_gateway,
    total_setup_cost_bilateral,
)


def _agents(n: int) -> EcosystemGraph:
    return EcosystemGraph(f"a{i}" for i in range(n))


class TestPaths:
    def test_total_cost_sums_components(self):
        costs = dict(zip(COST_COMPONENTS, map(Decimal, range(1, 6)), strict=True))
        path = TransactionalPath("a", "b", Decimal(100), costs)
        assert path_total_cost(path) == 15

    def test_missing_component(self):
        path = TransactionalPath("a", "b", Decimal(1), {"DC": Decimal(1)})
        with pytest.raises(MissingComponent):
            _ = path_total_cost(path)

    def test_weights_accumulate(self):
        graph = _agents(2)
        graph.add_path("a0", "a1", Decimal(3))
        graph.add_path("a0", "a1", Decimal(4))
        assert graph.weight("a0", "a1") == 7
        assert graph.weight("a1", "a0") == 0

    def test_unregistered_agent(self):
        graph = _agents(1)
        with pytest.raises(UnknownAgent):
            graph.add_path("a0", "nobody")

    def test_self_loop(self):
        graph = _agents(1)
        with pytest.raises(ValueError):
            graph.add_path("a0", "a0")


class TestSetupCost:
    def test_bilateral_grows_quadratically(self):
        cost = Decimal(10)
        assert total_setup_cost_bilateral(_agents(5), cost) == 5 * 4 * 10
        assert total_setup_cost_bilateral(_agents(10), cost) == 10 * 9 * 10

    def test_gateway_grows_linearly(self):
        assert setup_cost_gateway(_agents(5), Decimal(10)) == 50

    def test_bilateral_cost_map(self):
        graph = _agents(3)
        costs = {"a1": Decimal(2), "a2": Decimal(5)}
        assert setup_cost_bilateral("a0", graph, costs) == 7

    @pytest.mark.parametrize(("n", "diameter"), [(0, 0), (1, 1), (2, 2), (40, 2)])
    def test_gateway_diameter(self, n: int, diameter: int):
        assert gateway_diameter(_agents(n)) == diameter

    def test_every_pair_within_two_hops(self):
        graph = _agents(6)
        assert len(reachable_pairs(graph)) == 6 * 5


class TestNetworkValue:
    def test_metcalfe(self):
        model = NetworkValueModel("metcalfe", Decimal(2))
        assert network_value(model, 3) == 18

    def test_zipf_small_networks(self):
        model = NetworkValueModel("zipf")
        assert network_value(model, 0) == network_value(model, 1) == 0
        assert network_value(model, 3) > network_value(model, 2) > 0

    def test_bad_model(self):
        with pytest.raises(ValueError):
            _ = NetworkValueModel("ring")  # pyright: ignore[reportArgumentType]
        with pytest.raises(ValueError):
            _ = NetworkValueModel(scale=Decimal(0))

    @given(st.sampled_from(["metcalfe", "zipf"]), st.integers(min_value=1, max_value=60))
    def test_increments_telescope(self, kind: str, n: int):
        model = NetworkValueModel(kind)  # pyright: ignore[reportArgumentType]
        increments = sum(network_value_increment(model, k) for k in range(1, n + 1))
        assert increments == network_value(model, n)

    def test_path_count_power_law(self):
        assert path_count(Decimal(1), Decimal(2), 4) == 16
        assert path_count(Decimal(1), Decimal("1.5"), 0) == 0
        with pytest.raises(ValueError):
            _ = path_count(Decimal(1), Decimal(1), 4)
