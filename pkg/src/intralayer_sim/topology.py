"""Agent/path graph, setup costs, and network-value models.

The ecosystem is a directed graph of agents whose edges are transactional paths
weighted by the value moved along them each epoch. Two ways of wiring it are
compared: bilateral (every agent builds a path to every other agent) and gateway
(every agent builds one link to the hub).

:author: Shay Hill
:created: 2025-02-06
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import TYPE_CHECKING, Literal

import networkx as nx

from intralayer_sim.core import ZERO, quantize_metric
from intralayer_sim.errors import MissingComponent, UnknownAgent
from intralayer_sim.globs import HUB_NODE, VALUE_STEP

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from intralayer_sim.type_hints import AgentId

COST_COMPONENTS = ("DC", "VT", "VC", "Clearing", "SC")


@dataclass(frozen=True)
class TransactionalPath:
    """A priced connection between two agents for one epoch.

    :param src: agent at the start of the path
    :param dst: agent at the end of the path
    :param output: economic output of the path this epoch
    :param costs: cost per component, keyed by COST_COMPONENTS
    """

    src: AgentId
    dst: AgentId
    output: Decimal
    costs: Mapping[str, Decimal]


def path_total_cost(path: TransactionalPath) -> Decimal:
    """Aggregate a path's five cost components by summing them.

    :param path: a path with a cost for every one of COST_COMPONENTS
    :return: the sum of the components
    :raise MissingComponent: if a component is absent
    """
    missing = [k for k in COST_COMPONENTS if k not in path.costs]
    if missing:
        msg = f"path {path.src}->{path.dst} has no cost for {', '.join(missing)}"
        raise MissingComponent(msg)
    unknown = sorted(set(path.costs) - set(COST_COMPONENTS))
    if unknown:
        msg = f"path {path.src}->{path.dst} has unknown components {unknown}"
        raise ValueError(msg)
    return sum((path.costs[k] for k in COST_COMPONENTS), ZERO)


class EcosystemGraph:
    """Registered agents and the directed, weighted paths between them."""

    def __init__(self, agents: Iterable[AgentId] = ()) -> None:
        self.graph: nx.DiGraph[str] = nx.DiGraph()
        for agent in agents:
            self.add_agent(agent)

    def add_agent(self, agent: AgentId) -> None:
        """Register an agent."""
        if not agent:
            msg = "agent ids must be non-empty"
            raise ValueError(msg)
        self.graph.add_node(agent)

    def add_path(self, src: AgentId, dst: AgentId, weight: Decimal = ZERO) -> None:
        """Add weight to the path src -> dst, creating the path if needed."""
        for agent in (src, dst):
            if agent not in self.graph:
                msg = f"agent {agent} is not registered"
                raise UnknownAgent(msg)
        if src == dst:
            msg = f"self-loop on {src}"
            raise ValueError(msg)
        if weight < 0:
            msg = f"path weight must be non-negative, got {weight}"
            raise ValueError(msg)
        if self.graph.has_edge(src, dst):
            self.graph.edges[src, dst]["weight"] += weight
        else:
            self.graph.add_edge(src, dst, weight=weight)

    @property
    def agents(self) -> list[AgentId]:
        """Sorted agent ids."""
        return sorted(self.graph.nodes)

    @property
    def n_agents(self) -> int:
        """Number of registered agents."""
        return self.graph.number_of_nodes()

    def weight(self, src: AgentId, dst: AgentId) -> Decimal:
        """Value moved on src -> dst, zero if there is no such path."""
        if not self.graph.has_edge(src, dst):
            return ZERO
        return self.graph.edges[src, dst]["weight"]


# ===================================================================================
#   Setup complexity
# ===================================================================================


def setup_cost_bilateral(
    agent: AgentId, graph: EcosystemGraph, per_pair_cost: Decimal | Mapping[str, Decimal]
) -> Decimal:
    """Cost for one agent to build a bilateral path to every other agent.

    :param agent: the agent building paths
    :param graph: registered agents
    :param per_pair_cost: a uniform cost per counterparty, or a cost per
        counterparty id
    :return: (N_a - 1) * cost for a uniform cost, else the sum of the map
    :raise UnknownAgent: if agent (or a counterparty in the map) is not
        registered
    """
    if agent not in graph.graph:
        msg = f"agent {agent} is not registered"
        raise UnknownAgent(msg)
    if isinstance(per_pair_cost, Decimal):
        return (graph.n_agents - 1) * per_pair_cost
    for other in per_pair_cost:
        if other not in graph.graph:
            msg = f"counterparty {other} is not registered"
            raise UnknownAgent(msg)
    return sum((c for b, c in per_pair_cost.items() if b != agent), ZERO)


def total_setup_cost_bilateral(graph: EcosystemGraph, per_pair_cost: Decimal) -> Decimal:
    """Sum of setup_cost_bilateral over every registered agent."""
    return sum(
        (setup_cost_bilateral(a, graph, per_pair_cost) for a in graph.agents), ZERO
    )


def setup_cost_gateway(graph: EcosystemGraph, per_link_cost: Decimal) -> Decimal:
    """Cost for every agent to build one link to the gateway hub."""
    return graph.n_agents * per_link_cost


def gateway_graph(graph: EcosystemGraph) -> nx.Graph[str]:
    """Return the star that links every registered agent to the hub node."""
    star: nx.Graph[str] = nx.star_graph([HUB_NODE, *graph.agents])
    return star


def gateway_diameter(graph: EcosystemGraph) -> int:
    """Longest shortest path, in hops, of the gateway star."""
    return nx.diameter(gateway_graph(graph))


def reachable_pairs(graph: EcosystemGraph, max_hops: int = 2) -> set[tuple[str, str]]:
    """Ordered agent pairs connected through the gateway within max_hops.

    :param graph: registered agents
    :param max_hops: hop limit through the star
    :return: every (a, b), a != b, both agents, with a path of at most max_hops
    """
    star = gateway_graph(graph)
    agents = set(graph.agents)
    pairs: set[tuple[str, str]] = set()
    for src in graph.agents:
        lengths = nx.single_source_shortest_path_length(star, src, cutoff=max_hops)
        pairs.update((src, dst) for dst in lengths if dst in agents and dst != src)
    return pairs


# ===================================================================================
#   Network value
# ===================================================================================


@dataclass(frozen=True)
class NetworkValueModel:
    """Network value as a function of the number of agents.

    :param kind: "metcalfe" for c * N^2, "zipf" for c * N * ln(N)
    :param scale: the constant c, positive
    """

    kind: Literal["metcalfe", "zipf"] = "metcalfe"
    scale: Decimal = Decimal(1)

    def __post_init__(self) -> None:
        if self.kind not in ("metcalfe", "zipf"):
            msg = f"unknown network value model {self.kind}"
            raise ValueError(msg)
        if self.scale <= 0:
            msg = f"network value scale must be positive, got {self.scale}"
            raise ValueError(msg)


def network_value(model: NetworkValueModel, n_agents: int) -> Decimal:
    """Value of a network of n_agents agents.

    :param model: the network value model
    :param n_agents: number of agents, 0 or more
    :return: c * N^2 (metcalfe) or c * N * ln(N) (zipf, with V(0) = V(1) = 0).
        Zipf values are rounded to 30 fractional digits, so increments of the
        rounded values telescope exactly.
    """
    if n_agents < 0:
        msg = f"number of agents must be non-negative, got {n_agents}"
        raise ValueError(msg)
    n = Decimal(n_agents)
    if model.kind == "metcalfe":
        return model.scale * n * n
    if n_agents <= 1:
        return ZERO
    return (model.scale * n * n.ln()).quantize(VALUE_STEP, rounding=ROUND_HALF_EVEN)


def network_value_increment(model: NetworkValueModel, k: int) -> Decimal:
    """Value added by the k-th agent, V(k) - V(k - 1)."""
    if k < 1:
        msg = f"agent index must be at least 1, got {k}"
        raise ValueError(msg)
    return network_value(model, k) - network_value(model, k - 1)


def path_count(kappa: Decimal, x: Decimal, n_agents: int) -> Decimal:
    """Number of transactional paths by the power law kappa * N^x.

    :param kappa: scale, positive
    :param x: exponent, greater than 1
    :param n_agents: number of agents
    :return: kappa * N^x rounded to the metric grid
    """
    if kappa <= 0 or x <= 1:
        msg = f"path count needs kappa > 0 and x > 1, got {kappa=} {x=}"
        raise ValueError(msg)
    if n_agents <= 0:
        return ZERO
    return quantize_metric(kappa * Decimal(n_agents) ** x)
