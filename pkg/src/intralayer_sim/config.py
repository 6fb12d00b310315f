"""Scenario files.

A scenario is a YAML (or JSON) mapping validated in two passes. The first pass is
the pydantic model: types, ranges, unknown keys. If the tree is well formed, the
second pass checks references between its parts: unknown chains, assets,
agents, channels, and clusters, duplicate ids, actions outside the horizon. Both
passes collect every error before raising, and each error is one line,

    channels[0].guarantor.stake.FOO: unknown asset

Decimal fields take numbers or numeric strings. A float is read by its shortest
repr, so 0.003 is exactly Decimal("0.003"). Schedules (fees, budget caps, gamma,
beta) take a scalar or one value per epoch; epochs past the end of a list keep
its last value.

:author: Shay Hill
:created: 2025-02-17
"""

from __future__ import annotations

from decimal import Decimal
from typing import TYPE_CHECKING, Annotated, Any, Literal

import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError

from intralayer_sim.core import to_decimal
from intralayer_sim.errors import ScenarioParseError, ScenarioValidationError
from intralayer_sim.globs import SCENARIO_SCHEMA_VERSION
from intralayer_sim.liquidity import VAULT_OPERATIONS

if TYPE_CHECKING:
    from collections.abc import Iterable
    from pathlib import Path


def _exact(value: object) -> object:
    if isinstance(value, float):
        return to_decimal(value)
    return value


def _as_schedule(value: object) -> object:
    if isinstance(value, (list, tuple)):
        return value
    return [value]


Id = Annotated[str, Field(min_length=1, pattern=r"^[^@]")]
Dec = Annotated[Decimal, BeforeValidator(_exact), Field(allow_inf_nan=False)]
NonNeg = Annotated[Decimal, BeforeValidator(_exact), Field(ge=0, allow_inf_nan=False)]
Positive = Annotated[Decimal, BeforeValidator(_exact), Field(gt=0, allow_inf_nan=False)]
Fraction = Annotated[Decimal, BeforeValidator(_exact), Field(ge=0, le=1, allow_inf_nan=False)]
Schedule = Annotated[tuple[NonNeg, ...], BeforeValidator(_as_schedule), Field(min_length=1)]

_ZERO_SCHEDULE = (Decimal(0),)

ActionKind = Literal[
    "deposit",
    "withdraw",
    "transfer",
    "convert",
    "message",
    "obligation",
    "open_lease",
    "close_lease",
    "iasset_transfer",
    "slash",
]

ACTION_FIELDS: dict[str, tuple[str, ...]] = {
    "deposit": ("agent", "chain", "asset", "qty"),
    "withdraw": ("agent", "chain", "asset", "shares"),
    "transfer": ("agent", "to", "chain", "dst_chain", "asset", "qty"),
    "convert": ("agent", "chain", "asset", "dst_asset", "qty"),
    "message": ("agent", "channel"),
    "obligation": ("cluster", "agent", "to", "amount"),
    "open_lease": (
        "agent",
        "collateral_asset",
        "collateral_chain",
        "collateral_qty",
        "asset",
        "value",
        "dst_chain",
    ),
    "close_lease": ("agent", "position"),
    "iasset_transfer": ("agent", "to", "chain", "asset", "shares"),
    "slash": ("chain", "asset", "fraction"),
}


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChainConfig(_Model):
    """A chain and the operations its vault supports."""

    id: Id
    vault_operations: tuple[Literal["deposit", "withdraw", "transfer", "lease"], ...] = (
        VAULT_OPERATIONS  # pyright: ignore[reportAssignmentType]
    )
    gas_reserve: NonNeg = Decimal(0)


class AssetConfig(_Model):
    """An asset, its price process, and its genesis system holdings.

    A non-empty path fixes the price of epoch u at path[u - 1]; otherwise the
    price follows a multiplicative walk with the given drift and volatility.
    """

    id: Id
    initial_price: Positive
    drift: float = 0.0
    volatility: float = Field(default=0.0, ge=0)
    path: tuple[Positive, ...] = ()
    depth: NonNeg = Decimal(0)
    dfmm_inventory: NonNeg = Decimal(0)
    nol_vc: NonNeg = Decimal(0)
    nol_ke: NonNeg = Decimal(0)


class HoldingConfig(_Model):
    """A genesis balance."""

    chain: Id
    asset: Id
    qty: NonNeg


class AgentConfig(_Model):
    """An agent active from genesis."""

    id: Id
    holdings: tuple[HoldingConfig, ...] = ()


class GuarantorConfig(_Model):
    """The agent securing a channel and what it stakes."""

    agent: Id
    stake: dict[str, NonNeg] = Field(default_factory=dict)


class ChannelConfig(_Model):
    """A message channel between two chains."""

    id: Id
    service: Literal["DC", "VT", "PL"] = "DC"
    src_chain: Id
    dst_chain: Id
    base_lag: NonNeg = Decimal(0)
    lag_jitter: NonNeg = Decimal(0)
    miss_rate: Fraction = Decimal(0)
    spur_rate: Fraction = Decimal(0)
    stake_scale: Positive = Decimal(1)
    fee: NonNeg = Decimal(0)
    outages: tuple[int, ...] = ()
    required_keys: tuple[str, ...] = ("balance", "nonce", "state_root")
    guarantor: GuarantorConfig | None = None


class ClusterConfig(_Model):
    """A transaction cluster and its controller."""

    id: Id
    members: tuple[Id, ...] = Field(min_length=1)
    execution_logic: Literal["multilateral", "gross"] = "multilateral"
    c_dc: NonNeg = Decimal(0)
    c_vc: NonNeg = Decimal(0)
    c_p: NonNeg = Decimal(0)
    hub_p: NonNeg = Decimal(0)
    interval: int = Field(default=1, ge=1)
    channel: Id
    interaction_model: Literal["2n", "2n-1"] = "2n"


class LeaseTermsConfig(_Model):
    """Risk terms for leasing one asset."""

    asset: Id
    rho_min: Positive
    rho_maint: Positive


class CandidateConfig(_Model):
    """An agent the network may acquire."""

    id: Id
    cost: Positive
    value: NonNeg


class ActionConfig(_Model):
    """A scripted action. Which fields are required depends on kind."""

    epoch: int = Field(ge=1)
    step: int = Field(default=0, ge=0)
    kind: ActionKind
    agent: Id | None = None
    to: Id | None = None
    chain: Id | None = None
    dst_chain: Id | None = None
    asset: Id | None = None
    dst_asset: Id | None = None
    qty: NonNeg | None = None
    shares: NonNeg | None = None
    amount: Positive | None = None
    value: Positive | None = None
    channel: Id | None = None
    cluster: Id | None = None
    collateral_asset: Id | None = None
    collateral_chain: Id | None = None
    collateral_qty: NonNeg | None = None
    position: str | None = None
    fraction: Fraction | None = None
    fail: bool = False


class ActivityConfig(_Model):
    """Chance per step of each kind of random action, and its size."""

    transfer: Fraction = Decimal(0)
    convert: Fraction = Decimal(0)
    message: Fraction = Decimal(0)
    obligation: Fraction = Decimal(0)
    max_fraction: Fraction = Decimal("0.05")


class NetworkConfig(_Model):
    """Network value model and the per-link setup cost of the topology report."""

    kind: Literal["metcalfe", "zipf"] = "metcalfe"
    scale: Positive = Decimal(1)
    link_cost: NonNeg = Decimal(1)


class FeesConfig(_Model):
    """Fee schedule per service."""

    DC: Schedule = _ZERO_SCHEDULE
    VT: Schedule = _ZERO_SCHEDULE
    VC: Schedule = _ZERO_SCHEDULE
    PL: Schedule = _ZERO_SCHEDULE
    KE: Schedule = _ZERO_SCHEDULE


class BudgetsConfig(_Model):
    """Per-epoch caps of the capped budget components and the credit budget."""

    S_DC: Schedule = _ZERO_SCHEDULE
    S_VT: Schedule = _ZERO_SCHEDULE
    S_PL: Schedule = _ZERO_SCHEDULE
    Omega_DC: Schedule = _ZERO_SCHEDULE
    Omega_VT: Schedule = _ZERO_SCHEDULE
    Omega_PL: Schedule = _ZERO_SCHEDULE
    L: Schedule = _ZERO_SCHEDULE
    AA: Schedule = _ZERO_SCHEDULE
    fee_credits: Schedule = _ZERO_SCHEDULE


class ScenarioConfig(_Model):
    """A complete, validated scenario."""

    schema_version: int
    seed: int = 0
    horizon: int = Field(ge=1)
    steps_per_epoch: int = Field(default=1, ge=1)
    hub_asset: Id
    hub_chain: Id
    chains: tuple[ChainConfig, ...] = Field(min_length=1)
    assets: tuple[AssetConfig, ...] = Field(min_length=1)
    agents: tuple[AgentConfig, ...] = ()
    channels: tuple[ChannelConfig, ...] = ()
    clusters: tuple[ClusterConfig, ...] = ()
    lease_terms: tuple[LeaseTermsConfig, ...] = ()
    candidates: tuple[CandidateConfig, ...] = ()
    actions: tuple[ActionConfig, ...] = ()
    activity: ActivityConfig = ActivityConfig()
    network: NetworkConfig = NetworkConfig()
    fees: FeesConfig = FeesConfig()
    budgets: BudgetsConfig = BudgetsConfig()
    credit_ttl: int = Field(default=3, ge=1)
    treasury: NonNeg = Decimal(0)
    nol_share: Fraction = Decimal(0)
    nol_ke_fraction: Fraction = Decimal("0.5")
    phase_end: int = Field(default=0, ge=0)
    alpha: Fraction = Decimal(0)
    beta: Schedule | None = None
    gamma: Schedule = _ZERO_SCHEDULE
    kappa: Positive = Decimal(1)
    path_exponent: Annotated[Decimal, BeforeValidator(_exact), Field(gt=1)] = Decimal("1.5")
    output_coefficient: NonNeg = Decimal(0)
    security_base: Fraction = Decimal(0)
    reward_rates: dict[str, NonNeg] = Field(default_factory=dict)
    alpha_psi: NonNeg = Decimal(1)
    alpha_d: NonNeg = Decimal(1)

    @property
    def betas(self) -> tuple[Decimal, ...]:
        """The beta schedule, alpha when none is given."""
        return self.beta if self.beta is not None else (self.alpha,)

    @property
    def agent_ids(self) -> list[str]:
        """Genesis agents in file order."""
        return [a.id for a in self.agents]


# ===================================================================================
#   Cross references
# ===================================================================================


def _location(loc: Iterable[int | str]) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path


def _duplicates(name: str, ids: list[str]) -> list[str]:
    seen: set[str] = set()
    errors: list[str] = []
    for i, id_ in enumerate(ids):
        if id_ in seen:
            errors.append(f"{name}[{i}].id: duplicate id {id_}")
        seen.add(id_)
    return errors


def _cross_check(cfg: ScenarioConfig) -> list[str]:
    """Every reference error of a structurally valid scenario."""
    errors: list[str] = []
    chains = {c.id for c in cfg.chains}
    assets = {a.id for a in cfg.assets}
    agents = {a.id for a in cfg.agents} | {c.id for c in cfg.candidates}
    channels = {c.id for c in cfg.channels}
    clusters = {c.id for c in cfg.clusters}

    for name, ids in (
        ("chains", [c.id for c in cfg.chains]),
        ("assets", [a.id for a in cfg.assets]),
        ("agents", [a.id for a in cfg.agents]),
        ("channels", [c.id for c in cfg.channels]),
        ("clusters", [c.id for c in cfg.clusters]),
        ("candidates", [c.id for c in cfg.candidates]),
    ):
        errors += _duplicates(name, ids)
    for i, candidate in enumerate(cfg.candidates):
        if candidate.id in {a.id for a in cfg.agents}:
            errors.append(f"candidates[{i}].id: {candidate.id} is already an agent")

    def need(path: str, kind: str, value: str | None, known: set[str]) -> None:
        if value is not None and value not in known:
            errors.append(f"{path}: unknown {kind} {value}")

    need("hub_chain", "chain", cfg.hub_chain, chains)
    need("hub_asset", "asset", cfg.hub_asset, assets)
    for i, asset in enumerate(cfg.assets):
        if asset.path and len(asset.path) < cfg.horizon:
            msg = f"price table has {len(asset.path)} entries for {cfg.horizon} epochs"
            errors.append(f"assets[{i}].path: {msg}")
        if asset.id != cfg.hub_asset:
            continue
        moving = asset.volatility or asset.drift or any(p != 1 for p in asset.path)
        if asset.initial_price != 1 or moving:
            errors.append(f"assets[{i}]: the hub asset must be priced at 1 in every epoch")

    for i, agent in enumerate(cfg.agents):
        for j, holding in enumerate(agent.holdings):
            need(f"agents[{i}].holdings[{j}].chain", "chain", holding.chain, chains)
            need(f"agents[{i}].holdings[{j}].asset", "asset", holding.asset, assets)

    for i, channel in enumerate(cfg.channels):
        need(f"channels[{i}].src_chain", "chain", channel.src_chain, chains)
        need(f"channels[{i}].dst_chain", "chain", channel.dst_chain, chains)
        if channel.guarantor is not None:
            need(f"channels[{i}].guarantor.agent", "agent", channel.guarantor.agent, agents)
            for asset in channel.guarantor.stake:
                need(f"channels[{i}].guarantor.stake.{asset}", "asset", asset, assets)
        if any(e < 1 or e > cfg.horizon for e in channel.outages):
            errors.append(f"channels[{i}].outages: epochs must be in [1, {cfg.horizon}]")

    for i, cluster in enumerate(cfg.clusters):
        need(f"clusters[{i}].channel", "channel", cluster.channel, channels)
        for j, member in enumerate(cluster.members):
            need(f"clusters[{i}].members[{j}]", "agent", member, agents)
        if len(set(cluster.members)) != len(cluster.members):
            errors.append(f"clusters[{i}].members: a member is listed twice")

    for i, terms in enumerate(cfg.lease_terms):
        need(f"lease_terms[{i}].asset", "asset", terms.asset, assets)
        if terms.rho_maint > terms.rho_min:
            errors.append(f"lease_terms[{i}].rho_maint: exceeds rho_min {terms.rho_min}")
    errors += _duplicates("lease_terms", [t.asset for t in cfg.lease_terms])

    for asset in cfg.reward_rates:
        need(f"reward_rates.{asset}", "asset", asset, assets)
    if any(rate >= 1 for rate in cfg.fees.VC):
        errors.append("fees.VC: conversion fee rates must be below 1")

    for i, action in enumerate(cfg.actions):
        where = f"actions[{i}]"
        if action.epoch > cfg.horizon:
            errors.append(f"{where}.epoch: {action.epoch} is past the horizon {cfg.horizon}")
        if action.step >= cfg.steps_per_epoch:
            msg = f"{action.step} is not below steps_per_epoch {cfg.steps_per_epoch}"
            errors.append(f"{where}.step: {msg}")
        for name in ACTION_FIELDS[action.kind]:
            if getattr(action, name) is None:
                errors.append(f"{where}.{name}: required for {action.kind}")
        need(f"{where}.agent", "agent", action.agent, agents)
        need(f"{where}.to", "agent", action.to, agents)
        for name in ("chain", "dst_chain", "collateral_chain"):
            need(f"{where}.{name}", "chain", getattr(action, name), chains)
        for name in ("asset", "dst_asset", "collateral_asset"):
            need(f"{where}.{name}", "asset", getattr(action, name), assets)
        need(f"{where}.channel", "channel", action.channel, channels)
        need(f"{where}.cluster", "cluster", action.cluster, clusters)
    return errors


# ===================================================================================
#   Loading
# ===================================================================================


def scenario_from_mapping(data: Any) -> ScenarioConfig:
    """Validate a parsed scenario tree.

    :raise ScenarioValidationError: with every error found
    """
    if not isinstance(data, dict):
        msg = f"a scenario must be a mapping, got {type(data).__name__}"
        raise ScenarioValidationError([msg])
    version = data.get("schema_version")  # pyright: ignore[reportUnknownMemberType]
    if version != SCENARIO_SCHEMA_VERSION:
        msg = f"schema_version: expected {SCENARIO_SCHEMA_VERSION}, got {version}"
        raise ScenarioValidationError([msg])
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        errors = [f"{_location(err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]
        raise ScenarioValidationError(errors) from e
    errors = _cross_check(cfg)
    if errors:
        raise ScenarioValidationError(errors)
    return cfg


def load_scenario(path: Path) -> ScenarioConfig:
    """Read and validate a scenario file.

    :raise FileNotFoundError: if there is no such file
    :raise ScenarioParseError: if the file is not utf-8 YAML
    :raise ScenarioValidationError: with every error found
    """
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        msg = f"{path} is not utf-8 text: {e.reason}"
        raise ScenarioParseError(msg) from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        msg = f"{path} is not valid YAML: {e}"
        raise ScenarioParseError(msg) from e
    return scenario_from_mapping(data)


def with_overrides(
    cfg: ScenarioConfig, *, seed: int | None = None, epochs: int | None = None
) -> ScenarioConfig:
    """Revalidate a scenario with a new seed or horizon.

    A shorter horizon drops the actions scheduled after it.

    :raise ScenarioValidationError: if the result is invalid
    """
    data = cfg.model_dump()
    if seed is not None:
        data["seed"] = seed
    if epochs is not None:
        data["horizon"] = epochs
        data["actions"] = [a for a in data["actions"] if a["epoch"] <= epochs]
        data["channels"] = [
            {**c, "outages": [e for e in c["outages"] if e <= epochs]} for c in data["channels"]
        ]
    return scenario_from_mapping(data)
