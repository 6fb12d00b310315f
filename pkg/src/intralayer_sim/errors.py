"""Exceptions raised by the simulator.

Every error a module can raise is defined here so callers (the engine's action
loop, the command line) can catch `IntraLayerError` and record the class name.
Value-shaped failures also subclass `ValueError`; failures of simulation state
subclass `RuntimeError`.

:author: Shay Hill
:created: 2025-02-03
"""

from __future__ import annotations


class IntraLayerError(Exception):
    """Base class for every simulator error."""


# ===================================================================================
#   Ledger and prices
# ===================================================================================


class InsufficientBalance(IntraLayerError, ValueError):
    """An account does not hold enough of an asset for a debit."""


class NegativeQuantity(IntraLayerError, ValueError):
    """A quantity argument is below zero."""


class UnknownAccount(IntraLayerError, KeyError):
    """An (owner, chain) account was never opened."""


class MissingPrice(IntraLayerError, KeyError):
    """A held asset has no price."""


# ===================================================================================
#   Topology and registries
# ===================================================================================


class MissingComponent(IntraLayerError, ValueError):
    """A transactional path lacks one of its five cost components."""


class UnknownAgent(IntraLayerError, KeyError):
    """An agent id is not registered."""


class UnknownChain(IntraLayerError, KeyError):
    """A chain id is not registered or has no vault."""


class UnknownConductor(IntraLayerError, KeyError):
    """A vault proxy has no conductor for an operation."""


# ===================================================================================
#   Channels
# ===================================================================================


class EmptyEventSet(IntraLayerError, ValueError):
    """An average over message events was requested with no events."""


class EmptyRequiredSet(IntraLayerError, ValueError):
    """A message event has an empty required key set."""


class ChannelDown(IntraLayerError, RuntimeError):
    """A channel is in a configured outage epoch."""


# ===================================================================================
#   Liquidity
# ===================================================================================


class ZeroDepth(IntraLayerError, ValueError):
    """A conversion edge has no depth."""


class CostExceedsValue(IntraLayerError, ValueError):
    """A conversion would cost at least the value converted."""


class PathUnavailable(IntraLayerError, RuntimeError):
    """No vault route exists for a value transfer."""


class ZeroTransfer(IntraLayerError, ValueError):
    """A value transfer of zero value or zero cost."""


class NoVolume(IntraLayerError, ValueError):
    """A value-weighted aggregate was requested with no volume."""


class NegativePortfolio(IntraLayerError, ValueError):
    """A budget would drive a network-owned portfolio below zero."""


# ===================================================================================
#   Brokerage
# ===================================================================================


class BelowMinimumRate(IntraLayerError, ValueError):
    """A lease would open below its minimum collateralization rate."""


class InsufficientInventory(IntraLayerError, ValueError):
    """The leasing inventory cannot cover a requested lease."""


class ZeroLease(IntraLayerError, ValueError):
    """A position has no leased value."""


class ZeroRate(IntraLayerError, ValueError):
    """A collateralization rate of zero or below."""


class ZeroPrice(IntraLayerError, ValueError):
    """A price of zero or below."""


class UnknownPosition(IntraLayerError, KeyError):
    """A lease id is not open."""


# ===================================================================================
#   iAssets
# ===================================================================================


class NoMatchingDeposit(IntraLayerError, RuntimeError):
    """A mint has no executed vault deposit behind it."""


class InsufficientShares(IntraLayerError, ValueError):
    """A holder owns fewer shares than requested."""


class InsufficientVaultLiquidity(IntraLayerError, RuntimeError):
    """A vault cannot release the quantity a burn redeems."""


# ===================================================================================
#   Fiscal and metrics
# ===================================================================================


class ResourceFloorBreached(IntraLayerError, RuntimeError):
    """System resources closed an epoch below the requirement."""


class ReconciliationError(IntraLayerError, RuntimeError):
    """A books identity that holds exactly was off after an update."""


class Expired(IntraLayerError, RuntimeError):
    """A fee credit was drawn after its expiry epoch."""


class IssuanceClosed(IntraLayerError, RuntimeError):
    """Fee credits were requested after the bootstrapping phase."""


class ZeroCapital(IntraLayerError, ValueError):
    """A capital efficiency was requested with no deployed capital."""


# ===================================================================================
#   Scenario files, logs, and snapshots
# ===================================================================================


class ScenarioParseError(IntraLayerError, ValueError):
    """A scenario file is not a parseable mapping."""


class ScenarioValidationError(IntraLayerError, ValueError):
    """A scenario failed validation.

    :param errors: every validation failure, one "path: message" string each
    """

    def __init__(self, errors: list[str]) -> None:
        self.errors = errors
        super().__init__("\n".join(errors))


class SchemaMismatch(IntraLayerError, ValueError):
    """A snapshot was written by another schema version."""


class CorruptLog(IntraLayerError, ValueError):
    """An event log line cannot be parsed.

    :param line: 1-based number of the offending line
    :param reason: what is wrong with it
    """

    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        super().__init__(f"line {line}: {reason}")
