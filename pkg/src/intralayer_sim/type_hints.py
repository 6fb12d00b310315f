"""Alias de tipos compartidos por todos los módulos.

Los identificadores son cadenas opacas. Una cuenta del libro mayor es un par
(propietario, cadena); los propietarios del sistema empiezan con "@".

:author: Shay Hill
:created: 2025-02-03
"""

from decimal import Decimal
from typing import Literal, NamedTuple, TypeAlias

AssetId: TypeAlias = str
ChainId: TypeAlias = str
AgentId: TypeAlias = str

# un agente o un propietario del sistema como "@treasury"
OwnerId: TypeAlias = str

Service: TypeAlias = Literal["DC", "VT", "VC", "PL", "KE"]
GuarantorService: TypeAlias = Literal["DC", "VT", "PL"]

Prices: TypeAlias = dict[AssetId, Decimal]


class Account(NamedTuple):
    """Una cuenta del libro mayor: quién tiene el activo y en qué cadena."""

    owner: OwnerId
    chain: ChainId


class Underlying(NamedTuple):
    """El activo depositado detrás de un iAsset."""

    asset: AssetId
    chain: ChainId
