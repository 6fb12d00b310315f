"""Repartir una cantidad continua en porciones discretas que suman exacto.

Los presupuestos de incentivos, las recompensas de participación y los objetivos
de la liquidez propia de la red se reparten en proporción a una demanda. Cada
porción se redondea a la rejilla de cantidades (18 decimales) y el residuo se
asigna a las porciones con el mayor resto, de modo que la suma de las porciones
es igual al total sin ningún error.

:author: Shay Hill
:created: 2025-02-05
"""

from __future__ import annotations

from decimal import ROUND_DOWN, Decimal
from operator import itemgetter
from typing import TYPE_CHECKING, TypeVar

from intralayer_sim.globs import QTY_STEP

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

_K = TypeVar("_K")


def _rank_by_remainder(remainders: Sequence[Decimal]) -> list[int]:
    """Ordenar índices por resto descendente, conservando el orden original.

    :param remainders: los restos de cada porción
    :return: índices de remainders, el mayor resto primero. Los empates se
        resuelven por posición.

    >>> _rank_by_remainder([Decimal("0.2"), Decimal("0.5"), Decimal("0.5")])
    [1, 2, 0]
    """
    ranked = sorted(enumerate(remainders), key=lambda x: (-x[1], x[0]))
    return list(map(itemgetter(0), ranked))


def apportion(
    total: Decimal, weights: Mapping[_K, Decimal], quantum: Decimal = QTY_STEP
) -> dict[_K, Decimal]:
    """Repartir total entre las claves de weights en proporción a sus pesos.

    :param total: la cantidad a repartir, no negativa
    :param weights: peso relativo de cada clave. No necesita sumar a 1.
    :param quantum: la rejilla de las porciones
    :return: una porción por clave, en el orden de weights. La suma es igual a
        total exactamente. Si todos los pesos son cero, todas las porciones son
        cero.

    Si total no está en la rejilla, la fracción menor que quantum va a la
    porción con el mayor resto.

    >>> shares = apportion(Decimal(100), {"a": Decimal(30), "b": Decimal(70)})
    >>> shares == {"a": 30, "b": 70}
    True
    >>> thirds = apportion(Decimal(1), {"a": Decimal(1), "b": Decimal(1), "c": Decimal(1)})
    >>> sum(thirds.values()) == 1
    True
    """
    if total < 0:
        msg = f"cannot apportion a negative total {total}"
        raise ValueError(msg)
    if any(w < 0 for w in weights.values()):
        msg = f"weights must be non-negative, got {dict(weights)}"
        raise ValueError(msg)
    keys = list(weights)
    weight_sum = sum(weights.values(), Decimal(0))
    if not keys or weight_sum == 0:
        return {k: Decimal(0) for k in keys}

    exact = [total * weights[k] / weight_sum for k in keys]
    portions = [x.quantize(quantum, rounding=ROUND_DOWN) for x in exact]
    order = _rank_by_remainder([x - p for x, p in zip(exact, portions, strict=True)])

    residue = total - sum(portions, Decimal(0))
    whole = int((residue / quantum).to_integral_value(rounding=ROUND_DOWN))
    for i in range(whole):
        portions[order[i % len(order)]] += quantum
    portions[order[0]] += total - sum(portions, Decimal(0))
    return dict(zip(keys, portions, strict=True))


def proportions(weights: Mapping[_K, Decimal]) -> dict[_K, Decimal]:
    """Normalizar pesos a fracciones que suman 1 exactamente.

    :param weights: peso relativo de cada clave
    :return: la fracción de cada clave. Si todos los pesos son cero, reparte
        por igual.
    """
    if weights and sum(weights.values(), Decimal(0)) == 0:
        weights = {k: Decimal(1) for k in weights}
    return apportion(Decimal(1), weights)
