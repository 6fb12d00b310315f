"""Constantes y rutas para el proyecto.

:author: Shay Hill
:created: 2025-02-03
"""

from decimal import Decimal
from pathlib import Path

# ===================================================================================
#   Rutas
# ===================================================================================

RESOURCES = Path(__file__).parent / "resources"

REFERENCE_SCENARIO = RESOURCES / "reference.yaml"
SUMMARY_TEMPLATE = RESOURCES / "summary.txt"

# ===================================================================================
#   Versiones de esquema
# ===================================================================================

SCENARIO_SCHEMA_VERSION = 1
SNAPSHOT_SCHEMA_VERSION = 1

# ===================================================================================
#   Precisión decimal
# ===================================================================================

DECIMAL_PRECISION = 100

# cantidades derivadas de una división
QTY_STEP = Decimal("1e-18")
PRICE_STEP = Decimal("1e-12")
METRIC_STEP = Decimal("1e-12")
# valor de red del modelo zipf (logaritmo)
VALUE_STEP = Decimal("1e-30")

# ===================================================================================
#   Propietarios del sistema
# ===================================================================================

TREASURY = "@treasury"
VAULT = "@vault"
DFMM = "@dfmm"
NOL_VC = "@nol_vc"
NOL_KE = "@nol_ke"
CLEARING = "@clearing"
OPERATORS = "@operators"
ACQUISITION = "@acquisition"
HUB_NODE = "@hub"

# prefijos de cuentas por posición de arrendamiento
ESCROW_PREFIX = "@escrow/"
DEPLOYED_PREFIX = "@deployed/"

LOG_LEVEL_ENV = "INTRALAYER_SIM_LOG_LEVEL"
