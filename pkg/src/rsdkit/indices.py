"""Spectral roles and the 19-index vegetation feature set.

Index formulas are written over spectral roles (BLUE, NIR, SWIR1600, ...)
rather than band ids, with a default role map targeting the nine 20 m
Level-2A bands. Wavelength symbols from the index literature resolve
through the same map: R550 is the GREEN role, R1660 is SWIR1600.

The full feature vector is the 9 raw band reflectances followed by the 19
index values, in a fixed order shared by every downstream stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dataset import FeatureTable
from .errors import ConfigurationError, EmptyDatasetError, InputError
from .geodata import REQUIRED_BANDS, LabeledPixel

logger = logging.getLogger(__name__)

ROLES = (
    "BLUE",
    "GREEN",
    "RED",
    "REDEDGE",
    "R500",
    "R680",
    "R750",
    "R800",
    "NIR",
    "SWIR1600",
    "SWIR2200",
)

DEFAULT_ROLE_MAP = {
    "BLUE": "B02",
    "GREEN": "B03",
    "RED": "B04",
    "REDEDGE": "B05",
    "R500": "B02",
    "R680": "B04",
    "R750": "B06",
    "R800": "B8A",
    "NIR": "B8A",
    "SWIR1600": "B11",
    "SWIR2200": "B12",
}


def make_role_map(overrides: Mapping[str, str] | None = None) -> dict:
    """Role→band map with optional per-role overrides."""
    role_map = dict(DEFAULT_ROLE_MAP)
    for role, band in (overrides or {}).items():
        if role not in ROLES:
            raise ConfigurationError(f"unknown spectral role {role!r}")
        if band not in REQUIRED_BANDS:
            raise ConfigurationError(
                f"role {role} maps to {band!r}, not an ingested band"
            )
        role_map[role] = band
    return role_map


def resolve_band_role(role: str, role_map: Mapping[str, str] | None = None) -> str:
    if role not in ROLES:
        raise ConfigurationError(f"unknown spectral role {role!r}")
    return (role_map or DEFAULT_ROLE_MAP)[role]


@dataclass(frozen=True)
class IndexDefinition:
    """One vegetation index: its name, the roles it reads, its formula."""

    name: str
    roles: tuple
    fn: Callable


def _catalog() -> list:
    d = IndexDefinition
    return [
        d("NDVI", ("NIR", "RED"), lambda r: (r["NIR"] - r["RED"]) / (r["NIR"] + r["RED"])),
        # the table prints the resistance term as (RED - BLUE)
        d(
            "ARVI",
            ("NIR", "RED", "BLUE"),
            lambda r: (r["NIR"] - (r["RED"] - r["BLUE"])) / (r["NIR"] + (r["RED"] - r["BLUE"])),
        ),
        d("SRI", ("NIR", "RED"), lambda r: r["NIR"] / r["RED"]),
        d("PSRI", ("R680", "R500", "R750"), lambda r: (r["R680"] - r["R500"]) / r["R750"]),
        d("RVI", ("RED", "NIR"), lambda r: r["RED"] / r["NIR"]),
        d("NDWI", ("GREEN", "NIR"), lambda r: (r["GREEN"] - r["NIR"]) / (r["GREEN"] + r["NIR"])),
        d(
            "NDMI",
            ("NIR", "SWIR1600"),
            lambda r: (r["NIR"] - r["SWIR1600"]) / (r["NIR"] + r["SWIR1600"]),
        ),
        d(
            "NGRDI",
            ("GREEN", "RED"),
            lambda r: (r["GREEN"] - r["RED"]) / (r["GREEN"] + r["RED"]),
        ),
        d(
            "VARI",
            ("GREEN", "RED", "BLUE"),
            lambda r: (r["GREEN"] - r["RED"]) / (r["GREEN"] + r["RED"] - r["BLUE"]),
        ),
        d("SR860/550", ("R800", "GREEN"), lambda r: r["R800"] / r["GREEN"]),
        d("DWSI-1", ("R800", "SWIR1600"), lambda r: r["R800"] / r["SWIR1600"]),
        d("DWSI-2", ("SWIR1600", "GREEN"), lambda r: r["SWIR1600"] / r["GREEN"]),
        d("DWSI-3", ("SWIR1600", "R680"), lambda r: r["SWIR1600"] / r["R680"]),
        d("DWSI-4", ("GREEN", "R680"), lambda r: r["GREEN"] / r["R680"]),
        d(
            "DWSI-5",
            ("R800", "GREEN", "SWIR1600", "R680"),
            lambda r: (r["R800"] + r["GREEN"]) / (r["SWIR1600"] + r["R680"]),
        ),
        # denominator read as NIR + (Blue + Green); the printed parenthesis
        # is unbalanced
        d(
            "GBNDVI",
            ("NIR", "BLUE", "GREEN"),
            lambda r: (r["NIR"] - (r["BLUE"] + r["GREEN"]))
            / (r["NIR"] + (r["BLUE"] + r["GREEN"])),
        ),
        d(
            "DWSI-6",
            ("SWIR2200", "SWIR1600", "NIR"),
            lambda r: (r["SWIR2200"] + r["SWIR1600"]) / r["NIR"],
        ),
        d(
            "DWSI-7",
            ("SWIR2200", "SWIR1600", "RED"),
            lambda r: (r["SWIR2200"] + r["SWIR1600"]) / r["RED"],
        ),
        d(
            "DWSI-8",
            ("SWIR2200", "SWIR1600", "RED", "REDEDGE"),
            lambda r: (r["SWIR2200"] + r["SWIR1600"]) / (r["RED"] + r["REDEDGE"]),
        ),
    ]


INDEX_CATALOG = _catalog()
INDEX_NAMES = tuple(d.name for d in INDEX_CATALOG)
FEATURE_NAMES = list(REQUIRED_BANDS) + list(INDEX_NAMES)

_BY_NAME = {d.name: d for d in INDEX_CATALOG}


def compute_index(name: str, reflectances: Mapping[str, float]) -> float:
    """Evaluate one index on a role→reflectance map.

    A zero denominator returns a non-finite value as the invalid flag
    rather than raising.
    """
    if name not in _BY_NAME:
        raise InputError(f"unknown index name {name!r}")
    defn = _BY_NAME[name]
    missing = [role for role in defn.roles if role not in reflectances]
    if missing:
        raise InputError(f"index {name} missing roles: {', '.join(missing)}")
    # np.float64 so zero denominators produce inf/nan under errstate
    # instead of raising ZeroDivisionError
    args = {role: np.float64(reflectances[role]) for role in defn.roles}
    with np.errstate(divide="ignore", invalid="ignore"):
        value = defn.fn(args)
    return float(value)


def build_feature_matrix(
    pixels: Sequence[LabeledPixel], role_map: Mapping[str, str] | None = None
) -> tuple[FeatureTable, int]:
    """Compute the 28-column feature table; returns (table, n_dropped).

    Rows where any index evaluates non-finite (zero denominators) are
    dropped and counted rather than imputed.
    """
    pixels = list(pixels)
    if not pixels:
        raise EmptyDatasetError("no pixels to featurize")
    role_map = make_role_map() if role_map is None else dict(role_map)
    bands = {
        b: np.array([p.reflectances[b] for p in pixels], dtype=np.float64)
        for b in REQUIRED_BANDS
    }
    for b, col in bands.items():
        if not np.isfinite(col).all():
            raise InputError(f"non-finite reflectance in band {b}")
    by_role = {role: bands[role_map[role]] for role in ROLES}

    columns = [bands[b] for b in REQUIRED_BANDS]
    with np.errstate(divide="ignore", invalid="ignore"):
        columns.extend(defn.fn(by_role) for defn in INDEX_CATALOG)
    matrix = np.column_stack(columns)

    valid = np.isfinite(matrix).all(axis=1)
    n_dropped = int((~valid).sum())
    if n_dropped:
        logger.info("dropped %d of %d pixels with invalid index values", n_dropped, len(pixels))
    if not valid.any():
        raise EmptyDatasetError("every pixel produced an invalid index value")
    table = FeatureTable(
        features=matrix[valid],
        labels=np.array([p.label for p in pixels], dtype=np.int64)[valid],
        varieties=np.array([p.variety for p in pixels], dtype=object)[valid],
        block_ids=np.array([p.block_id for p in pixels], dtype=object)[valid],
        feature_names=FEATURE_NAMES,
    )
    return table, n_dropped
