"""Raster and block-polygon ingestion, and labeled pixel extraction.

Inputs are Level-2A style band grids (ESRI ASCII Grid, optionally
single-band GeoTIFF) plus a GeoJSON FeatureCollection of field-block
polygons labeled with variety and disease status. The extractor emits one
labeled observation per pixel whose center falls inside exactly one block,
carrying all nine required band reflectances.

All inputs must share one CRS and one grid geometry; no reprojection or
resampling happens here.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    AmbiguityError,
    IngestionError,
    InputError,
    SchemaError,
)

logger = logging.getLogger(__name__)

REQUIRED_BANDS = ("B02", "B03", "B04", "B05", "B06", "B07", "B8A", "B11", "B12")

RSD_POSITIVE = "Positive"
RSD_NEGATIVE = "Negative"

DEFAULT_SCALE = 1e-4  # Level-2A surface reflectance is stored as DN * 10000

_ASC_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


@dataclass
class BandRaster:
    """One spectral band as a georeferenced grid of reflectance values.

    ``values`` is a (height, width) float array in row-major, north-first
    order. ``origin_x``/``origin_y`` are the map coordinates of the
    top-left corner; y decreases downward through the rows. Cells equal to
    ``nodata`` are sentinels and carry no reflectance.
    """

    band_id: str
    width: int
    height: int
    origin_x: float
    origin_y: float
    pixel_size: float
    nodata: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.height, self.width):
            raise InputError(
                f"band {self.band_id}: values shape {self.values.shape} does not "
                f"match (height, width)=({self.height}, {self.width})"
            )
        if not self.pixel_size > 0:
            raise InputError(f"band {self.band_id}: pixel_size must be > 0")
        valid = self.values != self.nodata
        if not np.isfinite(self.values[valid]).all():
            raise InputError(f"band {self.band_id}: non-finite reflectance values")

    def grid_signature(self) -> tuple:
        return (self.width, self.height, self.origin_x, self.origin_y, self.pixel_size)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Map coordinates of every pixel center as (x, y) 2-D arrays."""
        cols = self.origin_x + (np.arange(self.width) + 0.5) * self.pixel_size
        rows = self.origin_y - (np.arange(self.height) + 0.5) * self.pixel_size
        xs, ys = np.meshgrid(cols, rows)
        return xs, ys


@dataclass
class BlockFeature:
    """A field-block polygon carrying variety and disease-status labels.

    ``rings`` holds the exterior ring first, then any holes, each as an
    ordered vertex list in map coordinates (not necessarily closed).
    """

    block_id: str
    variety: str
    rsd_status: str
    rings: list

    def __post_init__(self):
        if self.rsd_status not in (RSD_POSITIVE, RSD_NEGATIVE):
            raise SchemaError(
                f"block {self.block_id}: rsd_status must be "
                f"'{RSD_POSITIVE}' or '{RSD_NEGATIVE}', got {self.rsd_status!r}"
            )
        cleaned = []
        for ring in self.rings:
            pts = [(float(x), float(y)) for x, y in ring]
            # drop an explicit closing vertex; closure is implied
            if len(pts) >= 2 and pts[0] == pts[-1]:
                pts = pts[:-1]
            if len(pts) < 3:
                raise SchemaError(f"block {self.block_id}: ring with <3 vertices")
            cleaned.append(pts)
        self.rings = cleaned

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [x for ring in self.rings for x, _ in ring]
        ys = [y for ring in self.rings for _, y in ring]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass
class LabeledPixel:
    """One pixel observation labeled with its enclosing block's status."""

    block_id: str
    variety: str
    label: int  # 1 Positive, 0 Negative
    x: float
    y: float
    reflectances: dict = field(default_factory=dict)


def load_raster(path, scale: float = DEFAULT_SCALE, band_id: str | None = None) -> BandRaster:
    """Load a band grid from an ESRI ASCII Grid or single-band GeoTIFF.

    Stored digital numbers are multiplied by ``scale`` (1e-4 for Level-2A
    products); nodata cells keep their sentinel value unscaled.
    """
    if not scale > 0:
        raise InputError("scale must be > 0")
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"raster file not found: {path}")
    if band_id is None:
        band_id = path.stem
    suffix = path.suffix.lower()
    if suffix in (".tif", ".tiff"):
        header, grid = _read_geotiff(path)
    else:
        header, grid = _read_ascii_grid(path)
    nodata = header["nodata"]
    values = np.where(grid == nodata, nodata, grid * scale)
    return BandRaster(
        band_id=band_id,
        width=header["ncols"],
        height=header["nrows"],
        origin_x=header["xllcorner"],
        origin_y=header["yllcorner"] + header["nrows"] * header["cellsize"],
        pixel_size=header["cellsize"],
        nodata=nodata,
        values=values,
    )


def _read_ascii_grid(path: Path) -> tuple[dict, np.ndarray]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestionError(f"unreadable raster file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header: dict = {}
    idx = 0
    while idx < len(lines):
        parts = lines[idx].split()
        key = parts[0].lower()
        if key not in _ASC_HEADER_KEYS and key != "nodata_value":
            break
        if len(parts) != 2:
            raise IngestionError(f"{path}: malformed header line for field {parts[0]}")
        try:
            value = float(parts[1])
        except ValueError as exc:
            raise IngestionError(f"{path}: non-numeric value for field {parts[0]}") from exc
        header[key] = value
        idx += 1
    for key in _ASC_HEADER_KEYS:
        if key not in header:
            raise IngestionError(f"{path}: missing header field {key.upper()}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    if ncols <= 0 or nrows <= 0:
        raise IngestionError(f"{path}: NCOLS/NROWS must be positive")
    if header["cellsize"] <= 0:
        raise IngestionError(f"{path}: CELLSIZE must be positive")
    nodata = header.get("nodata_value", -9999.0)

    data_lines = lines[idx:]
    if len(data_lines) != nrows:
        raise IngestionError(
            f"{path}: NROWS declares {nrows} rows but {len(data_lines)} data rows found"
        )
    rows = []
    for r, line in enumerate(data_lines):
        parts = line.split()
        if len(parts) != ncols:
            raise IngestionError(
                f"{path}: NCOLS declares {ncols} values but data row {r} has {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise IngestionError(f"{path}: non-numeric cell in data row {r}") from exc
    return (
        {
            "ncols": ncols,
            "nrows": nrows,
            "xllcorner": header["xllcorner"],
            "yllcorner": header["yllcorner"],
            "cellsize": header["cellsize"],
            "nodata": nodata,
        },
        np.array(rows, dtype=np.float64),
    )


# GeoTIFF tag ids: pixel scale, tiepoint, GDAL nodata
_TIFF_MODEL_PIXEL_SCALE = 33550
_TIFF_MODEL_TIEPOINT = 33922
_TIFF_GDAL_NODATA = 42113


def _read_geotiff(path: Path) -> tuple[dict, np.ndarray]:
    try:
        from PIL import Image
    except ImportError as exc:
        raise IngestionError(
            f"reading GeoTIFF {path} requires Pillow (pip install rsdkit[geotiff])"
        ) from exc

    try:
        with Image.open(path) as img:
            tags = dict(img.tag_v2) if hasattr(img, "tag_v2") else {}
            grid = np.asarray(img, dtype=np.float64)
    except OSError as exc:
        raise IngestionError(f"unreadable GeoTIFF {path}: {exc}") from exc
    if grid.ndim != 2:
        raise IngestionError(f"{path}: expected a single-band GeoTIFF, got shape {grid.shape}")
    if _TIFF_MODEL_PIXEL_SCALE not in tags:
        raise IngestionError(f"{path}: missing ModelPixelScale tag")
    if _TIFF_MODEL_TIEPOINT not in tags:
        raise IngestionError(f"{path}: missing ModelTiepoint tag")
    sx, sy = float(tags[_TIFF_MODEL_PIXEL_SCALE][0]), float(tags[_TIFF_MODEL_PIXEL_SCALE][1])
    if not math.isclose(sx, sy, rel_tol=1e-9):
        raise IngestionError(f"{path}: non-square pixels in ModelPixelScale ({sx} x {sy})")
    tie = tags[_TIFF_MODEL_TIEPOINT]
    # tiepoint maps raster (i, j) to map (x, y); anchor the top-left corner
    i, j, x, y = float(tie[0]), float(tie[1]), float(tie[3]), float(tie[4])
    nrows, ncols = grid.shape
    origin_x = x - i * sx
    origin_y = y + j * sy
    nodata = -9999.0
    if _TIFF_GDAL_NODATA in tags:
        try:
            nodata = float(str(tags[_TIFF_GDAL_NODATA]).strip("\x00 "))
        except ValueError as exc:
            raise IngestionError(f"{path}: unparseable GDAL nodata tag") from exc
    return (
        {
            "ncols": ncols,
            "nrows": nrows,
            "xllcorner": origin_x,
            "yllcorner": origin_y - nrows * sx,
            "cellsize": sx,
            "nodata": nodata,
        },
        grid,
    )


def load_band_rasters(manifest_path, scale: float = DEFAULT_SCALE) -> dict:
    """Load every band listed in a manifest JSON mapping band_id to path.

    Relative paths resolve against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise IngestionError(f"unreadable band manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"invalid JSON in band manifest {manifest_path}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise IngestionError(f"{manifest_path}: band manifest must map band_id to file path")
    missing = sorted(set(REQUIRED_BANDS) - set(manifest))
    if missing:
        raise IngestionError(f"{manifest_path}: manifest missing bands {missing}")
    rasters = {}
    for band_id, rel in manifest.items():
        p = Path(rel)
        if not p.is_absolute():
            p = manifest_path.parent / p
        rasters[band_id] = load_raster(p, scale=scale, band_id=band_id)
    return rasters


def load_blocks(path) -> list[BlockFeature]:
    """Load block polygons from a GeoJSON FeatureCollection.

    Each feature needs ``block_id``, ``variety`` and ``rsd_status``
    properties and Polygon/MultiPolygon geometry; MultiPolygon parts expand
    into one BlockFeature each, sharing the block_id.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise SchemaError(f"unreadable blocks file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in blocks file {path}: {exc}") from exc
    if doc.get("type") != "FeatureCollection":
        raise SchemaError(f"{path}: expected a GeoJSON FeatureCollection")
    blocks: list[BlockFeature] = []
    for idx, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        for key in ("block_id", "variety", "rsd_status"):
            if key not in props:
                raise SchemaError(f"{path}: feature {idx} missing property {key!r}")
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            parts = [geom.get("coordinates", [])]
        elif gtype == "MultiPolygon":
            parts = geom.get("coordinates", [])
        else:
            raise SchemaError(
                f"{path}: feature {idx} has non-polygon geometry {gtype!r}"
            )
        for part in parts:
            if not part:
                raise SchemaError(f"{path}: feature {idx} has empty polygon coordinates")
            try:
                blocks.append(
                    BlockFeature(
                        block_id=str(props["block_id"]),
                        variety=str(props["variety"]),
                        rsd_status=str(props["rsd_status"]),
                        rings=part,
                    )
                )
            except SchemaError as exc:
                raise SchemaError(f"{path}: feature {idx}: {exc}") from exc
    return blocks


def points_in_polygon(px: np.ndarray, py: np.ndarray, rings: Sequence) -> np.ndarray:
    """Even-odd ray-casting containment test for arrays of points.

    Holes are handled by parity: a point inside both the exterior and a
    hole crosses an even number of edges and tests outside. A point lying
    exactly on any ring edge counts as inside (degenerate but
    deterministic).
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    for ring in rings:
        n = len(ring)
        for a in range(n):
            x1, y1 = ring[a]
            x2, y2 = ring[(a + 1) % n]
            cross = (x2 - x1) * (py - y1) - (px - x1) * (y2 - y1)
            within = (
                (px >= min(x1, x2)) & (px <= max(x1, x2))
                & (py >= min(y1, y2)) & (py <= max(y1, y2))
            )
            on_edge |= (cross == 0.0) & within
            straddles = (y1 > py) != (y2 > py)
            if y1 != y2:
                with np.errstate(divide="ignore", invalid="ignore"):
                    x_int = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                inside ^= straddles & (px < x_int)
    return inside | on_edge


def point_in_polygon(x: float, y: float, rings: Sequence) -> bool:
    """Scalar convenience wrapper over :func:`points_in_polygon`."""
    return bool(points_in_polygon(np.array([x]), np.array([y]), rings)[0])


def _check_alignment(rasters: Mapping[str, BandRaster]) -> BandRaster:
    missing = [b for b in REQUIRED_BANDS if b not in rasters]
    if missing:
        raise IngestionError(f"missing required bands: {', '.join(missing)}")
    ref = rasters[REQUIRED_BANDS[0]]
    for band_id in REQUIRED_BANDS:
        r = rasters[band_id]
        if r.grid_signature() != ref.grid_signature():
            raise AlignmentError(
                f"band {band_id} grid {r.grid_signature()} does not match "
                f"band {ref.band_id} grid {ref.grid_signature()}"
            )
    return ref


def extract_labeled_pixels(
    rasters: Mapping[str, BandRaster], blocks: Iterable[BlockFeature]
) -> list[LabeledPixel]:
    """Emit one labeled observation per pixel center inside exactly one block.

    Pixels with a nodata value in any band are skipped; pixels whose center
    is inside no block are skipped; a pixel claimed by two blocks raises an
    ambiguity error naming both. Output order is raster scan order, so the
    result does not depend on block ordering.
    """
    ref = _check_alignment(rasters)
    blocks = list(blocks)
    xs, ys = ref.pixel_centers()

    claim = np.full((ref.height, ref.width), -1, dtype=np.int64)
    half = 0.5 * ref.pixel_size
    for b_idx, block in enumerate(blocks):
        minx, miny, maxx, maxy = block.bounds()
        # candidate window: pixel centers within the polygon bbox
        c0 = max(0, int(math.floor((minx - half - ref.origin_x) / ref.pixel_size)))
        c1 = min(ref.width, int(math.ceil((maxx + half - ref.origin_x) / ref.pixel_size)) + 1)
        r0 = max(0, int(math.floor((ref.origin_y - maxy - half) / ref.pixel_size)))
        r1 = min(ref.height, int(math.ceil((ref.origin_y - miny + half) / ref.pixel_size)) + 1)
        if c0 >= c1 or r0 >= r1:
            continue
        window_inside = points_in_polygon(xs[r0:r1, c0:c1], ys[r0:r1, c0:c1], block.rings)
        rows, cols = np.nonzero(window_inside)
        rows += r0
        cols += c0
        clash = claim[rows, cols] != -1
        if clash.any():
            other = blocks[claim[rows[clash][0], cols[clash][0]]]
            ids = sorted({other.block_id, block.block_id})
            raise AmbiguityError(
                f"pixel claimed by overlapping blocks: {', '.join(ids)}"
            )
        claim[rows, cols] = b_idx

    band_grids = {b: rasters[b].values for b in REQUIRED_BANDS}
    nodata_mask = np.zeros((ref.height, ref.width), dtype=bool)
    for b in REQUIRED_BANDS:
        nodata_mask |= band_grids[b] == rasters[b].nodata

    n_nodata = int((nodata_mask & (claim >= 0)).sum())
    if n_nodata:
        logger.info("skipping %d in-block pixels with nodata bands", n_nodata)

    pixels: list[LabeledPixel] = []
    rows, cols = np.nonzero((claim >= 0) & ~nodata_mask)
    for r, c in zip(rows.tolist(), cols.tolist()):
        block = blocks[claim[r, c]]
        pixels.append(
            LabeledPixel(
                block_id=block.block_id,
                variety=block.variety,
                label=1 if block.rsd_status == RSD_POSITIVE else 0,
                x=float(xs[r, c]),
                y=float(ys[r, c]),
                reflectances={b: float(band_grids[b][r, c]) for b in REQUIRED_BANDS},
            )
        )
    return pixels
