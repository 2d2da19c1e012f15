"""Synthetic labeled scenes with known class structure, plus oracles.

Pixels draw from per-(variety, class) Gaussians over the nine bands, are
quantized to integer digital numbers, and are laid out as rectangular
strips separated by background. The generator emits the same artifacts
the ingestion stage consumes (.asc rasters, a band manifest, a GeoJSON
blocks file) and, in parallel, the feature table those artifacts must
reproduce, so round-trip tests have an exact target.

The default fixture mirrors the per-variety class counts of the field
campaign (e.g. Q200 145/389), and the disease signal is a reflectance
shift concentrated on B8A/B11/B12, the moisture-sensitive bands.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import FeatureTable
from .errors import ConfigurationError
from .geodata import REQUIRED_BANDS, BandRaster, BlockFeature, LabeledPixel
from .indices import build_feature_matrix
from .seeds import rng_for

TABLE1_COUNTS = {
    "Q200": (145, 389),
    "Q208": (869, 649),
    "Q240": (766, 573),
    "Q253": (886, 1769),
    "SRA14": (88, 89),
}

# healthy-canopy mean reflectance per band
_BASE_MEAN = {
    "B02": 0.040,
    "B03": 0.080,
    "B04": 0.050,
    "B05": 0.120,
    "B06": 0.280,
    "B07": 0.340,
    "B8A": 0.380,
    "B11": 0.220,
    "B12": 0.120,
}

# disease shift at separation 1: NIR drops, SWIR rises (moisture stress)
_DISEASE_SHIFT = {
    "B02": 0.000,
    "B03": -0.002,
    "B04": 0.004,
    "B05": 0.002,
    "B06": -0.008,
    "B07": -0.012,
    "B8A": -0.030,
    "B11": 0.035,
    "B12": 0.025,
}

_BAND_SIGMA = 0.008
_BACKGROUND_DN = 2500
_MIN_DN = 50


@dataclass
class GaussianClass:
    """One class-conditional Gaussian over reflectance space."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise ConfigurationError(
                f"covariance shape {self.cov.shape} does not match dimension {d}"
            )
        if not np.allclose(self.cov, self.cov.T, atol=1e-12):
            raise ConfigurationError("covariance must be symmetric")
        try:
            self._chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError("covariance must be positive definite") from exc
        self._log_det = 2.0 * np.log(np.diag(self._chol)).sum()

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.mean.size))
        return self.mean + z @ self._chol.T

    def log_pdf(self, X: np.ndarray) -> np.ndarray:
        diff = np.asarray(X) - self.mean
        z = np.linalg.solve(self._chol, diff.T)
        maha = (z * z).sum(axis=0)
        d = self.mean.size
        return -0.5 * (maha + self._log_det + d * np.log(2.0 * np.pi))


@dataclass
class VarietyConfig:
    """Class Gaussians and target pixel counts for one variety."""

    positive: GaussianClass
    negative: GaussianClass
    n_positive: int
    n_negative: int

    def __post_init__(self):
        if self.n_positive < 0 or self.n_negative < 0:
            raise ConfigurationError("class counts must be >= 0")
        if self.positive.mean.size != self.negative.mean.size:
            raise ConfigurationError("class dimensions differ")


@dataclass
class SynthConfig:
    varieties: dict  # name -> VarietyConfig, insertion order = layout order
    seed: int = 0
    nodata_rate: float = 0.0
    pixel_size: float = 20.0
    origin: tuple = (500000.0, 7000000.0)
    nodata: float = -9999.0
    scale: float = 1e-4
    strip_width: int = 64

    def __post_init__(self):
        if not self.varieties:
            raise ConfigurationError("at least one variety required")
        if not 0.0 <= self.nodata_rate < 1.0:
            raise ConfigurationError(f"nodata_rate must be in [0, 1), got {self.nodata_rate}")
        if self.strip_width < 1:
            raise ConfigurationError("strip_width must be >= 1")
        for name, vc in self.varieties.items():
            if vc.positive.mean.size != len(REQUIRED_BANDS):
                raise ConfigurationError(
                    f"variety {name}: scene generation needs {len(REQUIRED_BANDS)}-band Gaussians"
                )


def table1_config(
    seed: int = 0, separation: float = 1.0, nodata_rate: float = 0.0
) -> SynthConfig:
    """The default fixture: five varieties at the field-campaign counts.

    ``separation`` scales the disease shift; 0 makes the classes
    indistinguishable. Varieties get small deterministic mean offsets so
    they are not identical populations.
    """
    base = np.array([_BASE_MEAN[b] for b in REQUIRED_BANDS])
    shift = np.array([_DISEASE_SHIFT[b] for b in REQUIRED_BANDS]) * separation
    cov = np.eye(len(REQUIRED_BANDS)) * _BAND_SIGMA**2
    varieties = {}
    for name, (n_pos, n_neg) in TABLE1_COUNTS.items():
        offset = rng_for(seed, "variety-offset", name).normal(0.0, 0.004, size=base.size)
        varieties[name] = VarietyConfig(
            positive=GaussianClass(mean=base + offset + shift, cov=cov.copy()),
            negative=GaussianClass(mean=base + offset, cov=cov.copy()),
            n_positive=n_pos,
            n_negative=n_neg,
        )
    return SynthConfig(varieties=varieties, seed=seed, nodata_rate=nodata_rate)


@dataclass
class SceneResult:
    """In-memory scene plus, when written, the on-disk artifact paths."""

    rasters: dict
    blocks: list
    table: FeatureTable
    n_dropped: int
    manifest_path: Path | None = None
    blocks_path: Path | None = None

    def class_counts(self) -> dict:
        counts: dict = {}
        for variety, label in zip(self.table.varieties, self.table.labels):
            pos, neg = counts.get(variety, (0, 0))
            counts[variety] = (pos + (label == 1), neg + (label == 0))
        return counts


def _strip_rects(count: int, width: int, row0: int):
    """Rectangles (c0, r0, c1, r1) in grid coordinates covering `count` cells."""
    full, rem = divmod(count, width)
    rects = []
    if full:
        rects.append((1, row0, 1 + width, row0 + full))
    if rem:
        rects.append((1, row0 + full, 1 + rem, row0 + full + 1))
    return rects, row0 + full + (1 if rem else 0)


def generate_synthetic_scene(config: SynthConfig, out_dir=None) -> SceneResult:
    """Build the scene; optionally write rasters + manifest + GeoJSON.

    The direct feature table contains exactly the pixels the ingestion
    stage would extract, in raster scan order, computed from the same
    quantized digital numbers that land in the rasters.
    """
    width = config.strip_width
    ncols = width + 2
    layout = []  # (variety, label, rects, dns)
    row = 1
    for name, vc in config.varieties.items():
        for label, gauss, count in (
            (1, vc.positive, vc.n_positive),
            (0, vc.negative, vc.n_negative),
        ):
            if count == 0:
                continue
            rects, row = _strip_rects(count, width, row)
            rng = rng_for(config.seed, "pixels", name, label)
            refl = np.clip(gauss.draw(count, rng), 0.005, 1.2)
            dns = np.rint(refl / config.scale).astype(np.int64)
            np.maximum(dns, _MIN_DN, out=dns)
            layout.append((name, label, rects, dns))
            row += 1  # one-row gap between strips
    nrows = row + 1

    grids = {
        b: np.full((nrows, ncols), _BACKGROUND_DN, dtype=np.int64) for b in REQUIRED_BANDS
    }
    claim = np.full((nrows, ncols), -1, dtype=np.int64)
    origin_x, origin_y = config.origin
    ps = config.pixel_size
    rebuilt = []  # (name, label, map-coordinate rings), one entry per strip
    for strip_idx, (name, label, rects, dns) in enumerate(layout):
        cursor = 0
        rings = []
        for c0, r0, c1, r1 in rects:
            n_cells = (c1 - c0) * (r1 - r0)
            cells = dns[cursor : cursor + n_cells]
            cursor += n_cells
            for k, band in enumerate(REQUIRED_BANDS):
                grids[band][r0:r1, c0:c1] = cells[:, k].reshape(r1 - r0, c1 - c0)
            claim[r0:r1, c0:c1] = strip_idx
            x0, x1 = origin_x + c0 * ps, origin_x + c1 * ps
            y0, y1 = origin_y - r0 * ps, origin_y - r1 * ps
            rings.append([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
        rebuilt.append((name, label, rings))

    nodata_int = int(config.nodata)
    if config.nodata_rate > 0:
        rng = rng_for(config.seed, "nodata")
        rows, cols = np.nonzero(claim >= 0)
        hit = rng.random(rows.size) < config.nodata_rate
        bands_hit = rng.integers(0, len(REQUIRED_BANDS), size=rows.size)
        for r, c, h, bi in zip(rows, cols, hit, bands_hit):
            if h:
                grids[REQUIRED_BANDS[bi]][r, c] = nodata_int

    rasters = {}
    for band in REQUIRED_BANDS:
        dn = grids[band]
        values = np.where(dn == nodata_int, float(config.nodata), dn * config.scale)
        rasters[band] = BandRaster(
            band_id=band,
            width=ncols,
            height=nrows,
            origin_x=origin_x,
            origin_y=origin_y,
            pixel_size=ps,
            nodata=float(config.nodata),
            values=values,
        )

    # one BlockFeature per rectangle, rectangles of a strip sharing the id
    # (the GeoJSON writes them as one MultiPolygon feature)
    block_features = []
    for name, label, rings in rebuilt:
        for ring in rings:
            block_features.append(
                BlockFeature(
                    block_id=f"{name}_{'pos' if label else 'neg'}",
                    variety=name,
                    rsd_status="Positive" if label else "Negative",
                    rings=[ring],
                )
            )

    nodata_mask = np.zeros((nrows, ncols), dtype=bool)
    for band in REQUIRED_BANDS:
        nodata_mask |= grids[band] == nodata_int
    pixels = []
    xs = origin_x + (np.arange(ncols) + 0.5) * ps
    ys = origin_y - (np.arange(nrows) + 0.5) * ps
    label_by_claim = [lbl for _, lbl, _, _ in layout]
    name_by_claim = [nm for nm, _, _, _ in layout]
    for r, c in zip(*np.nonzero((claim >= 0) & ~nodata_mask)):
        b_idx = claim[r, c]
        lbl = label_by_claim[b_idx]
        pixels.append(
            LabeledPixel(
                block_id=f"{name_by_claim[b_idx]}_{'pos' if lbl else 'neg'}",
                variety=name_by_claim[b_idx],
                label=int(lbl),
                x=float(xs[c]),
                y=float(ys[r]),
                reflectances={
                    band: float(grids[band][r, c] * config.scale)
                    for band in REQUIRED_BANDS
                },
            )
        )
    table, n_dropped = build_feature_matrix(pixels)

    result = SceneResult(
        rasters=rasters, blocks=block_features, table=table, n_dropped=n_dropped
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = {}
        for band in REQUIRED_BANDS:
            fname = f"{band}.asc"
            _write_ascii_grid(out_dir / fname, grids[band], config, nodata_int)
            manifest[band] = fname
        result.manifest_path = out_dir / "manifest.json"
        result.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        result.blocks_path = out_dir / "blocks.geojson"
        result.blocks_path.write_text(_blocks_geojson(rebuilt) + "\n")
    return result


def _write_ascii_grid(path: Path, dn: np.ndarray, config: SynthConfig, nodata_int: int):
    nrows, ncols = dn.shape
    yll = config.origin[1] - nrows * config.pixel_size
    lines = [
        f"NCOLS {ncols}",
        f"NROWS {nrows}",
        f"XLLCORNER {config.origin[0]:.6f}",
        f"YLLCORNER {yll:.6f}",
        f"CELLSIZE {config.pixel_size:.6f}",
        f"NODATA_VALUE {nodata_int}",
    ]
    lines.extend(" ".join(str(v) for v in row) for row in dn.tolist())
    path.write_text("\n".join(lines) + "\n")


def _blocks_geojson(rebuilt: list) -> str:
    features = []
    for name, label, rings in rebuilt:
        coordinates = [
            [[list(pt) for pt in ring] + [list(ring[0])]] for ring in rings
        ]
        geometry = (
            {"type": "Polygon", "coordinates": coordinates[0]}
            if len(coordinates) == 1
            else {"type": "MultiPolygon", "coordinates": coordinates}
        )
        features.append(
            {
                "type": "Feature",
                "properties": {
                    "block_id": f"{name}_{'pos' if label else 'neg'}",
                    "variety": name,
                    "rsd_status": "Positive" if label else "Negative",
                },
                "geometry": geometry,
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=2)


def bayes_oracle_accuracy(
    config: VarietyConfig,
    n_mc: int = 1_000_000,
    seed: int = 0,
    prior_positive: float | None = None,
) -> tuple[float, float]:
    """Monte-Carlo Bayes-optimal accuracy under the true class Gaussians.

    Returns (accuracy, standard error). Priors default to the configured
    class counts.
    """
    if prior_positive is None:
        total = config.n_positive + config.n_negative
        if total == 0:
            raise ConfigurationError("class counts are both zero; supply prior_positive")
        prior_positive = config.n_positive / total
    if not 0.0 < prior_positive < 1.0:
        raise ConfigurationError(f"prior must be in (0,1), got {prior_positive}")
    rng = rng_for(seed, "bayes-oracle")
    labels = rng.random(n_mc) < prior_positive
    n_pos = int(labels.sum())
    correct = 0
    log_prior_pos = math.log(prior_positive)
    log_prior_neg = math.log(1.0 - prior_positive)
    for is_pos, gauss, count in (
        (True, config.positive, n_pos),
        (False, config.negative, n_mc - n_pos),
    ):
        if count == 0:
            continue
        X = gauss.draw(count, rng)
        score = (log_prior_pos + config.positive.log_pdf(X)) - (
            log_prior_neg + config.negative.log_pdf(X)
        )
        predicted_pos = score > 0
        correct += int((predicted_pos == is_pos).sum())
    acc = correct / n_mc
    se = math.sqrt(max(acc * (1.0 - acc), 1e-12) / n_mc)
    return acc, se
