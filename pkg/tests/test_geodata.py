"""Raster parsing, polygon membership, and pixel extraction."""

import json

import numpy as np
import pytest

from rsdkit.errors import (
    AlignmentError,
    AmbiguityError,
    IngestionError,
    SchemaError,
)
from rsdkit.geodata import (
    BandRaster,
    BlockFeature,
    REQUIRED_BANDS,
    extract_labeled_pixels,
    load_band_rasters,
    load_blocks,
    load_raster,
    point_in_polygon,
    points_in_polygon,
)


def make_raster(band_id="B02", width=4, height=3, fill=0.1, nodata=-9999.0):
    return BandRaster(
        band_id=band_id,
        width=width,
        height=height,
        origin_x=1000.0,
        origin_y=2000.0,
        pixel_size=20.0,
        nodata=nodata,
        values=np.full((height, width), fill),
    )


def write_asc(path, values, xll=1000.0, yll=1940.0, cellsize=20.0, nodata=-9999):
    values = np.asarray(values)
    lines = [
        f"ncols {values.shape[1]}",
        f"nrows {values.shape[0]}",
        f"xllcorner {xll}",
        f"yllcorner {yll}",
        f"cellsize {cellsize}",
        f"NODATA_value {nodata}",
    ]
    for row in values:
        lines.append(" ".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


class TestAsciiGrid:
    def test_reads_header_and_values(self, tmp_path):
        p = tmp_path / "b.asc"
        write_asc(p, [[100, 200], [300, 400], [500, 600]])
        r = load_raster(p, scale=1e-4, band_id="B02")
        assert (r.width, r.height) == (2, 3)
        # origin is the top-left corner: yll + nrows * cellsize
        assert r.origin_x == 1000.0
        assert r.origin_y == 1940.0 + 3 * 20.0
        assert r.values[0, 0] == pytest.approx(0.01)
        assert r.values[2, 1] == pytest.approx(0.06)

    def test_nodata_not_scaled(self, tmp_path):
        p = tmp_path / "b.asc"
        write_asc(p, [[100, -9999], [300, 400], [1, 2]])
        r = load_raster(p, scale=1e-4)
        assert r.values[0, 1] == -9999.0
        assert r.values[0, 0] == pytest.approx(0.01)

    def test_missing_header_field_named(self, tmp_path):
        p = tmp_path / "b.asc"
        p.write_text("ncols 2\nnrows 2\nxllcorner 0\ncellsize 20\n1 2\n3 4\n")
        with pytest.raises(IngestionError, match="(?i)yllcorner"):
            load_raster(p)

    def test_wrong_row_count(self, tmp_path):
        p = tmp_path / "b.asc"
        write_asc(p, [[1, 2], [3, 4]])
        text = p.read_text().splitlines()
        p.write_text("\n".join(text[:-1]) + "\n")  # drop the last data row
        with pytest.raises(IngestionError, match="row"):
            load_raster(p)

    def test_wrong_value_count_in_row(self, tmp_path):
        p = tmp_path / "b.asc"
        write_asc(p, [[1, 2], [3, 4]])
        p.write_text(p.read_text().replace("3 4", "3 4 5"))
        with pytest.raises(IngestionError, match="row"):
            load_raster(p)

    def test_non_numeric_value(self, tmp_path):
        p = tmp_path / "b.asc"
        write_asc(p, [[1, 2], [3, 4]])
        p.write_text(p.read_text().replace("3 4", "3 x"))
        with pytest.raises(IngestionError):
            load_raster(p)

    def test_band_id_defaults_to_stem(self, tmp_path):
        p = tmp_path / "B8A.asc"
        write_asc(p, [[1]], yll=1980.0)
        assert load_raster(p).band_id == "B8A"

    def test_unknown_extension(self, tmp_path):
        p = tmp_path / "b.npy"
        p.write_text("junk")
        with pytest.raises(IngestionError, match="extension"):
            load_raster(p)


class TestGeoTiff:
    def test_round_trip_via_pillow(self, tmp_path):
        Image = pytest.importorskip("PIL.Image")
        from PIL import TiffImagePlugin

        dn = np.array([[100, 200, 300], [400, 500, 600]], dtype=np.int32)
        p = tmp_path / "B04.tif"
        info = TiffImagePlugin.ImageFileDirectory_v2()
        info[33550] = (20.0, 20.0, 0.0)  # pixel scale
        info[33922] = (0.0, 0.0, 0.0, 1000.0, 2040.0, 0.0)  # tiepoint at top-left
        info[42113] = "-9999"
        Image.fromarray(dn).save(p, tiffinfo=info)
        r = load_raster(p, scale=1e-4)
        assert (r.width, r.height) == (3, 2)
        assert r.origin_x == 1000.0 and r.origin_y == 2040.0
        assert r.pixel_size == 20.0
        assert r.nodata == -9999.0
        assert r.values[1, 2] == pytest.approx(0.06)

    def test_missing_georeferencing_tags(self, tmp_path):
        Image = pytest.importorskip("PIL.Image")
        p = tmp_path / "plain.tif"
        Image.fromarray(np.zeros((2, 2), dtype=np.int32)).save(p)
        with pytest.raises(IngestionError):
            load_raster(p)


class TestBandManifest:
    def test_loads_all_bands(self, tmp_path):
        for band in REQUIRED_BANDS:
            write_asc(tmp_path / f"{band}.asc", [[100, 200]], yll=1980.0)
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({b: f"{b}.asc" for b in REQUIRED_BANDS}))
        rasters = load_band_rasters(manifest)
        assert set(rasters) == set(REQUIRED_BANDS)
        assert rasters["B11"].band_id == "B11"

    def test_missing_band_rejected(self, tmp_path):
        write_asc(tmp_path / "B02.asc", [[1]], yll=1980.0)
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({"B02": "B02.asc"}))
        with pytest.raises(IngestionError, match="B03"):
            load_band_rasters(manifest)


def square(x0, y0, x1, y1):
    return [[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]]


class TestPointInPolygon:
    def test_basic_square(self):
        rings = square(0, 0, 10, 10)
        assert point_in_polygon(5, 5, rings)
        assert not point_in_polygon(15, 5, rings)
        assert not point_in_polygon(-1, -1, rings)

    def test_on_edge_counts_inside(self):
        rings = square(0, 0, 10, 10)
        assert point_in_polygon(0, 5, rings)  # left edge
        assert point_in_polygon(5, 0, rings)  # bottom edge
        assert point_in_polygon(0, 0, rings)  # corner

    def test_hole_excluded(self):
        rings = square(0, 0, 10, 10) + square(4, 4, 6, 6)
        assert point_in_polygon(2, 2, rings)
        assert not point_in_polygon(5, 5, rings)

    def test_concave(self):
        # U shape: outer square minus a notch from the top
        ring = [(0, 0), (10, 0), (10, 10), (6, 10), (6, 4), (4, 4), (4, 10), (0, 10)]
        assert point_in_polygon(2, 8, [ring])
        assert point_in_polygon(8, 8, [ring])
        assert not point_in_polygon(5, 8, [ring])

    def test_matches_winding_number_oracle(self):
        # winding number via summed signed angles, entirely independent of
        # the ray-casting implementation
        def winding_inside(x, y, ring):
            v = np.asarray(ring, dtype=np.float64) - (x, y)
            v2 = np.roll(v, -1, axis=0)
            cross = v[:, 0] * v2[:, 1] - v[:, 1] * v2[:, 0]
            dot = (v * v2).sum(axis=1)
            total = np.arctan2(cross, dot).sum()
            return abs(total) > np.pi

        rng = np.random.default_rng(404)
        mismatches = 0
        for trial in range(20):
            # random convex polygon: sorted angles on a noisy circle
            m = rng.integers(5, 12)
            ang = np.sort(rng.uniform(0, 2 * np.pi, m))
            rad = rng.uniform(2.0, 5.0, m)
            ring = list(zip(np.cos(ang) * rad, np.sin(ang) * rad))
            pts = rng.uniform(-6, 6, size=(50, 2))
            got = points_in_polygon(pts[:, 0], pts[:, 1], [ring])
            want = np.array([winding_inside(x, y, ring) for x, y in pts])
            mismatches += int((got != want).sum())
        assert mismatches == 0

    def test_vectorized_matches_scalar(self):
        rings = square(0, 0, 10, 10) + square(4, 4, 6, 6)
        rng = np.random.default_rng(7)
        xs = rng.uniform(-2, 12, 200)
        ys = rng.uniform(-2, 12, 200)
        vec = points_in_polygon(xs, ys, rings)
        for i in range(200):
            assert vec[i] == point_in_polygon(xs[i], ys[i], rings)


class TestBlockFeature:
    def test_status_validated(self):
        with pytest.raises(SchemaError, match="rsd_status"):
            BlockFeature("b", "V", "Maybe", square(0, 0, 1, 1))

    def test_closing_vertex_stripped(self):
        ring = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]
        bf = BlockFeature("b", "V", "Positive", [ring])
        assert len(bf.rings[0]) == 4

    def test_degenerate_ring_rejected(self):
        with pytest.raises(SchemaError, match="<3"):
            BlockFeature("b", "V", "Positive", [[(0, 0), (1, 1)]])


class TestLoadBlocks:
    def geojson(self, features):
        return {"type": "FeatureCollection", "features": features}

    def feature(self, block_id="blk1", variety="Q208", status="Positive", geom=None):
        if geom is None:
            geom = {
                "type": "Polygon",
                "coordinates": [[[0, 0], [10, 0], [10, 10], [0, 10], [0, 0]]],
            }
        return {
            "type": "Feature",
            "properties": {"block_id": block_id, "variety": variety, "rsd_status": status},
            "geometry": geom,
        }

    def test_polygon_loaded(self, tmp_path):
        p = tmp_path / "blocks.geojson"
        p.write_text(json.dumps(self.geojson([self.feature()])))
        blocks = load_blocks(p)
        assert len(blocks) == 1
        assert blocks[0].block_id == "blk1"
        assert blocks[0].variety == "Q208"

    def test_multipolygon_expands_to_one_block(self, tmp_path):
        geom = {
            "type": "MultiPolygon",
            "coordinates": [
                [[[0, 0], [5, 0], [5, 5], [0, 5], [0, 0]]],
                [[[10, 0], [15, 0], [15, 5], [10, 5], [10, 0]]],
            ],
        }
        p = tmp_path / "blocks.geojson"
        p.write_text(json.dumps(self.geojson([self.feature(geom=geom)])))
        blocks = load_blocks(p)
        assert len(blocks) == 2
        assert blocks[0].block_id == blocks[1].block_id == "blk1"

    def test_missing_property_names_feature_index(self, tmp_path):
        f = self.feature()
        del f["properties"]["variety"]
        p = tmp_path / "blocks.geojson"
        p.write_text(json.dumps(self.geojson([self.feature(), f])))
        with pytest.raises(SchemaError, match="1"):
            load_blocks(p)

    def test_bad_geometry_type(self, tmp_path):
        f = self.feature(geom={"type": "Point", "coordinates": [0, 0]})
        p = tmp_path / "blocks.geojson"
        p.write_text(json.dumps(self.geojson([f])))
        with pytest.raises(SchemaError, match="Point"):
            load_blocks(p)


def full_band_set(values, **kw):
    return {b: make_raster(band_id=b, **kw) for b in REQUIRED_BANDS} if values is None else values


class TestExtractPixels:
    def rasters(self, width=4, height=3):
        out = {}
        for i, b in enumerate(REQUIRED_BANDS):
            out[b] = BandRaster(
                band_id=b,
                width=width,
                height=height,
                origin_x=1000.0,
                origin_y=2000.0,
                pixel_size=20.0,
                nodata=-9999.0,
                values=np.full((height, width), 0.1 + 0.01 * i),
            )
        return out

    def block(self, block_id="blk", status="Positive", x0=1000, y0=1940, x1=1080, y1=2000):
        return BlockFeature(block_id, "Q1", status, square(x0, y0, x1, y1))

    def test_all_pixels_claimed(self):
        pixels = extract_labeled_pixels(self.rasters(), [self.block()])
        assert len(pixels) == 12
        assert all(p.label == 1 for p in pixels)
        assert pixels[0].reflectances["B02"] == pytest.approx(0.1)

    def test_scan_order_row_major(self):
        pixels = extract_labeled_pixels(self.rasters(), [self.block()])
        xs = [p.x for p in pixels]
        ys = [p.y for p in pixels]
        assert ys == sorted(ys, reverse=True) or len(set(ys)) < len(ys)
        # first row comes first, left to right
        assert ys[0] == 1990.0 and xs[:4] == [1010.0, 1030.0, 1050.0, 1070.0]

    def test_partial_coverage(self):
        # block covering only the left 2 columns
        blk = self.block(x1=1040)
        pixels = extract_labeled_pixels(self.rasters(), [blk])
        assert len(pixels) == 6
        assert all(p.x < 1040 for p in pixels)

    def test_overlap_raises_ambiguity_with_ids(self):
        blocks = [
            self.block(block_id="bA"),
            self.block(block_id="bB", status="Negative", x0=1040),
        ]
        with pytest.raises(AmbiguityError) as exc:
            extract_labeled_pixels(self.rasters(), blocks)
        assert "bA" in str(exc.value) and "bB" in str(exc.value)

    def test_same_block_id_overlap_allowed(self):
        # two rectangles of one multipolygon may share an id; only genuinely
        # conflicting claims (different ids) are ambiguous
        blocks = [
            self.block(block_id="bA", x1=1040),
            self.block(block_id="bA", x0=1040),
        ]
        pixels = extract_labeled_pixels(self.rasters(), blocks)
        assert len(pixels) == 12

    def test_nodata_pixel_skipped(self):
        rasters = self.rasters()
        rasters["B11"].values[1, 1] = -9999.0
        pixels = extract_labeled_pixels(rasters, [self.block()])
        assert len(pixels) == 11
        assert not any(p.x == 1030.0 and p.y == 1970.0 for p in pixels)

    def test_misaligned_rasters_rejected(self):
        rasters = self.rasters()
        rasters["B12"] = BandRaster(
            band_id="B12",
            width=4,
            height=3,
            origin_x=1010.0,  # shifted grid
            origin_y=2000.0,
            pixel_size=20.0,
            nodata=-9999.0,
            values=np.full((3, 4), 0.1),
        )
        with pytest.raises(AlignmentError, match="B12"):
            extract_labeled_pixels(rasters, [self.block()])

    def test_missing_band_rejected(self):
        rasters = self.rasters()
        del rasters["B07"]
        with pytest.raises(IngestionError, match="B07"):
            extract_labeled_pixels(rasters, [self.block()])

    def test_block_outside_raster_contributes_nothing(self):
        blocks = [self.block(), self.block(block_id="far", x0=9000, x1=9100, y0=0, y1=50)]
        pixels = extract_labeled_pixels(self.rasters(), blocks)
        assert len(pixels) == 12

    def test_partition_additivity(self):
        # splitting one block into two disjoint halves yields the same
        # pixel set as the union block
        whole = extract_labeled_pixels(self.rasters(), [self.block()])
        halves = [
            self.block(block_id="L", x1=1040),
            self.block(block_id="R", x0=1040),
        ]
        parts = extract_labeled_pixels(self.rasters(), halves)
        assert len(parts) == len(whole)
        assert {(p.x, p.y) for p in parts} == {(p.x, p.y) for p in whole}

    def test_block_order_does_not_change_pixel_order(self):
        blocks = [
            self.block(block_id="L", x1=1040),
            self.block(block_id="R", x0=1040, status="Negative"),
        ]
        fwd = extract_labeled_pixels(self.rasters(), blocks)
        rev = extract_labeled_pixels(self.rasters(), blocks[::-1])
        assert [(p.x, p.y, p.block_id) for p in fwd] == [(p.x, p.y, p.block_id) for p in rev]
