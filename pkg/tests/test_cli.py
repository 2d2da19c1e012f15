"""Command-line interface: exit codes, artifacts, and the run pipeline."""

import csv
import json

import pytest

from rsdkit.cli import main
from rsdkit.dataset import table_from_csv


@pytest.fixture(scope="module")
def staged(tmp_path_factory, small_scene_dir):
    """One staged chain ingest -> features -> screen -> train -> evaluate -> permtest."""
    root = tmp_path_factory.mktemp("cli")
    assert (
        main(
            [
                "ingest",
                "--manifest", str(small_scene_dir.manifest_path),
                "--blocks", str(small_scene_dir.blocks_path),
                "--out", str(root / "pixels.csv"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "features",
                "--pixels", str(root / "pixels.csv"),
                "--out", str(root / "features.csv"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "screen",
                "--features", str(root / "features.csv"),
                "--out", str(root / "screen.csv"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train",
                "--features", str(root / "features.csv"),
                "--variety", "VA",
                "--algorithm", "LR",
                "--out-dir", str(root / "model"),
                "--k", "5",
                "--grid", '{"C": [0.5, 5.0]}',
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "evaluate",
                "--model", str(root / "model" / "model.json"),
                "--data", str(root / "model" / "data.csv"),
                "--out-dir", str(root / "eval"),
                "--bootstrap", "100",
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "permtest",
                "--model", str(root / "model" / "model.json"),
                "--data", str(root / "model" / "data.csv"),
                "--out-dir", str(root / "perm"),
                "--rounds", "10",
            ]
        )
        == 0
    )
    return root


class TestStagedChain:
    def test_pixels_csv_rows(self, staged):
        with (staged / "pixels.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 340  # header + both varieties
        assert rows[0][:3] == ["block_id", "variety", "label"]

    def test_features_csv_loads(self, staged):
        table, split = table_from_csv(staged / "features.csv")
        assert split is None
        assert table.features.shape == (340, 28)

    def test_screen_csv_schema(self, staged):
        with (staged / "screen.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "variety", "feature", "t", "df", "p", "threshold", "significant",
        ]
        assert {r[0] for r in rows[1:]} == {"VA", "VB"}

    def test_train_artifacts(self, staged):
        model_dir = staged / "model"
        assert (model_dir / "model.json").exists()
        assert (model_dir / "tuning_audit.csv").exists()
        table, split = table_from_csv(model_dir / "data.csv")
        assert split is not None
        assert len(split.train) + len(split.test) == table.n_rows == 140
        meta = json.loads((model_dir / "model.json").read_text())
        assert meta["meta"]["trained_on"] == "train-split"
        assert len(meta["meta"]["feature_names"]) == 28

    def test_evaluate_artifacts(self, staged):
        summary = json.loads((staged / "eval" / "bootstrap_summary.json").read_text())
        assert 0.5 <= summary["accuracy"]["median"] <= 1.0
        with (staged / "eval" / "bootstrap.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 101

    def test_permtest_artifacts(self, staged):
        summary = json.loads((staged / "perm" / "permutation_summary.json").read_text())
        assert summary["p_values"]["accuracy"] == pytest.approx(1 / 11)
        with (staged / "perm" / "null.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 11

    def test_train_full_writes_hyperparams_table(self, staged, tmp_path):
        rc = main(
            [
                "train",
                "--features", str(staged / "features.csv"),
                "--variety", "VB",
                "--algorithm", "QDA",
                "--out-dir", str(tmp_path / "full"),
                "--k", "5",
                "--full",
            ]
        )
        assert rc == 0
        with (tmp_path / "full" / "hyperparams_table.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["model", "variety", "hyperparameters", "cv_accuracy"]
        assert rows[1][0] == "QDA"
        meta = json.loads((tmp_path / "full" / "model.json").read_text())
        assert meta["meta"]["trained_on"] == "full"
        # --full keeps every row for training, so there is no held-out split
        rc = main(
            [
                "evaluate",
                "--model", str(tmp_path / "full" / "model.json"),
                "--data", str(tmp_path / "full" / "data.csv"),
                "--out-dir", str(tmp_path / "eval"),
                "--bootstrap", "10",
            ]
        )
        assert rc == 3


class TestErrors:
    def test_missing_manifest_is_data_error(self, tmp_path):
        rc = main(
            [
                "ingest",
                "--manifest", str(tmp_path / "nope.json"),
                "--blocks", str(tmp_path / "nope.geojson"),
                "--out", str(tmp_path / "out.csv"),
            ]
        )
        assert rc == 3
        assert not (tmp_path / "out.csv").exists()

    def test_bad_role_syntax_is_config_error(self, staged, tmp_path):
        rc = main(
            [
                "features",
                "--pixels", str(staged / "pixels.csv"),
                "--out", str(tmp_path / "f.csv"),
                "--role", "REDEDGE:B06",
            ]
        )
        assert rc == 2

    def test_unknown_role_band_is_config_error(self, staged, tmp_path):
        rc = main(
            [
                "features",
                "--pixels", str(staged / "pixels.csv"),
                "--out", str(tmp_path / "f.csv"),
                "--role", "REDEDGE=B99",
            ]
        )
        assert rc == 2

    def test_corrupt_pixels_csv_is_data_error(self, tmp_path):
        bad = tmp_path / "pixels.csv"
        bad.write_text("block_id,variety,label\nb,V,Positive\n")
        rc = main(
            ["features", "--pixels", str(bad), "--out", str(tmp_path / "f.csv")]
        )
        assert rc == 3

    def test_report_on_missing_run_dir(self, tmp_path):
        assert main(["report", "--run-dir", str(tmp_path / "absent")]) == 3

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_invalid_grid_json(self, staged, tmp_path):
        rc = main(
            [
                "train",
                "--features", str(staged / "features.csv"),
                "--variety", "VA",
                "--algorithm", "LR",
                "--out-dir", str(tmp_path / "m"),
                "--grid", "{not json",
            ]
        )
        assert rc == 2


def run_config(staged, out_dir, seed=11, **extra):
    config = {
        "output_dir": str(out_dir),
        "seed": seed,
        "band_manifest": None,
        "blocks": None,
        "varieties": ["VA"],
        "algorithms": ["LR", "QDA"],
        "k": 5,
        "bootstrap_samples": 200,
        "permutation_rounds": 10,
        "grids": {"LR": {"C": [1.0]}, "QDA": {"reg_eps": [1e-6]}},
    }
    config.update(extra)
    return config


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, small_scene_dir):
    root = tmp_path_factory.mktemp("run")
    config = run_config(
        None,
        root / "out",
        band_manifest=str(small_scene_dir.manifest_path),
        blocks=str(small_scene_dir.blocks_path),
    )
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config))
    assert main(["run", "--config", str(cfg_path)]) == 0
    return root / "out"


class TestRunPipeline:
    def test_metrics_table_schema(self, run_dir):
        with (run_dir / "metrics_table.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["model", "variety", "class", "precision", "recall", "accuracy"]
        assert len(rows) == 1 + 2 * 2  # two algorithms x two classes
        assert {r[0] for r in rows[1:]} == {"LR", "QDA"}
        assert {r[2] for r in rows[1:]} == {"Positive", "Negative"}

    def test_hyperparams_table_schema(self, run_dir):
        with (run_dir / "hyperparams_table.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["model", "variety", "hyperparameters", "cv_accuracy"]
        assert len(rows) == 3

    def test_manifest_records_cells_and_seed(self, run_dir):
        manifest = json.loads((run_dir / "run_manifest.json").read_text())
        assert manifest["master_seed"] == 11
        assert set(manifest["cells"]) == {"LR:VA", "QDA:VA"}
        assert all(c["status"] == "ok" for c in manifest["cells"].values())

    def test_distribution_files_per_cell(self, run_dir):
        names = {p.name for p in (run_dir / "distributions").iterdir()}
        assert names == {
            "LR_VA_bootstrap.csv",
            "LR_VA_null.csv",
            "QDA_VA_bootstrap.csv",
            "QDA_VA_null.csv",
        }

    def test_summary_outputs(self, run_dir):
        with (run_dir / "summary.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "model", "variety", "metric", "median", "p2.5", "p97.5",
            "p_value", "null_overlap",
        ]
        assert len(rows) == 1 + 2 * 5
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["failed"] == {}

    def test_screen_csv_written(self, run_dir):
        assert (run_dir / "screen.csv").exists()
        assert (run_dir / "tuning_audit.csv").exists()

    def test_same_seed_reproduces_metrics_bytes(self, tmp_path, small_scene_dir):
        outs = []
        for name in ("r1", "r2"):
            config = run_config(
                None,
                tmp_path / name,
                band_manifest=str(small_scene_dir.manifest_path),
                blocks=str(small_scene_dir.blocks_path),
            )
            cfg_path = tmp_path / f"{name}.json"
            cfg_path.write_text(json.dumps(config))
            assert main(["run", "--config", str(cfg_path)]) == 0
            outs.append((tmp_path / name / "metrics_table.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_unknown_config_key_rejected_before_output(self, tmp_path):
        config = run_config(None, tmp_path / "out", typo_key=1)
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["run", "--config", str(cfg_path)]) == 2
        assert not (tmp_path / "out").exists()

    def test_missing_output_dir_rejected(self, tmp_path):
        config = run_config(None, tmp_path / "out")
        del config["output_dir"]
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["run", "--config", str(cfg_path)]) == 2

    def test_malformed_config_json(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text("{broken")
        assert main(["run", "--config", str(cfg_path)]) == 2

    def test_synthetic_input_block(self, tmp_path):
        config = {
            "output_dir": str(tmp_path / "out"),
            "seed": 5,
            "varieties": ["SRA14"],
            "algorithms": ["QDA"],
            "k": 5,
            "bootstrap_samples": 100,
            "permutation_rounds": 5,
            "grids": {"QDA": {"reg_eps": [1e-6]}},
            "synthetic": {"seed": 5, "separation": 1.0, "nodata_rate": 0.0},
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["run", "--config", str(cfg_path)]) == 0
        manifest = json.loads((tmp_path / "out" / "run_manifest.json").read_text())
        assert manifest["cells"]["QDA:SRA14"]["status"] == "ok"
