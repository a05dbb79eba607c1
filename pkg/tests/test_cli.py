import json

import numpy as np
import pytest

from sar2ndwi.chipio import read_chip, write_chip
from sar2ndwi.cli import main
from sar2ndwi.fixtures import generate_scene_dir


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A scene directory plus a pipeline config with a desk-sized model."""
    root = tmp_path_factory.mktemp("ws")
    generate_scene_dir(root / "scenes", 2, seed=0, cloud_covers=[0.0, 0.1])
    config = {
        "scene_root": str(root / "scenes"),
        "chip_dir": str(root / "chips"),
        "manifest_path": str(root / "chips" / "manifest.json"),
        "cloud_threshold": 0.05,
        "split_unit": "chip",
        "model": {
            "input_channels": 2,
            "encoder_filters": [2, 4],
            "bottleneck_filters": 8,
            "decoder_filters": [4, 2],
            "convs_per_block": 2,
        },
        "training": {
            "loss": "mean_squared_error",
            "learning_rate": 0.001,
            "batch_size": 8,
            "max_epochs": 1,
            "patience": 5,
            "validation_fraction": 0.1,
            "rng_seed": 0,
            "beta1": 0.9,
            "beta2": 0.999,
            "epsilon": 1e-8,
            "stop_at_train_loss": None,
        },
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    return root, config_path


@pytest.fixture(scope="module")
def preprocessed(workspace):
    root, config_path = workspace
    assert main(["preprocess", "--config", str(config_path)]) == 0
    return root, config_path


@pytest.fixture(scope="module")
def trained(preprocessed):
    root, config_path = preprocessed
    out = root / "run"
    assert main(["train", "--config", str(config_path), "--out", str(out)]) == 0
    return root, config_path, out


def test_preprocess_reports_counts(workspace, capsys):
    root, config_path = workspace
    assert main(["preprocess", "--config", str(config_path)]) == 0
    out = capsys.readouterr().out
    assert "32 chips" in out
    assert "train=" in out and "excluded=" in out
    assert (root / "chips" / "manifest.json").exists()
    assert (root / "chips" / "effective_config.json").exists()


def test_train_writes_outputs(trained):
    root, _, out = trained
    assert (out / "weights.cbwt").exists()
    assert (out / "effective_config.json").exists()
    report = json.loads((out / "train_report.json").read_text())
    assert report["format_version"] == 1
    assert report["selected_epoch"] >= 1
    assert len(report["epochs"]) == 1


def test_evaluate_writes_metrics(trained, capsys):
    root, config_path, out = trained
    eval_dir = root / "eval"
    code = main([
        "evaluate", "--config", str(config_path),
        "--weights", str(out / "weights.cbwt"), "--out", str(eval_dir),
    ])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "Metric" in stdout and "Accuracy" in stdout
    assert "Training" in stdout and "Testing" in stdout
    payload = json.loads((eval_dir / "metrics.json").read_text())
    assert set(payload) == {"training", "testing"}
    for report in payload.values():
        assert 0.0 <= report["accuracy"] <= 1.0
        assert 0.0 <= report["auc"] <= 1.0
    assert (eval_dir / "metrics.txt").exists()


def test_evaluate_single_split(trained, capsys):
    root, config_path, out = trained
    code = main([
        "evaluate", "--config", str(config_path),
        "--weights", str(out / "weights.cbwt"), "--splits", "test",
    ])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "Testing" in stdout and "Training" not in stdout


def test_predict_writes_chip_and_preview(trained, capsys):
    root, config_path, out = trained
    radar = sorted((root / "chips").glob("*.radar.cbch"))[0]
    pred_dir = root / "preds"
    code = main([
        "predict", "--weights", str(out / "weights.cbwt"),
        "--out", str(pred_dir), "--pgm", str(radar),
    ])
    assert code == 0
    produced = sorted(pred_dir.glob("*.ndwi.cbch"))
    assert len(produced) == 1
    values = read_chip(produced[0])
    assert values.shape == (128, 128, 1)
    assert np.all((values > 0) & (values < 1))
    assert produced[0].with_suffix(".pgm").exists()


def test_otsu_reports_threshold(trained, capsys, tmp_path):
    root, _, _ = trained
    target = sorted((root / "chips").glob("*.ndwi.cbch"))[0]
    mask_path = tmp_path / "mask.cbch"
    code = main(["otsu", str(target), "--mask-out", str(mask_path)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "t_star=" in stdout
    assert "threshold_value=" in stdout
    mask = read_chip(mask_path)
    assert set(np.unique(mask)) <= {0.0, 1.0}


def test_otsu_degenerate_without_mask_fails(tmp_path, capsys):
    chip = tmp_path / "flat.cbch"
    write_chip(chip, np.full((8, 8), 0.25, dtype=np.float32))
    assert main(["otsu", str(chip)]) == 1
    assert "DegenerateHistogramError" in capsys.readouterr().err


def test_otsu_degenerate_with_mask_uses_fallback(tmp_path, capsys):
    chip = tmp_path / "flat.cbch"
    write_chip(chip, np.full((8, 8), 0.25, dtype=np.float32))
    mask_path = tmp_path / "mask.cbch"
    assert main(["otsu", str(chip), "--mask-out", str(mask_path)]) == 0
    stdout = capsys.readouterr().out
    assert "threshold_value=0.500000" in stdout
    assert np.all(read_chip(mask_path) == 0.0)  # 0.25 is not above 0.5


def test_missing_weights_is_a_clean_error(preprocessed, capsys):
    root, config_path = preprocessed
    code = main([
        "evaluate", "--config", str(config_path),
        "--weights", str(root / "nope.cbwt"),
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("FileNotFoundError:")


def test_bad_config_is_a_clean_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["preprocess", "--config", str(bad)]) == 1
    assert capsys.readouterr().err.startswith("ConfigError:")


def test_corrupt_chip_is_a_clean_error(trained, tmp_path, capsys):
    root, _, out = trained
    bad = tmp_path / "bad.radar.cbch"
    bad.write_bytes(b"JUNKJUNKJUNK")
    code = main([
        "predict", "--weights", str(out / "weights.cbwt"),
        "--out", str(tmp_path), str(bad),
    ])
    assert code == 1
    assert capsys.readouterr().err.startswith("FormatError:")


def test_module_entry_point():
    import subprocess
    import sys

    result = subprocess.run(
        [sys.executable, "-m", "sar2ndwi", "--help"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "preprocess" in result.stdout
    assert "predict" in result.stdout
