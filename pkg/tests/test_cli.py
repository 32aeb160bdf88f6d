import os

import numpy as np
import pytest

from resalane.cli import main
from resalane.benchmark import read_bench_csv


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Datasets plus one trained run, shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    train_dir = root / "train"
    val_dir = root / "val"
    assert main(["gen", "--out", str(train_dir), "--count", "8",
                 "--difficulty", "crowded", "--seed", "10",
                 "--height", "16", "--width", "32", "--max-lanes", "3"]) == 0
    assert main(["gen", "--out", str(val_dir), "--count", "4",
                 "--difficulty", "crowded", "--seed", "99",
                 "--height", "16", "--width", "32", "--max-lanes", "3"]) == 0

    config = root / "config.txt"
    config.write_text("\n".join([
        "image_height=16",
        "image_width=32",
        "channels=4,8,16",
        "use_resa=true",
        "resa_iterations=2",
        "resa_kernel_width=3",
        "num_lanes=3",
        "precision=f64",
        "total_iters=12",
        "warmup_iters=2",
        "base_lr=0.05",
        "batch_size=2",
        "log_every=5",
        f"train_dir={train_dir}",
    ]) + "\n")

    run_dir = root / "run"
    assert main(["train", "--config", str(config), "--out", str(run_dir)]) == 0
    return {"root": root, "train": train_dir, "val": val_dir,
            "config": config, "run": run_dir}


def test_gen_layout(workspace):
    train = workspace["train"]
    assert (train / "manifest.txt").is_file()
    images = sorted(os.listdir(train / "images"))
    labels = sorted(os.listdir(train / "labels"))
    assert len(images) == 8
    assert images[0].startswith("crowded_000010")
    assert len(labels) == 8
    assert labels[0].endswith(".lines.txt")


def test_train_outputs(workspace, capsys):
    run = workspace["run"]
    assert (run / "config.resolved").is_file()
    assert (run / "checkpoints" / "final.rten").is_file()
    loss_csv = (run / "logs" / "loss.csv").read_text().splitlines()
    assert loss_csv[0] == "iter,lr,loss"
    assert len(loss_csv) == 1 + 12
    resolved = (run / "config.resolved").read_text()
    assert "image_height=16" in resolved
    assert "use_resa=true" in resolved


def test_eval_with_discovered_config(workspace, capsys, tmp_path):
    ckpt = workspace["run"] / "checkpoints" / "final.rten"
    out_dir = tmp_path / "report"
    code = main(["eval", "--checkpoint", str(ckpt),
                 "--data", str(workspace["val"]), "--out", str(out_dir)])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.startswith("metric: culane_f1")
    assert "precision" in captured.out
    assert (out_dir / "report.txt").is_file()
    kv = (out_dir / "report.kv").read_text()
    assert kv.startswith("metric=culane_f1")


def test_eval_tusimple_metric(workspace, capsys):
    ckpt = workspace["run"] / "checkpoints" / "final.rten"
    code = main(["eval", "--checkpoint", str(ckpt), "--data",
                 str(workspace["val"]), "--metric", "tusimple",
                 "--config", str(workspace["run"] / "config.resolved")])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.startswith("metric: tusimple_accuracy")
    assert "accuracy" in captured.out


def test_infer_writes_overlay(workspace, capsys, tmp_path):
    ckpt = workspace["run"] / "checkpoints" / "final.rten"
    val_images = sorted(os.listdir(workspace["val"] / "images"))
    src = workspace["val"] / "images" / val_images[0]
    out = tmp_path / "overlay.png"
    code = main(["infer", "--checkpoint", str(ckpt), "--image", str(src),
                 "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert out.is_file()
    assert "lanes ->" in captured.out
    from resalane.data import load_image_png
    overlay = load_image_png(out)
    assert overlay.shape == (3, 16, 32)


def test_infer_rejects_wrong_image_size(workspace, tmp_path, capsys):
    from resalane.data import save_image_png
    bad = tmp_path / "bad.png"
    save_image_png(bad, np.zeros((3, 8, 8), dtype=np.float32))
    ckpt = workspace["run"] / "checkpoints" / "final.rten"
    code = main(["infer", "--checkpoint", str(ckpt), "--image", str(bad),
                 "--out", str(tmp_path / "o.png")])
    captured = capsys.readouterr()
    assert code == 2
    assert "error:" in captured.err


def test_gradcheck_scope_runs(capsys):
    assert main(["gradcheck", "--scope", "resa"]) == 0
    captured = capsys.readouterr()
    assert "checks passed" in captured.out
    assert "FAIL" not in captured.out


def test_gradcheck_failure_exit_code(monkeypatch, capsys):
    from resalane import gradcheck as gc
    monkeypatch.setattr(
        gc, "run_checks",
        lambda scope, seed=0: [gc.CheckResult("forced.failure", 1.0, 1e-5)])
    assert main(["gradcheck", "--scope", "resa"]) == 3
    captured = capsys.readouterr()
    assert "FAIL" in captured.out


def test_inspect_prints_strides_and_writes_grid(tmp_path, capsys):
    out = tmp_path / "grid.png"
    code = main(["inspect", "--axis", "h", "--L", "8", "--K", "3",
                 "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.splitlines()[0] == "strides: 1 2 4"
    from PIL import Image
    with Image.open(out) as img:
        w, h = img.size
    assert (w, h) == (8 * 18 + 2, 3 * 18 + 2)


def test_bench_table_and_csv(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code = main(["bench", "--widths", "3", "--sizes", "4x6", "--channels", "2",
                 "--iterations", "1", "--directions", "dr", "--warmup", "5",
                 "--repeats", "30", "--threads", "1", "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.splitlines()[0].split()[0] == "method"
    rows = read_bench_csv(out)
    assert [r.method for r in rows] == ["resa", "scnn_seq"]
    assert rows[0].passes == 2  # 1 iteration x 2 directions
    assert rows[1].passes == (4 - 1) + (6 - 1)


def test_usage_errors_exit_1(capsys):
    for argv in ([], ["gen"], ["nonsense"], ["train", "--config"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1, argv
        capsys.readouterr()


def test_data_errors_exit_2(tmp_path, capsys):
    code = main(["train", "--config", str(tmp_path / "missing.txt"),
                 "--out", str(tmp_path / "run")])
    assert code == 2
    assert "error:" in capsys.readouterr().err

    code = main(["bench", "--widths", "3", "--sizes", "8", "--channels", "2",
                 "--iterations", "1", "--repeats", "10"])
    assert code == 2
    assert "error:" in capsys.readouterr().err

    code = main(["bench", "--widths", "3", "--sizes", "axb", "--channels", "2",
                 "--iterations", "1"])
    assert code == 2
    assert "bad size list" in capsys.readouterr().err


def test_eval_without_config_discovery_fails_cleanly(tmp_path, capsys):
    # checkpoint in a bare directory: no config.resolved anywhere nearby
    from resalane.rten import save_archive
    ckpt = tmp_path / "final.rten"
    save_archive(ckpt, {"w": np.zeros(1, dtype=np.float32)})
    code = main(["eval", "--checkpoint", str(ckpt), "--data", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 2
    assert "config.resolved" in captured.err
