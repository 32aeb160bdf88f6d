import numpy as np
import pytest

from resalane.benchmark import (
    CSV_COLUMNS,
    BenchResult,
    format_bench_table,
    read_bench_csv,
    resa_flops,
    run_bench,
    scnn_flops,
    scnn_step_count,
    write_bench_csv,
)
from resalane.resa import ResaConfig, resa_pass_count


def test_pass_counter_is_iterations_times_directions():
    assert resa_pass_count(ResaConfig(iterations=4, kernel_width=9)) == 16
    assert resa_pass_count(ResaConfig(iterations=3, kernel_width=3,
                                      directions="du")) == 6
    assert resa_pass_count(ResaConfig(iterations=1, kernel_width=1,
                                      directions="r")) == 1


def test_sequential_step_counter():
    cfg = ResaConfig(iterations=4, kernel_width=9, directions="dulr")
    # vertical sweeps cost H-1 each, horizontal sweeps W-1 each
    assert scnn_step_count(cfg, 36, 100) == 2 * 35 + 2 * 99
    cfg2 = ResaConfig(iterations=4, kernel_width=9, directions="dr")
    assert scnn_step_count(cfg2, 36, 100) == 35 + 99


def test_flop_models():
    cfg = ResaConfig(iterations=4, kernel_width=9, directions="dulr")
    c, h, w = 128, 36, 100
    per_pass = 2.0 * c * c * 9 * h * w
    assert resa_flops(cfg, c, h, w) == per_pass * 16
    expected_scnn = (2 * (2.0 * c * c * 9 * w * (h - 1))
                     + 2 * (2.0 * c * c * 9 * h * (w - 1)))
    assert scnn_flops(cfg, c, h, w) == expected_scnn
    # aggregation does strictly more arithmetic per direction set
    assert resa_flops(cfg, c, h, w) > scnn_flops(cfg, c, h, w)


def test_run_bench_enforces_measurement_floor():
    with pytest.raises(ValueError):
        run_bench(4, 8, 8, kernel_width=3, iterations=1, warmup=4, repeats=30)
    with pytest.raises(ValueError):
        run_bench(4, 8, 8, kernel_width=3, iterations=1, warmup=5, repeats=29)


def test_run_bench_rejects_unknown_method():
    with pytest.raises(ValueError):
        run_bench(2, 8, 8, kernel_width=3, iterations=1, methods=("fastest",))


def test_run_bench_smoke_counts_and_flops():
    results = run_bench(2, 8, 8, kernel_width=3, iterations=2, directions="dr",
                        warmup=5, repeats=30, threads=1, seed=0)
    byname = {r.method: r for r in results}
    assert set(byname) == {"resa", "scnn_seq"}
    cfg = ResaConfig(iterations=2, kernel_width=3, directions="dr")
    assert byname["resa"].passes == resa_pass_count(cfg) == 4
    assert byname["scnn_seq"].passes == scnn_step_count(cfg, 8, 8) == 14
    assert byname["resa"].flops == resa_flops(cfg, 2, 8, 8)
    assert byname["scnn_seq"].flops == scnn_flops(cfg, 2, 8, 8)
    for r in results:
        assert r.median_ms > 0.0
        assert r.iqr_ms >= 0.0
        assert (r.C, r.H, r.W, r.width) == (2, 8, 8, 3)


def test_csv_round_trip(tmp_path):
    rows = [
        BenchResult("resa", 9, 128, 36, 100, 16, 108.625, 1.5, 4.8e9),
        BenchResult("scnn_seq", 9, 128, 36, 100, 268, 40.25, 0.75, 1.2e9),
    ]
    path = tmp_path / "bench.csv"
    write_bench_csv(rows, path)
    loaded = read_bench_csv(path)
    assert loaded == rows
    header = path.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


def test_csv_rejects_unexpected_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("method,width\nresa,9\n")
    with pytest.raises(ValueError):
        read_bench_csv(path)


def test_format_table_lists_all_rows():
    rows = [BenchResult("resa", 9, 4, 8, 8, 16, 1.0, 0.1, 1e6)]
    table = format_bench_table(rows)
    lines = table.splitlines()
    assert lines[0].split()[:2] == ["method", "w"]
    assert "resa" in lines[2]
