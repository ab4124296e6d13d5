import json

import numpy as np
import pandas as pd
import pytest

from rangevol.cli import build_parser, main
from rangevol.io import read_estimates, read_frame, read_range_series


@pytest.fixture(scope="module")
def table_csv(small_table, tmp_path_factory):
    path = tmp_path_factory.mktemp("tbl") / "lambda.csv"
    small_table.to_csv(path)
    return str(path)


@pytest.fixture(scope="module")
def pipeline(table_csv, tmp_path_factory):
    """simulate -> estimate for 40 SV days, shared by several tests."""
    d = tmp_path_factory.mktemp("pipe")
    files = {k: str(d / f"{k}.csv") for k in ("ranges", "returns", "truth", "rrv", "rv")}
    assert main(["simulate", "--seed", "5", "--mn", "200", "--n", "20", "--days", "40", "--persistent",
                 "--out", files["ranges"], "--returns-out", files["returns"], "--truth-out", files["truth"],
                 "--quiet"]) == 0
    assert main(["estimate", "--input", files["ranges"], "--estimator", "rrv", "--out", files["rrv"],
                 "--table", table_csv, "--quiet"]) == 0
    assert main(["estimate", "--input", files["returns"], "--estimator", "rv", "--out", files["rv"],
                 "--table", table_csv, "--quiet"]) == 0
    return files


def strip_stamp(path):
    return [line for line in open(path).read().splitlines() if not line.startswith("# created_at=")]


def test_lambda_m1(capsys):
    assert main(["lambda", "--r", "2", "--m", "1"]) == 0
    assert float(capsys.readouterr().out.strip().splitlines()[-1].split(",")[-1]) == 1.0


def test_lambda_inf(capsys):
    assert main(["lambda", "--r", "2", "--m", "inf"]) == 0
    assert str(round(4 * np.log(2), 6))[:6] in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main(["estimate", "--bogus"]) == 2
    assert main([]) == 2
    assert main(["lambda", "--m", "zero"]) == 2
    assert main(["lambda", "--workers", "0"]) == 2


def test_empty_input_exit_3(tmp_path):
    src = tmp_path / "empty.csv"
    src.write_text("")
    out = tmp_path / "est.csv"
    assert main(["estimate", "--input", str(src), "--out", str(out)]) == 3
    assert not out.exists()


def test_missing_input_exit_3(tmp_path):
    assert main(["estimate", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o.csv")]) == 3


def test_missing_output_dir_exit_3(pipeline, tmp_path):
    assert main(["estimate", "--input", pipeline["ranges"], "--out", str(tmp_path / "no" / "o.csv")]) == 3


def test_refuses_to_overwrite_input(pipeline):
    before = open(pipeline["ranges"]).read()
    assert main(["estimate", "--input", pipeline["ranges"], "--out", pipeline["ranges"]]) != 0
    assert open(pipeline["ranges"]).read() == before


def test_estimates_cover_truth(pipeline):
    est = read_estimates(pipeline["rrv"])
    truth = read_frame(pipeline["truth"], dtype={"day_id": str})
    assert len(est) == 40
    assert np.all(est["ci_low"] <= est["point"]) and np.all(est["point"] <= est["ci_high"])
    merged = est.merge(truth, on="day_id")
    inside = (merged["ci_low"] <= merged["true_iv"]) & (merged["true_iv"] <= merged["ci_high"])
    assert inside.mean() >= 0.8


def test_simulated_series_shape(pipeline):
    days = read_range_series(pipeline["ranges"])
    assert len(days) == 40 and all(d.n == 20 for d in days)
    assert all(np.all(d.counts == 10) for d in days)


def test_reproducible_outputs(tmp_path, table_csv):
    def run(tag):
        out = tmp_path / f"{tag}.csv"
        assert main(["simulate", "--seed", "9", "--mn", "50", "--n", "5", "--days", "4", "--out", str(out), "--quiet"]) == 0
        return strip_stamp(out)

    a, b = run("a"), run("b")
    assert a == b
    assert a[0].startswith("# range-vol version=") and "seed=9" in a[0]


def test_inputs_not_mutated(pipeline, tmp_path, table_csv):
    before = open(pipeline["ranges"], "rb").read()
    assert main(["estimate", "--input", pipeline["ranges"], "--out", str(tmp_path / "e.csv"),
                 "--table", table_csv, "--quiet"]) == 0
    assert open(pipeline["ranges"], "rb").read() == before


def test_config_precedence(tmp_path, table_csv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "simulate": {"n": 4, "mn": 40, "days": 2}}))
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", str(cfg), "--days", "3", "--out", str(out), "--quiet"]) == 0
    days = read_range_series(out)
    assert len(days) == 3 and days[0].n == 4
    assert "seed=3" in open(out).readline()


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert main(["lambda", "--config", str(cfg)]) == 2


def test_estimate_modes_agree_for_regular_grid(pipeline, tmp_path, table_csv):
    outs = {}
    for mode in ("per-interval", "homogeneous"):
        outs[mode] = tmp_path / f"{mode}.csv"
        assert main(["estimate", "--input", pipeline["ranges"], "--mode", mode, "--out", str(outs[mode]),
                     "--table", table_csv, "--quiet"]) == 0
    a, b = (read_estimates(p) for p in outs.values())
    np.testing.assert_allclose(a["point"], b["point"], rtol=1e-12)
    np.testing.assert_allclose(a["ci_high"], b["ci_high"], rtol=1e-10)


def test_summarize_and_acf(pipeline, tmp_path, capsys):
    out = tmp_path / "sum.csv"
    assert main(["summarize", "--input", pipeline["rrv"], pipeline["rv"], "--out", str(out), "--quiet"]) == 0
    s = read_frame(out)
    stats = s.set_index("statistic")
    assert 0.5 < float(stats.loc["correlation_rrv:rv"].iloc[0]) <= 1.0
    acf_out = tmp_path / "acf.csv"
    assert main(["acf", "--input", pipeline["rrv"], "--column", "rrv", "--max-lag", "10", "--out", str(acf_out)]) == 0
    a = read_frame(acf_out)
    assert len(a) == 10 and np.all(np.abs(a["acf"]) <= 1)


def test_acf_too_many_lags(pipeline, tmp_path):
    assert main(["acf", "--input", pipeline["rrv"], "--max-lag", "500", "--out", str(tmp_path / "a.csv")]) == 4


class TestPlot:
    def test_bands(self, pipeline, tmp_path):
        out = tmp_path / "bands.csv"
        assert main(["plot", "--kind", "bands", "--input", pipeline["rrv"], "--out", str(out), "--svg"]) == 0
        f = read_frame(out)
        assert np.all(f["ci_low"] <= f["point"]) and np.all(f["point"] <= f["ci_high"])
        assert (tmp_path / "bands.svg").read_text().startswith("<svg")

    def test_lambda_curve_monotone(self, tmp_path, table_csv):
        out = tmp_path / "lc.csv"
        assert main(["plot", "--kind", "lambda_curve", "--table", table_csv, "--out", str(out)]) == 0
        f = read_frame(out)
        # adjacent large-m entries of the small test table differ by less than their MC error
        assert np.all(np.diff(f["lambda_2"].iloc[:6]) > 0)
        assert np.all(f["lambda_2"] < f["limit"])

    def test_needs_input(self, tmp_path):
        assert main(["plot", "--kind", "bands", "--out", str(tmp_path / "x.csv")]) == 2


def test_coverage_and_efficiency(tmp_path, table_csv):
    out, ts, dens = tmp_path / "cov.csv", tmp_path / "t.csv", tmp_path / "d.csv"
    assert main(["coverage", "--grid", "10:4", "--reps", "300", "--transforms", "raw,log", "--out", str(out),
                 "--tstats-out", str(ts), "--density-out", str(dens), "--table", table_csv, "--quiet"]) == 0
    rep = read_frame(out)
    assert set(rep["transform"]) == {"raw", "log"}
    assert len(read_frame(ts)) == 600
    assert (tmp_path / "d.svg").exists()
    eff = tmp_path / "eff.csv"
    assert main(["efficiency", "--m-list", "1,4", "--n", "10", "--reps", "300", "--out", str(eff),
                 "--table", table_csv, "--quiet"]) == 0
    e = read_frame(eff)
    assert e.loc[e["m"] == 1, "ratio"].iloc[0] == pytest.approx(1.0)


def test_every_subcommand_has_help():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    assert set(sub.choices) == {"lambda", "lambda-table", "simulate", "ingest", "estimate", "coverage",
                                "efficiency", "summarize", "acf", "plot"}


def test_ingest_roundtrip(tmp_path):
    ticks, ranges, report = tmp_path / "ticks.csv", tmp_path / "r.csv", tmp_path / "rep.csv"
    assert main(["simulate", "--seed", "2", "--mn", "390", "--n", "13", "--days", "3", "--ticks-out", str(ticks),
                 "--tick-rate", "500", "--bounce-prob", "0.1", "--repeat-prob", "0.1", "--quiet"]) == 0
    assert main(["ingest", "--input", str(ticks), "--n", "13", "--out", str(ranges), "--report", str(report),
                 "--quiet"]) == 0
    days = read_range_series(ranges)
    assert len(days) == 3 and all(d.n == 13 for d in days)
    rep = pd.read_csv(report, comment="#")
    assert len(rep) == 3
