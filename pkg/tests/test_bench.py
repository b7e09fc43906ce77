import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

import blockcd.bench as bench
from blockcd.cli import main as cli_main
from blockcd.errors import CsvFormatError, TooLarge


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def test_load_matrix_csv(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("1,2\n3,4\n")
    assert np.array_equal(bench.load_matrix_csv(f), [[1.0, 2.0], [3.0, 4.0]])


def test_load_matrix_csv_header_skipped(tmp_path):
    f = tmp_path / "h.csv"
    f.write_text("a,b\n1,2\n")
    assert np.array_equal(bench.load_matrix_csv(f), [[1.0, 2.0]])


def test_load_matrix_csv_errors(tmp_path):
    ragged = tmp_path / "r.csv"
    ragged.write_text("1,2\n3\n")
    with pytest.raises(CsvFormatError, match="row 2"):
        bench.load_matrix_csv(ragged)
    bad = tmp_path / "b.csv"
    bad.write_text("1,2\n3,x\n")
    with pytest.raises(CsvFormatError, match="row 2, col 2"):
        bench.load_matrix_csv(bad)
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(CsvFormatError, match="empty"):
        bench.load_matrix_csv(empty)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def test_gen_randn_deterministic():
    assert np.array_equal(bench.gen_randn(2, 2, 7), bench.gen_randn(2, 2, 7))
    assert not np.array_equal(bench.gen_randn(2, 2, 7), bench.gen_randn(2, 2, 8))


def test_gen_randn_moments():
    M = bench.gen_randn(1000, 1000, 3)
    assert abs(M.mean()) <= 0.01
    assert abs(M.var() - 1.0) <= 0.01


def test_subsample():
    A = bench.gen_randn(5, 6, 1)
    assert np.array_equal(bench.subsample(A, 5, 6, 2), A)
    s1 = bench.subsample(A, 3, 2, 9)
    s2 = bench.subsample(A, 3, 2, 9)
    assert np.array_equal(s1, s2)
    one = bench.subsample(bench.gen_randn(2, 2, 4), 1, 1, 5)
    assert one.shape == (1, 1) and one[0, 0] in bench.gen_randn(2, 2, 4)
    with pytest.raises(TooLarge):
        bench.subsample(A, 6, 6, 0)


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

SPEC_TEMPLATE = """
[experiment]
family = "SIT"
methods = ["bcdg", "psg"]
trials = {trials}
seed = 11
out_dir = "{out}"

[dataset]
kind = "synthetic"
m = 6
n = 4

[grid]
lam = [1.0, 10.0]
s = [2]

[solver]
max_iters = 80
"""


def _write_spec(tmp_path, out, trials=2):
    f = tmp_path / "spec.toml"
    f.write_text(SPEC_TEMPLATE.format(out=out, trials=trials))
    return f


def test_run_experiment_outputs(tmp_path):
    spec = bench.load_spec(_write_spec(tmp_path, tmp_path / "out", trials=2))
    assert bench.run_experiment(spec, reproducible=True) == 0
    out = tmp_path / "out"
    summary = (out / "summary.csv").read_text().strip().split("\n")
    assert summary[0] == ",".join(bench.SUMMARY_COLUMNS)
    # one row per grid cell x method x trial
    assert len(summary) == 1 + 2 * 2 * 2
    for gi in range(2):
        for trial in range(2):
            for method in ("bcdg", "psg"):
                tag = f"{method}_g{gi:03d}_{trial}"
                assert (out / f"trace_{tag}.csv").exists()
                assert (out / f"final_{tag}.csv").exists()
                assert (out / f"meta_{tag}.json").exists()


def test_run_experiment_trace_count_matches_trials(tmp_path):
    f = tmp_path / "spec.toml"
    f.write_text(
        SPEC_TEMPLATE.format(out=tmp_path / "out10", trials=10).replace(
            'lam = [1.0, 10.0]', 'lam = [1.0]'
        ).replace('["bcdg", "psg"]', '["bcdg"]')
    )
    spec = bench.load_spec(f)
    bench.run_experiment(spec, reproducible=True)
    traces = list((tmp_path / "out10").glob("trace_bcdg_g000_*.csv"))
    assert len(traces) == 10


def test_run_experiment_byte_identical(tmp_path):
    spec = bench.load_spec(_write_spec(tmp_path, tmp_path / "o1"))
    bench.run_experiment(spec, reproducible=True)
    spec.out_dir = str(tmp_path / "o2")
    bench.run_experiment(spec, reproducible=True)
    assert (tmp_path / "o1" / "summary.csv").read_bytes() == (
        tmp_path / "o2" / "summary.csv"
    ).read_bytes()


def test_summary_matches_trace_tail_and_feasibility(tmp_path):
    spec = bench.load_spec(_write_spec(tmp_path, tmp_path / "out"))
    bench.run_experiment(spec, reproducible=True)
    out = tmp_path / "out"
    rows = (out / "summary.csv").read_text().strip().split("\n")[1:]
    for row in rows:
        vals = row.split(",")
        method, trial = vals[1], vals[7]
        gi = 0 if vals[2] == "1.0" else 1
        trace = (out / f"trace_{method}_g{gi:03d}_{trial}.csv").read_text().strip().split("\n")
        last = trace[-1].split(",")
        assert vals[8] == last[2]  # final_objective equals last trace row, exactly
        for line in trace[1:]:
            assert float(line.split(",")[4]) <= 1e-8


def test_initial_point_shared_per_cell_and_trial(tmp_path):
    # the x0 stream keys on (seed, grid cell, trial) only, so methods
    # within a cell are paired while trials and cells differ
    import blockcd as bc

    spec = bench.load_spec(_write_spec(tmp_path, tmp_path / "out"))
    A, y = bench._resolve_dataset(spec)
    p = bench._make_instance(spec, A, y, 1.0, 2, 0.0, 1e-4)
    fs = bc.feasible_set_for(p)
    a = bench._initial_point(p, fs, (spec.seed, 0, 0))
    b = bench._initial_point(p, fs, (spec.seed, 0, 0))
    c = bench._initial_point(p, fs, (spec.seed, 0, 1))
    d = bench._initial_point(p, fs, (spec.seed, 1, 0))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert bc.feasibility_residual(fs, a) <= 1e-10
    assert math.isfinite(float(a.sum()))


def test_full_lambda_sweep_shape(tmp_path):
    # five-decade lambda grid x four methods: one summary row per cell per trial
    f = tmp_path / "sweep.toml"
    f.write_text(
        """
[experiment]
family = "SIT"
methods = ["bcdg", "psg", "mscr", "pdca"]
trials = 2
seed = 3
out_dir = "{out}"

[dataset]
kind = "synthetic"
m = 6
n = 4

[grid]
lam = [1.0, 10.0, 100.0, 1000.0, 10000.0]
s = [2]

[solver]
max_iters = 40
""".format(out=tmp_path / "sweep_out")
    )
    spec = bench.load_spec(f)
    bench.run_experiment(spec, reproducible=True)
    rows = (tmp_path / "sweep_out" / "summary.csv").read_text().strip().split("\n")[1:]
    assert len(rows) == 5 * 4 * 2
    lams = sorted({float(r.split(",")[2]) for r in rows})
    assert lams == [1.0, 10.0, 100.0, 1000.0, 10000.0]
    assert {r.split(",")[1] for r in rows} == {"bcdg", "psg", "mscr", "pdca"}


def test_run_experiment_parallel_matches_serial(tmp_path):
    spec = bench.load_spec(_write_spec(tmp_path, tmp_path / "ser"))
    bench.run_experiment(spec, jobs=1, reproducible=True)
    spec.out_dir = str(tmp_path / "par")
    bench.run_experiment(spec, jobs=2, reproducible=True)
    assert (tmp_path / "ser" / "summary.csv").read_bytes() == (
        tmp_path / "par" / "summary.csv"
    ).read_bytes()


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_run_probe_and_identity_check(tmp_path):
    runner = CliRunner()
    spec_file = _write_spec(tmp_path, tmp_path / "cli_out", trials=1)
    res = runner.invoke(cli_main, ["run", str(spec_file), "--reproducible"])
    assert res.exit_code == 0, res.output

    final = tmp_path / "cli_out" / "final_bcdg_g000_0.csv"
    res = runner.invoke(cli_main, ["probe", str(final), "--mode", "exhaustive"])
    assert res.exit_code == 0, res.output
    rep = json.loads(res.output)
    assert set(rep) == {"is_cws", "worst_block", "worst_improvement", "blocks_probed"}
    assert rep["blocks_probed"] == 6

    res = runner.invoke(cli_main, ["probe", str(final), "--mode", "sampled:3"])
    assert json.loads(res.output)["blocks_probed"] == 3

    res = runner.invoke(cli_main, ["verify-lemmas", "--n", "5", "--k", "2", "--trials", "20"])
    assert res.exit_code == 0
    assert json.loads(res.output)["pass"]


def test_cli_run_reports_json_error(tmp_path):
    runner = CliRunner()
    bad = tmp_path / "bad.toml"
    bad.write_text('[experiment]\nfamily = "SIT"\ntrials = 0\n')
    res = runner.invoke(cli_main, ["run", str(bad)])
    assert res.exit_code == 1
    err = json.loads(res.output.strip().split("\n")[-1])
    assert "error" in err


def test_cli_out_env_override(tmp_path, monkeypatch):
    runner = CliRunner()
    spec_file = _write_spec(tmp_path, tmp_path / "ignored", trials=1)
    monkeypatch.setenv("BENCH_OUT", str(tmp_path / "env_out"))
    res = runner.invoke(cli_main, ["run", str(spec_file), "--reproducible"])
    assert res.exit_code == 0
    assert (tmp_path / "env_out" / "summary.csv").exists()
