"""Harness and command-line behaviour on a shrunken benchmark."""

import csv

import numpy as np
import pytest

from lowres import experiments
from lowres.cli import run
from lowres.config import load_config
from lowres.experiments import RunRow, improvement_rows

SMALL = ["--set", "data.test_size=300", "--set", "data.pool_size=40",
         "--set", "optim.max_epochs=12", "--set", "fogip.n=2"]


def small_cfg(**extra):
    pairs = {"data.test_size": "300", "data.pool_size": "40", "optim.max_epochs": "12",
             "fogip.n": "2", "repetitions": "1"}
    pairs.update({k.replace("__", "."): str(v) for k, v in extra.items()})
    return load_config(None, pairs)


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cli(tmp_path, command, *args, name="out"):
    out = tmp_path / name
    code = run([command, "--out", str(out), "-R", "2", *SMALL, *args])
    return code, out


# -- compare-criteria ------------------------------------------------------------

def test_compare_criteria_rows():
    table = experiments.compare_criteria(small_cfg())
    keys = [(s.criterion, s.trn_val) for s in table.rows]
    assert keys == [("val", "25:75"), ("val", "50:50"), ("val", "75:25"), ("pe", "100:0"), ("eb", "100:0")]
    assert all(s.runs == 1 and all(v == 0 for v in s.std.values()) for s in table.rows)


def test_compare_criteria_byte_identical(tmp_path):
    c1, a = cli(tmp_path, "compare-criteria", name="a")
    c2, b = cli(tmp_path, "compare-criteria", name="b")
    assert c1 == c2 == 0
    for f in ("summary.csv", "runs.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_summary_recomputable_from_runs(tmp_path):
    code, out = cli(tmp_path, "compare-criteria")
    assert code == 0
    runs = read(out / "runs.csv")
    for s in read(out / "summary.csv"):
        rows = [r for r in runs if (r["criterion"], r["trn_val"]) == (s["criterion"], s["trn_val"])]
        acc = [float(r["accuracy"]) for r in rows]
        assert s["accuracy_mean"] == f"{100 * np.mean(acc):.1f}"
        assert s["accuracy_std"] == f"{100 * np.std(acc, ddof=1):.1f}"
        assert s["ece_mean"] == f"{np.mean([float(r['ece']) for r in rows]):.3f}"
        assert int(s["runs"]) == len(rows) == 2


def test_parallel_matches_serial():
    cfg = small_cfg(repetitions=2)
    serial = experiments.compare_criteria(cfg)
    parallel = experiments.compare_criteria(small_cfg(repetitions=2, jobs=2))
    assert [r.accuracy for r in serial.runs] == [r.accuracy for r in parallel.runs]


# -- fogip-compare ----------------------------------------------------------------

def _row(rep, init, crit, acc):
    return RunRow(rep, init, crit, "100:0", "", acc, 0.5, 0.1, 0.05, 10.0)


def test_improvement_row_arithmetic():
    runs = [_row(0, "normal", "pe", 0.80), _row(1, "normal", "pe", 0.70),
            _row(0, "fogip", "pe", 0.83), _row(1, "fogip", "pe", 0.72)]
    (imp,) = improvement_rows(runs)
    assert imp.init == "improvement" and imp.mean["accuracy"] == pytest.approx(0.025)
    assert imp.std["accuracy"] == pytest.approx(np.std([0.03, 0.02], ddof=1))


def test_fogip_compare_rows():
    table = experiments.fogip_compare(small_cfg())
    inits = {s.init for s in table.rows}
    assert inits == {"normal", "fogip", "improvement"}
    imp = table.get("improvement", "pe")
    assert imp.mean["accuracy"] == pytest.approx(
        table.get("fogip", "pe").mean["accuracy"] - table.get("normal", "pe").mean["accuracy"])


def test_fogip_single_candidate_equals_normal():
    table = experiments.fogip_compare(small_cfg(fogip__n=1))
    for crit in ("pe", "eb"):
        assert table.get("improvement", crit).mean["accuracy"] == 0.0


# -- hyper-grid -----------------------------------------------------------------

def test_single_point_grid_tuned_is_that_point():
    cfg = small_cfg(grid__learning_rate=0.02, grid__dropout=0.3, grid__batch_size=8)
    table = experiments.hyper_grid(cfg)
    tuned = [r for r in table.runs if r.variant == "tuned"][0]
    assert (tuned.extra["learning_rate"], tuned.extra["dropout"], tuned.extra["batch_size"]) == (0.02, 0.3, 8)
    default = [r for r in table.runs if r.variant == "default"][0]
    assert default.extra["learning_rate"] == cfg.optim.learning_rate


# -- stop-analysis ---------------------------------------------------------------

def test_stop_analysis_outputs(tmp_path):
    code, out = cli(tmp_path, "stop-analysis")
    assert code == 0
    assert (out / "histogram_pe.csv").exists() and (out / "histogram_eb.csv").exists()
    for r in range(2):
        trace = read(out / f"trace_{r}.csv")
        assert len(trace) == 12
        runs = [x for x in read(out / "runs.csv") if x["rep"] == str(r)]
        best = next(x for x in runs if x["criterion"] == "best_test")
        losses = [float(t["test_loss"]) for t in trace]
        assert int(float(best["stop_epoch"])) == int(np.argmin(losses)) + 1
    hist = read(out / "histogram_eb.csv")
    assert len(hist) == 2 * 10


# -- size-sweep ------------------------------------------------------------------

def test_size_sweep_fractions_sorted():
    cfg = small_cfg(sweep__fractions="0.2, 0.1", sweep__dropouts="0.1", data__pool_size=100)
    table = experiments.size_sweep(cfg)
    fracs = [r.extra["fraction"] for r in table.runs]
    assert fracs == sorted(fracs)
    sizes = {r.extra["fraction"]: r.extra["pool_size"] for r in table.runs}
    assert sizes[0.1] < sizes[0.2]


# -- pe-estimate and train ------------------------------------------------------

def test_pe_estimate_cli(tmp_path):
    code, out = cli(tmp_path, "pe-estimate")
    assert code == 0
    rows = read(out / "runs.csv")
    for r in rows:
        folds = [int(e) for e in r["fold_stop_epochs"].split(";")]
        assert len(folds) == 4 and 1 <= int(r["pe_stop_epoch"]) <= 12


@pytest.mark.parametrize("crit,trn_val", [("val", "75:25"), ("eb", "100:0"), ("fixed", "100:0"),
                                          ("pe", "100:0")])
def test_train_cli(tmp_path, crit, trn_val):
    code, out = cli(tmp_path, "train", "--set", f"stopping.criterion={crit}",
                    "--set", f"stopping.trn_val={trn_val}")
    assert code == 0
    assert (out / "trace_0.csv").exists()
    assert {r["criterion"] for r in read(out / "runs.csv")} == {crit}


def test_config_written(tmp_path):
    code, out = cli(tmp_path, "pe-estimate", "--seed", "4")
    assert code == 0 and "seed = 4" in (out / "config.ini").read_text()


# -- exit codes ----------------------------------------------------------------

def test_exit_config(tmp_path):
    assert cli(tmp_path, "train", "--set", "optim.nope=1")[0] == 2


def test_exit_config_file_missing(tmp_path):
    assert cli(tmp_path, "train", "--config", str(tmp_path / "missing.ini"))[0] == 2


def test_exit_data(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,label\n")
    assert cli(tmp_path, "train", "--set", f"data.source={bad}")[0] == 3


def test_exit_run(tmp_path):
    # a 1-sample labeled pool cannot be split into 4 folds
    src = tmp_path / "tiny.csv"
    src.write_text("x,label\n" + "".join(f"{i},{i % 2}\n" for i in range(100)))
    assert cli(tmp_path, "pe-estimate", "--set", f"data.source={src}",
               "--set", "data.label_frac=0.03")[0] == 4


def test_exit_write(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = run(["pe-estimate", "--out", str(blocker / "sub"), "-R", "1", *SMALL])
    assert code == 5
