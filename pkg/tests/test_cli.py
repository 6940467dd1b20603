import csv
import json
import subprocess
import sys

import pytest

from gapriv.cli import run

TINY_TRAINING = ["--count", "120", "--size", "8", "--max-outer", "1", "--k-adv", "1", "--k-priv", "1", "--k-pro", "1",
                 "--pretrain-epochs", "2", "--eval-epochs", "1", "--batch-size", "32"]


def results(out):
    return json.loads((out / "results.json").read_text())


def files(path):
    return {p.relative_to(path) for p in path.rglob("*") if p.is_file()}


def test_ratio_experiment_three_rows(tmp_path):
    out = tmp_path / "ratio"
    assert run(["ratio-experiment", "--n", "4", "--m", "10,100,1000", "--trials", "100", "--seed", "1",
                "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "ratio.csv")))
    assert len(rows) == 3
    assert [r["m"] for r in rows] == ["10", "100", "1000"]
    doc = results(out)
    assert set(doc) == {"config", "results", "timing"}


def test_compare_greedy_below_brute(tmp_path):
    out = tmp_path / "cmp"
    assert run(["compare", "--toy", "m=100,n=5", "--alpha", "0.3", "--seed", "2", "--out", str(out)]) == 0
    res = results(out)["results"]
    assert res["greedy"]["utility"] <= res["brute"]["utility"] + 1e-9
    assert res["greedy_le_brute"] is True
    assert res["greedy"]["cost"] <= res["budget"] and res["brute"]["cost"] <= res["budget"]


def test_grad_check_conv_small(tmp_path, capsys):
    assert run(["grad-check", "--preset", "conv-small", "--out", str(tmp_path)]) == 0
    line = capsys.readouterr().out.splitlines()[0]
    assert line.startswith("conv-small: max relative error")
    assert float(line.rsplit(" ", 1)[1]) < 1e-4


def test_grad_check_failure_exit_code(tmp_path):
    # a huge step makes the finite differences meaningless
    assert run(["grad-check", "--preset", "dense-relu", "--eps", "10", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv", [[], ["nonsense"], ["greedy", "--alpha", "x"], ["greedy"],
                                  ["grad-check", "--preset", "nope"]])
def test_usage_errors_exit_1(tmp_path, argv):
    assert run(argv + (["--out", str(tmp_path)] if argv else [])) == 1


def test_runtime_error_exit_2(tmp_path):
    assert run(["greedy", "--csv", str(tmp_path / "missing.csv"), "--schema", "beijing",
                "--out", str(tmp_path / "o")]) == 2


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("unknown_key = 3\n")
    assert run(["gen-toy", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert run(["gen-toy", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path / "o")]) == 1


def test_config_values_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("m = 7\nn = 3\n")
    out = tmp_path / "a"
    assert run(["gen-toy", "--config", str(cfg), "--n", "2", "--out", str(out)]) == 0
    res = results(out)["results"]
    assert (res["m"], res["n"]) == (7, 2)


def test_manifest_reproduces_run(tmp_path):
    first = tmp_path / "first"
    assert run(["report", "--toy", "m=60,n=5", "--n-remove", "2", "--seed", "3", "--out", str(first)]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["seed"] == 3 and "numpy" in manifest["versions"]
    second = tmp_path / "second"
    assert run(["report", "--config", str(first / "config.cfg"), "--out", str(second)]) == 0
    assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()
    assert len(results(first)["results"]["removal_order"]) == 2


def test_csv_source_and_outputs_stay_in_out_dir(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("a,b,c,y\n" + "".join(f"{i % 7},{(i * 3) % 5},{i % 2},{i % 7 + (i % 2)}\n" for i in range(30)))
    schema = tmp_path / "schema.cfg"
    schema.write_text("features = a, b, c\nlabels = y\nrole.y = private\n")
    out = tmp_path / "run" / "out"
    before = files(tmp_path)
    assert run(["privatize-linear", "--csv", str(data), "--schema", str(schema), "--alpha", "0.4",
                "--out", str(out)]) == 0
    new = files(tmp_path) - before
    assert new and all(str(p).startswith("run/out/") for p in new)
    rows = list(csv.reader(open(out / "privatized.csv")))
    assert rows[0] == ["a", "b", "c", "y"] and len(rows) == 31


def test_out_defaults_to_env_root(tmp_path, monkeypatch):
    monkeypatch.setenv("GAPRIV_OUT", str(tmp_path / "root"))
    assert run(["gen-toy", "--m", "5", "--n", "2"]) == 0
    assert (tmp_path / "root" / "gen-toy" / "toy.csv").is_file()


def test_image_pipeline(tmp_path):
    gen = tmp_path / "gen"
    assert run(["gen-images", "--count", "40", "--size", "8", "--out", str(gen)]) == 0
    assert (gen / "images.npz").is_file()

    mm = tmp_path / "mm"
    assert run(["maximin", *TINY_TRAINING, "--out", str(mm)]) == 0
    assert {"history.csv", "privatizer.bin", "adversary.bin", "protected.bin"} <= {p.name for p in mm.iterdir()}

    ev = tmp_path / "ev"
    assert run(["evaluate", *TINY_TRAINING, "--from", str(mm), "--out", str(ev)]) == 0
    res = results(ev)["results"]
    assert res["test_max_noise_sq"] <= 4.0 + 1e-9
    assert {r["model"] for r in res["accuracy"]} >= {"reference", "fixed", "public", "protected"}


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gapriv", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gapriv" in proc.stdout
