import os
import subprocess

import pytest

CLI = os.environ.get("TEXTCAUSAL_CLI", "textcausal")


def run(*args, cwd=None):
    return subprocess.run([CLI, *args], capture_output=True, text=True, cwd=cwd)


def test_usage_errors_exit_2():
    assert run().returncode == 2
    assert run("bogus").returncode == 2
    assert run("estimate", "--method", "magic", "--data", "x").returncode == 2
    assert run("grid", "no_such_key=1").returncode == 2
    assert run("grid", "n=ten").returncode == 2
    assert run("--help").returncode == 0


def test_bad_input_files(tmp_path):
    assert run("estimate", "--method", "ipw", "--data", str(tmp_path / "absent.txt")).returncode == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("not a dataset\n")
    failed = run("estimate", "--method", "ipw", "--data", str(bad))
    assert failed.returncode == 1
    assert failed.stderr


def test_generate_estimate_classify(tmp_path):
    data = tmp_path / "d.txt"
    gen = run("generate", "--tau-word", "0.52", "--delta-word", "0.7", "--n", "1000", "--seed", "3",
              "--out", str(data))
    assert gen.returncode == 0, gen.stderr
    est = run("estimate", "--method", "measurement", "--data", str(data), "--labeled", "200", "--seed", "3")
    assert est.returncode == 0, est.stderr
    header, row = est.stdout.strip().split("\n")
    assert header.startswith("method,dgp,structured_seed")
    fields = row.split(",")
    assert fields[0] == "measurement"
    assert abs(abs(float(fields[9]) - float(fields[10])) - float(fields[11])) < 1e-9
    cls = run("classify", "--data", str(data), "--seed", "3")
    assert cls.returncode == 0, cls.stderr
    values = dict(line.split(" = ") for line in cls.stdout.strip().split("\n"))
    assert float(values["accuracy"]) > 0.9


def test_grid_then_report(tmp_path):
    out = tmp_path / "grid"
    args = ["dgp=trivial", "cells=0.52:0.7", "structured_seeds=0", "text_seeds=0", "n=600",
            "methods=oracle,naive", "--output", str(out)]
    first = run("grid", *args)
    assert first.returncode == 0, first.stderr
    table = (out / "report" / "table_errors.csv").read_text()
    again = run("report", *args)
    assert again.returncode == 0, again.stderr
    assert (out / "report" / "table_errors.csv").read_text() == table
    assert first.stdout == again.stdout
    missing = run("report", "dgp=trivial", "cells=0.1:0.1", "n=600", "--output", str(tmp_path / "empty"))
    assert missing.returncode != 0
