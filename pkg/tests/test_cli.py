import json
import os
import subprocess
import sys

import pytest

from rvml.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, EXIT_USAGE, main

SMALL_INI = """\
[grid]
x_points = 8
p_max = 6.0
n_p = 13

[physics]
T = 0.2
source = oscillating

[iteration]
dt = 0.05
max_iterations = 4

[output]
directory = {out}
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_INI.format(out=tmp_path / "out"))
    return path


def test_verify_kernel_writes_report(tmp_path):
    out = tmp_path / "kernel.json"
    assert main(["verify", "--suite", "kernel", "--seed", "3", "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["suite"] == "kernel" and report["seed"] == 3
    assert not (tmp_path / "verify-kernel-failures.json").exists()


def test_usage_and_config_errors(tmp_path, capsys):
    assert main(["no-such-command"]) == EXIT_USAGE
    assert main(["verify"]) == EXIT_USAGE
    assert main(["iterate", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    # h = 4/3 exceeds the unit spacing the weight quadrature needs
    assert main(["kernel-table", "--pmax", "8", "--n", "13", "--out", str(tmp_path / "k.csv")]) == EXIT_CONFIG
    bad = tmp_path / "bad.ini"
    bad.write_text("[physics]\nsource = laser\n")
    assert main(["maxwell-run", "--config", str(bad)]) == EXIT_CONFIG


def test_compat_gen_outputs(tmp_path, small_config):
    out = tmp_path / "seq"
    assert main(["compat-gen", "--m", "1", "--config", str(small_config), "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["b_0.npy", "b_1.npy", "e_0.npy", "e_1.npy",
                                                   "f_0.npy", "f_1.npy", "residuals.json"]


def test_compat_gen_flags_odd_preset(tmp_path, small_config):
    out = tmp_path / "odd"
    code = main(["compat-gen", "--preset", "small-odd", "--m", "0", "--config", str(small_config), "--out", str(out)])
    assert code == EXIT_CHECK_FAILED
    manifest = json.loads((out / "compat-gen-failures.json").read_text())
    assert [f["check"] for f in manifest["failures"]] == ["srbc_k0"]


def test_maxwell_run_csv(tmp_path, small_config):
    out = tmp_path / "mx.csv"
    assert main(["maxwell-run", "--config", str(small_config), "--seed", "1", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "# schema_version: 1"
    header = next(line for line in lines if not line.startswith("#"))
    assert header == "t,energy,div_E_residual,div_B_residual"


def test_iterate_is_reproducible(tmp_path, small_config):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["iterate", "--config", str(small_config), "--out", str(a)]) == EXIT_OK
    assert main(["iterate", "--config", str(small_config), "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def _run_verify(tmp_path, threads):
    out = tmp_path / f"ops-{threads}.json"
    env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "rvml.cli", "verify", "--suite", "operators", "--seed", "5",
                    "--out", str(out)], check=True, env=env, capture_output=True)
    return out.read_bytes()


def test_reports_independent_of_thread_count(tmp_path):
    assert _run_verify(tmp_path, 1) == _run_verify(tmp_path, 2)
