import json
import subprocess
import sys

import pytest

from eposet.cli import main


def read_all(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_build_writes_loadable_json(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert main(["build", "--family", "grassmann", "--q", "2", "--n", "4", "--d", "2", "--out", str(out)]) == 0
    assert "level sizes: 1, 15, 35" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["d"] == 2
    rc = main(["verify", "--poset", str(out), "--suite", "spectra", "--out", str(tmp_path / "r")])
    assert rc == 0


@pytest.mark.parametrize("suite", ["spectra", "strips", "regularity", "expansion", "colink"])
def test_verify_each_suite_on_grassmann(tmp_path, suite):
    rc = main([
        "verify", "--family", "grassmann", "--q", "2", "--n", "5", "--d", "3",
        "--suite", suite, "--sets", "3", "--out", str(tmp_path),
    ])
    assert rc == 0
    assert any(tmp_path.iterdir())


def test_verify_perturbed_complete_with_mix(tmp_path, capsys):
    rc = main([
        "verify", "--family", "complete", "--n", "8", "--d", "3", "--rho", "0.05", "--seed", "2",
        "--walk", "mix:[0.5*Nd:k=3,j=1;0.5*I]", "--walk", "N:k=2,j=1", "--suite", "all", "--sets", "3",
        "--out", str(tmp_path),
    ])
    assert rc == 0, capsys.readouterr().out
    header = (tmp_path / "strips.csv").read_text().splitlines()[0]
    assert "schema_version=1" in header and "gamma=" in header and "beta=" in header


def test_reports_are_byte_identical(tmp_path):
    args = ["verify", "--family", "complete", "--n", "7", "--d", "3", "--rho", "0.1", "--seed", "4", "--sets", "2"]
    for fmt in ("csv", "json"):
        a, b = tmp_path / f"a{fmt}", tmp_path / f"b{fmt}"
        assert main(args + ["--format", fmt, "--out", str(a)]) == 0
        assert main(args + ["--format", fmt, "--out", str(b)]) == 0
        assert read_all(a) == read_all(b)


def test_json_report_shape(tmp_path):
    main(["verify", "--family", "grassmann", "--n", "4", "--d", "2", "--suite", "spectra", "--format", "json", "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "spectra.json").read_text())
    assert doc["schema_version"] == 1
    assert {"walk", "strip", "lambda", "closed_form"} <= set(doc["rows"][0])


def test_hard_failure_exit_code(tmp_path, capsys):
    # zero slack and zero tolerance on a perturbed instance cannot contain the spectrum
    rc = main([
        "verify", "--family", "complete", "--n", "7", "--d", "3", "--rho", "0.2",
        "--suite", "strips", "--slack", "0", "--tol", "0", "--out", str(tmp_path),
    ])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        ["build", "--family", "grassmann", "--q", "4", "--n", "3", "--d", "2", "--out", "x.json"],
        ["verify", "--family", "complete", "--n", "6", "--d", "3", "--walk", "N:k=3,j=1"],
        ["verify", "--family", "complete", "--n", "6", "--d", "3", "--walk", "mix:[0.5*N:k=1,j=1]"],
        ["verify", "--family", "complete", "--n", "6", "--d", "3", "--suite", "colink"],
        ["verify", "--n", "6", "--d", "3"],
    ],
)
def test_input_errors_exit_2(tmp_path, argv, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "eposet", "build", "--family", "complete", "--n", "5", "--d", "2", "--out", str(tmp_path / "c.json")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert "R(k,i)" in res.stdout
