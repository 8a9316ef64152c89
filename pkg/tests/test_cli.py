import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import synthetic
from stagflat.cli import main
from stagflat.field import load_grid


def run(*argv):
    return main([str(a) for a in argv])


def test_synth_round_trip(tmp_path):
    assert run("synth", "--profile", "degenerate-N", "--N", 2, "--out", tmp_path) == 0
    g = load_grid(tmp_path / "degenerate-N-2.grid")
    f = synthetic("degenerate-N", 2)
    w = g.window
    xs = np.linspace(w.xmin, w.xmax, 201)[5:-5:7]
    ys = np.linspace(w.ymin, w.ymax, 201)[5:-5:7]
    X, Y = np.meshgrid(xs, ys)
    assert np.max(np.abs(g.values(X, Y) - f.values(X, Y))) <= 1e-6
    # between nodes, away from the nodal rays where the profile is a polynomial
    X, Y = np.meshgrid(np.linspace(1.3, 1.5, 9), np.linspace(0.05, 0.15, 9))
    assert np.max(np.abs(g.values(X, Y) - f.values(X, Y))) <= 1e-6


def test_synth_zero(tmp_path):
    assert run("synth", "--profile", "zero", "--out", tmp_path) == 0
    rows = (tmp_path / "zero.grid").read_text().splitlines()[1:]
    assert all(float(v) == 0.0 for row in rows for v in row.split())


@pytest.mark.parametrize("x0", ["-1", "0"])
def test_synth_bad_x0(tmp_path, x0):
    assert run("synth", "--x0", x0, "--out", tmp_path) == 2


def test_bad_config_values(tmp_path):
    assert run("analyze", "--profile", "nope", "--out", tmp_path) == 2
    assert run("verify", "--tol", "-1", "--out", tmp_path) == 2
    assert run("analyze", "--format", "pdf", "--out", tmp_path) == 2
    assert run("analyze", "--config", tmp_path / "missing.ini") == 2
    assert run("analyze", "--grid", tmp_path / "missing.grid") == 2


def test_analyze_degenerate(tmp_path, capsys):
    assert run("analyze", "--profile", "degenerate-N", "--N", 2, "--out", tmp_path) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "profile.csv").read_text())))
    assert len(rows) == 40
    H = [float(r["H"]) for r in rows]
    assert abs(H[-1] - 2) <= 0.05
    for name in ("profile.json", "Phi.svg", "D.svg", "V.svg", "H.svg"):
        assert (tmp_path / name).is_file()
    assert (tmp_path / "H.svg").read_text().startswith("<svg")
    assert "H(0+)" in capsys.readouterr().out


def test_analyze_zero_field(tmp_path, caplog):
    assert run("analyze", "--profile", "zero", "--radii", 6, "--format", "csv",
               "--out", tmp_path) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "profile.csv").read_text())))
    assert all("degenerate-denominator" in r["diagnostics"] for r in rows)
    assert any("diagnostics" in m for m in caplog.messages)


def test_verify_x2(tmp_path):
    assert run("verify", "--profile", "weighted-harmonic-x2", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["failures"] == 0
    assert {c["name"] for c in doc["checks"]} >= {"energy", "rellich", "weiss-derivative"}


def test_verify_impossible_tolerance(tmp_path):
    assert run("verify", "--profile", "weighted-harmonic-x2", "--tol", "1e-15",
               "--out", tmp_path) == 1


def test_verify_degenerate_effective(tmp_path):
    assert run("verify", "--profile", "degenerate-N", "--N", 3, "--vorticity", "effective",
               "--out", tmp_path) == 0


def test_blowup_degenerate(tmp_path):
    assert run("blowup", "--profile", "degenerate-N", "--N", 2, "--radii", 20, "--out",
               tmp_path) == 0
    doc = json.loads((tmp_path / "blowup.json").read_text())
    assert abs(doc["homogeneity"]["degree"] - 2) <= 0.02
    assert doc["profile_distances"]["frequency-2"] <= 0.05


@pytest.mark.parametrize("profile,N,label", [("degenerate-N", 3, "HorizontalFlat-Excluded"),
                                             ("stokes-corner", 2, "StokesCorner")])
def test_classify(tmp_path, profile, N, label):
    assert run("classify", "--profile", profile, "--N", N, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "classify.json").read_text())
    assert [r["label"] for r in doc["reports"]] == [label]
    if label.startswith("Horizontal"):
        assert doc["reports"][0]["N"] == 3


def test_classify_x2y(tmp_path):
    assert run("classify", "--profile", "weighted-harmonic-x2y", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "classify.json").read_text())
    assert doc["reports"] and all(r["label"] == "Nondegenerate" for r in doc["reports"])


def test_deterministic_output(tmp_path):
    for d in ("a", "b"):
        assert run("analyze", "--profile", "stokes-corner", "--radii", 8, "--format",
                   "csv,json,svg", "--out", tmp_path / d) == 0
    for name in ("profile.csv", "profile.json", "Phi.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("STAGFLAT_OUT", str(tmp_path / "env"))
    assert run("synth", "--profile", "zero") == 0
    assert (tmp_path / "env" / "zero.grid").is_file()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[field]\nprofile = degenerate-N\nN = 3\n\n[window]\ncount = 6\n\n"
                   f"[output]\ndir = {tmp_path / 'cfg'}\nformats = csv\n")
    assert run("analyze", "--config", cfg) == 0
    rows = (tmp_path / "cfg" / "profile.csv").read_text().splitlines()
    assert len(rows) == 7
    assert run("analyze", "--config", cfg, "--radii", 4) == 0
    assert len((tmp_path / "cfg" / "profile.csv").read_text().splitlines()) == 5


def test_bad_config_value(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[window]\ncount = many\n")
    assert run("analyze", "--config", cfg) == 2


def test_console_script(tmp_path):
    env = dict(os.environ, STAGFLAT_OUT=str(tmp_path))
    res = subprocess.run([sys.executable, "-m", "stagflat.cli", "synth", "--profile", "zero"],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 0 and "wrote" in res.stdout
    res = subprocess.run([sys.executable, "-m", "stagflat.cli", "bogus"], capture_output=True)
    assert res.returncode == 2
