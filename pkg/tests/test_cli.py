import csv
import json

import numpy as np
import pytest

from skewcheck.cli import main
from skewcheck.constructions import skew_cubic
from skewcheck.jets import PolyMap


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_map(tmp_path, f: PolyMap, name="map.json"):
    path = tmp_path / name
    path.write_text(f.to_json())
    return str(path)


def test_check_local_skew_cubic(capsys):
    code, out, _ = run(capsys, "check-local", "--construct", "skew-cubic", "--n", "2")
    rep = json.loads(out)
    assert code == 0
    assert rep["holds"] == "true" and rep["pass"] is True
    assert rep["config"]["n"] == 2 and rep["config"]["seed"] == 0
    assert "version" in rep


def test_check_local_certified(capsys):
    code, out, _ = run(capsys, "check-local", "--construct", "skew-cubic", "--n", "1", "--certify")
    assert code == 0 and json.loads(out)["mode"] == "certified"


def test_check_local_appendix_fails(capsys):
    code, out, _ = run(capsys, "check-local", "--construct", "appendix-triple", "--n", "2")
    rep = json.loads(out)
    assert code == 1
    assert rep["holds"] == "false" and rep["witness"] is not None


def test_check_pair_examples(capsys, tmp_path, twisted_cubic, planar_curve, parallel_curve):
    code, out, _ = run(capsys, "check-pair", "--map", write_map(tmp_path, twisted_cubic),
                       "--p", "0", "--q", "1")
    assert code == 0 and json.loads(out)["failure"] == "none"
    code, out, _ = run(capsys, "check-pair", "--map", write_map(tmp_path, planar_curve),
                       "--p", "0", "--q", "1")
    assert code == 1 and json.loads(out)["failure"] == "intersecting"
    code, out, _ = run(capsys, "check-pair", "--map", write_map(tmp_path, parallel_curve),
                       "--p=-1", "--q", "1")
    rep = json.loads(out)
    assert code == 1 and rep["failure"] == "parallel"
    assert set(rep["witness"]) == {"v1", "v2", "lambda"}


def test_usage_errors_exit_2(capsys, tmp_path, twisted_cubic):
    path = write_map(tmp_path, twisted_cubic)
    assert run(capsys, "check-pair", "--map", path, "--p", "0.5", "--q", "0.5")[0] == 2
    assert run(capsys, "check-local", "--construct", "skew-cubic", "--n", "2", "--at", "0")[0] == 2
    assert run(capsys, "check-local", "--construct", "skew-cubic")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "check-pair", "--map", path, "--p", "x", "--q", "1")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "check-local", "--map", str(bad))
    assert code == 2 and "invalid JSON" in err
    assert run(capsys, "check-local", "--map", str(tmp_path / "missing.json"))[0] == 2


def test_certify_rejects_large_n(capsys):
    assert run(capsys, "check-local", "--construct", "skew-cubic", "--n", "5", "--certify")[0] == 2


def test_sweep_and_out_file(capsys, tmp_path):
    out_path = tmp_path / "sweep.json"
    code, out, _ = run(capsys, "sweep", "--construct", "skew-cubic", "--n", "1",
                       "--trials", "200", "--out", str(out_path))
    assert code == 0
    assert out_path.read_text() == out
    assert "out" not in json.loads(out)["config"]


def test_geometry_and_transversality(capsys):
    code, out, _ = run(capsys, "geometry", "--construct", "skew-cubic", "--n", "1")
    rep = json.loads(out)
    assert code == 0 and rep["torsion"] == pytest.approx(-1.0, abs=1e-12)
    code, out, _ = run(capsys, "transversality", "--n", "2", "--N", "6")
    assert code == 0 and json.loads(out)["unconstrained_kernel_dim"] == 2


def test_genericity_plot_data(capsys, tmp_path):
    csv_path = tmp_path / "hist.csv"
    code, out, _ = run(capsys, "genericity", "--n", "2", "--N", "6", "--trials", "20",
                       "--plot-data", str(csv_path))
    assert code == 0
    assert "min_sigma_values" not in json.loads(out)
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == ["log10_sigma_left", "log10_sigma_right", "count"]
    assert sum(int(r[2]) for r in rows[1:]) == 20


def test_check_local_plot_data(capsys, tmp_path):
    csv_path = tmp_path / "sigma.csv"
    run(capsys, "check-local", "--construct", "skew-cubic", "--n", "2", "--plot-data", str(csv_path))
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == ["theta", "sigma_min"] and len(rows) == 721
    assert min(float(r[1]) for r in rows[1:]) > 0.35


def test_construct_roundtrip(capsys, tmp_path):
    out_path = tmp_path / "f.json"
    code, out, _ = run(capsys, "construct", "skew-cubic", "--n", "2", "--out", str(out_path))
    assert code == 0
    f = PolyMap.from_json(out_path.read_text())
    assert (f.n, f.N) == (2, 6)
    x = np.array([0.3, -0.2])
    assert np.array_equal(f(x), skew_cubic(2)(x))


@pytest.mark.parametrize("argv", [
    ["check-local", "--construct", "skew-cubic", "--n", "3"],
    ["sweep", "--construct", "skew-cubic", "--n", "2", "--trials", "300", "--seed", "4"],
    ["genericity", "--n", "2", "--N", "7", "--trials", "10", "--threads", "2"],
])
def test_reports_are_byte_identical(capsys, argv):
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second
