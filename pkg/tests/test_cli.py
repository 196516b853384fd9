import json
import subprocess
import sys

import numpy as np
import pytest

from hinfland import io as hio
from hinfland.cli import main
from hinfland.errors import DimensionError
from hinfland.lti import Controller
from hinfland.systems import example_plant


@pytest.fixture
def files(tmp_path):
    plant = tmp_path / "eq.json"
    plant.write_text(hio.dumps(hio.plant_to_dict(example_plant())))
    k = tmp_path / "k.json"
    k.write_text(json.dumps({"AK": [[-1.0]], "BK": [[0.0]], "CK": [[1.0]], "DK": [[0.0]]}))
    k2 = tmp_path / "k2.json"
    k2.write_text(json.dumps({"AK": [[-1.2]], "BK": [[0.3]], "CK": [[1.0]], "DK": [[-0.5]]}))
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"AK": [[1.0]], "BK": [[0.0]], "CK": [[1.0]], "DK": [[0.0]]}))
    return {"plant": str(plant), "k": str(k), "k2": str(k2), "unstable": str(bad), "dir": tmp_path}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_io_roundtrip():
    p = example_plant()
    q = hio.plant_from_dict(json.loads(hio.dumps(hio.plant_to_dict(p))))
    for f in hio.PLANT_FIELDS:
        np.testing.assert_array_equal(getattr(p, f), getattr(q, f))
    k = Controller([[-0.5, 1.0], [0.3, -1.2]], 1, 1)
    np.testing.assert_array_equal(hio.controller_from_dict(hio.controller_to_dict(k), p).K, k.K)


def test_io_errors():
    with pytest.raises(DimensionError) as ei:
        hio.plant_from_dict({"A": [[1.0]]})
    assert ei.value.block == "B1"
    doc = {"AK": [[1.0, 0.0], [0.0, 1.0]], "BK": [[0.0], [0.0]], "CK": [[1.0, 0.0]], "DK": [[0.0]]}
    with pytest.raises(DimensionError):
        hio.controller_from_dict(doc, example_plant())


def test_dumps_infinity():
    assert json.loads(hio.dumps({"w": np.inf, "x": np.nan, "n": np.int64(3)})) == {
        "w": "inf", "x": None, "n": 3}


def test_norm(files, capsys):
    code, out, _ = run(capsys, "norm", "--plant", files["plant"], "--controller", files["k"])
    assert code == 0
    doc = json.loads(out)
    assert doc["gamma"] == pytest.approx(1.0, rel=1e-9)


def test_norm_default_plant_and_out(files, capsys):
    out = files["dir"] / "n.json"
    code, text, _ = run(capsys, "norm", "--controller", files["k"], "--out", str(out))
    assert code == 0 and text == ""
    assert json.loads(out.read_text())["gamma"] == pytest.approx(1.0, rel=1e-9)


def test_certify(files, capsys):
    code, out, _ = run(capsys, "certify", "--controller", files["k"], "--gamma", "2")
    assert code == 0 and json.loads(out)["lambda_min_P"] > 0
    code, out, _ = run(capsys, "certify", "--controller", files["k"])
    assert code == 0 and json.loads(out)["lambda_min_P"] >= 1e-4
    code, _, err = run(capsys, "certify", "--plant", files["plant"], "--controller", files["k"],
                       "--gamma", "0.5")
    assert code == 1 and "infeasible" in err


def test_domain_error_exit(files, capsys):
    code, _, err = run(capsys, "norm", "--controller", files["unstable"])
    assert code == 1 and "stable" in err


def test_usage_errors(files, capsys):
    assert run(capsys)[0] == 2
    code, _, err = run(capsys, "norm")
    assert code == 2 and "--controller" in err
    assert run(capsys, "norm", "--controller", files["k"], "--rel-tol", "-1")[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "norm", "--controller", str(files["dir"] / "missing.json"))[0] == 2
    assert run(capsys, "scan", "--grid", "aK:0:1:3")[0] == 2
    assert run(capsys, "scan", "--grid", "aK:0:1:3,bK:0:1:3,qK:0:1:3")[0] == 2


def test_no_command_subprocess():
    r = subprocess.run([sys.executable, "-m", "hinfland"], capture_output=True, text=True)
    assert r.returncode == 2
    assert "usage" in r.stderr


def test_help_lists_defaults(capsys):
    assert main(["scan", "--help"]) == 0
    out = capsys.readouterr().out
    assert "aK:-2:2:41,bK:-4:4:41,dK:-1.5:1.5:13" in out
    assert "1e-09" in out and "0.0001" in out


def test_example_plant(capsys):
    code, out, _ = run(capsys, "example-plant")
    doc = json.loads(out)
    assert code == 0
    assert doc["A"] == [[-1.0]] and doc["B1"] == [[1.0, 0.0]] and doc["B2"] == [[1.0]]


def test_lift_and_roundtrip(files, capsys):
    code, out, _ = run(capsys, "lift", "--controller", files["k2"])
    doc = json.loads(out)
    assert code == 0 and set(doc["lifted"]) >= {"Xi", "X", "Y", "M", "H", "F", "G", "gamma"}
    code, out, _ = run(capsys, "roundtrip", "--controller", files["k2"], "--gamma", "1.0")
    doc = json.loads(out)
    assert code == 0 and doc["certificate_ok"]
    assert doc["controller_error"] <= 1e-8 * doc["scale"]


def test_descend_csv(files, capsys):
    argv = ("descend", "--controller", files["k2"], "--budget", "5", "--seed", "2")
    code, out, _ = run(capsys, *argv)
    lines = out.strip().split("\n")
    assert code == 0 and lines[0] == "iter,J,measure,step"
    js = [float(l.split(",")[1]) for l in lines[1:]]
    assert js == sorted(js, reverse=True)
    assert run(capsys, *argv)[1] == out


def test_stationarity(files, capsys):
    code, out, _ = run(capsys, "stationarity", "--controller", files["k2"])
    rows = json.loads(out)["ladder"]
    assert code == 0 and [r["radius"] for r in rows] == [1e-2, 1e-3, 1e-4]


def test_synthesize(capsys):
    code, out, _ = run(capsys, "synthesize")
    assert code == 0
    assert json.loads(out)["gamma_star"] == pytest.approx(np.sqrt(3) - 1, rel=2e-5)


def test_scan_and_fitline(files, capsys):
    csv_path = files["dir"] / "s.csv"
    svg = files["dir"] / "svg"
    code, _, _ = run(capsys, "scan", "--grid", "aK:-2:2:9,bK:-4:4:9,dK:-1:1:2",
                     "--out", str(csv_path), "--svg-dir", str(svg))
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("a_k,b_k,d_k") and len(lines) == 1 + 9 * 9 * 2
    assert sorted(p.name for p in svg.iterdir()) == ["slice_000.svg", "slice_001.svg"]
    code, out, _ = run(capsys, "fitline", str(csv_path), "--quantile", "0.3")
    doc = json.loads(out)
    assert code == 0 and [s["d_k"] for s in doc["slices"]] == [-1.0, 1.0]
    assert all(s["status"] == "ok" and s["n_low"] >= 3 for s in doc["slices"])


def test_log_env(files, capsys, monkeypatch):
    monkeypatch.setenv("HINFLAND_LOG", "loud")
    code, _, err = run(capsys, "example-plant")
    assert code == 0


def test_scan_config_file(files, capsys):
    cfg = files["dir"] / "cfg.json"
    cfg.write_text(json.dumps({"a_range": [-2, 0], "b_range": [-1, 1], "d_range": [0, 1],
                               "counts": [3, 3, 2], "ck": 2.0}))
    code, out, _ = run(capsys, "scan", "--config", str(cfg))
    assert code == 0 and len(out.splitlines()) == 1 + 18
    _, out_flag, _ = run(capsys, "scan", "--config", str(cfg), "--ck", "1")
    _, out_plain, _ = run(capsys, "scan", "--grid", "aK:-2:0:3,bK:-1:1:3,dK:0:1:2")
    assert out_flag == out_plain != out
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "scan", "--config", str(cfg))[0] == 2
