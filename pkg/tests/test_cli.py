import csv
import json
import math
import subprocess
import sys

import pytest

from eploom import cli


def run(tmp_path, command, config=None, *flags, out="out"):
    argv = [command, "--out", str(tmp_path / out)]
    if config is not None:
        path = tmp_path / f"{command}-{out}.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    return cli.run(argv + list(flags))


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


@pytest.fixture(autouse=True)
def no_env_omega(monkeypatch):
    monkeypatch.delenv(cli.ENV_OMEGA, raising=False)


def test_eigen_preset2(tmp_path):
    assert run(tmp_path, "eigen", {"theta_samples": 5}, "--preset", "2") == 0
    r = rows(tmp_path / "out/eigen.csv")
    assert len(r) == 5
    assert float(r[0]["re_delta_e"]) == pytest.approx(-0.2, abs=1e-15) and float(r[0]["im_delta_e"]) == 0


def test_config_errors(tmp_path, capsys):
    assert run(tmp_path, "eigen", None, "--preset", "4") == 2
    assert "preset" in capsys.readouterr().err
    assert run(tmp_path, "eigen", {"theta_over_pi": []}) == 2
    assert run(tmp_path, "eigen", {"theta_samples": 0}) == 2
    assert run(tmp_path, "eigen", {"unknown_key": 1}) == 2
    assert run(tmp_path, "trace", {"initial": "x"}) == 2
    assert run(tmp_path, "trace", {"loop": {"omega": -1}}) == 2
    assert run(tmp_path, "trace", {"integrator": {"rtol": 1}}) == 2
    assert run(tmp_path, "calibrate", {"candidates": []}) == 2
    assert run(tmp_path, "sense", {"lambdas": [0.0], "sense_mode": "state"}) == 2
    assert run(tmp_path, "map", {"grid": {"nx": 1}}) == 2
    assert cli.run(["nonsense"]) == 2
    assert not (tmp_path / "out").exists()


def test_bad_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert cli.run(["eigen", "--config", str(p)]) == 2
    assert cli.run(["eigen", "--config", str(tmp_path / "missing.json")]) == 2


def test_header_is_resolved_config(tmp_path):
    run(tmp_path, "eigen", {"theta_samples": 2}, "--preset", "3")
    first = (tmp_path / "out/eigen.csv").read_text().splitlines()[0]
    assert first.startswith("# config: ")
    cfg = json.loads(first[len("# config: "):])
    assert cfg["preset"] == 3 and cfg["resolved_loop"]["gamma_const"] == 0.1
    assert "out" not in cfg and "jobs" not in cfg


def test_trace_directions(tmp_path):
    assert run(tmp_path, "trace", {"omega": 0.126}, "--direction", "ccw", out="a") == 0
    assert run(tmp_path, "trace", {"omega": 0.126}, "--direction", "cw", out="b") == 0
    a, b = rows(tmp_path / "a/trace.csv"), rows(tmp_path / "b/trace.csv")
    assert float(a[0]["f_plus"]) == pytest.approx(1.0, abs=1e-12)
    diffs = [abs(float(x["f_plus"]) - float(y["f_plus"])) for x, y in zip(a, b) if x["f_plus"] and y["f_plus"]]
    assert max(diffs) <= 1e-3


def test_winding(tmp_path):
    assert run(tmp_path, "winding", None, "--preset", "3", out="w3") == 0
    assert abs(float(rows(tmp_path / "w3/winding.csv")[0]["nu_quantized"])) == 0.5
    assert run(tmp_path, "winding", {"loop": {"Delta0": 0, "G0": 0, "Gamma0": 0, "g0": 0.1}}, out="w0") == 0
    assert float(rows(tmp_path / "w0/winding.csv")[0]["nu"]) == 0
    assert run(tmp_path, "winding", None, "--preset", "1", out="w1") == 0
    assert rows(tmp_path / "w1/winding.csv")[0]["flag"] == "ep-grazing"


def test_map_smoke_and_jobs(tmp_path):
    cfg = {"grid": {"nx": 2, "ny": 3}, "omega": 0.126}
    assert run(tmp_path, "map", cfg, "--preset", "1", "--jobs", "1", out="j1") == 0
    assert run(tmp_path, "map", cfg, "--preset", "1", "--jobs", "4", out="j4") == 0
    for name in ("fidelity_map.csv", "fidelity_map.json", "winding_map.csv", "winding_map.json", "correlation.csv"):
        assert (tmp_path / "j1" / name).read_bytes() == (tmp_path / "j4" / name).read_bytes()
    w = rows(tmp_path / "j1/winding_map.csv")
    assert len(w) == 6 and all(float(r["value"]) == 0 for r in w)


def test_correlate_mismatch(tmp_path):
    run(tmp_path, "map", {"grid": {"nx": 2, "ny": 2}, "map_kind": "fidelity", "omega": 0.126}, "--preset", "3", out="a")
    run(tmp_path, "map", {"grid": {"nx": 3, "ny": 2}, "map_kind": "winding"}, "--preset", "3", out="b")
    cfg = {"correlate": {"fidelity": str(tmp_path / "a/fidelity_map"), "winding": str(tmp_path / "b/winding_map")}}
    assert run(tmp_path, "map", cfg, out="c") == 3
    assert not (tmp_path / "c").exists()
    cfg["correlate"]["winding"] = str(tmp_path / "nowhere")
    assert run(tmp_path, "map", cfg, out="c") == 3


def test_sense_zeros(tmp_path):
    cfg = {"perturbation": {"target": "Gamma0"}, "lambdas": {"start": -0.4, "stop": 0.4, "num": 9}, "theta_samples": 5,
           "omega": 0.126}
    assert run(tmp_path, "sense", cfg, "--preset", "3") == 0
    for name in ("state.csv", "state_slice.csv"):
        assert all(float(r["chi_state"]) == 0 for r in rows(tmp_path / "out" / name))
    for name in ("landscape.csv", "landscape_slice.csv"):
        assert all(float(r["re_chi"]) == 0 == float(r["im_chi"]) for r in rows(tmp_path / "out" / name))
    sl = rows(tmp_path / "out/state_slice.csv")
    assert {r["theta_over_pi"] for r in sl} == {"1"} and len(sl) == 9


def test_calibrate_session_and_env(tmp_path, monkeypatch):
    assert run(tmp_path, "calibrate", {"candidates": [0.13, 0.126]}) == 0
    session = json.loads((tmp_path / "out/session.json").read_text())
    assert session == {"omega": 0.126}
    first = (tmp_path / "out/calibration.csv").read_bytes()
    assert run(tmp_path, "calibrate", {"candidates": [0.13, 0.126]}) == 0
    assert (tmp_path / "out/calibration.csv").read_bytes() == first
    # later commands pick the session omega up, the environment overrides it
    run(tmp_path, "eigen", {"theta_samples": 2})
    hdr = json.loads((tmp_path / "out/eigen.csv").read_text().splitlines()[0][len("# config: "):])
    assert hdr["omega"] == 0.126 and hdr["omega_source"] == "session"
    monkeypatch.setenv(cli.ENV_OMEGA, "0.2")
    run(tmp_path, "eigen", {"theta_samples": 2})
    hdr = json.loads((tmp_path / "out/eigen.csv").read_text().splitlines()[0][len("# config: "):])
    assert hdr["resolved_loop"]["omega"] == 0.2
    monkeypatch.setenv(cli.ENV_OMEGA, "fast")
    assert run(tmp_path, "eigen", None) == 2


def test_calibrate_failure_is_runtime_error(tmp_path):
    assert run(tmp_path, "calibrate", {"candidates": [10.0]}) == 3


def test_json_format(tmp_path):
    assert run(tmp_path, "eigen", {"theta_samples": 3}, "--format", "json") == 0
    doc = json.loads((tmp_path / "out/eigen.json").read_text())
    assert len(doc["rows"]) == 3 and doc["columns"][0] == "theta_over_pi"
    assert doc["header"][0].startswith("config: ")


def test_reruns_are_byte_identical(tmp_path):
    for out in ("r1", "r2"):
        assert run(tmp_path, "trace", {"omega": 0.126, "integrator": {"sample_count": 11}}, "--preset", "3", out=out) == 0
    assert (tmp_path / "r1/trace.csv").read_bytes() == (tmp_path / "r2/trace.csv").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eploom", "eigen", "--preset", "9"], capture_output=True, text=True)
    assert proc.returncode == 2 and "preset" in proc.stderr and proc.stdout == ""
