import json

import numpy as np
import pytest

import impscat.harness as harness
from impscat.cli import main


@pytest.fixture
def fast_data(monkeypatch):
    monkeypatch.setattr(harness, "DATA_NODE_FLOOR", 64)


@pytest.fixture
def config_path(tmp_path):
    cfg = {
        "k2max": 1,
        "shape": {"kind": "circle", "radius": 1.2},
        "seed": 5,
        "optimizer": {"node_floor": 64, "max_iterations": 4},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_pipeline_generate_invert_report(tmp_path, config_path, fast_data):
    data = str(tmp_path / "dataset.json")
    traj = str(tmp_path / "trajectory.json")
    log = str(tmp_path / "log.jsonl")
    report = str(tmp_path / "report.csv")
    assert main(["generate", "--config", config_path, "--out", data]) == 0
    assert main(["invert", "--data", data, "--out", traj, "--log", log]) == 0
    assert main(["report", "--data", data, "--trajectory", traj, "--out", report]) == 0
    rows = open(report).read().splitlines()
    assert rows[0].startswith("omega,residual,area_error")
    assert len(rows) == 1 + 3  # header + 2*k2max+1 frequencies
    log_lines = [json.loads(line) for line in open(log)]
    assert log_lines and all("omega" in entry for entry in log_lines)
    traj_obj = json.loads(open(traj).read())
    assert len(traj_obj) == 3


def test_generate_seed_override(tmp_path, config_path, fast_data):
    a = str(tmp_path / "a.json")
    b = str(tmp_path / "b.json")
    c = str(tmp_path / "c.json")
    cfg = json.loads(open(config_path).read())
    cfg["noise_sigma"] = 0.05
    open(config_path, "w").write(json.dumps(cfg))
    main(["generate", "--config", config_path, "--out", a])
    main(["generate", "--config", config_path, "--out", b])
    main(["generate", "--config", config_path, "--out", c, "--seed", "99"])
    assert open(a).read() == open(b).read()
    assert open(a).read() != open(c).read()


def test_forward_neumann_equals_zero_impedance(tmp_path, config_path, fast_data):
    out1 = str(tmp_path / "n.json")
    out2 = str(tmp_path / "z.json")
    assert main(["forward", "--config", config_path, "--out", out1, "--kind", "neumann"]) == 0
    assert main(["forward", "--config", config_path, "--out", out2, "--kind", "0,0"]) == 0
    a = json.loads(open(out1).read())
    b = json.loads(open(out2).read())
    assert np.allclose(a["far_re"], b["far_re"], atol=1e-14)
    assert np.allclose(a["far_im"], b["far_im"], atol=1e-14)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "3/3" in out and "FAIL" not in out


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SystemExit):
        main(["generate", "--config", str(bad)])
    missing = str(tmp_path / "missing.json")
    with pytest.raises(SystemExit):
        main(["generate", "--config", missing])


def test_invalid_config_schema(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"k2max": 1, "bogus_key": 2}))
    with pytest.raises(SystemExit):
        main(["generate", "--config", str(bad)])
