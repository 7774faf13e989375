import json
import shutil
import subprocess
import sys

import numpy as np
import pytest
import yaml

from szegolab import cli
from szegolab.presets import PRESETS, ConfigError, parse_config, preset


def _run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.mark.parametrize("command", sorted(cli.COMMANDS))
def test_every_command_runs_on_plain_preset(command, tmp_path):
    assert _run(command, "--preset", "cp1-plain", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["schema_version"] == cli.SCHEMA_VERSION
    assert summary["command"] == command
    assert (tmp_path / "resolved_config.yaml").exists()


def test_dims_csv_schema_and_matches(tmp_path):
    assert _run("dims", "--preset", "cp2-t2", "--out", tmp_path) == 0
    lines = (tmp_path / "dims.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "schema_version"
    assert len(lines) == 52
    assert all(line.endswith("true") for line in lines[1:])


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("asymptotics", "--preset", "cp1-s1-12", "--out", a) == 0
    assert _run("asymptotics", "--preset", "cp1-s1-12", "--out", b, "--threads", 1) == 0
    for name in ("asymptotics.csv", "profile.csv", "summary.json", "resolved_config.yaml"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_haar_override_shifts_constant(tmp_path):
    assert _run("asymptotics", "--preset", "cp1-s1-12", "--out", tmp_path / "p") == 0
    assert _run("asymptotics", "--preset", "cp1-s1-12", "--out", tmp_path / "f", "--haar", "phi") == 0
    p = json.loads((tmp_path / "p" / "summary.json").read_text())
    f = json.loads((tmp_path / "f" / "summary.json").read_text())
    assert p["haar"] == "probability" and f["haar"] == "phi"
    assert p["beta_relative_error"] < 0.05
    # the phi convention rescales the isotype projector by the group volume 2 pi
    assert f["beta_fit"] - p["beta_fit"] == pytest.approx(np.log(2 * np.pi), abs=1e-9)
    assert f["beta_relative_error"] > 0.5


def test_immersion_verdicts_on_untwisted_control(tmp_path):
    assert _run("immersion", "--preset", "cp1-plain", "--out", tmp_path) == 0
    verdicts = json.loads((tmp_path / "summary.json").read_text())["verdicts"]
    assert verdicts == {"immersion": True, "isometry": "exact", "minimality": True}


def test_config_file_with_auto_seeds(tmp_path):
    cfg = {
        "name": "auto",
        "model": {"factors": [2]},
        "action": {"group": "torus", "weights": [[1, 0], [0, 1], [0, 0]], "shift": [1, 1]},
        "nu": [1, 1],
        "k_grid": [16, 32, 64, 128],
        "seeds": "auto",
        "n_auto_seeds": 3,
    }
    path = tmp_path / "auto.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert _run("reduction-scan", "--config", path, "--out", tmp_path / "a") == 0
    assert _run("reduction-scan", "--config", path, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "reduction_scan.csv").read_text()
    assert a == (tmp_path / "b" / "reduction_scan.csv").read_text()
    assert len(a.splitlines()) == 4


@pytest.mark.parametrize("text", ["model: [unclosed", "name: x\nbogus_key: 1\n"])
def test_bad_config_exits_2(text, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    assert _run("dims", "--config", path, "--out", tmp_path / "o") == 2


def test_zero_in_moment_image_exits_2(tmp_path):
    cfg = {"name": "z", "model": {"factors": [1]},
           "action": {"group": "torus", "weights": [[1], [-1]], "shift": [0]}, "nu": [1]}
    path = tmp_path / "z.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert _run("dims", "--config", path, "--out", tmp_path / "o") == 2


def test_usage_errors_exit_2(tmp_path):
    assert _run("dims", "--preset", "no-such-preset", "--out", tmp_path) == 2
    assert _run("frobnicate", "--preset", "cp2-t2") == 2
    assert _run("dims") == 2
    assert _run("dims", "--preset", "cp2-t2", "--config", tmp_path / "x.yaml") == 2


def test_parse_config_validation():
    base = dict(PRESETS["cp2-t2"])
    with pytest.raises(ConfigError):
        parse_config({**base, "k_grid": []})
    with pytest.raises(ConfigError):
        parse_config({**base, "model": {"factors": [2], "scale": 2.0}})
    with pytest.raises(ConfigError):
        preset("missing")
    assert preset("cp2-t2").haar == "probability"


def test_console_script_help():
    exe = shutil.which("szegolab")
    cmd = [exe] if exe else [sys.executable, "-m", "szegolab.cli"]
    out = subprocess.run(cmd + ["--help"], capture_output=True, text=True, timeout=60)
    assert out.returncode == 0
    assert "reduction-scan" in out.stdout
