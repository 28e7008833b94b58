import json

import pytest

from tweezer.cli import main

CFG = """
temperature = 168 uK
n_sequences = 100
n_traj = 4000
u_min_grid = 0.4, 3, 100, 2800 uK
u_ratio_grid = 0.001, 0.01, 0.1, 0.5
seed = 11
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text(CFG)
    return p


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_rr_sim_then_fit(tmp_path, cfg_file):
    out = tmp_path / "out"
    assert main(["rr-sim", "-c", str(cfg_file), "-o", str(out)]) == 0
    lines = (out / "rr_curve.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and lines[1] == "# seed=11"
    assert lines[2] == "dt_us,p,sigma,n"
    assert main(["rr-fit", str(out / "rr_curve.csv"), "-c", str(cfg_file), "-o", str(out),
                 "--set", "n_traj=10000"]) == 0
    fit = json.loads((out / "rr_fit.json").read_text())["fit"]
    assert abs(fit["t_uK"] - 168) < 3 * fit["sigma_t_uK"]


def test_action_map_csv(tmp_path, cfg_file):
    assert main(["action-map", "-c", str(cfg_file), "-o", str(tmp_path)]) == 0
    rows = [ln for ln in (tmp_path / "action_map.csv").read_text().splitlines()
            if not ln.startswith("#")]
    assert rows[0] == "u_ratio,e_ratio"
    assert rows[1].split(",")[0] == "0.001"
    assert rows[-1] == "1,1"


def test_usage_errors(capsys):
    assert main(["nope"]) == 2
    assert _err(capsys)["error"] == "usage"
    assert main(["rr-sim", "--bogus"]) == 2
    assert main([]) == 2


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("power = 10\n")
    assert main(["rr-sim", "-c", str(bad), "-o", str(tmp_path)]) == 3
    assert _err(capsys)["exit_code"] == 3
    assert main(["rr-sim", "--set", "temperature=3", "-o", str(tmp_path)]) == 3
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1,2\n")
    assert main(["rr-fit", str(junk), "-o", str(tmp_path)]) == 3


def test_io_errors(tmp_path, capsys):
    assert main(["rr-sim", "-c", str(tmp_path / "missing.cfg")]) == 4
    assert main(["rr-fit", str(tmp_path / "missing.csv")]) == 4
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["action-map", "-o", str(blocker / "sub"), "--set", "u_ratio_grid=0.5"]) == 4
    assert _err(capsys)["error"] == "io"


def test_domain_error(tmp_path, capsys):
    assert main(["rr-sim", "--set", "power=0.0001 mW", "-o", str(tmp_path)]) == 5
    assert _err(capsys)["error"] == "UntrappableError"


def test_env_output_dir(tmp_path, monkeypatch, cfg_file):
    monkeypatch.setenv("TWEEZER_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["action-map", "-c", str(cfg_file)]) == 0
    assert (tmp_path / "env" / "action_map.csv").exists()


@pytest.mark.slow
def test_figures_deterministic(tmp_path, cfg_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["figures", "-c", str(cfg_file), "-o", str(a)]) == 0
    assert main(["figures", "-c", str(cfg_file), "-o", str(b), "--workers", "3"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(f"{s}.{e}" for s in ("spectroscopy", "action_map", "truncation",
                                                   "adiabatic") for e in ("csv", "json"))
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
