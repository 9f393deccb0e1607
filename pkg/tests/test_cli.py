import json
from pathlib import Path

import pytest

from jumpbsde.cli import main
from jumpbsde.io import read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def cfg(name):
    return str(CONFIGS / f"{name}.toml")


def _summary(out):
    return json.loads((out / "summary.json").read_text())["summary"]


def _report(out):
    return json.loads((out / "report.json").read_text())["report"]


def test_simulate_rows_and_repeatability(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--config", cfg("feynman_kac"), "--out", str(out),
                     "--paths", "30"]) == 0
    header, rows = read_csv(a / "paths.csv")
    assert len(rows) == 30 * 101
    for name in ("paths.csv", "events.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_bad_key_exits_2_naming_key(tmp_path, capsys):
    assert main(["simulate", "--config", cfg("bad_key"), "--out", str(tmp_path)]) == 2
    assert "mc.n_path" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_solve_constant_preset(tmp_path):
    assert main(["solve", "--config", cfg("constant"), "--out", str(tmp_path), "--paths", "500"]) == 0
    assert _summary(tmp_path)["Y0"] == 1.0
    for name in ("solution.csv", "coefficients.csv", "summary.csv", "summary.json"):
        assert (tmp_path / name).read_text().startswith(("# jumpbsde", "{"))


def test_solve_linear_ode_preset(tmp_path):
    assert main(["solve", "--config", cfg("linear_ode"), "--out", str(tmp_path), "--paths", "500"]) == 0
    assert abs(_summary(tmp_path)["Y0"] - 0.6065306597126334) <= 0.01


def test_solve_martingale_preset(tmp_path):
    assert main(["solve", "--config", cfg("martingale"), "--out", str(tmp_path), "--paths", "2000"]) == 0
    s = _summary(tmp_path)
    assert abs(s["Y0"]) <= 3 * s["SE"]


def test_solve_refuses_failing_audit(tmp_path, capsys):
    assert main(["solve", "--config", cfg("audit_gamma_neg"), "--out", str(tmp_path)]) == 1
    assert "A4" in capsys.readouterr().err
    assert not (tmp_path / "summary.json").exists()


@pytest.mark.parametrize("name, code, named", [
    ("audit_pass", 0, None),
    ("martingale", 0, None),
    ("audit_gamma_neg", 1, "A4"),
    ("audit_u2_small", 1, "A2"),
])
def test_audit_exit_codes(name, code, named, capsys):
    assert main(["audit", "--config", cfg(name)]) == code
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] == (code == 0)
    if named:
        assert any(named in f for f in out["failed"])


def test_compare_preset_ordered(tmp_path):
    assert main(["compare", "--config", cfg("compare"), "--out", str(tmp_path), "--paths", "2000"]) == 0
    assert _report(tmp_path)["verdict"] == "ordered"
    header, rows = read_csv(tmp_path / "report.csv")
    assert header == ["experiment", "seed", "Y1", "SE1", "Y2", "SE2", "gap", "tau_mean", "verdict"]
    assert rows[0][-1] == "ordered"


def test_compare_equal_drivers_bit_identical(tmp_path):
    assert main(["compare", "--config", cfg("compare_equal"), "--out", str(tmp_path),
                 "--paths", "1000"]) == 0
    rep = _report(tmp_path)
    assert rep["Y1"] == rep["Y2"]


def test_converse_preset_sign(tmp_path):
    assert main(["converse", "--config", cfg("converse"), "--out", str(tmp_path),
                 "--paths", "3000"]) == 0
    rep = _report(tmp_path)
    assert rep["Y1"] > rep["Y2"] and rep["generator_gap"] == 1.0


def test_compare_requires_second_generator(tmp_path, capsys):
    assert main(["compare", "--config", cfg("martingale"), "--out", str(tmp_path)]) == 2
    assert "generator2" in capsys.readouterr().err


def test_numerical_error_exits_3(tmp_path, capsys):
    conf = tmp_path / "explode.toml"
    conf.write_text(
        '[model]\npreset = "polynomial"\nx0 = 1.0\na = [[0.0, 0.0, 1e80]]\nb = [[[0.0]]]\n'
        '[generator]\npreset = "zero"\n[terminal]\npreset = "identity"\n'
        '[grid]\nT_max = 1.0\nn_steps = 10\n[mc]\nn_paths = 5\n'
    )
    assert main(["simulate", "--config", str(conf), "--out", str(tmp_path / "o")]) == 3
    assert "explosion at" in capsys.readouterr().err


def test_seed_override_is_recorded(tmp_path):
    assert main(["solve", "--config", cfg("constant"), "--out", str(tmp_path), "--paths", "50",
                 "--seed", "99"]) == 0
    prov = json.loads((tmp_path / "summary.json").read_text())["provenance"]
    assert prov["seed"] == 99 and prov["config"]["mc"]["seed"] == 99


def test_oracle_suite_command(tmp_path, capsys):
    assert main(["oracles", "--paths", "4000", "--out", str(tmp_path)]) == 0
    cases = json.loads((tmp_path / "oracles.json").read_text())["cases"]
    assert {c["name"] for c in cases} == {
        "zero_driver_martingale", "constant_driver", "linear_ode", "gamma_driver"}
    assert all(c["passed"] for c in cases)
