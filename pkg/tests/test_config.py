from pathlib import Path

import numpy as np
import pytest

from jumpbsde.config import build_experiment, load_config
from jumpbsde.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = {
    "model": {"preset": "constant", "sigma": 1.0},
    "generator": {"preset": "zero"},
    "terminal": {"preset": "identity"},
    "grid": {"T_max": 1.0, "n_steps": 10},
    "mc": {"n_paths": 100},
}


def _with(**sections):
    raw = {k: dict(v) for k, v in BASE.items()}
    for k, v in sections.items():
        raw[k] = v
    return raw


@pytest.mark.parametrize("path", sorted(p.name for p in CONFIGS.glob("*.toml") if p.name != "bad_key.toml"))
def test_shipped_presets_load(path):
    exp = load_config(CONFIGS / path)
    assert exp.mc.n_paths > 0 and exp.grid.n_steps > 0


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match=r"unknown key 'mc\.n_path'"):
        load_config(CONFIGS / "bad_key.toml")


def test_unknown_section_and_missing_section():
    with pytest.raises(ConfigError, match="unknown section 'solver'"):
        build_experiment(_with(solver={}))
    raw = _with()
    del raw["grid"]
    with pytest.raises(ConfigError, match="missing section 'grid'"):
        build_experiment(raw)


def test_overrides_are_echoed():
    exp = build_experiment(_with(), seed=42, n_paths=7)
    assert exp.seed == 42 and exp.mc.n_paths == 7
    assert exp.raw["mc"] == {"n_paths": 7, "seed": 42}


def test_polynomial_model_and_jump_table():
    raw = _with(
        model={"preset": "polynomial", "m": 1, "d": 1, "l": 1, "x0": 0.5,
               "a": [[0.0, -1.0]], "b": [[[0.2]]], "c": [[[1.0]]]},
        jumps={"marks": [1.0, 2.0], "intensities": [[0.5, 0.25]]},
        generator={"preset": "terms", "terms": {"y": -1.0}, "gamma_table": [[0.5, -0.5]]},
    )
    exp = build_experiment(raw)
    np.testing.assert_allclose(exp.model.a(0.0, np.array([[2.0]])), [[-2.0]])
    assert exp.measure.total_intensity == 0.75
    np.testing.assert_array_equal(exp.generator.gamma(0.0, np.array([2.0, 1.0])), [[-0.5], [0.5]])


@pytest.mark.parametrize("section, body, message", [
    ("model", {"preset": "polynomial", "a": [0.0], "b": [[[1.0]]]}, "model.a"),
    ("model", {"preset": "spline"}, "unknown model preset"),
    ("jumps", {"marks": [1.0], "intensities": [[1.0, 2.0]]}, "jumps.intensities"),
    ("generator", {"preset": "terms", "terms": {"cube": 1.0}}, "unknown generator term"),
    ("generator", {"preset": "constant"}, "generator.k"),
    ("terminal", {"preset": "square"}, "growth_constant"),
    ("mc", {"n_paths": 0}, "n_paths"),
    ("mc", {"n_paths": 10, "seed": -1}, "seed"),
    ("grid", {"T_max": 1.0, "n_steps": "ten"}, "invalid config value"),
])
def test_invalid_values_raise_config_error(section, body, message):
    with pytest.raises(ConfigError, match=message):
        build_experiment(_with(**{section: body}))


def test_declared_moduli_override_defaults():
    exp = build_experiment(_with(generator={"preset": "terms", "terms": {"z": 1.0},
                                            "u2": {"scale": 0.1, "rate": 2.0}}))
    assert exp.generator.u2(0.0) == 0.1
    assert exp.generator.u2(1.0) == pytest.approx(0.1 * np.exp(-2.0))


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n")
    with pytest.raises(ConfigError):
        load_config(bad)
