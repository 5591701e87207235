import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunnelsplit.cli import CONFIG_KEYS, main, parse_config
from tunnelsplit.errors import ConfigError


def _run(tmp_path, command, cfg, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def test_topology_double_well(tmp_path):
    code, out = _run(tmp_path, "topology", {"model": "double_well", "energy": 0})
    assert code == 0
    assert "genus: 1" in (out / "topology.txt").read_text()
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 0 and "conventions" in man and "tolerances" in man


def test_topology_normal_form(tmp_path):
    code, out = _run(tmp_path, "topology", {"model": "normal_form", "energy": 0.00619})
    assert code == 0
    assert "genus: 9, holes: 28" in (out / "topology.txt").read_text()


def test_reducible_curve_exits_with_validity_code(tmp_path):
    cfg = {"model": "custom_polynomial", "parameters": {"coefficients": [[2, 0, 1], [0, 2, -1]]}, "energy": 0}
    code, out = _run(tmp_path, "topology", cfg)
    assert code == 4
    assert "intransitive" in (out / "topology.txt").read_text().lower()


def test_actions_symmetric_double_well(tmp_path):
    code, out = _run(tmp_path, "actions", {"model": "double_well", "energy": -0.5})
    assert code == 0
    text = (out / "actions.txt").read_text()
    assert "S^(+inf) = 0" in text and "FAIL" not in text
    assert (out / "actions.csv").read_text().startswith("kind,name")


def test_actions_triple_well_has_quantization_section(tmp_path):
    cfg = {"model": "triple_well", "energy": 0, "hbar_grid": {"min": 2, "max": 4, "points": 3}}
    code, out = _run(tmp_path, "actions", cfg)
    assert code == 0
    assert "simultaneous quantization" in (out / "actions.txt").read_text().lower()


def test_splitting_csv_and_determinism(tmp_path):
    cfg = {
        "model": "double_well",
        "quantum_number": 0,
        "hbar_grid": {"min": 4, "max": 8, "points": 3},
        "sources": ["semiclassical", "exact"],
    }
    code, out = _run(tmp_path, "splitting", cfg, "--threads", "1")
    assert code == 0
    a = (out / "splitting.csv").read_text()
    lines = a.splitlines()
    assert lines[0] == "inv_hbar,source,variant,delta_E,sign_flag,error_code"
    assert len(lines) == 7
    code, out = _run(tmp_path, "splitting", cfg, "--threads", "3")
    assert (out / "splitting.csv").read_text() == a


def test_unknown_key_is_a_config_error(tmp_path):
    code, _ = _run(tmp_path, "topology", {"model": "double_well", "energy": 0, "colour": "red"})
    assert code == 2


def test_both_energy_and_quantum_number_rejected(tmp_path):
    code, _ = _run(tmp_path, "topology", {"model": "double_well", "energy": 0, "quantum_number": 1})
    assert code == 2


def test_decreasing_grid_rejected():
    with pytest.raises(ConfigError):
        parse_config({"model": "double_well", "energy": 0, "hbar_grid": {"min": 5, "max": 2, "points": 4}})


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{model: ")
    assert main(["topology", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_non_symmetric_quantum_run_is_a_validity_violation(tmp_path):
    cfg = {"model": "double_well", "parameters": {"roots": [-2, -1, 1, 3]}, "energy": 0.5,
           "hbar_grid": {"min": 2, "max": 3, "points": 2}}
    code, out = _run(tmp_path, "quantum", cfg)
    assert code == 4
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 4


_keys = st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12).filter(lambda k: k not in CONFIG_KEYS)


@settings(max_examples=40, deadline=None)
@given(_keys)
def test_any_unknown_key_rejected(key):
    with pytest.raises(ConfigError):
        parse_config({"model": "double_well", "energy": 0, key: 1})
