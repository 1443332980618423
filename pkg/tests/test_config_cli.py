import json
import os
from pathlib import Path

import numpy as np
import pytest

from geoanneal import cli
from geoanneal.config import PRESET_NAMES, load_config, validate
from geoanneal.errors import ParseError, ValidationError


def test_figure1_preset():
    cfg = load_config("figure1")
    assert cfg.system == "cshunt_1q"
    assert cfg.params.kinetic_energy == 3.03 and cfg.params.josephson_energy == 86.2
    assert cfg.schedule.cjj_flux == (2.9, 2.2)
    assert cfg.t_f == 5.0
    assert cfg.mesh_points == 600 and len(cfg.schedule.s_grid) == 100


def test_figure2_preset():
    cfg = load_config("figure2")
    p = cfg.params
    assert (p.kinetic_energy, p.josephson_energy, p.inductive_energy, p.mutual_energy) == \
        (3.44, 684.0, 570.0, 3.98)
    assert cfg.ising.local_fields == (1.0, 0.4)
    assert cfg.ising.coupling(0, 1) == -0.7
    assert cfg.schedule.cjj_flux == (2.6, 1.9)
    assert cfg.t_f == 5.0 and cfg.mesh_points == 200


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_every_preset_validates(name):
    assert load_config(name).experiment == name


def test_unknown_key_is_rejected(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('preset = "figure1"\n[schedule]\npoints = 10\nspeed = 3\n')
    with pytest.raises(ValidationError) as info:
        load_config(p)
    assert info.value.key == "schedule.speed"


def test_parse_error_has_a_line(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "figure1"\n\n[schedule\npoints = 3\n')
    with pytest.raises(ParseError) as info:
        load_config(p)
    assert info.value.line == 3


def test_dynamics_experiment_needs_t_f():
    with pytest.raises(ValidationError) as info:
        validate({"experiment": "figure1", "system": "cshunt_1q"})
    assert info.value.key == "schedule.t_f"


@pytest.mark.parametrize("raw,key", [
    ({"schedule": {"points": 2}}, "schedule.points"),
    ({"circuit": {"josephson_energy": -1.0}}, "circuit.josephson_energy"),
    ({"solver": {"backend": "gpu"}}, "solver.backend"),
    ({"system": "cshunt_1q", "ising": {"local_fields": [1.0]}}, "ising"),
    ({"circuit": {"cshunt_current": "table"}}, "circuit.cshunt_current_table"),
    ({"sweep": {"fidelity_level": 1.5}}, "sweep.fidelity_level"),
])
def test_validation_names_the_key(raw, key):
    with pytest.raises(ValidationError) as info:
        validate(raw)
    assert info.value.key == key


def _small(tmp_path, out="out"):
    p = tmp_path / "small.toml"
    p.write_text(f'preset = "figure1"\noutput_dir = "{tmp_path / out}"\n'
                 "[schedule]\npoints = 30\n[mesh]\npoints = 200\n[dynamics]\noutput_points = 21\n")
    return p


def test_cli_run_is_deterministic(tmp_path):
    cfg = _small(tmp_path)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("schedule.csv", "dynamics.csv", "frame.csv", "pauli.csv", "gap_ratio.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config_sha256"] == json.loads((tmp_path / "b" / "manifest.json").read_text())[
        "config_sha256"]
    assert {"grid", "tolerances", "wall_time_s", "outputs"} <= set(man)
    header = (tmp_path / "a" / "schedule.csv").read_text().splitlines()[0]
    assert header == "s [1],A [GHz],B [GHz],Delta [GHz],g_y [1]"


def test_cli_stage_outputs(tmp_path):
    cfg = _small(tmp_path)
    assert cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "sp")]) == 0
    rows = np.loadtxt(tmp_path / "sp" / "spectrum.csv", delimiter=",", skiprows=1)
    assert rows.shape == (30, 6)
    assert cli.main(["dynamics", "--config", str(cfg), "--out", str(tmp_path / "dy")]) == 0
    data = np.loadtxt(tmp_path / "dy" / "dynamics.csv", delimiter=",", skiprows=1)
    assert data.shape[0] == 21 and data[0, -1] == 1.0


def test_cli_environment_overrides(tmp_path, monkeypatch):
    cfg = _small(tmp_path)
    monkeypatch.setenv("GEOANNEAL_OUT", str(tmp_path / "env"))
    monkeypatch.setenv("GEOANNEAL_THREADS", "2")
    assert cli.main(["frame", "--config", str(cfg)]) == 0
    man = json.loads((tmp_path / "env" / "manifest.json").read_text())
    assert man["workers"] == 2


def test_cli_reports_stage_tagged_errors(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('preset = "figure1"\n[mesh]\nbounds = [1.0, -1.0]\n')
    assert cli.main(["frame", "--config", str(p), "--out", str(tmp_path / "x")]) != 0
    assert "[config]" in capsys.readouterr().err
    p.write_text('preset = "figure1"\n[circuit]\ncshunt_current = "table"\n'
                 f'cshunt_current_table = "{tmp_path / "missing.csv"}"\n')
    assert cli.main(["frame", "--config", str(p), "--out", str(tmp_path / "x")]) != 0
    assert "persistent-current table" in capsys.readouterr().err


def test_cli_verify_report(tmp_path):
    p = tmp_path / "inv.toml"
    p.write_text('preset = "invariants"\n[schedule]\npoints = 40\n[mesh]\npoints = 300\n'
                 "[invariants]\nrefined_points = 81\ninclude_two_qubit = false\n")
    assert cli.main(["verify", "--config", str(p), "--out", str(tmp_path / "v")]) == 0
    report = json.loads((tmp_path / "v" / "invariants.json").read_text())
    names = {r["invariant"]: r for r in report}
    assert names["cshunt_1q: G^C real part"]["passed"]
    assert names["cshunt_1q: iterative vs dense eigenvalues"]["passed"]
    assert all({"value", "tolerance", "passed"} <= set(r) for r in report)
