import json

import pytest

from ptmeta.cli import figure_recipe, main, parse_config, resolve_params
from ptmeta.errors import ConfigurationError


def _body(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def _header(path):
    return {l[2:].split(":", 1)[0]: l.split(":", 1)[1].strip()
            for l in path.read_text().splitlines() if l.startswith("#")}


def test_config_overrides_flags(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"shape": {"kind": "disk", "radius": 0.2}, "gap": 0.4, "seed": 7}))
    cfg = parse_config(["band", "--radius", "0.1", "--a", "3e-4", "--config", str(cfg_file),
                        "--output", str(tmp_path)])
    assert cfg.params["radius"] == 0.2 and cfg.params["gap"] == 0.4
    assert cfg.params["a"] == 3e-4 and cfg.seed == 7


def test_dim_selects_shape():
    assert resolve_params("capacitance", {"dim": 2})["shape"] == "disk"
    with pytest.raises(ConfigurationError, match="dim"):
        resolve_params("capacitance", {"dim": 4})


def test_hash_depends_on_params():
    a = parse_config(["green-check", "--n-points", "3"])
    b = parse_config(["green-check", "--n-points", "4"])
    assert a.config_hash() != b.config_hash()
    assert a.config_hash() == parse_config(["green-check", "--n-points", "3"]).config_hash()


@pytest.mark.parametrize("argv,field", [
    (["capacitance", "--shape", "cube"], "shape"),
    (["capacitance", "--radius", "-1"], "radius"),
    (["dimer-spectrum", "--n-b", "1"], "n_b"),
    (["capacitance", "--gap", "x"], "gap"),
])
def test_validation_exit_code(argv, field, tmp_path, capsys):
    assert main(argv + ["--output", str(tmp_path)]) == 2
    assert field in capsys.readouterr().err


def test_unknown_config_field(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"colour": 3}))
    assert main(["band", "--config", str(f)]) == 2
    assert "colour" in capsys.readouterr().err


def test_numerical_failure_writes_diagnostics(tmp_path):
    rc = main(["screen-scatter", "--omega-min", "4", "--omega-max", "5", "--n-omega", "2",
               "--output", str(tmp_path)])
    assert rc == 3
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["error"] == "UnsupportedRegimeError"


def test_green_check_deterministic(tmp_path):
    for sub in ("r1", "r2"):
        assert main(["green-check", "--n-points", "2", "--n-pairs", "2", "--seed", "5",
                     "--output", str(tmp_path / sub)]) == 0
    p1, p2 = tmp_path / "r1" / "green_check.csv", tmp_path / "r2" / "green_check.csv"
    assert _body(p1) == _body(p2)
    h = _header(p1)
    assert h["config_hash"] == _header(p2)["config_hash"]
    assert h["version"] == "ptmeta 0.1.0"
    summary = json.loads((tmp_path / "r1" / "green_check.json").read_text())["summary"]
    assert summary["max_abs_diff"] < 1e-8


def test_dimer_spectrum_csv(tmp_path, sphere_C):
    assert main(["dimer-spectrum", "--n-b", "4", "--output", str(tmp_path)]) == 0
    body = _body(tmp_path / "dimer_spectrum.csv")
    assert body[0].split(",") == ["b", "re_omega1", "im_omega1", "re_omega2", "im_omega2"]
    assert len(body) == 5
    s = json.loads((tmp_path / "dimer_spectrum.json").read_text())["summary"]
    assert 0.4e-4 < s["b0"] < 0.6e-4


@pytest.mark.parametrize("tag,sub", [("fig2", "dimer-spectrum"), ("fig4", "band"),
                                     ("fig5", "screen-scatter"), ("fig6", "extraordinary")])
def test_figure_recipes(tag, sub):
    cfg = figure_recipe(tag)
    assert cfg.subcommand == sub and cfg.tag == tag
    with pytest.raises(ConfigurationError):
        figure_recipe("fig9")


def test_figure_tag_in_header(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"n_b": 3}))
    assert main(["figure", "--tag", "fig2", "--config", str(f), "--output", str(tmp_path)]) == 0
    assert _header(tmp_path / "dimer_spectrum.csv")["figure"] == "fig2"
