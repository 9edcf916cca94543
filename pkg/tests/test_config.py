import json

import pytest

from srblab.config import (ConfigError, load_config, load_manifest, parse_config_file, to_dict,
                           to_yaml)


def test_defaults():
    conf = load_config({"subcommand": "sweep"})
    assert conf.orbit.seed == 2036
    assert conf.orbit.length == 1_000_000
    assert conf.sweep.step == 1e-3
    assert conf.family.name == "experimental"


def test_precedence(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# study settings\norbit.length = 5000  # short\norbit.seed = 7\n\n"
                    "cones.ms = [7, 17]\n")
    conf = load_config({"subcommand": "orbit", "orbit.seed": 11, "grid.nx": None}, path)
    assert conf.orbit.length == 5000
    assert conf.orbit.seed == 11
    assert conf.grid.nx == 512
    assert list(conf.cones.ms) == [7, 17]


def test_parse_config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("family.a = -0.003\noutput.dir = figures/run1\n")
    assert parse_config_file(path) == {"family.a": -0.003, "output.dir": "figures/run1"}


@pytest.mark.parametrize("text", ["orbit.lenght = 5\n", "just some words\n",
                                  "orbit.length = many\n"])
def test_bad_config_file(tmp_path, text):
    path = tmp_path / "bad.conf"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config({"subcommand": "orbit"}, path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config({"subcommand": "orbit"}, tmp_path / "nope.conf")


def test_bad_values():
    with pytest.raises(ConfigError):
        load_config({"subcommand": "fly"})
    with pytest.raises(ConfigError):
        load_config({})
    with pytest.raises(ConfigError):
        load_config({"subcommand": "orbit", "family.name": "other"})
    with pytest.raises(ConfigError):
        load_config({"subcommand": "orbit", "output.gamma": 0.})


def test_manifest_base(tmp_path):
    conf = load_config({"subcommand": "ulam", "ulam.nx": 32})
    path = tmp_path / "manifest.json"
    path.write_text('{"config": %s}' % json.dumps(to_dict(conf)))
    again = load_config(None, None, load_manifest(path))
    assert to_yaml(again) == to_yaml(conf)


def test_manifest_without_config(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("{}")
    with pytest.raises(ConfigError):
        load_manifest(path)
