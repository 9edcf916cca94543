import importlib.util
from pathlib import Path

from omegaconf import OmegaConf
import pytest

from srblab.config import load_config

ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="module")
def reproduce():
    spec = importlib.util.spec_from_file_location("reproduce", ROOT / "reproduce.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_batch_jobs(reproduce):
    args = OmegaConf.structured(reproduce.BatchConfig)
    jobs = reproduce._jobs(args)
    names = [name for name, _, _ in jobs]
    assert names[:3] == ["sweep_wide", "sweep_narrow", "bisect"]
    assert "orbit_-0.003" in names
    assert "expansion_1" in names
    assert len(names) == len(set(names))
    for name, subcommand, overrides in jobs:
        conf = load_config({**overrides, "subcommand": subcommand, "output.dir": name})
        assert conf.orbit.seed == 2036
        assert conf.output.quiet


def test_batch_step_selection(reproduce):
    args = OmegaConf.structured(reproduce.BatchConfig)
    args.steps = ["phi"]
    assert [name for name, _, _ in reproduce._jobs(args)] == ["phi"]
