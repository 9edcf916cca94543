"""Run configuration: structured defaults, `key = value` files and command line overrides.

Precedence is flags > config file > defaults. Keys are dotted (`orbit.length`, `ulam.nx`).
"""
from dataclasses import dataclass, field
import json
import logging
import typing as tp

from omegaconf import MISSING, OmegaConf
from omegaconf.errors import OmegaConfBaseException
import yaml

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("sweep", "bisect", "orbit", "ulam", "phi-check", "cones", "trap-check", "smooth")


class ConfigError(ValueError):
    pass


@dataclass
class FamilyConfig:
    name: str = "experimental"
    epsilon: float = 0.01
    delta: float = 0.01
    m: int = 7
    a: float = 0.


@dataclass
class OrbitConfig:
    burn_in: int = 1000
    length: int = 1_000_000
    seed: int = 2036
    # fixed initial point, drawn from the seed when unset
    x: tp.Optional[float] = None
    y: tp.Optional[float] = None


@dataclass
class GridConfig:
    nx: int = 512
    ny: int = 512
    snapshots: tp.List[int] = field(default_factory=list)


@dataclass
class UlamConfig:
    dim: int = 2
    nx: int = 256
    ny: int = 256
    cells: int = 4096
    samples_per_cell: int = 64
    method: str = "sampling"
    tol: float = 1e-12
    max_iter: int = 10_000


@dataclass
class SweepConfig:
    a_lo: float = -0.02
    a_hi: float = 0.02
    step: float = 1e-3
    bracket: tp.List[float] = field(default_factory=lambda: [-0.004, 0.004])
    resolution: float = 1e-4
    num_workers: int = 1


@dataclass
class PhiConfig:
    params: tp.List[float] = field(default_factory=lambda: [0.02, 0.1, 1.2])
    grid_n: int = 100_000
    box_a: tp.List[float] = field(default_factory=lambda: [-2., -1., 0., 1., 2.])


@dataclass
class TrapConfig:
    grid_n: int = 1000
    n_max: int = 2
    certificate_grid_n: int = 100_000


@dataclass
class ConeConfig:
    grid_n: int = 256
    ms: tp.List[int] = field(default_factory=lambda: [7, 17, 37, 77])
    calibrate: bool = False


@dataclass
class SmoothConfig:
    a_center: float = 0.005
    h: tp.List[float] = field(default_factory=lambda: [4e-4, 2e-4, 1e-4])
    observable: str = "sin2piy"
    band: tp.List[float] = field(default_factory=lambda: [0., 1.])
    nx: int = 128
    ny: int = 128
    samples_per_cell: int = 64


@dataclass
class OutputConfig:
    dir: str = "out"
    gamma: float = 0.5
    gnuplot: bool = False
    dump: bool = False
    quiet: bool = False


@dataclass
class RunConfig:
    subcommand: str = MISSING
    family: FamilyConfig = field(default_factory=FamilyConfig)
    orbit: OrbitConfig = field(default_factory=OrbitConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    ulam: UlamConfig = field(default_factory=UlamConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    phi: PhiConfig = field(default_factory=PhiConfig)
    trap: TrapConfig = field(default_factory=TrapConfig)
    cones: ConeConfig = field(default_factory=ConeConfig)
    smooth: SmoothConfig = field(default_factory=SmoothConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def defaults():
    return OmegaConf.structured(RunConfig)


def parse_config_file(path):
    """Read `key = value` lines, '#' starting a comment, into a dotted dict."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fp:
            lines = fp.read().splitlines()
    except OSError as err:
        raise ConfigError(f"Cannot read config file {path}: {err}")
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        try:
            values[key] = yaml.safe_load(value.strip()) if value.strip() else None
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {err}")
    return values


def _known(conf, key):
    parent, _, leaf = key.rpartition(".")
    node = OmegaConf.select(conf, parent) if parent else conf
    return OmegaConf.is_dict(node) and leaf in node.keys()


def _apply(conf, values, origin):
    for key, value in values.items():
        if not _known(conf, key):
            raise ConfigError(f"Unknown config key {key!r} ({origin})")
        try:
            OmegaConf.update(conf, key, value, merge=True)
        except OmegaConfBaseException as err:
            raise ConfigError(f"Invalid value {value!r} for {key} ({origin}): {err}")


def load_config(flags=None, config_file=None, base=None):
    """Resolve the run configuration.

    :param flags: dotted key -> value from the command line, None values ignored.
    :param config_file: optional `key = value` file.
    :param base: starting values (e.g. the config stored in a manifest).
    """
    conf = defaults()
    if base is not None:
        _apply(conf, _flatten(base), "manifest")
    if config_file is not None:
        _apply(conf, parse_config_file(config_file), str(config_file))
    if flags:
        _apply(conf, {k: v for k, v in flags.items() if v is not None}, "command line")
    validate(conf)
    return conf


def _flatten(values, prefix=""):
    out = {}
    for key, value in values.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, dotted + "."))
        else:
            out[dotted] = value
    return out


def validate(conf):
    if OmegaConf.is_missing(conf, "subcommand"):
        raise ConfigError("No subcommand given")
    if conf.subcommand not in SUBCOMMANDS:
        raise ConfigError(f"Unknown subcommand {conf.subcommand!r}")
    if conf.family.name not in ("theoretical", "experimental"):
        raise ConfigError(f"Unknown family {conf.family.name!r}")
    if conf.ulam.method not in ("sampling", "preimage"):
        raise ConfigError(f"Unknown Ulam method {conf.ulam.method!r}")
    if conf.output.gamma <= 0:
        raise ConfigError(f"output.gamma must be positive, got {conf.output.gamma}")
    if len(conf.sweep.bracket) != 2:
        raise ConfigError("sweep.bracket needs two values")


def to_yaml(conf):
    return OmegaConf.to_yaml(conf)


def to_dict(conf):
    return OmegaConf.to_container(conf, resolve=True)


def load_manifest(path):
    try:
        with open(path, encoding="utf-8") as fp:
            manifest = json.load(fp)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"Cannot read manifest {path}: {err}")
    if "config" not in manifest:
        raise ConfigError(f"{path} has no config section")
    return manifest["config"]
