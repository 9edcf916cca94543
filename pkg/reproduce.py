#!/usr/bin/env python3
"""Regenerate every figure and report of the study in one batch.

    ./reproduce.py out_dir=figures num_workers=8
    ./reproduce.py steps='[sweep_wide,orbits]' length=100000
"""
from dataclasses import dataclass, field
import logging
import os
import typing as tp

import hydra
from hydra.core.config_store import ConfigStore
from omegaconf import DictConfig

logger = logging.getLogger(__name__)

STEPS = ["sweep_wide", "sweep_narrow", "bisect", "orbits", "phi", "trap", "cones", "ulam",
         "smooth"]


@dataclass
class BatchConfig:
    out_dir: str = "figures"
    steps: tp.List[str] = field(default_factory=lambda: list(STEPS))
    seed: int = 2036
    length: int = 1_000_000
    burn_in: int = 1000
    num_workers: int = 4
    orbit_a: tp.List[float] = field(default_factory=lambda: [-0.02, -0.006, -0.003, -0.002])
    trap_a: tp.List[float] = field(default_factory=lambda: [-0.02, -0.01])
    raster: int = 512
    ulam_grid: int = 256
    cone_grid: int = 256
    verbose: bool = False


ConfigStore.instance().store(name="batch_schema", node=BatchConfig)


def _jobs(args):
    """(name, subcommand, dotted overrides) of every run in the batch."""
    common = {"orbit.seed": args.seed, "orbit.length": args.length,
              "orbit.burn_in": args.burn_in, "sweep.num_workers": args.num_workers,
              "output.quiet": True}
    jobs = []
    if "sweep_wide" in args.steps:
        jobs.append(("sweep_wide", "sweep", {"sweep.a_lo": -0.02, "sweep.a_hi": 0.02,
                                             "sweep.step": 1e-3, "output.gnuplot": True}))
    if "sweep_narrow" in args.steps:
        jobs.append(("sweep_narrow", "sweep", {"sweep.a_lo": -0.004, "sweep.a_hi": 0.004,
                                               "sweep.step": 1e-4, "output.gnuplot": True}))
    if "bisect" in args.steps:
        jobs.append(("bisect", "bisect", {"sweep.bracket": [-0.004, 0.004],
                                          "sweep.resolution": 1e-4}))
    if "orbits" in args.steps:
        for a in args.orbit_a:
            jobs.append((f"orbit_{a:g}", "orbit", {"family.a": a, "grid.nx": args.raster,
                                                   "grid.ny": args.raster}))
    if "phi" in args.steps:
        jobs.append(("phi", "phi-check", {}))
    if "trap" in args.steps:
        for a in args.trap_a:
            jobs.append((f"trap_{a:g}", "trap-check", {"family.name": "theoretical",
                                                       "family.a": a}))
        jobs.append(("expansion_1", "trap-check", {"family.name": "theoretical",
                                                   "family.a": 1.0, "trap.n_max": 2}))
    if "cones" in args.steps:
        for calibrate in (False, True):
            name = "cones_calibrated" if calibrate else "cones_fixed"
            jobs.append((name, "cones", {"family.name": "theoretical",
                                         "cones.grid_n": args.cone_grid,
                                         "cones.calibrate": calibrate}))
    if "ulam" in args.steps:
        jobs.append(("ulam", "ulam", {"family.a": 0.01, "ulam.nx": args.ulam_grid,
                                      "ulam.ny": args.ulam_grid, "output.dump": True}))
    if "smooth" in args.steps:
        jobs.append(("smooth", "smooth", {"smooth.a_center": 0.005}))
    return [(name, sub, {**common, **over}) for name, sub, over in jobs]


def _main(args):
    from srblab.cli import run
    from srblab.config import load_config

    if args.verbose:
        logging.getLogger("srblab").setLevel(logging.DEBUG)
    out_dir = hydra.utils.to_absolute_path(args.out_dir)
    logger.info("Writing the batch to %s", out_dir)
    failed = []
    for name, subcommand, overrides in _jobs(args):
        overrides["output.dir"] = os.path.join(out_dir, name)
        overrides["subcommand"] = subcommand
        logger.info("Running %s (%s)", name, subcommand)
        status = run(load_config(overrides))
        if status:
            logger.error("%s exited with status %d", name, status)
            failed.append(name)
    if failed:
        raise RuntimeError(f"Failed steps: {', '.join(failed)}")


@hydra.main(config_path="conf", config_name="config", version_base="1.1")
def main(args: DictConfig):
    try:
        _main(args)
    except Exception:
        logger.exception("Some error happened")
        # Hydra swallows the return value, exit explicitly
        os._exit(1)


if __name__ == "__main__":
    main()
