"""Command line front end: `python -m srblab <subcommand> [flags]`.

Every run writes its artifacts and a manifest.json into `output.dir`; rerunning with
`--replay <dir>/manifest.json` rewrites byte-identical files.
"""
import argparse
import logging
from pathlib import Path
import sys

import colorlog
import numpy as np

from . import __version__
from .bifurcation import find_sign_change, observable, sign_changes, smoothness_diagnostic, sweep
from .bump import build_phi, validate_phi
from .cones import ConeParams, min_cone_constant, multiplier_sequence, transversality_report
from .config import ConfigError, load_config, load_manifest, to_dict, to_yaml
from .dynamics import (OrbitSpec, band_mass, central_lyapunov, check_trapping,
                       fiber_fixed_points, iterate_derivative, occupied_bands, orbit_raster,
                       orbit_snapshots, uniform_expansion_certificate)
from .export import write_csv, write_gnuplot, write_json, write_manifest, write_pgm
from .maps import Family, FiberMap, TorusPoint, fiber_deriv
from .transfer import (density_raster, integrate_observable, save_operator, stationary_density,
                       ulam_1d, ulam_2d)
from .utils import bold

logger = logging.getLogger(__name__)

LOG_FORMAT = ("[%(cyan)s%(asctime)s%(reset)s][%(blue)s%(name)s%(reset)s]"
              "[%(log_color)s%(levelname)s%(reset)s] - %(message)s")
TRAPPED_BAND = 0.2
BANDS = 32


def add_flags(parser):
    """Flags shared by every subcommand. Dotted destinations are config keys."""
    parser.add_argument('--config', help="`key = value` config file")
    parser.add_argument('--show-config', action='store_true',
                        help="print the resolved configuration and exit")
    parser.add_argument('--out', dest='output.dir', help="output directory")
    parser.add_argument('--quiet', dest='output.quiet', action='store_const', const=True,
                        help="no summary line on stdout")
    parser.add_argument('--family', dest='family.name', choices=["theoretical", "experimental"])
    parser.add_argument('--epsilon', dest='family.epsilon', type=float)
    parser.add_argument('--delta', dest='family.delta', type=float)
    parser.add_argument('--m', dest='family.m', type=int)
    parser.add_argument('--a', dest='family.a', type=float)
    parser.add_argument('--seed', dest='orbit.seed', type=int)
    parser.add_argument('--burn-in', dest='orbit.burn_in', type=int)
    parser.add_argument('--length', dest='orbit.length', type=int)
    parser.add_argument('--workers', dest='sweep.num_workers', type=int)
    parser.add_argument('-v', '--verbose', action='store_const', const=logging.DEBUG,
                        default=argparse.SUPPRESS, help="more logging")


parser = argparse.ArgumentParser(
    'srblab', description="Central exponents and SRB densities of skew products on the torus")
parser.add_argument('--replay', help="rerun the configuration stored in a manifest.json")
parser.add_argument('-v', '--verbose', action='store_const', const=logging.DEBUG,
                    default=argparse.SUPPRESS, help="more logging")
subparsers = parser.add_subparsers(dest='subcommand')

sub = subparsers.add_parser('sweep', help="central exponent along a parameter grid")
add_flags(sub)
sub.add_argument('--a-lo', dest='sweep.a_lo', type=float)
sub.add_argument('--a-hi', dest='sweep.a_hi', type=float)
sub.add_argument('--step', dest='sweep.step', type=float)
sub.add_argument('--gnuplot', dest='output.gnuplot', action='store_const', const=True,
                 help="also write sweep.dat for gnuplot")

sub = subparsers.add_parser('bisect', help="localize the sign change of the central exponent")
add_flags(sub)
sub.add_argument('--bracket', dest='sweep.bracket', type=float, nargs=2, metavar=("LO", "HI"))
sub.add_argument('--resolution', dest='sweep.resolution', type=float)

sub = subparsers.add_parser('orbit', help="orbit density raster")
add_flags(sub)
sub.add_argument('--nx', dest='grid.nx', type=int)
sub.add_argument('--ny', dest='grid.ny', type=int)
sub.add_argument('--x', dest='orbit.x', type=float, help="initial x, random if unset")
sub.add_argument('--y', dest='orbit.y', type=float, help="initial y, random if unset")
sub.add_argument('--snapshots', dest='grid.snapshots', type=int, nargs='+',
                 help="also draw the orbit up to these times")
sub.add_argument('--gamma', dest='output.gamma', type=float)

sub = subparsers.add_parser('ulam', help="Ulam operator, SRB density and spectral gap")
add_flags(sub)
sub.add_argument('--dim', dest='ulam.dim', type=int, choices=[1, 2])
sub.add_argument('--nx', dest='ulam.nx', type=int)
sub.add_argument('--ny', dest='ulam.ny', type=int)
sub.add_argument('--cells', dest='ulam.cells', type=int, help="cells of the 1D operator")
sub.add_argument('--samples', dest='ulam.samples_per_cell', type=int)
sub.add_argument('--method', dest='ulam.method', choices=["sampling", "preimage"])
sub.add_argument('--dump', dest='output.dump', action='store_const', const=True,
                 help="write the operator as operator.ulam")
sub.add_argument('--gamma', dest='output.gamma', type=float)

sub = subparsers.add_parser('phi-check', help="build phi and check its conditions")
add_flags(sub)
sub.add_argument('--grid-n', dest='phi.grid_n', type=int)

sub = subparsers.add_parser('cones', help="cone constant and transversality measure")
add_flags(sub)
sub.add_argument('--grid-n', dest='cones.grid_n', type=int)
sub.add_argument('--ms', dest='cones.ms', type=int, nargs='+')
sub.add_argument('--calibrate', dest='cones.calibrate', action='store_const', const=True,
                 help="recalibrate the cone for every m")

sub = subparsers.add_parser('trap-check', help="trapping region, fixed points, expansion")
add_flags(sub)
sub.add_argument('--grid-n', dest='trap.grid_n', type=int)
sub.add_argument('--n-max', dest='trap.n_max', type=int)

sub = subparsers.add_parser('smooth', help="finite differences of a -> integral of psi")
add_flags(sub)
sub.add_argument('--a-center', dest='smooth.a_center', type=float)
sub.add_argument('--h', dest='smooth.h', type=float, nargs='+')
sub.add_argument('--observable', dest='smooth.observable', choices=["one", "sin2piy", "band"])
sub.add_argument('--band', dest='smooth.band', type=float, nargs=2, metavar=("LO", "HI"))
sub.add_argument('--nx', dest='smooth.nx', type=int)
sub.add_argument('--ny', dest='smooth.ny', type=int)


def setup_logging(level=logging.INFO):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def make_family(conf):
    fam = conf.family
    if fam.name == "theoretical":
        return Family.theoretical(fam.epsilon, fam.delta, fam.m)
    return Family.experimental(fam.delta, fam.m)


def make_spec(conf):
    orbit = conf.orbit
    initial = None
    if orbit.x is not None and orbit.y is not None:
        initial = TorusPoint(orbit.x, orbit.y)
    return OrbitSpec(initial, orbit.burn_in, orbit.length, orbit.seed)


def _sweep(conf, out):
    family = make_family(conf)
    table = sweep(family, conf.sweep.a_lo, conf.sweep.a_hi, conf.sweep.step, make_spec(conf),
                  conf.sweep.num_workers)
    write_csv(table, out / "sweep.csv")
    outputs = ["sweep.csv"]
    if conf.output.gnuplot:
        write_gnuplot(table, out / "sweep.dat")
        outputs.append("sweep.dat")
    for left, right in sign_changes(table):
        logger.info("chi_c changes sign between a=%g and a=%g", left.a, right.a)
    return outputs, {format(r.a, ".17g"): r.seed for r in table.records}


def _bisect(conf, out):
    family = make_family(conf)
    change = find_sign_change(family, conf.sweep.bracket, make_spec(conf),
                              conf.sweep.resolution)
    write_json({"family": family.describe(), **change.as_dict()}, out / "sign_change.json")
    return ["sign_change.json"], {"master": conf.orbit.seed}


def _orbit(conf, out):
    family = make_family(conf)
    system = family.system(conf.family.a)
    spec = make_spec(conf)
    raster = orbit_raster(system, spec, conf.grid.nx, conf.grid.ny)
    estimate = central_lyapunov(system, spec)
    write_pgm(raster, out / "orbit.pgm", conf.output.gamma)
    outputs = ["orbit.pgm", "orbit.json"]
    for t, snap in orbit_snapshots(system, spec, conf.grid.snapshots,
                                   conf.grid.nx, conf.grid.ny).items():
        name = f"orbit_{t}.pgm"
        write_pgm(snap, out / name, conf.output.gamma)
        outputs.append(name)
    start = estimate.initial_used
    write_json({
        "family": family.describe(), "a": conf.family.a,
        "initial": [start.x, start.y], "total": raster.total,
        "band_mass": band_mass(raster, TRAPPED_BAND), "band_height": TRAPPED_BAND,
        "occupied_bands": occupied_bands(raster, BANDS), "bands": BANDS,
        "chi_c": estimate.chi_c, "chi_u": estimate.chi_u,
    }, out / "orbit.json")
    return outputs, {"orbit": spec.seed}


def _log_slope(fiber):
    def psi(*coords):
        return np.log(np.abs(fiber_deriv(fiber, coords[-1])))
    return psi


def _ulam(conf, out):
    family = make_family(conf)
    a = conf.family.a
    seed = conf.orbit.seed
    if conf.ulam.dim == 1:
        op = ulam_1d(family.fiber(a), conf.ulam.cells, conf.ulam.samples_per_cell, seed,
                     conf.ulam.method)
    else:
        op = ulam_2d(family.system(a), conf.ulam.nx, conf.ulam.ny,
                     conf.ulam.samples_per_cell, seed)
    report = stationary_density(op, conf.ulam.tol, conf.ulam.max_iter,
                                near_critical=family.near_critical(a))
    chi_c = integrate_observable(report.stationary, _log_slope(family.fiber(a)), op.shape)
    density = density_raster(op, report.stationary)
    outputs = ["spectrum.json"]
    if len(op.shape) == 2:
        write_pgm(density, out / "ulam.pgm", conf.output.gamma)
        outputs.append("ulam.pgm")
    else:
        centers = (np.arange(op.cells) + 0.5) / op.cells
        write_csv((["y", "density"], [[c, d] for c, d in zip(centers, density)]),
                  out / "ulam.csv")
        outputs.append("ulam.csv")
    if conf.output.dump:
        save_operator(op, out / "operator.ulam")
        outputs.append("operator.ulam")
    write_json({
        "family": family.describe(), "a": a, "shape": list(op.shape),
        "samples_per_cell": op.samples, "method": op.method,
        "leading": report.leading, "subleading_modulus": report.subleading_modulus,
        "iterations": report.iterations, "residual": report.residual,
        "converged": report.converged, "slow_mixing": report.slow_mixing,
        "chi_c_density": chi_c,
    }, out / "spectrum.json")
    if not report.converged and not report.slow_mixing:
        raise RuntimeError(f"Stationary density did not converge, residual {report.residual:.3g}")
    return outputs, {"ulam": op.seed}


def _phi_check(conf, out):
    bump = build_phi(conf.phi.params, conf.phi.grid_n)
    rows = [[c.name, c.passed, c.margin, c.worst] for c in validate_phi(bump, conf.phi.grid_n)]
    grid = np.arange(conf.phi.grid_n) / conf.phi.grid_n
    for a in conf.phi.box_a:
        fiber = FiberMap.intermittent(conf.family.epsilon, a, bump)
        slopes = fiber_deriv(fiber, grid)
        lo, hi = float(slopes.min()), float(slopes.max())
        margin = min(lo - 2 / 3, 10 / 3 - hi)
        rows.append([f"box a={a:g}", margin >= 0, margin, lo if lo - 2 / 3 < 10 / 3 - hi else hi])
        if a >= 1:
            square = float(iterate_derivative(fiber, grid, 2).min())
            margin = square - (4 / 3 - 1e-9)
            rows.append([f"square a={a:g}", margin >= 0, margin, square])
    write_csv((["condition", "passed", "margin", "worst"], rows), out / "phi_check.csv")
    failed = [r[0] for r in rows if not r[1]]
    if failed:
        raise RuntimeError(f"phi checks failed: {', '.join(failed)}")
    return ["phi_check.csv"], {}


def _cones(conf, out):
    family = make_family(conf)
    a = conf.family.a
    system = family.system(a)
    c0 = min_cone_constant(system)
    report = transversality_report(system, ConeParams(c0, system.coupling), conf.cones.grid_n)
    sequence = multiplier_sequence(family, conf.cones.ms, conf.cones.grid_n, a,
                                   conf.cones.calibrate)
    write_json({
        "family": family.describe(), "a": a, "c0": c0, "report": report.as_dict(),
        "calibrate": conf.cones.calibrate, "sequence": [r.as_dict() for r in sequence],
    }, out / "cones.json")
    return ["cones.json"], {}


def _trap_check(conf, out):
    if conf.family.name != "theoretical":
        raise ConfigError("trap-check needs the theoretical family")
    family = make_family(conf)
    a, delta, eps = conf.family.a, conf.family.delta, conf.family.epsilon
    fiber = family.fiber(a)
    result = {"family": family.describe(), "a": a}
    if a + delta <= 0:
        trap = check_trapping(family.system(a), eps, a, delta, conf.trap.grid_n)
        result["trapping"] = {"holds": trap.holds, "margin": trap.margin,
                              "interval": list(trap.interval),
                              "endpoint_residual": trap.endpoint_residual}
    else:
        logger.info("a + delta > 0: no trapping region to check")
        result["trapping"] = None
    points = fiber_fixed_points(fiber)
    result["fixed_points"] = [p._asdict() for p in points.points]
    cert = uniform_expansion_certificate(fiber, conf.trap.n_max, conf.trap.certificate_grid_n)
    result["expansion"] = {"certified": cert.certified, "worst_n": cert.worst_n,
                           "uncertified": cert.uncertified, "n_max": conf.trap.n_max,
                           "grid_n": cert.grid_n}
    write_json(result, out / "trap_check.json")
    return ["trap_check.json"], {}


def _smooth(conf, out):
    family = make_family(conf)
    sm = conf.smooth
    psi = observable(sm.observable, tuple(sm.band))
    table = smoothness_diagnostic(family, sm.a_center, list(sm.h), psi, sm.nx, sm.ny,
                                  sm.samples_per_cell, conf.orbit.seed, conf.sweep.num_workers)
    write_csv(table, out / "smooth.csv")
    for a, value in sorted(table.integrals.items()):
        logger.debug("I(%.6g) = %.12g", a, value)
    return ["smooth.csv"], {"ulam": conf.orbit.seed}


COMMANDS = {
    "sweep": _sweep, "bisect": _bisect, "orbit": _orbit, "ulam": _ulam,
    "phi-check": _phi_check, "cones": _cones, "trap-check": _trap_check, "smooth": _smooth,
}


def run(conf):
    """Run one subcommand. Returns the exit status: 0 ok, 1 numerical failure, 2 bad input."""
    out = Path(conf.output.dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        outputs, seeds = COMMANDS[conf.subcommand](conf, out)
        write_manifest(out / "manifest.json", conf.subcommand, to_dict(conf), seeds,
                       outputs, __version__)
    except ValueError as err:
        logger.error("%s", err)
        return 2
    except RuntimeError as err:
        logger.error("%s", err)
        return 1
    except Exception:
        logger.exception("Some error happened")
        return 1
    if not conf.output.quiet:
        print(f"{conf.subcommand}: {len(outputs) + 1} files in {out}")
    logger.info(bold(f"{conf.subcommand} done, outputs in {out}"))
    return 0


def main(argv=None):
    args = parser.parse_args(argv)
    setup_logging(getattr(args, "verbose", logging.INFO))
    flags = {k: v for k, v in vars(args).items() if "." in k}
    try:
        base = load_manifest(args.replay) if args.replay else None
        if args.subcommand is None and base is None:
            parser.print_usage(sys.stderr)
            raise ConfigError("No subcommand given")
        if args.subcommand is not None:
            flags["subcommand"] = args.subcommand
        conf = load_config(flags, getattr(args, "config", None), base)
    except ConfigError as err:
        logger.error("%s", err)
        return 2
    logger.debug(to_yaml(conf))
    if getattr(args, "show_config", False):
        print(to_yaml(conf), end="")
        return 0
    return run(conf)


if __name__ == "__main__":
    sys.exit(main())
