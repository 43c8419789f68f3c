"""
Command line front end.

    twisted-noon scan --ell 10 --n-photons 2 --out runs/scan-l10
    twisted-noon fisher --config runs/scan-l10/config.json --out runs/fisher-l10

Every run writes its resolved config.json next to its outputs; passing that
file back with --config reproduces the outputs exactly.
"""
import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import (
    COMMAND_CONFIGS,
    RunConfig,
    apply_override,
    finalize,
    run_config_from_dict,
)
from .converters import HomConverter
from .estimation import (
    angular_uncertainty,
    crb_check,
    fisher_information,
    fit_fringe,
    fit_hom_dip,
    poisson_uncertainty,
    scaling_report,
    sensitivity_frame,
    sensitivity_table,
    theory_curve,
)
from .exceptions import NoonError, NumericalError, exit_code
from .export.writers import load_json, save_csv, save_json, tableize
from .fields import (
    Grid,
    HologramSpec,
    export_hologram,
    mub_overlap_report,
    synth_oam,
    synth_petal,
)
from .fock import verify_identities
from .simulation import hom_scan, simulate_scan, witness_scan

logger = logging.getLogger(__name__)


def _comma_ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from None


# flag dest -> dotted config path, per command
_SCAN_FLAGS = {
    "ell": "ell",
    "n_photons": "n_photons",
    "scheme": "scheme",
    "repetitions": "repetitions",
    "integration_time": "integration_time_s",
    "indistinguishability": "source.indistinguishability",
    "pair_rate": "source.pair_rate",
    "loss": "loss.preset",
}
OVERRIDES = {
    "scan": _SCAN_FLAGS,
    "fisher": dict(
        {dest: f"scan.{path}" for dest, path in _SCAN_FLAGS.items()},
        grid_points="grid_points",
    ),
    "sensitivity": {
        "ells": "ells",
        "photon_numbers": "photon_numbers",
        "repetitions": "scan.repetitions",
        "workers": "workers",
        "indistinguishability": "scan.source.indistinguishability",
    },
    "hom": {
        "ell": "ell",
        "repetitions": "repetitions",
        "integration_time": "integration_time_s",
        "span": "delay_span_fs",
        "points": "delay_points",
    },
    "holo": {
        "ell": "ell",
        "mode": "mode",
        "grid_px": "grid_px",
        "grating_period": "grating_period",
        "masking": "amplitude_masking",
        "image_format": "image_format",
    },
    "witness": {
        "ell": "ell",
        "preparation": "preparation",
        "indistinguishability": "indistinguishability",
        "dephasing": "dephasing",
        "counts": "counts_per_setting",
    },
    "noon-verify": {},
}


def _scan_flags(p):
    p.add_argument("--ell", type=int, help="OAM value l")
    p.add_argument("--n-photons", type=int, choices=[1, 2])
    p.add_argument("--scheme", choices=["orthogonal", "identical"])
    p.add_argument("--repetitions", type=int)
    p.add_argument("--integration-time", type=float, help="seconds per repetition")
    p.add_argument("--indistinguishability", type=float)
    p.add_argument("--pair-rate", type=float, help="pairs per second")
    p.add_argument("--loss", choices=["ideal", "measured"], help="loss preset")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="root seed")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="twisted-noon",
        description="Simulate and analyse rotation measurements with twisted N00N "
        "states.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "scan", parents=[common], help="simulate and fit a rotation scan"
    )
    _scan_flags(p)

    p = sub.add_parser(
        "fisher", parents=[common], help="Fisher information and Cramer-Rao check"
    )
    _scan_flags(p)
    p.add_argument("--grid-points", type=int)

    p = sub.add_parser(
        "sensitivity", parents=[common], help="sensitivity sweep over N and l"
    )
    p.add_argument("--ells", type=_comma_ints)
    p.add_argument("--photon-numbers", type=_comma_ints)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--indistinguishability", type=float)

    p = sub.add_parser(
        "hom", parents=[common], help="Hong-Ou-Mandel delay scan and dip fit"
    )
    p.add_argument("--ell", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--integration-time", type=float)
    p.add_argument("--span", type=float, help="delay span in fs either side of zero")
    p.add_argument("--points", type=int)

    p = sub.add_parser("holo", parents=[common], help="export a mode hologram")
    p.add_argument("--ell", type=int)
    p.add_argument("--mode", choices=["oam", "M1", "M2"])
    p.add_argument("--grid-px", type=int)
    p.add_argument("--grating-period", type=int)
    p.add_argument("--masking", choices=["none", "carve"])
    p.add_argument("--image-format", choices=["pgm", "png"])

    p = sub.add_parser("witness", parents=[common], help="two-photon MUB witness")
    p.add_argument("--ell", type=int)
    p.add_argument("--preparation", choices=["noon", "product"])
    p.add_argument("--indistinguishability", type=float)
    p.add_argument("--dephasing", type=float)
    p.add_argument("--counts", type=float, help="mean counts per setting, 0 for exact")

    sub.add_parser(
        "noon-verify", parents=[common], help="run the state-algebra identity checks"
    )
    return parser


def load_run_config(args):
    if args.config is not None:
        run = run_config_from_dict(load_json(args.config), args.command)
    else:
        run = RunConfig(args.command, params=COMMAND_CONFIGS[args.command]())
    if args.seed is not None:
        run = RunConfig(run.command, args.seed, run.params)
    params = run.params
    given = {
        path: getattr(args, dest)
        for dest, path in OVERRIDES[args.command].items()
        if getattr(args, dest, None) is not None
    }
    # a stored grid and timing belong to the stored (N, l)
    if {path.rpartition(".")[2] for path in given} & {"ell", "n_photons"}:
        if args.command == "scan":
            params = params.for_run(params.n_photons, params.ell)
        elif args.command == "fisher":
            scan = params.scan.for_run(params.scan.n_photons, params.scan.ell)
            params = apply_override(params, "scan", scan)
    for path, value in given.items():
        params = apply_override(params, path, value)
    return RunConfig(run.command, run.seed, params)


def _scan(cfg, seed):
    dataset = simulate_scan(
        cfg,
        cfg.angles_deg,
        cfg.loss.to_model(cfg.ell, cfg.n_photons),
        cfg.source.to_model(),
        seed,
    )
    return dataset, fit_fringe(dataset)


def _fringe_frame(dataset, fit, oversample=10):
    angles = dataset.angles_deg()
    fine = np.linspace(angles[0], angles[-1], oversample * (angles.size - 1) + 1)
    return pd.DataFrame({"angle_deg": fine, "fit": fit.model(np.deg2rad(fine))})


def cmd_scan(run, out):
    cfg = run.params
    dataset, fit = _scan(cfg, run.seed)
    dataset.to_files(out / "dataset.csv", out / "dataset.json")
    save_json(fit.to_dict(), out / "fit.json")
    save_csv(_fringe_frame(dataset, fit), out / "fringe.csv")
    return pd.DataFrame(
        [
            {
                "N": fit.n_photons,
                "l": fit.ell,
                "A": fit.A,
                "D": fit.D,
                "visibility": fit.visibility,
                "visibility_se": fit.visibility_se,
            }
        ]
    )


def cmd_fisher(run, out):
    cfg = run.params
    scan = cfg.scan
    dataset, fit = _scan(scan, run.seed)
    eta = dataset.meta["eta"]

    grid = np.linspace(0.0, fit.period_deg, cfg.grid_points)
    curve = fisher_information(fit, eta, phi_grid=grid)
    curve_frame = curve.to_frame()
    curve_frame["poisson_delta_phi_deg"] = poisson_uncertainty(fit, grid)

    unc = angular_uncertainty(dataset, fit)
    measured = fisher_information(fit, eta, phi_grid=unc.angle_deg)
    crb = crb_check(measured, unc, cfg.crb_tolerance)
    points = unc.to_frame()
    points["inverse_variance_rad"] = 1.0 / np.deg2rad(unc.delta_phi_deg) ** 2
    points["fisher_x_trials"] = measured.information * measured.total_trials
    points["crb_ratio"] = crb.ratio

    dataset.to_files(out / "dataset.csv", out / "dataset.json")
    save_json(fit.to_dict(), out / "fit.json")
    save_csv(curve_frame, out / "fisher_curve.csv")
    save_csv(points, out / "measured.csv")
    report = dict(crb.summary(), total_trials=curve.total_trials, eta=curve.eta)
    save_json(report, out / "crb.json")
    return pd.DataFrame([report])


def _sensitivity_run(scan, seed):
    dataset, fit = _scan(scan, seed)
    logger.info("N=%d l=%d: visibility %.4f", fit.n_photons, fit.ell, fit.visibility)
    return dataset, fit


def cmd_sensitivity(run, out):
    cfg = run.params
    scans = cfg.runs()
    children = np.random.SeedSequence(run.seed).spawn(len(scans))
    seeds = [int(c.generate_state(1)[0]) for c in children]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(_sensitivity_run, scans, seeds))

    points = sensitivity_table(results, cfg.n_best)
    report = scaling_report(points)
    theory = pd.concat(
        [theory_curve(n, cfg.ells, cfg.theory_visibility) for n in cfg.photon_numbers],
        ignore_index=True,
    )
    fits = pd.DataFrame(
        [
            {
                "n_photons": fit.n_photons,
                "ell": fit.ell,
                "seed": dataset.seed,
                "A": fit.A,
                "D": fit.D,
                "visibility": fit.visibility,
            }
            for dataset, fit in results
        ]
    )
    save_csv(sensitivity_frame(points), out / "sensitivity.csv")
    save_csv(report.table, out / "sensitivity_mean.csv")
    save_csv(theory, out / "theory.csv")
    save_csv(fits, out / "fits.csv")
    save_json(report.to_dict(), out / "scaling.json")
    return report.table


def cmd_hom(run, out):
    cfg = run.params
    dataset = hom_scan(
        cfg.delays_fs,
        cfg.source.to_model(),
        cfg.loss.to_model(cfg.ell, 2),
        cfg.integration_time_s,
        cfg.repetitions,
        run.seed,
        cfg.ell,
    )
    fit = fit_hom_dip(dataset)
    normalized = dataset.summary_frame()
    normalized["normalized"] = normalized["mean"] / fit.baseline
    normalized["fit"] = fit.model(dataset.positions) / fit.baseline
    dataset.to_files(out / "hom.csv", out / "hom.json")
    save_json(fit.to_dict(), out / "dip_fit.json")
    save_csv(normalized, out / "hom_normalized.csv")
    return HomConverter().convert_metrics(pd.DataFrame([fit.to_dict()]))


def cmd_holo(run, out):
    cfg = run.params
    grid = Grid.square(cfg.grid_px, aperture_mm=cfg.aperture_mm)
    if cfg.mode == "oam":
        field = synth_oam(cfg.ell, grid)
    else:
        field = synth_petal(cfg.ell, cfg.mode, grid)
    spec = HologramSpec(cfg.grating_period, cfg.phase_depth, cfg.amplitude_masking)
    path = out / f"hologram_l{cfg.ell}_{cfg.mode}.{cfg.image_format}"
    export_hologram(field, spec, path)
    summary = {"ell": cfg.ell, "mode": cfg.mode, "file": path.name}
    if cfg.mub_check:
        report = mub_overlap_report(cfg.ell, grid)
        save_csv(report.to_frame(), out / "mub_overlap.csv")
        summary.update(max_deviation=report.max_deviation, passed=report.passed)
        if not report.passed:
            logger.warning(
                "MUB overlap deviation %.3g exceeds 1e-3", report.max_deviation
            )
    return pd.DataFrame([summary])


def cmd_witness(run, out):
    result = witness_scan(run.params, run.seed)
    save_csv(result.table, out / "witness.csv")
    save_json({"w": result.w}, out / "witness.json")
    return result.table


def cmd_noon_verify(run, out):
    rows = pd.DataFrame(verify_identities(run.seed))
    save_csv(rows, out / "identities.csv")
    if not rows["passed"].all():
        failed = ", ".join(rows.loc[~rows["passed"], "check"])
        raise NumericalError(f"identity checks failed: {failed}")
    return rows


COMMANDS = {
    "scan": cmd_scan,
    "fisher": cmd_fisher,
    "sensitivity": cmd_sensitivity,
    "hom": cmd_hom,
    "holo": cmd_holo,
    "witness": cmd_witness,
    "noon-verify": cmd_noon_verify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        run = finalize(load_run_config(args))
        out = args.out or Path("runs") / args.command
        out.mkdir(parents=True, exist_ok=True)
        save_json(run.to_dict(), out / "config.json")
        summary = COMMANDS[args.command](run, out)
    except NoonError as e:
        logger.error("%s", e)
        return exit_code(e)
    except Exception:
        logger.exception("%s failed", args.command)
        return 3

    if not args.quiet:
        tableize(summary)
    logger.info("outputs written to %s", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
