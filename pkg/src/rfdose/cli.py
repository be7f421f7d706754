"""Command-line entry point: ``rfdose <subcommand> [--config PATH] [--seed N] [--out DIR]``.

Exit status is 0 on success and the ``exit_code`` of the error class
otherwise.  ``RFDOSE_THREADS`` sets the number of solver threads.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config, parse_config
from .errors import ConfigError, RfdoseError

log = logging.getLogger("rfdose")

THREADS_ENV = "RFDOSE_THREADS"


def _configure_threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _config(args) -> RunConfig:
    overrides = {"seed": args.seed, "out_dir": args.out}
    if args.config:
        return load_config(args.config, **overrides)
    return parse_config("", **overrides)


def _out(args, cfg: RunConfig | None = None) -> Path:
    out = Path(args.out or (cfg.out_dir if cfg else "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _maps_from(args, frequency: float):
    from .io import read_volume
    from .tissues import PropertyMaps

    s, e, r = (read_volume(p) for p in (args.sigma, args.epsilon, args.rho))
    return PropertyMaps(s.data, e.data, r.data, frequency, s.voxel_size)


# --- subcommands ------------------------------------------------------------

def cmd_phantom(args):
    from .io import write_volume
    from .phantom import make_phantom
    from .pipeline import subject_phantom_spec, training_phantom_specs

    cfg = _config(args)
    out = _out(args, cfg)
    specs = [("", subject_phantom_spec(cfg))]
    if args.training:
        specs += [(f"train{i}_", s) for i, s in enumerate(training_phantom_specs(cfg))]
    for prefix, spec in specs:
        labels, t1, t2 = make_phantom(spec)
        write_volume(labels.labels, out / f"{prefix}labels.dvol", spec.voxel_size, "label-u16")
        write_volume(t1.intensities, out / f"{prefix}t1.dvol", spec.voxel_size)
        write_volume(t2.intensities, out / f"{prefix}t2.dvol", spec.voxel_size)
    print(f"wrote {len(specs)} phantom(s) to {out}")


def cmd_assign(args):
    from .io import read_volume, write_volume
    from .tissues import LabelVolume, assign_properties

    vol = read_volume(args.labels)
    maps = assign_properties(LabelVolume(vol.data, vol.voxel_size), args.frequency)
    out = _out(args)
    for name in ("sigma", "epsilon", "rho"):
        write_volume(getattr(maps, name), out / f"{name}.dvol", vol.voxel_size)
    print(f"wrote property maps at {args.frequency} GHz to {out}")


def cmd_train(args):
    from .pipeline import _Run, obtain_networks
    from .scaling import ScalingParams

    cfg = _config(args).replace(checkpoint_dir=None)
    run = _Run(cfg)
    obtain_networks(cfg, run, ScalingParams.for_frequency(cfg.frequency, cfg.tau))
    print(json.dumps(run.report["training"], indent=2))


def cmd_estimate(args):
    from .condnet.training import ORIENTATIONS, estimate_normalized
    from .io import load_checkpoint, read_volume, write_volume
    from .scaling import NormalizedMaps, ScalingParams, normalize_mri, rescale_properties
    from .tissues import MriVolume

    cfg = _config(args)
    ckpt = Path(args.checkpoints or cfg.checkpoint_dir or Path(cfg.out_dir) / "checkpoints")
    nets = {o: load_checkpoint(ckpt / f"condnet_{o}.ckpt")[0] for o in ORIENTATIONS}
    t1, t2 = (read_volume(p) for p in (args.t1, args.t2))
    raw = estimate_normalized(nets, normalize_mri(MriVolume(t1.data, t1.voxel_size)),
                              normalize_mri(MriVolume(t2.data, t2.voxel_size)))
    if args.labels:
        mask = read_volume(args.labels).data != 0
        raw = NormalizedMaps(*(np.where(mask, a, 0.0) for a in (raw.sigma, raw.epsilon, raw.rho)))
    maps = rescale_properties(raw, ScalingParams.for_frequency(cfg.frequency, cfg.tau), cfg.frequency,
                              t1.voxel_size)
    out = _out(args, cfg)
    for name in ("sigma", "epsilon", "rho"):
        write_volume(getattr(raw, name), out / f"{name}_norm_est.dvol", t1.voxel_size)
        write_volume(getattr(maps, name), out / f"{name}_learned.dvol", t1.voxel_size)
    print(f"wrote estimated maps to {out}")


def cmd_fdtd(args):
    from .fdtd.grid import DipoleSource, GridConfig, build_simulation
    from .fdtd.solver import (SteadyStateConfig, feed_metrics, normalize_to_power, run_to_steady_state,
                              voxel_center_e)
    from .io import write_csv, write_volume

    cfg = _config(args)
    freq = args.frequency or cfg.frequency
    maps = _maps_from(args, freq)
    grid, state = build_simulation(maps, DipoleSource(freq, standoff_mm=cfg.standoff_mm),
                                   GridConfig(cpml_layers=cfg.cpml_layers, margin=cfg.margin))
    probe = []
    ph = run_to_steady_state(grid, state, SteadyStateConfig(cfg.min_periods, cfg.max_periods, cfg.steady_tol),
                             probe=probe)
    z, p = feed_metrics(ph)
    ph = normalize_to_power(ph)
    out = _out(args, cfg)
    for comp, a in zip("xyz", voxel_center_e(ph)):
        write_volume(a, out / f"e{comp}.dvol", maps.voxel_size, "complex-f64")
    write_csv(out / "probe.csv", "probe-v1", ("step", "v", "i"), probe)
    feed = {"impedance": [z.real, z.imag], "accepted_power_raw": p, "steps": state.n,
            "grid": list(grid.dims)}
    (out / "feed.json").write_text(json.dumps(feed, indent=2))
    print(json.dumps(feed))


def cmd_sar(args):
    from .io import read_volume, write_volume
    from .sar import sar_10g_cubic, sar_from_field

    ex, ey, ez = (read_volume(p).data for p in (args.ex, args.ey, args.ez))
    sig, rho = read_volume(args.sigma), read_volume(args.rho)
    mask = read_volume(args.labels).data != 0 if args.labels else None
    e2 = (np.abs(ex) ** 2 + np.abs(ey) ** 2 + np.abs(ez) ** 2) / 2.0
    point = sar_from_field(e2, sig.data, rho.data, mask, sig.voxel_size)
    avg = sar_10g_cubic(point, rho.data)
    out = _out(args)
    write_volume(point.sar, out / "sar.dvol", sig.voxel_size)
    write_volume(avg.sar, out / "sar10g.dvol", sig.voxel_size)
    print(json.dumps({"psSAR": avg.pssar, "location": list(avg.location),
                      "flagged": int(avg.flagged.sum())}))


def cmd_metrics(args):
    from .io import read_volume, write_csv
    from .sar import abs_error, peak, rel_error_pssar

    mask = read_volume(args.labels).data != 0
    s_std, s_learned = (read_volume(p).data for p in (args.sar_std, args.sar_learned))
    a_std, a_learned = (read_volume(p).data for p in (args.sar10g_std, args.sar10g_learned))
    e = abs_error(s_std, s_learned, mask)
    (p_std, loc_std), (p_learned, loc_learned) = peak(a_std, mask), peak(a_learned, mask)
    e_max = rel_error_pssar(p_std, p_learned)
    row = (args.subject, args.frequency, repr(e), repr(p_std), repr(p_learned), repr(e_max),
           " ".join(map(str, loc_std)), " ".join(map(str, loc_learned)))
    out = _out(args)
    write_csv(out / "metrics.csv", "metrics-v1",
              ("subject", "frequency", "E", "psSAR_std", "psSAR_learned", "E_max",
               "psSAR_location_std", "psSAR_location_learned"), [row])
    print(json.dumps({"E": e, "E_max": e_max, "psSAR_std": p_std, "psSAR_learned": p_learned}))


def cmd_pipeline(args):
    from .pipeline import run_pipeline

    report = run_pipeline(_config(args))
    print(json.dumps({k: report.get(k) for k in ("status", "metrics", "property_errors")}, indent=2))


def cmd_sweep(args):
    from .pipeline import sweep

    cfg = _config(args)
    values = tuple(float(v) for v in args.values.split(",")) if args.values else None
    reports = sweep(cfg, args.axis, values)
    print(f"{len(reports)} sweep point(s) written to {cfg.out_dir}")


def cmd_plot(args):
    from .plots import plot_csv

    paths = plot_csv(args.csv, _out(args))
    for p in paths:
        print(p)


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (key = value lines)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rfdose", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", parents=[common], help="write a synthetic phantom (labels, T1, T2)")
    s.add_argument("--training", action="store_true", help="also write the jittered training phantoms")
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("assign", parents=[common], help="labels -> table property maps")
    s.add_argument("--labels", required=True)
    s.add_argument("--frequency", type=float, required=True, help="GHz (0.9, 1.8 or 3.0)")
    s.set_defaults(func=cmd_assign)

    s = sub.add_parser("train", parents=[common], help="train the three orientation networks")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("estimate", parents=[common], help="T1/T2 -> estimated property maps")
    s.add_argument("--t1", required=True)
    s.add_argument("--t2", required=True)
    s.add_argument("--labels", help="optional label volume; voxels outside the head become air")
    s.add_argument("--checkpoints", help="directory holding condnet_<orientation>.ckpt")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("fdtd", parents=[common], help="dipole exposure of property maps -> E phasors")
    for name in ("sigma", "epsilon", "rho"):
        s.add_argument(f"--{name}", required=True)
    s.add_argument("--frequency", type=float, help="GHz (defaults to the config)")
    s.set_defaults(func=cmd_fdtd)

    s = sub.add_parser("sar", parents=[common], help="E phasors + properties -> point and 10-g SAR")
    for name in ("ex", "ey", "ez", "sigma", "rho"):
        s.add_argument(f"--{name}", required=True)
    s.add_argument("--labels")
    s.set_defaults(func=cmd_sar)

    s = sub.add_parser("metrics", parents=[common], help="compare standard and learned SAR volumes")
    for name in ("sar-std", "sar-learned", "sar10g-std", "sar10g-learned", "labels"):
        s.add_argument(f"--{name}", required=True)
    s.add_argument("--subject", default="subject")
    s.add_argument("--frequency", type=float, default=0.0)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("pipeline", parents=[common], help="run both pipelines end to end")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("sweep", parents=[common], help="repeat the pipeline over tau or training-set size")
    s.add_argument("--axis", choices=("tau", "train-subjects"))
    s.add_argument("--values", help="comma-separated axis values (defaults to the config)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plot", parents=[common], help="render PNG figures from an output CSV")
    s.add_argument("csv")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _configure_threads()
        args.func(args)
    except RfdoseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 10
    return 0


if __name__ == "__main__":
    sys.exit(main())
