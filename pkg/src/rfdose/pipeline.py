"""End-to-end orchestration of the standard and learning-based dosimetry pipelines.

Standard:  labels -> table properties -> FDTD -> SAR.
Learning:  T1/T2 -> normalise -> CondNet (three orientations) -> rescale -> FDTD -> SAR.

Both feed the same comparison metrics.  Every artefact lands under
``out_dir``; a failing stage is named in the raised error and in
``report.json``, and whatever was written before it is kept.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .condnet.network import Architecture
from .condnet.training import ORIENTATIONS, Subject, TrainConfig, estimate_normalized, train
from .config import RunConfig, stage_seed
from .errors import ConfigError, RfdoseError
from .fdtd.grid import DipoleSource, GridConfig, build_simulation
from .fdtd.solver import (SteadyStateConfig, feed_metrics, normalize_to_power, run_to_steady_state,
                          voxel_center_e)
from .io import load_checkpoint, read_volume, save_checkpoint, write_csv, write_volume
from .phantom import PhantomSpec, make_phantom
from .sar import abs_error, rel_error_pssar, sar_10g_cubic, sar_from_field
from .scaling import NormalizedMaps, ScalingParams, normalize_mri, normalize_properties, rescale_properties
from .tissues import N_TISSUES, LabelVolume, MriVolume, PropertyMaps, assign_properties, default_table, tissue_stats

log = logging.getLogger(__name__)

METRICS_SCHEMA = "metrics-v1"
STATS_SCHEMA = "tissue-stats-v1"
PROPERTY_ERROR_SCHEMA = "property-error-v1"
SWEEP_SCHEMA = "sweep-v1"
PROBE_SCHEMA = "probe-v1"
PROPS = ("sigma", "epsilon", "rho")


class _Run:
    """Bookkeeping for one pipeline run: report, timings and stage errors."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.report = {"version": __version__, "seed": config.seed, "config": config.to_dict(),
                       "status": "running", "stages": []}
        self.timings = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        log.info("stage %s", name)
        try:
            yield
        except Exception as exc:
            self.report["status"] = "failed"
            self.report["failed_stage"] = name
            self.report["error"] = f"{type(exc).__name__}: {exc}"
            self.save()
            if isinstance(exc, RfdoseError) and not getattr(exc, "stage", None):
                exc.stage = name
                exc.args = (f"stage '{name}': {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        self.report["stages"].append(name)
        self.timings[name] = time.perf_counter() - t0

    def volume(self, name: str, data, voxel_size: float, kind: str | None = None):
        write_volume(data, self.out / "volumes" / f"{name}.dvol", voxel_size, kind)

    def save(self):
        with open(self.out / "report.json", "w") as fh:
            json.dump(self.report, fh, indent=2, sort_keys=True, default=_json_default)
        with open(self.out / "timings.json", "w") as fh:
            json.dump(self.timings, fh, indent=2, sort_keys=True)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o)}")


# --- subjects ----------------------------------------------------------------

def subject_phantom_spec(config: RunConfig) -> PhantomSpec:
    return PhantomSpec(shells=tuple(config.shells), dims=tuple(config.phantom_dims),
                       voxel_size=config.voxel_size, noise_std=config.noise_std,
                       seed=stage_seed(config.seed, "phantom-test"))


def training_phantom_specs(config: RunConfig) -> list[PhantomSpec]:
    """Jittered variants of the test geometry: overall size, axis ratios and centre."""
    rng = np.random.default_rng(stage_seed(config.seed, "phantom-train"))
    base = subject_phantom_spec(config)
    extent = np.asarray(base.dims) * base.voxel_size
    specs = []
    for _ in range(config.train_subjects):
        j = config.jitter
        size = 1.0 + rng.uniform(-j, j)
        axes = 1.0 + rng.uniform(-j / 2, j / 2, size=3)
        semi = base.shells[0][1] * size * axes
        limit = extent / 2 - base.voxel_size  # keep the scalp one voxel inside the volume
        shrink = min(1.0, float(np.min(limit / semi)))
        size, semi = size * shrink, semi * shrink
        shift = rng.uniform(-1.0, 1.0, size=3) * np.minimum(limit - semi, 2.0 * base.voxel_size)
        specs.append(PhantomSpec(
            shells=tuple((t, r * size) for t, r in base.shells), dims=base.dims,
            voxel_size=base.voxel_size, axis_scale=tuple(axes), center=tuple(extent / 2 + shift),
            noise_std=config.noise_std, seed=int(rng.integers(2 ** 31))))
    return specs


def load_test_subject(config: RunConfig):
    if config.labels_path is None:
        return make_phantom(subject_phantom_spec(config))
    lab = read_volume(config.labels_path)
    t1 = read_volume(config.t1_path)
    t2 = read_volume(config.t2_path)
    if not (lab.data.shape == t1.data.shape == t2.data.shape):
        raise ConfigError("labels, T1 and T2 volumes differ in shape")
    return (LabelVolume(lab.data, lab.voxel_size), MriVolume(t1.data, t1.voxel_size),
            MriVolume(t2.data, t2.voxel_size))


# --- learning pipeline -----------------------------------------------------------

def _checkpoint_paths(directory) -> dict:
    return {o: Path(directory) / f"condnet_{o}.ckpt" for o in ORIENTATIONS}


def obtain_networks(config: RunConfig, run: _Run, scaling: ScalingParams) -> dict:
    """Load all three orientation networks from ``checkpoint_dir`` or train them."""
    arch = Architecture(config.input_size, config.depth) if config.depth else \
        Architecture.for_size(config.input_size)
    if config.checkpoint_dir is not None:
        paths = _checkpoint_paths(config.checkpoint_dir)
        if all(p.exists() for p in paths.values()):
            nets = {}
            for o, p in paths.items():
                params, _ = load_checkpoint(p)
                if params.arch != arch:
                    raise ConfigError(f"checkpoint {p} has architecture {params.arch}, expected {arch}")
                nets[o] = params
            run.report["training"] = {"source": "checkpoint"}
            return nets

    subjects = []
    for spec in training_phantom_specs(config):
        labels, t1, t2 = make_phantom(spec)
        targets = normalize_properties(assign_properties(labels, config.frequency), scaling)
        subjects.append(Subject(normalize_mri(t1).intensities, normalize_mri(t2).intensities, targets))
    tcfg = TrainConfig(epochs=config.epochs, batch_size=config.batch_size, lr=config.lr,
                       seed=stage_seed(config.seed, "train"), max_steps=config.max_steps)
    results = train(subjects, tcfg, config.input_size, arch)
    nets = {}
    summary = {"source": "trained", "subjects": len(subjects)}
    for o, res in results.items():
        nets[o] = res.params
        save_checkpoint(res.params, run.out / "checkpoints" / f"condnet_{o}.ckpt",
                        config=tcfg.to_dict(), extra={"orientation": o, "version": __version__})
        losses = [t[2] for t in res.trace]
        summary[o] = {"steps": len(losses), "first_loss": losses[0] if losses else None,
                      "final_loss": losses[-1] if losses else None}
        write_csv(run.out / "training" / f"loss_{o}.csv", "training-loss-v1", ("epoch", "step", "loss"),
                  res.trace)
    run.report["training"] = summary
    return nets


# --- FDTD and SAR -----------------------------------------------------------------

def simulate(maps: PropertyMaps, config: RunConfig, run: _Run, name: str):
    source = DipoleSource(config.frequency, standoff_mm=config.standoff_mm)
    gcfg = GridConfig(cpml_layers=config.cpml_layers, margin=config.margin)
    grid, state = build_simulation(maps, source, gcfg)
    probe = []
    ph = run_to_steady_state(grid, state, SteadyStateConfig(config.min_periods, config.max_periods,
                                                            config.steady_tol), probe=probe)
    z, p_in = feed_metrics(ph)
    ph1 = normalize_to_power(ph, 1.0)
    write_csv(run.out / f"probe_{name}.csv", PROBE_SCHEMA, ("step", "v", "i"), probe)
    e = voxel_center_e(ph1)
    for comp, a in zip("xyz", e):
        run.volume(f"e{comp}_{name}", a, maps.voxel_size, "complex-f64")
    e2 = sum(np.abs(a) ** 2 for a in e) / 2.0
    plan = grid.info["placement"]
    run.report.setdefault("fdtd", {})[name] = {
        "grid": list(grid.dims), "dt": grid.dt, "steps": state.n, "periods": len(ph.trace),
        "impedance": [z.real, z.imag], "accepted_power_raw": p_in,
        "antenna_node": list(plan.antenna_node), "gap_k": plan.gap_k, "arm_cells": plan.n_cells,
        "standoff_cells": plan.standoff_cells,
    }
    return e2


def _property_error_rows(std: PropertyMaps, est: PropertyMaps, labels: LabelVolume):
    table = default_table()
    rows = []
    lab = labels.labels
    for tid in range(1, N_TISSUES + 1):
        sel = lab == tid
        n = int(sel.sum())
        if n == 0:
            continue
        errs = [float(np.mean(np.abs(getattr(std, p)[sel] - getattr(est, p)[sel]))) for p in PROPS]
        rows.append((tid, table[tid].name, n, *errs))
    return rows


def _stats_rows(maps: PropertyMaps, labels: LabelVolume, pipeline: str):
    table = default_table()
    rows = []
    for tid, st in tissue_stats(maps, labels).items():
        if not st.present:
            continue
        vals = []
        for p in PROPS:
            vals += [st.mean[p], st.std[p]]
        rows.append((pipeline, tid, table[tid].name, st.count, *vals))
    return rows


def run_pipeline(config: RunConfig) -> dict:
    """Run both pipelines and the comparison; returns the report dict."""
    run = _Run(config)
    cfg = config
    vs = cfg.voxel_size

    with run.stage("phantom"):
        labels, t1, t2 = load_test_subject(cfg)
        vs = labels.voxel_size
        run.volume("labels", labels.labels, vs, "label-u16")
        run.volume("t1", t1.intensities, vs)
        run.volume("t2", t2.intensities, vs)
        mask = labels.head_mask

    with run.stage("assign"):
        std = assign_properties(labels, cfg.frequency)
        for p in PROPS:
            run.volume(f"{p}_std", getattr(std, p), vs)

    with run.stage("normalize"):
        scaling = ScalingParams.for_frequency(cfg.frequency, cfg.tau)
        t1n, t2n = normalize_mri(t1), normalize_mri(t2)

    with run.stage("train"):
        nets = obtain_networks(cfg, run, scaling)

    with run.stage("estimate"):
        raw = estimate_normalized(nets, t1n, t2n)
        run.report["estimate_max_normalized"] = {p: float(getattr(raw, p).max()) for p in PROPS}
        masked = NormalizedMaps(*(np.where(mask, getattr(raw, p), 0.0) for p in PROPS))
        for p in PROPS:
            run.volume(f"{p}_norm_est", getattr(masked, p), vs)
        learned = rescale_properties(masked, scaling, cfg.frequency, vs)
        for p in PROPS:
            run.volume(f"{p}_learned", getattr(learned, p), vs)
        run.report["estimate_max"] = {p: float(getattr(learned, p).max()) for p in PROPS}

    with run.stage("statistics"):
        write_csv(run.out / "tissue_stats.csv", STATS_SCHEMA,
                  ("pipeline", "tissue_id", "tissue", "count", "sigma_mean", "sigma_std",
                   "epsilon_mean", "epsilon_std", "rho_mean", "rho_std"),
                  _stats_rows(std, labels, "standard") + _stats_rows(learned, labels, "learned"))
        err_rows = _property_error_rows(std, learned, labels)
        write_csv(run.out / "property_errors.csv", PROPERTY_ERROR_SCHEMA,
                  ("tissue_id", "tissue", "count", "sigma_abs_err", "epsilon_abs_err", "rho_abs_err"),
                  err_rows)
        run.report["property_errors"] = {r[1]: dict(zip(PROPS, r[3:])) for r in err_rows}

    if cfg.run_fdtd:
        with run.stage("fdtd"):
            e2_std = simulate(std, cfg, run, "std")
            e2_learned = simulate(learned, cfg, run, "learned")

        with run.stage("sar"):
            sar_std = sar_from_field(e2_std, std.sigma, std.rho, mask, vs, cfg.frequency)
            sar_learned = sar_from_field(e2_learned, learned.sigma, learned.rho, mask, vs, cfg.frequency)
            avg_std = sar_10g_cubic(sar_std, std.rho)
            avg_learned = sar_10g_cubic(sar_learned, learned.rho)
            for name, s, a in (("std", sar_std, avg_std), ("learned", sar_learned, avg_learned)):
                run.volume(f"sar_{name}", s.sar, vs)
                run.volume(f"sar10g_{name}", a.sar, vs)

        with run.stage("metrics"):
            e_abs = abs_error(sar_std.sar, sar_learned.sar, mask)
            e_max = rel_error_pssar(avg_std.pssar, avg_learned.pssar)
            loc = lambda t: " ".join(str(c) for c in t)  # noqa: E731
            write_csv(run.out / "metrics.csv", METRICS_SCHEMA,
                      ("subject", "frequency", "E", "psSAR_std", "psSAR_learned", "E_max",
                       "psSAR_location_std", "psSAR_location_learned"),
                      [("test", cfg.frequency, repr(e_abs), repr(avg_std.pssar), repr(avg_learned.pssar),
                        repr(e_max), loc(avg_std.location), loc(avg_learned.location))])
            run.report["metrics"] = {
                "E": e_abs, "psSAR_std": avg_std.pssar, "psSAR_learned": avg_learned.pssar,
                "E_max": e_max, "psSAR_location_std": list(avg_std.location),
                "psSAR_location_learned": list(avg_learned.location),
                "flagged_voxels_std": int(avg_std.flagged.sum()),
                "E_max_within_threshold": bool(e_max <= cfg.max_pssar_error),
            }

    run.report["status"] = "ok"
    run.save()
    return run.report


# --- sweeps ------------------------------------------------------------------

def _sweep_point(args):
    config, = args
    return run_pipeline(config)


def sweep(config: RunConfig, axis: str | None = None, values=None) -> list[dict]:
    """One pipeline run per axis value, each in its own subdirectory, shared seed."""
    axis = axis or config.sweep_axis
    values = tuple(values) if values is not None else tuple(config.sweep_values)
    if axis not in ("tau", "train-subjects"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = Path(config.out_dir)
    points = []
    for v in values:
        if axis == "tau":
            sub = config.replace(tau=float(v), out_dir=str(out / f"tau_{float(v):g}"))
        else:
            if float(v) != int(v) or int(v) < 1:
                raise ConfigError(f"train-subjects values must be positive integers, got {v}")
            sub = config.replace(train_subjects=int(v), out_dir=str(out / f"subjects_{int(v)}"))
        points.append((v, sub))

    if config.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(_sweep_point, [(c,) for _, c in points]))
    else:
        reports = [run_pipeline(c) for _, c in points]

    rows = []
    for (v, _), rep in zip(points, reports):
        m = rep.get("metrics", {})
        for tissue, errs in rep["property_errors"].items():
            rows.append((axis, v, tissue, errs["sigma"], errs["epsilon"], errs["rho"],
                         rep["estimate_max_normalized"]["sigma"], rep["estimate_max_normalized"]["epsilon"],
                         rep["estimate_max_normalized"]["rho"],
                         m.get("E", ""), m.get("E_max", "")))
    write_csv(out / "sweep.csv", SWEEP_SCHEMA,
              ("axis", "value", "tissue", "sigma_abs_err", "epsilon_abs_err", "rho_abs_err",
               "max_norm_sigma", "max_norm_epsilon", "max_norm_rho", "E", "E_max"), rows)
    with open(out / "sweep.json", "w") as fh:
        json.dump({"axis": axis, "values": list(values), "version": __version__, "seed": config.seed,
                   "points": reports}, fh, indent=2, sort_keys=True, default=_json_default)
    return reports
