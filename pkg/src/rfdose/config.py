"""Run configuration: a line-oriented ``key = value`` file mapped onto a dataclass.

Lines starting with ``#`` are comments.  Lists are comma separated; shells
are written ``tissue:radius_mm`` (e.g. ``shells = 12:84, 3:78, 4:70``).
Unknown keys are rejected, and relative paths are resolved against the
directory holding the config file.
"""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

SWEEP_AXES = ("tau", "train-subjects")
PATH_KEYS = ("out_dir", "checkpoint_dir", "labels_path", "t1_path", "t2_path")


@dataclass(frozen=True)
class RunConfig:
    frequency: float = 0.9
    tau: float = 0.1
    seed: int = 0
    out_dir: str = "run"
    # phantom (test subject and training subjects)
    phantom_dims: tuple = (64, 64, 64)
    voxel_size: float = 3.0
    shells: tuple = ((12, 84.0), (3, 78.0), (4, 70.0))
    noise_std: float = 10.0
    train_subjects: int = 3
    jitter: float = 0.06  # relative radius / axis jitter of the training phantoms
    # optional real volumes for the test subject (DVOL1)
    labels_path: str | None = None
    t1_path: str | None = None
    t2_path: str | None = None
    # network and training
    input_size: int = 64
    depth: int | None = None
    epochs: int = 8
    batch_size: int = 4
    lr: float = 1e-3
    max_steps: int | None = None
    checkpoint_dir: str | None = None
    # FDTD
    run_fdtd: bool = True
    cpml_layers: int = 10
    margin: int = 20
    standoff_mm: float = 20.0
    min_periods: int = 5
    max_periods: int = 60
    steady_tol: float = 0.005
    # acceptance threshold for the psSAR relative error
    max_pssar_error: float = 0.20
    # sweeps
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    workers: int = 1

    def __post_init__(self):
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        if not 0.0 <= self.tau < 1.0:
            raise ConfigError(f"tau must lie in [0, 1), got {self.tau}")
        if self.train_subjects < 1:
            raise ConfigError("need at least one training subject")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if (self.t1_path is None) != (self.t2_path is None) or (
                self.labels_path is None and self.t1_path is not None):
            raise ConfigError("labels_path, t1_path and t2_path must be given together")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["shells"] = [list(s) for s in self.shells]
        d["phantom_dims"] = list(self.phantom_dims)
        d["sweep_values"] = list(self.sweep_values)
        return d

    def dumps(self) -> str:
        """Serialise back to the ``key = value`` format."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {_format(f.name, v)}")
        return "\n".join(lines) + "\n"


def _format(key, v):
    if key == "shells":
        return ", ".join(f"{int(t)}:{r:g}" for t, r in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def _parse_bool(s: str) -> bool:
    s = s.lower()
    if s in ("true", "yes", "1", "on"):
        return True
    if s in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_value(key: str, raw: str):
    if key == "shells":
        out = []
        for item in raw.split(","):
            tid, _, r = item.strip().partition(":")
            out.append((int(tid), float(r)))
        return tuple(out)
    if key == "phantom_dims":
        dims = tuple(int(x) for x in raw.replace(",", " ").split())
        if len(dims) != 3:
            raise ValueError("phantom_dims needs three integers")
        return dims
    if key == "sweep_values":
        return tuple(float(x) for x in raw.replace(",", " ").split())
    if key in ("sweep_axis", *PATH_KEYS):
        return None if raw.lower() == "none" else raw
    if key in ("depth", "max_steps"):
        return None if raw.lower() == "none" else int(raw)
    if key == "run_fdtd":
        return _parse_bool(raw)
    if key in ("seed", "train_subjects", "input_size", "epochs", "batch_size", "cpml_layers",
               "margin", "min_periods", "max_periods", "workers"):
        return int(raw)
    return float(raw)


def parse_config(text: str, base_dir: Path | None = None, **overrides) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    if base_dir is not None:
        for key in PATH_KEYS:
            if values.get(key) is not None:
                values[key] = str((Path(base_dir) / values[key]).resolve())
    # command-line overrides are taken relative to the working directory
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    try:
        return RunConfig(**values)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent, **overrides)


def stage_seed(master: int, stage: str) -> int:
    """Per-stage seed derived from the master seed and the stage name."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(stage.encode("utf-8"))])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
