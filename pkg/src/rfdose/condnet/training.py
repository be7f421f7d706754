"""Slice extraction, training loop and three-orientation inference."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConvergenceError, DomainError, NumericError
from ..scaling import NormalizedMaps, ScalingParams, rescale_properties
from ..tissues import MriVolume, PropertyMaps
from .network import Architecture, NetworkParams, build_network, forward, loss_and_gradients
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

ORIENTATIONS = ("axial", "sagittal", "coronal")
# Volumes are indexed (x, y, z) with z the body's longitudinal axis.
ORIENTATION_AXIS = {"axial": 2, "coronal": 1, "sagittal": 0}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    seed: int = 0
    orientation: str = "axial"
    max_steps: int | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or not self.lr > 0:
            raise DomainError("need epochs >= 0, batch_size >= 1 and lr > 0")
        if self.orientation not in ORIENTATIONS:
            raise DomainError(f"unknown orientation {self.orientation!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Subject:
    """One training/testing subject: normalised MRI plus optional normalised targets."""

    t1: np.ndarray
    t2: np.ndarray
    targets: NormalizedMaps | None = None


def fit_to_size(volume: np.ndarray, n: int) -> np.ndarray:
    """Centrally zero-pad or crop every spatial axis to ``n``."""
    out = np.zeros((n, n, n), dtype=np.float64)
    src, dst = [], []
    for d in volume.shape:
        if d >= n:
            lo = (d - n) // 2
            src.append(slice(lo, lo + n))
            dst.append(slice(0, n))
        else:
            lo = (n - d) // 2
            src.append(slice(0, d))
            dst.append(slice(lo, lo + d))
    out[tuple(dst)] = volume[tuple(src)]
    return out


def unfit_from_size(cube: np.ndarray, shape: tuple) -> np.ndarray:
    """Inverse of :func:`fit_to_size` on the retained region (cropped parts come back as 0)."""
    n = cube.shape[0]
    out = np.zeros(shape, dtype=np.float64)
    src, dst = [], []
    for d in shape:
        if d >= n:
            lo = (d - n) // 2
            dst.append(slice(lo, lo + n))
            src.append(slice(0, n))
        else:
            lo = (n - d) // 2
            dst.append(slice(0, d))
            src.append(slice(lo, lo + d))
    out[tuple(dst)] = cube[tuple(src)]
    return out


def extract_slices(volume: np.ndarray, orientation: str, size: int | None = None) -> np.ndarray:
    """Ordered stack of 2-D slices ``(n_slices, a, b)`` along the orientation axis.

    When ``size`` is given the volume is first fitted to ``size**3``.
    """
    if orientation not in ORIENTATION_AXIS:
        raise DomainError(f"unknown orientation {orientation!r}")
    vol = np.asarray(volume, dtype=np.float64)
    if size is not None:
        vol = fit_to_size(vol, size)
    return np.ascontiguousarray(np.moveaxis(vol, ORIENTATION_AXIS[orientation], 0))


def stack_slices(slices: np.ndarray, orientation: str) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(slices, 0, ORIENTATION_AXIS[orientation]))


def slice_dataset(subjects, orientation: str, size: int):
    """Inputs ``(S, 2, n, n)`` and targets ``(S, 3, n, n)`` for one orientation."""
    xs, ys = [], []
    for s in subjects:
        if s.targets is None:
            raise DomainError("training subjects need target maps")
        t1 = extract_slices(s.t1, orientation, size)
        t2 = extract_slices(s.t2, orientation, size)
        xs.append(np.stack([t1, t2], axis=1))
        ys.append(np.stack([extract_slices(a, orientation, size) for a in
                            (s.targets.sigma, s.targets.epsilon, s.targets.rho)], axis=1))
    return np.concatenate(xs), np.concatenate(ys)


@dataclass
class TrainResult:
    params: NetworkParams
    trace: list  # (epoch, step, loss)


def train_network(inputs, targets, config: TrainConfig, arch: Architecture | None = None,
                  params: NetworkParams | None = None) -> TrainResult:
    """Minibatch ADAM on MSE; deterministic for a given ``config.seed``."""
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = inputs.shape[-1]
    arch = arch or (params.arch if params else Architecture.for_size(n))
    if params is None:
        params = build_network(arch, seed=config.seed)
    rng = np.random.default_rng(config.seed + 1)
    state = AdamState.zeros_like(params.weights)
    trace = []
    step = 0
    n_items = inputs.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n_items)
        for start in range(0, n_items, config.batch_size):
            if config.max_steps is not None and step >= config.max_steps:
                return TrainResult(params, trace)
            idx = np.sort(order[start:start + config.batch_size])
            try:
                loss, grads = loss_and_gradients(params, inputs[idx], targets[idx], train=True)
            except NumericError as exc:
                raise ConvergenceError(f"training diverged at step {step}: {exc}", trace) from exc
            if not np.isfinite(loss):
                raise ConvergenceError(f"non-finite loss at step {step}", trace)
            adam_step(params.weights, grads, state, config.lr, config.beta1, config.beta2, config.eps_hat)
            trace.append((epoch, step, loss))
            step += 1
        if trace:
            log.debug("epoch %d loss %.3e", epoch, trace[-1][2])
    return TrainResult(params, trace)


def train(subjects, config: TrainConfig, size: int, arch: Architecture | None = None) -> dict:
    """Train one independent network per orientation.

    Returns ``{orientation: TrainResult}``.  ``config.orientation`` is
    ignored; each orientation gets the same hyper-parameters and seed.
    """
    arch = arch or Architecture.for_size(size)
    out = {}
    for orientation in ORIENTATIONS:
        x, y = slice_dataset(subjects, orientation, size)
        cfg = TrainConfig(**{**config.to_dict(), "orientation": orientation})
        out[orientation] = train_network(x, y, cfg, arch)
    return out


def predict_volume(params: NetworkParams, t1: np.ndarray, t2: np.ndarray, orientation: str,
                   batch: int = 8) -> np.ndarray:
    """Normalised predictions ``(3, nx, ny, nz)`` from slices of one orientation."""
    n = params.arch.input_size
    s1 = extract_slices(t1, orientation, n)
    s2 = extract_slices(t2, orientation, n)
    preds = np.empty((s1.shape[0], params.arch.n_outputs, n, n))
    for start in range(0, s1.shape[0], batch):
        preds[start:start + batch] = forward(params, s1[start:start + batch], s2[start:start + batch])
    cube = np.stack([stack_slices(preds[:, c], orientation) for c in range(preds.shape[1])])
    return np.stack([unfit_from_size(c, t1.shape) for c in cube])


def average_orientations(volumes) -> np.ndarray:
    """Voxelwise arithmetic mean of the per-orientation predictions."""
    vols = list(volumes)
    return sum(vols[1:], vols[0].copy()) / len(vols) if len(vols) > 1 else vols[0].copy()


def estimate_normalized(params_by_orientation: dict, t1: MriVolume, t2: MriVolume) -> NormalizedMaps:
    vols = [predict_volume(params_by_orientation[o], t1.intensities, t2.intensities, o)
            for o in ORIENTATIONS]
    s, e, r = average_orientations(vols)
    return NormalizedMaps(s, e, r)


def estimate_subject(params_axial, params_sagittal, params_coronal, t1: MriVolume, t2: MriVolume,
                     scaling: ScalingParams, frequency: float,
                     mask: np.ndarray | None = None) -> PropertyMaps:
    """Average the three orientation estimates, then rescale to physical units.

    Voxels outside ``mask`` (when given) are set to air.
    """
    norm = estimate_normalized(
        {"axial": params_axial, "sagittal": params_sagittal, "coronal": params_coronal}, t1, t2)
    if mask is not None:
        norm = NormalizedMaps(*(np.where(mask, a, 0.0) for a in (norm.sigma, norm.epsilon, norm.rho)))
    return rescale_properties(norm, scaling, frequency, t1.voxel_size)
