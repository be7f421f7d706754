"""Normalisation of property maps and MRI volumes, and the inverse rescaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .tissues import MriVolume, PropertyMaps, TissueTable, default_table


@dataclass(frozen=True)
class ScalingParams:
    max_sigma: float
    max_epsilon: float
    max_rho: float
    tau_sigma: float = 0.1
    tau_epsilon: float = 0.1
    tau_rho: float = 0.1

    def __post_init__(self):
        for name in ("tau_sigma", "tau_epsilon", "tau_rho"):
            tau = getattr(self, name)
            if not 0.0 <= tau < 1.0:
                raise DomainError(f"{name} must lie in [0, 1), got {tau}")
        for name in ("max_sigma", "max_epsilon", "max_rho"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    @classmethod
    def for_frequency(cls, frequency: float, tau=0.1, table: TissueTable | None = None) -> "ScalingParams":
        """Maxima over the table tissues at ``frequency``; ``tau`` is a scalar or a 3-tuple."""
        table = table or default_table()
        ms, me, mr = table.maxima(frequency)
        ts, te, tr = (tau, tau, tau) if np.isscalar(tau) else tau
        return cls(ms, me, mr, float(ts), float(te), float(tr))

    @property
    def taus(self) -> tuple[float, float, float]:
        return self.tau_sigma, self.tau_epsilon, self.tau_rho


@dataclass(frozen=True)
class NormalizedMaps:
    sigma: np.ndarray
    epsilon: np.ndarray
    rho: np.ndarray

    def stack(self) -> np.ndarray:
        """Channels-first array ``(3, nx, ny, nz)``."""
        return np.stack([self.sigma, self.epsilon, self.rho])


def normalize_properties(maps: PropertyMaps, params: ScalingParams) -> NormalizedMaps:
    # the permittivity denominator is the plain maximum of epsilon, not of (epsilon - 1)
    return NormalizedMaps(
        sigma=(1.0 - params.tau_sigma) / params.max_sigma * maps.sigma,
        epsilon=(1.0 - params.tau_epsilon) / params.max_epsilon * (maps.epsilon - 1.0),
        rho=(1.0 - params.tau_rho) / params.max_rho * maps.rho,
    )


def rescale_properties(norm: NormalizedMaps, params: ScalingParams, frequency: float,
                       voxel_size: float = 1.0) -> PropertyMaps:
    arrs = [np.asarray(a, dtype=np.float64) for a in (norm.sigma, norm.epsilon, norm.rho)]
    if not all(np.all(np.isfinite(a)) for a in arrs):
        raise DomainError("normalised maps contain non-finite values")
    s, e, r = arrs
    return PropertyMaps(
        sigma=params.max_sigma / (1.0 - params.tau_sigma) * s,
        epsilon=1.0 + params.max_epsilon / (1.0 - params.tau_epsilon) * e,
        rho=params.max_rho / (1.0 - params.tau_rho) * r,
        frequency=frequency,
        voxel_size=voxel_size,
    )


def normalize_mri(volume: MriVolume) -> MriVolume:
    """Z-score over every voxel (background included), then min-max to [0, 1]."""
    a = volume.intensities
    std = a.std()
    if not std > 0:
        raise DomainError("cannot normalise a constant volume")
    z = (a - a.mean()) / std
    lo, hi = z.min(), z.max()
    if not hi > lo:
        raise DomainError("cannot normalise a constant volume")
    return MriVolume((z - lo) / (hi - lo), volume.voxel_size)
