"""Concentric-ellipsoid head phantoms with synthetic T1/T2 contrast.

Stands in for real MRI subjects: labels are known exactly, and the two
image volumes carry a per-tissue mean intensity plus Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .tissues import N_TISSUES, LabelVolume, MriVolume

# Arbitrary-unit contrasts; chosen so that every pair of tissues differs in
# at least one of the two channels.
DEFAULT_T1 = {
    0: 0.0, 1: 180.0, 2: 520.0, 3: 60.0, 4: 430.0, 5: 640.0, 6: 470.0,
    7: 110.0, 8: 300.0, 9: 900.0, 10: 350.0, 11: 380.0, 12: 560.0, 13: 130.0,
}
DEFAULT_T2 = {
    0: 0.0, 1: 420.0, 2: 260.0, 3: 40.0, 4: 520.0, 5: 380.0, 6: 500.0,
    7: 950.0, 8: 240.0, 9: 300.0, 10: 600.0, 11: 200.0, 12: 330.0, 13: 880.0,
}

STANDARD_SHELLS = ((12, 84.0), (9, 80.0), (3, 76.0), (7, 70.0), (4, 67.0), (5, 58.0))


@dataclass(frozen=True)
class PhantomSpec:
    """Shells are ``(tissue_id, outer_radius_mm)`` listed from the outside in."""

    shells: tuple = STANDARD_SHELLS
    dims: tuple = (192, 192, 192)
    voxel_size: float = 1.0
    axis_scale: tuple = (1.0, 1.0, 1.0)
    center: tuple | None = None
    t1_means: dict = field(default_factory=lambda: dict(DEFAULT_T1))
    t2_means: dict = field(default_factory=lambda: dict(DEFAULT_T2))
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.shells) == 0:
            raise DomainError("phantom needs at least one shell")
        radii = [float(r) for _, r in self.shells]
        if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
            raise DomainError(f"shell radii must be positive and strictly decreasing, got {radii}")
        for tid, _ in self.shells:
            if not 1 <= int(tid) <= N_TISSUES:
                raise DomainError(f"unknown tissue id {tid} in phantom spec")
        if self.noise_std < 0:
            raise DomainError("noise std must be >= 0")
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise DomainError(f"bad phantom dims {self.dims}")
        if self.voxel_size <= 0 or min(self.axis_scale) <= 0:
            raise DomainError("voxel size and axis scales must be positive")

    @property
    def center_mm(self) -> np.ndarray:
        if self.center is not None:
            return np.asarray(self.center, dtype=float)
        return np.asarray(self.dims, dtype=float) * self.voxel_size / 2.0

    @property
    def semi_axes_mm(self) -> np.ndarray:
        """Semi-axes of the outermost (scalp) ellipsoid."""
        return float(self.shells[0][1]) * np.asarray(self.axis_scale, dtype=float)


def _scaled_radius_sq(spec: PhantomSpec) -> np.ndarray:
    """Squared ellipsoidal radius (mm^2) of every voxel centre."""
    axes = []
    for d, c, s in zip(spec.dims, spec.center_mm, spec.axis_scale):
        pos = (np.arange(d) + 0.5) * spec.voxel_size
        axes.append(((pos - c) / s) ** 2)
    return axes[0][:, None, None] + axes[1][None, :, None] + axes[2][None, None, :]


def make_phantom(spec: PhantomSpec) -> tuple[LabelVolume, MriVolume, MriVolume]:
    extent = np.asarray(spec.dims) * spec.voxel_size
    lo = spec.center_mm - spec.semi_axes_mm
    hi = spec.center_mm + spec.semi_axes_mm
    if np.any(lo < 0) or np.any(hi > extent):
        raise DomainError(
            f"outer shell (semi-axes {spec.semi_axes_mm} mm) exceeds the volume extent {extent} mm"
        )

    r2 = _scaled_radius_sq(spec)
    labels = np.zeros(spec.dims, dtype=np.uint16)
    for tid, radius in spec.shells:
        labels[r2 <= float(radius) ** 2] = int(tid)

    t1_lut = np.array([spec.t1_means.get(i, 0.0) for i in range(N_TISSUES + 1)])
    t2_lut = np.array([spec.t2_means.get(i, 0.0) for i in range(N_TISSUES + 1)])
    t1 = t1_lut[labels]
    t2 = t2_lut[labels]
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        t1 = t1 + rng.normal(0.0, spec.noise_std, size=t1.shape)
        t2 = t2 + rng.normal(0.0, spec.noise_std, size=t2.shape)

    return (
        LabelVolume(labels, spec.voxel_size),
        MriVolume(t1, spec.voxel_size),
        MriVolume(t2, spec.voxel_size),
    )
