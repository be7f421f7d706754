"""Point SAR, 10-g cubic averaging and the SAR comparison metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError

TARGET_MASS_KG = 10e-3


@dataclass(frozen=True)
class SarVolume:
    """Point SAR in W/kg; zero outside the tissue mask."""

    sar: np.ndarray
    mask: np.ndarray
    voxel_size: float  # mm
    frequency: float  # GHz

    def __post_init__(self):
        if self.sar.shape != self.mask.shape:
            raise DomainError("SAR and mask shapes differ")
        if np.any(self.sar[self.mask] < 0):
            raise DomainError("point SAR must be non-negative")


@dataclass(frozen=True)
class AveragedSar:
    """10-g cube-averaged SAR per tissue voxel (zero elsewhere).

    ``side`` is the cube edge (voxels) used at each tissue voxel and
    ``flagged`` marks voxels whose cube hit the domain edge before
    reaching the target mass.
    """

    sar: np.ndarray
    side: np.ndarray
    flagged: np.ndarray
    mask: np.ndarray
    pssar: float
    location: tuple


def sar_from_field(e_rms_sq: np.ndarray, sigma: np.ndarray, rho: np.ndarray, mask: np.ndarray | None = None,
                   voxel_size: float = 1.0, frequency: float = 0.0) -> SarVolume:
    """SAR = sigma |E_rms|^2 / rho on tissue voxels; air is masked out.

    ``mask`` defaults to ``rho > 0``; a tissue voxel with zero density is
    a data error.
    """
    e2 = np.asarray(e_rms_sq, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    if not (e2.shape == sigma.shape == rho.shape):
        raise DomainError(f"shape mismatch: E {e2.shape}, sigma {sigma.shape}, rho {rho.shape}")
    mask = rho > 0 if mask is None else np.asarray(mask, dtype=bool)
    if np.any(rho[mask] <= 0):
        raise DataError("zero density on a tissue voxel")
    sar = np.zeros_like(e2)
    sar[mask] = sigma[mask] * e2[mask] / rho[mask]
    return SarVolume(sar, mask, voxel_size, frequency)


def point_sar(phasors, maps) -> SarVolume:
    """Point SAR from (power-normalised) E phasors and the property maps they were computed on."""
    from .fdtd.solver import e_rms_squared

    e2 = e_rms_squared(phasors)
    if e2.shape != maps.dims:
        raise DomainError(f"phasor region {e2.shape} does not match maps {maps.dims}")
    return sar_from_field(e2, maps.sigma, maps.rho, maps.rho > 0, maps.voxel_size, maps.frequency)


def _box_sum(a: np.ndarray, h: int) -> np.ndarray:
    """Sum over the (2h+1)^3 cube centred on every voxel, zero outside.

    Separable sums of shifted slices rather than prefix sums, so there is
    no cancellation error on small cubes next to large totals.
    """
    out = a
    for axis in range(3):
        n = out.shape[axis]
        acc = out.copy()
        for s in range(1, min(h, n - 1) + 1):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis], hi[axis] = slice(0, n - s), slice(s, n)
            acc[tuple(lo)] += out[tuple(hi)]
            acc[tuple(hi)] += out[tuple(lo)]
        out = acc
    return out


def sar_10g_cubic(sar: SarVolume, rho: np.ndarray, mask: np.ndarray | None = None) -> AveragedSar:
    """Smallest centred odd cube holding >= 10 g of tissue, grown one shell at a time.

    Cubes must stay inside the volume.  If a voxel's cube would leave the
    volume before reaching 10 g, the largest in-volume cube is used and the
    voxel is flagged.  The peak is taken over all tissue voxels; ties go
    to the lowest x-fastest linear index.
    """
    mask = sar.mask if mask is None else np.asarray(mask, dtype=bool)
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != mask.shape:
        raise DomainError("density and mask shapes differ")
    if np.any(rho[mask] <= 0):
        raise DataError("zero density on a tissue voxel")
    dv = (sar.voxel_size * 1e-3) ** 3
    m = np.where(mask, rho, 0.0)
    required = TARGET_MASS_KG / dv  # in units of summed density
    if m.sum() < required:
        raise DomainError(f"total tissue mass {m.sum() * dv * 1e3:.3g} g is below 10 g")
    weighted = np.where(mask, sar.sar, 0.0) * m

    coords = np.nonzero(mask)
    dims = np.array(mask.shape)
    pts = np.stack(coords, axis=1)
    h_max = np.min(np.minimum(pts, dims - 1 - pts), axis=1)
    half = np.full(len(pts), -1, dtype=np.int64)
    flagged = np.zeros(len(pts), dtype=bool)
    avg = np.zeros(len(pts))
    todo = np.arange(len(pts))
    h = 0
    while todo.size:
        sub = tuple(c[todo] for c in coords)
        mass = _box_sum(m, h)[sub]
        done = mass >= required
        edge = ~done & (h_max[todo] == h)
        take = done | edge
        if take.any():
            num = _box_sum(weighted, h)[sub]
            idx = todo[take]
            half[idx] = h
            flagged[idx] = edge[take]
            avg[idx] = num[take] / mass[take]
        todo = todo[~take]
        h += 1

    out = np.zeros(mask.shape)
    side = np.zeros(mask.shape, dtype=np.int64)
    flag = np.zeros(mask.shape, dtype=bool)
    out[coords] = avg
    side[coords] = 2 * half + 1
    flag[coords] = flagged
    pssar, loc = peak(out, mask)
    return AveragedSar(out, side, flag, mask, pssar, loc)


def peak(values: np.ndarray, mask: np.ndarray) -> tuple[float, tuple]:
    """Maximum over the mask; ties resolve to the lowest x-fastest linear index."""
    flat_v = np.ravel(values, order="F")
    flat_m = np.ravel(mask, order="F")
    if not flat_m.any():
        raise DomainError("empty mask")
    cand = np.where(flat_m, flat_v, -np.inf)
    i = int(np.argmax(cand))  # argmax returns the first occurrence
    return float(flat_v[i]), tuple(int(c) for c in np.unravel_index(i, values.shape, order="F"))


def abs_error(sar_std: np.ndarray, sar_learned: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute SAR difference over the head voxels."""
    mask = np.asarray(mask, dtype=bool)
    a = np.asarray(sar_std, dtype=np.float64)
    b = np.asarray(sar_learned, dtype=np.float64)
    if a.shape != b.shape or a.shape != mask.shape:
        raise DomainError("SAR maps and mask must have equal shapes")
    n = int(mask.sum())
    if n == 0:
        raise DomainError("empty head mask")
    return float(np.sum(np.abs(a[mask] - b[mask])) / n)


def rel_error_pssar(pssar_std: float, pssar_learned: float) -> float:
    """|psSAR - psSAR_learned| / psSAR."""
    if pssar_std == 0:
        raise DomainError("reference psSAR is zero")
    return abs(pssar_std - pssar_learned) / abs(pssar_std)
