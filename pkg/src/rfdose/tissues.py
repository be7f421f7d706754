"""Tissue property table, voxel volumes and the segmentation-based assignment."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import DomainError

FREQUENCIES_GHZ = (0.9, 1.8, 3.0)
N_TISSUES = 13
AIR = 0


@dataclass(frozen=True)
class Tissue:
    tissue_id: int
    name: str
    rho: float
    sigma: tuple[float, float, float]
    epsilon: tuple[float, float, float]


@dataclass(frozen=True)
class TissueTable:
    entries: tuple[Tissue, ...]
    version: int = 1

    def __post_init__(self):
        if len(self.entries) != N_TISSUES:
            raise DomainError(f"expected {N_TISSUES} tissues, got {len(self.entries)}")
        ids = [t.tissue_id for t in self.entries]
        if ids != list(range(1, N_TISSUES + 1)):
            raise DomainError(f"tissue ids must be 1..{N_TISSUES} in order, got {ids}")
        for t in self.entries:
            if t.rho <= 0 or min(t.sigma) <= 0 or min(t.epsilon) < 1:
                raise DomainError(f"non-physical constants for tissue {t.tissue_id}")

    def __getitem__(self, tissue_id: int) -> Tissue:
        if not isinstance(tissue_id, (int, np.integer)) or not 1 <= tissue_id <= N_TISSUES:
            raise DomainError(f"unknown tissue id {tissue_id!r}")
        return self.entries[int(tissue_id) - 1]

    def by_name(self, name: str) -> Tissue:
        for t in self.entries:
            if t.name == name:
                return t
        raise DomainError(f"unknown tissue name {name!r}")

    def columns(self, frequency: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Lookup arrays indexed by label (index 0 is air: sigma 0, eps 1, rho 0)."""
        f = frequency_index(frequency)
        sigma = np.array([0.0] + [t.sigma[f] for t in self.entries])
        eps = np.array([1.0] + [t.epsilon[f] for t in self.entries])
        rho = np.array([0.0] + [t.rho for t in self.entries])
        return sigma, eps, rho

    def maxima(self, frequency: float) -> tuple[float, float, float]:
        sigma, eps, rho = self.columns(frequency)
        return float(sigma[1:].max()), float(eps[1:].max()), float(rho[1:].max())

    @classmethod
    def parse(cls, text: str) -> "TissueTable":
        entries = []
        version = 1
        for raw in text.splitlines():
            line = raw.strip()
            if line.startswith("#"):
                if "format version" in line:
                    version = int(line.rsplit(None, 1)[-1])
                continue
            if not line:
                continue
            parts = line.split()
            if len(parts) != 9:
                raise DomainError(f"bad tissue line: {raw!r}")
            vals = [float(p) for p in parts[2:]]
            entries.append(
                Tissue(
                    tissue_id=int(parts[0]),
                    name=parts[1],
                    rho=vals[0],
                    sigma=(vals[1], vals[3], vals[5]),
                    epsilon=(vals[2], vals[4], vals[6]),
                )
            )
        return cls(tuple(entries), version)


def frequency_index(frequency: float) -> int:
    for i, f in enumerate(FREQUENCIES_GHZ):
        if abs(frequency - f) < 1e-9:
            return i
    raise DomainError(f"frequency {frequency} GHz not in table {FREQUENCIES_GHZ}")


_DEFAULT_TABLE = None


def default_table() -> TissueTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        text = resources.files("rfdose").joinpath("data/tissues_v1.txt").read_text()
        _DEFAULT_TABLE = TissueTable.parse(text)
    return _DEFAULT_TABLE


def lookup_properties(tissue_id: int, frequency: float, table: TissueTable | None = None):
    """Return ``(sigma, epsilon, rho)`` of one tissue at one table frequency."""
    table = table or default_table()
    t = table[tissue_id]
    f = frequency_index(frequency)
    return t.sigma[f], t.epsilon[f], t.rho


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabelVolume:
    labels: np.ndarray
    voxel_size: float = 1.0

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 3 or min(lab.shape) < 1:
            raise DomainError(f"label volume must be 3-D with positive dims, got {lab.shape}")
        if not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise DomainError("labels must be integers")
        lab = lab.astype(np.uint16) if lab.min() >= 0 else lab
        if lab.min() < 0 or lab.max() > N_TISSUES:
            raise DomainError(f"labels must lie in 0..{N_TISSUES}")
        if self.voxel_size <= 0:
            raise DomainError("voxel size must be positive")
        object.__setattr__(self, "labels", _readonly(lab.astype(np.uint16)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape

    @property
    def head_mask(self) -> np.ndarray:
        return self.labels != AIR


@dataclass(frozen=True)
class MriVolume:
    intensities: np.ndarray
    voxel_size: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.intensities, dtype=np.float64)
        if a.ndim != 3:
            raise DomainError(f"MRI volume must be 3-D, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("MRI volume contains non-finite values")
        object.__setattr__(self, "intensities", _readonly(a))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.intensities.shape


@dataclass(frozen=True)
class PropertyMaps:
    sigma: np.ndarray
    epsilon: np.ndarray
    rho: np.ndarray
    frequency: float
    voxel_size: float = 1.0

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=np.float64) for a in (self.sigma, self.epsilon, self.rho)]
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape) or arrs[0].ndim != 3:
            raise DomainError("property maps must be 3-D arrays of equal shape")
        if np.any(arrs[0] < 0) or np.any(arrs[1] < 1) or np.any(arrs[2] < 0):
            raise DomainError("property maps violate sigma >= 0, eps >= 1, rho >= 0")
        for name, a in zip(("sigma", "epsilon", "rho"), arrs):
            object.__setattr__(self, name, _readonly(a))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.sigma.shape


def assign_properties(labels: LabelVolume, frequency: float, table: TissueTable | None = None) -> PropertyMaps:
    """Standard pipeline: uniform table constants per segmented tissue."""
    table = table or default_table()
    sigma, eps, rho = table.columns(frequency)
    lab = labels.labels
    return PropertyMaps(sigma[lab], eps[lab], rho[lab], frequency, labels.voxel_size)


@dataclass(frozen=True)
class TissueStats:
    tissue_id: int
    count: int
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @property
    def present(self) -> bool:
        return self.count > 0


def tissue_stats(maps: PropertyMaps, labels: LabelVolume) -> dict[int, TissueStats]:
    """Per-tissue mean and population std of sigma, epsilon and rho.

    Tissues with no voxels are reported with ``count == 0`` and empty
    statistics rather than zeros.
    """
    if maps.dims != labels.dims:
        raise DomainError(f"dims mismatch: maps {maps.dims} vs labels {labels.dims}")
    out = {}
    lab = labels.labels
    for tid in range(1, N_TISSUES + 1):
        sel = lab == tid
        n = int(sel.sum())
        if n == 0:
            out[tid] = TissueStats(tid, 0)
            continue
        mean, std = {}, {}
        for name in ("sigma", "epsilon", "rho"):
            v = getattr(maps, name)[sel]
            if v.min() == v.max():
                # uniform tissue: report the constant itself, not a rounded sum
                mean[name], std[name] = float(v[0]), 0.0
            else:
                mean[name] = float(v.mean())
                std[name] = float(v.std())
        out[tid] = TissueStats(tid, n, mean, std)
    return out
