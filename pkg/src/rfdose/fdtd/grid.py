"""Yee-grid construction: material coefficients, CPML profiles, dipole feed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..tissues import PropertyMaps

C0 = 299792458.0
MU0 = 4e-7 * np.pi
EPS0 = 1.0 / (MU0 * C0 ** 2)
ETA0 = MU0 * C0

DIPOLE_LENGTH_MM = {0.9: 157.0, 1.8: 79.0, 3.0: 47.0}


@dataclass(frozen=True)
class GridConfig:
    cpml_layers: int = 10
    margin: int = 20
    cpml_order: float = 4.0
    kappa_max: float = 8.0
    alpha_max: float = 0.05
    sigma_factor: float = 1.0  # multiplies the optimal CPML conductivity
    courant: float = 0.99

    def __post_init__(self):
        if self.cpml_layers < 1:
            raise DomainError("CPML depth must be >= 1")
        if self.margin < 0:
            raise DomainError("margin must be >= 0")
        if not 0 < self.courant <= 1:
            raise DomainError("Courant factor must lie in (0, 1]")


@dataclass(frozen=True)
class DipoleSource:
    """Half-wave dipole along z; length and position in grid units are resolved at build time."""

    frequency: float  # GHz
    length_mm: float | None = None
    standoff_mm: float = 20.0
    amplitude: float = 1.0  # source EMF, V
    resistance: float = 50.0  # internal source resistance, ohm
    ramp_periods: float = 2.0

    @property
    def resolved_length_mm(self) -> float:
        if self.length_mm is not None:
            return self.length_mm
        for f, length in DIPOLE_LENGTH_MM.items():
            if abs(f - self.frequency) < 1e-9:
                return length
        raise DomainError(f"no default dipole length for {self.frequency} GHz")

    def length_cells(self, dx_mm: float) -> int:
        """Odd number of cells closest to the physical length."""
        n = self.resolved_length_mm / dx_mm
        lo = int(np.floor(n))
        cands = [c for c in (lo - 1, lo, lo + 1, lo + 2) if c % 2 == 1 and c >= 3]
        return min(cands, key=lambda c: (abs(c - n), c))


@dataclass
class Feed:
    gap: tuple  # (i, j, k) of the Ez gap edge
    arm_cells: int
    amplitude: float
    resistance: float
    coef: float  # source injection coefficient for the gap Ez update
    ramp_periods: float


@dataclass
class CpmlAxis:
    """Per-axis CPML data for one field family (E or H positions)."""

    inv_kappa: np.ndarray  # (n,)
    slab: np.ndarray  # (n,) int: slab index or -1
    b: np.ndarray  # (2d,)
    c: np.ndarray  # (2d,)


@dataclass
class SimulationGrid:
    dims: tuple
    dx: float  # m
    dt: float  # s
    frequency: float  # Hz, drive frequency (0 if none)
    periodic: tuple
    cpml_layers: tuple  # per axis
    ca: list  # [ca_x, ca_y, ca_z]
    cb: list
    eps_edge: list  # permittivity (F/m) on each E edge family
    sigma_edge: list
    cpml_e: list  # CpmlAxis per axis
    cpml_h: list
    ch: float
    feed: Feed | None = None
    offset: tuple = (0, 0, 0)  # grid cell of map voxel (0, 0, 0)
    map_dims: tuple | None = None
    rho: np.ndarray | None = None  # per map voxel, kg/m^3
    info: dict = field(default_factory=dict)

    @property
    def steps_per_period(self) -> int:
        return int(round(1.0 / (self.frequency * self.dt)))


@dataclass
class FieldState:
    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    psi_e: list
    psi_h: list
    n: int = 0

    @classmethod
    def zeros(cls, grid: SimulationGrid) -> "FieldState":
        shape = grid.dims
        f = [np.zeros(shape) for _ in range(6)]

        def slab(axis):
            d = grid.cpml_layers[axis]
            s = list(shape)
            s[axis] = 2 * d
            return np.zeros(s)

        # order: (xy, xz, yx, yz, zx, zy) -> derivative axis y, z, x, z, x, y
        deriv_axes = (1, 2, 0, 2, 0, 1)
        psi_e = [slab(a) for a in deriv_axes]
        psi_h = [slab(a) for a in deriv_axes]
        return cls(*f, psi_e, psi_h, 0)

    def copy(self) -> "FieldState":
        return FieldState(*(a.copy() for a in (self.ex, self.ey, self.ez, self.hx, self.hy, self.hz)),
                          [p.copy() for p in self.psi_e], [p.copy() for p in self.psi_h], self.n)


def courant_dt(dx: float, courant: float = 0.99) -> float:
    return courant * dx / (C0 * np.sqrt(3.0))


def period_locked_dt(dx: float, frequency_hz: float, courant: float = 0.99) -> float:
    """Largest dt <= the Courant bound that fits a whole number of steps in one period."""
    dt_max = courant_dt(dx, courant)
    if frequency_hz <= 0:
        return dt_max
    period = 1.0 / frequency_hz
    return period / int(np.ceil(period / dt_max - 1e-12))


def _cpml_axis(n: int, d: int, dx: float, dt: float, cfg: GridConfig, half: bool) -> CpmlAxis:
    inv_kappa = np.ones(n)
    slab = -np.ones(n, dtype=np.int64)
    b = np.zeros(2 * d)
    c = np.zeros(2 * d)
    if d == 0:
        return CpmlAxis(inv_kappa, slab, b, c)
    m = cfg.cpml_order
    sigma_max = cfg.sigma_factor * 0.8 * (m + 1) / (ETA0 * dx)
    off = 0.5 if half else 0.0
    idx = np.concatenate([np.arange(d), np.arange(n - d, n)])
    pos = idx + off
    depth = np.where(idx < d, (d - pos) / d, (pos - (n - d)) / d)
    depth = np.clip(depth, 0.0, 1.0)
    sigma = sigma_max * depth ** m
    kappa = 1.0 + (cfg.kappa_max - 1.0) * depth ** m
    alpha = cfg.alpha_max * (1.0 - depth)
    b[:] = np.exp(-(sigma / kappa + alpha) * dt / EPS0)
    denom = sigma * kappa + kappa ** 2 * alpha
    c[:] = np.where(denom > 0, sigma * (b - 1.0) / np.where(denom > 0, denom, 1.0), 0.0)
    inv_kappa[idx] = 1.0 / kappa
    slab[idx] = np.arange(2 * d)
    return CpmlAxis(inv_kappa, slab, b, c)


def _edge_average(vox: np.ndarray, axis: int, periodic: tuple, fill: float) -> np.ndarray:
    """Average of the four voxels sharing each edge parallel to ``axis``.

    The edge at node (j, k) in the two transverse axes touches voxels
    (j-1..j, k-1..k); voxels outside the grid count as ``fill``.
    """
    acc = vox.copy()
    terms = 1
    for a in (ax for ax in range(3) if ax != axis):
        if periodic[a]:
            shifted = np.roll(acc, 1, axis=a)
        else:
            shifted = np.full_like(acc, fill * terms)
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            src[a] = slice(0, -1)
            dst[a] = slice(1, None)
            shifted[tuple(dst)] = acc[tuple(src)]
        acc = acc + shifted
        terms *= 2
    return acc / 4.0


def make_grid(sigma_vox: np.ndarray, eps_vox: np.ndarray, dx: float, frequency_hz: float = 0.0,
              config: GridConfig | None = None, periodic=(False, False, False),
              cpml=(True, True, True), dt: float | None = None) -> SimulationGrid:
    """Grid from per-cell (sigma, relative eps); ``dx`` in metres."""
    config = config or GridConfig()
    sigma_vox = np.asarray(sigma_vox, dtype=np.float64)
    eps_vox = np.asarray(eps_vox, dtype=np.float64)
    if sigma_vox.shape != eps_vox.shape or sigma_vox.ndim != 3:
        raise DomainError("sigma/eps voxel arrays must be 3-D and of equal shape")
    dims = sigma_vox.shape
    periodic = tuple(bool(p) for p in periodic)
    if dt is None:
        dt = period_locked_dt(dx, frequency_hz, config.courant)
    elif dt > courant_dt(dx, 1.0):
        raise DomainError("time step violates the Courant limit")
    layers = tuple(config.cpml_layers if (cpml[a] and not periodic[a]) else 0 for a in range(3))
    for a in range(3):
        if 2 * layers[a] >= dims[a]:
            raise DomainError(f"axis {a} too short for {layers[a]} CPML layers")

    ca, cb, eps_e, sig_e = [], [], [], []
    for axis in range(3):
        sig = _edge_average(sigma_vox, axis, periodic, 0.0)
        eps = _edge_average(eps_vox, axis, periodic, 1.0) * EPS0
        loss = sig * dt / (2.0 * eps)
        ca.append((1.0 - loss) / (1.0 + loss))
        cb.append(dt / (eps * (1.0 + loss)) / dx)
        eps_e.append(eps)
        sig_e.append(sig)

    cpml_e = [_cpml_axis(dims[a], layers[a], dx, dt, config, half=False) for a in range(3)]
    cpml_h = [_cpml_axis(dims[a], layers[a], dx, dt, config, half=True) for a in range(3)]
    if not all(np.all(np.isfinite(a)) for a in ca + cb):
        raise DomainError("non-finite material coefficients")
    return SimulationGrid(
        dims=dims, dx=dx, dt=dt, frequency=frequency_hz, periodic=periodic, cpml_layers=layers,
        ca=ca, cb=cb, eps_edge=eps_e, sigma_edge=sig_e, cpml_e=cpml_e, cpml_h=cpml_h,
        ch=dt / (MU0 * dx),
    )


def add_pec_edges(grid: SimulationGrid, axis: int, edges) -> None:
    """Force the listed E edges of one family to zero (perfect conductor)."""
    for e in edges:
        grid.ca[axis][e] = 0.0
        grid.cb[axis][e] = 0.0


def add_dipole(grid: SimulationGrid, node_x: int, node_y: int, gap_k: int, n_cells: int,
               source: DipoleSource) -> Feed:
    """PEC arms along z with a lumped resistive voltage source in the centre edge."""
    half = (n_cells - 1) // 2
    k0 = gap_k - half
    if k0 < 0 or gap_k + half >= grid.dims[2]:
        raise DomainError("dipole does not fit in the grid")
    arms = [(node_x, node_y, k) for k in range(k0, k0 + n_cells) if k != gap_k]
    add_pec_edges(grid, 2, arms)
    g = (node_x, node_y, gap_k)
    eps = grid.eps_edge[2][g]
    sig = grid.sigma_edge[2][g]
    dt, dx, r = grid.dt, grid.dx, source.resistance
    # edge conductance seen by the lumped resistor: dz / (R * dx * dy)
    beta = (sig + dx / (r * dx * dx)) * dt / (2.0 * eps)
    grid.ca[2][g] = (1.0 - beta) / (1.0 + beta)
    grid.cb[2][g] = dt / (eps * (1.0 + beta)) / dx
    coef = dt / (eps * (1.0 + beta)) / (r * dx * dx)
    feed = Feed(g, half, source.amplitude, r, coef, source.ramp_periods)
    grid.feed = feed
    return feed


@dataclass(frozen=True)
class Placement:
    offset: tuple
    dims: tuple
    antenna_node: tuple  # (x, y)
    gap_k: int
    n_cells: int
    scalp_x: float  # grid coordinate (cells) of the scalp point facing the antenna
    standoff_cells: int


def plan_layout(mask: np.ndarray, voxel_mm: float, source: DipoleSource, config: GridConfig) -> Placement:
    """Place the head and the antenna: antenna on the -x side, level with the head centroid."""
    if not mask.any():
        raise DomainError("cannot place an antenna next to an empty head")
    d, m = config.cpml_layers, config.margin
    mx, my, mz = mask.shape
    idx = np.argwhere(mask)
    cy, cz = idx[:, 1].mean() + 0.5, idx[:, 2].mean() + 0.5  # physical coords in voxel units
    jy, kz = min(int(cy), my - 1), min(int(cz), mz - 1)
    line = np.nonzero(mask[:, jy, kz])[0]
    if line.size == 0:
        line = idx[:, 0]
    scalp_vox = float(line.min())  # lower face of the outermost tissue voxel
    s = int(round(source.standoff_mm / voxel_mm))
    n_cells = source.length_cells(voxel_mm)
    half = (n_cells - 1) // 2

    ox = d + m + max(0, int(np.ceil(s - scalp_vox)))
    ant_x = int(round(ox + scalp_vox - s))
    oy = d + m
    ant_y = oy + int(round(cy))
    gap_vox = kz  # the gap edge sits at the centroid voxel's mid-height
    oz = d + m + max(0, half - gap_vox)
    gap_k = oz + gap_vox
    nx = ox + mx + m + d
    ny = oy + my + m + d
    nz = max(oz + mz, gap_k + half + 1) + m + d
    return Placement((ox, oy, oz), (nx, ny, nz), (ant_x, ant_y), gap_k, n_cells, ox + scalp_vox, s)


def build_simulation(maps: PropertyMaps, source: DipoleSource, config: GridConfig | None = None,
                     max_dims: tuple | None = None):
    """Embed property maps in a vacuum grid with CPML and a dipole feed.

    The grid cell equals the map voxel.  Returns ``(grid, state)``.
    """
    config = config or GridConfig()
    if abs(maps.frequency - source.frequency) > 1e-9:
        raise DomainError("property maps and source are at different frequencies")
    mask = maps.rho > 0
    plan = plan_layout(mask, maps.voxel_size, source, config)
    if max_dims is not None and any(a > b for a, b in zip(plan.dims, max_dims)):
        raise DomainError(f"required grid {plan.dims} exceeds the limit {tuple(max_dims)}")

    sigma = np.zeros(plan.dims)
    eps = np.ones(plan.dims)
    ox, oy, oz = plan.offset
    mxs, mys, mzs = maps.dims
    region = (slice(ox, ox + mxs), slice(oy, oy + mys), slice(oz, oz + mzs))
    sigma[region] = maps.sigma
    eps[region] = maps.epsilon
    dx = maps.voxel_size * 1e-3
    grid = make_grid(sigma, eps, dx, source.frequency * 1e9, config)
    add_dipole(grid, plan.antenna_node[0], plan.antenna_node[1], plan.gap_k, plan.n_cells, source)
    grid.offset = plan.offset
    grid.map_dims = maps.dims
    grid.rho = np.asarray(maps.rho)
    grid.info.update(placement=plan)
    return grid, FieldState.zeros(grid)
