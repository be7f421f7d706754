"""Time stepping, steady-state phasor extraction and feed-point quantities."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConvergenceError, DegenerateFeedError, DomainError, InstabilityError
from . import kernels
from .grid import MU0, FieldState, SimulationGrid

log = logging.getLogger(__name__)


@dataclass
class CurrentSource:
    """Soft impressed current density on one E edge family: ``J(t)`` in A/m^2."""

    axis: int
    index: tuple
    waveform: object  # callable t -> float


def drive_voltage(grid: SimulationGrid, t: float) -> float:
    feed = grid.feed
    if feed is None or grid.frequency <= 0 or feed.amplitude == 0:
        return 0.0
    w = 2.0 * np.pi * grid.frequency
    t_ramp = feed.ramp_periods / grid.frequency
    ramp = 1.0 if t >= t_ramp else 0.5 * (1.0 - np.cos(np.pi * t / t_ramp))
    return feed.amplitude * ramp * np.sin(w * t)


def _cpml_args(grid: SimulationGrid, which):
    ax = grid.cpml_e if which == "e" else grid.cpml_h
    return (ax[0].inv_kappa, ax[1].inv_kappa, ax[2].inv_kappa,
            ax[0].slab, ax[1].slab, ax[2].slab,
            ax[0].b, ax[0].c, ax[1].b, ax[1].c, ax[2].b, ax[2].c)


def step(grid: SimulationGrid, state: FieldState, sources=(), check: bool = True) -> FieldState:
    """Advance one leapfrog step: H to n+1/2, then E to n+1 (in place)."""
    per = np.array(grid.periodic, dtype=np.bool_)
    kernels.update_h(state.ex, state.ey, state.ez, state.hx, state.hy, state.hz, grid.ch, per,
                     *_cpml_args(grid, "h"), *state.psi_h)
    kernels.update_e(state.ex, state.ey, state.ez, state.hx, state.hy, state.hz,
                     grid.ca[0], grid.cb[0], grid.ca[1], grid.cb[1], grid.ca[2], grid.cb[2], per,
                     *_cpml_args(grid, "e"), *state.psi_e)
    t_half = (state.n + 0.5) * grid.dt
    if grid.feed is not None:
        vs = drive_voltage(grid, t_half)
        if vs:
            state.ez[grid.feed.gap] -= grid.feed.coef * vs
    if sources:
        comps = (state.ex, state.ey, state.ez)
        for src in sources:
            comps[src.axis][src.index] -= grid.cb[src.axis][src.index] * grid.dx * src.waveform(t_half)
    state.n += 1
    if check and not all(kernels.all_finite(a) for a in
                         (state.ex, state.ey, state.ez, state.hx, state.hy, state.hz)):
        raise InstabilityError(f"non-finite field after step {state.n}", step=state.n)
    return state


def feed_voltage(grid: SimulationGrid, state: FieldState) -> float:
    """Terminal voltage (top arm minus bottom arm) at the current E time level."""
    return -state.ez[grid.feed.gap] * grid.dx


def feed_current(grid: SimulationGrid, state: FieldState) -> float:
    """Current in +z through the gap from the H loop around it (H time level)."""
    i, j, k = grid.feed.gap
    hx, hy = state.hx, state.hy
    return ((hy[i, j, k] - hy[i - 1, j, k]) - (hx[i, j, k] - hx[i, j - 1, k])) * grid.dx


@dataclass
class PhasorField:
    """Complex peak-amplitude phasors at the drive frequency."""

    frequency: float  # Hz
    e: list | None  # [Ex, Ey, Ez] on the Yee edges, or None
    h: list | None = None
    v: complex = 0j
    i: complex = 0j
    offset: tuple = (0, 0, 0)
    map_dims: tuple | None = None
    dx: float = 1e-3
    trace: list = field(default_factory=list)

    @property
    def accepted_power(self) -> float:
        return 0.5 * float(np.real(self.v * np.conj(self.i)))

    def scaled(self, factor: float) -> "PhasorField":
        return replace(
            self,
            e=None if self.e is None else [a * factor for a in self.e],
            h=None if self.h is None else [a * factor for a in self.h],
            v=self.v * factor,
            i=self.i * factor,
        )


@dataclass(frozen=True)
class SteadyStateConfig:
    min_periods: int = 5
    max_periods: int = 60
    tol: float = 0.005
    record_e: bool = True
    record_h: bool = False

    def __post_init__(self):
        if self.min_periods < 2 or self.max_periods < self.min_periods:
            raise DomainError("need 2 <= min_periods <= max_periods")


def dft_phasor(samples, times, frequency: float) -> complex:
    """Single-bin DFT over one whole period: exact for a pure sinusoid."""
    samples = np.asarray(samples, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    w = np.exp(-2j * np.pi * frequency * times)
    return complex(2.0 / samples.size * np.sum(samples * w))


def run_to_steady_state(grid: SimulationGrid, state: FieldState, config: SteadyStateConfig | None = None,
                        probe: list | None = None) -> PhasorField:
    """Run whole drive periods until the feed-current amplitude settles.

    Converged when the amplitude changes by less than ``tol`` (relative)
    between consecutive periods, after at least ``min_periods``.  Phasors
    are the DFT over the final period.  ``probe``, if given, receives
    ``(step, V, I)`` rows.
    """
    config = config or SteadyStateConfig()
    if grid.feed is None or grid.frequency <= 0:
        raise DomainError("steady-state runs need a driven feed")
    f = grid.frequency
    n_per = grid.steps_per_period
    dt = grid.dt
    w = 2.0 * np.pi * f
    shape = grid.dims
    fields_e = (state.ex, state.ey, state.ez)
    fields_h = (state.hx, state.hy, state.hz)
    acc_e = acc_h = None
    trace = []
    prev_amp = None
    for period in range(config.max_periods):
        record = period >= config.min_periods - 1
        if record and config.record_e:
            acc_e = [np.zeros(shape, dtype=np.complex128) for _ in range(3)] if acc_e is None else acc_e
            for a in acc_e:
                a.fill(0)
        if record and config.record_h:
            acc_h = [np.zeros(shape, dtype=np.complex128) for _ in range(3)] if acc_h is None else acc_h
            for a in acc_h:
                a.fill(0)
        v_acc = 0j
        i_acc = 0j
        for _ in range(n_per):
            t_half = (state.n + 0.5) * dt
            step(grid, state, check=False)
            t_full = state.n * dt
            vol = feed_voltage(grid, state)
            cur = feed_current(grid, state)
            if not (np.isfinite(vol) and np.isfinite(cur)):
                raise InstabilityError(f"non-finite feed values at step {state.n}", step=state.n)
            if probe is not None:
                probe.append((state.n, vol, cur))
            we = np.exp(-1j * w * t_full)
            wh = np.exp(-1j * w * t_half)
            v_acc += vol * we
            i_acc += cur * wh
            if record and config.record_e:
                for a, fld in zip(acc_e, fields_e):
                    kernels.accumulate(a, fld, we.real, we.imag)
            if record and config.record_h:
                for a, fld in zip(acc_h, fields_h):
                    kernels.accumulate(a, fld, wh.real, wh.imag)
        if not all(kernels.all_finite(a) for a in fields_e + fields_h):
            raise InstabilityError(f"non-finite field by step {state.n}", step=state.n)
        scale = 2.0 / n_per
        v_ph, i_ph = v_acc * scale, i_acc * scale
        amp = abs(i_ph)
        change = 0.0 if (prev_amp is not None and amp == prev_amp) else (
            abs(amp - prev_amp) / max(amp, prev_amp) if prev_amp is not None else np.inf)
        trace.append((period + 1, amp, change))
        log.debug("period %d |I| = %.6e change %.2e", period + 1, amp, change)
        if period + 1 >= config.min_periods and change < config.tol:
            e = [a * scale for a in acc_e] if config.record_e else None
            h = [a * scale for a in acc_h] if config.record_h else None
            return PhasorField(f, e, h, v_ph, i_ph, grid.offset, grid.map_dims, grid.dx, trace)
        prev_amp = amp
    raise ConvergenceError(
        f"feed current did not settle within {config.max_periods} periods", trace)


def feed_metrics(phasors: PhasorField) -> tuple[complex, float]:
    """Input impedance V/I and accepted power 1/2 Re(V I*)."""
    v, i = abs(phasors.v), abs(phasors.i)
    if min(v, i) <= 1e-12 * max(v, i):
        raise DegenerateFeedError("feed current or voltage is zero; impedance undefined")
    return phasors.v / phasors.i, phasors.accepted_power


def normalize_to_power(phasors: PhasorField, target: float = 1.0) -> PhasorField:
    """Scale every phasor so the accepted feed power equals ``target`` watts."""
    p = phasors.accepted_power
    if not p > 0:
        raise DomainError(f"accepted power must be positive, got {p}")
    return phasors.scaled(np.sqrt(target / p))


def voxel_center_e(phasors: PhasorField, offset=None, dims=None) -> list:
    """E phasor components averaged onto voxel centres of the embedded map region."""
    if phasors.e is None:
        raise DomainError("phasor field has no E data")
    ox, oy, oz = phasors.offset if offset is None else offset
    mx, my, mz = phasors.map_dims if dims is None else dims
    ex, ey, ez = phasors.e
    sx, sy, sz = slice(ox, ox + mx), slice(oy, oy + my), slice(oz, oz + mz)
    sx1, sy1, sz1 = slice(ox + 1, ox + mx + 1), slice(oy + 1, oy + my + 1), slice(oz + 1, oz + mz + 1)
    cx = (ex[sx, sy, sz] + ex[sx, sy1, sz] + ex[sx, sy, sz1] + ex[sx, sy1, sz1]) / 4
    cy = (ey[sx, sy, sz] + ey[sx1, sy, sz] + ey[sx, sy, sz1] + ey[sx1, sy, sz1]) / 4
    cz = (ez[sx, sy, sz] + ez[sx1, sy, sz] + ez[sx, sy1, sz] + ez[sx1, sy1, sz]) / 4
    return [cx, cy, cz]


def e_rms_squared(phasors: PhasorField) -> np.ndarray:
    """|E_rms|^2 at voxel centres from peak phasors."""
    cx, cy, cz = voxel_center_e(phasors)
    return (np.abs(cx) ** 2 + np.abs(cy) ** 2 + np.abs(cz) ** 2) / 2.0


def _trap(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def poynting_flux(phasors: PhasorField, lo, hi) -> float:
    """Net time-averaged power leaving the node box ``lo..hi`` (inclusive node indices)."""
    if phasors.e is None or phasors.h is None:
        raise DomainError("Poynting flux needs both E and H phasors")
    total = 0.0
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        perm = (a, b, c)
        e_b = np.transpose(phasors.e[b], perm)
        e_c = np.transpose(phasors.e[c], perm)
        h_b = np.transpose(phasors.h[b], perm)
        h_c = np.transpose(phasors.h[c], perm)
        b0, b1, c0, c1 = lo[b], hi[b], lo[c], hi[c]
        for node, sign in ((lo[a], -1.0), (hi[a], 1.0)):
            # E_b (node a, half b, node c) against H_c averaged across the face
            eb = e_b[node, b0:b1, c0:c1 + 1]
            hc = 0.5 * (h_c[node - 1, b0:b1, c0:c1 + 1] + h_c[node, b0:b1, c0:c1 + 1])
            s1 = np.real(eb * np.conj(hc)) * _trap(c1 - c0 + 1)[None, :]
            ec = e_c[node, b0:b1 + 1, c0:c1]
            hb = 0.5 * (h_b[node - 1, b0:b1 + 1, c0:c1] + h_b[node, b0:b1 + 1, c0:c1])
            s2 = np.real(ec * np.conj(hb)) * _trap(b1 - b0 + 1)[:, None]
            total += sign * 0.5 * (s1.sum() - s2.sum()) * phasors.dx ** 2
    return float(total)


def field_energy(grid: SimulationGrid, state: FieldState, e_prev=None) -> float:
    """Electromagnetic energy.

    With ``e_prev`` (the E components one step earlier) this is the
    leapfrog invariant ``1/2 eps E^n.E^(n+1) + 1/2 mu |H^(n+1/2)|^2``, which
    is exactly conserved in a lossless closed cavity.
    """
    vol = grid.dx ** 3
    es = (state.ex, state.ey, state.ez)
    ep = es if e_prev is None else e_prev
    we = sum(float(np.sum(eps * a * b)) for eps, a, b in zip(grid.eps_edge, ep, es))
    wh = sum(float(np.sum(h * h)) for h in (state.hx, state.hy, state.hz))
    return 0.5 * vol * (we + MU0 * wh)
