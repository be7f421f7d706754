"""Canonical solver validation problems: free-space dipole, lossy plane wave, CPML reflection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import EPS0, MU0, DipoleSource, FieldState, GridConfig, add_dipole, make_grid
from .solver import (CurrentSource, SteadyStateConfig, feed_metrics, poynting_flux, run_to_steady_state,
                     step)


@dataclass
class DipoleResult:
    impedance: complex
    accepted_power: float
    poynting_power: float
    steps: int


def free_space_dipole(frequency_ghz: float = 3.0, dx_mm: float = 1.0, pad: int = 25,
                      box_inset: int = 12) -> DipoleResult:
    """Half-wave dipole in vacuum; power is also integrated over a closed box."""
    source = DipoleSource(frequency_ghz)
    n = source.length_cells(dx_mm)
    dims = (2 * pad + 1, 2 * pad + 1, n + 2 * pad)
    grid = make_grid(np.zeros(dims), np.ones(dims), dx_mm * 1e-3, frequency_ghz * 1e9)
    add_dipole(grid, pad, pad, dims[2] // 2, n, source)
    state = FieldState.zeros(grid)
    ph = run_to_steady_state(grid, state, SteadyStateConfig(record_h=True))
    z, p = feed_metrics(ph)
    lo = (box_inset,) * 3
    hi = tuple(d - box_inset for d in dims)
    return DipoleResult(z, p, poynting_flux(ph, lo, hi), state.n)


@dataclass
class LossyResult:
    alpha_fit: float  # Np/m
    skin_depth: float  # m, from the fitted alpha
    periods: int


def lossy_plane_wave(sigma: float, eps_r: float, frequency_hz: float, dx: float = 0.25e-3,
                     alpha_guess: float | None = None, max_periods: int = 60, tol: float = 1e-4) -> LossyResult:
    """1-D plane wave entering a lossy half-space; fit the amplitude decay.

    The domain is periodic in x and y.  ``alpha_guess`` (default: the
    continuum plane-wave value) sizes the lossy region and the fit window,
    five decay lengths starting four cells past the interface.
    """
    w = 2 * np.pi * frequency_hz
    if alpha_guess is None:
        eps = eps_r * EPS0
        alpha_guess = w * np.sqrt(MU0 * eps / 2) * np.sqrt(np.hypot(1.0, sigma / (w * eps)) - 1.0)
    delta = 1.0 / alpha_guess
    n_vac, pml = 60, 10
    n_lossy = int(np.ceil(7.5 * delta / dx))
    nz = n_vac + pml + n_lossy + pml
    s, e = np.zeros((1, 1, nz)), np.ones((1, 1, nz))
    z0 = n_vac + pml
    s[..., z0:], e[..., z0:] = sigma, eps_r
    grid = make_grid(s, e, dx, frequency_hz, GridConfig(cpml_layers=pml), periodic=(True, True, False))
    state = FieldState.zeros(grid)
    period = 1.0 / frequency_hz
    src = CurrentSource(0, (0, 0, 30), lambda t: np.sin(w * t) * min(1.0, t / (2 * period)))
    n = grid.steps_per_period
    acc = np.zeros(nz, complex)
    prev = None
    for p in range(max_periods):
        acc[:] = 0
        for _ in range(n):
            step(grid, state, [src], check=False)
            acc += state.ex[0, 0, :] * np.exp(-1j * w * state.n * grid.dt)
        amp = np.abs(acc)
        if prev is not None and np.max(np.abs(amp - prev)) / amp.max() < tol:
            break
        prev = amp.copy()
    k = np.arange(z0 + 4, z0 + 4 + int(round(5 * delta / dx)))
    slope = np.polyfit(k * dx, np.log(np.abs(acc[k])), 1)[0]
    return LossyResult(-slope, -1.0 / slope, p + 1)


def _pulse_trace(n: int, steps: int, probe_offset: int, config: GridConfig, dx: float, width: float):
    grid = make_grid(np.zeros((n,) * 3), np.ones((n,) * 3), dx, config=config)
    state = FieldState.zeros(grid)
    c = n // 2
    t0, sp = 4 * width * grid.dt, width * grid.dt
    src = CurrentSource(2, (c, c, c), lambda t: -(t - t0) / sp * np.exp(-0.5 * ((t - t0) / sp) ** 2))
    trace = np.empty(steps)
    for i in range(steps):
        step(grid, state, [src], check=False)
        trace[i] = state.ez[c + probe_offset, c, c]
    return trace


def cpml_reflection_db(n: int = 50, reference_n: int = 120, steps: int = 150, probe_offset: int = 8,
                       config: GridConfig | None = None, dx: float = 1e-3, width: float = 7.0) -> float:
    """Peak difference between a CPML-terminated run and a large reference run, in dB.

    A Gaussian-derivative current at the centre radiates a broadband pulse;
    the reference domain is large enough that nothing returns from its
    boundary before ``steps``.
    """
    config = config or GridConfig()
    a = _pulse_trace(n, steps, probe_offset, config, dx, width)
    b = _pulse_trace(reference_n, steps, probe_offset, config, dx, width)
    return float(20 * np.log10(np.max(np.abs(a - b)) / np.max(np.abs(b))))
