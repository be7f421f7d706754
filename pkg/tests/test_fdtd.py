import numpy as np
import pytest

from oracles import plane_wave_alpha
from rfdose.errors import DegenerateFeedError, DomainError, InstabilityError
from rfdose.fdtd.grid import (C0, EPS0, DipoleSource, FieldState, GridConfig, add_dipole, build_simulation,
                              courant_dt, make_grid, period_locked_dt)
from rfdose.fdtd.solver import (CurrentSource, SteadyStateConfig, dft_phasor, e_rms_squared, feed_metrics,
                                field_energy, normalize_to_power, run_to_steady_state, step)
from rfdose.fdtd.validation import cpml_reflection_db, lossy_plane_wave
from rfdose.tissues import LabelVolume, PropertyMaps, assign_properties


def _vacuum(dims, **kw):
    return make_grid(np.zeros(dims), np.ones(dims), 1e-3, config=GridConfig(cpml_layers=3), **kw)


def _fields(state):
    return (state.ex, state.ey, state.ez, state.hx, state.hy, state.hz)


def test_zero_fields_stay_zero():
    g = _vacuum((16, 16, 16))
    s = FieldState.zeros(g)
    for _ in range(50):
        step(g, s)
    assert all(not a.any() for a in _fields(s))


def test_period_locked_time_step():
    dx, f = 3e-3, 0.9e9
    dt = period_locked_dt(dx, f)
    assert dt <= courant_dt(dx)
    n = round(1 / (f * dt))
    assert abs(n * dt * f - 1) < 1e-12
    assert (n - 1) * courant_dt(dx) < 1 / f


def test_courant_violation_rejected():
    with pytest.raises(DomainError):
        _vacuum((8, 8, 8), dt=1.01e-3 / (C0 * np.sqrt(3)))


def test_vacuum_pulse_speed():
    nz = 140
    g = make_grid(np.zeros((1, 1, nz)), np.ones((1, 1, nz)), 1e-3, periodic=(True, True, False))
    s = FieldState.zeros(g)
    t0, sp = 30 * g.dt, 6 * g.dt
    src = CurrentSource(0, (0, 0, 20), lambda t: np.exp(-0.5 * ((t - t0) / sp) ** 2))
    za, zb = 35, 95
    ta, tb = [], []
    steps = 100 + int((zb - 20) * g.dx / (C0 * g.dt)) + 40
    for _ in range(steps):
        step(g, s, [src])
        ta.append(s.ex[0, 0, za])
        tb.append(s.ex[0, 0, zb])

    def peak_time(tr):
        i = int(np.argmax(np.abs(tr)))
        y0, y1, y2 = np.abs(tr[i - 1:i + 2])
        return i + 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)

    speed = (zb - za) * g.dx / ((peak_time(tb) - peak_time(ta)) * g.dt)
    assert abs(speed / C0 - 1) < 0.01


def test_lossy_attenuation_matches_plane_wave_theory():
    sigma, eps_r, f = 2.14, 52.06, 3e9  # muscle at 3 GHz
    res = lossy_plane_wave(sigma, eps_r, f)
    assert abs(res.alpha_fit / plane_wave_alpha(sigma, eps_r, f) - 1) < 0.02


def test_cpml_reflection_below_minus_40_db():
    assert cpml_reflection_db() <= -40.0


def test_pec_cavity_conserves_energy():
    dims = (12, 10, 14)
    rng = np.random.default_rng(0)
    g = make_grid(np.zeros(dims), rng.uniform(1, 4, dims), 1e-3, cpml=(False, False, False))
    s = FieldState.zeros(g)
    src = CurrentSource(2, (5, 4, 7), lambda t: np.exp(-0.5 * ((t - 20 * g.dt) / (5 * g.dt)) ** 2))
    for _ in range(80):
        step(g, s, [src])
    energies = []
    for _ in range(1000):
        prev = (s.ex.copy(), s.ey.copy(), s.ez.copy())
        step(g, s)
        energies.append(field_energy(g, s, prev))
    e = np.array(energies)
    assert e[0] > 0
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-3


def test_long_run_is_stable_in_tissue():
    rng = np.random.default_rng(3)
    labels = LabelVolume(rng.integers(0, 14, (14, 14, 14)).astype(np.uint16))
    maps = assign_properties(labels, 3.0)
    g = make_grid(maps.sigma, maps.epsilon, 1e-3, 3e9, GridConfig(cpml_layers=4))
    s = FieldState.zeros(g)
    w = 2 * np.pi * 3e9
    src = CurrentSource(2, (7, 7, 7), lambda t: np.sin(w * t))
    for _ in range(10_000):
        step(g, s, [src], check=False)
    assert all(np.all(np.isfinite(a)) for a in _fields(s))
    assert max(np.abs(a).max() for a in _fields(s)) < 1e6


def test_instability_is_reported():
    g = _vacuum((8, 8, 8))
    s = FieldState.zeros(g)
    s.ez[4, 4, 4] = np.nan
    with pytest.raises(InstabilityError) as info:
        step(g, s)
    assert info.value.step == 1


@pytest.mark.parametrize("phase", [0.0, 0.7, -2.0])
def test_dft_recovers_sinusoid(phase):
    f, n = 1e9, 37
    t = (np.arange(n) + 0.3) / (n * f)
    x = 2.5 * np.cos(2 * np.pi * f * t + phase)
    assert abs(dft_phasor(x, t, f) - 2.5 * np.exp(1j * phase)) < 1e-10


def _small_dipole(amplitude=1.0, shorted=False):
    src = DipoleSource(3.0, amplitude=amplitude)
    n = src.length_cells(2.0)
    dims = (31, 31, n + 30)
    g = make_grid(np.zeros(dims), np.ones(dims), 2e-3, 3e9, GridConfig(cpml_layers=8))
    add_dipole(g, 15, 15, dims[2] // 2, n, src)
    if shorted:
        g.ca[2][g.feed.gap] = 0.0
        g.cb[2][g.feed.gap] = 0.0
        g.feed = type(g.feed)(g.feed.gap, g.feed.arm_cells, amplitude, 50.0, 0.0, 2.0)
    return g


@pytest.fixture(scope="module")
def dipole_pair():
    out = []
    for amp in (1.0, 2.0):
        g = _small_dipole(amp)
        out.append(run_to_steady_state(g, FieldState.zeros(g), SteadyStateConfig()))
    return out


def test_amplitude_doubling(dipole_pair):
    a, b = dipole_pair
    za, pa = feed_metrics(a)
    zb, pb = feed_metrics(b)
    assert abs(zb - za) < 1e-9 * abs(za)
    assert pb == pytest.approx(4 * pa, rel=1e-9)
    assert za.real > 0 and pa > 0


def test_normalisation_to_one_watt(dipole_pair):
    a, _ = dipole_pair
    n = normalize_to_power(a)
    assert abs(n.accepted_power - 1.0) < 1e-12
    k = np.sqrt(1.0 / a.accepted_power)
    np.testing.assert_allclose(n.e[2], a.e[2] * k, rtol=1e-12)
    assert feed_metrics(n)[0] == pytest.approx(feed_metrics(a)[0], rel=1e-12)


def test_zero_amplitude_gives_zero_phasors():
    g = _small_dipole(0.0)
    ph = run_to_steady_state(g, FieldState.zeros(g), SteadyStateConfig(min_periods=2))
    assert ph.v == 0 and ph.i == 0 and all(not a.any() for a in ph.e)
    with pytest.raises(DegenerateFeedError):
        feed_metrics(ph)
    with pytest.raises(DomainError):
        normalize_to_power(ph)


def test_shorted_gap_is_degenerate():
    g = _small_dipole(shorted=True)
    ph = run_to_steady_state(g, FieldState.zeros(g), SteadyStateConfig(min_periods=2))
    with pytest.raises(DegenerateFeedError):
        feed_metrics(ph)


def test_homogeneous_block_coefficients():
    dims = (8, 8, 8)
    sigma, eps_r = 1.5, 40.0
    g = make_grid(np.full(dims, sigma), np.full(dims, eps_r), 1e-3, 1e9, cpml=(False, False, False))
    loss = sigma * g.dt / (2 * eps_r * EPS0)
    for a in range(3):
        inner = g.ca[a][3:5, 3:5, 3:5]
        np.testing.assert_allclose(inner, (1 - loss) / (1 + loss), rtol=1e-14)
        np.testing.assert_allclose(g.cb[a][3:5, 3:5, 3:5], g.dt / (eps_r * EPS0 * (1 + loss)) / 1e-3,
                                   rtol=1e-14)


def test_edge_properties_average_four_voxels():
    s = np.zeros((4, 4, 4))
    s[1, 1, 1] = 4.0
    g = make_grid(s, np.ones_like(s), 1e-3, cpml=(False, False, False))
    # Ez edges at nodes (1..2, 1..2) in x/y along voxel z = 1 touch the voxel
    touched = g.sigma_edge[2][1:3, 1:3, 1]
    np.testing.assert_array_equal(touched, np.ones((2, 2)))
    assert g.sigma_edge[2].sum() == 4.0


def _sphere_maps(freq=0.9, n=24, voxel=3.0):
    idx = np.indices((n, n, n)) - (n - 1) / 2
    lab = np.where((idx ** 2).sum(0) <= (n / 2 - 2) ** 2, 11, 0).astype(np.uint16)
    return assign_properties(LabelVolume(lab, voxel), freq)


def test_build_places_antenna_at_standoff():
    maps = _sphere_maps()
    src = DipoleSource(0.9, standoff_mm=20.0)
    g, s = build_simulation(maps, src)
    p = g.info["placement"]
    standoff_mm = (p.scalp_x - p.antenna_node[0]) * maps.voxel_size
    assert abs(standoff_mm - 20.0) <= maps.voxel_size
    # head voxels are embedded unchanged, the rest is vacuum
    ox, oy, oz = g.offset
    c = tuple(o + 12 for o in g.offset)
    assert g.sigma_edge[2][c] == pytest.approx(0.94)
    assert g.sigma_edge[2][2, 2, 2] == 0.0
    assert g.map_dims == maps.dims and s.n == 0


def test_build_rejects_overflow_and_empty_head():
    maps = _sphere_maps()
    with pytest.raises(DomainError):
        build_simulation(maps, DipoleSource(0.9), max_dims=(64, 64, 64))
    empty = PropertyMaps(np.zeros((6, 6, 6)), np.ones((6, 6, 6)), np.zeros((6, 6, 6)), 0.9, 3.0)
    with pytest.raises(DomainError):
        build_simulation(empty, DipoleSource(0.9))
    with pytest.raises(DomainError):
        build_simulation(maps, DipoleSource(1.8))


def test_e_rms_uses_voxel_centres(dipole_pair):
    a, _ = dipole_pair
    ph = type(a)(a.frequency, [np.ones((4, 4, 4), complex) * 2] * 3, offset=(1, 1, 1), map_dims=(2, 2, 2))
    np.testing.assert_allclose(e_rms_squared(ph), np.full((2, 2, 2), 6.0))
