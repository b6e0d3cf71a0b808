import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinarrival.core import PhysicalParams, SpinDirection
from spinarrival.errors import DomainTooSmall, NodeSingularity, NonNormalizable
from spinarrival.waveguide import (HalfLinePropagator, LongitudinalGrid, PacketConfig, WaveState,
                                   evolve_to, flux_on_plane, init_packet, interpolate,
                                   momentum_expectation, read_snapshot_csv, rho_and_grad,
                                   transverse_density, write_snapshot_csv)


def direct_series(state, z):
    """f and f' at arbitrary z by summing the sine series directly."""
    g = state.grid
    a = state.coefficients * math.sqrt(2.0 / (g.n_points + 1))
    k = g.wavenumbers
    s = np.sin(np.outer(z, k))
    c = np.cos(np.outer(z, k))
    return s @ a, c @ (k * a)


def test_packet_vanishes_at_wall(grid, params):
    s = init_packet(PacketConfig(2.0, 0.5, 0.0), grid, params)
    f, _ = interpolate(s.fields, grid, np.array([0.0]))
    assert f[0] == 0.0
    assert s.fields.f[0] == 0.0


@given(st.floats(1.5, 30), st.floats(0.2, 1.0), st.floats(0, 5))
def test_packet_normalized(z0, d, p0):
    g = LongitudinalGrid(80.0, 4095)
    s = init_packet(PacketConfig(z0, d, p0), g, PhysicalParams())
    assert abs(s.norm - 1.0) < 1e-12


def test_packet_momentum(grid, params):
    s = init_packet(PacketConfig(2.0, 0.5, 3.0), grid, params)
    assert momentum_expectation(s) == pytest.approx(3.0, rel=0.02)


def test_packet_off_grid_is_not_normalizable():
    with pytest.raises(NonNormalizable):
        init_packet(PacketConfig(300.0, 1.0, 0.0), LongitudinalGrid(20.0, 1023), PhysicalParams())


def test_packet_near_wall_warns(grid, params):
    with pytest.warns(UserWarning):
        PacketConfig(1.0, 0.5, 0.0)


def test_sine_mode_is_stationary(grid, params):
    k = 7
    amp = np.sin(k * math.pi * grid.nodes / grid.wall)
    s = WaveState(amp / math.sqrt(np.sum(amp ** 2) * grid.dz), 0.0, params, grid)
    prop = HalfLinePropagator(s)
    for t in (0.3, 5.0, 40.0):
        st_ = prop.state_at(t)
        assert np.max(np.abs(np.abs(st_.amplitudes) - np.abs(s.amplitudes))) < 1e-12


def test_norm_conservation(state0):
    prop = HalfLinePropagator(state0)
    for t in np.linspace(0, 15, 7):
        assert abs(prop.state_at(t).norm - 1.0) < 1e-12


def test_free_gaussian_dispersion(params):
    grid = LongitudinalGrid(80.0, 4095)
    d, z0, p0, t = 1.0, 20.0, 3.0, 1.5
    s = evolve_to(init_packet(PacketConfig(z0, d, p0), grid, params), t)
    sigma = d * math.sqrt(1 + (t / (2 * d * d)) ** 2)
    z = grid.nodes
    exact = np.exp(-(z - z0 - p0 * t) ** 2 / (2 * sigma ** 2)) / (math.sqrt(2 * math.pi) * sigma)
    assert np.max(np.abs(np.abs(s.amplitudes) ** 2 - exact)) < 1e-4


def test_wall_condition_over_time(state0):
    prop = HalfLinePropagator(state0)
    for t in (0.5, 3.0, 12.0):
        f = prop.fields(t).f
        assert abs(f[0]) < 1e-8 * np.max(np.abs(f))


def test_far_wall_guard(params):
    small = LongitudinalGrid(12.0, 511)
    s = init_packet(PacketConfig(5.0, 1.0, 2.0), small, params)
    with pytest.raises(DomainTooSmall):
        evolve_to(s, 5.0)
    with pytest.raises(DomainTooSmall):
        HalfLinePropagator(s).check_horizon(5.0)


def test_interpolation_matches_direct_series(state0, rng):
    s = HalfLinePropagator(state0).state_at(2.0)
    z = rng.uniform(0.0, 30.0, 200)
    f, fz = interpolate(s.fields, s.grid, z)
    f_ref, fz_ref = direct_series(s, z)
    scale = np.max(np.abs(s.amplitudes))
    assert np.max(np.abs(f - f_ref)) < 1e-6 * scale
    assert np.max(np.abs(fz - fz_ref)) < 1e-5 * scale


def test_real_wavefunction_has_no_convective_velocity(grid, params):
    s = init_packet(PacketConfig(5.0, 1.0, 0.0), grid, params)
    _, _, v = rho_and_grad(s, 0.0, 0.0, 4.3)
    assert v == 0.0


def test_transverse_log_gradient(state0, params):
    for x in (-0.4, 0.1, 0.3):
        rho, g, _ = rho_and_grad(state0, x, 0.0, 5.2)
        assert g[0] / rho == pytest.approx(-2 * params.mass * params.omega * x / params.hbar, rel=1e-13)


def test_gradient_matches_finite_differences(rng):
    params = PhysicalParams(omega=2.0)
    grid = LongitudinalGrid(80.0, 4095)
    s = evolve_to(init_packet(PacketConfig(5.0, 1.0, 1.0), grid, params), 1.0)

    def rho(p):
        return float(np.abs(s.psi(p[0], p[1], np.array([p[2]])))[0] ** 2)

    h = 1e-5
    for _ in range(100):
        p = np.array([rng.normal(0, 0.5), rng.normal(0, 0.5), rng.uniform(3.0, 9.0)])
        r, g, _ = rho_and_grad(s, *p)
        fd = np.array([(rho(p + h * e) - rho(p - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.linalg.norm(g - fd) < 1e-5 * np.linalg.norm(fd)


def test_separability(state0, rng):
    for _ in range(20):
        x, y, z = rng.normal(0, 0.3), rng.normal(0, 0.3), rng.uniform(1, 10)
        rho, _, _ = rho_and_grad(state0, x, y, z)
        f, _ = interpolate(state0.fields, state0.grid, np.array([z]))
        expected = transverse_density(state0.params, x, y) * abs(f[0]) ** 2
        assert abs(rho - expected) <= 1e-12 * expected


def test_node_is_singular(state0):
    with pytest.raises(NodeSingularity):
        rho_and_grad(state0, 0.0, 0.0, 0.0)


def test_flux_forward_packet_is_nonnegative():
    params = PhysicalParams(omega=8.0, lam=0.0)
    grid = LongitudinalGrid(80.0, 4095)
    s = init_packet(PacketConfig(5.0, 1.0, 10.0), grid, params)
    xy = [(x, y) for x in np.linspace(-1, 1, 5) for y in np.linspace(-1, 1, 5)]
    rep = flux_on_plane(s, SpinDirection.plus_z(), 0.0, np.linspace(0, 1.5, 31), xy)
    assert rep.min_flux >= -1e-8
    assert rep.negative_fraction == 0.0


def test_flux_spin_term_changes_sign_across_y():
    params = PhysicalParams(omega=8.0)
    grid = LongitudinalGrid(80.0, 4095)
    s = init_packet(PacketConfig(5.0, 1.0, 0.0), grid, params)  # real f: only the spin part survives
    xy = [(0.0, -0.3), (0.0, 0.3)]
    rep = flux_on_plane(s, SpinDirection.plus_x(), 1.0, [0.0], xy)
    lo, hi = rep.values[0]
    assert lo < 0 < hi and lo == pytest.approx(-hi)
    rho = transverse_density(params, 0.0, 0.3) * abs(interpolate(s.fields, grid, np.array([10.0]))[0][0]) ** 2
    assert hi == pytest.approx(params.omega * 0.3 * rho, rel=1e-12)


def test_flux_vanishes_for_real_wavefunction_without_spin_term():
    params = PhysicalParams(omega=8.0, lam=0.0)
    s = init_packet(PacketConfig(5.0, 1.0, 0.0), LongitudinalGrid(80.0, 4095), params)
    rep = flux_on_plane(s, SpinDirection.plus_x(), 0.0, [0.0], [(0.1, 0.2), (-0.3, 0.0)])
    assert np.all(rep.values == 0.0)


def test_snapshot_round_trip(tmp_path, params):
    g = LongitudinalGrid(20.0, 255)
    s = init_packet(PacketConfig(5.0, 1.0, 1.0), g, params)
    s1 = evolve_to(s, 0.5)
    write_snapshot_csv([s, s1], tmp_path / "snap.csv")
    back = read_snapshot_csv(tmp_path / "snap.csv", params, g)
    assert [b.time for b in back] == [0.0, 0.5]
    np.testing.assert_array_equal(back[1].amplitudes, s1.amplitudes)


def test_state_is_immutable(state0):
    with pytest.raises(ValueError):
        state0.amplitudes[0] = 1.0
