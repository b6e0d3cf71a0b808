import numpy as np
import pytest
from scipy import stats

from spinarrival.core import PAULI, PhysicalParams, SpinDirection, spinor_from_direction
from spinarrival.ensemble import integrate_sde_batch, sample_initial
from spinarrival.errors import NodeSingularity
from spinarrival.guidance import DynamicsSpec, VelocityField, stochastic_drift, velocity
from spinarrival.waveguide import (HalfLinePropagator, LongitudinalGrid, PacketConfig,
                                   init_packet, interpolate, rho_and_grad, transverse_amplitude)


@pytest.fixture(scope="module")
def moving(state0):
    return HalfLinePropagator(state0).state_at(1.3)


def random_points(rng, n):
    return np.column_stack([rng.normal(0, 0.3, n), rng.normal(0, 0.3, n), rng.uniform(2, 9, n)])


def test_spec_kind():
    assert DynamicsSpec(1.0, 0.0).kind == "deterministic"
    assert DynamicsSpec(1.0, 0.2).kind == "stochastic"
    with pytest.raises(ValueError):
        DynamicsSpec(1.0, -1.0)


def test_real_wavefunction_without_spin_term_is_static(grid, params):
    s = init_packet(PacketConfig(5.0, 1.0, 0.0), grid, params)
    v = velocity(s, (0.2, -0.1, 4.0), SpinDirection.plus_x(), 0.0)
    assert np.all(v == 0.0)


def test_spin_along_z_leaves_vz_unchanged(moving, rng):
    hb, m = moving.params.hbar, moving.params.mass
    for p in random_points(rng, 20):
        v1 = velocity(moving, p, SpinDirection.plus_z(), 1.0)
        v0 = velocity(moving, p, SpinDirection.plus_z(), 0.0)
        assert v1[2] == v0[2]
        rho, g, _ = rho_and_grad(moving, *p)
        np.testing.assert_allclose(v1[:2] - v0[:2], hb / (2 * m) * np.array([g[1], -g[0]]) / rho,
                                   rtol=1e-13, atol=1e-13)


def test_spin_term_matches_finite_difference_cross_product(moving, rng):
    n = SpinDirection.plus_y()
    h = 1e-5

    def rho(p):
        return float(np.abs(moving.psi(p[0], p[1], np.array([p[2]])))[0] ** 2)

    for p in random_points(rng, 10):
        diff = velocity(moving, p, n, 1.0) - velocity(moving, p, n, 0.0)
        fd = np.array([(rho(p + h * e) - rho(p - h * e)) / (2 * h) for e in np.eye(3)]) / rho(p)
        nx, ny, nz = n.n
        expected = 0.5 * np.array([fd[1] * nz - fd[2] * ny, fd[2] * nx - fd[0] * nz, fd[0] * ny - fd[1] * nx])
        np.testing.assert_allclose(diff, expected, rtol=1e-5, atol=1e-6)


def test_lambda_linearity(moving, rng):
    n = SpinDirection.from_angles(0.7, 1.1)
    for p in random_points(rng, 10):
        v0 = velocity(moving, p, n, 0.0)
        v1 = velocity(moving, p, n, 1.0) - v0
        for lam in (-1.0, 0.5, 1.0, 2.0):
            np.testing.assert_allclose(velocity(moving, p, n, lam) - v0, lam * v1, rtol=1e-12, atol=1e-14)


def test_product_state_identity_against_full_spinor_form(moving, rng):
    """Spin term equals -lam (hbar/m) Re[Psi^dag (sigma x grad) Psi] / |Psi|^2 built from components."""
    p_ = moving.params
    for _ in range(100):
        n = SpinDirection.from_vector(rng.standard_normal(3))
        x, y, z = random_points(rng, 1)[0]
        chi = transverse_amplitude(p_, x, y) * moving.transverse_phase
        f, fz = interpolate(moving.fields, moving.grid, np.array([z]))
        psi = chi * f[0]
        dpsi = np.array([-p_.mass * p_.omega * x / p_.hbar * psi,
                         -p_.mass * p_.omega * y / p_.hbar * psi,
                         chi * fz[0]])
        spin = spinor_from_direction(n).vector
        Psi = spin * psi                      # (2,)
        dPsi = np.outer(dpsi, spin)           # (3 derivative axes, 2 components)
        # (sigma x grad)_i = eps_ijk sigma_j d_k
        eps = np.zeros((3, 3, 3))
        eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1
        eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1
        term = np.einsum("ijk,a,jab,kb->i", eps, Psi.conj(), PAULI, dPsi)
        lam = 1.0
        oracle = -lam * p_.hbar / p_.mass * term.real / np.vdot(Psi, Psi).real
        got = velocity(moving, (x, y, z), n, lam) - velocity(moving, (x, y, z), n, 0.0)
        np.testing.assert_allclose(got, oracle, rtol=1e-10, atol=1e-10)


def test_stochastic_drift_reduces_to_velocity(moving):
    n = SpinDirection.plus_x()
    p = (0.1, 0.2, 5.0)
    np.testing.assert_array_equal(stochastic_drift(moving, p, n, DynamicsSpec(1.0, 0.0)),
                                  velocity(moving, p, n, 1.0))


def test_osmotic_drift_for_real_wavefunction(grid, params):
    s = init_packet(PacketConfig(5.0, 1.0, 0.0), grid, params)
    p = (0.1, -0.2, 4.5)
    rho, g, _ = rho_and_grad(s, *p)
    np.testing.assert_allclose(stochastic_drift(s, p, SpinDirection.plus_z(), DynamicsSpec(0.0, 0.3)),
                               0.3 * g / rho, rtol=1e-13)


def test_vectorized_field_matches_pointwise(state0, rng):
    prop = HalfLinePropagator(state0)
    spec = DynamicsSpec(1.0, 0.2)
    n = SpinDirection.from_angles(1.0, 2.0)
    pts = random_points(rng, 30)
    v, sing = VelocityField(prop, n, spec)(1.3, pts)
    assert not sing.any()
    s = prop.state_at(1.3)
    for p, vp in zip(pts, v):
        np.testing.assert_allclose(vp, stochastic_drift(s, p, n, spec), rtol=1e-12, atol=1e-14)


def test_node_raises(state0):
    with pytest.raises(NodeSingularity):
        velocity(state0, (0.0, 0.0, 0.0), SpinDirection.plus_x(), 1.0)


def test_fokker_planck_one_step(params):
    """10^5 walkers advanced one Euler-Maruyama step stay distributed as the evolved density."""
    nu, dt = 0.5, 1e-3
    p = PhysicalParams(omega=8.0, diffusion_nu=nu)
    grid = LongitudinalGrid(80.0, 4095)
    s0 = init_packet(PacketConfig(5.0, 1.0, 1.0), grid, p)
    prop = HalfLinePropagator(s0)
    x0 = sample_initial(100_000, 3, s0)
    field = VelocityField(prop, SpinDirection.plus_x(), DynamicsSpec(1.0, nu))
    *_, final = integrate_sde_batch(field, x0, np.arange(x0.shape[0]), 3, dt, None, dt)
    edges = np.linspace(1.0, 9.0, 51)
    fine = np.linspace(0.0, 80.0, 400_001)
    f, _ = interpolate(prop.fields(dt), grid, fine)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (np.abs(f[1:]) ** 2 + np.abs(f[:-1]) ** 2) * np.diff(fine))])
    expected = np.diff(np.interp(edges, fine, cdf))
    expected = np.append(expected, 1.0 - expected.sum())
    counts = np.histogram(final[:, 2], edges)[0]
    counts = np.append(counts, final.shape[0] - counts.sum())
    chi2 = stats.chisquare(counts, expected * final.shape[0])
    assert chi2.pvalue > 0.01
