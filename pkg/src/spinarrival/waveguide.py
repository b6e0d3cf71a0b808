"""Free longitudinal evolution on the half-line z >= 0 with a hard wall at z = 0.

The wave function factorizes as ``psi(x, y, z, t) = chi0(x, y) e^{-i omega t} f_t(z)``
with ``chi0`` the transverse harmonic ground state.  The longitudinal factor
lives on the nodes ``z_j = j*dz`` (``j = 1..N``) with Dirichlet walls at 0 and
``z_max + dz`` and is propagated exactly in the discrete sine basis, so there
is no time-stepping error at all.  Off-grid values come from cubic Hermite
interpolation with spectrally exact node derivatives.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from .core import PhysicalParams, SpinDirection
from .errors import DomainTooSmall, NodeSingularity, NonNormalizable

RHO_FLOOR_REL = 1e-12
FAR_WALL_NODES = 10
FAR_WALL_MASS = 1e-6


@dataclass(frozen=True)
class PacketConfig:
    z0: float
    width_d: float
    p0: float = 0.0

    def __post_init__(self):
        if not (self.z0 > 0 and self.width_d > 0 and self.p0 >= 0):
            raise ValueError("need z0 > 0, width_d > 0, p0 >= 0")
        if self.z0 - 3 * self.width_d <= 0:
            warnings.warn("packet overlaps the wall; the antisymmetrized packet "
                          "is visibly distorted", stacklevel=2)


@dataclass(frozen=True)
class LongitudinalGrid:
    """Nodes ``j*dz`` for ``j = 1..n_points``; walls at 0 and ``z_max + dz``.

    The sine transforms are fastest when ``n_points + 1`` is a power of two,
    hence the default of 4095.
    """

    z_max: float
    n_points: int = 4095

    def __post_init__(self):
        if not self.z_max > 0 or self.n_points < 4:
            raise ValueError("bad grid")

    @property
    def dz(self) -> float:
        return self.z_max / self.n_points

    @property
    def wall(self) -> float:
        return self.z_max + self.dz

    @property
    def nodes(self) -> np.ndarray:
        return self.dz * np.arange(1, self.n_points + 1)

    @property
    def extended_nodes(self) -> np.ndarray:
        """Nodes including both walls, ``j = 0..N+1``."""
        return self.dz * np.arange(self.n_points + 2)

    @property
    def wavenumbers(self) -> np.ndarray:
        return math.pi * np.arange(1, self.n_points + 1) / self.wall


def default_grid(params: PhysicalParams, n_points: int = 4095) -> LongitudinalGrid:
    return LongitudinalGrid(8.0 * params.detector_plane_L, n_points)


class NodeFields(NamedTuple):
    """``f``, ``f'`` and ``f''`` on the extended nodes (walls included)."""

    f: np.ndarray
    fz: np.ndarray
    fzz: np.ndarray


def _fields_from_coefficients(a: np.ndarray, kappa: np.ndarray) -> NodeFields:
    n = a.size
    f = np.zeros(n + 2, dtype=complex)
    fzz = np.zeros(n + 2, dtype=complex)
    f[1:-1] = sfft.dst(a, type=1, norm="ortho")
    fzz[1:-1] = sfft.dst(-(kappa ** 2) * a, type=1, norm="ortho")
    b = np.zeros(n + 2, dtype=complex)
    b[1:-1] = kappa * a
    fz = sfft.dct(b, type=1) * (0.5 * math.sqrt(2.0 / (n + 1)))
    return NodeFields(f, fz, fzz)


def hermite(z, dz: float, values: np.ndarray, slopes: np.ndarray):
    """Cubic Hermite interpolation on a uniform grid starting at 0."""
    s = np.asarray(z, dtype=float) / dz
    i = np.clip(np.floor(s).astype(np.int64), 0, values.size - 2)
    u = s - i
    u2 = u * u
    um = 1.0 - u
    return ((1.0 + 2.0 * u) * um * um * values[i] + u * um * um * dz * slopes[i]
            + u2 * (3.0 - 2.0 * u) * values[i + 1] + u2 * (u - 1.0) * dz * slopes[i + 1])


def interpolate(fields: NodeFields, grid: LongitudinalGrid, z):
    """Return ``(f(z), f'(z))`` off the grid."""
    f = hermite(z, grid.dz, fields.f, fields.fz)
    fz = hermite(z, grid.dz, fields.fz, fields.fzz)
    return f, fz


@dataclass(frozen=True, eq=False)
class WaveState:
    """Longitudinal amplitudes at one time; the transverse factor is implicit."""

    amplitudes: np.ndarray
    time: float
    params: PhysicalParams
    grid: LongitudinalGrid

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.n_points,):
            raise ValueError("amplitude count must match the grid")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dz)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return sfft.dst(self.amplitudes, type=1, norm="ortho")

    @cached_property
    def fields(self) -> NodeFields:
        return _fields_from_coefficients(self.coefficients, self.grid.wavenumbers)

    @property
    def transverse_phase(self) -> complex:
        return complex(np.exp(-1j * self.params.omega * self.time))

    def far_wall_mass(self) -> float:
        return float(np.sum(np.abs(self.amplitudes[-FAR_WALL_NODES:]) ** 2) * self.grid.dz)

    def psi(self, x, y, z):
        """Full scalar wave function ``chi0(x, y) e^{-i w t} f(z)``."""
        f, _ = interpolate(self.fields, self.grid, z)
        return transverse_amplitude(self.params, x, y) * self.transverse_phase * f


def transverse_density(params: PhysicalParams, x, y):
    mw = params.mass * params.omega / params.hbar
    return (mw / math.pi) * np.exp(-mw * (np.asarray(x) ** 2 + np.asarray(y) ** 2))


def transverse_amplitude(params: PhysicalParams, x, y):
    return np.sqrt(transverse_density(params, x, y))


def init_packet(cfg: PacketConfig, grid: LongitudinalGrid, params: PhysicalParams) -> WaveState:
    """Antisymmetrized Gaussian packet, normalized on the grid.

    The mirror image about z = 0 carries the opposite momentum so that the
    packet vanishes exactly at the wall.
    """
    z = grid.nodes
    hb = params.hbar
    g_plus = np.exp(-(z - cfg.z0) ** 2 / (4 * cfg.width_d ** 2) + 1j * cfg.p0 * z / hb)
    g_minus = np.exp(-(z + cfg.z0) ** 2 / (4 * cfg.width_d ** 2) - 1j * cfg.p0 * z / hb)
    f = g_plus - g_minus
    # A whole Gaussian integrates to sqrt(2 pi) d; compare the grid part to that.
    captured = np.sum(np.abs(f) ** 2) * grid.dz / (math.sqrt(2 * math.pi) * cfg.width_d)
    if captured < 1e-6:
        raise NonNormalizable(f"packet has norm {captured:.3g} on the grid")
    f = f / math.sqrt(np.sum(np.abs(f) ** 2) * grid.dz)
    return WaveState(f, 0.0, params, grid)


def momentum_expectation(state: WaveState) -> float:
    """Discrete expectation of ``-i hbar d/dz`` on the grid."""
    fz = state.fields.fz[1:-1]
    return float(np.real(np.sum(np.conj(state.amplitudes) * (-1j) * state.params.hbar * fz)) * state.grid.dz)


class HalfLinePropagator:
    """Exact evaluation of the longitudinal state at arbitrary times.

    This is the shared, read-only state table used by the trajectory
    integrators: every query re-propagates the stored sine coefficients to
    the exact query time instead of interpolating in time.
    """

    def __init__(self, state: WaveState, cache_size: int = 64):
        self.initial = state
        self.params = state.params
        self.grid = state.grid
        self._a0 = state.coefficients.copy()
        self._t0 = state.time
        self._kappa = state.grid.wavenumbers
        self._rate = state.params.hbar * self._kappa ** 2 / (2.0 * state.params.mass)
        self._cached_fields = lru_cache(maxsize=cache_size)(self._compute_fields)

    def __getstate__(self):
        d = self.__dict__.copy()
        d.pop("_cached_fields")
        return d

    def __setstate__(self, d):
        self.__dict__.update(d)
        self._cached_fields = lru_cache(maxsize=64)(self._compute_fields)

    def coefficients_at(self, t: float) -> np.ndarray:
        return self._a0 * np.exp(-1j * self._rate * (t - self._t0))

    def _compute_fields(self, t: float) -> NodeFields:
        return _fields_from_coefficients(self.coefficients_at(t), self._kappa)

    def fields(self, t: float) -> NodeFields:
        return self._cached_fields(float(t))

    def state_at(self, t: float) -> WaveState:
        amps = sfft.dst(self.coefficients_at(t), type=1, norm="ortho")
        return WaveState(amps, float(t), self.params, self.grid)

    def rho_floor(self, fields: NodeFields) -> float:
        return rho_floor(self.params, fields)

    def check_horizon(self, t_max: float, n_checks: int = 64) -> None:
        """Raise DomainTooSmall if the far wall is reached before ``t_max``."""
        for t in np.linspace(self._t0, t_max, n_checks):
            _check_far_wall(self.state_at(t))


def _check_far_wall(state: WaveState) -> None:
    m = state.far_wall_mass()
    if m > FAR_WALL_MASS:
        raise DomainTooSmall(f"mass {m:.3g} near z_max at t={state.time:.4g}; enlarge z_max")


def evolve_to(state: WaveState, t: float) -> WaveState:
    """Propagate ``state`` to absolute time ``t`` with the exact sine-basis propagator."""
    out = HalfLinePropagator(state).state_at(t)
    _check_far_wall(out)
    return out


def rho_floor(params: PhysicalParams, fields: NodeFields) -> float:
    """Node floor: a fixed fraction of the current peak density."""
    peak = transverse_density(params, 0.0, 0.0) * np.max(np.abs(fields.f) ** 2)
    return RHO_FLOOR_REL * float(peak)


class DensityTerms(NamedTuple):
    rho: np.ndarray
    grad_log_rho: np.ndarray  # (M, 3)
    conv_velocity_z: np.ndarray
    singular: np.ndarray  # rho below the node floor


def density_terms(fields: NodeFields, grid: LongitudinalGrid, params: PhysicalParams,
                  pos: np.ndarray, rho_floor: float) -> DensityTerms:
    """Vectorized density, log-density gradient and convective z-velocity.

    ``pos`` has shape ``(M, 3)``.  Points with density below ``rho_floor`` are
    flagged in ``singular``; their other entries are not meaningful.
    """
    x, y, z = pos[:, 0], pos[:, 1], pos[:, 2]
    f, fz = interpolate(fields, grid, z)
    a2 = f.real * f.real + f.imag * f.imag
    rho = transverse_density(params, x, y) * a2
    singular = ~(rho >= rho_floor)
    safe = np.where(singular, 1.0, a2)
    cross = np.conj(f) * fz
    c = -2.0 * params.mass * params.omega / params.hbar
    grad = np.empty((pos.shape[0], 3))
    grad[:, 0] = c * x
    grad[:, 1] = c * y
    grad[:, 2] = 2.0 * cross.real / safe
    conv = (params.hbar / params.mass) * cross.imag / safe
    return DensityTerms(rho, grad, conv, singular)


def rho_and_grad(state: WaveState, x: float, y: float, z: float):
    """Density, its gradient and the convective z-velocity at one point.

    Returns ``(rho, grad_rho, conv_velocity_z)``; the transverse convective
    velocity vanishes identically because ``chi0`` is real.
    """
    if not 0.0 <= z <= state.grid.wall:
        raise ValueError("z outside the grid")
    fields = state.fields
    floor = rho_floor(state.params, fields)
    terms = density_terms(fields, state.grid, state.params, np.array([[x, y, z]], dtype=float), floor)
    if terms.singular[0]:
        raise NodeSingularity(f"rho={terms.rho[0]:.3g} below floor {floor:.3g} at z={z}")
    rho = float(terms.rho[0])
    return rho, rho * terms.grad_log_rho[0], float(terms.conv_velocity_z[0])


@dataclass(frozen=True)
class FluxReport:
    min_flux: float
    min_location: tuple[float, float, float]  # (t, x, y)
    negative_fraction: float
    values: np.ndarray  # (n_times, n_xy)


def flux_on_plane(state: WaveState, n_dir: SpinDirection, lam: float, t_samples, xy_samples,
                  ) -> FluxReport:
    """z-component of the probability current on the plane ``z = L``.

    The current is ``rho`` times the guidance velocity; for the product state
    its spin part is ``(lam hbar / 2m) (grad rho x n)``.
    """
    p = state.params
    prop = HalfLinePropagator(state)
    xy = np.atleast_2d(np.asarray(xy_samples, dtype=float))
    ts = np.atleast_1d(np.asarray(t_samples, dtype=float))
    L = p.detector_plane_L
    nx, ny, _ = n_dir.n
    chi2 = transverse_density(p, xy[:, 0], xy[:, 1])
    c = -2.0 * p.mass * p.omega / p.hbar
    values = np.empty((ts.size, xy.shape[0]))
    for i, t in enumerate(ts):
        f, fz = interpolate(prop.fields(t), state.grid, np.array([L]))
        a2 = float(np.abs(f[0]) ** 2)
        j_conv = (p.hbar / p.mass) * float(np.imag(np.conj(f[0]) * fz[0])) * chi2
        values[i] = j_conv
        if lam != 0.0:
            drho_dx = c * xy[:, 0] * chi2 * a2
            drho_dy = c * xy[:, 1] * chi2 * a2
            values[i] += lam * p.hbar / (2 * p.mass) * (drho_dx * ny - drho_dy * nx)
    k = np.unravel_index(np.argmin(values), values.shape)
    return FluxReport(float(values[k]), (float(ts[k[0]]), float(xy[k[1], 0]), float(xy[k[1], 1])),
                      float(np.mean(values < 0)), values)


def write_snapshot_csv(states, path) -> None:
    """Write ``t, z, Re f, Im f`` rows for each state on its grid nodes."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "z", "re_f", "im_f"])
        for s in states:
            for z, v in zip(s.grid.nodes, s.amplitudes):
                w.writerow([repr(s.time), repr(float(z)), repr(float(v.real)), repr(float(v.imag))])


def read_snapshot_csv(path, params: PhysicalParams, grid: LongitudinalGrid) -> list[WaveState]:
    rows: dict[float, list] = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(float(r["t"]), []).append(complex(float(r["re_f"]), float(r["im_f"])))
    return [WaveState(np.array(v), t, params, grid) for t, v in rows.items()]
