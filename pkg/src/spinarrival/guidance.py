"""Guidance laws: the lambda-family of Bohmian velocity fields and the
equivariant diffusion family built on top of it.

For a product state ``|n> (x) psi`` the spin vector field is ``rho * n``, so
the curl term of the guidance equation reduces to
``(lam hbar / 2m) (grad rho x n) / rho``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PhysicalParams, SpinDirection
from .errors import NodeSingularity
from .waveguide import HalfLinePropagator, WaveState, density_terms, rho_floor


@dataclass(frozen=True)
class DynamicsSpec:
    lam: float = 1.0
    diffusion_nu: float = 0.0

    def __post_init__(self):
        if not self.diffusion_nu >= 0:
            raise ValueError("diffusion_nu must be nonnegative")

    @property
    def kind(self) -> str:
        return "deterministic" if self.diffusion_nu == 0 else "stochastic"

    @classmethod
    def from_params(cls, params: PhysicalParams) -> "DynamicsSpec":
        return cls(params.lam, params.diffusion_nu)


def _cross_with(g: np.ndarray, n) -> np.ndarray:
    nx, ny, nz = n
    out = np.empty_like(g)
    out[:, 0] = g[:, 1] * nz - g[:, 2] * ny
    out[:, 1] = g[:, 2] * nx - g[:, 0] * nz
    out[:, 2] = g[:, 0] * ny - g[:, 1] * nx
    return out


def drift_from_terms(terms, params: PhysicalParams, n, lam: float, nu: float = 0.0) -> np.ndarray:
    """Assemble the velocity (plus osmotic term when ``nu > 0``) from density terms."""
    v = np.zeros_like(terms.grad_log_rho)
    v[:, 2] = terms.conv_velocity_z
    if lam != 0.0:
        v += (lam * params.hbar / (2.0 * params.mass)) * _cross_with(terms.grad_log_rho, n)
    if nu != 0.0:
        v += nu * terms.grad_log_rho
    return v


class VelocityField:
    """Drift field ``(t, positions) -> (velocities, singular_mask)``.

    Bound to one propagator, one spin direction and one dynamics spec; pure
    and safe to share across threads.
    """

    def __init__(self, prop: HalfLinePropagator, n: SpinDirection, spec: DynamicsSpec):
        self.prop = prop
        self.n = tuple(n.n)
        self.spec = spec
        self.evaluations = 0

    def __call__(self, t: float, pos: np.ndarray):
        fields = self.prop.fields(t)
        terms = density_terms(fields, self.prop.grid, self.prop.params, pos,
                              rho_floor(self.prop.params, fields))
        self.evaluations += 1
        v = drift_from_terms(terms, self.prop.params, self.n, self.spec.lam, self.spec.diffusion_nu)
        return v, terms.singular

    def density(self, t: float, pos: np.ndarray):
        fields = self.prop.fields(t)
        return density_terms(fields, self.prop.grid, self.prop.params, pos,
                             rho_floor(self.prop.params, fields))


def _single(state: WaveState, pos, n: SpinDirection, lam: float, nu: float) -> np.ndarray:
    fields = state.fields
    floor = rho_floor(state.params, fields)
    terms = density_terms(fields, state.grid, state.params,
                          np.asarray(pos, dtype=float).reshape(1, 3), floor)
    if terms.singular[0]:
        raise NodeSingularity(f"rho={terms.rho[0]:.3g} below floor at {tuple(pos)}")
    return drift_from_terms(terms, state.params, n.n, lam, nu)[0]


def velocity(state: WaveState, pos, n: SpinDirection, lam: float) -> np.ndarray:
    """Guidance velocity at ``pos`` for the state ``|n> (x) psi``."""
    return _single(state, pos, n, lam, 0.0)


def stochastic_drift(state: WaveState, pos, n: SpinDirection, spec: DynamicsSpec) -> np.ndarray:
    """Velocity plus the osmotic term ``nu grad(rho)/rho``.

    Paired with isotropic noise of diffusivity ``nu`` (increment variance
    ``2 nu dt`` per axis) this drift keeps ``|psi|^2`` equivariant.
    """
    return _single(state, pos, n, spec.lam, spec.diffusion_nu)
