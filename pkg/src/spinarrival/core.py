"""Shared domain types: physical parameters, spin directions, spinors, time
binning and binned arrival distributions.

Units are natural (hbar = m = 1) by default; every parameter can be overridden.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import BinningMismatch

_UNIT_TOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the wave guide and the guidance law.

    ``lam`` is the coefficient of the spin (curl) term in the guidance
    equation; ``diffusion_nu`` switches on the equivariant diffusion family
    (0 means deterministic Bohmian motion).
    """

    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    detector_plane_L: float = 10.0
    lam: float = 1.0
    diffusion_nu: float = 0.0

    def __post_init__(self):
        for name in ("hbar", "mass", "omega", "detector_plane_L"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.diffusion_nu >= 0:
            raise ValueError("diffusion_nu must be nonnegative")

    @property
    def transverse_variance(self) -> float:
        """Variance of x (and of y) under |chi_0|^2."""
        return self.hbar / (2.0 * self.mass * self.omega)


@dataclass(frozen=True)
class SpinDirection:
    """Unit vector ``n`` together with its polar/azimuthal angles.

    Build instances with :meth:`from_vector` or :meth:`from_angles`; the plain
    constructor checks that the three fields agree.
    """

    n: tuple[float, float, float]
    alpha: float
    beta: float

    def __post_init__(self):
        v = np.asarray(self.n, dtype=float)
        if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
            raise ValueError(f"n must be a unit 3-vector, got {self.n!r}")
        if not (0.0 <= self.alpha <= math.pi) or not (0.0 <= self.beta < 2 * math.pi):
            raise ValueError("alpha must lie in [0, pi] and beta in [0, 2pi)")
        expected = _angles_to_vector(self.alpha, self.beta)
        if np.max(np.abs(expected - v)) > 1e-10:
            raise ValueError("angles and vector are inconsistent")

    @classmethod
    def from_vector(cls, v) -> "SpinDirection":
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if v.shape != (3,) or norm == 0:
            raise ValueError("need a nonzero 3-vector")
        v = v / norm
        alpha = math.atan2(math.hypot(v[0], v[1]), v[2])
        if math.hypot(v[0], v[1]) < 1e-15:
            beta = 0.0  # pole convention
        else:
            beta = math.atan2(v[1], v[0]) % (2 * math.pi)
            if beta >= 2 * math.pi:
                beta = 0.0
        return cls(tuple(float(c) for c in v), alpha, beta)

    @classmethod
    def from_angles(cls, alpha: float, beta: float = 0.0) -> "SpinDirection":
        """Direction with spherical angles ``(alpha, beta)``.

        Angles outside the canonical ranges are reduced to them, so e.g.
        ``alpha = 2*pi - a`` gives the direction with polar angle ``a`` and
        azimuth ``beta + pi``.
        """
        return cls.from_vector(_angles_to_vector(alpha, beta))

    @classmethod
    def plus_z(cls):
        return cls.from_vector((0.0, 0.0, 1.0))

    @classmethod
    def minus_z(cls):
        return cls.from_vector((0.0, 0.0, -1.0))

    @classmethod
    def plus_x(cls):
        return cls.from_vector((1.0, 0.0, 0.0))

    @classmethod
    def minus_x(cls):
        return cls.from_vector((-1.0, 0.0, 0.0))

    @classmethod
    def plus_y(cls):
        return cls.from_vector((0.0, 1.0, 0.0))

    @classmethod
    def minus_y(cls):
        return cls.from_vector((0.0, -1.0, 0.0))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.n)

    def __neg__(self) -> "SpinDirection":
        return SpinDirection.from_vector(-self.vector)

    def close_to(self, other: "SpinDirection", tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.vector - other.vector)) <= tol)

    def short_label(self) -> str:
        names = {(0, 0, 1): "+z", (0, 0, -1): "-z", (1, 0, 0): "+x",
                 (-1, 0, 0): "-x", (0, 1, 0): "+y", (0, -1, 0): "-y"}
        key = tuple(int(round(c)) for c in self.n)
        if key in names and self.close_to(SpinDirection.from_vector(key)):
            return names[key]
        return f"a{self.alpha:.4f}b{self.beta:.4f}"


def _angles_to_vector(alpha, beta):
    return np.array([math.sin(alpha) * math.cos(beta),
                     math.sin(alpha) * math.sin(beta),
                     math.cos(alpha)])


@dataclass(frozen=True)
class Spinor:
    up: complex
    down: complex

    def __post_init__(self):
        if abs(abs(self.up) ** 2 + abs(self.down) ** 2 - 1.0) > _UNIT_TOL:
            raise ValueError("spinor must be normalized")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.up, self.down], dtype=complex)


def spinor_from_direction(direction: SpinDirection) -> Spinor:
    """Spinor |n> = (cos(a/2), sin(a/2) e^{i b}) with zero global phase.

    The azimuthal phase sign is the one for which <n|sigma|n> = n holds with
    the standard Pauli matrices.
    """
    a, b = direction.alpha, direction.beta
    return Spinor(complex(math.cos(a / 2)), math.sin(a / 2) * complex(math.cos(b), math.sin(b)))


def direction_from_spinor(s: Spinor) -> SpinDirection:
    """Bloch vector <s|sigma|s> of a normalized spinor."""
    v = s.vector
    n = np.real(np.einsum("i,aij,j->a", v.conj(), PAULI, v))
    return SpinDirection.from_vector(n)


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *keys)``.

    Every stochastic routine draws from a stream derived this way, so results
    depend only on the base seed and the stream's index, never on how work was
    split between workers.
    """
    if seed < 0:
        raise ValueError("seeds are unsigned")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True)
class TimeBinning:
    """Uniform bins on [0, t_max) plus one trailing censored bin."""

    t_max: float
    n_bins: int

    def __post_init__(self):
        if not self.t_max > 0 or int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValueError("need t_max > 0 and a positive integer n_bins")

    @property
    def width(self) -> float:
        return self.t_max / self.n_bins

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_bins + 1)

    @property
    def midpoints(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def censored_index(self) -> int:
        return self.n_bins

    @property
    def n_outcomes(self) -> int:
        return self.n_bins + 1

    def assign(self, times) -> np.ndarray:
        """Bin index per time; NaN (no arrival) maps to the censored bin.

        An arrival exactly at ``t_max`` is counted in the last regular bin.
        """
        t = np.asarray(times, dtype=float)
        idx = np.full(t.shape, self.n_bins, dtype=np.int64)
        ok = np.isfinite(t) & (t <= self.t_max)
        idx[ok] = np.minimum((t[ok] / self.width).astype(np.int64), self.n_bins - 1)
        return idx


@dataclass(frozen=True, eq=False)
class ArrivalDistribution:
    """Binned probability of the arrival time, censored bin last.

    ``stderr`` holds per-bin Monte Carlo standard errors (zeros for exact
    distributions such as POVM predictions); ``n_samples`` is ``None`` for
    exact distributions.
    """

    binning: TimeBinning
    mass: np.ndarray
    n_samples: int | None = None
    label: dict[str, Any] = field(default_factory=dict)
    stderr: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.binning.n_outcomes,):
            raise ValueError(f"mass must have {self.binning.n_outcomes} entries, got {m.shape}")
        if np.any(m < -_UNIT_TOL) or abs(m.sum() - 1.0) > _UNIT_TOL:
            raise ValueError("mass must be a probability vector")
        object.__setattr__(self, "mass", np.clip(m, 0.0, None))
        se = np.zeros_like(m) if self.stderr is None else np.asarray(self.stderr, dtype=float)
        if se.shape != m.shape:
            raise ValueError("stderr shape mismatch")
        object.__setattr__(self, "stderr", se)

    @classmethod
    def from_counts(cls, binning: TimeBinning, counts, label=None) -> "ArrivalDistribution":
        counts = np.asarray(counts, dtype=float)
        n = counts.sum()
        if n <= 0:
            raise ValueError("no samples")
        p = counts / n
        return cls(binning, p, int(n), dict(label or {}), np.sqrt(p * (1 - p) / n))

    @property
    def censored_mass(self) -> float:
        return float(self.mass[-1])

    def first_moment(self) -> float:
        """Sum of bin midpoint times bin mass over the regular bins."""
        return float(self.binning.midpoints @ self.mass[:-1])

    def mean_time(self) -> float:
        """Mean arrival time conditioned on arriving before ``t_max``."""
        return self.first_moment() / (1.0 - self.censored_mass)


def check_same_binning(*dists) -> TimeBinning:
    first = dists[0].binning
    for d in dists[1:]:
        if d.binning != first:
            raise BinningMismatch(f"{d.binning} != {first}")
    return first


def write_distribution_csv(dist: ArrivalDistribution, path) -> None:
    """Columns ``t_lo, t_hi, mass, stderr``; the censored bin has ``t_lo = t_max, t_hi = inf``."""
    b = dist.binning
    e = b.edges
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_lo", "t_hi", "mass", "stderr"])
        for k in range(b.n_outcomes):
            lo, hi = (e[k], e[k + 1]) if k < b.n_bins else (b.t_max, math.inf)
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(dist.mass[k])),
                        repr(float(dist.stderr[k]))])


def read_distribution_csv(path, label=None) -> ArrivalDistribution:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least one regular bin and the censored bin")
    binning = TimeBinning(float(rows[-2]["t_hi"]), len(rows) - 1)
    mass = np.array([float(r["mass"]) for r in rows])
    se = np.array([float(r["stderr"]) for r in rows])
    return ArrivalDistribution(binning, mass, None, dict(label or {}), se)
