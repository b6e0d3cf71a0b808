"""Binned spin POVMs on C^2, fitting them to direction-indexed arrival
distributions, and the diagnostics that decide whether any such POVM can
reproduce a given family.

Per bin a spin POVM is ``e0 I + e . sigma``; its prediction for the spin
state ``|n>`` is ``e0 + e . n``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .core import PAULI, ArrivalDistribution, SpinDirection, TimeBinning, check_same_binning
from .errors import DegenerateDesign, InvalidPOVM, MissingDirection

POVM_TOL = 1e-10
NOISE_MULTIPLIER = 5.0
_PROJECTION_ROUNDS = 8


@dataclass(frozen=True, eq=False)
class SpinPOVM:
    """Per-bin coefficients ``e0`` (shape ``(K,)``) and ``e_vec`` (shape ``(K, 3)``)."""

    binning: TimeBinning
    e0: np.ndarray
    e_vec: np.ndarray

    def __post_init__(self):
        e0 = np.array(self.e0, dtype=float)
        ev = np.array(self.e_vec, dtype=float)
        k = self.binning.n_outcomes
        if e0.shape != (k,) or ev.shape != (k, 3):
            raise InvalidPOVM(f"expected {k} bins, got e0 {e0.shape} and e_vec {ev.shape}")
        if np.any(e0 < -POVM_TOL):
            raise InvalidPOVM("e0 must be nonnegative")
        excess = np.linalg.norm(ev, axis=1) - e0
        if np.any(excess > POVM_TOL):
            raise InvalidPOVM(f"positivity violated in bins {np.flatnonzero(excess > POVM_TOL).tolist()}")
        if abs(e0.sum() - 1.0) > POVM_TOL or np.max(np.abs(ev.sum(axis=0))) > POVM_TOL:
            raise InvalidPOVM("POVM is not normalized (sum e0 = 1, sum e_vec = 0)")
        e0.flags.writeable = False
        ev.flags.writeable = False
        object.__setattr__(self, "e0", e0)
        object.__setattr__(self, "e_vec", ev)

    def min_eigenvalues(self) -> np.ndarray:
        return self.e0 - np.linalg.norm(self.e_vec, axis=1)

    def operator(self, k: int) -> np.ndarray:
        """The 2x2 effect of bin ``k``."""
        return self.e0[k] * np.eye(2) + np.einsum("a,aij->ij", self.e_vec[k], PAULI)

    def moments(self) -> tuple[float, np.ndarray]:
        """First moments ``(tau0, tau_vec)`` over the regular bins (bin midpoints)."""
        mid = self.binning.midpoints
        return float(mid @ self.e0[:-1]), mid @ self.e_vec[:-1]


def predict(povm: SpinPOVM, n: SpinDirection) -> ArrivalDistribution:
    """Arrival distribution the POVM assigns to the spin state ``|n>``."""
    mass = povm.e0 + povm.e_vec @ n.vector
    mass = np.clip(mass, 0.0, None)
    return ArrivalDistribution(povm.binning, mass / mass.sum(), None,
                               {"direction": n.short_label(), "source": "povm"})


def tv_distance(p: ArrivalDistribution, q: ArrivalDistribution) -> float:
    """Total variation ``1/2 sum |p_k - q_k|``."""
    check_same_binning(p, q)
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


def tv_noise(p: ArrivalDistribution, q: ArrivalDistribution) -> float:
    """Monte Carlo error scale of :func:`tv_distance`: ``1/2 sum sqrt(se_p^2 + se_q^2)``."""
    check_same_binning(p, q)
    return 0.5 * float(np.sqrt(p.stderr ** 2 + q.stderr ** 2).sum())


def _mixture(a: ArrivalDistribution, b: ArrivalDistribution, label=None) -> ArrivalDistribution:
    m = 0.5 * (a.mass + b.mass)
    se = 0.5 * np.sqrt(a.stderr ** 2 + b.stderr ** 2)
    n = None if a.n_samples is None or b.n_samples is None else a.n_samples + b.n_samples
    return ArrivalDistribution(a.binning, m / m.sum(), n, dict(label or {}), se)


def trace_pair_residual(p_plus, p_minus, q_plus, q_minus) -> float:
    """TV between ``(P+ + P-)/2`` and ``(Q+ + Q-)/2``; zero for any spin POVM."""
    check_same_binning(p_plus, p_minus, q_plus, q_minus)
    return tv_distance(_mixture(p_plus, p_minus), _mixture(q_plus, q_minus))


def trace_pair_noise(p_plus, p_minus, q_plus, q_minus) -> float:
    check_same_binning(p_plus, p_minus, q_plus, q_minus)
    return tv_noise(_mixture(p_plus, p_minus), _mixture(q_plus, q_minus))


@dataclass(frozen=True, eq=False)
class FitReport:
    """Outcome of fitting a spin POVM to distributions.

    ``povm`` is always a valid POVM (the projection of the raw fit).  Residuals
    are Euclidean norms over all (direction, bin) pairs; ``noise_floor`` is the
    root-sum-square of the inputs' per-bin standard errors, and
    ``per_bin_noise`` the same restricted to each bin's violation statistic.
    """

    povm: SpinPOVM
    residual_unconstrained: float
    residual_projected: float
    per_bin_violation: np.ndarray
    noise_floor: float
    per_bin_noise: np.ndarray
    raw_e0: np.ndarray
    raw_e_vec: np.ndarray
    kind: str = "spin"
    extra: dict = field(default_factory=dict)

    def violating_bins(self, multiplier: float = NOISE_MULTIPLIER) -> np.ndarray:
        """Bins whose positivity violation exceeds ``multiplier`` times its noise."""
        return np.flatnonzero(self.per_bin_violation < -multiplier * self.per_bin_noise)

    def worst_violation_ratio(self) -> float:
        """Largest ``-violation / noise`` over bins (positive means infeasible)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            r = -self.per_bin_violation / self.per_bin_noise
        r = np.where(self.per_bin_noise > 0, r, np.where(self.per_bin_violation < 0, np.inf, -np.inf))
        return float(np.max(r))

    def to_text(self) -> str:
        lines = [f"[fit]", f"kind = {self.kind}",
                 f"residual_unconstrained = {self.residual_unconstrained!r}",
                 f"residual_projected = {self.residual_projected!r}",
                 f"noise_floor = {self.noise_floor!r}",
                 f"violating_bins = {' '.join(map(str, self.violating_bins())) or 'none'}"]
        for k, v in self.extra.items():
            lines.append(f"{k} = {v!r}")
        lines += ["", "[bins]", "bin violation noise e0 ex ey ez"]
        for k in range(self.per_bin_violation.size):
            e = self.povm.e_vec[k]
            lines.append(f"{k} {self.per_bin_violation[k]:.6e} {self.per_bin_noise[k]:.6e} "
                         f"{self.povm.e0[k]:.6e} {e[0]:.6e} {e[1]:.6e} {e[2]:.6e}")
        return "\n".join(lines) + "\n"


def project_to_povm(binning: TimeBinning, e0, e_vec) -> SpinPOVM:
    """Map raw per-bin coefficients to a valid POVM.

    Alternates the per-bin cone projection (clamp ``e0`` at zero, shrink
    ``e_vec`` radially) with uniform renormalization, then mixes toward the
    interior point ``(1/K, 0)`` by the smallest amount that makes every bin
    positive.
    """
    k = binning.n_outcomes
    e0 = np.array(e0, dtype=float)
    ev = np.array(e_vec, dtype=float)
    for _ in range(_PROJECTION_ROUNDS):
        e0 = np.maximum(e0, 0.0)
        norm = np.linalg.norm(ev, axis=1)
        over = norm > e0
        ev[over] *= (e0[over] / norm[over])[:, None]
        e0 -= (e0.sum() - 1.0) / k
        ev -= ev.sum(axis=0) / k
    gap = np.linalg.norm(ev, axis=1) - e0
    worst = float(np.max(gap))
    if worst > 0:
        s = worst / (worst + 1.0 / k)
        e0 = (1 - s) * e0 + s / k
        ev = (1 - s) * ev
    return SpinPOVM(binning, e0, ev)


def _stack(dists) -> tuple[TimeBinning, np.ndarray, np.ndarray]:
    binning = check_same_binning(*dists)
    return binning, np.stack([d.mass for d in dists]), np.stack([d.stderr for d in dists])


def fit_spin_povm(directions, dists, attribute_null: bool = False) -> FitReport:
    """Least-squares spin POVM for a direction-indexed family.

    Solves, for all bins at once, ``min sum_j (p_jk - e0_k - e_k . n_j)^2``
    (minimum-norm solution when the directions do not span the design), then
    projects onto valid POVMs.  ``attribute_null=True`` turns a rank-deficient
    design into DegenerateDesign instead of silently using the minimum-norm fit.
    """
    directions = list(directions)
    if len(directions) != len(dists):
        raise ValueError("one distribution per direction")
    distinct = []
    for d in directions:
        if not any(d.close_to(o) for o in distinct):
            distinct.append(d)
    if len(distinct) < 2:
        raise ValueError("need at least two distinct directions")
    binning, P, SE = _stack(dists)
    design = np.column_stack([np.ones(len(directions)), np.array([d.vector for d in directions])])
    coef, _, rank, _ = np.linalg.lstsq(design, P, rcond=None)
    if rank < 4 and attribute_null:
        raise DegenerateDesign(f"directions span a rank-{rank} design; some components are unidentifiable")
    raw_e0, raw_ev = coef[0], coef[1:].T
    fitted = design @ coef
    res_u = float(np.linalg.norm(P - fitted))
    povm = project_to_povm(binning, raw_e0, raw_ev)
    proj = design @ np.vstack([povm.e0, povm.e_vec.T])
    res_p = float(np.linalg.norm(P - proj))
    per_bin_noise = np.sqrt((SE ** 2).sum(axis=0))
    return FitReport(povm, res_u, max(res_p, res_u),
                     raw_e0 - np.linalg.norm(raw_ev, axis=1),
                     float(np.sqrt((SE ** 2).sum())), per_bin_noise, raw_e0, raw_ev,
                     "spin", {"rank": int(rank), "n_directions": len(directions)})


def fit_axial(p_x: ArrivalDistribution, p_z: ArrivalDistribution) -> FitReport:
    """The unique axial POVM matching ``P_x`` and ``P_z``: ``e0 = P_x``, ``e = (P_z - P_x) z``.

    Its effect in bin ``k`` has eigenvalues ``P_z,k`` and ``2 P_x,k - P_z,k``;
    ``per_bin_violation`` is the smaller one, so a negative entry is a bin with
    ``P_z > 2 P_x``.
    """
    binning = check_same_binning(p_x, p_z)
    raw_e0 = p_x.mass.copy()
    raw_ev = np.zeros((binning.n_outcomes, 3))
    raw_ev[:, 2] = p_z.mass - p_x.mass
    povm = project_to_povm(binning, raw_e0, raw_ev)
    data = np.stack([p_x.mass, p_z.mass])
    proj = np.stack([povm.e0 + povm.e_vec[:, 0], povm.e0 + povm.e_vec[:, 2]])
    violation = np.minimum(p_z.mass, 2 * p_x.mass - p_z.mass)
    per_bin_noise = np.sqrt(4 * p_x.stderr ** 2 + p_z.stderr ** 2)
    noise = float(np.sqrt((p_x.stderr ** 2).sum() + (p_z.stderr ** 2).sum()))
    return FitReport(povm, 0.0, float(np.linalg.norm(data - proj)), violation, noise,
                     per_bin_noise, raw_e0, raw_ev, "axial")


def _lookup(p_map, n: SpinDirection):
    for key, dist in p_map.items():
        if key.close_to(n):
            return dist
    raise MissingDirection(n.short_label())


def deviation_lower_bound(p_map, fitted: SpinPOVM) -> tuple[float, float]:
    """``(max_dev, bound)`` with ``max_dev`` the worst TV between data and the
    POVM's predictions over ``+-z, +-x`` and ``bound = TV(P_x, P_z)/2``.

    When the family satisfies ``P_-n = P_n`` every spin POVM has
    ``max_dev >= bound``.
    """
    dirs = [SpinDirection.plus_z(), SpinDirection.minus_z(),
            SpinDirection.plus_x(), SpinDirection.minus_x()]
    data = [_lookup(p_map, n) for n in dirs]
    max_dev = max(tv_distance(d, predict(fitted, n)) for d, n in zip(data, dirs))
    return max_dev, 0.5 * tv_distance(data[2], data[0])


def deviation_noise(p_map) -> tuple[float, float]:
    """Monte Carlo error scales of the two sides of :func:`deviation_lower_bound`."""
    dirs = [SpinDirection.plus_z(), SpinDirection.minus_z(),
            SpinDirection.plus_x(), SpinDirection.minus_x()]
    data = [_lookup(p_map, n) for n in dirs]
    dev_noise = max(0.5 * float(d.stderr.sum()) for d in data)
    return dev_noise, 0.5 * tv_noise(data[2], data[0])


def fit_sinusoidal_mean(alphas, means, errors) -> tuple[float, float, float, int]:
    """Weighted fit of ``tau0 + tau_z cos(alpha)``; returns ``(tau0, tau_z, chi2, dof)``."""
    a = np.asarray(alphas, dtype=float)
    y = np.asarray(means, dtype=float)
    s = np.asarray(errors, dtype=float)
    if not (a.shape == y.shape == s.shape) or np.unique(a).size < 3:
        raise ValueError("need at least three distinct angles with matching means and errors")
    if np.any(s <= 0):
        raise ValueError("errors must be positive")
    c = np.cos(a)
    if np.ptp(c) < 1e-12:
        raise DegenerateDesign("all cos(alpha) are equal")
    w = 1.0 / s
    design = np.column_stack([np.ones_like(c), c]) * w[:, None]
    (tau0, tau_z), *_ = np.linalg.lstsq(design, y * w, rcond=None)
    chi2 = float(np.sum(((y - tau0 - tau_z * c) * w) ** 2))
    return float(tau0), float(tau_z), chi2, int(a.size - 2)


# --- CSV --------------------------------------------------------------------------

def write_povm_csv(povm: SpinPOVM, path) -> None:
    b = povm.binning
    edges = b.edges
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "t_lo", "t_hi", "e0", "ex", "ey", "ez"])
        for k in range(b.n_outcomes):
            lo, hi = (edges[k], edges[k + 1]) if k < b.n_bins else (b.t_max, math.inf)
            w.writerow([k, repr(float(lo)), repr(float(hi)), repr(float(povm.e0[k])),
                        *(repr(float(x)) for x in povm.e_vec[k])])


def read_povm_csv(path) -> SpinPOVM:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) < 2:
        raise InvalidPOVM("need at least one regular bin and the censored bin")
    binning = TimeBinning(float(rows[-2]["t_hi"]), len(rows) - 1)
    e0 = np.array([float(r["e0"]) for r in rows])
    ev = np.array([[float(r["ex"]), float(r["ey"]), float(r["ez"])] for r in rows])
    return SpinPOVM(binning, e0, ev)
