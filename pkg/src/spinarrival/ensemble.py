"""Initial-position sampling, trajectory integration with first-crossing
detection at ``z = L``, and aggregation into arrival distributions.

Trajectories are integrated in fixed chunks of consecutive indices.  Within a
chunk all trajectories share one step sequence (the wave function is then
propagated once per stage time for the whole chunk); chunk boundaries are
multiples of ``chunk_size`` in absolute trajectory index, so a run gives the
same records regardless of how many workers execute the chunks.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import ArrivalDistribution, PhysicalParams, SpinDirection, TimeBinning, derive_rng
from .errors import NodeSingularity, StepLimit, TooManyAborts
from .guidance import DynamicsSpec, VelocityField
from .waveguide import (HalfLinePropagator, LongitudinalGrid, PacketConfig, WaveState,
                        default_grid, init_packet)

log = logging.getLogger(__name__)

ARRIVED, CENSORED, ABORTED_NODE, ABORTED_STEPS = 0, 1, 2, 3
STATUS_NAMES = {ARRIVED: "arrived", CENSORED: "censored",
                ABORTED_NODE: "aborted:node", ABORTED_STEPS: "aborted:step-limit"}

SAMPLE_BLOCK = 1024
NOISE_BLOCK = 128
MAX_STEPS = 10_000_000
EVENT_REL_TOL = 1e-9

# Dormand-Prince 5(4) with the free-interpolant dense output.
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423]])


@dataclass(frozen=True)
class ArrivalRecord:
    """First arrival of one trajectory; ``t_arrival`` is None when censored or aborted."""

    t_arrival: float | None
    crossing_xy: tuple[float, float] | None
    status: str = "arrived"

    @property
    def aborted(self) -> bool:
        return self.status.startswith("aborted")

    @property
    def censored(self) -> bool:
        return self.status == "censored"


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything that defines an ensemble except the spin direction."""

    params: PhysicalParams = field(default_factory=lambda: PhysicalParams(omega=8.0))
    packet: PacketConfig = field(default_factory=lambda: PacketConfig(5.0, 1.0, 1.0))
    grid: LongitudinalGrid | None = None
    n_trajectories: int = 10_000
    seed: int = 0
    t_max: float = 15.0
    tol: float = 1e-8
    dt: float | None = None
    chunk_size: int = 2500
    workers: int = 1

    @property
    def spec(self) -> DynamicsSpec:
        return DynamicsSpec.from_params(self.params)

    @property
    def resolved_grid(self) -> LongitudinalGrid:
        return self.grid or default_grid(self.params)

    @property
    def sde_dt(self) -> float:
        return self.dt if self.dt is not None else 1e-4 * self.t_max

    def initial_state(self) -> WaveState:
        return init_packet(self.packet, self.resolved_grid, self.params)


@dataclass(frozen=True, eq=False)
class EnsembleRun:
    """Arrival records of one ensemble, stored column-wise."""

    t_arrival: np.ndarray
    crossing_xy: np.ndarray
    status: np.ndarray
    seed: int
    n_dir: SpinDirection
    spec: DynamicsSpec
    config: EnsembleConfig
    start_index: int = 0

    @property
    def n_trajectories(self) -> int:
        return int(self.status.size)

    @property
    def params(self) -> PhysicalParams:
        return self.config.params

    @property
    def packet(self) -> PacketConfig:
        return self.config.packet

    @property
    def records(self) -> list[ArrivalRecord]:
        out = []
        for t, xy, s in zip(self.t_arrival, self.crossing_xy, self.status):
            if s == ARRIVED:
                out.append(ArrivalRecord(float(t), (float(xy[0]), float(xy[1])), "arrived"))
            else:
                out.append(ArrivalRecord(None, None, STATUS_NAMES[int(s)]))
        return out

    @property
    def aborted_fraction(self) -> float:
        return float(np.mean(self.status >= ABORTED_NODE))

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.status == CENSORED))

    def label(self) -> dict:
        return {"direction": self.n_dir.short_label(), "alpha": self.n_dir.alpha,
                "beta": self.n_dir.beta, "lambda": self.spec.lam,
                "nu": self.spec.diffusion_nu, "seed": self.seed}


def merge_runs(first: EnsembleRun, second: EnsembleRun) -> EnsembleRun:
    """Concatenate two runs over adjacent index ranges of the same ensemble."""
    if first.start_index + first.n_trajectories != second.start_index:
        raise ValueError("runs are not adjacent")
    if (first.seed, first.spec, first.n_dir) != (second.seed, second.spec, second.n_dir):
        raise ValueError("runs belong to different ensembles")
    return replace(first,
                   t_arrival=np.concatenate([first.t_arrival, second.t_arrival]),
                   crossing_xy=np.concatenate([first.crossing_xy, second.crossing_xy]),
                   status=np.concatenate([first.status, second.status]))


# --- sampling ---------------------------------------------------------------

def longitudinal_cdf(state: WaveState):
    """Nodes (walls included) and the cumulative of ``|f|^2 dz`` on them."""
    z = state.grid.extended_nodes
    dens = np.abs(state.fields.f) ** 2
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * state.grid.dz)])
    return z, cdf / cdf[-1]


def sample_initial(n: int, seed: int, state0: WaveState, start: int = 0) -> np.ndarray:
    """Draw ``n`` positions from ``|psi_0|^2`` for trajectory indices ``start..start+n-1``.

    Transverse coordinates are exact Gaussian draws; ``z`` is drawn by inverse
    CDF with linear interpolation between nodes.  Position ``i`` depends only
    on ``(seed, i)``.
    """
    z_nodes, cdf = longitudinal_cdf(state0)
    sd = math.sqrt(state0.params.transverse_variance)
    out = np.empty((n, 3))
    first_block, last_block = start // SAMPLE_BLOCK, (start + n - 1) // SAMPLE_BLOCK
    for b in range(first_block, last_block + 1):
        rng = derive_rng(seed, 0, b)
        xy = rng.standard_normal((SAMPLE_BLOCK, 2)) * sd
        u = rng.random(SAMPLE_BLOCK)
        lo, hi = max(start, b * SAMPLE_BLOCK), min(start + n, (b + 1) * SAMPLE_BLOCK)
        sl = slice(lo - b * SAMPLE_BLOCK, hi - b * SAMPLE_BLOCK)
        out[lo - start:hi - start, :2] = xy[sl]
        out[lo - start:hi - start, 2] = np.interp(u[sl], cdf, z_nodes)
    return out


# --- deterministic integration -----------------------------------------------

def _dense(y_old, K, h, theta):
    """Dense-output positions at fractions ``theta`` (per row) of the step."""
    Q = np.einsum("sij,sk->ijk", K, _P)  # (M, 3, 4)
    powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=-1)  # (M, 4)
    return y_old + h * np.einsum("ijk,ik->ij", Q, powers)


def _rk_step(field: VelocityField, t, y, k1, h):
    K = [k1]
    singular = np.zeros(y.shape[0], dtype=bool)
    for i in range(1, 6):
        yi = y + h * sum(a * k for a, k in zip(_A[i], K))
        ki, si = field(t + _C[i] * h, yi)
        K.append(ki)
        singular |= si
    y_new = y + h * sum(b * k for b, k in zip(_B, K) if b != 0)
    k7, s7 = field(t + h, y_new)
    K.append(k7)
    singular |= s7
    err = np.max(np.abs(h * sum(e * k for e, k in zip(_E, K) if e != 0)), axis=1)
    return y_new, np.stack(K), err, singular


def _initial_step(field, t, y, k1, t_span):
    speed = max(float(np.max(np.abs(k1))) if k1.size else 0.0, 1e-12)
    return min(0.01 * t_span, 0.05 / speed)


def _locate_crossings(y_old, K, h, L):
    """Fraction of the step at which each trajectory first reaches ``z = L``.

    Returns NaN for trajectories that stay below ``L``.  The dense output is
    scanned at a few interior points so a cross-and-return inside one step is
    still caught, then the bracket is bisected.
    """
    m = y_old.shape[0]
    thetas = np.array([0.25, 0.5, 0.75, 1.0])
    Q = np.einsum("sij,sk->ijk", K, _P)
    hit = np.full(m, np.nan)
    lo = np.zeros(m)
    hi = np.full(m, np.nan)
    prev = np.zeros(m)
    for th in thetas:
        powers = np.array([th, th ** 2, th ** 3, th ** 4])
        z = y_old[:, 2] + h * (Q[:, 2, :] @ powers)
        new = np.isnan(hi) & (z >= L)
        hi[new] = th
        lo[new] = prev[new]
        prev = np.where(np.isnan(hi), th, prev)
    idx = np.flatnonzero(~np.isnan(hi))
    if idx.size == 0:
        return hit
    a, b = lo[idx], hi[idx]
    Qz = Q[idx, 2, :]
    z0 = y_old[idx, 2]
    tol_z = EVENT_REL_TOL * L
    for _ in range(200):
        mid = 0.5 * (a + b)
        zm = z0 + h * np.einsum("ik,ik->i", Qz, np.stack([mid, mid ** 2, mid ** 3, mid ** 4], -1))
        above = zm >= L
        b = np.where(above, mid, b)
        a = np.where(above, a, mid)
        zb = z0 + h * np.einsum("ik,ik->i", Qz, np.stack([b, b ** 2, b ** 3, b ** 4], -1))
        if np.all((np.abs(zb - L) < tol_z) | (b - a < 1e-15)):
            break
    hit[idx] = b
    return hit


def integrate_batch(field: VelocityField, x0: np.ndarray, t_max: float, L: float | None,
                    tol: float = 1e-8, max_steps: int = MAX_STEPS):
    """Integrate many trajectories in lockstep with an adaptive DP5(4) pair.

    With ``L`` given, each trajectory stops at its first crossing of
    ``z = L``; with ``L = None`` all are carried to ``t_max``.

    Returns ``(t_arrival, crossing_xy, status, final_positions, n_steps)``.
    Positions of aborted trajectories are NaN.
    """
    m = x0.shape[0]
    t_arr = np.full(m, np.nan)
    xy = np.full((m, 2), np.nan)
    status = np.full(m, CENSORED, dtype=np.int8)
    final = np.array(x0, dtype=float, copy=True)
    active = np.arange(m)
    if L is not None:
        already = x0[:, 2] >= L
        t_arr[already] = 0.0
        xy[already] = x0[already, :2]
        status[already] = ARRIVED
        active = active[~already]
    t = 0.0
    y = final[active].copy()
    k1, sing = field(t, y) if active.size else (np.zeros((0, 3)), np.zeros(0, bool))
    if sing.any():
        status[active[sing]] = ABORTED_NODE
        final[active[sing]] = np.nan
        keep = ~sing
        active, y, k1 = active[keep], y[keep], k1[keep]
    h = _initial_step(field, t, y, k1, t_max)
    h_min = 1e-14 * max(t_max, 1.0)
    steps = 0
    while active.size and t < t_max:
        if steps >= max_steps:
            status[active] = ABORTED_STEPS
            final[active] = np.nan
            break
        h = min(h, t_max - t)
        with np.errstate(all="ignore"):
            y_new, K, err, singular = _rk_step(field, t, y, k1, h)
        steps += 1
        if singular.any():
            if h > h_min:
                h *= 0.25
                continue
            status[active[singular]] = ABORTED_NODE
            final[active[singular]] = np.nan
            keep = ~singular
            active, y, k1 = active[keep], y[keep], k1[keep]
            continue
        err_max = float(np.max(err)) if err.size else 0.0
        if not err_max <= tol:
            h *= max(0.2, 0.9 * (tol / err_max) ** 0.2) if np.isfinite(err_max) else 0.2
            continue
        keep = np.ones(active.size, dtype=bool)
        if L is not None:
            theta = _locate_crossings(y, K, h, L)
            crossed = ~np.isnan(theta)
            if crossed.any():
                c = np.flatnonzero(crossed)
                pos = _dense(y[c], K[:, c], h, theta[c])
                t_arr[active[c]] = t + theta[c] * h
                xy[active[c]] = pos[:, :2]
                final[active[c]] = pos
                status[active[c]] = ARRIVED
                keep = ~crossed
        t = t + h
        active, y, k1 = active[keep], y_new[keep], K[-1][keep]
        final[active] = y
        h *= min(5.0, 0.9 * (tol / err_max) ** 0.2) if err_max > 0 else 5.0
    return t_arr, xy, status, final, steps


def integrate_trajectory(x0, n_dir: SpinDirection, spec: DynamicsSpec,
                         state_table: HalfLinePropagator, t_max: float, tol: float = 1e-8,
                         raise_on_abort: bool = False) -> ArrivalRecord:
    """First arrival of a single deterministic trajectory started at ``x0``."""
    if spec.diffusion_nu != 0:
        raise ValueError("integrate_trajectory needs deterministic dynamics")
    field_ = VelocityField(state_table, n_dir, spec)
    L = state_table.params.detector_plane_L
    t_arr, xy, status, _, steps = integrate_batch(field_, np.asarray(x0, float).reshape(1, 3),
                                                  t_max, L, tol)
    return _record(t_arr[0], xy[0], status[0], raise_on_abort, steps)


def _record(t, xy, status, raise_on_abort, steps=None) -> ArrivalRecord:
    if status == ARRIVED:
        return ArrivalRecord(float(t), (float(xy[0]), float(xy[1])), "arrived")
    if raise_on_abort and status == ABORTED_NODE:
        raise NodeSingularity("trajectory ran into a node of the wave function")
    if raise_on_abort and status == ABORTED_STEPS:
        raise StepLimit(f"more than {steps} steps")
    return ArrivalRecord(None, None, STATUS_NAMES[int(status)])


def transport(field: VelocityField, x0: np.ndarray, t_final: float, tol: float = 1e-8) -> np.ndarray:
    """Carry positions along deterministic trajectories to ``t_final`` (no stopping)."""
    *_, final, _ = integrate_batch(field, x0, t_final, None, tol)
    return final


# --- stochastic integration ----------------------------------------------------

class _NoiseStreams:
    """Per-trajectory Gaussian increments drawn in blocks of steps."""

    def __init__(self, seed: int, indices: np.ndarray):
        self.gens = [derive_rng(seed, 1, int(i)) for i in indices]
        self.block = None
        self.offset = NOISE_BLOCK

    def next(self, alive: np.ndarray) -> np.ndarray:
        if self.offset == NOISE_BLOCK:
            self.block = np.full((len(self.gens), NOISE_BLOCK, 3), np.nan)
            for j in np.flatnonzero(alive):
                self.block[j] = self.gens[j].standard_normal((NOISE_BLOCK, 3))
            self.offset = 0
        out = self.block[:, self.offset]
        self.offset += 1
        return out


def integrate_sde_batch(field: VelocityField, x0: np.ndarray, indices: np.ndarray, seed: int,
                        t_max: float, L: float | None, dt: float):
    """Euler-Maruyama for the diffusion family with per-trajectory noise streams.

    The noise for trajectory ``i`` comes only from ``(seed, i)``.  Steps that
    land below the wall are mirrored back to ``z > 0``.  Crossings of
    ``z = L`` are timed by linear interpolation within the step.
    Returns ``(t_arrival, crossing_xy, status, final_positions)``.
    """
    nu = field.spec.diffusion_nu
    m = x0.shape[0]
    n_steps = max(1, int(math.ceil(t_max / dt - 1e-9)))
    dt = t_max / n_steps
    amp = math.sqrt(2.0 * nu * dt)
    t_arr = np.full(m, np.nan)
    xy = np.full((m, 2), np.nan)
    status = np.full(m, CENSORED, dtype=np.int8)
    y = np.array(x0, dtype=float, copy=True)
    alive = np.ones(m, dtype=bool)
    if L is not None:
        already = y[:, 2] >= L
        t_arr[already], xy[already], status[already] = 0.0, y[already, :2], ARRIVED
        alive &= ~already
    noise = _NoiseStreams(seed, indices)
    for s in range(n_steps):
        if not alive.any():
            break
        t = s * dt
        xi = noise.next(alive)
        idx = np.flatnonzero(alive)
        with np.errstate(all="ignore"):
            v, singular = field(t, y[idx])
        if singular.any():
            bad = idx[singular]
            status[bad] = ABORTED_NODE
            y[bad] = np.nan
            alive[bad] = False
            idx, v = idx[~singular], v[~singular]
        y_old = y[idx]
        y_new = y_old + v * dt + amp * xi[idx]
        y_new[:, 2] = np.abs(y_new[:, 2])
        y[idx] = y_new
        if L is not None:
            crossed = y_new[:, 2] >= L
            if crossed.any():
                c = idx[crossed]
                frac = (L - y_old[crossed, 2]) / (y_new[crossed, 2] - y_old[crossed, 2])
                t_arr[c] = t + frac * dt
                xy[c] = y_old[crossed, :2] + frac[:, None] * (y_new[crossed, :2] - y_old[crossed, :2])
                status[c] = ARRIVED
                alive[c] = False
    return t_arr, xy, status, y


def integrate_sde(x0, n_dir: SpinDirection, spec: DynamicsSpec, state_table: HalfLinePropagator,
                  t_max: float, dt: float, seed: int, index: int = 0) -> ArrivalRecord:
    """First arrival of one diffusion path; identical for identical ``(seed, index)``."""
    field_ = VelocityField(state_table, n_dir, spec)
    L = state_table.params.detector_plane_L
    t_arr, xy, status, _ = integrate_sde_batch(field_, np.asarray(x0, float).reshape(1, 3),
                                               np.array([index]), seed, t_max, L, dt)
    return _record(t_arr[0], xy[0], status[0], False)


# --- ensembles -------------------------------------------------------------------

def _run_chunk(args):
    config, state0, n_dir, lo, hi = args
    prop = HalfLinePropagator(state0)
    spec = config.spec
    field_ = VelocityField(prop, n_dir, spec)
    x0 = sample_initial(hi - lo, config.seed, state0, start=lo)
    L = config.params.detector_plane_L
    if spec.diffusion_nu == 0:
        t_arr, xy, status, _, _ = integrate_batch(field_, x0, config.t_max, L, config.tol)
    else:
        t_arr, xy, status, _ = integrate_sde_batch(field_, x0, np.arange(lo, hi), config.seed,
                                                   config.t_max, L, config.sde_dt)
    return t_arr, xy, status


def run_ensemble(config: EnsembleConfig, n_dir: SpinDirection, start: int = 0,
                 count: int | None = None, check_horizon: bool = True) -> EnsembleRun:
    """Integrate trajectories ``start .. start+count-1`` of the ensemble for ``n_dir``."""
    count = config.n_trajectories - start if count is None else count
    state0 = config.initial_state()
    if check_horizon:
        HalfLinePropagator(state0).check_horizon(config.t_max)
    cs = config.chunk_size
    bounds = []
    lo = start
    while lo < start + count:
        hi = min(start + count, (lo // cs + 1) * cs)
        bounds.append((lo, hi))
        lo = hi
    tasks = [(config, state0, n_dir, a, b) for a, b in bounds]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            parts = list(ex.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    run = EnsembleRun(np.concatenate([p[0] for p in parts]),
                      np.concatenate([p[1] for p in parts]),
                      np.concatenate([p[2] for p in parts]),
                      config.seed, n_dir, config.spec, config, start)
    log.info("ensemble %s: %d trajectories, censored %.3f, aborted %.4f",
             n_dir.short_label(), run.n_trajectories, run.censored_fraction, run.aborted_fraction)
    return run


def arrival_distribution(run: EnsembleRun, binning: TimeBinning,
                         max_aborted: float = 0.01) -> ArrivalDistribution:
    """Histogram of first-arrival times with the censored bin last.

    Aborted trajectories are excluded from the normalization; more than
    ``max_aborted`` of them raises TooManyAborts.
    """
    if run.aborted_fraction >= max_aborted and run.aborted_fraction > 0:
        raise TooManyAborts(f"{run.aborted_fraction:.2%} of trajectories aborted")
    ok = run.status <= CENSORED
    times = np.where(run.status[ok] == ARRIVED, run.t_arrival[ok], np.nan)
    counts = np.bincount(binning.assign(times), minlength=binning.n_outcomes)
    return ArrivalDistribution.from_counts(binning, counts, run.label())


def mean_arrival(run: EnsembleRun) -> tuple[float, float, float]:
    """Mean over arrived trajectories, its standard error, and the censored fraction."""
    t = run.t_arrival[run.status == ARRIVED]
    if t.size < 2:
        raise ValueError("need at least two arrivals")
    return float(t.mean()), float(t.std(ddof=1) / math.sqrt(t.size)), run.censored_fraction


def mean_vs_alpha(alphas, config: EnsembleConfig) -> list[tuple[float, float, float, float]]:
    """Mean arrival time as a function of the polar angle (azimuth 0).

    Every ensemble uses the same seed, hence the same initial positions.  An
    input angle is reduced to the polar angle ``arccos(cos alpha)`` first,
    so ``alpha`` and ``2 pi - alpha`` give the same direction and output.
    Returns ``(alpha, mean, stderr, censored_fraction)`` per input angle.
    """
    cache: dict[float, tuple] = {}
    out = []
    for a in alphas:
        polar = math.acos(max(-1.0, min(1.0, math.cos(a))))
        key = round(polar, 12)
        if key not in cache:
            cache[key] = mean_arrival(run_ensemble(config, SpinDirection.from_angles(polar, 0.0)))
        out.append((float(a), *cache[key]))
    return out


# --- export ----------------------------------------------------------------------

def write_records_csv(run: EnsembleRun, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "t_arrival", "x", "y", "status"])
        for i in range(run.n_trajectories):
            w.writerow([run.start_index + i, repr(float(run.t_arrival[i])),
                        repr(float(run.crossing_xy[i, 0])), repr(float(run.crossing_xy[i, 1])),
                        STATUS_NAMES[int(run.status[i])]])


def manifest_text(config: EnsembleConfig, directions, extra: dict | None = None) -> str:
    """Plain ``key = value`` manifest of every parameter, seed and direction."""
    lines = ["[params]"]
    lines += [f"{k} = {v!r}" for k, v in asdict(config.params).items()]
    lines += ["", "[packet]"] + [f"{k} = {v!r}" for k, v in asdict(config.packet).items()]
    g = config.resolved_grid
    lines += ["", "[grid]", f"z_max = {g.z_max!r}", f"n_points = {g.n_points!r}"]
    lines += ["", "[run]"]
    for k in ("n_trajectories", "seed", "t_max", "tol", "chunk_size", "workers"):
        lines.append(f"{k} = {getattr(config, k)!r}")
    lines.append(f"sde_dt = {config.sde_dt!r}")
    lines += ["", "[directions]"]
    lines += [f"{d.short_label()} = {d.n[0]!r}, {d.n[1]!r}, {d.n[2]!r}" for d in directions]
    if extra:
        lines += ["", "[extra]"] + [f"{k} = {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()
