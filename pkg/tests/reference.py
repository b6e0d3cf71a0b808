"""Session-wide cache of the reference ensembles shared by several test files."""
from __future__ import annotations

from dataclasses import replace
from functools import lru_cache

from spinarrival.core import PhysicalParams, SpinDirection, TimeBinning
from spinarrival.ensemble import EnsembleConfig, arrival_distribution, run_ensemble

SEED = 20240611
N_REFERENCE = 10_000
REFERENCE = EnsembleConfig(n_trajectories=N_REFERENCE, seed=SEED)
BINNING = TimeBinning(REFERENCE.t_max, 20)


def config(lam: float = 1.0, nu: float = 0.0, n: int = N_REFERENCE, **kw) -> EnsembleConfig:
    p = REFERENCE.params
    params = PhysicalParams(p.hbar, p.mass, p.omega, p.detector_plane_L, lam, nu)
    return replace(REFERENCE, params=params, n_trajectories=n, **kw)


@lru_cache(maxsize=None)
def run(n_vec: tuple, lam: float = 1.0, nu: float = 0.0, n: int = N_REFERENCE):
    return run_ensemble(config(lam, nu, n), SpinDirection.from_vector(n_vec))


def dist(n_vec: tuple, lam: float = 1.0, nu: float = 0.0, n: int = N_REFERENCE):
    return arrival_distribution(run(n_vec, lam, nu, n), BINNING)


PZ, MZ, PX, MX, PY, MY = (0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)
