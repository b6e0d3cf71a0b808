"""The signaling protocol: Alice measures her half of a singlet along z or x,
which leaves Bob's particle in +n or -n with probability 1/2 each.  Bob only
sees arrival-time bins and tries to tell which axis Alice chose.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import ArrivalDistribution, SpinDirection, check_same_binning, derive_rng
from .errors import MissingDirection

AXES = {0: SpinDirection.plus_z(), 1: SpinDirection.plus_x()}


@dataclass(frozen=True, eq=False)
class DistributionFamily:
    """Arrival distributions indexed by spin direction, on one binning."""

    dists: dict

    def __post_init__(self):
        if not self.dists:
            raise ValueError("empty family")
        check_same_binning(*self.dists.values())

    @property
    def binning(self):
        return next(iter(self.dists.values())).binning

    def get(self, n: SpinDirection) -> ArrivalDistribution:
        for key, dist in self.dists.items():
            if key.close_to(n):
                return dist
        raise MissingDirection(n.short_label())


def bob_mixture(family: DistributionFamily, axis: SpinDirection) -> ArrivalDistribution:
    """``(P_axis + P_-axis) / 2``: what Bob sees when Alice measured along ``axis``."""
    a, b = family.get(axis), family.get(-axis)
    m = 0.5 * (a.mass + b.mass)
    return ArrivalDistribution(a.binning, m / m.sum(), None, {"axis": axis.short_label()},
                               0.5 * np.sqrt(a.stderr ** 2 + b.stderr ** 2))


def run_protocol(family: DistributionFamily, bit: int, n_rounds: int, seed: int,
                 trial: int = 0) -> np.ndarray:
    """Bin indices Bob observes over ``n_rounds`` pairs for Alice's ``bit`` (0: z, 1: x)."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be at least 1")
    axis = AXES[int(bit)]
    plus, minus = family.get(axis), family.get(-axis)
    rng = derive_rng(seed, 2, trial)
    signs = rng.integers(0, 2, size=n_rounds)
    u = rng.random(n_rounds)
    k = plus.binning.n_outcomes - 1
    cdf_plus, cdf_minus = np.cumsum(plus.mass), np.cumsum(minus.mass)
    out = np.where(signs == 0,
                   np.searchsorted(cdf_plus, u * cdf_plus[-1], side="right"),
                   np.searchsorted(cdf_minus, u * cdf_minus[-1], side="right"))
    return np.minimum(out, k)


def decode(samples, family: DistributionFamily) -> int:
    """Likelihood-ratio guess of Alice's bit; ties go to 0.

    Empty bins of either mixture are given the mass ``1 / (2 K n)`` (``K``
    regular time bins, ``n`` samples) so a single unexpected sample cannot
    force the decision.
    """
    samples = np.asarray(samples, dtype=np.int64)
    mz = bob_mixture(family, AXES[0]).mass
    mx = bob_mixture(family, AXES[1]).mass
    eps = 1.0 / (2 * family.binning.n_bins * max(samples.size, 1))
    lz = np.log(np.where(mz > 0, mz, eps))
    lx = np.log(np.where(mx > 0, mx, eps))
    counts = np.bincount(samples, minlength=mz.size)
    llr = float(counts @ (lz - lx))
    return 0 if llr >= 0 else 1


def decode_accuracy(family: DistributionFamily, n_rounds: int, trials: int,
                    seed: int) -> tuple[float, float]:
    """Fraction of trials decoded correctly, with its binomial standard error.

    Alice's bit in each trial is a fair draw from the trial's own stream.
    """
    correct = 0
    for t in range(trials):
        bit = int(derive_rng(seed, 3, t).integers(0, 2))
        correct += decode(run_protocol(family, bit, n_rounds, seed, trial=t), family) == bit
    acc = correct / trials
    return acc, math.sqrt(acc * (1 - acc) / trials)


def write_accuracy_csv(rows, path) -> None:
    """Rows of ``(n_rounds, trials, accuracy, binomial_error)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_rounds", "trials", "accuracy", "binomial_error"])
        for r in rows:
            w.writerow([int(r[0]), int(r[1]), repr(float(r[2])), repr(float(r[3]))])
