"""Finite-dimensional measurement experiments: a system coupled to an
apparatus by a unitary, read out by a calibration of the composite basis.

Every such experiment is governed by a POVM on the system,
``E(label) = <Phi0| U^dag P(label) U |Phi0>``, and its outcome statistics
are ``<psi| E(label) |psi>``.  Composite basis index is
``s * d_app + a`` (system index major).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .core import PAULI, SpinDirection, spinor_from_direction
from .errors import NonUnitary, NotDecoupled

UNITARY_TOL = 1e-10
NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteExperiment:
    d_sys: int
    d_app: int
    U: np.ndarray
    ready_state: np.ndarray
    calibration: tuple

    def __post_init__(self):
        dim = self.d_sys * self.d_app
        U = np.asarray(self.U, dtype=complex)
        phi = np.asarray(self.ready_state, dtype=complex)
        if self.d_sys < 1 or self.d_app < 1:
            raise ValueError("dimensions must be positive")
        if U.shape != (dim, dim):
            raise ValueError(f"U must be {dim}x{dim}")
        if np.max(np.abs(U.conj().T @ U - np.eye(dim))) > UNITARY_TOL:
            raise NonUnitary("U^dag U differs from the identity")
        if phi.shape != (self.d_app,) or abs(np.linalg.norm(phi) - 1.0) > NORM_TOL:
            raise ValueError("ready state must be a normalized apparatus vector")
        if len(self.calibration) != dim:
            raise ValueError("calibration must label every composite basis index")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "ready_state", phi)
        object.__setattr__(self, "calibration", tuple(self.calibration))

    @property
    def labels(self) -> list:
        """Outcome labels in order of first appearance."""
        return list(dict.fromkeys(self.calibration))


@dataclass(frozen=True, eq=False)
class ExtractedPOVM:
    labels: list
    effects: list

    def probability(self, psi) -> dict:
        psi = np.asarray(psi, dtype=complex)
        return {lab: float(np.real(psi.conj() @ E @ psi)) for lab, E in zip(self.labels, self.effects)}

    def check(self, tol: float = UNITARY_TOL) -> None:
        d = self.effects[0].shape[0]
        if np.max(np.abs(sum(self.effects) - np.eye(d))) > tol:
            raise ValueError("effects do not sum to the identity")
        for E in self.effects:
            if np.max(np.abs(E - E.conj().T)) > tol or np.linalg.eigvalsh(E).min() < -tol:
                raise ValueError("effect is not positive semidefinite")


def _isometry(exp: FiniteExperiment) -> np.ndarray:
    """``W = U (I (x) Phi0)``, mapping system states to composite states."""
    embed = np.kron(np.eye(exp.d_sys), exp.ready_state.reshape(-1, 1))
    return exp.U @ embed


def extract_povm(exp: FiniteExperiment) -> ExtractedPOVM:
    W = _isometry(exp)
    cal = np.array(exp.calibration, dtype=object)
    effects = []
    for lab in exp.labels:
        rows = W[cal == lab]
        effects.append(rows.conj().T @ rows)
    return ExtractedPOVM(exp.labels, effects)


def born_outcome_dist(exp: FiniteExperiment, psi) -> dict:
    """Outcome distribution from evolving ``psi (x) Phi0`` and reading the calibration."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (exp.d_sys,) or abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise ValueError("psi must be a normalized system vector")
    amp = exp.U @ np.kron(psi, exp.ready_state)
    prob = np.abs(amp) ** 2
    out = dict.fromkeys(exp.labels, 0.0)
    for idx, lab in enumerate(exp.calibration):
        out[lab] += float(prob[idx])
    return out


def is_spin_decoupled(exp: FiniteExperiment, tol: float = UNITARY_TOL) -> bool:
    """True when U commutes with ``sigma_a (x) I`` for a = x, y, z (spin is the leading factor)."""
    if exp.d_sys % 2:
        return False
    rest = exp.d_sys // 2 * exp.d_app
    for s in PAULI:
        S = np.kron(s, np.eye(rest))
        if np.max(np.abs(exp.U @ S - S @ exp.U)) > tol:
            return False
    return True


def decoupling_check(exp: FiniteExperiment, n_list, phi=None) -> float:
    """Largest pairwise TV between outcome distributions for ``|n> (x) phi`` over ``n_list``.

    Raises NotDecoupled unless the interaction acts trivially on the spin.
    """
    if not is_spin_decoupled(exp):
        raise NotDecoupled("U does not commute with the spin Pauli matrices")
    d_rest = exp.d_sys // 2
    phi = np.eye(d_rest, dtype=complex)[0] if phi is None else np.asarray(phi, dtype=complex)
    dists = []
    for n in n_list:
        chi = spinor_from_direction(n).vector
        d = born_outcome_dist(exp, np.kron(chi, phi))
        dists.append(np.array([d[lab] for lab in exp.labels]))
    worst = 0.0
    for a, b in itertools.combinations(dists, 2):
        worst = max(worst, 0.5 * float(np.abs(a - b).sum()))
    return worst


# --- builders ----------------------------------------------------------------------

def controlled_flip() -> FiniteExperiment:
    """Two-level system flips a two-level pointer; calibration reads the pointer."""
    U = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    return FiniteExperiment(2, 2, U, np.array([1, 0]), (0, 1, 0, 1))


def _random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(dim, random_state=rng)


def random_experiment(rng: np.random.Generator, d_sys: int, d_app: int, n_labels: int) -> FiniteExperiment:
    dim = d_sys * d_app
    U = _random_unitary(rng, dim)
    phi = rng.standard_normal(d_app) + 1j * rng.standard_normal(d_app)
    cal = tuple(int(c) for c in rng.integers(0, n_labels, size=dim))
    return FiniteExperiment(d_sys, d_app, U, phi / np.linalg.norm(phi), cal)


def decoupled_experiment(rng: np.random.Generator, d_rest: int, d_app: int, n_labels: int) -> FiniteExperiment:
    """Experiment whose interaction is ``I_2 (x) U~`` and whose calibration ignores the spin."""
    inner = _random_unitary(rng, d_rest * d_app)
    U = np.kron(np.eye(2), inner)
    phi = rng.standard_normal(d_app) + 1j * rng.standard_normal(d_app)
    inner_cal = rng.integers(0, n_labels, size=d_rest * d_app)
    cal = tuple(int(c) for c in np.concatenate([inner_cal, inner_cal]))
    return FiniteExperiment(2 * d_rest, d_app, U, phi / np.linalg.norm(phi), cal)


# --- experiment files --------------------------------------------------------------

def save_experiment(exp: FiniteExperiment, path) -> None:
    """Plain-text experiment file: dimensions, ready state, U row-major as re/im pairs, calibration."""
    lines = ["[dimensions]", f"d_sys = {exp.d_sys}", f"d_app = {exp.d_app}", "", "[ready_state]"]
    lines += [_pair(c) for c in exp.ready_state]
    lines += ["", "[unitary]"]
    for row in exp.U:
        lines.append(" ".join(_pair(c) for c in row))
    lines += ["", "[calibration]"]
    lines += [f"{i} {lab}" for i, lab in enumerate(exp.calibration)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _pair(c) -> str:
    return f"{float(c.real)!r} {float(c.imag)!r}"


def load_experiment(path) -> FiniteExperiment:
    sections: dict[str, list[str]] = {}
    current = None
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                sections[current] = []
            elif current is None:
                raise ValueError(f"content outside a section: {line!r}")
            else:
                sections[current].append(line)
    for name in ("dimensions", "ready_state", "unitary", "calibration"):
        if name not in sections:
            raise ValueError(f"missing section [{name}]")
    dims = dict(tuple(p.strip() for p in ln.split("=", 1)) for ln in sections["dimensions"])
    d_sys, d_app = int(dims["d_sys"]), int(dims["d_app"])

    def cplx(tokens):
        vals = [float(t) for t in tokens]
        if len(vals) % 2:
            raise ValueError("complex entries need re/im pairs")
        return np.array(vals[0::2]) + 1j * np.array(vals[1::2])

    phi = np.concatenate([cplx(ln.split()) for ln in sections["ready_state"]])
    U = np.array([cplx(ln.split()) for ln in sections["unitary"]])
    cal = {}
    for ln in sections["calibration"]:
        idx, lab = ln.split(None, 1)
        cal[int(idx)] = _label(lab)
    dim = d_sys * d_app
    if sorted(cal) != list(range(dim)):
        raise ValueError("calibration must label every composite basis index exactly once")
    return FiniteExperiment(d_sys, d_app, U, phi, tuple(cal[i] for i in range(dim)))


def _label(text: str):
    try:
        return int(text)
    except ValueError:
        return text.strip()


def spin_directions_sample(rng: np.random.Generator, n: int) -> list[SpinDirection]:
    v = rng.standard_normal((n, 3))
    return [SpinDirection.from_vector(x) for x in v]
