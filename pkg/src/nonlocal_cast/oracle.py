"""Explicit cloning isometries and full simulation of the broadcasting protocol.

This module is the independent ground truth for the closed-form maps in
:mod:`nonlocal_cast.cloning`: it never uses those maps to produce states,
only to compare against.

An M-level cloner sends ``|i>|0>|X>`` to::

    c |i>|i> |X_ii> + d sum_{j != i} (|i>|j> + |j>|i>) |Y_ij>

and is represented as an isometry ``V`` from the input space (dimension M)
into copy (x) copy (x) machine.  The blank and initial machine states are
fixed, so they are not part of the domain.

Register labels.  Alice holds qubits 1 and 3, Bob holds 2 and 4.

* local cloning: Alice clones qubit 1 onto blank 3 with machine ``mA``, Bob
  clones qubit 2 onto blank 4 with machine ``mB``; register order
  ``(1, 3, mA, 2, 4, mB)``.
* nonlocal cloning: the pair (1, 2) is cloned onto the blank pair (3, 4)
  with machine ``m``; register order ``(1, 2, 3, 4, m)``.

Cross-lab pairs are (1, 2), (1, 4), (3, 2) [named "23"] and (3, 4);
within-lab pairs are (1, 3) and (2, 4).  Every pair is returned with
Alice's qubit first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bloch import (
    Bloch2Q,
    MultiQState,
    from_density,
    max_deviation,
    partial_trace,
    qubit_bloch,
    qubit_density,
    reduced_pair,
    to_density,
)
from .cloning import ClonerSpec, Family, apply_cloner, mu_from_lambda

ISOMETRY_TOL = 1e-10
MATCH_TOL = 1e-8
GRAM_PSD_TOL = 1e-12

PAIRS = {
    "12": ("1", "2"),
    "14": ("1", "4"),
    "23": ("3", "2"),
    "34": ("3", "4"),
    "13": ("1", "3"),
    "24": ("2", "4"),
}
CROSS_PAIRS = ("12", "14", "23", "34")
LOCAL_PAIRS = ("13", "24")


class OracleError(RuntimeError):
    pass


class GramNotRealizable(OracleError):
    """The machine-vector Gram matrix has a negative eigenvalue."""

    def __init__(self, min_eigenvalue: float, gram: GramSpec):
        self.min_eigenvalue = min_eigenvalue
        self.gram = gram
        super().__init__(
            f"Gram matrix for M={gram.M}, lambda={gram.lam:.17g}, convention={gram.convention.value} "
            f"is not PSD (eigenvalue {min_eigenvalue:.6g}); no machine vectors realize it"
        )


class IsometryError(OracleError):
    """The assembled transformation fails ``V^dagger V = I``."""


class Convention(str, Enum):
    PAPER_LITERAL = "paper_literal"
    BH_STANDARD = "bh_standard"


@dataclass
class Isometry:
    matrix: np.ndarray  # (M*M*machine_dim, M)
    M: int
    machine_dim: int
    name: str = ""

    @property
    def residual(self) -> float:
        v = self.matrix
        return float(np.abs(v.conj().T @ v - np.eye(self.M)).max())


def _machine_labels(M: int) -> list[tuple]:
    xs = [("X", i) for i in range(M)]
    ys = [("Y", i, j) for i, j in itertools.permutations(range(M), 2)]
    return xs + ys


@dataclass
class GramSpec:
    """Inner products of the machine vectors of a state-dependent cloner (``c = d = 1``).

    Vectors are ordered ``X_00 .. X_(M-1)(M-1)`` then ``Y_ij`` for ``i != j``
    lexicographically, where ``Y_ij`` accompanies input ``i``.  Common to
    both conventions: ``|X_ii|^2 = 1 - 2 (M - 1) lambda``, ``|Y_ij|^2 =
    lambda``, distinct X vectors orthogonal, distinct Y vectors orthogonal,
    ``<X_ii|Y_ij> = 0``.  The conventions differ in which cross-input
    overlaps carry ``mu / 2``:

    * ``bh_standard``: ``<X_ii|Y_ji> = mu/2`` for ``j != i``;
    * ``paper_literal``: ``<X_ii|Y_jk> = mu/2`` for every ``j != i``.

    For M = 2 the two coincide.
    """

    M: int
    lam: float
    convention: Convention = Convention.BH_STANDARD
    labels: list[tuple] = field(init=False, repr=False)
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.M not in (2, 4):
            raise ValueError(f"M must be 2 or 4, got {self.M!r}")
        self.convention = Convention(self.convention)
        self.labels = _machine_labels(self.M)
        mu = self.mu
        half = mu / 2.0
        n = len(self.labels)
        g = np.zeros((n, n))
        for a, u in enumerate(self.labels):
            g[a, a] = 1.0 - 2.0 * (self.M - 1) * self.lam if u[0] == "X" else self.lam
        for a, u in enumerate(self.labels):
            if u[0] != "X":
                continue
            i = u[1]
            for b, v in enumerate(self.labels):
                if v[0] != "Y" or v[1] == i:
                    continue
                if self.convention is Convention.BH_STANDARD and v[2] != i:
                    continue
                g[a, b] = g[b, a] = half
        self.matrix = g

    @property
    def mu(self) -> float:
        return mu_from_lambda(self.lam, self.M == 2)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    @property
    def realizable(self) -> bool:
        return self.min_eigenvalue >= -GRAM_PSD_TOL


def _assemble(M: int, c: float, d: float, X: dict, Y: dict, machine_dim: int) -> np.ndarray:
    out = np.zeros((M, M, machine_dim, M), dtype=complex)
    for i in range(M):
        out[i, i, :, i] += c * X[i]
        for j in range(M):
            if j == i:
                continue
            out[i, j, :, i] += d * Y[(i, j)]
            out[j, i, :, i] += d * Y[(i, j)]
    return out.reshape(M * M * machine_dim, M)


def build_si_isometry(M: int) -> Isometry:
    """Universal (state-independent) cloner for M levels.

    Machine space has dimension M with orthonormal basis ``e_k``; the
    machine vectors are ``X_ii = e_i`` and ``Y_ij = e_j``, so
    ``<X_ii|Y_ji> = 1`` while ``<X_ii|Y_ij> = <Y_ij|Y_ji> = <X_ii|X_jj> = 0``.
    Coefficients: ``c^2 = 2/(M+1)``, ``d^2 = 1/(2(M+1))``.
    """
    if M not in (2, 4):
        raise ValueError(f"M must be 2 or 4, got {M!r}")
    basis = np.eye(M)
    X = {i: basis[i] for i in range(M)}
    Y = {(i, j): basis[j] for i, j in itertools.permutations(range(M), 2)}
    c = np.sqrt(2.0 / (M + 1))
    d = np.sqrt(1.0 / (2.0 * (M + 1)))
    iso = Isometry(_assemble(M, c, d, X, Y, M), M, M, f"si{M}")
    if iso.residual > ISOMETRY_TOL:
        raise IsometryError(f"universal cloner for M={M} is not isometric (residual {iso.residual:.3g})")
    return iso


def build_sd_isometry(g: GramSpec) -> Isometry:
    """State-dependent cloner whose machine vectors realize the Gram matrix ``g``.

    The vectors are the rows of ``L = U sqrt(w)`` from the spectral
    decomposition ``G = U diag(w) U^T``, restricted to ``w > 1e-12``; the
    machine dimension is the Gram rank.
    """
    w, u = np.linalg.eigh(g.matrix)
    if w[0] < -GRAM_PSD_TOL:
        raise GramNotRealizable(float(w[0]), g)
    keep = w > GRAM_PSD_TOL
    rows = u[:, keep] * np.sqrt(w[keep])
    vecs = dict(zip(g.labels, rows))
    X = {lab[1]: v for lab, v in vecs.items() if lab[0] == "X"}
    Y = {(lab[1], lab[2]): v for lab, v in vecs.items() if lab[0] == "Y"}
    dm = int(keep.sum())
    iso = Isometry(_assemble(g.M, 1.0, 1.0, X, Y, dm), g.M, dm, f"sd{g.M}[{g.convention.value}]")
    if iso.residual > ISOMETRY_TOL:
        raise IsometryError(
            f"{g.convention.value} constraints for M={g.M}, lambda={g.lam:.17g} are inconsistent: "
            f"|V^dagger V - I| = {iso.residual:.3g}"
        )
    return iso


def isometry_for(spec: ClonerSpec, convention: str | Convention = Convention.BH_STANDARD) -> Isometry:
    if spec.family.state_dependent:
        return build_sd_isometry(GramSpec(spec.family.clone_dim, spec.lam, Convention(convention)))
    return build_si_isometry(spec.family.clone_dim)


# --- simulation ---------------------------------------------------------------


def run_local_broadcast(rho: np.ndarray, V: Isometry) -> MultiQState:
    """Clone each party's qubit with its own copy of the 2-level machine ``V``."""
    if V.M != 2:
        raise ValueError(f"local broadcasting needs an M=2 cloner, got M={V.M}")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"input must be 4x4, got {rho.shape}")
    W = np.kron(V.matrix, V.matrix)
    dm = V.machine_dim
    return MultiQState(("1", "3", "mA", "2", "4", "mB"), (2, 2, dm, 2, 2, dm), W @ rho @ W.conj().T)


def run_nonlocal_broadcast(rho: np.ndarray, V: Isometry) -> MultiQState:
    """Clone the shared pair as one 4-level system with the M=4 machine ``V``."""
    if V.M != 4:
        raise ValueError(f"nonlocal broadcasting needs an M=4 cloner, got M={V.M}")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"input must be 4x4, got {rho.shape}")
    W = V.matrix
    return MultiQState(("1", "2", "3", "4", "m"), (2, 2, 2, 2, V.machine_dim), W @ rho @ W.conj().T)


def simulate(rho: np.ndarray, V: Isometry) -> MultiQState:
    return run_local_broadcast(rho, V) if V.M == 2 else run_nonlocal_broadcast(rho, V)


def output_pairs(state: MultiQState) -> dict[str, Bloch2Q]:
    """Bloch data of all six two-qubit marginals, keyed by pair name."""
    return {name: from_density(reduced_pair(state, *labs), check=False) for name, labs in PAIRS.items()}


def clone_fidelities(psi: np.ndarray, V: Isometry) -> tuple[float, float]:
    """Fidelity of each copy with a pure qubit input for an M=2 cloner."""
    if V.M != 2:
        raise ValueError("clone fidelity is defined here for qubit cloners")
    psi = np.asarray(psi, dtype=complex)
    out = MultiQState(("a0", "a1", "m"), (2, 2, V.machine_dim), V.matrix @ psi, pure=True)
    fids = []
    for lab in ("a0", "a1"):
        r = partial_trace(out, {lab}).data
        fids.append(float((psi.conj() @ r @ psi).real))
    return fids[0], fids[1]


def single_clone_bloch(r: np.ndarray, V: Isometry) -> tuple[np.ndarray, np.ndarray]:
    """Bloch vectors of both copies for a single-qubit input with Bloch vector ``r``."""
    rho = qubit_density(r)
    out = MultiQState(("a0", "a1", "m"), (2, 2, V.machine_dim), V.matrix @ rho @ V.matrix.conj().T)
    return tuple(qubit_bloch(partial_trace(out, {lab}).data) for lab in ("a0", "a1"))


# --- crosscheck ---------------------------------------------------------------


def _fit_shrinks(pair: Bloch2Q, s: Bloch2Q, local: bool) -> dict:
    """Least-squares scalar shrinks: ``vec`` from the local vectors, ``corr`` from T.

    For the local form the correlation matrix scales with ``eta^2``, so
    ``corr`` is the square root of the fitted factor.
    """
    den = float(s.x @ s.x + s.y @ s.y)
    vec = float((pair.x @ s.x + pair.y @ s.y) / den) if den > 1e-12 else float("nan")
    tden = float(np.sum(s.T * s.T))
    if tden > 1e-12:
        k = float(np.sum(pair.T * s.T) / tden)
        corr = float(np.sqrt(max(k, 0.0))) if local else k
    else:
        corr = float("nan")
    return {"vec": vec, "corr": corr}


@dataclass
class CrosscheckReport:
    family: str
    convention: str
    lam: float
    mu: float
    isometry_residual: float
    trace_residual: float
    min_eigenvalue: float
    pairs: dict[str, Bloch2Q]
    deviations: dict[str, float]
    shrinks: dict[str, dict]
    matching: list[str]
    symmetry_residual: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "convention": self.convention,
            "lambda": self.lam,
            "mu": self.mu,
            "isometry_residual": self.isometry_residual,
            "trace_residual": self.trace_residual,
            "min_eigenvalue": self.min_eigenvalue,
            "deviations": self.deviations,
            "shrinks": self.shrinks,
            "matching": self.matching,
            "symmetry_residual": self.symmetry_residual,
            "pair_labels": {k: list(v) for k, v in PAIRS.items()},
        }


def crosscheck_reduced_maps(s: Bloch2Q, spec: ClonerSpec,
                            convention: str | Convention = Convention.BH_STANDARD) -> CrosscheckReport:
    """Simulate the cloner on ``s`` and compare every output pair with the closed form.

    Raises :class:`GramNotRealizable` when no machine vectors exist for a
    state-dependent spec under ``convention``.
    """
    convention = Convention(convention)
    V = isometry_for(spec, convention)
    full = simulate(to_density(s), V)
    verdict = full.validate()
    pairs = output_pairs(full)
    expected = apply_cloner(s, spec)
    deviations = {name: max_deviation(p, expected) for name, p in pairs.items()}
    local = spec.family.local
    shrinks = {name: _fit_shrinks(p, s, local) for name, p in pairs.items()}
    matching = [name for name, dev in deviations.items() if dev <= MATCH_TOL]
    symmetry = {
        "14~23": max_deviation(pairs["14"], pairs["23"]),
        "13~24": max_deviation(pairs["13"], pairs["24"]),
    }
    return CrosscheckReport(
        family=spec.family.value,
        convention=convention.value if spec.family.state_dependent else "explicit",
        lam=spec.lam,
        mu=spec.mu,
        isometry_residual=V.residual,
        trace_residual=verdict.trace_residual,
        min_eigenvalue=verdict.min_eigenvalue,
        pairs=pairs,
        deviations=deviations,
        shrinks=shrinks,
        matching=matching,
        symmetry_residual=symmetry,
    )
