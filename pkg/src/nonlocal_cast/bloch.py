"""Two-qubit states in Bloch canonical form, density operators and registers.

A two-qubit state is stored as ``{x, y, T}``::

    rho = 1/4 [I + sum_i x_i s_i (x) I + sum_i y_i I (x) s_i + sum_ij t_ij s_i (x) s_j]

Conversions to and from 4x4 density matrices, physical-state validation,
partial traces over labelled subsystems and the purification sampler used
by every randomized check live here.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

HARD_PSD_TOL = 1e-10
SIM_PSD_TOL = 1e-9

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
_I2 = np.eye(2, dtype=complex)


class StateError(ValueError):
    """Raised for unphysical or malformed state data."""


class UnphysicalStateError(StateError):
    """Well-formed state data that fails the Hermiticity, trace or PSD check."""


def pauli(i: int) -> np.ndarray:
    """Return the Pauli matrix sigma_i for i in {1, 2, 3}."""
    if i not in (1, 2, 3):
        raise ValueError(f"Pauli index must be 1, 2 or 3, got {i!r}")
    return _PAULI[i - 1].copy()


# s_i (x) I, I (x) s_i and s_i (x) s_j, built once
_LOCAL_A = np.array([np.kron(p, _I2) for p in _PAULI])
_LOCAL_B = np.array([np.kron(_I2, p) for p in _PAULI])
_CORR = np.array([[np.kron(p, q) for q in _PAULI] for p in _PAULI])
# rows: vec(I), vec(s_i (x) I), vec(I (x) s_i), vec(s_i (x) s_j); the state is basis^T c / 4
_BASIS = np.concatenate(
    [np.eye(4, dtype=complex)[None], _LOCAL_A, _LOCAL_B, _CORR.reshape(9, 4, 4)]
).reshape(16, 16)
# Tr[rho P] = vec(rho) . vec(P^T)
_TRACE_PROJ = np.concatenate([_LOCAL_A, _LOCAL_B, _CORR.reshape(9, 4, 4)]).transpose(0, 2, 1).reshape(15, 16).T


@dataclass(eq=False)
class Bloch2Q:
    """Two-qubit state as local Bloch vectors ``x``, ``y`` and correlation matrix ``T``."""

    x: np.ndarray = field(default_factory=lambda: np.zeros(3))
    y: np.ndarray = field(default_factory=lambda: np.zeros(3))
    T: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(3)
        self.y = np.asarray(self.y, dtype=float).reshape(3)
        self.T = np.asarray(self.T, dtype=float).reshape(3, 3)

    def allclose(self, other: Bloch2Q, atol: float = 1e-12) -> bool:
        return max_deviation(self, other) <= atol

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "T": self.T.tolist()}

    def __repr__(self):
        return f"Bloch2Q(x={self.x.tolist()}, y={self.y.tolist()}, T={self.T.tolist()})"


def max_deviation(a: Bloch2Q, b: Bloch2Q) -> float:
    """Max-norm distance between two sets of Bloch data."""
    return float(max(np.abs(a.x - b.x).max(), np.abs(a.y - b.y).max(), np.abs(a.T - b.T).max()))


def to_density(s: Bloch2Q) -> np.ndarray:
    coeffs = np.concatenate(([1.0], s.x, s.y, s.T.reshape(9)))
    return (coeffs @ _BASIS).reshape(4, 4) / 4


def from_density(rho: np.ndarray, check: bool = True) -> Bloch2Q:
    """Extract ``{x, y, T}`` from a 4x4 density matrix by Pauli traces.

    With ``check`` the input is validated first and :class:`StateError`
    raised if it is not a physical state.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise StateError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if check:
        verdict = validate(rho)
        if not verdict.ok:
            raise UnphysicalStateError("invalid density matrix: " + "; ".join(verdict.violations))
    c = (rho.reshape(16) @ _TRACE_PROJ).real
    return Bloch2Q(c[0:3], c[3:6], c[6:15].reshape(3, 3))


@dataclass
class Validity:
    ok: bool
    hermiticity: float
    trace_residual: float
    min_eigenvalue: float
    violations: list[str]


def validate(rho: np.ndarray, tol: float = HARD_PSD_TOL) -> Validity:
    """Check Hermiticity, unit trace and positivity of a density matrix.

    Hermiticity and trace are checked at ``min(tol, 1e-12)`` (roundoff in
    those is independent of the spectrum); the smallest eigenvalue must be
    at least ``-tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho = np.asarray(rho, dtype=complex)
    herm = float(np.abs(rho - rho.conj().T).max())
    tr = float(abs(np.trace(rho) - 1))
    # eigvalsh reads one triangle only; the Hermiticity residual is reported separately
    lam_min = float(np.linalg.eigvalsh(rho)[0])
    strict = min(tol, 1e-12)
    violations = []
    if herm > strict:
        violations.append(f"not Hermitian (residual {herm:.3g})")
    if tr > strict:
        violations.append(f"trace != 1 (residual {tr:.3g})")
    if lam_min < -tol:
        violations.append(f"negative eigenvalue {lam_min:.6g}")
    return Validity(not violations, herm, tr, lam_min, violations)


def is_physical(s: Bloch2Q, tol: float = HARD_PSD_TOL) -> bool:
    return validate(to_density(s), tol).ok


def product_state(a: np.ndarray, b: np.ndarray) -> Bloch2Q:
    """Bloch data of ``rho_A (x) rho_B`` given the two single-qubit Bloch vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return Bloch2Q(a, b, np.outer(a, b))


def qubit_density(r: Sequence[float]) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return (_I2 + np.einsum("i,iab->ab", r, np.array(_PAULI))) / 2


def qubit_bloch(rho: np.ndarray) -> np.ndarray:
    return np.array([np.trace(rho @ p).real for p in _PAULI])


# --- labelled registers --------------------------------------------------------


@dataclass(eq=False)
class MultiQState:
    """Dense state on an ordered register of labelled subsystems.

    ``data`` is either a state vector (``pure=True``) or a density operator,
    with the first label as the most significant tensor factor.
    """

    labels: tuple[str, ...]
    dims: tuple[int, ...]
    data: np.ndarray
    pure: bool = False

    def __post_init__(self):
        self.labels = tuple(str(lab) for lab in self.labels)
        self.dims = tuple(int(d) for d in self.dims)
        self.data = np.asarray(self.data, dtype=complex)
        if len(self.labels) != len(self.dims):
            raise StateError("labels and dims differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise StateError(f"duplicate labels in {self.labels}")
        total = int(np.prod(self.dims))
        expected = (total,) if self.pure else (total, total)
        if self.data.shape != expected:
            raise StateError(f"data shape {self.data.shape} does not match dims {self.dims}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def density(self) -> np.ndarray:
        if self.pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def validate(self, tol: float = SIM_PSD_TOL) -> Validity:
        rho = self.density()
        herm = float(np.abs(rho - rho.conj().T).max())
        tr = float(abs(np.trace(rho) - 1))
        lam_min = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
        violations = []
        if herm > tol:
            violations.append(f"not Hermitian (residual {herm:.3g})")
        if tr > 1e-10:
            violations.append(f"trace != 1 (residual {tr:.3g})")
        if lam_min < -tol:
            violations.append(f"negative eigenvalue {lam_min:.6g}")
        return Validity(not violations, herm, tr, lam_min, violations)

    def permute(self, order: Sequence[str]) -> MultiQState:
        """Reorder the tensor factors so that labels appear as in ``order``."""
        order = tuple(order)
        if sorted(order) != sorted(self.labels):
            raise StateError(f"{order} is not a permutation of {self.labels}")
        perm = [self.labels.index(lab) for lab in order]
        dims = tuple(self.dims[p] for p in perm)
        n = len(perm)
        if self.pure:
            data = self.data.reshape(self.dims).transpose(perm).reshape(-1)
        else:
            data = (
                self.data.reshape(self.dims + self.dims)
                .transpose(perm + [p + n for p in perm])
                .reshape(self.dim, self.dim)
            )
        return MultiQState(order, dims, data, self.pure)


def partial_trace(state: MultiQState, keep: Iterable[str]) -> MultiQState:
    """Trace out every subsystem not in ``keep``.

    The kept subsystems stay in their original register order; the result is
    always a density operator.
    """
    keep = set(str(k) for k in keep)
    if not keep:
        raise StateError("keep set is empty")
    unknown = keep - set(state.labels)
    if unknown:
        raise StateError(f"unknown labels {sorted(unknown)}; register has {state.labels}")
    n = len(state.labels)
    kept_idx = [i for i, lab in enumerate(state.labels) if lab in keep]
    dims_k = tuple(state.dims[i] for i in kept_idx)
    letters = string.ascii_letters
    if state.pure:
        psi = state.data.reshape(state.dims)
        ket = [letters[i] for i in range(n)]
        bra = [letters[n + i] if i in kept_idx else letters[i] for i in range(n)]
        out = "".join(letters[i] for i in kept_idx) + "".join(letters[n + i] for i in kept_idx)
        red = np.einsum(f"{''.join(ket)},{''.join(bra)}->{out}", psi, psi.conj())
    else:
        rho = state.data.reshape(state.dims + state.dims)
        row = [letters[i] for i in range(n)]
        col = [letters[n + i] if i in kept_idx else letters[i] for i in range(n)]
        out = "".join(letters[i] for i in kept_idx) + "".join(letters[n + i] for i in kept_idx)
        red = np.einsum(f"{''.join(row + col)}->{out}", rho)
    d = int(np.prod(dims_k))
    return MultiQState(tuple(state.labels[i] for i in kept_idx), dims_k, red.reshape(d, d))


def reduced_pair(state: MultiQState, first: str, second: str) -> np.ndarray:
    """4x4 density matrix of the pair ``(first, second)`` in that order."""
    red = partial_trace(state, {first, second})
    return red.permute((first, second)).data


# --- random sampling ----------------------------------------------------------


def random_densities(rng: np.random.Generator, n: int, k: int = 4) -> np.ndarray:
    """Sample ``n`` two-qubit density matrices by purification.

    A pure state on 2 (x) 2 (x) k with i.i.d. standard-normal real and
    imaginary parts is normalized and the k-dimensional ancilla traced out.
    Returns an array of shape ``(n, 4, 4)``.
    """
    if k < 1:
        raise ValueError("ancilla dimension must be >= 1")
    z = rng.standard_normal((n, 4, k)) + 1j * rng.standard_normal((n, 4, k))
    z /= np.linalg.norm(z.reshape(n, -1), axis=1)[:, None, None]
    return z @ z.conj().transpose(0, 2, 1)


def random_density(rng: np.random.Generator, k: int = 4) -> np.ndarray:
    return random_densities(rng, 1, k)[0]


def random_state(rng: np.random.Generator, k: int = 4) -> Bloch2Q:
    return from_density(random_density(rng, k), check=False)


def bloch_arrays(rhos: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`from_density` over a stack of 4x4 matrices."""
    c = (rhos.reshape(-1, 16) @ _TRACE_PROJ).real
    return c[:, 0:3], c[:, 3:6], c[:, 6:15].reshape(-1, 3, 3)


def density_arrays(x: np.ndarray, y: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Vectorized :func:`to_density` over stacks of Bloch data."""
    n = len(x)
    c = np.concatenate([np.ones((n, 1)), x, y, np.asarray(T).reshape(n, 9)], axis=1)
    return (c @ _BASIS).reshape(n, 4, 4) / 4


def min_eigenvalues(rhos: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each matrix in a stack of Hermitian matrices."""
    return np.linalg.eigvalsh(rhos)[:, 0]


def random_pure_qubit(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return v / np.linalg.norm(v)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(3) (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# --- JSON state files ---------------------------------------------------------


def _matrix(obj, name: str, shape: tuple[int, int]) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateError(f"field {name!r} is not numeric: {exc}") from None
    if arr.shape != shape:
        raise StateError(f"field {name!r} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StateError(f"field {name!r} contains non-finite values")
    return arr


def state_from_json(doc: dict) -> Bloch2Q:
    """Parse either the ``bloch`` or the ``density`` state-file layout.

    Raises :class:`StateError` naming the offending field, or describing the
    physical-state violation.
    """
    if not isinstance(doc, dict):
        raise StateError("state file must contain a JSON object")
    if "bloch" in doc:
        b = doc["bloch"]
        if not isinstance(b, dict):
            raise StateError("field 'bloch' must be an object")
        for key in ("x", "y", "T"):
            if key not in b:
                raise StateError(f"missing field 'bloch.{key}'")
        s = Bloch2Q(
            _vector(b["x"], "bloch.x"),
            _vector(b["y"], "bloch.y"),
            _matrix(b["T"], "bloch.T", (3, 3)),
        )
        verdict = validate(to_density(s))
        if not verdict.ok:
            raise UnphysicalStateError("unphysical state: " + "; ".join(verdict.violations))
        return s
    if "density" in doc:
        d = doc["density"]
        if not isinstance(d, dict):
            raise StateError("field 'density' must be an object")
        for key in ("re", "im"):
            if key not in d:
                raise StateError(f"missing field 'density.{key}'")
        rho = _matrix(d["re"], "density.re", (4, 4)) + 1j * _matrix(d["im"], "density.im", (4, 4))
        verdict = validate(rho)
        if not verdict.ok:
            raise UnphysicalStateError("unphysical state: " + "; ".join(verdict.violations))
        return from_density(rho, check=False)
    raise StateError("state file needs a 'bloch' or 'density' field")


def _vector(obj, name: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateError(f"field {name!r} is not numeric: {exc}") from None
    if arr.shape != (3,):
        raise StateError(f"field {name!r} must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StateError(f"field {name!r} contains non-finite values")
    return arr


def state_to_json(s: Bloch2Q) -> dict:
    return {"bloch": s.to_dict()}


def density_to_json(rho: np.ndarray) -> dict:
    rho = np.asarray(rho, dtype=complex)
    return {"density": {"re": rho.real.tolist(), "im": rho.imag.tolist()}}


def load_state(path: str | Path) -> Bloch2Q:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StateError(f"malformed JSON in {path}: {exc}") from None
    return state_from_json(doc)


def save_state(s: Bloch2Q, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_json(s), fh, indent=2)
        fh.write("\n")
