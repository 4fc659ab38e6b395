"""Bell-CHSH, steering, LHS and entanglement criteria for two-qubit states."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .bloch import Bloch2Q, UnphysicalStateError, to_density, validate

ENTANGLEMENT_TOL = 1e-12
LHS_TOL = 1e-12


def sorted_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a real symmetric / Hermitian matrix, descending.

    Ties keep the order returned by LAPACK, which makes the result
    deterministic for a given input.
    """
    w, v = np.linalg.eigh(a)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def correlation_spectrum(s: Bloch2Q) -> np.ndarray:
    """Eigenvalues of ``T^T T`` in descending order, clipped at zero."""
    w = np.linalg.eigvalsh(s.T.T @ s.T)[::-1]
    return np.clip(w, 0.0, None)


def m_value(s: Bloch2Q) -> float:
    """Sum of the two largest eigenvalues of ``T^T T``; CHSH is violated iff > 1."""
    w = correlation_spectrum(s)
    return float(w[0] + w[1])


def chsh_value(s: Bloch2Q) -> float:
    """Maximal CHSH expectation over all projective qubit measurements."""
    return 2.0 * np.sqrt(m_value(s))


def f_n_closed(s: Bloch2Q, n: int) -> float:
    """Maximum of the n-setting linear steering functional, ``sqrt`` of the top-n spectrum sum."""
    if n not in (2, 3):
        raise ValueError(f"n must be 2 or 3, got {n!r}")
    w = correlation_spectrum(s)
    return float(np.sqrt(w[:n].sum()))


@dataclass
class MeasSettings:
    """Measurement directions: ``u_hats`` on the first qubit, orthonormal ``v_hats`` on the second."""

    u_hats: np.ndarray
    v_hats: np.ndarray

    def __post_init__(self):
        self.u_hats = np.asarray(self.u_hats, dtype=float)
        self.v_hats = np.asarray(self.v_hats, dtype=float)
        n = len(self.u_hats)
        if n not in (2, 3) or self.u_hats.shape != (n, 3) or self.v_hats.shape != (n, 3):
            raise ValueError("settings need n in {2, 3} rows of 3-vectors for both parties")
        if np.abs(np.linalg.norm(self.u_hats, axis=1) - 1).max() > 1e-10:
            raise ValueError("u_hats must be unit vectors")
        if np.abs(self.v_hats @ self.v_hats.T - np.eye(n)).max() > 1e-10:
            raise ValueError("v_hats must be orthonormal")

    @property
    def n(self) -> int:
        return len(self.u_hats)


def f_n_direct(s: Bloch2Q, m: MeasSettings) -> float:
    """Evaluate the steering functional for explicit settings.

    Uses ``<(u.s) (x) (v.s)> = u^T T v``.
    """
    total = np.einsum("ia,ab,ib->", m.u_hats, s.T, m.v_hats)
    return float(abs(total) / np.sqrt(m.n))


def random_settings(rng: np.random.Generator, n: int) -> MeasSettings:
    u = rng.standard_normal((n, 3))
    u /= np.linalg.norm(u, axis=1)[:, None]
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    return MeasSettings(u, q.T[:n])


def _plane_rotation(angle: float, i: int, j: int) -> np.ndarray:
    r = np.eye(3)
    c, s = np.cos(angle), np.sin(angle)
    r[i, i] = r[j, j] = c
    r[i, j], r[j, i] = -s, s
    return r


def _frame(angles: np.ndarray) -> np.ndarray:
    a, b, c = angles
    return _plane_rotation(a, 0, 1) @ _plane_rotation(b, 1, 2) @ _plane_rotation(c, 0, 2)


class OptimizedSettings(NamedTuple):
    value: float
    settings: MeasSettings
    degenerate: bool


def optimize_f_n(s: Bloch2Q, n: int, max_sweeps: int = 200, tol: float = 1e-12) -> OptimizedSettings:
    """Construct measurement settings that maximize the n-setting steering functional.

    The second party's triad is a rotation of the right-singular basis of
    ``T``; with ``u_i = T v_i / |T v_i|`` the functional equals
    ``sum_i |T v_i| / sqrt(n)``, which is maximized by coordinate ascent over
    three plane-rotation angles.  ``degenerate`` is set when ``rank(T) < n``.
    """
    if n not in (2, 3):
        raise ValueError(f"n must be 2 or 3, got {n!r}")
    _, sv, vh = np.linalg.svd(s.T)
    basis = vh.T  # columns: right-singular vectors, descending
    degenerate = int(np.sum(sv > 1e-12)) < n

    def objective(angles):
        vs = (basis @ _frame(angles))[:, :n]
        return float(np.linalg.norm(s.T @ vs, axis=0).sum())

    # in the top-2 plane a 45 degree turn equalizes |T v_1| and |T v_2|
    angles = np.array([np.pi / 4, 0.0, 0.0]) if n == 2 else np.array([np.pi / 4, np.arctan(np.sqrt(0.5)), 0.0])
    best = objective(angles)
    grid = np.linspace(-np.pi / 2, np.pi / 2, 25)
    for sweep in range(max_sweeps):
        start = best
        for k in range(3):
            def along(t, k=k):
                trial = angles.copy()
                trial[k] = t
                return -objective(trial)

            # global scan on the first sweep only; afterwards refine locally
            offsets = grid if sweep == 0 else np.zeros(1)
            vals = [along(angles[k] + g) for g in offsets]
            g0 = angles[k] + offsets[int(np.argmin(vals))]
            res = minimize_scalar(along, bounds=(g0 - np.pi / 24, g0 + np.pi / 24), method="bounded",
                                  options={"xatol": 1e-12})
            cand = res.x if res.fun < min(vals) else g0
            value = -along(cand)
            if value > best:
                best = value
                angles[k] = cand
        if best - start < tol:
            break

    vs = (basis @ _frame(angles))[:, :n].T
    us = np.empty_like(vs)
    for i, v in enumerate(vs):
        tv = s.T @ v
        norm = np.linalg.norm(tv)
        us[i] = tv / norm if norm > 1e-15 else np.array([1.0, 0.0, 0.0])
    settings = MeasSettings(us, vs)
    return OptimizedSettings(f_n_direct(s, settings), settings, degenerate)


def lhs_unsteerable(s: Bloch2Q, tol: float = LHS_TOL) -> bool:
    """Sufficient condition for a local hidden state model: ``|x|^2 + 2 sqrt(eta_max) <= 1``.

    ``x`` is the Bloch vector of the steering party.  A ``False`` result
    says nothing about steerability.
    """
    return lhs_margin(s) <= 1.0 + tol


def lhs_margin(s: Bloch2Q) -> float:
    """Left-hand side ``|x|^2 + 2 sqrt(eta_max)`` of the LHS criterion."""
    return float(s.x @ s.x + 2.0 * np.sqrt(correlation_spectrum(s)[0]))


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Partial transpose of a two-qubit operator over the second qubit."""
    return np.asarray(rho).reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def negativity(rho: np.ndarray) -> float:
    """Sum of the magnitudes of the negative partial-transpose eigenvalues."""
    w = np.linalg.eigvalsh(partial_transpose(rho))
    return float(np.clip(-w, 0.0, None).sum())


@dataclass
class NonlocalityReport:
    m_value: float
    chsh_s: float
    f2: float
    f3: float
    bell_nonlocal: bool
    steerable3: bool
    lhs_unsteerable: bool
    negativity: float
    entangled: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in d.items()}


def report(s: Bloch2Q) -> NonlocalityReport:
    rho = to_density(s)
    verdict = validate(rho)
    if not verdict.ok:
        raise UnphysicalStateError("unphysical state: " + "; ".join(verdict.violations))
    w = correlation_spectrum(s)
    m = float(w[0] + w[1])
    f3 = float(np.sqrt(w.sum()))
    neg = negativity(rho)
    return NonlocalityReport(
        m_value=m,
        chsh_s=2.0 * np.sqrt(m),
        f2=float(np.sqrt(m)),
        f3=f3,
        bell_nonlocal=m > 1.0,
        steerable3=f3 > 1.0,
        lhs_unsteerable=lhs_unsteerable(s),
        negativity=neg,
        entangled=neg > ENTANGLEMENT_TOL,
    )
