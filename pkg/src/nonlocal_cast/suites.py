"""Sampling and grid suites that exercise the no-broadcasting theorems in bulk."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import criteria
from .bloch import HARD_PSD_TOL, Bloch2Q, bloch_arrays, random_densities
from .cloning import (
    BOUND_TOL,
    HYPOTHESIS_EPS,
    DEFAULT_MU_CAP,
    ClonerSpec,
    Family,
    SpecError,
    local_sd_map_arrays,
    theorem_bound_arrays,
    top_sums,
    werner,
)

THREADS_ENV = "NONLOCAL_CAST_THREADS"


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Ordered map, threaded when ``NONLOCAL_CAST_THREADS`` > 1."""
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def parse_grid(spec: str) -> list[float]:
    """Parse ``start:stop:step`` (inclusive stop) or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {spec!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise ValueError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError(f"empty grid {spec!r}")
        return [round(start + i * step, 12) for i in range(n)]
    vals = [float(v) for v in spec.split(",") if v.strip()]
    if not vals:
        raise ValueError(f"empty grid {spec!r}")
    return vals


def default_mu_grid(cap: float, step: float = 0.1) -> list[float]:
    """``step, 2 step, ...`` up to ``cap``, plus ``cap`` itself."""
    grid = []
    k = 1
    while k * step < cap - 1e-12:
        grid.append(round(k * step, 12))
        k += 1
    grid.append(cap)
    return grid


def sample_hypothesis_states(rng: np.random.Generator, count: int, criterion: str, k: int = 4,
                             batch: int = 20000) -> list[Bloch2Q]:
    """Draw states from the purification sampler until ``count`` satisfy the hypothesis.

    ``criterion`` is ``chsh`` (M > 1) or ``f3`` (F3 > 1).  States are kept in
    draw order, so the result depends only on the generator state.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = 2 if criterion == "chsh" else 3
    out: list[Bloch2Q] = []
    while len(out) < count:
        x, y, T = bloch_arrays(random_densities(rng, batch, k))
        # the top-n eigenvalue sum never exceeds |T|_F^2, so prefilter on it
        cand = np.flatnonzero(np.einsum("nij,nij->n", T, T) > 1.0 + HYPOTHESIS_EPS)
        Tc = T[cand]
        w = np.linalg.eigvalsh(Tc.transpose(0, 2, 1) @ Tc)[:, ::-1]
        ok = cand[w[:, :n].sum(axis=1) > 1.0 + HYPOTHESIS_EPS]
        for i in ok[: count - len(out)]:
            out.append(Bloch2Q(x[i], y[i], T[i]))
    return out


@dataclass
class Case:
    """One (state, mu) check.

    For the bound theorems ``pre`` / ``post`` are top-n eigenvalue sums of
    ``T^T T`` and ``post_value`` is M or F3; for the LHS theorems they are
    ``sqrt(eta_max)`` and ``post_value`` is ``|x|^2 + 2 sqrt(eta_max)``.
    """

    theorem: int
    case: int
    mu: float
    lam: float
    params: str
    pre: float
    post: float
    post_value: float
    bound: float
    passed: bool

    @property
    def margin(self) -> float:
        """Distance of ``post_value`` below ``bound``; smallest means closest to the boundary."""
        return self.bound - self.post_value


@dataclass
class SuiteResult:
    theorem: int
    description: str
    checked: int = 0
    failures: int = 0
    skipped: list[str] = field(default_factory=list)
    cases: list[Case] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.checked > 0

    def worst(self, n: int = 10) -> list[Case]:
        return sorted(self.cases, key=lambda c: (c.margin, c.case, c.mu))[:n]


def _specs(family: Family, mus: Iterable[float], mu_cap: float, result: SuiteResult) -> list[ClonerSpec]:
    specs = []
    for mu in mus:
        try:
            specs.append(ClonerSpec.from_mu(family, mu, mu_cap))
        except SpecError as exc:
            result.skipped.append(f"mu={mu:.17g}: {exc}")
    return specs


def run_bound_theorem(states: Sequence[Bloch2Q], family: Family, criterion: str, mus: Iterable[float],
                      mu_cap: float | None = None) -> SuiteResult:
    """Bound checks: every sampled state through every admissible ``mu``."""
    family = Family.parse(family)
    cap = DEFAULT_MU_CAP[family.local] if mu_cap is None else mu_cap
    theorem = {(True, "chsh"): 1, (False, "chsh"): 2, (True, "f3"): 3, (False, "f3"): 4}[(family.local, criterion)]
    what = "CHSH" if criterion == "chsh" else "3-setting steering"
    kind = "local" if family.local else "nonlocal"
    result = SuiteResult(theorem, f"{what} not broadcast by {kind} state-dependent cloner")
    specs = _specs(family, mus, cap, result)
    if not states or not specs:
        return result
    x = np.array([s.x for s in states])
    y = np.array([s.y for s in states])
    T = np.array([s.T for s in states])
    pre = top_sums(T, 2 if criterion == "chsh" else 3)
    checks = parallel_map(lambda spec: theorem_bound_arrays(x, y, T, spec, criterion, pre), specs)
    for idx in range(len(states)):
        for spec, b in zip(specs, checks):
            bound = b.cap_interval[1] if criterion == "chsh" else math.sqrt(b.cap_interval[1])
            ok = bool(b.passed[idx])
            result.checked += 1
            result.failures += not ok
            result.cases.append(Case(theorem, idx, spec.mu, spec.lam, "", float(pre[idx]), float(b.post_sum[idx]),
                                     float(b.post_value[idx]), bound, ok))
    return result


def _lhs_cases(result: SuiteResult, x: np.ndarray, T: np.ndarray, labels: Sequence[str],
               specs: Sequence[ClonerSpec]) -> None:
    """Append one case per (state, spec), state-major, evaluating the LHS criterion in bulk."""
    y = np.zeros_like(x)
    pre = np.sqrt(np.clip(np.linalg.eigvalsh(T.transpose(0, 2, 1) @ T)[:, -1], 0.0, None))
    per_spec = []
    for spec in specs:
        ox, _, oT = local_sd_map_arrays(x, y, T, spec)
        top = np.sqrt(np.clip(np.linalg.eigvalsh(oT.transpose(0, 2, 1) @ oT)[:, -1], 0.0, None))
        per_spec.append((top, np.einsum("ni,ni->n", ox, ox) + 2.0 * top))
    for idx, label in enumerate(labels):
        for spec, (top, value) in zip(specs, per_spec):
            v = float(value[idx])
            ok = v <= 1.0 + BOUND_TOL
            result.checked += 1
            result.failures += not ok
            result.cases.append(Case(result.theorem, idx, spec.mu, spec.lam, label, float(pre[idx]),
                                     float(top[idx]), v, 1.0, ok))


def run_werner_lhs(p_values: Iterable[float], mus: Iterable[float], mu_cap: float | None = None) -> SuiteResult:
    """Cloned Werner states satisfy the LHS criterion."""
    result = SuiteResult(5, "locally cloned Werner states admit an LHS model")
    specs = _specs(Family.LOCAL_SD, mus, mu_cap, result)
    ps = list(p_values)
    states = [werner(p) for p in ps]
    x = np.array([s.x for s in states]).reshape(-1, 3)
    T = np.array([s.T for s in states]).reshape(-1, 3, 3)
    _lhs_cases(result, x, T, [f"p={p:.17g}" for p in ps], specs)
    return result


def tetrahedron_grid(step: float = 0.05) -> tuple[np.ndarray, int]:
    """Physical Bell-diagonal triples on a cubic grid over [-1, 1]^3, and the number rejected.

    Physicality is decided by the Bell-weight eigenvalues
    ``(1 - c1 - c2 - c3)/4`` and its sign-flipped siblings, the same test
    :func:`bell_diagonal` applies.
    """
    if not step > 0:
        raise ValueError("grid step must be positive")
    n = int(round(2.0 / step))
    axis = np.round(-1.0 + step * np.arange(n + 1), 12)
    c = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    signs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    weights = (1.0 - c @ signs.T) / 4.0
    ok = weights.min(axis=1) >= -HARD_PSD_TOL
    return c[ok], int((~ok).sum())


def run_bell_diagonal_lhs(step: float, mus: Iterable[float], mu_cap: float | None = None) -> SuiteResult:
    """Cloned Bell-diagonal states satisfy the LHS criterion."""
    result = SuiteResult(6, "locally cloned Bell-diagonal states admit an LHS model")
    specs = _specs(Family.LOCAL_SD, mus, mu_cap, result)
    triples, rejected = tetrahedron_grid(step)
    result.extra["unphysical_skipped"] = rejected
    T = np.zeros((len(triples), 3, 3))
    T[:, [0, 1, 2], [0, 1, 2]] = triples
    labels = ["c=({:.12g},{:.12g},{:.12g})".format(*cs) for cs in triples]
    _lhs_cases(result, np.zeros((len(triples), 3)), T, labels, specs)
    return result
