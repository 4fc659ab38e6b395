"""Buzek-Hillery cloner model, closed-form Bloch maps and no-broadcasting checks.

Local cloners act on each party's qubit separately (clone dimension 2);
nonlocal cloners act on the shared pair as a single 4-level system.  The
state-dependent families are parameterized by ``lambda`` with
``mu = 1 - 2 lambda`` (local) or ``mu = 1 - 4 lambda`` (nonlocal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import criteria
from .bloch import (
    SIM_PSD_TOL,
    Bloch2Q,
    StateError,
    UnphysicalStateError,
    density_arrays,
    min_eigenvalues,
    to_density,
    validate,
)

EXCLUSION_EPS = 1e-12
HYPOTHESIS_EPS = 1e-12
BOUND_TOL = 1e-12

LOCAL_SI_SHRINK = 2.0 / 3.0
NONLOCAL_SI_SHRINK = 3.0 / 5.0


class SpecError(ValueError):
    """Invalid cloner parameters."""


class HypothesisError(ValueError):
    """The input state does not satisfy a theorem's hypothesis."""


class BoundViolation(AssertionError):
    """A post-cloning quantity fell outside the proven interval."""


class Family(str, Enum):
    LOCAL_SD = "local_state_dependent"
    NONLOCAL_SD = "nonlocal_state_dependent"
    LOCAL_SI = "local_state_independent"
    NONLOCAL_SI = "nonlocal_state_independent"

    @classmethod
    def parse(cls, name: str | Family) -> Family:
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "local_sd": cls.LOCAL_SD,
            "nonlocal_sd": cls.NONLOCAL_SD,
            "local_si": cls.LOCAL_SI,
            "nonlocal_si": cls.NONLOCAL_SI,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = sorted([f.value for f in cls] + list(aliases))
            raise SpecError(f"unknown cloner family {name!r}; choose from {names}") from None

    @property
    def local(self) -> bool:
        return self in (Family.LOCAL_SD, Family.LOCAL_SI)

    @property
    def state_dependent(self) -> bool:
        return self in (Family.LOCAL_SD, Family.NONLOCAL_SD)

    @property
    def clone_dim(self) -> int:
        return 2 if self.local else 4


# Schwarz caps: |<X|Y>|^2 <= <X|X><Y|Y> with <X|Y> = mu/2
DEFAULT_MU_CAP = {True: 1.0 / math.sqrt(2.0), False: 1.0 / math.sqrt(6.0)}
_RESTRICTED = {True: 1.0 / 6.0, False: 1.0 / 10.0}
_LAMBDA_MAX = {True: 0.5, False: 0.25}


def mu_from_lambda(lam: float, local: bool) -> float:
    return 1.0 - (2.0 if local else 4.0) * lam


def lambda_from_mu(mu: float, local: bool) -> float:
    return (1.0 - mu) / (2.0 if local else 4.0)


@dataclass(frozen=True)
class ClonerSpec:
    """A cloner family with its machine parameters.

    For state-dependent families ``lam`` is required and ``mu`` is derived
    from it.  State-independent families carry the fixed coefficients and
    ignore ``mu_cap``.
    """

    family: Family
    lam: float | None = None
    mu_cap: float | None = None
    mu: float = field(init=False)

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        local = fam.local
        if not fam.state_dependent:
            fixed = _RESTRICTED[local]
            if self.lam is not None and abs(self.lam - fixed) > EXCLUSION_EPS:
                raise SpecError(f"{fam.value} has fixed lambda = {fixed:.17g}")
            object.__setattr__(self, "lam", fixed)
            object.__setattr__(self, "mu", LOCAL_SI_SHRINK if local else NONLOCAL_SI_SHRINK)
            return

        if self.lam is None:
            raise SpecError(f"{fam.value} requires lambda")
        lam = float(self.lam)
        if not math.isfinite(lam) or not 0.0 <= lam <= _LAMBDA_MAX[local]:
            raise SpecError(f"lambda must lie in [0, {_LAMBDA_MAX[local]}] for {fam.value}, got {lam}")
        restricted = _RESTRICTED[local]
        if abs(lam - restricted) <= EXCLUSION_EPS:
            label = "1/6" if local else "1/10"
            raise SpecError(f"\u03bb={label} restricted: the cloner loses its state dependence there")
        cap = DEFAULT_MU_CAP[local] if self.mu_cap is None else float(self.mu_cap)
        if not cap > 0:
            raise SpecError("mu_cap must be positive")
        mu = mu_from_lambda(lam, local)
        if mu > cap + 1e-12:
            raise SpecError(f"mu = {mu:.17g} exceeds mu_cap = {cap:.17g} (lambda >= {lambda_from_mu(cap, local):.17g} needed)")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu_cap", cap)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def from_mu(cls, family: str | Family, mu: float, mu_cap: float | None = None) -> ClonerSpec:
        fam = Family.parse(family)
        return cls(fam, lambda_from_mu(mu, fam.local), mu_cap)

    @property
    def coefficients(self) -> tuple[float, float]:
        """Squared amplitudes ``(c^2, d^2)`` of the cloning transformation."""
        if self.family.state_dependent:
            return 1.0, 1.0
        m = self.family.clone_dim
        return 2.0 / (m + 1), 1.0 / (2.0 * (m + 1))

    def to_json(self) -> dict:
        return {"family": self.family.value, "lambda": self.lam, "mu_cap": self.mu_cap}

    @classmethod
    def from_json(cls, doc: dict) -> ClonerSpec:
        if "mu" in doc:
            raise SpecError("mu is derived from lambda and cannot be given")
        try:
            return cls(doc["family"], doc.get("lambda"), doc.get("mu_cap"))
        except KeyError as exc:
            raise SpecError(f"cloner spec missing field {exc.args[0]!r}") from None


def _checked(out: Bloch2Q) -> Bloch2Q:
    verdict = validate(to_density(out), SIM_PSD_TOL)
    if not verdict.ok:
        raise UnphysicalStateError("cloned state is unphysical: " + "; ".join(verdict.violations))
    return out


def local_sd_map(s: Bloch2Q, spec: ClonerSpec) -> Bloch2Q:
    """Cross-lab output of two-sided local cloning: ``{mu x, mu y, mu^2 T}``."""
    if spec.family is not Family.LOCAL_SD:
        raise SpecError(f"local_sd_map needs a {Family.LOCAL_SD.value} spec, got {spec.family.value}")
    mu = spec.mu
    return _checked(Bloch2Q(mu * s.x, mu * s.y, mu * mu * s.T))


def nonlocal_sd_map(s: Bloch2Q, spec: ClonerSpec) -> Bloch2Q:
    """Each copy after nonlocal cloning: ``{mu x, mu y, mu T}``."""
    if spec.family is not Family.NONLOCAL_SD:
        raise SpecError(f"nonlocal_sd_map needs a {Family.NONLOCAL_SD.value} spec, got {spec.family.value}")
    mu = spec.mu
    return _checked(Bloch2Q(mu * s.x, mu * s.y, mu * s.T))


def sd_map_arrays(x: np.ndarray, y: np.ndarray, T: np.ndarray,
                  spec: ClonerSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized state-dependent map over stacks of Bloch data, with the same PSD check."""
    if not spec.family.state_dependent:
        raise SpecError(f"sd_map_arrays needs a state-dependent spec, got {spec.family.value}")
    mu = spec.mu
    corr = mu * mu if spec.family.local else mu
    out = (mu * np.asarray(x), mu * np.asarray(y), corr * np.asarray(T))
    lo = min_eigenvalues(density_arrays(*out))
    bad = np.flatnonzero(lo < -SIM_PSD_TOL)
    if bad.size:
        raise UnphysicalStateError(f"cloned state {int(bad[0])} is unphysical: min eigenvalue {lo[bad[0]]:.3e}")
    return out


def local_sd_map_arrays(x: np.ndarray, y: np.ndarray, T: np.ndarray,
                        spec: ClonerSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`local_sd_map`."""
    if spec.family is not Family.LOCAL_SD:
        raise SpecError(f"local_sd_map needs a {Family.LOCAL_SD.value} spec, got {spec.family.value}")
    return sd_map_arrays(x, y, T, spec)


def local_si_map(s: Bloch2Q) -> Bloch2Q:
    eta = LOCAL_SI_SHRINK
    return _checked(Bloch2Q(eta * s.x, eta * s.y, eta * eta * s.T))


def nonlocal_si_map(s: Bloch2Q) -> Bloch2Q:
    eta = NONLOCAL_SI_SHRINK
    return _checked(Bloch2Q(eta * s.x, eta * s.y, eta * s.T))


def apply_cloner(s: Bloch2Q, spec: ClonerSpec) -> Bloch2Q:
    """Closed-form Bloch data of the cross-lab output pair for any family."""
    return {
        Family.LOCAL_SD: lambda: local_sd_map(s, spec),
        Family.NONLOCAL_SD: lambda: nonlocal_sd_map(s, spec),
        Family.LOCAL_SI: lambda: local_si_map(s),
        Family.NONLOCAL_SI: lambda: nonlocal_si_map(s),
    }[spec.family]()


# --- named families -----------------------------------------------------------


def werner(p: float) -> Bloch2Q:
    """``p |psi+><psi+| + (1 - p) I/4``, i.e. ``T = diag(p, -p, p)``."""
    if not 0.0 <= p <= 1.0:
        raise StateError(f"Werner parameter must lie in [0, 1], got {p}")
    return Bloch2Q(np.zeros(3), np.zeros(3), np.diag([p, -p, p]))


def bell_diagonal(c1: float, c2: float, c3: float) -> Bloch2Q:
    """Bell-diagonal state with ``T = diag(c1, c2, c3)``.

    Raises :class:`StateError` outside the physical tetrahedron, reporting
    the most negative eigenvalue.
    """
    cs = np.array([c1, c2, c3], dtype=float)
    if np.any(np.abs(cs) > 1.0 + 1e-12):
        raise StateError(f"correlation coefficients must lie in [-1, 1], got {cs.tolist()}")
    s = Bloch2Q(np.zeros(3), np.zeros(3), np.diag(cs))
    verdict = validate(to_density(s))
    if not verdict.ok:
        raise UnphysicalStateError(f"({c1}, {c2}, {c3}) is outside the tetrahedron: eigenvalue {verdict.min_eigenvalue:.6g} < 0")
    return s


def singlet() -> Bloch2Q:
    return Bloch2Q(np.zeros(3), np.zeros(3), -np.eye(3))


def maximally_mixed() -> Bloch2Q:
    return Bloch2Q()


# --- theorem checks -----------------------------------------------------------

_THEOREM = {
    (True, "chsh"): 1,
    (False, "chsh"): 2,
    (True, "f3"): 3,
    (False, "f3"): 4,
}


@dataclass
class BoundReport:
    """Outcome of checking one no-broadcasting theorem on one state.

    Eigenvalue sums refer to the top two (``chsh``) or all three (``f3``)
    eigenvalues of ``T^T T``.  ``post_value`` is ``M`` or ``F3`` of the
    output, and ``interval`` / ``cap_interval`` bound ``post_sum`` for the
    spec's ``mu`` and for ``mu = mu_cap`` respectively.
    """

    theorem: int
    criterion: str
    mu: float
    mu_cap: float
    pre_sum: float
    post_sum: float
    scaling_residual: float
    interval: tuple[float, float]
    cap_interval: tuple[float, float]
    post_value: float
    at_boundary: bool
    passed: bool
    failures: list[str]

    @property
    def margin(self) -> float:
        return 1.0 - self.post_value

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "criterion": self.criterion,
            "mu": self.mu,
            "mu_cap": self.mu_cap,
            "pre_sum": self.pre_sum,
            "post_sum": self.post_sum,
            "scaling_residual": self.scaling_residual,
            "interval": list(self.interval),
            "cap_interval": list(self.cap_interval),
            "post_value": self.post_value,
            "at_boundary": self.at_boundary,
            "passed": self.passed,
            "failures": list(self.failures),
        }


def theorem_bound_check(s: Bloch2Q, spec: ClonerSpec, criterion: str, strict: bool = True) -> BoundReport:
    """Verify the no-broadcasting bound for a state-dependent cloner.

    Checks that the post-cloning eigenvalue sum equals ``mu^k`` times the
    input sum (k = 4 local, 2 nonlocal), lies in ``[mu^k, n mu^k]`` and below
    ``n mu_cap^k``, and that the output no longer violates the inequality.
    With ``strict`` a failed check raises :class:`BoundViolation`.
    """
    if criterion not in ("chsh", "f3"):
        raise ValueError(f"criterion must be 'chsh' or 'f3', got {criterion!r}")
    if not spec.family.state_dependent:
        raise SpecError("the no-broadcasting theorems concern the state-dependent cloners")
    local = spec.family.local
    n = 2 if criterion == "chsh" else 3
    pre = float(criteria.correlation_spectrum(s)[:n].sum())
    if not pre > 1.0 + HYPOTHESIS_EPS:
        what = "M" if criterion == "chsh" else "F3^2"
        raise HypothesisError(f"input {what} = {pre:.17g} does not exceed 1")

    out = apply_cloner(s, spec)
    post = float(criteria.correlation_spectrum(out)[:n].sum())
    k = 4 if local else 2
    scale = spec.mu ** k
    cap_scale = spec.mu_cap ** k
    interval = (scale, n * scale)
    cap_interval = (cap_scale, n * cap_scale)
    post_value = post if criterion == "chsh" else math.sqrt(post)
    residual = abs(post - scale * pre)

    failures = []
    if residual > BOUND_TOL:
        failures.append(f"scaling identity off by {residual:.3g}")
    if not interval[0] - BOUND_TOL <= post <= interval[1] + BOUND_TOL:
        failures.append(f"post sum {post:.17g} outside [{interval[0]:.17g}, {interval[1]:.17g}]")
    if post > cap_interval[1] + BOUND_TOL:
        failures.append(f"post sum {post:.17g} above {cap_interval[1]:.17g}")
    if post_value > 1.0 + BOUND_TOL:
        failures.append(f"output still violates: value {post_value:.17g} > 1")
    rep = BoundReport(
        theorem=_THEOREM[(local, criterion)],
        criterion=criterion,
        mu=spec.mu,
        mu_cap=spec.mu_cap,
        pre_sum=pre,
        post_sum=post,
        scaling_residual=residual,
        interval=interval,
        cap_interval=cap_interval,
        post_value=post_value,
        at_boundary=abs(post_value - 1.0) <= BOUND_TOL,
        passed=not failures,
        failures=failures,
    )
    if strict and failures:
        raise BoundViolation(f"theorem {rep.theorem}: " + "; ".join(failures))
    return rep


def top_sums(T: np.ndarray, n: int) -> np.ndarray:
    """Sum of the ``n`` largest eigenvalues of ``T^T T`` for each matrix in a stack."""
    T = np.asarray(T)
    w = np.clip(np.linalg.eigvalsh(T.transpose(0, 2, 1) @ T), 0.0, None)
    return w[:, ::-1][:, :n].sum(axis=1)


@dataclass
class BoundArrays:
    """Vectorized counterpart of :class:`BoundReport` for one spec over many states."""

    theorem: int
    criterion: str
    mu: float
    mu_cap: float
    pre_sum: np.ndarray
    post_sum: np.ndarray
    scaling_residual: np.ndarray
    interval: tuple[float, float]
    cap_interval: tuple[float, float]
    post_value: np.ndarray
    passed: np.ndarray


def theorem_bound_arrays(x: np.ndarray, y: np.ndarray, T: np.ndarray, spec: ClonerSpec, criterion: str,
                         pre_sum: np.ndarray | None = None) -> BoundArrays:
    """Apply the checks of :func:`theorem_bound_check` to a stack of states at once.

    ``pre_sum`` may be passed in to reuse the input spectrum across specs.
    Raises :class:`HypothesisError` if any input fails the hypothesis.
    """
    if criterion not in ("chsh", "f3"):
        raise ValueError(f"criterion must be 'chsh' or 'f3', got {criterion!r}")
    if not spec.family.state_dependent:
        raise SpecError("the no-broadcasting theorems concern the state-dependent cloners")
    local = spec.family.local
    n = 2 if criterion == "chsh" else 3
    pre = top_sums(T, n) if pre_sum is None else np.asarray(pre_sum)
    low = np.flatnonzero(~(pre > 1.0 + HYPOTHESIS_EPS))
    if low.size:
        raise HypothesisError(f"input {int(low[0])} has top-{n} sum {pre[low[0]]:.17g}, not above 1")
    _, _, oT = sd_map_arrays(x, y, T, spec)
    post = top_sums(oT, n)
    k = 4 if local else 2
    scale = spec.mu ** k
    cap_scale = spec.mu_cap ** k
    residual = np.abs(post - scale * pre)
    post_value = post if criterion == "chsh" else np.sqrt(post)
    passed = (
        (residual <= BOUND_TOL)
        & (post >= scale - BOUND_TOL)
        & (post <= n * scale + BOUND_TOL)
        & (post <= n * cap_scale + BOUND_TOL)
        & (post_value <= 1.0 + BOUND_TOL)
    )
    return BoundArrays(_THEOREM[(local, criterion)], criterion, spec.mu, spec.mu_cap, pre, post, residual,
                       (scale, n * scale), (cap_scale, n * cap_scale), post_value, passed)


# --- broadcasting pipeline ----------------------------------------------------

_TARGETS = {
    "chsh": lambda r: r.bell_nonlocal,
    "f3": lambda r: r.steerable3,
    "entanglement": lambda r: r.entangled,
}


@dataclass
class BroadcastOutcome:
    """Result of sending a shared state through a cloner.

    ``optimal_broadcast_achieved`` is ``None`` when the local output pairs
    were not simulated.
    """

    criterion: str
    spec: ClonerSpec
    input_report: criteria.NonlocalityReport
    nonlocal_pair_state: Bloch2Q
    nonlocal_pair_report: criteria.NonlocalityReport
    local_pair_states: tuple[Bloch2Q, Bloch2Q] | None
    local_pair_reports: tuple[criteria.NonlocalityReport, criteria.NonlocalityReport] | None
    broadcast_achieved: bool
    optimal_broadcast_achieved: bool | None
    crosscheck: object | None = None

    def to_dict(self) -> dict:
        d = {
            "criterion": self.criterion,
            "cloner": self.spec.to_json(),
            "mu": self.spec.mu,
            "input_report": self.input_report.to_dict(),
            "nonlocal_pair_state": self.nonlocal_pair_state.to_dict(),
            "nonlocal_pair_report": self.nonlocal_pair_report.to_dict(),
            "broadcast_achieved": self.broadcast_achieved,
            "optimal_broadcast_achieved": self.optimal_broadcast_achieved,
        }
        if self.local_pair_states is not None:
            d["local_pair_states"] = {"13": self.local_pair_states[0].to_dict(), "24": self.local_pair_states[1].to_dict()}
            d["local_pair_reports"] = {"13": self.local_pair_reports[0].to_dict(), "24": self.local_pair_reports[1].to_dict()}
        if self.crosscheck is not None:
            d["crosscheck"] = self.crosscheck.to_dict()
        return d


def broadcast_pipeline(s: Bloch2Q, spec: ClonerSpec, criterion: str = "chsh", use_oracle: bool = False,
                       convention: str = "bh_standard") -> BroadcastOutcome:
    """Apply the cloner and decide whether the target correlation was broadcast.

    The cross-lab pair comes from the closed-form map.  With ``use_oracle``
    the full cloning isometries are simulated, the closed form is checked
    against every output pair, and the within-lab pairs (13) and (24) are
    evaluated for optimality.
    """
    if criterion not in _TARGETS:
        raise ValueError(f"criterion must be one of {sorted(_TARGETS)}, got {criterion!r}")
    target = _TARGETS[criterion]
    input_report = criteria.report(s)
    pair = apply_cloner(s, spec)
    pair_report = criteria.report(pair)
    achieved = bool(target(pair_report))

    local_states = local_reports = check = None
    optimal = None
    if use_oracle:
        from .oracle import crosscheck_reduced_maps

        check = crosscheck_reduced_maps(s, spec, convention)
        local_states = (check.pairs["13"], check.pairs["24"])
        local_reports = tuple(criteria.report(p) for p in local_states)
        optimal = achieved and not any(target(r) for r in local_reports)
    return BroadcastOutcome(criterion, spec, input_report, pair, pair_report, local_states, local_reports,
                            achieved, optimal, check)
