"""Broadcasting of two-qubit nonlocal correlations through quantum cloners.

Modules
-------
bloch
    Two-qubit Bloch representation, density matrices, partial traces, JSON IO.
criteria
    Bell-CHSH, steering, LHS and entanglement criteria.
cloning
    Buzek-Hillery cloner specifications, closed-form maps, bound checks.
oracle
    Explicit cloning isometries and full simulation, used as ground truth.
suites
    Bulk verification suites shared by the CLI and the acceptance tests.
"""

from .bloch import (
    Bloch2Q,
    MultiQState,
    StateError,
    UnphysicalStateError,
    from_density,
    load_state,
    partial_trace,
    random_state,
    save_state,
    to_density,
    validate,
)
from .cloning import (
    ClonerSpec,
    Family,
    SpecError,
    apply_cloner,
    bell_diagonal,
    broadcast_pipeline,
    singlet,
    theorem_bound_check,
    werner,
)
from .criteria import (
    MeasSettings,
    chsh_value,
    f_n_closed,
    f_n_direct,
    lhs_unsteerable,
    m_value,
    negativity,
    optimize_f_n,
    report,
)

__version__ = "0.1.0"

__all__ = [
    "Bloch2Q",
    "ClonerSpec",
    "Family",
    "MeasSettings",
    "MultiQState",
    "SpecError",
    "StateError",
    "UnphysicalStateError",
    "__version__",
    "apply_cloner",
    "bell_diagonal",
    "broadcast_pipeline",
    "chsh_value",
    "f_n_closed",
    "f_n_direct",
    "from_density",
    "lhs_unsteerable",
    "load_state",
    "m_value",
    "negativity",
    "optimize_f_n",
    "partial_trace",
    "random_state",
    "report",
    "save_state",
    "singlet",
    "theorem_bound_check",
    "to_density",
    "validate",
    "werner",
]
