import math

import numpy as np
import pytest

from nonlocal_cast.bloch import StateError
from nonlocal_cast.cloning import Family, bell_diagonal
from nonlocal_cast.criteria import correlation_spectrum
from nonlocal_cast.suites import (
    default_mu_grid,
    parallel_map,
    parse_grid,
    run_bell_diagonal_lhs,
    run_bound_theorem,
    run_werner_lhs,
    sample_hypothesis_states,
    tetrahedron_grid,
)


def test_parse_grid():
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1, 0.3") == [0.1, 0.3]
    assert len(parse_grid("0:1:0.001")) == 1001
    for bad in ("0:1", "0:1:0", "1:0:0.1", ""):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_default_mu_grid_ends_at_cap():
    grid = default_mu_grid(1 / math.sqrt(2))
    assert grid[:7] == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
    assert grid[-1] == 1 / math.sqrt(2)
    assert default_mu_grid(0.5) == [0.1, 0.2, 0.3, 0.4, 0.5]


def test_parallel_map_keeps_order(monkeypatch):
    monkeypatch.setenv("NONLOCAL_CAST_THREADS", "4")
    assert parallel_map(lambda v: v * v, list(range(50))) == [v * v for v in range(50)]


@pytest.mark.parametrize("criterion, n", [("chsh", 2), ("f3", 3)])
def test_sampled_states_satisfy_hypothesis(criterion, n):
    states = sample_hypothesis_states(np.random.default_rng(0), 50, criterion, batch=5000)
    assert len(states) == 50
    for s in states:
        assert correlation_spectrum(s)[:n].sum() > 1


def test_sampling_is_deterministic():
    a = sample_hypothesis_states(np.random.default_rng(3), 20, "chsh", batch=4000)
    b = sample_hypothesis_states(np.random.default_rng(3), 20, "chsh", batch=4000)
    assert all(s.allclose(t, atol=0) for s, t in zip(a, b))


def test_tetrahedron_grid_matches_constructor():
    kept, rejected = tetrahedron_grid(0.25)
    axis = np.round(-1 + 0.25 * np.arange(9), 12)
    expected = []
    for c1 in axis:
        for c2 in axis:
            for c3 in axis:
                try:
                    bell_diagonal(c1, c2, c3)
                except StateError:
                    continue
                expected.append((c1, c2, c3))
    assert [tuple(c) for c in kept] == expected
    assert rejected == 9**3 - len(expected)


def test_bound_theorem_skips_restricted_mu():
    states = sample_hypothesis_states(np.random.default_rng(1), 10, "chsh", batch=4000)
    result = run_bound_theorem(states, Family.NONLOCAL_SD, "chsh", [0.5, 0.6], mu_cap=1 / math.sqrt(2))
    assert result.checked == 10
    assert result.passed
    assert len(result.skipped) == 1 and "restricted" in result.skipped[0]


def test_worst_cases_sorted_by_margin():
    result = run_werner_lhs(parse_grid("0:1:0.1"), [0.5, 1 / math.sqrt(2)])
    worst = result.worst(3)
    assert [c.margin for c in worst] == sorted(c.margin for c in worst)
    assert worst[0].params == "p=1"


def test_bell_diagonal_suite_counts():
    result = run_bell_diagonal_lhs(0.5, [0.5])
    kept, rejected = tetrahedron_grid(0.5)
    assert result.checked == len(kept)
    assert result.extra["unphysical_skipped"] == rejected
