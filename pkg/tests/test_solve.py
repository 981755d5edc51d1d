import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustpulse.solve import (alignment, find_roots, make_rng, project_to_roots,
                               random_seeds, wrap)

PI = math.pi


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
    lambda v: np.linalg.norm(v) > 0.1))
def test_alignment_vanishes_exactly_on_plus_minus(v):
    q = np.asarray(v) / np.linalg.norm(v)
    assert np.allclose(alignment(q, q), 0.0)
    assert np.allclose(alignment(q, -q), 0.0)
    other = np.roll(q, 1) if not np.allclose(np.roll(q, 1), q) else q[::-1]
    if not (np.allclose(other, q) or np.allclose(other, -q)):
        assert np.max(np.abs(alignment(q, other))) > 0


def test_rng_is_reproducible():
    a = make_rng(7).uniform(size=5)
    b = make_rng(7).uniform(size=5)
    assert np.array_equal(a, b)
    assert random_seeds(3, 2, 0.0, 1.0, 0).shape == (3, 2)


def test_find_roots_ranks_and_deduplicates():
    # roots of (x - 1)(x - 2) with "next residual" preferring x = 2
    res = lambda x: np.array([(x[0] - 1) * (x[0] - 2)])
    seeds = [[0.5], [0.9], [2.6], [1.8]]
    roots = find_roots(res, seeds, bounds=([0.0], [3.0]), next_residual=lambda x: abs(x[0] - 2))
    xs = [r.x[0] for r in roots]
    assert xs == pytest.approx([2.0, 1.0])
    assert roots[0].seed_index in (2, 3)


def test_find_roots_wraps_periodic_unknowns():
    res = lambda x: np.array([math.sin(x[0] - 0.3)])
    roots = find_roots(res, [[2 * PI + 0.2], [0.25]], periodic=True)
    assert all(0 <= r.x[0] < 2 * PI for r in roots)
    assert any(abs(r.x[0] - 0.3) < 1e-9 for r in roots)


def test_project_to_roots_returns_nearest_point_of_a_continuum():
    circle = lambda x: np.array([x[0] ** 2 + x[1] ** 2 - 1.0])
    x = project_to_roots(circle, [0.9, 0.1])
    assert np.hypot(*x) == pytest.approx(1.0, abs=1e-12)
    assert math.atan2(x[1], x[0]) == pytest.approx(math.atan2(0.1, 0.9), abs=1e-6)


def test_wrap_range():
    assert np.all((wrap(np.array([-1.0, 7.0])) >= 0) & (wrap(np.array([-1.0, 7.0])) < 2 * PI))
