"""Empirical-measure arithmetic: worked examples, identities, couplings."""

import itertools
import math

import numpy as np
import pytest

from mvsde.measure import (EmpiricalMeasureView, mean, w2_1d_exact,
                           w2_sq_coupled, w2_sq_to_delta0)


def view(rows):
    return EmpiricalMeasureView(np.asarray(rows, dtype=np.float64))


def test_view_validation():
    with pytest.raises(ValueError):
        EmpiricalMeasureView(np.empty((0, 1)))
    with pytest.raises(ValueError):
        EmpiricalMeasureView(np.zeros((2, 2, 2)))
    v = view([[1.0, 2.0]])
    assert v.num_particles == 1 and v.dim == 2
    with pytest.raises(ValueError):
        v.states[0, 0] = 3.0  # read-only view


def test_mean_examples():
    assert mean(view([[3.0]])) == np.array([3.0])
    assert mean(view([[1.0], [3.0]])) == np.array([2.0])
    np.testing.assert_array_equal(mean(view([[1, 0], [0, 1]])), [0.5, 0.5])


def test_mean_single_particle_exact():
    x = np.array([[0.1234567890123456, -7.77e-13]])
    np.testing.assert_array_equal(mean(view(x)), x[0])


def test_mean_permutation_invariant_bitwise():
    rng = np.random.default_rng(0)
    states = rng.standard_normal((257, 3))
    perm = rng.permutation(257)
    np.testing.assert_array_equal(mean(view(states)), mean(view(states[perm])))


def test_w2_sq_to_delta0_examples():
    assert w2_sq_to_delta0(view([[0.0]])) == 0.0
    assert w2_sq_to_delta0(view([[3.0], [4.0]])) == 12.5
    assert w2_sq_to_delta0(view([[1.0, 1.0]])) == 2.0


def test_w2_sq_coupled_examples():
    a = view([[1.0], [2.0]])
    assert w2_sq_coupled(a, a) == 0.0
    assert w2_sq_coupled(view([[0.0]]), view([[3.0]])) == 9.0
    assert w2_sq_coupled(view([[1.0], [2.0]]), view([[2.0], [4.0]])) == 2.5


def test_w2_sq_coupled_dimension_mismatch():
    with pytest.raises(ValueError):
        w2_sq_coupled(view([[1.0]]), view([[1.0], [2.0]]))
    with pytest.raises(ValueError):
        w2_sq_coupled(view([[1.0]]), view([[1.0, 2.0]]))


def test_w2_1d_exact_examples():
    assert w2_1d_exact(view([[1.0], [2.0]]), view([[2.0], [1.0]])) == 0.0
    assert w2_1d_exact(view([[0.0], [0.0]]), view([[1.0], [1.0]])) == 1.0
    with pytest.raises(ValueError):
        w2_1d_exact(view([[1.0, 2.0]]), view([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        w2_1d_exact(view([[1.0]]), view([[1.0], [2.0]]))


def brute_force_w2_1d(x, y):
    """Minimum over all couplings of two equal-size 1-d point sets."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    best = math.inf
    for perm in itertools.permutations(range(len(y))):
        diffs = x - y[list(perm)]
        best = min(best, math.fsum(diffs * diffs))
    return math.sqrt(best / len(x))


def test_w2_1d_exact_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(40):
        x = rng.standard_normal(5)
        y = 2.0 * rng.standard_normal(5) + 0.3
        got = w2_1d_exact(view(x[:, None]), view(y[:, None]))
        assert got == brute_force_w2_1d(x, y)


def test_optimal_coupling_beats_identity_coupling():
    rng = np.random.default_rng(8)
    for _ in range(60):
        n = int(rng.integers(1, 30))
        a = rng.standard_normal((n, 1)) * rng.uniform(0.1, 5.0)
        b = rng.standard_normal((n, 1)) + rng.uniform(-2, 2)
        mu, nu = view(a), view(b)
        assert w2_1d_exact(mu, nu) <= math.sqrt(w2_sq_coupled(mu, nu)) + 1e-12


def test_delta0_is_coupling_against_zero_ensemble():
    rng = np.random.default_rng(9)
    for _ in range(20):
        states = rng.standard_normal((17, 4)) * 3.0
        mu = view(states)
        zero = view(np.zeros_like(states))
        assert w2_sq_to_delta0(mu) == w2_sq_coupled(mu, zero)


def test_simultaneous_permutation_invariance():
    rng = np.random.default_rng(10)
    a = rng.standard_normal((23, 2))
    b = rng.standard_normal((23, 2))
    perm = rng.permutation(23)
    assert w2_sq_coupled(view(a), view(b)) == w2_sq_coupled(view(a[perm]), view(b[perm]))
    a1, b1 = a[:, :1], b[:, :1]
    assert w2_1d_exact(view(a1), view(b1)) == w2_1d_exact(view(a1[perm]), view(b1[perm]))
    assert w2_sq_to_delta0(view(a)) == w2_sq_to_delta0(view(a[perm]))
