"""Empirical-measure arithmetic for particle ensembles.

The coefficients of a mean-field model see the ensemble through
:class:`EmpiricalMeasureView`, a zero-copy read-only view of the particle
states.  The Wasserstein helpers below are the identities the schemes and
the error analysis rely on; general-dimension optimal transport is out of
scope (the identity coupling bound and the sorted 1-d distance cover every
use in this package).
"""

import math

import numpy as np


class EmpiricalMeasureView:
    """Read-only view of an (N, d) ensemble as an empirical measure.

    Means and distances computed from a view use exactly rounded
    (order-independent) summation, so they are invariant under particle
    permutations and stable for large N.
    """

    __slots__ = ("states", "num_particles", "dim")

    def __init__(self, states):
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("ensemble must be a non-empty (N, d) array")
        view = states.view()
        view.flags.writeable = False
        self.states = view
        self.num_particles = states.shape[0]
        self.dim = states.shape[1]


def mean(mu):
    """Arithmetic mean of the particle states, exactly rounded per column."""
    s = mu.states
    return np.array([math.fsum(s[:, j]) for j in range(s.shape[1])]) / mu.num_particles


def w2_sq_to_delta0(mu):
    """Squared 2-Wasserstein distance to the Dirac mass at the origin.

    For an empirical measure this is exactly the mean squared particle norm.
    """
    s = mu.states
    return math.fsum((s * s).ravel()) / mu.num_particles


def w2_sq_coupled(mu, nu):
    """Identity-coupling upper bound for the squared 2-Wasserstein distance.

    Rows with equal index are treated as the same particle at two times (or
    two discretisation levels), which is the coupling the scheme analysis
    uses throughout.
    """
    if mu.num_particles != nu.num_particles or mu.dim != nu.dim:
        raise ValueError("ensembles must share particle count and dimension")
    diff = mu.states - nu.states
    return math.fsum((diff * diff).ravel()) / mu.num_particles


def w2_1d_exact(mu, nu):
    """Exact 2-Wasserstein distance between two 1-d empirical measures.

    Sorting both samples realises the optimal (comonotone) coupling.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("exact distance implemented for d=1 only")
    if mu.num_particles != nu.num_particles:
        raise ValueError("ensembles must have equal particle count")
    x = np.sort(mu.states[:, 0])
    y = np.sort(nu.states[:, 0])
    diff = x - y
    return math.sqrt(math.fsum(diff * diff) / mu.num_particles)
