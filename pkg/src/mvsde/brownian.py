"""Reproducible Brownian increments on dyadic grids, with level coupling.

Every increment is derived from a Philox-4x32-10 block whose counter encodes
(stream, particle, step, component) and whose key is the master seed; the
step-count tag also enters the counter, so bundles at different grid
resolutions are independent while a given cell is reproducible regardless of
traversal order or worker count.  Coarse-grid bundles are never sampled
directly: they are obtained by summing adjacent fine increments, which is
exactly the coupling the two-level error estimator requires.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from . import _kernels
from ._kernels import reference as _reference

# Stream tags partition the counter space between uses of one master seed.
STREAM_IDIOSYNCRATIC = 1
STREAM_COMMON = 2
STREAM_DERIVE = 3
STREAM_INITIAL = 4
STREAM_SUBSTEP = 5

_INV_2_53 = 2.0**-53


def _bits_to_normals(bits):
    # (0, 1) strictly, symmetric around 1/2; identical in both backends
    # because the float path below is shared.
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    return ndtri(u)


def derive_seeds(master_seed, tag, count):
    """Derive independent 64-bit sub-seeds, e.g. one per outer realisation."""
    bits = _reference.philox_bits(master_seed, STREAM_DERIVE, tag, count, 1, 1)
    return bits[:, 0, 0].copy()


@dataclass(frozen=True)
class BrownianBundle:
    """Increments for one simulation: per-particle dW and common dW0.

    dW has shape (N, n, m) with each entry Normal(0, h); dW0 has shape
    (n, m0).  key_n records the grid the bundle was generated on, which
    coarsening preserves (the seed material is (master_seed, key_n)).
    """

    n: int
    h: float
    dW: np.ndarray
    dW0: np.ndarray
    master_seed: int
    key_n: int

    @property
    def num_particles(self):
        return self.dW.shape[0]

    @property
    def m(self):
        return self.dW.shape[2]

    @property
    def m0(self):
        return self.dW0.shape[1]


def generate(master_seed, num_particles, m, m0, n, horizon):
    """Sample a bundle of Normal(0, h) increments on the n-step grid."""
    if n < 1:
        raise ValueError("step count n must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    h = horizon / n
    scale = math.sqrt(h)
    bits = _kernels.philox_bits(master_seed, STREAM_IDIOSYNCRATIC, n,
                                num_particles, n, m)
    d_w = _bits_to_normals(bits) * scale
    bits0 = _kernels.philox_bits(master_seed, STREAM_COMMON, n, 1, n, m0)
    d_w0 = _bits_to_normals(bits0)[0] * scale
    return BrownianBundle(n=n, h=h, dW=d_w, dW0=d_w0,
                          master_seed=master_seed, key_n=n)


def coarsen(bundle):
    """Halve the grid by summing adjacent increments (exact level coupling)."""
    if bundle.n % 2:
        raise ValueError("cannot coarsen a bundle with an odd step count")
    return replace(
        bundle,
        n=bundle.n // 2,
        h=2.0 * bundle.h,
        dW=bundle.dW[:, 0::2, :] + bundle.dW[:, 1::2, :],
        dW0=bundle.dW0[0::2, :] + bundle.dW0[1::2, :],
    )


class CommutativeClosedForm:
    """Closed-form double integrals: exact for same-driver pairs, symmetric
    split (Levy area dropped) for distinct independent drivers."""

    def __repr__(self):
        return "CommutativeClosedForm()"


CLOSED_FORM = CommutativeClosedForm()


@dataclass(frozen=True)
class SubstepApprox:
    """Double integrals from a bridge refinement into `substeps` pieces."""

    substeps: int

    def __post_init__(self):
        if self.substeps < 2:
            raise ValueError("SubstepApprox requires at least 2 substeps")


def _bridge_refine(total, h, substeps, rng):
    """Sub-increments summing exactly to `total` with bridge covariance."""
    m_dim = total.shape[0]
    xi = rng.standard_normal((substeps, m_dim))
    return total / substeps + math.sqrt(h / substeps) * (xi - xi.mean(axis=0))


def _double_sum(sub_a, sub_b):
    """Left-point discrete double integral of two sub-increment arrays."""
    cum = np.cumsum(sub_a, axis=0)
    prior = np.vstack([np.zeros((1, sub_a.shape[1])), cum[:-1]])
    return np.einsum("kp,kq->pq", prior, sub_b)


def double_integral(d_wa, d_wb, h, same_driver, mode=CLOSED_FORM, rng=None):
    """Within-step matrix I[j1, j2] ~ integral of (W_{j1} - W_{j1}(t)) dW_{j2}.

    In closed form the same-driver case is the exact Ito identity
    (dW dW^T - h I)/2 and distinct independent drivers get the symmetric
    split dWa dWb^T / 2.  The substep mode refines the step conditionally on
    the totals and evaluates the left-point double sum; pass an rng for
    reproducibility (defaults to a fixed-seed generator).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    d_wa = np.asarray(d_wa, dtype=np.float64)
    d_wb = np.asarray(d_wb, dtype=np.float64)
    if same_driver:
        if d_wa.shape != d_wb.shape or not np.array_equal(d_wa, d_wb):
            raise ValueError("same_driver requires identical increment vectors")
    if isinstance(mode, CommutativeClosedForm):
        if same_driver:
            return (np.outer(d_wa, d_wa) - h * np.eye(d_wa.shape[0])) / 2.0
        return np.outer(d_wa, d_wb) / 2.0
    if isinstance(mode, SubstepApprox):
        if rng is None:
            rng = np.random.default_rng(0)
        sub_a = _bridge_refine(d_wa, h, mode.substeps, rng)
        sub_b = sub_a if same_driver else _bridge_refine(d_wb, h, mode.substeps, rng)
        return _double_sum(sub_a, sub_b)
    raise ValueError(f"unknown double-integral mode: {mode!r}")


def step_integrals(d_w, d_w0, h, mode=CLOSED_FORM, rng=None):
    """All within-step integral matrices needed by one order-one step.

    Returns (i_ii, i_0i, i_i0, i_00) with shapes (N, m, m), (N, m0, m),
    (N, m, m0) and (m0, m0): inner driver on the first matrix axis, outer
    driver on the second.  In substep mode each driver is refined once so
    the four matrices stay mutually consistent.
    """
    n_p, m = d_w.shape
    m0 = d_w0.shape[0]
    if isinstance(mode, CommutativeClosedForm):
        i_ii = (d_w[:, :, None] * d_w[:, None, :] - h * np.eye(m)[None]) / 2.0
        i_0i = d_w0[None, :, None] * d_w[:, None, :] / 2.0
        i_i0 = d_w[:, :, None] * d_w0[None, None, :] / 2.0
        i_00 = (np.outer(d_w0, d_w0) - h * np.eye(m0)) / 2.0
        return i_ii, i_0i, i_i0, i_00
    if isinstance(mode, SubstepApprox):
        if rng is None:
            rng = np.random.default_rng(0)
        sub_0 = _bridge_refine(d_w0, h, mode.substeps, rng)
        i_00 = _double_sum(sub_0, sub_0)
        i_ii = np.empty((n_p, m, m))
        i_0i = np.empty((n_p, m0, m))
        i_i0 = np.empty((n_p, m, m0))
        for i in range(n_p):
            sub_i = _bridge_refine(d_w[i], h, mode.substeps, rng)
            i_ii[i] = _double_sum(sub_i, sub_i)
            i_0i[i] = _double_sum(sub_0, sub_i)
            i_i0[i] = _double_sum(sub_i, sub_0)
        return i_ii, i_0i, i_i0, i_00
    raise ValueError(f"unknown double-integral mode: {mode!r}")
