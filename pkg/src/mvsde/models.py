"""Coefficient interface for mean-field SDE models and the built-in examples.

A :class:`ModelSpec` bundles the drift, idiosyncratic diffusion and
common-noise diffusion together with the spatial and measure (Lions)
derivatives of the diffusions, the dimensions, and the super-linearity
exponent ``rho`` consumed by the taming denominators.

Coefficient call convention (shared by every consumer in this package):

* ``drift(t, x, mu) -> (N, d)`` and ``diffusion(t, x, mu) -> (N, d, m)``
  for a batch ``x`` of shape (N, d); ``mu`` is an
  :class:`~mvsde.measure.EmpiricalMeasureView` of the current ensemble.
* ``diffusion_dx(t, x, mu, u, v) -> (N, d)`` is the state gradient of the
  scalar entry (u, v).
* ``diffusion_dmu(t, x, mu, y, u, v) -> (..., d)`` is the Lions derivative
  of entry (u, v) evaluated at measure argument ``y``; implementations must
  broadcast ``x`` against ``y`` following numpy rules.

All functions must be pure: a ModelSpec is immutable and shared freely
across workers.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import measure

DEFAULT_VOL_MATRIX = np.array([[2.0, 1.0], [1.0, 2.0]]) / math.sqrt(10.0)


def _row_norms(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def _zeros_like_gradient(x, y):
    shape = np.broadcast_shapes(np.shape(x), np.shape(y))
    return np.zeros(shape)


@dataclass(frozen=True)
class ModelSpec:
    """Immutable coefficient bundle for one mean-field model."""

    name: str
    d: int
    m: int
    m0: int
    rho: float
    drift: Callable
    diffusion: Callable
    common_diffusion: Callable
    initial_sampler: Callable
    diffusion_dx: Optional[Callable] = None
    common_diffusion_dx: Optional[Callable] = None
    diffusion_dmu: Optional[Callable] = None
    common_diffusion_dmu: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1 or self.m < 0 or self.m0 < 0:
            raise ValueError("dimensions must satisfy d >= 1, m >= 0, m0 >= 0")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")

    def sample_initial(self, rng, num_particles):
        """Draw num_particles i.i.d. initial states as an (N, d) array."""
        return np.stack(
            [np.asarray(self.initial_sampler(rng), dtype=np.float64)
             for _ in range(num_particles)]
        )


def builtin_three_halves(lam=2.5, mu_param=1.0, xi=None, x0=(1.0, 1.0)):
    """Mean-field 3/2 stochastic volatility model (2-d, multiplicative noise).

    Drift lam * x * (mu_param - |x|) + mean of the ensemble; diffusion is
    the constant matrix xi scaled by |x|^{3/2}.  The quadratic drift and
    3/2-power diffusion match rho = 2 (drift envelope (1+|x|)^{rho/2+1},
    diffusion envelope (1+|x|)^{rho/4+1}).
    """
    xi = DEFAULT_VOL_MATRIX if xi is None else np.asarray(xi, dtype=np.float64)
    if xi.shape != (2, 2) or not np.all(np.isfinite(xi)):
        raise ValueError("xi must be a finite 2x2 matrix")
    x0 = np.asarray(x0, dtype=np.float64)

    def drift(t, x, mu):
        r = _row_norms(x)
        return lam * x * (mu_param - r)[:, None] + measure.mean(mu)[None, :]

    def diffusion(t, x, mu):
        r32 = _row_norms(x) ** 1.5
        return r32[:, None, None] * xi[None, :, :]

    def diffusion_dx(t, x, mu, u, v):
        r = _row_norms(x)
        scale = np.where(r > 0, 1.5 / np.sqrt(np.where(r > 0, r, 1.0)), 0.0)
        return (xi[u, v] * scale)[:, None] * x

    def common_diffusion(t, x, mu):
        return np.zeros(x.shape[:-1] + (2, 0))

    return ModelSpec(
        name="three_halves", d=2, m=2, m0=0, rho=2.0,
        drift=drift, diffusion=diffusion, common_diffusion=common_diffusion,
        diffusion_dx=diffusion_dx, diffusion_dmu=_zeros_like_gradient_entry,
        initial_sampler=lambda rng: x0.copy(),
        params={"lam": lam, "mu_param": mu_param, "xi": xi, "x0": x0},
    )


def _zeros_like_gradient_entry(t, x, mu, y, u, v):
    return _zeros_like_gradient(x, y)


def _double_well_drift(t, x, mu):
    return x * (1.0 - x * x) + measure.mean(mu)[None, :]


def builtin_double_well(sigma=0.3, x0=1.0):
    """Mean-field stochastic double well (1-d, cubic drift, quadratic noise).

    Drift x(1 - x^2) + ensemble mean, diffusion sigma * (1 - x^2); rho = 4.
    """

    def diffusion(t, x, mu):
        return (sigma * (1.0 - x * x))[:, :, None]

    def diffusion_dx(t, x, mu, u, v):
        return -2.0 * sigma * x

    return ModelSpec(
        name="double_well", d=1, m=1, m0=0, rho=4.0,
        drift=_double_well_drift, diffusion=diffusion,
        common_diffusion=lambda t, x, mu: np.zeros(x.shape[:-1] + (1, 0)),
        diffusion_dx=diffusion_dx, diffusion_dmu=_zeros_like_gradient_entry,
        initial_sampler=lambda rng: np.array([float(x0)]),
        params={"sigma": sigma, "x0": x0},
    )


def builtin_double_well_common(sigma=0.1, x0=1.0):
    """Double well with the same multiplicative noise on a common driver.

    The drift's mean is the conditional mean: within one common-noise
    realisation it is approximated by the ensemble average.
    """

    def diffusion(t, x, mu):
        return (sigma * (1.0 - x * x))[:, :, None]

    def diffusion_dx(t, x, mu, u, v):
        return -2.0 * sigma * x

    return ModelSpec(
        name="double_well_common", d=1, m=1, m0=1, rho=4.0,
        drift=_double_well_drift, diffusion=diffusion,
        common_diffusion=diffusion, diffusion_dx=diffusion_dx,
        common_diffusion_dx=diffusion_dx,
        diffusion_dmu=_zeros_like_gradient_entry,
        common_diffusion_dmu=_zeros_like_gradient_entry,
        initial_sampler=lambda rng: np.array([float(x0)]),
        params={"sigma": sigma, "x0": x0},
    )


def builtin_measure_coupled_diffusion(c=0.2, x0=1.0):
    """Double-well variant whose idiosyncratic diffusion sees the mean.

    diffusion = 0.3 (1 - x^2) + c * mean(mu), so the Lions derivative of
    the diffusion entry is the constant c; this model exercises the
    measure-correction terms of the order-one scheme, which vanish for
    every other built-in.
    """

    def diffusion(t, x, mu):
        return (0.3 * (1.0 - x * x) + c * measure.mean(mu)[0])[:, :, None]

    def diffusion_dx(t, x, mu, u, v):
        return -0.6 * x

    def diffusion_dmu(t, x, mu, y, u, v):
        return np.full(np.broadcast_shapes(np.shape(x), np.shape(y)), float(c))

    def common_diffusion(t, x, mu):
        return (0.1 * (1.0 - x * x))[:, :, None]

    def common_diffusion_dx(t, x, mu, u, v):
        return -0.2 * x

    return ModelSpec(
        name="measure_coupled", d=1, m=1, m0=1, rho=4.0,
        drift=_double_well_drift, diffusion=diffusion,
        common_diffusion=common_diffusion,
        diffusion_dx=diffusion_dx, common_diffusion_dx=common_diffusion_dx,
        diffusion_dmu=diffusion_dmu,
        common_diffusion_dmu=_zeros_like_gradient_entry,
        initial_sampler=lambda rng: np.array([float(x0)]),
        params={"c": c, "x0": x0},
    )


BUILTIN_FACTORIES = {
    "three_halves": builtin_three_halves,
    "double_well": builtin_double_well,
    "double_well_common": builtin_double_well_common,
    "measure_coupled": builtin_measure_coupled_diffusion,
}


def make_builtin(model_id, **params):
    """Build one of the registered models from its string id."""
    try:
        factory = BUILTIN_FACTORIES[model_id]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_FACTORIES))
        raise ValueError(f"unknown model id {model_id!r} (known: {known})") from None
    return factory(**params)


@dataclass
class AuditReport:
    """Empirical maxima of the assumption ratios, one entry per assumption."""

    max_ratios: dict
    flagged: dict
    nonfinite: int
    sample_count: int
    radius: float
    bound: float

    @property
    def any_flagged(self):
        return self.nonfinite > 0 or any(self.flagged.values())


def audit_assumptions(model, sample_count, radius, p0=6.0, p1=6.0,
                      bound=1e3, seed=0, batch=64):
    """Numeric spot-check of the coercivity/monotonicity/Lipschitz ratios.

    Samples state pairs inside the given radius together with small random
    ensembles and reports, per assumption, the empirical maximum of the
    left-hand side divided by the right-hand side (the constant the
    assumption would need).  Non-finite coefficient output is counted, not
    raised: the simulator runs any model and this audit is advisory only.
    The identity-coupling bound stands in for the Wasserstein distance
    between the two sampled ensembles.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    names = ("coercivity", "monotonicity", "poly_lipschitz")
    max_ratios = {q: 0.0 for q in names}
    nonfinite = 0
    t = 0.0

    done = 0
    while done < sample_count:
        b_sz = min(batch, sample_count - done)
        done += b_sz
        x = rng.uniform(-radius, radius, size=(b_sz, model.d))
        xb = rng.uniform(-radius, radius, size=(b_sz, model.d))
        n_ens = int(rng.integers(1, 9))
        ens = rng.uniform(-radius, radius, size=(n_ens, model.d))
        ens_b = rng.uniform(-radius, radius, size=(n_ens, model.d))
        mu = measure.EmpiricalMeasureView(ens)
        mu_b = measure.EmpiricalMeasureView(ens_b)
        w2_sq_pair = measure.w2_sq_coupled(mu, mu_b)
        w2_sq_zero = measure.w2_sq_to_delta0(mu)

        b1 = np.asarray(model.drift(t, x, mu))
        b2 = np.asarray(model.drift(t, xb, mu_b))
        s1 = np.asarray(model.diffusion(t, x, mu))
        s2 = np.asarray(model.diffusion(t, xb, mu_b))
        s01 = np.asarray(model.common_diffusion(t, x, mu))
        s02 = np.asarray(model.common_diffusion(t, xb, mu_b))

        norm_x = _row_norms(x)
        hs = lambda a: np.sum((a * a).reshape(a.shape[0], -1), axis=1)

        coer = (2.0 * np.sum(x * b1, axis=1) + (p0 - 1.0) * (hs(s1) + hs(s01))) / (
            (1.0 + norm_x) ** 2 + w2_sq_zero
        )
        dx = x - xb
        mono_lhs = (
            2.0 * np.sum(dx * (b1 - b2), axis=1)
            + (p1 - 1.0) * (hs(s1 - s2) + hs(s01 - s02))
        )
        mono = mono_lhs / (np.sum(dx * dx, axis=1) + w2_sq_pair + 1e-300)
        lip = _row_norms(b1 - b2) / (
            (1.0 + norm_x + _row_norms(xb)) ** (model.rho / 2.0) * _row_norms(dx)
            + math.sqrt(w2_sq_pair)
            + 1e-300
        )

        for q, ratios in (("coercivity", coer), ("monotonicity", mono),
                          ("poly_lipschitz", lip)):
            finite = ratios[np.isfinite(ratios)]
            nonfinite += int(ratios.size - finite.size)
            if finite.size:
                max_ratios[q] = max(max_ratios[q], float(finite.max()))

    flagged = {q: r > bound for q, r in max_ratios.items()}
    return AuditReport(
        max_ratios=max_ratios, flagged=flagged, nonfinite=nonfinite,
        sample_count=sample_count, radius=radius, bound=bound,
    )
