"""Step-size-dependent coefficient taming and its growth-envelope audit.

Taming divides every coefficient of a model by ``1 + n^{-a} |x|^{b}`` with
(a, b) = (1/2, rho/2) for the half-order scheme and (1, rho) for the
order-one scheme.  The denominator depends only on the particle state and
the step count, so one value per (particle, step) is shared by the drift,
both diffusions and every correction product; :func:`denominator` exposes
it for that reason.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import measure


class TamingKind(enum.Enum):
    EULER_HALF = "euler_half"
    MILSTEIN_FULL = "milstein_full"
    NONE = "none"


def denominator(x, rho, n, kind):
    """Taming denominator 1 + n^{-a}|x|^{b} per state row.

    x may be a single state (d,) or a batch (N, d); the result is a scalar
    array or an (N,) array.  rho == 0 means no taming (denominator exactly
    1, matching the Lipschitz case where the raw scheme is already stable).
    """
    if n < 1:
        raise ValueError("step count must be >= 1")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    norm = np.sqrt(np.sum(x * x, axis=-1))
    if kind is TamingKind.NONE or rho == 0:
        return np.ones_like(norm)
    if kind is TamingKind.EULER_HALF:
        return 1.0 + norm ** (rho / 2.0) / math.sqrt(n)
    if kind is TamingKind.MILSTEIN_FULL:
        return 1.0 + norm**rho / n
    raise ValueError(f"unknown taming kind: {kind!r}")


def tame(value, x, rho, n, kind):
    """Divide a coefficient value (or batch of values) by the taming denominator.

    value has shape (...,) for a single state x of shape (d,), or (N, ...)
    for a batch x of shape (N, d); the denominator broadcasts along the
    trailing axes of value.
    """
    value = np.asarray(value, dtype=np.float64)
    den = denominator(x, rho, n, kind)
    if den.ndim == 0:
        return value / den
    return value / den.reshape(den.shape + (1,) * (value.ndim - 1))


@dataclass
class EnvelopeReport:
    """Fitted envelope constants, one per tamed quantity."""

    kind: TamingKind
    n: int
    samples: int
    max_ratios: dict
    nonfinite: int
    bound: float

    @property
    def passed(self):
        return self.nonfinite == 0 and all(
            math.isfinite(r) and r < self.bound for r in self.max_ratios.values()
        )


def _row_norms(a):
    flat = np.asarray(a, dtype=np.float64).reshape(a.shape[0], -1)
    return np.sqrt(np.sum(flat * flat, axis=1))


def _ratio_max(raw, den, rate_env):
    """Max of tamed magnitude over min{rate envelope, untamed magnitude}."""
    env = np.minimum(rate_env, raw)
    ok = env > 0
    if not np.any(ok):
        return 0.0, int(np.count_nonzero(~np.isfinite(raw)))
    ratios = (raw[ok] / den[ok]) / env[ok]
    bad = int(np.count_nonzero(~np.isfinite(raw)))
    finite = ratios[np.isfinite(ratios)]
    return (float(finite.max()) if finite.size else 0.0), bad


def check_growth_envelope(model, n, kind, samples, bound=1e3, seed=0, batch=256):
    """Spot-check the tamed-coefficient growth envelopes on random inputs.

    Each tamed quantity must stay below K * min{n^p (1 + |x| + W2(mu, d0)),
    untamed magnitude} for a single finite K; the report carries the fitted
    K per quantity (the max observed ratio).  States are sampled with
    log-spaced magnitudes up to 1e6 so the super-linear regime is exercised;
    the drift envelope uses n^{1/2}, the diffusions n^{1/4}, and for the
    order-one taming the derivative products use n^{1/2} (state gradients)
    and n^{1/4} (measure gradients).
    """
    rng = np.random.default_rng(seed)
    quantities = ["drift", "diffusion", "common_diffusion"]
    with_products = kind is TamingKind.MILSTEIN_FULL and model.diffusion_dx is not None
    if with_products:
        quantities += ["dx_products", "dmu_products"]
    max_ratios = {q: 0.0 for q in quantities}
    nonfinite = 0
    t = 0.0

    done = 0
    while done < samples:
        b_sz = min(batch, samples - done)
        done += b_sz
        mags = 10.0 ** rng.uniform(-3, 6, size=b_sz)
        dirs = rng.standard_normal((b_sz, model.d))
        dirs /= _row_norms(dirs)[:, None] + 1e-300
        x = mags[:, None] * dirs
        ens = rng.standard_normal((int(rng.integers(1, 9)), model.d))
        ens *= 10.0 ** rng.uniform(-1, 3)
        mu = measure.EmpiricalMeasureView(ens)
        base = 1.0 + mags + math.sqrt(measure.w2_sq_to_delta0(mu))

        den = denominator(x, model.rho, n, kind)
        norm_b = _row_norms(np.asarray(model.drift(t, x, mu)))
        norm_s = _row_norms(np.asarray(model.diffusion(t, x, mu)))
        norm_s0 = _row_norms(np.asarray(model.common_diffusion(t, x, mu)))
        for q, raw, env in (
            ("drift", norm_b, math.sqrt(n) * base),
            ("diffusion", norm_s, n**0.25 * base),
            ("common_diffusion", norm_s0, n**0.25 * base),
        ):
            r, bad = _ratio_max(raw, den, env)
            max_ratios[q] = max(max_ratios[q], r)
            nonfinite += bad

        if not with_products:
            continue
        grad_x = [
            _row_norms(np.asarray(model.diffusion_dx(t, x, mu, u, v)))
            for u in range(model.d)
            for v in range(model.m)
        ]
        if model.common_diffusion_dx is not None and model.m0:
            grad_x += [
                _row_norms(np.asarray(model.common_diffusion_dx(t, x, mu, u, v)))
                for u in range(model.d)
                for v in range(model.m0)
            ]
        g_x = np.max(grad_x, axis=0) if grad_x else np.zeros(b_sz)
        grad_mu = []
        y = ens[:1]
        if model.diffusion_dmu is not None:
            grad_mu += [
                _row_norms(np.asarray(model.diffusion_dmu(t, x, mu, y, u, v)))
                for u in range(model.d)
                for v in range(model.m)
            ]
        if model.common_diffusion_dmu is not None and model.m0:
            grad_mu += [
                _row_norms(np.asarray(model.common_diffusion_dmu(t, x, mu, y, u, v)))
                for u in range(model.d)
                for v in range(model.m0)
            ]
        g_mu = np.max(grad_mu, axis=0) if grad_mu else np.zeros(b_sz)
        coeff_norm = np.maximum(norm_s, norm_s0)
        r, bad = _ratio_max(g_x * coeff_norm, den, math.sqrt(n) * base)
        max_ratios["dx_products"] = max(max_ratios["dx_products"], r)
        nonfinite += bad
        r, bad = _ratio_max(g_mu * coeff_norm, den, n**0.25 * base)
        max_ratios["dmu_products"] = max(max_ratios["dmu_products"], r)
        nonfinite += bad

    return EnvelopeReport(
        kind=kind, n=n, samples=samples, max_ratios=max_ratios,
        nonfinite=nonfinite, bound=bound,
    )
