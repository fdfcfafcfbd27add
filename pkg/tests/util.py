"""Hand-built models and bundles shared by the test modules."""

import numpy as np

from mvsde.brownian import BrownianBundle
from mvsde.models import ModelSpec


def zeros_gradient(t, x, mu, y, u, v):
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))


def custom_model(name="custom", d=1, m=1, m0=0, rho=0.0, drift=None,
                 diffusion=None, common_diffusion=None, x0=1.0, **kwargs):
    """ModelSpec with zero defaults for anything not supplied."""
    if drift is None:
        drift = lambda t, x, mu: np.zeros_like(x)
    if diffusion is None:
        diffusion = lambda t, x, mu: np.zeros(x.shape[:-1] + (d, m))
    if common_diffusion is None:
        common_diffusion = lambda t, x, mu: np.zeros(x.shape[:-1] + (d, m0))
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    return ModelSpec(
        name=name, d=d, m=m, m0=m0, rho=rho,
        drift=drift, diffusion=diffusion, common_diffusion=common_diffusion,
        initial_sampler=lambda rng: x0.copy(),
        **kwargs,
    )


def zero_model(d=1, m=1, m0=0):
    return custom_model(name="zero", d=d, m=m, m0=m0, x0=np.zeros(d))


def manual_bundle(d_w, d_w0=None, h=1.0, master_seed=0):
    """Bundle with hand-chosen increments; d_w has shape (N, n, m)."""
    d_w = np.asarray(d_w, dtype=np.float64)
    n = d_w.shape[1]
    if d_w0 is None:
        d_w0 = np.zeros((n, 0))
    return BrownianBundle(n=n, h=h, dW=d_w, dW0=np.asarray(d_w0, dtype=np.float64),
                          master_seed=master_seed, key_n=n)
