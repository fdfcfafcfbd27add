"""Ensemble stepping: tamed Euler, tamed Milstein, untamed Euler diagnostic.

Updates are simultaneous: every coefficient is evaluated at the step-start
states and the step-start empirical measure, so no particle sees another's
updated position within a step.  The taming denominator is computed once
per (particle, step) and shared by the drift, both diffusions and every
product inside the order-one correction.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, brownian, taming
from .measure import EmpiricalMeasureView


class SchemeKind(enum.Enum):
    TAMED_EULER = "tamed_euler"
    TAMED_MILSTEIN = "tamed_milstein"
    UNTAMED_EULER = "untamed_euler"


class BlowUpError(RuntimeError):
    """A step produced a non-finite state (the untamed scheme's failure mode)."""

    def __init__(self, step, particle, level=None, outer=None):
        self.step = step
        self.particle = particle
        self.level = level
        self.outer = outer
        where = f"step {step}, particle {particle}"
        if level is not None:
            where += f", level {level}"
        if outer is not None:
            where += f", outer realisation {outer}"
        super().__init__(f"simulation blew up at {where}")


class ModeError(ValueError):
    """Double-integral mode incompatible with the model's noise structure."""


@dataclass(frozen=True)
class SchemeConfig:
    kind: SchemeKind
    n: int
    T: float = 1.0
    di_mode: object = field(default_factory=lambda: brownian.CLOSED_FORM)
    include_measure_corrections: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.T <= 0:
            raise ValueError("T must be positive")


@dataclass(frozen=True)
class ParticleEnsemble:
    """Particle states (N, d) at one time index of the step grid."""

    states: np.ndarray
    time_index: int = 0

    @property
    def num_particles(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]


def _as_states(array):
    states = np.ascontiguousarray(array, dtype=np.float64)
    if states.ndim != 2:
        raise ValueError("states must be an (N, d) array")
    return states


def _check_finite(new_states, step):
    finite = np.isfinite(new_states)
    if not finite.all():
        particle = int(np.argwhere(~finite.all(axis=1))[0, 0])
        raise BlowUpError(step=step, particle=particle)


def _coefficients(model, t, x, mu):
    b = np.ascontiguousarray(model.drift(t, x, mu), dtype=np.float64)
    sig = np.ascontiguousarray(model.diffusion(t, x, mu), dtype=np.float64)
    sig0 = np.ascontiguousarray(model.common_diffusion(t, x, mu), dtype=np.float64)
    return b, sig, sig0


def euler_step(model, ensemble, bundle, k, tamed=True, kind=None):
    """One explicit Euler-Maruyama step over [k h, (k+1) h].

    `tamed` selects the half-order taming; `kind` overrides the taming kind
    directly (used to compare against the order-one scheme's drift part).
    """
    if k >= bundle.n:
        raise ValueError(f"step index {k} out of range for an {bundle.n}-step bundle")
    if kind is None:
        kind = taming.TamingKind.EULER_HALF if tamed else taming.TamingKind.NONE
    x = _as_states(ensemble.states)
    mu = EmpiricalMeasureView(x)
    t = k * bundle.h
    # overflow here is the untamed scheme's expected failure mode; the
    # finiteness check converts it into a BlowUpError
    with np.errstate(over="ignore", invalid="ignore"):
        b, sig, sig0 = _coefficients(model, t, x, mu)
        den = np.ascontiguousarray(taming.denominator(x, model.rho, bundle.n, kind))
        d_w = np.ascontiguousarray(bundle.dW[:, k, :])
        d_w0 = np.ascontiguousarray(bundle.dW0[k])
        new = _kernels.fused_euler_update(x, b, sig, sig0, d_w, d_w0, bundle.h, den)
    _check_finite(new, k)
    return ParticleEnsemble(states=new, time_index=ensemble.time_index + 1)


def _gradient_tensor(fn, t, x, mu, d, width):
    """Stack the per-entry state gradients into an (N, d, width, d) tensor."""
    out = np.empty((x.shape[0], d, width, d))
    for u in range(d):
        for v in range(width):
            out[:, u, v, :] = np.asarray(fn(t, x, mu, u, v), dtype=np.float64)
    return out


def _measure_gradient_tensor(fn, t, x, mu, d, width):
    """Pairwise Lions derivatives: entry [u][v] has shape (N, N, d)."""
    xi = x[:, None, :]
    yj = x[None, :, :]
    return [
        [np.asarray(fn(t, xi, mu, yj, u, v), dtype=np.float64) for v in range(width)]
        for u in range(d)
    ]


def _lambda_bar(model, t, x, mu, sigt, sig0t, d_w, d_w0, h):
    """Measure-correction terms: pairwise Lions-derivative sums over particles.

    Cross-particle double integrals use the symmetric split; the diagonal
    (own-particle) term uses the same-driver closed form, exactly as the
    own-particle corrections do.
    """
    n_p, d = x.shape
    m = sigt.shape[2]
    m0 = sig0t.shape[2]
    out = np.zeros((n_p, d))

    # I[j, i, w, v] for inner driver W^j against outer W^i.
    i_ji = d_w[:, None, :, None] * d_w[None, :, None, :] / 2.0
    diag = (d_w[:, :, None] * d_w[:, None, :] - h * np.eye(m)[None]) / 2.0
    i_ji[np.arange(n_p), np.arange(n_p)] = diag

    if model.diffusion_dmu is not None and m:
        dmu = _measure_gradient_tensor(model.diffusion_dmu, t, x, mu, d, m)
        for u in range(d):
            for v in range(m):
                grad = dmu[u][v]
                inner = np.einsum("ijk,jkw->ijw", grad, sigt)
                out[:, u] += np.einsum("ijw,jiw->i", inner, i_ji[:, :, :, v])
                if m0:
                    inner0 = np.einsum("ijk,jkw->ijw", grad, sig0t)
                    out[:, u] += np.einsum("ijw,w->i", inner0, d_w0) * d_w[:, v] / 2.0
    if model.common_diffusion_dmu is not None and m0:
        dmu0 = _measure_gradient_tensor(model.common_diffusion_dmu, t, x, mu, d, m0)
        i_00 = (np.outer(d_w0, d_w0) - h * np.eye(m0)) / 2.0
        for u in range(d):
            for v0 in range(m0):
                grad = dmu0[u][v0]
                if m:
                    inner = np.einsum("ijk,jkw->ijw", grad, sigt)
                    out[:, u] += np.einsum("ijw,jw->i", inner, d_w) * d_w0[v0] / 2.0
                inner0 = np.einsum("ijk,jkw->ijw", grad, sig0t)
                out[:, u] += np.einsum("ijw,w->i", inner0, i_00[:, v0])
    return out / n_p


def milstein_step(model, ensemble, bundle, k, config, step_rng=None):
    """One tamed order-one step: Euler part plus diffusion-derivative terms."""
    if k >= bundle.n:
        raise ValueError(f"step index {k} out of range for an {bundle.n}-step bundle")
    if model.diffusion_dx is None:
        raise ValueError("order-one scheme needs the model's diffusion_dx")
    if model.m0 and model.common_diffusion_dx is None:
        raise ValueError("order-one scheme needs common_diffusion_dx when m0 > 0")
    if config.include_measure_corrections and model.diffusion_dmu is None \
            and model.common_diffusion_dmu is None:
        raise ValueError("measure corrections need a Lions derivative on the model")

    kind = taming.TamingKind.MILSTEIN_FULL
    x = _as_states(ensemble.states)
    mu = EmpiricalMeasureView(x)
    t = k * bundle.h
    b, sig, sig0 = _coefficients(model, t, x, mu)
    den = np.ascontiguousarray(taming.denominator(x, model.rho, bundle.n, kind))
    d_w = np.ascontiguousarray(bundle.dW[:, k, :])
    d_w0 = np.ascontiguousarray(bundle.dW0[k])
    new = _kernels.fused_euler_update(x, b, sig, sig0, d_w, d_w0, bundle.h, den)

    sigt = sig / den[:, None, None]
    sig0t = sig0 / den[:, None, None]
    dsig = _gradient_tensor(model.diffusion_dx, t, x, mu, model.d, model.m)
    if model.m0:
        dsig0 = _gradient_tensor(model.common_diffusion_dx, t, x, mu,
                                 model.d, model.m0)
    else:
        dsig0 = np.zeros((x.shape[0], model.d, 0, model.d))
    i_ii, i_0i, i_i0, i_00 = brownian.step_integrals(
        d_w, d_w0, bundle.h, mode=config.di_mode, rng=step_rng
    )
    corr = _kernels.milstein_lambda(
        dsig, np.ascontiguousarray(dsig0),
        np.ascontiguousarray(sigt), np.ascontiguousarray(sig0t),
        np.ascontiguousarray(i_ii), np.ascontiguousarray(i_0i),
        np.ascontiguousarray(i_i0), np.ascontiguousarray(i_00),
    )
    new = new + corr
    if config.include_measure_corrections:
        new = new + _lambda_bar(model, t, x, mu, sigt, sig0t, d_w, d_w0, bundle.h)
    _check_finite(new, k)
    return ParticleEnsemble(states=new, time_index=ensemble.time_index + 1)


def simulate(model, config, bundle, initial_states=None, record_path=False):
    """Run the configured scheme over the whole bundle.

    Returns the final ensemble, or the full list of ensembles (including the
    initial one) when record_path is set.  Initial states default to i.i.d.
    draws from the model's initial sampler, seeded from the bundle.
    """
    if bundle.n != config.n:
        raise ValueError(f"bundle has {bundle.n} steps, config expects {config.n}")
    if bundle.m != model.m or bundle.m0 != model.m0:
        raise ModeError(
            f"bundle noise dims (m={bundle.m}, m0={bundle.m0}) do not match "
            f"model (m={model.m}, m0={model.m0})"
        )
    if initial_states is None:
        seed = int(brownian.derive_seeds(bundle.master_seed, brownian.STREAM_INITIAL, 1)[0])
        rng = np.random.default_rng(seed)
        initial_states = model.sample_initial(rng, bundle.num_particles)
    states = _as_states(initial_states)
    if states.shape != (bundle.num_particles, model.d):
        raise ValueError("initial states must have shape (N, d) matching the bundle")

    step_seeds = None
    if isinstance(config.di_mode, brownian.SubstepApprox):
        step_seeds = brownian.derive_seeds(bundle.master_seed,
                                           brownian.STREAM_SUBSTEP, config.n)

    ensemble = ParticleEnsemble(states=states, time_index=0)
    path = [ensemble] if record_path else None
    for k in range(config.n):
        if config.kind is SchemeKind.TAMED_MILSTEIN:
            step_rng = (np.random.default_rng(int(step_seeds[k]))
                        if step_seeds is not None else None)
            ensemble = milstein_step(model, ensemble, bundle, k, config,
                                     step_rng=step_rng)
        elif config.kind is SchemeKind.TAMED_EULER:
            ensemble = euler_step(model, ensemble, bundle, k, tamed=True)
        elif config.kind is SchemeKind.UNTAMED_EULER:
            ensemble = euler_step(model, ensemble, bundle, k, tamed=False)
        else:
            raise ValueError(f"unknown scheme kind: {config.kind!r}")
        if record_path:
            path.append(ensemble)
    return path if record_path else ensemble
