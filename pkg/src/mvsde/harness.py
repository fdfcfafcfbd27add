"""Strong-convergence experiments: two-level errors, rate fits, diagnostics.

The exact solutions of the built-in models are unknown, so rates are
measured by self-convergence: the fine-grid terminal states are compared
against the coarse-grid states driven by the summed (coarsened) increments
of the same Brownian paths, level by level.  With common noise, the p-th
powers of the per-realisation errors are averaged across outer realisations
before the 1/p root is taken, which is the L^p error on the product of the
two noise spaces.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import brownian
from .scheme import (BlowUpError, ParticleEnsemble, SchemeConfig, SchemeKind,
                     euler_step, milstein_step, simulate)

# Tags for deriving disjoint sub-seed spaces from one master seed.
TAG_OUTER = 101
TAG_INITIAL = 102
TAG_CHAOS = 103


def two_level_error(fine_final, coarse_final, p):
    """((1/N) sum_i |x_fine,i - x_coarse,i|^p)^(1/p) for coupled ensembles."""
    if p < 2 or p % 2:
        raise ValueError("p must be a positive even integer")
    if (fine_final.states.shape != coarse_final.states.shape):
        raise ValueError("ensembles must have identical shape")
    diff = fine_final.states - coarse_final.states
    norms_sq = np.sum(diff * diff, axis=1)
    return (math.fsum(norms_sq ** (p // 2)) / diff.shape[0]) ** (1.0 / p)


def fit_slope(levels, rmse):
    """Least-squares decay rate of log2(rmse) against the level index."""
    coeffs = np.polyfit(np.asarray(levels, dtype=float), np.log2(rmse), 1)
    return -float(coeffs[0])


@dataclass
class RateReport:
    """Per-level errors and fitted decay rates of one convergence study."""

    levels: list
    p_values: list
    rmse: dict
    slopes: dict
    num_particles: int
    outer: int

    @property
    def step_counts(self):
        return [2**level for level in self.levels]

    def refit(self):
        return {p: fit_slope(self.levels, self.rmse[p]) for p in self.p_values}

    def csv_rows(self):
        rows = ["level,n,p,rmse"]
        for i, level in enumerate(self.levels):
            for p in self.p_values:
                rows.append(f"{level},{2**level},{p},{self.rmse[p][i]:.17g}")
        return rows

    def slope_summary(self):
        return [f"p={p} slope={self.slopes[p]:.17g}" for p in self.p_values]


def _study_one_outer(model, scheme_kind, levels, num_particles, p_values,
                     seed, horizon, di_mode, include_measure_corrections):
    init_seed = int(brownian.derive_seeds(seed, TAG_INITIAL, 1)[0])
    x0 = model.sample_initial(np.random.default_rng(init_seed), num_particles)
    powers = np.empty((len(levels), len(p_values)))
    for li, level in enumerate(levels):
        n_fine = 2**level
        fine = brownian.generate(seed, num_particles, model.m, model.m0,
                                 n_fine, horizon)
        coarse = brownian.coarsen(fine)
        cfg_f = SchemeConfig(kind=scheme_kind, n=n_fine, T=horizon,
                             di_mode=di_mode,
                             include_measure_corrections=include_measure_corrections)
        cfg_c = SchemeConfig(kind=scheme_kind, n=n_fine // 2, T=horizon,
                             di_mode=di_mode,
                             include_measure_corrections=include_measure_corrections)
        try:
            x_fine = simulate(model, cfg_f, fine, initial_states=x0)
            x_coarse = simulate(model, cfg_c, coarse, initial_states=x0)
        except BlowUpError as err:
            raise BlowUpError(err.step, err.particle, level=level) from None
        diff = x_fine.states - x_coarse.states
        norms_sq = np.sum(diff * diff, axis=1)
        for pi, p in enumerate(p_values):
            powers[li, pi] = math.fsum(norms_sq ** (p // 2)) / num_particles
    return powers


def convergence_study(model, scheme_kind, levels, num_particles, p_values,
                      outer, master_seed, horizon=1.0,
                      di_mode=None, include_measure_corrections=False,
                      workers=1):
    """Two-level RMSE per dyadic level and fitted decay rate per p.

    Each outer realisation owns a disjoint seed space (fresh common noise,
    idiosyncratic noise and initial draws); its initial states are shared
    bitwise by every level.  Results are independent of the worker count:
    realisations are reduced in index order.
    """
    levels = list(levels)
    if not levels or min(levels) < 1:
        raise ValueError("levels must be a non-empty list of integers >= 1")
    if sorted(levels) != levels:
        raise ValueError("levels must be ascending")
    p_values = list(p_values)
    for p in p_values:
        if p < 2 or p % 2:
            raise ValueError("p values must be positive even integers")
    if outer < 1:
        raise ValueError("outer must be >= 1")
    if di_mode is None:
        di_mode = brownian.CLOSED_FORM

    seeds = [int(s) for s in brownian.derive_seeds(master_seed, TAG_OUTER, outer)]

    def job(index):
        try:
            return _study_one_outer(model, scheme_kind, levels, num_particles,
                                    p_values, seeds[index], horizon, di_mode,
                                    include_measure_corrections)
        except BlowUpError as err:
            raise BlowUpError(err.step, err.particle, level=err.level,
                              outer=index) from None

    if workers == 1 or outer == 1:
        per_outer = [job(i) for i in range(outer)]
    else:
        max_workers = workers if workers > 0 else None
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            per_outer = list(pool.map(job, range(outer)))

    mean_powers = sum(per_outer) / outer
    rmse = {
        p: np.array([mean_powers[li, pi] ** (1.0 / p) for li in range(len(levels))])
        for pi, p in enumerate(p_values)
    }
    slopes = {p: fit_slope(levels, rmse[p]) for p in p_values}
    return RateReport(levels=levels, p_values=p_values, rmse=rmse, slopes=slopes,
                      num_particles=num_particles, outer=outer)


def chaos_trend(model, scheme_kind, particle_counts, n_steps, reference_count,
                master_seed, num_seeds=20, horizon=1.0):
    """Terminal-law distance of small ensembles to a large reference ensemble.

    The counter-based generator keys increments by particle index, so an
    N-particle bundle is automatically the first-N slice of the reference
    bundle: the small systems are nested in the reference and share its
    common noise.  Distances are exact 1-d Wasserstein (the small sample is
    replicated up to the reference size, which leaves its empirical law
    unchanged).  Returns [(N, mean distance over seeds)] in the given order.
    """
    if model.d != 1:
        raise ValueError("the exact-distance trend experiment requires d = 1")
    particle_counts = list(particle_counts)
    if max(particle_counts) > reference_count:
        raise ValueError("reference_count must be >= every tested count")
    for count in particle_counts:
        if reference_count % count:
            raise ValueError("reference_count must be divisible by each count")

    totals = {count: 0.0 for count in particle_counts}
    seeds = [int(s) for s in brownian.derive_seeds(master_seed, TAG_CHAOS, num_seeds)]
    for seed in seeds:
        init_seed = int(brownian.derive_seeds(seed, TAG_INITIAL, 1)[0])
        x0_ref = model.sample_initial(np.random.default_rng(init_seed),
                                      reference_count)
        cfg = SchemeConfig(kind=scheme_kind, n=n_steps, T=horizon)
        bundle_ref = brownian.generate(seed, reference_count, model.m, model.m0,
                                       n_steps, horizon)
        ref_sorted = np.sort(
            simulate(model, cfg, bundle_ref, initial_states=x0_ref).states[:, 0]
        )
        for count in particle_counts:
            bundle = brownian.generate(seed, count, model.m, model.m0,
                                       n_steps, horizon)
            final = simulate(model, cfg, bundle, initial_states=x0_ref[:count])
            small = np.repeat(np.sort(final.states[:, 0]), reference_count // count)
            diff = small - ref_sorted
            totals[count] += math.sqrt(math.fsum(diff * diff) / reference_count)
    return [(count, totals[count] / num_seeds) for count in particle_counts]


@dataclass
class MomentReport:
    """Per-step empirical moments (1/N) sum |x_i|^p, one column per p."""

    p_values: list
    table: np.ndarray
    blow_up: Optional[tuple] = None

    @property
    def max_moments(self):
        return {p: float(self.table[:, i].max())
                for i, p in enumerate(self.p_values)}

    def csv_rows(self):
        rows = ["step,p,moment"]
        for step in range(self.table.shape[0]):
            for i, p in enumerate(self.p_values):
                rows.append(f"{step},{p},{self.table[step, i]:.17g}")
        return rows


def _ensemble_moments(states, p_values):
    norms_sq = np.sum(states * states, axis=1)
    return [math.fsum(norms_sq ** (p / 2.0)) / states.shape[0] for p in p_values]


def moment_trace(model, scheme_kind, num_particles, n_steps, p_values,
                 master_seed, horizon=1.0, initial_states=None):
    """Empirical moments along the whole trajectory, blow-up recorded.

    A blow-up does not raise here: the table is truncated at the failing
    step and the (step, particle) pair is recorded on the report, so the
    divergence of the untamed scheme is itself observable data.
    """
    p_values = list(p_values)
    bundle = brownian.generate(master_seed, num_particles, model.m, model.m0,
                               n_steps, horizon)
    cfg = SchemeConfig(kind=scheme_kind, n=n_steps, T=horizon)
    if initial_states is None:
        seed = int(brownian.derive_seeds(master_seed, brownian.STREAM_INITIAL, 1)[0])
        initial_states = model.sample_initial(np.random.default_rng(seed),
                                              num_particles)
    rows = [_ensemble_moments(np.asarray(initial_states, dtype=np.float64),
                              p_values)]
    ensemble = ParticleEnsemble(states=np.ascontiguousarray(initial_states,
                                                            dtype=np.float64))
    blow_up = None
    for k in range(n_steps):
        try:
            if scheme_kind is SchemeKind.TAMED_MILSTEIN:
                ensemble = milstein_step(model, ensemble, bundle, k, cfg)
            else:
                ensemble = euler_step(model, ensemble, bundle, k,
                                      tamed=scheme_kind is SchemeKind.TAMED_EULER)
        except BlowUpError as err:
            blow_up = (err.step, err.particle)
            break
        rows.append(_ensemble_moments(ensemble.states, p_values))
    return MomentReport(p_values=p_values, table=np.array(rows), blow_up=blow_up)
