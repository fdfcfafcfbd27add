"""Taming transform: worked values, algebraic bounds, growth envelopes."""

import math

import numpy as np
import pytest

from mvsde.measure import EmpiricalMeasureView
from mvsde.models import builtin_double_well, builtin_three_halves
from mvsde.taming import TamingKind, check_growth_envelope, denominator, tame
from util import custom_model

ALL_KINDS = [TamingKind.EULER_HALF, TamingKind.MILSTEIN_FULL, TamingKind.NONE]


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("rho", [0.0, 2.0, 4.0])
def test_zero_state_leaves_value_unchanged(kind, rho):
    value = np.array([3.0, -1.0])
    np.testing.assert_array_equal(tame(value, np.zeros(2), rho, 16, kind), value)


def test_euler_half_worked_example():
    # n=4, rho=2, x=2 (d=1): denominator 1 + 2/sqrt(4) = 2
    assert tame(10.0, np.array([2.0]), 2.0, 4, TamingKind.EULER_HALF) == 5.0


def test_milstein_full_worked_example():
    got = tame(1.0, np.array([10.0]), 4.0, 100, TamingKind.MILSTEIN_FULL)
    assert got == pytest.approx(1.0 / 101.0, rel=1e-15)


def test_none_kind_identity():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((5, 2, 3))
    x = rng.standard_normal((5, 2))
    np.testing.assert_array_equal(tame(v, x, 4.0, 8, TamingKind.NONE), v)


def test_rho_zero_is_no_taming():
    x = np.array([123.0])
    for kind in ALL_KINDS:
        assert denominator(x, 0.0, 4, kind) == 1.0


def test_validation():
    with pytest.raises(ValueError):
        denominator(np.array([1.0]), 2.0, 0, TamingKind.EULER_HALF)
    with pytest.raises(ValueError):
        denominator(np.array([1.0]), -1.0, 4, TamingKind.EULER_HALF)


def test_positive_homogeneity():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(3)
    v = rng.standard_normal((2, 3))
    base = tame(v, x, 2.0, 16, TamingKind.EULER_HALF)
    for alpha in (0.0, 0.5, 2.0, 4.0):  # powers of two scale exactly
        np.testing.assert_array_equal(
            tame(alpha * v, x, 2.0, 16, TamingKind.EULER_HALF), alpha * base
        )
    alpha = 1.7
    np.testing.assert_allclose(
        tame(alpha * v, x, 2.0, 16, TamingKind.EULER_HALF), alpha * base, rtol=1e-15
    )


def test_tamed_never_exceeds_raw():
    rng = np.random.default_rng(2)
    for kind in (TamingKind.EULER_HALF, TamingKind.MILSTEIN_FULL):
        for _ in range(50):
            x = rng.standard_normal(4) * 10.0 ** rng.uniform(-3, 5)
            v = rng.standard_normal(4)
            tamed = tame(v, x, 4.0, int(rng.integers(1, 1 << 12)), kind)
            assert np.all(np.abs(tamed) <= np.abs(v) + 1e-300)


def test_denominator_decreases_to_one_in_n():
    x = np.array([7.0, -2.0])
    for kind in (TamingKind.EULER_HALF, TamingKind.MILSTEIN_FULL):
        dens = [float(denominator(x, 3.0, 2**j, kind)) for j in range(21)]
        assert all(a > b for a, b in zip(dens, dens[1:]))
        assert dens[-1] == pytest.approx(1.0, abs=2e-2)
        v = np.array([5.0])
        tamed = [float(tame(v, x, 3.0, 2**j, kind)[0]) for j in range(21)]
        assert all(t <= 5.0 for t in tamed)
        assert tamed[-1] == pytest.approx(5.0, rel=2e-2)


def test_euler_half_algebraic_bound_nonzero_state():
    # denominator >= n^{-1/2}|x|^{rho/2}, so the tamed value is at most
    # sqrt(n) |v| / |x|^{rho/2}
    rng = np.random.default_rng(3)
    rho = 4.0
    for _ in range(100):
        x = rng.standard_normal(2) * 10.0 ** rng.uniform(-2, 4)
        n = int(rng.integers(1, 1 << 14))
        v = rng.standard_normal(2) * 10.0 ** rng.uniform(-2, 6)
        tamed = tame(v, x, rho, n, TamingKind.EULER_HALF)
        bound = math.sqrt(n) * np.abs(v) / np.linalg.norm(x) ** (rho / 2)
        assert np.all(np.abs(tamed) <= bound * (1 + 1e-12))


def test_double_well_tamed_drift_below_raw_everywhere():
    model = builtin_double_well()
    report = check_growth_envelope(model, 64, TamingKind.EULER_HALF, samples=512)
    assert report.passed
    # min-branch: the tamed magnitude never exceeds the raw magnitude, so
    # every ratio against min{rate envelope, raw} is at most  max(1, K_rate)
    assert report.max_ratios["drift"] < 10.0


def test_double_well_envelope_at_large_state_direct():
    # x = 1e3, one-particle ensemble at the origin: drift ~ -x^3, tamed by
    # 1 + x^2/sqrt(n); the n^{1/2}(1 + |x|) envelope holds with K < 2
    model = builtin_double_well()
    n = 64
    x = np.array([[1000.0]])
    mu = EmpiricalMeasureView(np.zeros((1, 1)))
    raw = model.drift(0.0, x, mu)
    assert raw[0, 0] == pytest.approx(-999999000.0)
    tamed = tame(raw, x, model.rho, n, TamingKind.EULER_HALF)[0, 0]
    envelope = math.sqrt(n) * (1.0 + 1000.0)
    ratio = abs(tamed) / envelope
    assert ratio < 2.0
    assert ratio == pytest.approx(0.999, abs=5e-3)


def test_rho_zero_model_envelope_trivial():
    lipschitz = custom_model(
        rho=0.0,
        drift=lambda t, x, mu: -x,
        diffusion=lambda t, x, mu: np.ones(x.shape[:-1] + (1, 1)),
    )
    report = check_growth_envelope(lipschitz, 64, TamingKind.EULER_HALF, samples=256)
    assert report.passed
    assert report.max_ratios["drift"] <= 1.0 + 1e-12


def test_envelope_reports_nonfinite():
    bad = custom_model(
        rho=2.0,
        drift=lambda t, x, mu: np.where(np.abs(x) > 10.0, np.inf, -x),
    )
    report = check_growth_envelope(bad, 8, TamingKind.EULER_HALF, samples=256)
    assert report.nonfinite > 0
    assert not report.passed


@pytest.mark.parametrize("kind", [TamingKind.EULER_HALF, TamingKind.MILSTEIN_FULL])
def test_builtin_envelopes_smoke(kind):
    for model in (builtin_double_well(), builtin_three_halves()):
        report = check_growth_envelope(model, 256, kind, samples=512)
        assert report.passed, (model.name, report.max_ratios)
