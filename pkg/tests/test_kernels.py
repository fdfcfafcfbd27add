"""Backend kernels: known-answer vectors, oracles, and backend parity."""

import numpy as np
import pytest

from mvsde import _kernels
from mvsde._kernels import reference

BACKENDS = sorted(_kernels.available_backends().items())
BACKEND_IDS = [name for name, _ in BACKENDS]


# Canonical Philox-4x32-10 vectors (counter lanes, key words, output lanes).
PHILOX_VECTORS = [
    ((0, 0, 0, 0), (0, 0),
     (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF),
     (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expected", PHILOX_VECTORS)
def test_philox_known_answer(ctr, key, expected):
    lanes = [np.array([c], dtype=np.uint64) for c in ctr]
    packed = reference._philox_block(*lanes, key[0], key[1])[0]
    # the generator packs output lanes 0 and 1 into one 64-bit word
    assert int(packed >> np.uint64(32)) == expected[0]
    assert int(packed & np.uint64(0xFFFFFFFF)) == expected[1]


@pytest.mark.parametrize("name,impl", BACKENDS, ids=BACKEND_IDS)
def test_philox_bits_shape_and_determinism(name, impl):
    a = impl.philox_bits(1234, 1, 64, 3, 5, 2)
    b = impl.philox_bits(1234, 1, 64, 3, 5, 2)
    assert a.shape == (3, 5, 2) and a.dtype == np.uint64
    assert np.array_equal(a, b)
    c = impl.philox_bits(1235, 1, 64, 3, 5, 2)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("name,impl", BACKENDS, ids=BACKEND_IDS)
def test_philox_bits_coordinates_not_order(name, impl):
    # cells are keyed by logical coordinates: a smaller array is a slice of
    # a bigger one, which is what makes worker count irrelevant
    small = impl.philox_bits(42, 1, 16, 4, 6, 2)
    big = impl.philox_bits(42, 1, 16, 9, 8, 2)
    assert np.array_equal(small, big[:4, :6, :])


def test_philox_bits_streams_and_keys_disjoint():
    a = reference.philox_bits(42, 1, 16, 2, 4, 1)
    b = reference.philox_bits(42, 2, 16, 2, 4, 1)
    c = reference.philox_bits(42, 1, 32, 2, 4, 1)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_philox_bits_validation():
    with pytest.raises(ValueError):
        reference.philox_bits(-1, 1, 16, 1, 1, 1)
    with pytest.raises(ValueError):
        reference.philox_bits(0, 1 << 16, 16, 1, 1, 1)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backend_parity_philox():
    impls = dict(BACKENDS)
    a = impls["reference"].philox_bits(987654321, 2, 128, 7, 9, 3)
    b = impls["compiled"].philox_bits(987654321, 2, 128, 7, 9, 3)
    assert np.array_equal(a, b)


def _random_update_inputs(rng, n_p=11, d=3, m=2, m0=2):
    return dict(
        states=rng.standard_normal((n_p, d)),
        drift=rng.standard_normal((n_p, d)),
        sig=rng.standard_normal((n_p, d, m)),
        sig0=rng.standard_normal((n_p, d, m0)),
        d_w=rng.standard_normal((n_p, m)),
        d_w0=rng.standard_normal(m0),
        h=0.125,
        denom=1.0 + rng.random(n_p),
    )


def _loop_euler_update(states, drift, sig, sig0, d_w, d_w0, h, denom):
    n_p, d = states.shape
    out = np.empty_like(states)
    for i in range(n_p):
        for u in range(d):
            acc = states[i, u] + drift[i, u] / denom[i] * h
            acc += sum(sig[i, u, v] / denom[i] * d_w[i, v]
                       for v in range(sig.shape[2]))
            acc += sum(sig0[i, u, v] / denom[i] * d_w0[v]
                       for v in range(sig0.shape[2]))
            out[i, u] = acc
    return out


@pytest.mark.parametrize("name,impl", BACKENDS, ids=BACKEND_IDS)
@pytest.mark.parametrize("m,m0", [(2, 2), (1, 0), (0, 1)])
def test_fused_euler_update_against_loop(name, impl, m, m0):
    rng = np.random.default_rng(5)
    kw = _random_update_inputs(rng, m=m, m0=m0)
    got = impl.fused_euler_update(**kw)
    want = _loop_euler_update(**kw)
    np.testing.assert_allclose(got, want, rtol=1e-13, atol=0)


def _loop_milstein_lambda(dsig, dsig0, sigt, sig0t, i_ii, i_0i, i_i0, i_00):
    n_p, d = dsig.shape[0], dsig.shape[1]
    m, m0 = sigt.shape[2], sig0t.shape[2]
    out = np.zeros((n_p, d))
    for i in range(n_p):
        for u in range(d):
            for v in range(m):
                for k in range(d):
                    for w in range(m):
                        out[i, u] += dsig[i, u, v, k] * sigt[i, k, w] * i_ii[i, w, v]
                    for w in range(m0):
                        out[i, u] += dsig[i, u, v, k] * sig0t[i, k, w] * i_0i[i, w, v]
            for v in range(m0):
                for k in range(d):
                    for w in range(m):
                        out[i, u] += dsig0[i, u, v, k] * sigt[i, k, w] * i_i0[i, w, v]
                    for w in range(m0):
                        out[i, u] += dsig0[i, u, v, k] * sig0t[i, k, w] * i_00[w, v]
    return out


@pytest.mark.parametrize("name,impl", BACKENDS, ids=BACKEND_IDS)
@pytest.mark.parametrize("m,m0", [(2, 1), (1, 0), (2, 2)])
def test_milstein_lambda_against_loop(name, impl, m, m0):
    rng = np.random.default_rng(17)
    n_p, d = 7, 2
    kw = dict(
        dsig=rng.standard_normal((n_p, d, m, d)),
        dsig0=rng.standard_normal((n_p, d, m0, d)),
        sigt=rng.standard_normal((n_p, d, m)),
        sig0t=rng.standard_normal((n_p, d, m0)),
        i_ii=rng.standard_normal((n_p, m, m)),
        i_0i=rng.standard_normal((n_p, m0, m)),
        i_i0=rng.standard_normal((n_p, m, m0)),
        i_00=rng.standard_normal((m0, m0)),
    )
    got = impl.milstein_lambda(**kw)
    want = _loop_milstein_lambda(**kw)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_backend_parity_float_kernels():
    impls = dict(BACKENDS)
    rng = np.random.default_rng(3)
    kw = _random_update_inputs(rng)
    a = impls["reference"].fused_euler_update(**kw)
    b = impls["compiled"].fused_euler_update(**kw)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=0)
