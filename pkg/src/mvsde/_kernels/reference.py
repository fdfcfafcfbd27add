"""Pure-numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable and
the reference the compiled backend is checked against.  Both backends must
produce identical counter bits and floating-point results that agree to a
few ulp (the summation order inside contractions is the only latitude).
"""

import numpy as np

# Philox-4x32-10 round constants (Salmon et al., SC'11).
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)

_CHUNK = 1 << 20  # cells per block, caps transient memory


def _philox_block(c0, c1, c2, c3, key0, key1):
    """Run ten Philox-4x32 rounds on vectors of counter lanes.

    Returns the first two output lanes packed into one uint64 per cell.
    """
    x0, x1, x2, x3 = c0, c1, c2, c3
    k0, k1 = key0, key1
    for _ in range(10):
        p0 = _M0 * x0
        p1 = _M1 * x2
        y0 = (p1 >> np.uint64(32)) ^ x1 ^ np.uint64(k0)
        y1 = p1 & _MASK32
        y2 = (p0 >> np.uint64(32)) ^ x3 ^ np.uint64(k1)
        y3 = p0 & _MASK32
        x0, x1, x2, x3 = y0, y1, y2, y3
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return (x0 << np.uint64(32)) | x1


def philox_bits(seed, stream, n_key, num_particles, num_steps, num_components):
    """Counter-based uniform bits, one uint64 per (particle, step, component).

    The counter encodes the logical coordinates, so any sub-array can be
    regenerated independently of traversal order or worker count.
    """
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if not 0 <= stream < 1 << 16:
        raise ValueError("stream tag out of range")
    if not 0 <= num_components < 1 << 16:
        raise ValueError("component count out of range")
    key0 = seed & 0xFFFFFFFF
    key1 = seed >> 32
    total = num_particles * num_steps * num_components
    out = np.empty(total, dtype=np.uint64)
    per_particle = num_steps * num_components
    stream_bits = np.uint64(stream << 16)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        c2 = idx // np.uint64(per_particle) if per_particle else idx
        rem = idx - c2 * np.uint64(per_particle)
        c1 = rem // np.uint64(num_components)
        c0 = (rem - c1 * np.uint64(num_components)) | stream_bits
        c3 = np.full(idx.shape, np.uint64(n_key & 0xFFFFFFFF))
        out[start : start + idx.size] = _philox_block(c0, c1, c2, c3, key0, key1)
    return out.reshape(num_particles, num_steps, num_components)


def fused_euler_update(states, drift, sig, sig0, d_w, d_w0, h, denom):
    """One tamed Euler-Maruyama update, vectorised over particles.

    states (N,d), drift (N,d), sig (N,d,m), sig0 (N,d,m0), d_w (N,m),
    d_w0 (m0,), denom (N,).  Taming divides every coefficient by ``denom``.
    """
    den = denom[:, None]
    out = states + (drift / den) * h
    if sig.shape[2]:
        out = out + np.einsum("iuv,iv->iu", sig / den[:, :, None], d_w)
    if sig0.shape[2]:
        out = out + np.einsum("iuv,v->iu", sig0 / den[:, :, None], d_w0)
    return out


def milstein_lambda(dsig, dsig0, sigt, sig0t, i_ii, i_0i, i_i0, i_00):
    """Own-particle Milstein correction, vectorised over particles.

    dsig (N,d,m,d) holds the state gradient of each diffusion entry,
    dsig0 likewise for the common-noise diffusion; sigt/sig0t are the tamed
    coefficients; the i_* arrays are the within-step double integrals
    (inner driver first index, outer driver second).
    """
    n_p, d = dsig.shape[0], dsig.shape[1]
    corr = np.zeros((n_p, d))
    m = sigt.shape[2]
    m0 = sig0t.shape[2]
    if m:
        corr = corr + np.einsum("iuvk,ikw,iwv->iu", dsig, sigt, i_ii)
    if m and m0:
        corr = corr + np.einsum("iuvk,ikw,iwv->iu", dsig, sig0t, i_0i)
        corr = corr + np.einsum("iuvk,ikw,iwv->iu", dsig0, sigt, i_i0)
    if m0:
        corr = corr + np.einsum("iuvk,ikw,wv->iu", dsig0, sig0t, i_00)
    return corr
