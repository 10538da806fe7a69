"""Pure-numpy implementations of the hot kernels.

These define the reference semantics; the Cython module must reproduce them
bit for bit (same Philox rounds, same inverse-CDF, same operation order in
the Euler recursions).
"""
import numpy as np
from scipy.special import ndtri

MASK32 = np.uint64(0xFFFFFFFF)
PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
PHILOX_M1 = np.uint64(0xCA5A826395121157)
PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
KEY_TAG = 0x5EED5EED5EED5EED
TWO_M53 = 2.0 ** -53

BACKEND = "numpy"


def _mulhilo(m, x):
    """128-bit product of a uint64 constant and a uint64 array, as (hi, lo)."""
    m_lo = m & MASK32
    m_hi = m >> np.uint64(32)
    x_lo = x & MASK32
    x_hi = x >> np.uint64(32)
    t = m_lo * x_lo
    u = m_hi * x_lo + (t >> np.uint64(32))
    v = m_lo * x_hi + (u & MASK32)
    hi = m_hi * x_hi + (u >> np.uint64(32)) + (v >> np.uint64(32))
    return hi, m * x


def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64-10 block function on broadcastable uint64 arrays."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    with np.errstate(over="ignore"):
        for rnd in range(10):
            if rnd:
                k0 = k0 + PHILOX_W0
                k1 = k1 + PHILOX_W1
            hi0, lo0 = _mulhilo(PHILOX_M0, c0)
            hi1, lo1 = _mulhilo(PHILOX_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def uniforms(seed, stream, path0, n_paths, n_steps, step0=0):
    """Open-interval uniforms indexed by (seed, stream, path, step)."""
    out = np.empty((n_paths, n_steps), dtype=np.float64)
    if n_paths == 0 or n_steps == 0:
        return out
    first_block = step0 // 4
    last_block = (step0 + n_steps - 1) // 4
    blocks = np.arange(first_block, last_block + 1, dtype=np.uint64)
    paths = np.uint64(path0) + np.arange(n_paths, dtype=np.uint64)
    words = philox4x64(
        blocks[None, :],
        paths[:, None],
        np.uint64(stream),
        np.uint64(0),
        seed & 0xFFFFFFFFFFFFFFFF,
        KEY_TAG,
    )
    raw = np.stack(words, axis=-1).reshape(n_paths, -1)
    offset = step0 - 4 * first_block
    raw = raw[:, offset:offset + n_steps]
    out[...] = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * TWO_M53
    return out


def normals(seed, stream, path0, n_paths, n_steps, step0=0):
    """Standard normals by inverse CDF of :func:`uniforms`."""
    return ndtri(uniforms(seed, stream, path0, n_paths, n_steps, step0))


def euler_gbm(x0, y0, rh, sig, sqh, cd, cw, z):
    """Euler recursion for X and its tangent Y.

    ``x <- x + rh*x + (x*sig)*w`` and
    ``y <- y + rh*y + cd*x + (y*sig + cw*x)*w`` with ``w = sqh*z``.
    """
    z = np.asarray(z, dtype=np.float64)
    m, n = z.shape
    X = np.empty((m, n + 1))
    Y = np.empty((m, n + 1))
    X[:, 0] = x0
    Y[:, 0] = y0
    x = X[:, 0]
    y = Y[:, 0]
    for k in range(n):
        w = sqh * z[:, k]
        xn = x + rh * x + (x * sig) * w
        yn = y + rh * y + cd * x + (y * sig + cw * x) * w
        X[:, k + 1] = xn
        Y[:, k + 1] = yn
        x, y = xn, yn
    return X, Y


def inner_terminal(seed, stream, path0, s0, steps, m_inner, rh, sig, sqh, lo, hi):
    """Terminal spots and barrier survival of inner Euler paths.

    Start ``p`` runs ``m_inner`` paths from ``s0[p]`` for ``steps[p]`` steps;
    inner path ``j`` of start ``p`` uses RNG path index ``path0 + p*m_inner + j``.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    steps = np.asarray(steps, dtype=np.int64)
    P = s0.shape[0]
    term = np.empty((P, m_inner))
    alive = np.empty((P, m_inner))
    for p in range(P):
        x = np.full(m_inner, s0[p])
        ok = np.ones(m_inner, dtype=bool)
        ns = int(steps[p])
        if ns > 0:
            z = normals(seed, stream, path0 + p * m_inner, m_inner, ns)
            for k in range(ns):
                w = sqh * z[:, k]
                x = x + rh * x + (x * sig) * w
                ok &= (x >= lo) & (x <= hi)
        term[p] = x
        alive[p] = ok
    return term, alive
