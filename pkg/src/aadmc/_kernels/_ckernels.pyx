# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels``; same semantics, bit for bit."""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from scipy.special.cython_special cimport ndtri

cnp.import_array()

BACKEND = "cython"

cdef uint64_t M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t M1 = 0xCA5A826395121157ULL
cdef uint64_t W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t W1 = 0xBB67AE8584CAA73BULL
cdef uint64_t KEY_TAG = 0x5EED5EED5EED5EEDULL
cdef double TWO_M53 = 1.1102230246251565e-16


cdef inline void mulhilo(uint64_t m, uint64_t x, uint64_t* hi, uint64_t* lo) noexcept nogil:
    cdef uint64_t m_lo = m & 0xFFFFFFFFULL
    cdef uint64_t m_hi = m >> 32
    cdef uint64_t x_lo = x & 0xFFFFFFFFULL
    cdef uint64_t x_hi = x >> 32
    cdef uint64_t t = m_lo * x_lo
    cdef uint64_t u = m_hi * x_lo + (t >> 32)
    cdef uint64_t v = m_lo * x_hi + (u & 0xFFFFFFFFULL)
    hi[0] = m_hi * x_hi + (u >> 32) + (v >> 32)
    lo[0] = m * x


cdef inline void philox(uint64_t* c, uint64_t k0, uint64_t k1) noexcept nogil:
    cdef int rnd
    cdef uint64_t hi0, lo0, hi1, lo1, a, b, d, e
    for rnd in range(10):
        if rnd:
            k0 = k0 + W0
            k1 = k1 + W1
        mulhilo(M0, c[0], &hi0, &lo0)
        mulhilo(M1, c[2], &hi1, &lo1)
        a = hi1 ^ c[1] ^ k0
        b = lo1
        d = hi0 ^ c[3] ^ k1
        e = lo0
        c[0] = a
        c[1] = b
        c[2] = d
        c[3] = e


def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64-10 on broadcastable uint64 arrays (slow path, for tests)."""
    arrs = np.broadcast_arrays(*[np.asarray(a, dtype=np.uint64) for a in (c0, c1, c2, c3)])
    shape = arrs[0].shape
    f = [np.ascontiguousarray(a).ravel() for a in arrs]
    out = [np.empty_like(f[0]) for _ in range(4)]
    cdef uint64_t c[4]
    cdef Py_ssize_t i
    cdef uint64_t key0 = <uint64_t>k0
    cdef uint64_t key1 = <uint64_t>k1
    for i in range(f[0].shape[0]):
        c[0] = f[0][i]; c[1] = f[1][i]; c[2] = f[2][i]; c[3] = f[3][i]
        philox(c, key0, key1)
        out[0][i] = c[0]; out[1][i] = c[1]; out[2][i] = c[2]; out[3][i] = c[3]
    return tuple(o.reshape(shape) for o in out)


cdef void _fill_uniforms(double[:, ::1] out, uint64_t seed, uint64_t stream,
                         uint64_t path0, Py_ssize_t step0, bint gaussian) noexcept nogil:
    cdef Py_ssize_t n_paths = out.shape[0]
    cdef Py_ssize_t n_steps = out.shape[1]
    cdef Py_ssize_t p, s, step, j
    cdef uint64_t c[4]
    cdef uint64_t blk
    cdef double u
    for p in range(n_paths):
        blk = 0xFFFFFFFFFFFFFFFFULL
        for s in range(n_steps):
            step = step0 + s
            if <uint64_t>(step // 4) != blk or s == 0:
                blk = <uint64_t>(step // 4)
                c[0] = blk
                c[1] = path0 + <uint64_t>p
                c[2] = stream
                c[3] = 0
                philox(c, seed, KEY_TAG)
            j = step % 4
            u = (<double>(c[j] >> 11) + 0.5) * TWO_M53
            out[p, s] = ndtri(u) if gaussian else u


def uniforms(seed, stream, path0, Py_ssize_t n_paths, Py_ssize_t n_steps, Py_ssize_t step0=0):
    out = np.empty((n_paths, n_steps), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef uint64_t sd = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t st = <uint64_t>stream
    cdef uint64_t p0 = <uint64_t>path0
    with nogil:
        _fill_uniforms(view, sd, st, p0, step0, False)
    return out


def normals(seed, stream, path0, Py_ssize_t n_paths, Py_ssize_t n_steps, Py_ssize_t step0=0):
    out = np.empty((n_paths, n_steps), dtype=np.float64)
    cdef double[:, ::1] view = out
    cdef uint64_t sd = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t st = <uint64_t>stream
    cdef uint64_t p0 = <uint64_t>path0
    with nogil:
        _fill_uniforms(view, sd, st, p0, step0, True)
    return out


def euler_gbm(x0, y0, double rh, double sig, double sqh, double cd, double cw, z):
    cdef double[:, ::1] Z = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t m = Z.shape[0]
    cdef Py_ssize_t n = Z.shape[1]
    X = np.empty((m, n + 1))
    Y = np.empty((m, n + 1))
    cdef double[:, ::1] Xv = X
    cdef double[:, ::1] Yv = Y
    cdef double[::1] x0v = np.broadcast_to(np.asarray(x0, dtype=np.float64), (m,)).copy()
    cdef double[::1] y0v = np.broadcast_to(np.asarray(y0, dtype=np.float64), (m,)).copy()
    cdef Py_ssize_t i, k
    cdef double x, y, w, xn, yn
    with nogil:
        for i in range(m):
            x = x0v[i]
            y = y0v[i]
            Xv[i, 0] = x
            Yv[i, 0] = y
            for k in range(n):
                w = sqh * Z[i, k]
                xn = x + rh * x + (x * sig) * w
                yn = y + rh * y + cd * x + (y * sig + cw * x) * w
                Xv[i, k + 1] = xn
                Yv[i, k + 1] = yn
                x = xn
                y = yn
    return X, Y


def inner_terminal(seed, stream, path0, s0, steps, Py_ssize_t m_inner,
                   double rh, double sig, double sqh, double lo, double hi):
    cdef double[::1] S0 = np.ascontiguousarray(s0, dtype=np.float64)
    cdef int64_t[::1] NS = np.ascontiguousarray(steps, dtype=np.int64)
    cdef Py_ssize_t P = S0.shape[0]
    term = np.empty((P, m_inner))
    alive = np.empty((P, m_inner))
    cdef double[:, ::1] T = term
    cdef double[:, ::1] A = alive
    cdef uint64_t sd = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t st = <uint64_t>stream
    cdef uint64_t p0 = <uint64_t>path0
    cdef Py_ssize_t p, j, k, ns
    cdef uint64_t c[4]
    cdef double x, w, z, u
    cdef bint ok
    with nogil:
        for p in range(P):
            ns = NS[p]
            for j in range(m_inner):
                x = S0[p]
                ok = True
                for k in range(ns):
                    if k % 4 == 0:
                        c[0] = <uint64_t>(k // 4)
                        c[1] = p0 + <uint64_t>(p * m_inner + j)
                        c[2] = st
                        c[3] = 0
                        philox(c, sd, KEY_TAG)
                    u = (<double>(c[k % 4] >> 11) + 0.5) * TWO_M53
                    z = ndtri(u)
                    w = sqh * z
                    x = x + rh * x + (x * sig) * w
                    if not (x >= lo and x <= hi):
                        ok = False
                T[p, j] = x
                A[p, j] = 1.0 if ok else 0.0
    return term, alive
