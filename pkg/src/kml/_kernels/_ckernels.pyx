# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the collision operator.

Both kernels work on batched velocity blocks laid out as ``(n1, n2, n3, B)``
with the batch axis contiguous, so that for fixed stencil entry and fixed
``(i1, i2)`` the run over ``(i3, b)`` is one contiguous stretch of memory.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from "_inner.h" nogil:
    void kml_gain_run(const double *pf, const double *pg, double *po, Py_ssize_t run,
                      const Py_ssize_t *so, const double *a, const double *b, double w)
    void kml_axpy_run(const double *pg, double *po, Py_ssize_t run, double k)
    void kml_lerp_pass(const double *inp, double *out, Py_ssize_t n, Py_ssize_t stride,
                       Py_ssize_t b, double fr)

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


def gain_accumulate(const f64[:, :, :, ::1] F, const f64[:, :, :, ::1] G,
                    const f64[::1] w, const i64[:, ::1] o1, const i64[:, ::1] o2,
                    const f64[:, ::1] c1, const f64[:, ::1] c2,
                    const i64[:, ::1] lo, const i64[:, ::1] hi,
                    f64[:, :, :, ::1] out):
    """``out[i] += w_e * interp(F, i + o1_e) * interp(G, i + o2_e)`` over all entries.

    ``F`` and ``G`` are padded by one zero cell on every side of each
    velocity axis; ``o1``, ``o2`` are lower-corner offsets in padded
    coordinates and ``c1``, ``c2`` the eight non-negative corner weights.
    """
    cdef Py_ssize_t P = F.shape[0], B = F.shape[3]
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t E = w.shape[0]
    cdef Py_ssize_t s3 = B, s2 = P * B, s1 = P * P * B
    cdef Py_ssize_t t2 = n * B, t1 = n * n * B
    cdef Py_ssize_t e, i1, i2, run
    cdef Py_ssize_t so[8]
    cdef const f64 *pf
    cdef const f64 *pg
    cdef f64 *po
    cdef const f64 *Fp = &F[0, 0, 0, 0]
    cdef const f64 *Gp = &G[0, 0, 0, 0]
    cdef f64 *Op = &out[0, 0, 0, 0]
    cdef f64 we

    so[0] = 0; so[1] = s3; so[2] = s2; so[3] = s2 + s3
    so[4] = s1; so[5] = s1 + s3; so[6] = s1 + s2; so[7] = s1 + s2 + s3

    with nogil:
        for e in range(E):
            we = w[e]
            run = (hi[e, 2] - lo[e, 2] + 1) * B
            for i1 in range(lo[e, 0], hi[e, 0] + 1):
                for i2 in range(lo[e, 1], hi[e, 1] + 1):
                    pf = Fp + (i1 + o1[e, 0]) * s1 + (i2 + o1[e, 1]) * s2 + (lo[e, 2] + o1[e, 2]) * s3
                    pg = Gp + (i1 + o2[e, 0]) * s1 + (i2 + o2[e, 1]) * s2 + (lo[e, 2] + o2[e, 2]) * s3
                    po = Op + i1 * t1 + i2 * t2 + lo[e, 2] * B
                    kml_gain_run(pf, pg, po, run, so, &c1[e, 0], &c2[e, 0], we)


def convolve_accumulate(const f64[:, :, :, ::1] G, const f64[::1] k,
                        const i64[:, ::1] d, f64[:, :, :, ::1] out):
    """``out[i] += k_e * G[i - d_e]`` for every offset with ``i, i - d_e`` in the box."""
    cdef Py_ssize_t n = G.shape[0], B = G.shape[3]
    cdef Py_ssize_t E = k.shape[0]
    cdef Py_ssize_t t2 = n * B, t1 = n * n * B
    cdef Py_ssize_t e, i1, i2, run, l1, l2, l3, h1, h2, h3
    cdef const f64 *Gp = &G[0, 0, 0, 0]
    cdef f64 *Op = &out[0, 0, 0, 0]
    cdef const f64 *pg
    cdef f64 *po
    cdef f64 ke

    with nogil:
        for e in range(E):
            ke = k[e]
            l1 = d[e, 0] if d[e, 0] > 0 else 0
            l2 = d[e, 1] if d[e, 1] > 0 else 0
            l3 = d[e, 2] if d[e, 2] > 0 else 0
            h1 = n - 1 + d[e, 0] if d[e, 0] < 0 else n - 1
            h2 = n - 1 + d[e, 1] if d[e, 1] < 0 else n - 1
            h3 = n - 1 + d[e, 2] if d[e, 2] < 0 else n - 1
            run = (h3 - l3 + 1) * B
            for i1 in range(l1, h1 + 1):
                for i2 in range(l2, h2 + 1):
                    pg = Gp + (i1 - d[e, 0]) * t1 + (i2 - d[e, 1]) * t2 + (l3 - d[e, 2]) * B
                    po = Op + i1 * t1 + i2 * t2 + l3 * B
                    kml_axpy_run(pg, po, run, ke)


def advect_blocks(const f64[:, ::1] A, const i64[:, ::1] base, const f64[:, ::1] fr,
                  f64[:, ::1] out):
    """Trilinear shift of each row, an ``n^3`` spatial block, by its own offsets.

    Row ``q`` is sampled at ``i + base[q] + fr[q]`` (per axis), zero outside.
    """
    cdef Py_ssize_t Q = A.shape[0], S = A.shape[1]
    cdef Py_ssize_t n = <Py_ssize_t>(round(S ** (1.0 / 3.0)))
    cdef Py_ssize_t q
    if n * n * n != S:
        raise ValueError("rows must hold cubic spatial blocks")
    cdef f64[::1] t1 = np.empty(S)
    cdef f64[::1] t2 = np.empty(S)
    with nogil:
        for q in range(Q):
            kml_lerp_pass(&A[q, 0], &t1[0], n, n * n, base[q, 0], fr[q, 0])
            kml_lerp_pass(&t1[0], &t2[0], n, n, base[q, 1], fr[q, 1])
            kml_lerp_pass(&t2[0], &out[q, 0], n, 1, base[q, 2], fr[q, 2])
