# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scalar-GCN kernels over a CSR normalized adjacency (self loops included)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

BACKEND = "cython"


cdef inline double _sigmoid(double t) nogil:
    cdef double e
    if t >= 0:
        return 1.0 / (1.0 + exp(-t))
    e = exp(t)
    return e / (1.0 + e)


cdef void _spmv(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
                const double[:] data, const double[:] x, double[:] out) nogil:
    cdef Py_ssize_t i, k, n = indptr.shape[0] - 1
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc = acc + data[k] * x[indices[k]]
        out[i] = acc


def propagate(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
              const double[:] data, const double[:] x):
    out = np.empty(indptr.shape[0] - 1, dtype=np.float64)
    cdef double[:] o = out
    with nogil:
        _spmv(indptr, indices, data, x, o)
    return out


def forward(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
            const double[:] data, const double[:] z1, const double[:] keep,
            double w1, double w2):
    cdef Py_ssize_t i, n = z1.shape[0]
    cdef double t
    h1_arr = np.empty(n, dtype=np.float64)
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] h1 = h1_arr
    cdef double[:] out = out_arr
    with nogil:
        for i in range(n):
            t = w1 * z1[i]
            h1[i] = t * keep[i] if t > 0 else 0.0
        _spmv(indptr, indices, data, h1, out)
        for i in range(n):
            out[i] = _sigmoid(w2 * out[i])
    return out_arr


def loss_and_grad(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
                  const double[:] data, const double[:] z1, const double[:] y,
                  const cnp.uint8_t[:] mask, const double[:] keep,
                  double w1, double w2, double eps):
    """Masked mean BCE of the two-layer forward pass and its gradient w.r.t. (w1, w2)."""
    cdef Py_ssize_t i, n = z1.shape[0]
    cdef double t, o, loss = 0.0, g1 = 0.0, g2 = 0.0, m = 0.0
    h1_arr = np.empty(n, dtype=np.float64)
    z2_arr = np.empty(n, dtype=np.float64)
    dz_arr = np.zeros(n, dtype=np.float64)
    dh_arr = np.empty(n, dtype=np.float64)
    cdef double[:] h1 = h1_arr
    cdef double[:] z2 = z2_arr
    cdef double[:] dz = dz_arr
    cdef double[:] dh = dh_arr
    with nogil:
        for i in range(n):
            if mask[i]:
                m += 1.0
        if m == 0.0:
            with gil:
                raise ValueError("empty loss mask")
        for i in range(n):
            t = w1 * z1[i]
            h1[i] = t * keep[i] if t > 0 else 0.0
        _spmv(indptr, indices, data, h1, z2)
        for i in range(n):
            if not mask[i]:
                continue
            o = _sigmoid(w2 * z2[i])
            if o < eps:
                loss = loss - (y[i] * log(eps) + (1.0 - y[i]) * log(1.0 - eps))
            elif o > 1.0 - eps:
                loss = loss - (y[i] * log(1.0 - eps) + (1.0 - y[i]) * log(eps))
            else:
                loss = loss - (y[i] * log(o) + (1.0 - y[i]) * log(1.0 - o))
                dz[i] = (o - y[i]) / m
            g2 = g2 + dz[i] * z2[i]
            dz[i] = dz[i] * w2
        _spmv(indptr, indices, data, dz, dh)
        for i in range(n):
            if w1 * z1[i] > 0:
                g1 = g1 + dh[i] * keep[i] * z1[i]
    return loss / m, g1, g2
