# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled GRU recurrence kernels.

Semantics are identical to ``bcd4rec.kernels.numpy_ref``; see that module
for the contract (padding mask, gate layout, cache layout).  The
recurrent matmuls go through BLAS dgemm, the gate math is fused into C
loops, so the per-timestep Python overhead of the fallback disappears.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _sig(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


cdef void _dgemm_rm(char transa, char transb, int m, int n, int k,
                    double alpha, double *a, int lda, double *b, int ldb,
                    double beta, double *c, int ldc) nogil:
    # Row-major C(m,n) = alpha*op(A)(m,k)@op(B)(k,n) + beta*C via the
    # transpose identity on Fortran dgemm.
    dgemm(&transb, &transa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


def gru_layer_forward(double[:, :, ::1] xp, double[:, ::1] w_h,
                      double[::1] b_h, double[:, ::1] mask):
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t t_len = xp.shape[1]
    cdef Py_ssize_t h3 = xp.shape[2]
    cdef Py_ssize_t h_dim = h3 // 3

    out_arr = np.empty((n, t_len, h_dim))
    r_arr = np.empty((n, t_len, h_dim))
    z_arr = np.empty((n, t_len, h_dim))
    n_arr = np.empty((n, t_len, h_dim))
    hhn_arr = np.empty((n, t_len, h_dim))
    hprev_arr = np.empty((n, t_len, h_dim))
    h_arr = np.zeros((n, h_dim))
    hh_arr = np.empty((n, 3 * h_dim))

    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] cr = r_arr
    cdef double[:, :, ::1] cz = z_arr
    cdef double[:, :, ::1] cn = n_arr
    cdef double[:, :, ::1] chhn = hhn_arr
    cdef double[:, :, ::1] chprev = hprev_arr
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] hh = hh_arr

    cdef Py_ssize_t t, i, j
    cdef double m, r, z, c, hp, hh_r, hh_z, hh_n
    with nogil:
        for t in range(t_len):
            if h_dim > 0 and n > 0:
                _dgemm_rm(b'N', b'N', <int>n, <int>(3 * h_dim), <int>h_dim,
                          1.0, &h[0, 0], <int>h_dim, &w_h[0, 0], <int>(3 * h_dim),
                          0.0, &hh[0, 0], <int>(3 * h_dim))
            for i in range(n):
                m = mask[i, t]
                for j in range(h_dim):
                    hp = h[i, j]
                    hh_r = hh[i, j] + b_h[j]
                    hh_z = hh[i, h_dim + j] + b_h[h_dim + j]
                    hh_n = hh[i, 2 * h_dim + j] + b_h[2 * h_dim + j]
                    r = _sig(xp[i, t, j] + hh_r)
                    z = _sig(xp[i, t, h_dim + j] + hh_z)
                    c = tanh(xp[i, t, 2 * h_dim + j] + r * hh_n)
                    cr[i, t, j] = r
                    cz[i, t, j] = z
                    cn[i, t, j] = c
                    chhn[i, t, j] = hh_n
                    chprev[i, t, j] = hp
                    h[i, j] = m * ((1.0 - z) * c + z * hp) + (1.0 - m) * hp
                    out[i, t, j] = h[i, j]
    cache = {"r": r_arr, "z": z_arr, "n": n_arr, "hh_n": hhn_arr,
             "h_prev": hprev_arr}
    return out_arr, h_arr, cache


def gru_layer_backward(double[:, :, ::1] dout, double[:, ::1] dh_last,
                       double[:, ::1] w_h, double[:, ::1] mask, cache):
    cdef double[:, :, ::1] cr = cache["r"]
    cdef double[:, :, ::1] cz = cache["z"]
    cdef double[:, :, ::1] cn = cache["n"]
    cdef double[:, :, ::1] chhn = cache["hh_n"]
    cdef double[:, :, ::1] chprev = cache["h_prev"]

    cdef Py_ssize_t n = dout.shape[0]
    cdef Py_ssize_t t_len = dout.shape[1]
    cdef Py_ssize_t h_dim = dout.shape[2]

    dxp_arr = np.zeros((n, t_len, 3 * h_dim))
    dwh_arr = np.zeros((h_dim, 3 * h_dim))
    dbh_arr = np.zeros(3 * h_dim)
    dh_arr = np.array(dh_last, copy=True)
    dhh_arr = np.empty((n, 3 * h_dim))

    cdef double[:, :, ::1] dxp = dxp_arr
    cdef double[:, ::1] dwh = dwh_arr
    cdef double[::1] dbh = dbh_arr
    cdef double[:, ::1] dh = dh_arr
    cdef double[:, ::1] dhh = dhh_arr

    cdef Py_ssize_t t, i, j
    cdef double m, r, z, c, hp, hh_n, dh_t, dh_new, dh_prev
    cdef double dn, dz, dpre_n, dr, dhh_nv, dpre_r, dpre_z
    with nogil:
        for t in range(t_len - 1, -1, -1):
            for i in range(n):
                m = mask[i, t]
                for j in range(h_dim):
                    dh_t = dh[i, j] + dout[i, t, j]
                    r = cr[i, t, j]
                    z = cz[i, t, j]
                    c = cn[i, t, j]
                    hp = chprev[i, t, j]
                    hh_n = chhn[i, t, j]
                    dh_new = m * dh_t
                    dh_prev = (1.0 - m) * dh_t + dh_new * z
                    dn = dh_new * (1.0 - z)
                    dz = dh_new * (hp - c)
                    dpre_n = dn * (1.0 - c * c)
                    dr = dpre_n * hh_n
                    dhh_nv = dpre_n * r
                    dpre_r = dr * r * (1.0 - r)
                    dpre_z = dz * z * (1.0 - z)
                    dxp[i, t, j] = dpre_r
                    dxp[i, t, h_dim + j] = dpre_z
                    dxp[i, t, 2 * h_dim + j] = dpre_n
                    dhh[i, j] = dpre_r
                    dhh[i, h_dim + j] = dpre_z
                    dhh[i, 2 * h_dim + j] = dhh_nv
                    dbh[j] += dpre_r
                    dbh[h_dim + j] += dpre_z
                    dbh[2 * h_dim + j] += dhh_nv
                    dh[i, j] = dh_prev
            if h_dim > 0 and n > 0:
                # dh += dhh @ w_h.T
                _dgemm_rm(b'N', b'T', <int>n, <int>h_dim, <int>(3 * h_dim),
                          1.0, &dhh[0, 0], <int>(3 * h_dim),
                          &w_h[0, 0], <int>(3 * h_dim),
                          1.0, &dh[0, 0], <int>h_dim)
                # dw_h += h_prev.T @ dhh  (h_prev slice is strided; pass its
                # row stride as the leading dimension)
                _dgemm_rm(b'T', b'N', <int>h_dim, <int>(3 * h_dim), <int>n,
                          1.0, &chprev[0, t, 0], <int>(t_len * h_dim),
                          &dhh[0, 0], <int>(3 * h_dim),
                          1.0, &dwh[0, 0], <int>(3 * h_dim))
    return dxp_arr, dwh_arr, dbh_arr
