# cython: language_level=3
"""Compiled versions of the hot kernels in ``_kernels_py``.

Signatures and semantics match the numpy module one for one.
"""
import numpy as np
cimport numpy as cnp

from scipy.linalg.cython_blas cimport ddot

cnp.import_array()


def frac_filter(x, weights):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] rev = np.ascontiguousarray(np.asarray(weights, dtype=np.float64)[::-1])
    cdef int n = <int>xv.shape[0]
    cdef int k = <int>rev.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] yv = out
    cdef int t, m, one = 1
    if n == 0 or k == 0:
        return np.zeros(n, dtype=np.float64)
    with nogil:
        # rev[k-m:] lines up with x[t-m+1 : t+1]
        for t in range(n):
            m = t + 1 if t < k else k
            yv[t] = ddot(&m, &rev[k - m], &one, <double*>&xv[t - m + 1], &one)
    return out


def frac_unfilter(y, weights):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] rev = np.ascontiguousarray(np.asarray(weights, dtype=np.float64)[::-1])
    cdef int n = <int>yv.shape[0]
    cdef int k = <int>rev.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] xv = out
    cdef int t, lags, one = 1
    if n == 0:
        return out
    with nogil:
        # rev[k-1-lags : k-1] lines up with x[t-lags : t]
        for t in range(n):
            lags = t if t < k - 1 else k - 1
            if lags:
                xv[t] = yv[t] - ddot(&lags, &rev[k - 1 - lags], &one, &xv[t - lags], &one)
            else:
                xv[t] = yv[t]
    return out


def arma_residuals(y, phi, theta):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] ph = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    cdef Py_ssize_t p = ph.shape[0]
    cdef Py_ssize_t q = th.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ev = out
    cdef Py_ssize_t t, i
    cdef double acc
    with nogil:
        for t in range(n):
            acc = yv[t]
            for i in range(1, p + 1):
                if t - i >= 0:
                    acc = acc - ph[i - 1] * yv[t - i]
            for i in range(1, q + 1):
                if t - i >= 0:
                    acc = acc - th[i - 1] * ev[t - i]
            ev[t] = acc
    return out


def evaluate_candidates(latency, requests, workloads, double cl, double cu):
    cdef const double[::1] lat = np.ascontiguousarray(latency, dtype=np.float64)
    cdef const double[::1] req = np.ascontiguousarray(requests, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(workloads, dtype=np.float64)
    cdef Py_ssize_t ny = lat.shape[0]
    cdef Py_ssize_t nh = w.shape[0]
    raw_arr = np.empty((ny, nh), dtype=np.float64)
    util_arr = np.empty((ny, nh), dtype=np.float64)
    feas_arr = np.empty((ny, nh), dtype=np.bool_)
    cdef double[:, ::1] raw = raw_arr
    cdef double[:, ::1] util = util_arr
    cdef cnp.npy_bool[:, ::1] feas = feas_arr
    cdef Py_ssize_t i, j
    cdef double work, r, u
    with nogil:
        for i in range(ny):
            for j in range(nh):
                work = lat[i] * w[j]
                r = work / req[i]
                u = work / (cl * req[i])
                if u > 1.0:
                    u = 1.0
                elif u < 0.0:
                    u = 0.0
                raw[i, j] = r
                util[i, j] = u
                feas[i, j] = r <= cl and u >= cu
    return raw_arr, util_arr, feas_arr


def window_scores(util, lnorm, Py_ssize_t upto, principal, double cu_global,
                  double cl_global_norm, bint include_debt):
    cdef const double[:, :] u = np.asarray(util, dtype=np.float64)
    cdef const double[:, :] ln = np.asarray(lnorm, dtype=np.float64)
    cdef const double[::1] pr = np.ascontiguousarray(principal, dtype=np.float64)
    cdef Py_ssize_t ny = u.shape[0]
    score_arr = np.empty(ny, dtype=np.float64)
    alpha_arr = np.empty(ny, dtype=np.float64)
    beta_arr = np.empty(ny, dtype=np.float64)
    cdef double[::1] score = score_arr
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] beta = beta_arr
    cdef Py_ssize_t i, j
    cdef double a, b, su, sl
    with nogil:
        for i in range(ny):
            a = 0.0
            b = 0.0
            su = 0.0
            sl = 0.0
            for j in range(upto):
                su = su + u[i, j]
                sl = sl + ln[i, j]
                if cu_global >= u[i, j]:
                    a = a + (cu_global - u[i, j])
                if ln[i, j] >= cl_global_norm:
                    b = b + (ln[i, j] - cl_global_norm)
            alpha[i] = a
            beta[i] = b
            score[i] = su - sl
            if include_debt:
                score[i] = score[i] - (pr[i] + a + b)
    return score_arr, alpha_arr, beta_arr
