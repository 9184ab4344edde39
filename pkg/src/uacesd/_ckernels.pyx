# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, M_PI

cnp.import_array()


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def discrete_posterior(const double complex[:, ::1] Q, const double[:, ::1] V,
                       const double complex[::1] symbols,
                       const double[::1] log_weights):
    cdef Py_ssize_t n = Q.shape[0], m = Q.shape[1], A = symbols.shape[0]
    cdef Py_ssize_t i, j, a
    mean_arr = np.empty((n, m), dtype=np.complex128)
    var_arr = np.empty((n, m), dtype=np.float64)
    beta_arr = np.empty((n, m, A), dtype=np.float64)
    cdef double complex[:, ::1] mean = mean_arr
    cdef double[:, ::1] var = var_arr
    cdef double[:, :, ::1] beta = beta_arr
    cdef double dmax, tot, v, acc
    cdef double complex q, mu
    with nogil:
        for i in range(n):
            for j in range(m):
                q = Q[i, j]
                v = V[i, j]
                dmax = -1e308
                for a in range(A):
                    beta[i, j, a] = log_weights[a] - _abs2(symbols[a] - q) / v
                    if beta[i, j, a] > dmax:
                        dmax = beta[i, j, a]
                tot = 0.0
                for a in range(A):
                    beta[i, j, a] = exp(beta[i, j, a] - dmax)
                    tot = tot + beta[i, j, a]
                mu = 0.0
                for a in range(A):
                    beta[i, j, a] = beta[i, j, a] / tot
                    mu = mu + beta[i, j, a] * symbols[a]
                acc = 0.0
                for a in range(A):
                    acc = acc + beta[i, j, a] * _abs2(symbols[a] - mu)
                mean[i, j] = mu
                var[i, j] = acc
    return mean_arr, var_arr, beta_arr


def bg_posterior(const double complex[:, ::1] Q, const double[:, ::1] V,
                 double eps, double nu, bint full):
    cdef Py_ssize_t n = Q.shape[0], m = Q.shape[1]
    cdef Py_ssize_t i, j
    g_arr = np.empty((n, m), dtype=np.complex128)
    v_arr = np.empty((n, m), dtype=np.float64)
    pi_arr = np.empty((n, m), dtype=np.float64)
    cdef double complex[:, ::1] g = g_arr
    cdef double[:, ::1] vg = v_arr
    cdef double[:, ::1] pi = pi_arr
    cdef double log_eps = log(eps), log_1meps = log1p(-eps), log_pi = log(M_PI)
    cdef double vq, a2, lon, loff, x, p, shrink, vgam, ex
    cdef double complex gam
    with nogil:
        for i in range(n):
            for j in range(m):
                vq = V[i, j]
                a2 = _abs2(Q[i, j])
                lon = log_eps - log_pi - log(vq + nu) - a2 / (vq + nu)
                loff = log_1meps - log_pi - log(vq) - a2 / vq
                x = lon - loff
                if x >= 0:
                    p = 1.0 / (1.0 + exp(-x))
                else:
                    ex = exp(x)
                    p = ex / (1.0 + ex)
                shrink = nu / (vq + nu)
                gam = Q[i, j] * shrink
                vgam = vq * nu / (vq + nu)
                g[i, j] = p * gam
                if full:
                    vg[i, j] = p * vgam + p * (1.0 - p) * _abs2(gam)
                else:
                    vg[i, j] = p * p * vgam
                pi[i, j] = p
    return g_arr, v_arr, pi_arr


def viterbi57(llr_in):
    cdef double[:, ::1] llr = np.ascontiguousarray(llr_in, dtype=np.float64)
    cdef Py_ssize_t T = llr.shape[0], t
    cdef int s, ns, u, p0, p1, c0, c1
    cdef double metric[4]
    cdef double newm[4]
    cdef double m0, m1
    back_arr = np.zeros((T, 4), dtype=np.int8)
    bits_arr = np.zeros(T, dtype=np.int8)
    cdef cnp.int8_t[:, ::1] back = back_arr
    cdef cnp.int8_t[::1] bits = bits_arr
    cdef double NEG_INF = -float("inf")
    for s in range(4):
        metric[s] = NEG_INF
    metric[0] = 0.0
    with nogil:
        for t in range(T):
            for ns in range(4):
                u = ns >> 1
                p0 = (ns & 1) << 1
                p1 = p0 | 1
                # outputs of branch p -> ns with input u
                c0 = u ^ (p0 & 1)
                c1 = u ^ (p0 >> 1) ^ (p0 & 1)
                m0 = metric[p0] + (1.0 - 2.0 * c0) * llr[t, 0] + (1.0 - 2.0 * c1) * llr[t, 1]
                c0 = u ^ (p1 & 1)
                c1 = u ^ (p1 >> 1) ^ (p1 & 1)
                m1 = metric[p1] + (1.0 - 2.0 * c0) * llr[t, 0] + (1.0 - 2.0 * c1) * llr[t, 1]
                if m1 > m0:
                    newm[ns] = m1
                    back[t, ns] = 1
                else:
                    newm[ns] = m0
                    back[t, ns] = 0
            for ns in range(4):
                metric[ns] = newm[ns]
        s = 0
        for t in range(T - 1, -1, -1):
            bits[t] = s >> 1
            s = ((s & 1) << 1) | back[t, s]
    return bits_arr
