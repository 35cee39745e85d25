# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numerical kernels.

Mirrors ``reference`` function by function; see there for semantics.
"""

from libc.math cimport INFINITY, NAN, erfc, exp, fabs, isnan, log, log1p, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double LOG_2PI = log(2.0 * 3.14159265358979323846)
cdef double INV_SQRT_PI = 1.0 / sqrt(3.14159265358979323846)
cdef double INV_SQRT_2PI = 1.0 / sqrt(2.0 * 3.14159265358979323846)
cdef double SQRT1_2 = sqrt(0.5)
cdef double SQRT2 = sqrt(2.0)


cdef inline double _ndtr(double z) noexcept nogil:
    return 0.5 * erfc(-z * SQRT1_2)


cdef inline double _log_ndtr(double z) noexcept nogil:
    # erfc covers the useful range; asymptotic Mills series below its underflow
    cdef double zi, series
    if z > 6.0:
        return log1p(-0.5 * erfc(z * SQRT1_2))
    if z > -37.0:
        return log(0.5 * erfc(-z * SQRT1_2))
    zi = 1.0 / (z * z)
    series = 1.0 + zi * (-1.0 + zi * (3.0 + zi * (-15.0 + zi * 105.0)))
    return -0.5 * z * z - 0.5 * LOG_2PI - log(-z) + log(series)


cdef inline double _std_pdf(double z) noexcept nogil:
    return INV_SQRT_2PI * exp(-0.5 * z * z)


cdef inline double _tbn_logpdf_one(double mu_w, double mu_t,
                                   double s_ww, double s_wt, double s_tt,
                                   double y_w, double y_t) noexcept nogil:
    cdef double det = s_ww * s_tt - s_wt * s_wt
    cdef double dw, dt, quad
    if not (s_ww > 0.0 and s_tt > 0.0 and det > 0.0):
        return NAN
    if y_w < 0.0:
        return -INFINITY
    dw = y_w - mu_w
    dt = y_t - mu_t
    quad = (s_tt * dw * dw - 2.0 * s_wt * dw * dt + s_ww * dt * dt) / det
    return -LOG_2PI - 0.5 * log(det) - 0.5 * quad - _log_ndtr(mu_w / sqrt(s_ww))


def tbn_logpdf_arr(double[::1] mu_w, double[::1] mu_t,
                   double[::1] s_ww, double[::1] s_wt, double[::1] s_tt,
                   double[::1] y_w, double[::1] y_t):
    cdef Py_ssize_t n = mu_w.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _tbn_logpdf_one(mu_w[i], mu_t[i], s_ww[i], s_wt[i], s_tt[i],
                                    y_w[i], y_t[i])
    return out


def emos_mean_log_score(double[::1] theta, double[:, :, ::1] group_sums,
                        double[:, ::1] ens_cov, double[:, ::1] obs):
    cdef Py_ssize_t n = group_sums.shape[0]
    cdef Py_ssize_t m = group_sums.shape[1]
    cdef double a0 = theta[0], a1 = theta[1]
    cdef Py_ssize_t cfo = 2 + 4 * m
    cdef double cf00 = theta[cfo], cf01 = theta[cfo + 1]
    cdef double cf10 = theta[cfo + 2], cf11 = theta[cfo + 3]
    cdef double d00 = theta[cfo + 4], d01 = theta[cfo + 5]
    cdef double d10 = theta[cfo + 6], d11 = theta[cfo + 7]
    cdef double c_ww = cf00 * cf00 + cf01 * cf01
    cdef double c_wt = cf00 * cf10 + cf01 * cf11
    cdef double c_tt = cf10 * cf10 + cf11 * cf11
    cdef double mu_w, mu_t, gw, gt, s_ww, s_wt, s_tt, t_ww, t_wt, t_tt, v
    cdef double total = 0.0
    cdef Py_ssize_t i, k
    cdef bint bad = 0
    with nogil:
        for i in range(n):
            mu_w = a0
            mu_t = a1
            for k in range(m):
                gw = group_sums[i, k, 0]
                gt = group_sums[i, k, 1]
                mu_w += theta[2 + 4 * k] * gw + theta[3 + 4 * k] * gt
                mu_t += theta[4 + 4 * k] * gw + theta[5 + 4 * k] * gt
            s_ww = ens_cov[i, 0]
            s_wt = ens_cov[i, 1]
            s_tt = ens_cov[i, 2]
            t_ww = c_ww + d00 * d00 * s_ww + 2.0 * d00 * d01 * s_wt + d01 * d01 * s_tt
            t_wt = (c_wt + d00 * d10 * s_ww + (d00 * d11 + d01 * d10) * s_wt
                    + d01 * d11 * s_tt)
            t_tt = c_tt + d10 * d10 * s_ww + 2.0 * d10 * d11 * s_wt + d11 * d11 * s_tt
            v = _tbn_logpdf_one(mu_w, mu_t, t_ww, t_wt, t_tt, obs[i, 0], obs[i, 1])
            if isnan(v) or v == -INFINITY:
                bad = 1
                break
            total += v
    if bad:
        return float("inf")
    return -total / n


cdef inline double _crps_normal_one(double loc, double scale, double y) noexcept nogil:
    cdef double z = (y - loc) / scale
    return scale * (z * (2.0 * _ndtr(z) - 1.0) + 2.0 * _std_pdf(z) - INV_SQRT_PI)


cdef inline double _crps_tnorm_one(double loc, double scale, double y) noexcept nogil:
    cdef double p = _ndtr(loc / scale)
    cdef double below = 0.0
    cdef double z, val
    if p <= 0.0:
        return NAN
    if y < 0.0:
        below = -y
        y = 0.0
    z = (y - loc) / scale
    val = (z * p * (2.0 * _ndtr(z) + p - 2.0) + 2.0 * _std_pdf(z) * p
           - INV_SQRT_PI * _ndtr(SQRT2 * loc / scale))
    return below + scale * val / (p * p)


def crps_normal_arr(double[::1] loc, double[::1] scale, double[::1] y):
    cdef Py_ssize_t n = loc.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _crps_normal_one(loc[i], scale[i], y[i])
    return out


def crps_truncnormal_arr(double[::1] loc, double[::1] scale, double[::1] y):
    cdef Py_ssize_t n = loc.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _crps_tnorm_one(loc[i], scale[i], y[i])
    return out


def univ_mean_crps(double[::1] theta, double[:, ::1] group_sums,
                   double[::1] ens_var, double[::1] obs, bint truncated):
    cdef Py_ssize_t n = group_sums.shape[0]
    cdef Py_ssize_t m = group_sums.shape[1]
    cdef double sc = theta[1 + m], sd = theta[2 + m]
    cdef double loc, var, v
    cdef double total = 0.0
    cdef Py_ssize_t i, k
    cdef bint bad = 0
    with nogil:
        for i in range(n):
            loc = theta[0]
            for k in range(m):
                loc += theta[1 + k] * group_sums[i, k]
            var = sc * sc + sd * sd * ens_var[i]
            if not var > 0.0:
                bad = 1
                break
            if truncated:
                v = _crps_tnorm_one(loc, sqrt(var), obs[i])
            else:
                v = _crps_normal_one(loc, sqrt(var), obs[i])
            if isnan(v) or v == INFINITY:
                bad = 1
                break
            total += v
    if bad:
        return float("inf")
    return total / n


def energy_score_mc(double[::1] xw, double[::1] xt, double yw, double yt):
    cdef Py_ssize_t n = xw.shape[0]
    cdef double d1 = 0.0, d2 = 0.0
    cdef double dw, dt
    cdef Py_ssize_t j
    with nogil:
        for j in range(n):
            dw = xw[j] - yw
            dt = xt[j] - yt
            d1 += sqrt(dw * dw + dt * dt)
        for j in range(n - 1):
            dw = xw[j] - xw[j + 1]
            dt = xt[j] - xt[j + 1]
            d2 += sqrt(dw * dw + dt * dt)
    return d1 / n - d2 / (2.0 * (n - 1))


def energy_score_ensemble(double[::1] fw, double[::1] ft, double yw, double yt):
    cdef Py_ssize_t m = fw.shape[0]
    cdef double d1 = 0.0, d2 = 0.0
    cdef double dw, dt
    cdef Py_ssize_t j, k
    with nogil:
        for j in range(m):
            dw = fw[j] - yw
            dt = ft[j] - yt
            d1 += sqrt(dw * dw + dt * dt)
        for j in range(m):
            for k in range(m):
                dw = fw[j] - fw[k]
                dt = ft[j] - ft[k]
                d2 += sqrt(dw * dw + dt * dt)
    return d1 / m - d2 / (2.0 * m * m)


def preranks(double[::1] uw, double[::1] ut):
    cdef Py_ssize_t n = uw.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t i, j
    cdef long long c
    with nogil:
        for i in range(n):
            c = 0
            for j in range(n):
                if uw[j] <= uw[i] and ut[j] <= ut[i]:
                    c += 1
            ov[i] = c
    return out
