# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tilted rate-function kernel.

Same contract as the pure fallback module; see it for the algorithm.
The exponentially tilted moments are computed by fused single-pass
loops (see _rfexp.h) that the C compiler vectorizes, and the solver
runs without the GIL, so a whole-table solve streams through all lines
with no Python overhead per line.
"""

from libc.math cimport INFINITY, NAN, fabs, isfinite, log

import numpy as np

cdef extern from "_rfexp.h" nogil:
    void rf_maxmean(const double *f, Py_ssize_t n, double *out_max, double *out_sum)
    void rf_moments(const double *f, Py_ssize_t n, double fmax, double lam,
                    double *s0, double *s1, double *s2)
    double rf_sumexp(const double *f, Py_ssize_t n, double fmax, double lam)

BACKEND = "compiled"

cdef int _MAX_ITER = 200


cdef int _solve(const double[::1] f, Py_ssize_t n, double gamma, double lam0,
                double rel_tol, double* out_rate, double* out_lam) noexcept nogil:
    """Maximize lam*gamma - log-mean-exp(lam*f) over lam >= 0.

    Returns 1 when gamma exceeds every sample (infinite rate), else 0.
    """
    cdef Py_ssize_t i, nmax
    cdef double fmax, total, s0, s1, s2
    cdef double fmean, scale, lam, lo, hi, m, var, lam_new, rate
    cdef int it

    rf_maxmean(&f[0], n, &fmax, &total)
    fmean = total / n

    if gamma <= fmean:
        out_rate[0] = 0.0
        out_lam[0] = 0.0
        return 0
    if gamma > fmax:
        out_rate[0] = INFINITY
        out_lam[0] = INFINITY
        return 1
    if gamma == fmax:
        nmax = 0
        for i in range(n):
            if f[i] == fmax:
                nmax += 1
        out_rate[0] = log(<double>n / <double>nmax)
        out_lam[0] = INFINITY
        return 0

    scale = 1.0 / (fmax - fmean)
    lam = lam0 if (isfinite(lam0) and lam0 > 0.0) else scale
    lo = 0.0
    hi = INFINITY

    for it in range(_MAX_ITER):
        rf_moments(&f[0], n, fmax, lam, &s0, &s1, &s2)
        m = fmax + s1 / s0
        if m < gamma:
            lo = lam
        else:
            hi = lam
        if isfinite(hi) and hi - lo <= rel_tol * hi:
            lam = 0.5 * (lo + hi)
            break
        var = s2 / s0 - (s1 / s0) * (s1 / s0)
        if var > 0.0:
            lam_new = lam + (gamma - m) / var
        else:
            lam_new = NAN
        if not (lo < lam_new < hi) or not isfinite(lam_new):
            if isfinite(hi):
                lam_new = 0.5 * (lo + hi)
            else:
                lam_new = 2.0 * (lam if lam > scale else scale)
        if fabs(lam_new - lam) <= rel_tol * fabs(lam_new):
            lam = lam_new
            break
        lam = lam_new

    rate = lam * (gamma - fmax) + log(<double>n) - log(rf_sumexp(&f[0], n, fmax, lam))
    if rate < 0.0:
        rate = 0.0
    out_rate[0] = rate
    out_lam[0] = lam
    return 0


def max_rate(fabs_arr, double gamma, double lam0=0.0, double rel_tol=1e-10):
    """Best exponential-tilt exponent for one line: (rate, lam, saturated)."""
    arr = np.ascontiguousarray(fabs_arr, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"fabs must be 1-D, got shape {arr.shape}")
    cdef const double[::1] f = arr
    cdef Py_ssize_t n = f.shape[0]
    if n == 0:
        raise ValueError("need at least one sample")
    cdef double rate = 0.0
    cdef double lam = 0.0
    cdef int sat
    with nogil:
        sat = _solve(f, n, gamma, lam0, rel_tol, &rate, &lam)
    return rate, lam, bool(sat)


def rate_table(fabs_arr, Py_ssize_t n, gamma_arr, lam0_arr, double rel_tol=1e-10):
    """Solve every line against the first n columns: (rates, lams, saturated)."""
    arr = np.ascontiguousarray(fabs_arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"fabs must be 2-D, got shape {arr.shape}")
    cdef const double[:, ::1] fv = arr
    if not 0 < n <= fv.shape[1]:
        raise ValueError(f"n={n} out of range for {fv.shape[1]} columns")
    cdef Py_ssize_t m = fv.shape[0]
    g = np.ascontiguousarray(gamma_arr, dtype=np.float64)
    l0 = np.ascontiguousarray(lam0_arr, dtype=np.float64)
    if g.shape != (m,) or l0.shape != (m,):
        raise ValueError("gamma and lam0 must have one entry per line")

    rates = np.empty(m)
    lams = np.empty(m)
    saturated = np.zeros(m, dtype=np.uint8)
    cdef const double[::1] gv = g
    cdef const double[::1] lv = l0
    cdef double[::1] rv = rates
    cdef double[::1] av = lams
    cdef unsigned char[::1] sv = saturated
    cdef Py_ssize_t k
    cdef double rate, lam, seed
    with nogil:
        for k in range(m):
            if gv[k] == INFINITY:
                rv[k] = INFINITY
                av[k] = INFINITY
                sv[k] = 1
                continue
            seed = lv[k] if isfinite(lv[k]) else 0.0
            sv[k] = <unsigned char>_solve(fv[k], n, gv[k], seed, rel_tol, &rate, &lam)
            rv[k] = rate
            av[k] = lam
    return rates, lams, saturated
