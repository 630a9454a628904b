# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Keep in lockstep with ``_pykernels.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, sqrt, INFINITY

cnp.import_array()

cdef double LOG2 = log(2.0)
cdef double RESCALE = 1e250

cdef int RUNNING = 0
cdef int BUDGET_STOP = 1
cdef int SINGLE_STOP = 2
cdef int ADJACENT_STOP = 3
cdef int WATCH_STOP = 4


cdef double _f_series(double x, double y, double tol, long max_terms,
                      long *n_terms, int *converged) nogil:
    cdef double lam = 0.5 * x
    cdef double a = 0.25 * y
    cdef double log_lam = log(lam) if lam > 0.0 else 0.0
    cdef double l_prev = 0.0, l_cur = 1.0, l_next, log_scale = 0.0
    cdef double surv = 1.0, log_pmf = -lam
    cdef double total = 0.0, total_c = 0.0, wsum = 0.0, wsum_c = 0.0
    cdef double w, term, s, rest
    cdef long m = 0
    while m < max_terms:
        w = exp(log_scale + log(l_cur) - a - (m + 1) * LOG2)
        term = w * surv
        s = total + term
        if fabs(total) >= fabs(term):
            total_c += (total - s) + term
        else:
            total_c += (term - s) + total
        total = s
        s = wsum + w
        if fabs(wsum) >= fabs(w):
            wsum_c += (wsum - s) + w
        else:
            wsum_c += (w - s) + wsum
        wsum = s

        if lam > 0.0:
            surv -= exp(log_pmf)
            log_pmf += log_lam - log(m + 1.0)
        else:
            surv = 0.0
        if surv < 0.0:
            surv = 0.0
        rest = 1.0 - (wsum + wsum_c)
        if rest < 0.0:
            rest = 0.0
        if surv * rest <= tol:
            n_terms[0] = m + 1
            converged[0] = 1
            return total + total_c

        l_next = ((2.0 * m + 1.0 + a) * l_cur - m * l_prev) / (m + 1.0)
        l_prev = l_cur
        l_cur = l_next
        if l_cur > RESCALE:
            log_scale += log(l_cur)
            l_prev /= l_cur
            l_cur = 1.0
        m += 1
    n_terms[0] = m
    converged[0] = 0
    return total + total_c


def f_series_kernel(double x, double y, double tol, long max_terms):
    cdef long n_terms = 0
    cdef int converged = 0
    cdef double v = _f_series(x, y, tol, max_terms, &n_terms, &converged)
    return v, n_terms, bool(converged)


def critical_value_kernel(double alpha, double x, double series_tol,
                          double ftol, long max_terms):
    cdef long n_terms = 0
    cdef int ok = 0
    cdef double f0, fm, lo, hi, mid
    cdef int i
    f0 = _f_series(x, 0.0, series_tol, max_terms, &n_terms, &ok)
    if not ok:
        return 0.0, False
    if f0 <= alpha:
        return 0.0, True
    lo = 0.0
    hi = x
    mid = 0.5 * x
    for i in range(200):
        mid = 0.5 * (lo + hi)
        fm = _f_series(x, mid, series_tol, max_terms, &n_terms, &ok)
        if not ok:
            return mid, False
        if fabs(fm - alpha) <= ftol:
            return mid, True
        if fm > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * (1.0 + x):
            break
    return 0.5 * (lo + hi), True


cdef double _lookup(const double[:] grid, const double[:] tau, double tail,
                    double x, int *ext) nogil:
    cdef Py_ssize_t n = grid.shape[0]
    cdef Py_ssize_t lo, hi, mid
    cdef double v, frac
    ext[0] = 0
    if x <= grid[0]:
        return tau[0]
    if x >= grid[n - 1]:
        if x == grid[n - 1]:
            return tau[n - 1]
        v = sqrt(x) - tail
        v = v * v
        if v < tau[n - 1]:
            v = tau[n - 1]
        if v > x:
            v = x
        ext[0] = 1
        return v
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if grid[mid] <= x:
            lo = mid
        else:
            hi = mid
    frac = (x - grid[lo]) / (grid[hi] - grid[lo])
    return tau[lo] + frac * (tau[hi] - tau[lo])


def lookup_tau_kernel(const double[:] grid, const double[:] tau, double tail,
                      double x):
    cdef int ext = 0
    cdef double v = _lookup(grid, tau, tail, x, &ext)
    return v, bool(ext)


def run_phase_kernel(const double[:] h_re, const double[:] h_im,
                     const double[:] z_re, const double[:] z_im,
                     long n0, long budget, double noise_scale, double t_scale,
                     const double[:] grid, const double[:] tau,
                     double tail, bint use_cond2, bint use_restore, long watch,
                     bint wrap=False):
    cdef Py_ssize_t n_beams = h_re.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts_a = np.zeros(n_beams, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rre_a = np.zeros(n_beams)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rim_a = np.zeros(n_beams)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stat_a = np.zeros(n_beams)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] active_a = np.ones(n_beams, dtype=np.int8)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] ever_a = np.zeros(n_beams, dtype=np.int8)
    cdef cnp.int64_t[:] counts = counts_a
    cdef double[:] r_re = rre_a
    cdef double[:] r_im = rim_a
    cdef double[:] stat = stat_a
    cdef cnp.int8_t[:] active = active_a
    cdef cnp.int8_t[:] ever = ever_a
    cdef long spent = 0, draw = 0, t = 0, k, n_act
    cdef int flag = RUNNING, ext = 0
    cdef long n_extrap = 0, n_restore = 0
    cdef Py_ssize_t b, best = 0, other = -1, g
    cdef double o_re, o_im, t_min, thr, g_pow, p

    with nogil:
        while flag == RUNNING:
            t += 1
            for b in range(n_beams):
                if active[b]:
                    k = counts[b] + 1
                    counts[b] = k
                    o_re = h_re[b] + noise_scale * z_re[draw]
                    o_im = h_im[b] + noise_scale * z_im[draw]
                    draw += 1
                    r_re[b] = (r_re[b] * (k - 1) + o_re) / k
                    r_im[b] = (r_im[b] * (k - 1) + o_im) / k
                    stat[b] = (t_scale * (k * n0)) * (r_re[b] * r_re[b] + r_im[b] * r_im[b])
                    spent += n0

            best = -1
            t_min = INFINITY
            for b in range(n_beams):
                if active[b]:
                    if best < 0 or stat[b] > stat[best]:
                        best = b
                    if stat[b] < t_min:
                        t_min = stat[b]
            thr = _lookup(grid, tau, tail, stat[best], &ext)
            if ext:
                n_extrap += 1
            if t_min < thr:
                for b in range(n_beams):
                    if active[b] and b != best and stat[b] < thr:
                        active[b] = 0
                        ever[b] = 1
                if watch >= 0 and ever[watch]:
                    flag = WATCH_STOP
                    break

            if use_restore:
                g = 0
                g_pow = r_re[0] * r_re[0] + r_im[0] * r_im[0]
                for b in range(1, n_beams):
                    p = r_re[b] * r_re[b] + r_im[b] * r_im[b]
                    if p > g_pow:
                        g = b
                        g_pow = p
                if not active[g]:
                    while counts[g] < t:
                        if spent + n0 > budget:
                            flag = BUDGET_STOP
                            break
                        k = counts[g] + 1
                        counts[g] = k
                        o_re = h_re[g] + noise_scale * z_re[draw]
                        o_im = h_im[g] + noise_scale * z_im[draw]
                        draw += 1
                        r_re[g] = (r_re[g] * (k - 1) + o_re) / k
                        r_im[g] = (r_im[g] * (k - 1) + o_im) / k
                        spent += n0
                    if flag != RUNNING:
                        break
                    k = counts[g]
                    stat[g] = (t_scale * (k * n0)) * (r_re[g] * r_re[g] + r_im[g] * r_im[g])
                    active[g] = 1
                    n_restore += 1

            n_act = 0
            best = -1
            for b in range(n_beams):
                if active[b]:
                    n_act += 1
                    if best < 0 or stat[b] > stat[best]:
                        best = b
            other = -1
            if n_act == 1:
                flag = SINGLE_STOP
            elif use_cond2 and n_act == 2:
                for b in range(n_beams):
                    if active[b] and b != best:
                        other = b
                if (other == best - 1 or other == best + 1
                        or (wrap and (other - best == n_beams - 1 or best - other == n_beams - 1))) \
                        and stat[best] < 2.0 * stat[other]:
                    flag = ADJACENT_STOP
                else:
                    other = -1
            if flag == RUNNING and spent > budget - n0 * n_act:
                flag = BUDGET_STOP

        best = -1
        for b in range(n_beams):
            if active[b] and (best < 0 or stat[b] > stat[best]):
                best = b
        if flag != ADJACENT_STOP:
            other = -1

    return {
        "flag": flag,
        "t": t,
        "spent": spent,
        "best": best,
        "other": other,
        "counts": counts_a,
        "r_re": rre_a,
        "r_im": rim_a,
        "stat": stat_a,
        "active": active_a,
        "ever_deactivated": ever_a,
        "n_extrapolated": n_extrap,
        "n_restored": n_restore,
        "draws": draw,
    }
