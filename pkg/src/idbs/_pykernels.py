"""Pure-Python versions of the hot kernels.

These mirror ``_ckernels.pyx`` statement for statement so that both
backends consume noise draws in the same order and produce identical
floating-point results.
"""

import math

LOG2 = math.log(2.0)
RESCALE = 1e250

# Termination flags shared with the compiled kernel.
RUNNING = 0
BUDGET_STOP = 1
SINGLE_STOP = 2
ADJACENT_STOP = 3
WATCH_STOP = 4


def f_series_kernel(x, y, tol, max_terms):
    """Laguerre-series evaluation of the pairwise test function.

    Returns ``(value, n_terms, converged)``.  The series is summed as
    ``sum_m w_m * P{Poisson(x/2) >= m}`` where ``w_m = 2^-(m+1) e^{-y/4}
    L_m(-y/4)`` is a probability mass function in ``m``.  The tail after
    term ``M`` is bounded by ``P{Poisson(x/2) >= M+1} * (1 - sum_{m<=M} w_m)``.
    """
    lam = 0.5 * x
    a = 0.25 * y
    log_lam = math.log(lam) if lam > 0.0 else 0.0
    l_prev = 0.0
    l_cur = 1.0
    log_scale = 0.0
    surv = 1.0
    log_pmf = -lam
    total = 0.0
    total_c = 0.0
    wsum = 0.0
    wsum_c = 0.0
    m = 0
    while m < max_terms:
        w = math.exp(log_scale + math.log(l_cur) - a - (m + 1) * LOG2)
        # Neumaier-compensated sums
        term = w * surv
        s = total + term
        if abs(total) >= abs(term):
            total_c += (total - s) + term
        else:
            total_c += (term - s) + total
        total = s
        s = wsum + w
        if abs(wsum) >= abs(w):
            wsum_c += (wsum - s) + w
        else:
            wsum_c += (w - s) + wsum
        wsum = s

        if lam > 0.0:
            surv -= math.exp(log_pmf)
            log_pmf += log_lam - math.log(m + 1.0)
        else:
            surv = 0.0
        if surv < 0.0:
            surv = 0.0
        rest = 1.0 - (wsum + wsum_c)
        if rest < 0.0:
            rest = 0.0
        if surv * rest <= tol:
            return total + total_c, m + 1, True

        l_next = ((2.0 * m + 1.0 + a) * l_cur - m * l_prev) / (m + 1.0)
        l_prev = l_cur
        l_cur = l_next
        if l_cur > RESCALE:
            log_scale += math.log(l_cur)
            l_prev /= l_cur
            l_cur = 1.0
        m += 1
    return total + total_c, m, False


def critical_value_kernel(alpha, x, series_tol, ftol, max_terms):
    """Bisection for ``f(x, y) = alpha`` over ``y`` in ``[0, x]``.

    Returns ``(tau, converged)``.  ``tau`` is 0 when ``f(x, 0) <= alpha``.
    """
    f0, _, ok = f_series_kernel(x, 0.0, series_tol, max_terms)
    if not ok:
        return 0.0, False
    if f0 <= alpha:
        return 0.0, True
    lo = 0.0
    hi = x
    mid = 0.5 * x
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm, _, ok = f_series_kernel(x, mid, series_tol, max_terms)
        if not ok:
            return mid, False
        if abs(fm - alpha) <= ftol:
            return mid, True
        if fm > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * (1.0 + x):
            break
    return 0.5 * (lo + hi), True


def lookup_tau_kernel(grid, tau, tail, x):
    """Piecewise-linear table lookup.

    Beyond the last grid point ``sqrt(tau) = sqrt(x) - tail`` is used, with
    ``tail = sqrt(x_max) - sqrt(tau(x_max))``.

    Returns ``(tau, extrapolated)``.
    """
    n = len(grid)
    if x <= grid[0]:
        return tau[0], False
    if x >= grid[n - 1]:
        if x == grid[n - 1]:
            return tau[n - 1], False
        v = math.sqrt(x) - tail
        v = v * v
        if v < tau[n - 1]:
            v = tau[n - 1]
        if v > x:
            v = x
        return v, True
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if grid[mid] <= x:
            lo = mid
        else:
            hi = mid
    frac = (x - grid[lo]) / (grid[hi] - grid[lo])
    return tau[lo] + frac * (tau[hi] - tau[lo]), False


def run_phase_kernel(h_re, h_im, z_re, z_im, n0, budget, noise_scale,
                     t_scale, grid, tau, tail, use_cond2,
                     use_restore, watch, wrap=False):
    """One IDBS search phase over beams with known effective channels.

    ``z_re``/``z_im`` hold pre-drawn standard complex normal draws, one per
    measurement, consumed in order.  ``watch`` is a beam index whose first
    deactivation ends the run early (``-1`` disables this).  With ``wrap``
    the first and last beams also count as adjacent.

    Returns a dict of plain Python values and lists.
    """
    n_beams = len(h_re)
    counts = [0] * n_beams
    r_re = [0.0] * n_beams
    r_im = [0.0] * n_beams
    stat = [0.0] * n_beams
    active = [1] * n_beams
    ever = [0] * n_beams
    spent = 0
    draw = 0
    t = 0
    flag = RUNNING
    n_extrap = 0
    n_restore = 0
    best = 0
    other = -1

    while flag == RUNNING:
        t += 1
        # Step 1: one measurement per active beam
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

        # Step 2: deactivation against the strongest active beam
        best = -1
        t_min = math.inf
        for b in range(n_beams):
            if active[b]:
                if best < 0 or stat[b] > stat[best]:
                    best = b
                if stat[b] < t_min:
                    t_min = stat[b]
        thr, ext = lookup_tau_kernel(grid, tau, tail, stat[best])
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

        # Step 3: restoration of the globally strongest beam
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

        # Step 4: stopping conditions
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
                    or (wrap and abs(other - best) == n_beams - 1)) \
                    and stat[best] < 2.0 * stat[other]:
                flag = ADJACENT_STOP
            else:
                other = -1
        if flag == RUNNING and spent > budget - n0 * n_act:
            flag = BUDGET_STOP

    # Final strongest active beam (restoration may have been cut short).
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
        "counts": counts,
        "r_re": r_re,
        "r_im": r_im,
        "stat": stat,
        "active": active,
        "ever_deactivated": ever,
        "n_extrapolated": n_extrap,
        "n_restored": n_restore,
        "draws": draw,
    }
