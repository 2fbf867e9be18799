# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors ``_pykernels`` function by function."""
from libc.math cimport exp, log, log1p, fabs, INFINITY

cdef double LN2 = log(2.0)
cdef double ALPHA_FLOOR = 1e-12


cdef inline double _local_obj(double f, double q, double kappa, double d,
                              double lam, double v) nogil:
    cdef double denom = f * f - f * d * lam
    if denom <= 0.0:
        return INFINITY
    return q * kappa * f * f * d * lam + v * (d / f + d * d * lam / (2.0 * denom))


def local_cpu_objective(double f, double q, double kappa, double d, double lam, double v):
    return _local_obj(f, q, kappa, d, lam, v)


def fibonacci_local_cpu(double q, double kappa, double d, double lam, double v,
                        double f_lo, double f_hi, double tol):
    cdef double fib[200]
    cdef int n = 1
    cdef double span = f_hi - f_lo
    fib[0] = 1.0
    fib[1] = 1.0
    while fib[n] * tol < span and n < 198:
        n += 1
        fib[n] = fib[n - 1] + fib[n - 2]
    cdef double a = f_lo, b = f_hi
    cdef double x1 = a + fib[n - 2] / fib[n] * (b - a)
    cdef double x2 = a + fib[n - 1] / fib[n] * (b - a)
    cdef double y1 = _local_obj(x1, q, kappa, d, lam, v)
    cdef double y2 = _local_obj(x2, q, kappa, d, lam, v)
    cdef int k = n
    while k > 2:
        k -= 1
        if y1 <= y2:
            b = x2
            x2 = x1
            y2 = y1
            x1 = a + fib[k - 2] / fib[k] * (b - a)
            y1 = _local_obj(x1, q, kappa, d, lam, v)
        else:
            a = x1
            x1 = x2
            y1 = y2
            x2 = a + fib[k - 1] / fib[k] * (b - a)
            y2 = _local_obj(x2, q, kappa, d, lam, v)
    cdef double best = x1, best_y = y1
    if y2 < y1:
        best = x2
        best_y = y2
    if _local_obj(f_hi, q, kappa, d, lam, v) <= best_y:
        return f_hi
    return best


cdef inline double _gap(double x) nogil:
    if x < 1e-3:
        return x * x * (0.5 - x * (2.0 / 3.0 - x * (0.75 - 0.8 * x)))
    return log1p(x) - x / (1.0 + x)


cdef inline double _marginal(double alpha, double weight, double bits,
                             double snr, double w) nogil:
    if alpha < ALPHA_FLOOR:
        return INFINITY
    cdef double x = snr / alpha
    cdef double lg = log1p(x)
    return weight * bits * LN2 * _gap(x) / (w * alpha * alpha * lg * lg)


def bandwidth_marginal(double alpha, double weight, double bits, double snr, double w):
    return _marginal(alpha, weight, bits, snr, w)


cdef inline double _alpha_for_price(double u, double weight, double bits, double snr,
                                    double w, double tol_inner) nogil:
    if _marginal(1.0, weight, bits, snr, w) >= u:
        return 1.0
    cdef double lu = log(u)
    cdef double t_lo = log(ALPHA_FLOOR), t_hi = 0.0, t = 0.0, g
    cdef double g_lo = log(_marginal(ALPHA_FLOOR, weight, bits, snr, w)) - lu
    cdef double g_hi = log(_marginal(1.0, weight, bits, snr, w)) - lu
    cdef int side = 0, it
    if g_lo <= 0.0:
        return ALPHA_FLOOR
    for it in range(200):
        t = (t_lo * g_hi - t_hi * g_lo) / (g_hi - g_lo)
        g = log(_marginal(exp(t), weight, bits, snr, w)) - lu
        if g > 0.0:
            t_lo = t
            g_lo = g
            if side == 1:
                g_hi *= 0.5
            side = 1
        elif g < 0.0:
            t_hi = t
            g_hi = g
            if side == -1:
                g_lo *= 0.5
            side = -1
        if fabs(g) <= 1e-15 or exp(t_hi) - exp(t_lo) <= tol_inner:
            break
    return exp(t)


cdef double _share_total(double lu, double[:] cw, double[:] cb, double[:] cs,
                         double w, double tol_inner, double[:] alpha) nogil:
    cdef double u = exp(lu), total = 0.0
    cdef Py_ssize_t i
    for i in range(cw.shape[0]):
        alpha[i] = _alpha_for_price(u, cw[i], cb[i], cs[i], w, tol_inner)
        total += alpha[i]
    return total


def bandwidth_kkt(weights, bits, snrs, double w, double tol_sum, double tol_inner,
                  int max_iter=500):
    cdef int n = len(weights)
    if n == 0:
        return []
    if n == 1:
        return [1.0]
    cdef double[:] cw = _as_doubles(weights)
    cdef double[:] cb = _as_doubles(bits)
    cdef double[:] cs = _as_doubles(snrs)
    cdef double[:] alpha = _as_doubles([0.0] * n)
    cdef double u_lo = INFINITY, u_hi = 0.0, m, total, g, g_lo, g_hi, l_lo, l_hi, lu
    cdef int i, it = 0, side = 0
    for i in range(n):
        m = _marginal(1.0, cw[i], cb[i], cs[i], w)
        if m < u_lo:
            u_lo = m
        m = _marginal(1.0 / n, cw[i], cb[i], cs[i], w)
        if m > u_hi:
            u_hi = m
    l_lo = log(u_lo)
    l_hi = log(u_hi)
    total = _share_total(l_lo, cw, cb, cs, w, tol_inner, alpha)
    g_lo = total - 1.0
    if fabs(g_lo) > tol_sum:
        total = _share_total(l_hi, cw, cb, cs, w, tol_inner, alpha)
        g_hi = total - 1.0
        while fabs(total - 1.0) > tol_sum and it < max_iter:
            it += 1
            if g_lo > g_hi:
                lu = (l_lo * g_hi - l_hi * g_lo) / (g_hi - g_lo)
            else:
                lu = 0.5 * (l_lo + l_hi)
            total = _share_total(lu, cw, cb, cs, w, tol_inner, alpha)
            g = total - 1.0
            if g > 0.0:
                l_lo = lu
                g_lo = g
                if side == 1:
                    g_hi *= 0.5
                side = 1
            else:
                l_hi = lu
                g_hi = g
                if side == -1:
                    g_lo *= 0.5
                side = -1
    out = [alpha[i] for i in range(n)]
    if total > 1.0:
        out = [a / total for a in out]
    return out


cdef _as_doubles(seq):
    import array
    return array.array("d", [float(x) for x in seq])


def md1_mean_sojourn(const double[:] arrivals, double service):
    cdef Py_ssize_t i, n = arrivals.shape[0]
    if n == 0:
        return 0.0
    cdef double free_at = 0.0, acc = 0.0, t, start
    with nogil:
        for i in range(n):
            t = arrivals[i]
            start = t if t > free_at else free_at
            free_at = start + service
            acc += free_at - t
    return acc / n
