"""Pure-Python kernels; reference twin of ``_ckernels.pyx``.

Every function here has an identically named counterpart in the compiled
module, with the same arguments and the same floating-point operation order
so that both backends agree to the last few ulps.
"""
import math

LN2 = math.log(2.0)
ALPHA_FLOOR = 1e-12


def local_cpu_objective(f, q, kappa, d, lam, v):
    """Queue-weighted local energy plus V times the M/D/1 sojourn at ``f``."""
    denom = f * f - f * d * lam
    if denom <= 0.0:
        return math.inf
    return q * kappa * f * f * d * lam + v * (d / f + d * d * lam / (2.0 * denom))


def fibonacci_local_cpu(q, kappa, d, lam, v, f_lo, f_hi, tol):
    """Fibonacci search for the minimiser of ``local_cpu_objective`` on [f_lo, f_hi]."""
    fib = [1.0, 1.0]
    span = f_hi - f_lo
    while fib[-1] * tol < span:
        fib.append(fib[-1] + fib[-2])
    n = len(fib) - 1
    a, b = f_lo, f_hi
    x1 = a + fib[n - 2] / fib[n] * (b - a)
    x2 = a + fib[n - 1] / fib[n] * (b - a)
    y1 = local_cpu_objective(x1, q, kappa, d, lam, v)
    y2 = local_cpu_objective(x2, q, kappa, d, lam, v)
    k = n
    while k > 2:
        k -= 1
        if y1 <= y2:
            b = x2
            x2, y2 = x1, y1
            x1 = a + fib[k - 2] / fib[k] * (b - a)
            y1 = local_cpu_objective(x1, q, kappa, d, lam, v)
        else:
            a = x1
            x1, y1 = x2, y2
            x2 = a + fib[k - 1] / fib[k] * (b - a)
            y2 = local_cpu_objective(x2, q, kappa, d, lam, v)
    best, best_y = (x1, y1) if y1 <= y2 else (x2, y2)
    y_hi = local_cpu_objective(f_hi, q, kappa, d, lam, v)
    if y_hi <= best_y:
        return f_hi
    return best


def _gap(x):
    # ln(1+x) - x/(1+x), series below 1e-3 to dodge cancellation
    if x < 1e-3:
        return x * x * (0.5 - x * (2.0 / 3.0 - x * (0.75 - 0.8 * x)))
    return math.log1p(x) - x / (1.0 + x)


def bandwidth_marginal(alpha, weight, bits, snr, w):
    """Negative derivative of ``weight * bits / rate(alpha)`` with respect to alpha."""
    if alpha < ALPHA_FLOOR:
        return math.inf
    x = snr / alpha
    lg = math.log1p(x)
    return weight * bits * LN2 * _gap(x) / (w * alpha * alpha * lg * lg)


def _alpha_for_price(u, weight, bits, snr, w, tol_inner):
    # root of log m(alpha) = log u in t = log(alpha), Illinois-safeguarded
    if bandwidth_marginal(1.0, weight, bits, snr, w) >= u:
        return 1.0
    lu = math.log(u)
    t_lo, t_hi = math.log(ALPHA_FLOOR), 0.0
    g_lo = math.log(bandwidth_marginal(ALPHA_FLOOR, weight, bits, snr, w)) - lu
    g_hi = math.log(bandwidth_marginal(1.0, weight, bits, snr, w)) - lu
    if g_lo <= 0.0:
        return ALPHA_FLOOR
    side = 0
    t = t_hi
    for _ in range(200):
        t = (t_lo * g_hi - t_hi * g_lo) / (g_hi - g_lo)
        g = math.log(bandwidth_marginal(math.exp(t), weight, bits, snr, w)) - lu
        if g > 0.0:
            t_lo, g_lo = t, g
            if side == 1:
                g_hi *= 0.5
            side = 1
        elif g < 0.0:
            t_hi, g_hi = t, g
            if side == -1:
                g_lo *= 0.5
            side = -1
        if abs(g) <= 1e-15 or math.exp(t_hi) - math.exp(t_lo) <= tol_inner:
            break
    return math.exp(t)


def _share_total(lu, weights, bits, snrs, w, tol_inner, alpha):
    u = math.exp(lu)
    total = 0.0
    for i in range(len(weights)):
        alpha[i] = _alpha_for_price(u, weights[i], bits[i], snrs[i], w, tol_inner)
        total += alpha[i]
    return total


def bandwidth_kkt(weights, bits, snrs, w, tol_sum, tol_inner, max_iter=500):
    """Bandwidth shares equalising the marginal payoff across active UEs.

    ``weights``, ``bits`` and ``snrs`` are sequences over active UEs only.
    Returns a list of shares summing to one within ``tol_sum``.
    """
    n = len(weights)
    if n == 0:
        return []
    if n == 1:
        return [1.0]
    u_lo = math.inf
    u_hi = 0.0
    for i in range(n):
        u_lo = min(u_lo, bandwidth_marginal(1.0, weights[i], bits[i], snrs[i], w))
        u_hi = max(u_hi, bandwidth_marginal(1.0 / n, weights[i], bits[i], snrs[i], w))
    alpha = [0.0] * n
    l_lo, l_hi = math.log(u_lo), math.log(u_hi)
    total = _share_total(l_lo, weights, bits, snrs, w, tol_inner, alpha)
    g_lo = total - 1.0
    if abs(g_lo) > tol_sum:
        total = _share_total(l_hi, weights, bits, snrs, w, tol_inner, alpha)
        g_hi = total - 1.0
        side = 0
        it = 0
        while abs(total - 1.0) > tol_sum and it < max_iter:
            it += 1
            if g_lo > g_hi:
                lu = (l_lo * g_hi - l_hi * g_lo) / (g_hi - g_lo)
            else:
                lu = 0.5 * (l_lo + l_hi)
            total = _share_total(lu, weights, bits, snrs, w, tol_inner, alpha)
            g = total - 1.0
            if g > 0.0:
                l_lo, g_lo = lu, g
                if side == 1:
                    g_hi *= 0.5
                side = 1
            else:
                l_hi, g_hi = lu, g
                if side == -1:
                    g_lo *= 0.5
                side = -1
    if total > 1.0:
        alpha = [a / total for a in alpha]
    return alpha


def md1_mean_sojourn(arrivals, service):
    """Mean time in system of a FIFO single server with constant service time."""
    n = len(arrivals)
    if n == 0:
        return 0.0
    free_at = 0.0
    acc = 0.0
    for t in arrivals:
        start = t if t > free_at else free_at
        free_at = start + service
        acc += free_at - t
    return acc / n
