"""Slow reference implementations used only by the tests.

Each function evaluates the set formulas candidate by candidate in O(K^2)
with plain Python loops, sharing no code with the package.
"""

import itertools
import math


def brute_known_theta(theta, o):
    K = len(theta)
    return [sum(theta[l] for l in range(K) if o[k] >= o[l]) for k in range(K)]


def brute_conformal(x, o):
    K, N = len(x), sum(x)
    out = []
    for k in range(K):
        y = [1 if l == k else 0 for l in range(K)]
        num = sum(x[l] + y[l] for l in range(K) if o[k] >= o[l])
        out.append(num / (N + 1))
    return out


def brute_augmented(x, gamma=None):
    """Direct (gamma None) or indirect p-values, keys recomputed per candidate."""
    K, N = len(x), sum(x)
    out = []
    for k in range(K):
        y = [1 if l == k else 0 for l in range(K)]
        if gamma is None:
            keys = [x[l] + y[l] for l in range(K)]
        else:
            keys = [(x[l] + y[l]) + gamma[l] for l in range(K)]
        num = sum(x[l] + y[l] for l in range(K) if keys[k] >= keys[l])
        out.append(num / (N + 1))
    return out


def included(pvalues, alpha):
    return {k for k, p in enumerate(pvalues) if p > alpha}


def weak_orderings(K):
    """Every weak ordering of K items as a rank vector (ties share a rank)."""
    seen = set()
    for ranks in itertools.product(range(K), repeat=K):
        used = sorted(set(ranks))
        # canonical form: ranks are 0..m-1 with no gaps
        if used != list(range(len(used))):
            continue
        if ranks not in seen:
            seen.add(ranks)
            yield ranks


def digamma_series(s, terms=2_000_000):
    """-xi + sum_n [1/(n+1) - 1/(n+s)], with the tail summed analytically."""
    xi = 0.57721566490153286060651209008240243
    n = terms
    total = math.fsum(1.0 / (i + 1) - 1.0 / (i + s) for i in range(n))
    # tail sum_{i>=n} (s-1)/((i+1)(i+s)): integral plus half the first term
    tail = math.log1p((s - 1) / (n + 1)) + 0.5 * (s - 1) / ((n + 1) * (n + s))
    return -xi + total + tail


def trigamma_series(s, terms=2_000_000):
    """sum_n 1/(n+s)^2 with an Euler-Maclaurin tail correction."""
    n = terms
    total = math.fsum(1.0 / (i + s) ** 2 for i in range(n))
    a = n + s
    tail = 1.0 / a + 1.0 / (2 * a * a) + 1.0 / (6 * a ** 3)
    return total + tail


def loglik_mp(x, gamma, dps=40):
    """Dirichlet-multinomial log marginal likelihood in extended precision."""
    import mpmath

    with mpmath.workdps(dps):
        g = [mpmath.mpf(v) for v in gamma]
        S = mpmath.fsum(g)
        total = mpmath.mpf(0)
        for row in x:
            N = int(sum(row))
            total += mpmath.loggamma(S) - mpmath.loggamma(N + S)
            for xi, gi in zip(row, g):
                total += mpmath.loggamma(int(xi) + gi) - mpmath.loggamma(gi)
        return total


def fd_gradient_mp(x, gamma, h=1e-6):
    """Central differences of the extended-precision log-likelihood."""
    import mpmath

    with mpmath.workdps(40):
        out = []
        for k in range(len(gamma)):
            hp = mpmath.mpf(h)
            up = [mpmath.mpf(v) for v in gamma]
            dn = list(up)
            up[k] += hp
            dn[k] -= hp
            out.append(float((loglik_mp(x, up) - loglik_mp(x, dn)) / (2 * hp)))
        return out


def fd_hessian_mp(x, gamma, h=1e-6):
    """Second central differences of the extended-precision log-likelihood."""
    import mpmath

    with mpmath.workdps(40):
        K = len(gamma)
        hp = mpmath.mpf(h)
        base = [mpmath.mpf(v) for v in gamma]

        def f(shift):
            return loglik_mp(x, [b + s for b, s in zip(base, shift)])

        H = [[0.0] * K for _ in range(K)]
        for a in range(K):
            for b in range(a, K):
                vals = []
                for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    shift = [mpmath.mpf(0)] * K
                    shift[a] += sa * hp
                    shift[b] += sb * hp
                    vals.append(f(shift))
                v = float((vals[0] - vals[1] - vals[2] + vals[3]) / (4 * hp * hp))
                H[a][b] = H[b][a] = v
        return H
