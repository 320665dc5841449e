"""Independent reference implementations used as test oracles.

Everything here is written as plain loops over the displayed formulas, with no
sharing of code paths with the package.
"""

import math
from itertools import permutations

import numpy as np


def sinko_matrix_loops(n, x_max, q, g, mu):
    dx = x_max / n
    x = [dx * (i + 1) for i in range(n)]
    m = np.zeros((n, n))
    for i in range(n):
        m[i, i] = -g(x[i]) / dx - mu(x[i])
        if i > 0:
            m[i, i - 1] = g(x[i - 1]) / dx
    for j in range(n):
        m[0, j] += q(x[j])
    return m


def aggregation_loops(alpha, x_max, ka):
    n = len(alpha)
    dx = x_max / n
    x = [dx * (i + 1) for i in range(n)]
    out = np.zeros(n)
    for i in range(1, n + 1):
        gain = 0.0
        for j in range(1, i):
            gain += ka(x[j - 1], x[i - j - 1]) * alpha[j - 1] * alpha[i - j - 1]
        loss = 0.0
        for j in range(1, n - i + 1):
            loss += ka(x[i - 1], x[j - 1]) * alpha[j - 1]
        out[i - 1] = 0.5 * gain * dx - alpha[i - 1] * loss * dx
    return out


def breakage_loops(alpha, x_max, kf, gamma):
    n = len(alpha)
    dx = x_max / n
    x = [dx * (i + 1) for i in range(n)]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(i + 1, n):
            s += gamma(x[i], x[j]) * kf(x[j]) * alpha[j]
        out[i] = s * dx - 0.5 * kf(x[i]) * alpha[i]
    return out


def central_difference_jacobian(f, u, h):
    n = u.size
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        jac[:, j] = (f(u + e) - f(u - e)) / (2 * h)
    return jac


def det_leibniz(m):
    """Determinant by the permutation expansion (n <= 6)."""
    n = m.shape[0]
    total = 0.0
    for perm in permutations(range(n)):
        inversions = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        prod = 1.0
        for i, p in enumerate(perm):
            prod *= m[i, p]
        total += (-1) ** inversions * prod
    return total


def renewal_integral_closed(a, b, c, x_max):
    """Renewal integral for q = a(x+1), g = b(x+1), mu = c."""
    r = c / b
    if abs(r - 1.0) < 1e-14:
        return a / b * math.log(x_max + 1.0)
    return a / b * ((x_max + 1.0) ** (1.0 - r) - 1.0) / (1.0 - r)


def cell_average_inverse_square(n, x_max=1.0):
    """Exact cell averages of 1/(x+1)^2."""
    dx = x_max / n
    e = np.arange(n + 1) * dx
    return (1.0 / (e[:-1] + 1.0) - 1.0 / (e[1:] + 1.0)) / dx
