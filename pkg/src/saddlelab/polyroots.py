"""Univariate root finding (Durand-Kerner) and numeric resultants."""

from __future__ import annotations

import numpy as np


def durand_kerner(coeffs, max_iter=200, tol=1e-14, restarts=3):
    """All complex roots of a polynomial given highest-degree coefficient first.

    Returns ``(roots, converged)``. On stall the iteration is restarted from a
    rotated initial circle; after ``restarts`` attempts the best iterate is
    returned with ``converged=False``.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "f")
    n = len(c) - 1
    if n < 1:
        return np.zeros(0, dtype=complex), True
    c = c / c[0]
    if n == 1:
        return np.array([-c[1]]), True
    # Fujiwara bound on root moduli
    radius = 2.0 * max(abs(c[k]) ** (1.0 / k) for k in range(1, n + 1))
    radius = max(radius, 1e-12)
    best, best_step = None, np.inf
    for attempt in range(restarts + 1):
        seed = (0.4 + 0.9j) * np.exp(0.7j * attempt)
        z = radius * 0.5 * seed ** np.arange(n) / np.abs(seed) ** np.arange(n)
        z = z * (1 + 0.01 * np.arange(n))
        step = np.inf
        for _ in range(max_iter):
            num = np.polyval(c, z)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            den = np.prod(diff, axis=1)
            if np.any(den == 0):
                break
            dz = num / den
            z = z - dz
            step = np.max(np.abs(dz))
            if step <= tol * max(1.0, np.max(np.abs(z))):
                return z, True
        if step < best_step and np.all(np.isfinite(z)):
            best, best_step = z, step
    if best is None:
        best = np.roots(c)
    return best, False


def newton_polish(coeffs, roots, steps=4):
    c = np.asarray(coeffs, dtype=complex)
    dc = np.polyder(c)
    z = np.array(roots, dtype=complex)
    for _ in range(steps):
        d = np.polyval(dc, z)
        ok = np.abs(d) > 0
        z[ok] = z[ok] - np.polyval(c, z[ok]) / d[ok]
    return z


def sylvester(a, b):
    """Sylvester matrix of two polynomials (highest-degree coefficient first)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    m, n = len(a) - 1, len(b) - 1
    S = np.zeros((m + n, m + n), dtype=complex)
    for i in range(n):
        S[i, i : i + m + 1] = a
    for i in range(m):
        S[n + i, i : i + n + 1] = b
    return S


def resultant(a, b):
    return np.linalg.det(sylvester(a, b))


def resultant_in_s(poly_t_at, deg_s, nodes=32, radius=1.0):
    """Coefficients (highest first) of ``s -> Res_t(A(s,.), B(s,.))``.

    ``poly_t_at(s)`` returns the pair of t-coefficient vectors of A and B at
    the given s. The resultant is sampled on a circle and recovered by FFT;
    ``deg_s`` is the a-priori degree bound.
    """
    k = np.arange(nodes)
    s = radius * np.exp(2j * np.pi * k / nodes)
    vals = np.array([resultant(*poly_t_at(sk)) for sk in s])
    low_first = np.fft.fft(vals) / nodes / radius ** k
    tail = np.max(np.abs(low_first[deg_s + 1 :])) if nodes > deg_s + 1 else 0.0
    head = np.max(np.abs(low_first[: deg_s + 1]))
    coeffs = low_first[: deg_s + 1][::-1]
    return coeffs, (tail / head if head > 0 else np.inf)
