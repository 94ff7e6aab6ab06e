"""Pure-Python/numpy kernels; the fallback when ``_ckernels`` is not compiled.

A map is passed as ``monos`` (M,3) int exponent rows and ``coefs`` (3,M)
complex coefficients, component ``k`` being ``sum_j coefs[k,j] * p**monos[j]``.
"""

from __future__ import annotations

import math

import numpy as np

RETRACT_NONE = 0
RETRACT_XY = 1


def _monomials(monos, P):
    # P: (N,3) -> (N,M)
    # integer powers by repeated products; complex ** is much slower
    top = int(monos.max()) if monos.size else 0
    pw = np.ones((top + 1, P.shape[0], 3), dtype=complex)
    for k in range(1, top + 1):
        pw[k] = pw[k - 1] * P
    out = pw[monos[:, 0], :, 0].T.copy()
    out *= pw[monos[:, 1], :, 1].T
    out *= pw[monos[:, 2], :, 2].T
    return out


def eval_lift(monos, coefs, P):
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    return _monomials(monos, P) @ coefs.T


def lift_jacobian(monos, coefs, P):
    """Derivatives ``DF[n,k,m] = dF_k/dp_m`` at the rows of ``P``."""
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    N = P.shape[0]
    out = np.zeros((N, 3, 3), dtype=complex)
    for m in range(3):
        e = monos[:, m]
        mask = e > 0
        if not np.any(mask):
            continue
        dm = monos[mask].copy()
        dm[:, m] -= 1
        c = coefs[:, mask] * e[mask][None, :]
        out[:, :, m] = _monomials(dm, P) @ c.T
    return out


def normalize_rows(P):
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    piv = np.argmax(np.abs(P), axis=1)
    s = P[np.arange(P.shape[0]), piv]
    Q = P / s[:, None]
    Q[np.arange(P.shape[0]), piv] = 1.0
    return Q, piv


def green_batch(monos, coefs, deg, P, depth):
    """Telescoped escape rate on the normalized representatives of ``P``."""
    Q, _ = normalize_rows(P)
    val = np.zeros(Q.shape[0])
    w = 1.0
    for _ in range(depth):
        w /= deg
        F = _monomials(monos, Q) @ coefs.T
        A = np.abs(F)
        piv = np.argmax(A, axis=1)
        idx = np.arange(F.shape[0])
        val += w * np.log(A[idx, piv])
        Q = F / F[idx, piv][:, None]
        Q[idx, piv] = 1.0
    return val


# --- sequential kernels (scalar complex arithmetic) -----------------------


def _powers1(p, top):
    pw = [[1 + 0j] * (top + 1) for _ in range(3)]
    for i in range(3):
        for k in range(1, top + 1):
            pw[i][k] = pw[i][k - 1] * p[i]
    return pw


def _eval1(monos, coefs, p):
    # same product and summation order as the compiled kernel
    pw = _powers1(p, int(monos.max()))
    out = [0j, 0j, 0j]
    for j in range(monos.shape[0]):
        e0, e1, e2 = monos[j]
        t = pw[0][e0] * pw[1][e1] * pw[2][e2]
        out[0] += coefs[0, j] * t
        out[1] += coefs[1, j] * t
        out[2] += coefs[2, j] * t
    return out


def _eval_jac1(monos, coefs, p):
    pw = _powers1(p, int(monos.max()))
    F = [0j, 0j, 0j]
    D = [[0j, 0j, 0j] for _ in range(3)]
    for j in range(monos.shape[0]):
        e0, e1, e2 = monos[j]
        t = pw[0][e0] * pw[1][e1] * pw[2][e2]
        d0 = e0 * pw[0][e0 - 1] * pw[1][e1] * pw[2][e2] if e0 > 0 else 0j
        d1 = e1 * pw[0][e0] * pw[1][e1 - 1] * pw[2][e2] if e1 > 0 else 0j
        d2 = e2 * pw[0][e0] * pw[1][e1] * pw[2][e2 - 1] if e2 > 0 else 0j
        for c in range(3):
            F[c] += coefs[c, j] * t
            D[c][0] += coefs[c, j] * d0
            D[c][1] += coefs[c, j] * d1
            D[c][2] += coefs[c, j] * d2
    return F, D


def _normalize1(v):
    a0, a1, a2 = abs(v[0]), abs(v[1]), abs(v[2])
    if a0 >= a1 and a0 >= a2:
        piv = 0
    elif a1 >= a2:
        piv = 1
    else:
        piv = 2
    s = v[piv]
    out = [v[0] / s, v[1] / s, v[2] / s]
    out[piv] = 1 + 0j
    return out, piv


def _retract_xy(p):
    ax, ay = abs(p[0]), abs(p[1])
    if ax == 0.0 or ay == 0.0:
        return p
    g = math.sqrt(ax * ay)
    return [p[0] * (g / ax), p[1] * (g / ay), p[2]]


_OTHERS = ((1, 2), (0, 2), (0, 1))


def _chart_jac(D, F, src, dst):
    a, b = _OTHERS[src]
    k1, k2 = _OTHERS[dst]
    fj = F[dst]
    f2 = fj * fj
    return [
        [(D[k1][a] * fj - F[k1] * D[dst][a]) / f2, (D[k1][b] * fj - F[k1] * D[dst][b]) / f2],
        [(D[k2][a] * fj - F[k2] * D[dst][a]) / f2, (D[k2][b] * fj - F[k2] * D[dst][b]) / f2],
    ]


def forward_orbit(monos, coefs, p0, steps, retract):
    p, _ = _normalize1([complex(t) for t in p0])
    out = np.empty((steps + 1, 3), dtype=complex)
    out[0] = p
    for n in range(steps):
        v = _eval1(monos, coefs, p)
        if retract == RETRACT_XY:
            v = _retract_xy(v)
        p, _ = _normalize1(v)
        out[n + 1] = p
    return out


def lyapunov_qr(monos, coefs, p0, steps, retract, q0):
    """Accumulate ``log|R_11|, log|R_22|`` of the QR-reorthonormalized chart cocycle.

    Returns (log_r1, log_r2, last_point, last_frame). ``q0`` is the initial 2x2 orthonormal frame.
    """
    p, piv = _normalize1([complex(t) for t in p0])
    q11, q12 = complex(q0[0, 0]), complex(q0[0, 1])
    q21, q22 = complex(q0[1, 0]), complex(q0[1, 1])
    r1 = np.empty(steps)
    r2 = np.empty(steps)
    for n in range(steps):
        F, D = _eval_jac1(monos, coefs, p)
        v = _retract_xy(F) if retract == RETRACT_XY else F
        pn, pivn = _normalize1(v)
        J = _chart_jac(D, F, piv, pivn)
        # columns of J @ Q
        a1 = J[0][0] * q11 + J[0][1] * q21
        a2 = J[1][0] * q11 + J[1][1] * q21
        b1 = J[0][0] * q12 + J[0][1] * q22
        b2 = J[1][0] * q12 + J[1][1] * q22
        n1 = math.sqrt(abs(a1) ** 2 + abs(a2) ** 2)
        if n1 == 0.0:
            r1[n] = -math.inf
            r2[n] = -math.inf
            p, piv = pn, pivn
            continue
        e1, e2 = a1 / n1, a2 / n1
        proj = e1.conjugate() * b1 + e2.conjugate() * b2
        c1, c2 = b1 - proj * e1, b2 - proj * e2
        n2 = math.sqrt(abs(c1) ** 2 + abs(c2) ** 2)
        r1[n] = math.log(n1)
        if n2 == 0.0:
            r2[n] = -math.inf
            # any unit vector orthogonal to e1 keeps the frame valid
            c1, c2, n2 = -e2.conjugate(), e1.conjugate(), 1.0
        else:
            r2[n] = math.log(n2)
        q11, q21 = e1, e2
        q12, q22 = c1 / n2, c2 / n2
        p, piv = pn, pivn
    return r1, r2, np.array(p, dtype=complex), np.array([[q11, q12], [q21, q22]])
