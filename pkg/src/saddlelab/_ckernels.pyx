# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the sequential kernels in ``_pykernels`` (same signatures and results)."""

import numpy as np

cimport cython
from libc.math cimport log, sqrt, fabs

cdef extern from "complex.h" nogil:
    double cabs(double complex)

DEF MAXDEG = 64

RETRACT_NONE = 0
RETRACT_XY = 1

cdef int OTH[3][2]
OTH[0][0] = 1; OTH[0][1] = 2
OTH[1][0] = 0; OTH[1][1] = 2
OTH[2][0] = 0; OTH[2][1] = 1


cdef inline void _powers(double complex* p, int top, double complex pw[3][MAXDEG + 1]) noexcept nogil:
    cdef int i, k
    for i in range(3):
        pw[i][0] = 1.0
        for k in range(1, top + 1):
            pw[i][k] = pw[i][k - 1] * p[i]


cdef inline void _eval1(const long long[:, ::1] monos, const double complex[:, ::1] coefs, int top,
                        double complex* p, double complex* out) noexcept nogil:
    cdef double complex pw[3][MAXDEG + 1]
    cdef double complex t
    cdef Py_ssize_t j, M = monos.shape[0]
    _powers(p, top, pw)
    out[0] = 0; out[1] = 0; out[2] = 0
    for j in range(M):
        t = pw[0][monos[j, 0]] * pw[1][monos[j, 1]] * pw[2][monos[j, 2]]
        out[0] += coefs[0, j] * t
        out[1] += coefs[1, j] * t
        out[2] += coefs[2, j] * t


cdef inline void _eval_jac1(const long long[:, ::1] monos, const double complex[:, ::1] coefs, int top,
                            double complex* p, double complex* F, double complex D[3][3]) noexcept nogil:
    cdef double complex pw[3][MAXDEG + 1]
    cdef double complex t, d0, d1, d2
    cdef long long e0, e1, e2
    cdef Py_ssize_t j, c, M = monos.shape[0]
    _powers(p, top, pw)
    for c in range(3):
        F[c] = 0
        D[c][0] = 0; D[c][1] = 0; D[c][2] = 0
    for j in range(M):
        e0 = monos[j, 0]; e1 = monos[j, 1]; e2 = monos[j, 2]
        t = pw[0][e0] * pw[1][e1] * pw[2][e2]
        d0 = e0 * pw[0][e0 - 1] * pw[1][e1] * pw[2][e2] if e0 > 0 else 0
        d1 = e1 * pw[0][e0] * pw[1][e1 - 1] * pw[2][e2] if e1 > 0 else 0
        d2 = e2 * pw[0][e0] * pw[1][e1] * pw[2][e2 - 1] if e2 > 0 else 0
        for c in range(3):
            F[c] += coefs[c, j] * t
            D[c][0] += coefs[c, j] * d0
            D[c][1] += coefs[c, j] * d1
            D[c][2] += coefs[c, j] * d2


cdef inline int _normalize1(double complex* v, double complex* out) noexcept nogil:
    cdef double a0 = cabs(v[0]), a1 = cabs(v[1]), a2 = cabs(v[2])
    cdef int piv
    cdef double complex s
    if a0 >= a1 and a0 >= a2:
        piv = 0
    elif a1 >= a2:
        piv = 1
    else:
        piv = 2
    s = v[piv]
    out[0] = v[0] / s; out[1] = v[1] / s; out[2] = v[2] / s
    out[piv] = 1.0
    return piv


cdef inline void _retract_xy(double complex* v) noexcept nogil:
    cdef double ax = cabs(v[0]), ay = cabs(v[1]), g
    if ax == 0.0 or ay == 0.0:
        return
    g = sqrt(ax * ay)
    v[0] = v[0] * (g / ax)
    v[1] = v[1] * (g / ay)


cdef int _top(const long long[:, ::1] monos) except -1:
    cdef Py_ssize_t j
    cdef long long t = 0
    for j in range(monos.shape[0]):
        t = max(t, monos[j, 0], monos[j, 1], monos[j, 2])
    if t > MAXDEG:
        raise ValueError("degree too large for the compiled kernels")
    return <int>t


def _prep(monos, coefs):
    return (np.ascontiguousarray(monos, dtype=np.int64), np.ascontiguousarray(coefs, dtype=np.complex128))


def green_batch(monos, coefs, deg, P, depth):
    """Telescoped escape rate on the normalized representatives of ``P``."""
    m_, c_ = _prep(monos, coefs)
    cdef const long long[:, ::1] mv = m_
    cdef const double complex[:, ::1] cv = c_
    Pa = np.ascontiguousarray(np.atleast_2d(P), dtype=np.complex128)
    cdef const double complex[:, ::1] Pv = Pa
    cdef Py_ssize_t N = Pv.shape[0], i
    out = np.zeros(N)
    cdef double[::1] ov = out
    cdef int top = _top(mv), k, dep = depth, piv
    cdef double w, acc, dd = deg
    cdef double complex p[3]
    cdef double complex q[3]
    cdef double complex F[3]
    with nogil:
        for i in range(N):
            p[0] = Pv[i, 0]; p[1] = Pv[i, 1]; p[2] = Pv[i, 2]
            _normalize1(p, q)
            w = 1.0
            acc = 0.0
            for k in range(dep):
                w /= dd
                _eval1(mv, cv, top, q, F)
                piv = _normalize1(F, q)
                acc += w * log(cabs(F[piv]))
            ov[i] = acc
    return out


def forward_orbit(monos, coefs, p0, steps, retract):
    m_, c_ = _prep(monos, coefs)
    cdef const long long[:, ::1] mv = m_
    cdef const double complex[:, ::1] cv = c_
    cdef int top = _top(mv), n, ns = steps, rt = retract
    out = np.empty((steps + 1, 3), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    cdef double complex p[3]
    cdef double complex v[3]
    v[0] = complex(p0[0]); v[1] = complex(p0[1]); v[2] = complex(p0[2])
    _normalize1(v, p)
    ov[0, 0] = p[0]; ov[0, 1] = p[1]; ov[0, 2] = p[2]
    with nogil:
        for n in range(ns):
            _eval1(mv, cv, top, p, v)
            if rt == 1:
                _retract_xy(v)
            _normalize1(v, p)
            ov[n + 1, 0] = p[0]; ov[n + 1, 1] = p[1]; ov[n + 1, 2] = p[2]
    return out


def lyapunov_qr(monos, coefs, p0, steps, retract, q0):
    """Accumulate ``log|R_11|, log|R_22|`` of the QR-reorthonormalized chart cocycle.

    Returns (log_r1, log_r2, last_point, last_frame).
    """
    m_, c_ = _prep(monos, coefs)
    cdef const long long[:, ::1] mv = m_
    cdef const double complex[:, ::1] cv = c_
    cdef int top = _top(mv), n, ns = steps, rt = retract, piv, pivn, a, b, k1, k2
    r1a = np.empty(steps)
    r2a = np.empty(steps)
    cdef double[::1] r1 = r1a
    cdef double[::1] r2 = r2a
    cdef double complex p[3]
    cdef double complex pn[3]
    cdef double complex v[3]
    cdef double complex F[3]
    cdef double complex D[3][3]
    cdef double complex J00, J01, J10, J11, fj, f2
    cdef double complex q11 = complex(q0[0, 0]), q12 = complex(q0[0, 1])
    cdef double complex q21 = complex(q0[1, 0]), q22 = complex(q0[1, 1])
    cdef double complex a1, a2, b1, b2, e1, e2, proj, c1, c2
    cdef double n1, n2
    cdef double ninf = -np.inf
    v[0] = complex(p0[0]); v[1] = complex(p0[1]); v[2] = complex(p0[2])
    piv = _normalize1(v, p)
    with nogil:
        for n in range(ns):
            _eval_jac1(mv, cv, top, p, F, D)
            v[0] = F[0]; v[1] = F[1]; v[2] = F[2]
            if rt == 1:
                _retract_xy(v)
            pivn = _normalize1(v, pn)
            a = OTH[piv][0]; b = OTH[piv][1]
            k1 = OTH[pivn][0]; k2 = OTH[pivn][1]
            fj = F[pivn]
            f2 = fj * fj
            J00 = (D[k1][a] * fj - F[k1] * D[pivn][a]) / f2
            J01 = (D[k1][b] * fj - F[k1] * D[pivn][b]) / f2
            J10 = (D[k2][a] * fj - F[k2] * D[pivn][a]) / f2
            J11 = (D[k2][b] * fj - F[k2] * D[pivn][b]) / f2
            a1 = J00 * q11 + J01 * q21
            a2 = J10 * q11 + J11 * q21
            b1 = J00 * q12 + J01 * q22
            b2 = J10 * q12 + J11 * q22
            n1 = sqrt(cabs(a1) ** 2 + cabs(a2) ** 2)
            if n1 == 0.0:
                r1[n] = ninf
                r2[n] = ninf
                p[0] = pn[0]; p[1] = pn[1]; p[2] = pn[2]
                piv = pivn
                continue
            e1 = a1 / n1
            e2 = a2 / n1
            proj = e1.conjugate() * b1 + e2.conjugate() * b2
            c1 = b1 - proj * e1
            c2 = b2 - proj * e2
            n2 = sqrt(cabs(c1) ** 2 + cabs(c2) ** 2)
            r1[n] = log(n1)
            if n2 == 0.0:
                r2[n] = ninf
                c1 = -e2.conjugate()
                c2 = e1.conjugate()
                n2 = 1.0
            else:
                r2[n] = log(n2)
            q11 = e1; q21 = e2
            q12 = c1 / n2; q22 = c2 / n2
            p[0] = pn[0]; p[1] = pn[1]; p[2] = pn[2]
            piv = pivn
    last = np.array([p[0], p[1], p[2]], dtype=np.complex128)
    frame = np.array([[q11, q12], [q21, q22]], dtype=np.complex128)
    return r1a, r2a, last, frame
