"""Points of the complex projective plane.

Every point is stored through its max-normalized representative: the
coordinate of largest modulus (smallest index on ties) is divided out so it
equals exactly ``1+0j`` and the other two coordinates have modulus <= 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NearChartBoundary, ZeroVector

ZERO_TOL = 1e-300
CHART_TOL = 1e-6
CHART_SLACK = 1e-12


def _check_finite(z: complex) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite coordinate {z!r}")
    return z


@dataclass(frozen=True)
class ProjPoint:
    """Normalized homogeneous point ``[x:y:z]``. Build with :func:`normalize`."""

    x: complex
    y: complex
    z: complex
    pivot: int

    @property
    def coords(self) -> tuple[complex, complex, complex]:
        return (self.x, self.y, self.z)

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.coords, dtype=complex)

    def __getitem__(self, i: int) -> complex:
        return self.coords[i]

    def __iter__(self):
        return iter(self.coords)


@dataclass(frozen=True)
class AffinePair:
    chart: int
    u: complex
    v: complex


def pivot_index(raw) -> int:
    mods = [abs(c) for c in raw]
    m = max(mods)
    return mods.index(m)


def normalize(raw) -> ProjPoint:
    """Max-normalized representative of a nonzero complex triple."""
    c = [_check_finite(r) for r in raw]
    if len(c) != 3:
        raise ValueError("expected three homogeneous coordinates")
    mods = [abs(t) for t in c]
    m = max(mods)
    if m < ZERO_TOL:
        raise ZeroVector("all homogeneous coordinates vanish")
    piv = mods.index(m)
    p = c[piv]
    out = []
    for i, t in enumerate(c):
        if i == piv:
            out.append(1 + 0j)
            continue
        q = t / p
        a = abs(q)
        # keep strict ordering before the pivot so renormalizing is a no-op
        if i < piv and a >= 1.0:
            q = q / a * math.nextafter(1.0, 0.0)
        elif a > 1.0:
            q = q / a
        out.append(q)
    return ProjPoint(out[0], out[1], out[2], piv)


def point(x, y, z) -> ProjPoint:
    return normalize((x, y, z))


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _norm(a) -> float:
    return math.sqrt(sum(abs(t) ** 2 for t in a))


def dist(p, q) -> float:
    """Chordal distance ``|p ^ q| / (|p| |q|)``, the sine of the Fubini-Study angle."""
    a = p.coords if isinstance(p, ProjPoint) else tuple(p)
    b = q.coords if isinstance(q, ProjPoint) else tuple(q)
    d = _norm(_cross(a, b)) / (_norm(a) * _norm(b))
    return min(1.0, d)


def dist_matrix(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Pairwise chordal distances between rows of ``P`` (n,3) and ``Q`` (m,3)."""
    P = np.asarray(P, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    P = P / np.linalg.norm(P, axis=1, keepdims=True)
    Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    ip = np.abs(P @ Q.conj().T) ** 2
    s = np.clip(1.0 - ip, 0.0, 1.0)
    # 1 - |<p,q>|^2 cancels catastrophically for close pairs; redo those with the minors of p ^ q
    i, j = np.nonzero(s < 1e-6)
    if len(i):
        a, b = P[i], Q[j]
        m = (np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]) ** 2 + np.abs(a[:, 0] * b[:, 2] - a[:, 2] * b[:, 0]) ** 2
             + np.abs(a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]) ** 2)
        s[i, j] = m
    return np.sqrt(s)


def _others(chart: int) -> tuple[int, int]:
    return tuple(i for i in range(3) if i != chart)  # type: ignore[return-value]


def to_chart(p: ProjPoint, chart: int) -> AffinePair:
    c = p.coords[chart]
    if abs(c) < CHART_TOL:
        raise NearChartBoundary(f"coordinate {chart} of {p} has modulus {abs(c):.3g}")
    a, b = _others(chart)
    return AffinePair(chart, p.coords[a] / c, p.coords[b] / c)


def lift_from_chart(chart: int, u: complex, v: complex) -> tuple[complex, complex, complex]:
    out = [0j, 0j, 0j]
    a, b = _others(chart)
    out[chart] = 1 + 0j
    out[a] = complex(u)
    out[b] = complex(v)
    return tuple(out)  # type: ignore[return-value]


def from_chart(pair: AffinePair) -> ProjPoint:
    return normalize(lift_from_chart(pair.chart, pair.u, pair.v))


def conic_defect(p) -> float:
    """``|z^2 - xy| / max(|x|,|y|,|z|)^2``; equals ``|z^2-xy|`` on the normalized representative."""
    if isinstance(p, ProjPoint):
        x, y, z = p.coords
        return abs(z * z - x * y)
    x, y, z = (complex(t) for t in p)
    m = max(abs(x), abs(y), abs(z))
    return abs(z * z - x * y) / (m * m)


def conic_defect_array(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=complex)
    m = np.max(np.abs(P), axis=1)
    return np.abs(P[:, 2] ** 2 - P[:, 0] * P[:, 1]) / m**2


def conic_point(w: complex) -> ProjPoint:
    """Point ``[w^2 : 1 : w]`` of the conic ``z^2 = xy``; ``w = inf`` gives ``[1:0:0]``."""
    if w == complex("inf") or (isinstance(w, float) and math.isinf(w)):
        return normalize((1, 0, 0))
    return normalize((w * w, 1, w))


def conic_parameter(p: ProjPoint) -> complex:
    """Inverse of :func:`conic_point` for points on (or very near) the conic."""
    x, y, z = p.coords
    if abs(y) >= abs(x):
        return z / y
    return x / z if abs(z) > 0 else complex("inf")


def circle_point(turns: float) -> complex:
    return cmath.exp(2j * math.pi * turns)
