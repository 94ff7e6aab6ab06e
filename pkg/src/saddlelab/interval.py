"""Outward-rounded interval primitives and batched Taylor-form enclosures.

Two layers live here. ``RealInterval`` and ``ComplexBox`` are scalar types
whose every primitive rounds outward by one ulp with ``nextafter``. The
``TaylorBatch`` engine is the workhorse of certification: it expands
polynomials about box centres in the offsets ``(h_u, h_v)`` and carries a
rigorous bound on the floating-point error of every coefficient, so that
cancellation (for instance the ``x^2 y^2`` terms of ``Z^2 - XY``) happens
exactly at the polynomial level instead of blowing up interval widths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_INF = math.inf
_U = 2.0**-53
# relative slack covering accumulated rounding in one short dot product/sum
_GAMMA = 1e-13
_REL = 1e-12


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


@dataclass(frozen=True)
class RealInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "RealInterval":
        return cls(float(x), float(x))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def __add__(self, o):
        o = _as_iv(o)
        return RealInterval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __neg__(self):
        return RealInterval(-self.hi, -self.lo)

    def __sub__(self, o):
        o = _as_iv(o)
        return RealInterval(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, o):
        return _as_iv(o) - self

    def __mul__(self, o):
        o = _as_iv(o)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return RealInterval(_down(min(ps)), _up(max(ps)))

    __rmul__ = __mul__

    def sqr(self) -> "RealInterval":
        if self.lo >= 0:
            return RealInterval(_down(self.lo * self.lo), _up(self.hi * self.hi))
        if self.hi <= 0:
            return RealInterval(_down(self.hi * self.hi), _up(self.lo * self.lo))
        return RealInterval(0.0, _up(max(self.lo * self.lo, self.hi * self.hi)))

    def sqrt(self) -> "RealInterval":
        if self.hi < 0:
            raise ValueError("sqrt of a negative interval")
        return RealInterval(max(0.0, _down(math.sqrt(max(self.lo, 0.0)))), _up(math.sqrt(self.hi)))

    def __truediv__(self, o):
        o = _as_iv(o)
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("interval divisor contains 0")
        qs = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return RealInterval(_down(min(qs)), _up(max(qs)))

    def hull(self, o: "RealInterval") -> "RealInterval":
        return RealInterval(min(self.lo, o.lo), max(self.hi, o.hi))


def _as_iv(x) -> RealInterval:
    return x if isinstance(x, RealInterval) else RealInterval.point(float(x))


@dataclass(frozen=True)
class ComplexBox:
    re: RealInterval
    im: RealInterval

    @classmethod
    def point(cls, z: complex) -> "ComplexBox":
        z = complex(z)
        return cls(RealInterval.point(z.real), RealInterval.point(z.imag))

    @classmethod
    def around(cls, z: complex, half_width: float) -> "ComplexBox":
        z = complex(z)
        return cls(
            RealInterval(_down(z.real - half_width), _up(z.real + half_width)),
            RealInterval(_down(z.imag - half_width), _up(z.imag + half_width)),
        )

    @property
    def center(self) -> complex:
        return complex(self.re.mid, self.im.mid)

    def contains(self, z: complex) -> bool:
        return self.re.contains(z.real) and self.im.contains(z.imag)

    def __add__(self, o):
        o = _as_cb(o)
        return ComplexBox(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = _as_cb(o)
        return ComplexBox(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return _as_cb(o) - self

    def __neg__(self):
        return ComplexBox(-self.re, -self.im)

    def __mul__(self, o):
        o = _as_cb(o)
        return ComplexBox(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def sqr(self) -> "ComplexBox":
        return ComplexBox(self.re.sqr() - self.im.sqr(), 2.0 * (self.re * self.im))

    def abs2(self) -> RealInterval:
        return self.re.sqr() + self.im.sqr()

    def modulus(self) -> RealInterval:
        return self.abs2().sqrt()


def _as_cb(x) -> ComplexBox:
    return x if isinstance(x, ComplexBox) else ComplexBox.point(complex(x))


# --- batched Taylor forms -----------------------------------------------------


@lru_cache(maxsize=8)
def _layout(D: int):
    """Monomial layout for total degree <= D and the 0/1 product-scatter matrix."""
    mons = [(i, j) for s in range(D + 1) for i in range(s, -1, -1) for j in [s - i]]
    index = {m: k for k, m in enumerate(mons)}
    K = len(mons)
    S = np.zeros((K * K, K))
    for a, (i1, j1) in enumerate(mons):
        for b, (i2, j2) in enumerate(mons):
            m = (i1 + i2, j1 + j2)
            if m in index:
                S[a * K + b, index[m]] = 1.0
    ei = np.array([m[0] for m in mons])
    ej = np.array([m[1] for m in mons])
    return mons, index, S, ei, ej


class TaylorBatch:
    """N polynomials in ``(h_u, h_v)`` truncated to total degree ``D``.

    ``c`` holds computed complex coefficients and ``e`` a rigorous upper bound
    on ``|exact - computed|`` coefficientwise. Truncation is never lossy in
    use: callers choose ``D`` at least the degree of every polynomial formed.
    """

    __slots__ = ("c", "e", "D")

    def __init__(self, c: np.ndarray, e: np.ndarray, D: int):
        self.c = c
        self.e = e
        self.D = D

    @classmethod
    def constant(cls, values, D: int) -> "TaylorBatch":
        v = np.asarray(values, dtype=complex).ravel()
        K = len(_layout(D)[0])
        c = np.zeros((len(v), K), dtype=complex)
        c[:, 0] = v
        return cls(c, np.zeros((len(v), K)), D)

    @classmethod
    def affine(cls, center, du: float, dv: float, D: int) -> "TaylorBatch":
        """``center + du*h_u + dv*h_v`` (exact coefficients)."""
        t = cls.constant(center, D)
        _, index, _, _, _ = _layout(D)
        if D >= 1:
            t.c[:, index[(1, 0)]] = du
            t.c[:, index[(0, 1)]] = dv
        return t

    def __add__(self, o: "TaylorBatch") -> "TaylorBatch":
        c = self.c + o.c
        e = (self.e + o.e + 2 * _U * np.abs(c)) * (1 + _REL)
        return TaylorBatch(c, e, self.D)

    def __sub__(self, o: "TaylorBatch") -> "TaylorBatch":
        c = self.c - o.c
        e = (self.e + o.e + 2 * _U * np.abs(c)) * (1 + _REL)
        return TaylorBatch(c, e, self.D)

    def scale(self, s: complex) -> "TaylorBatch":
        c = self.c * s
        e = (self.e * abs(s) + 2 * _U * np.abs(c)) * (1 + _REL)
        return TaylorBatch(c, e, self.D)

    def __mul__(self, o: "TaylorBatch") -> "TaylorBatch":
        _, _, S, _, _ = _layout(self.D)
        N, K = self.c.shape

        def conv(a, b):
            return (a[:, :, None] * b[:, None, :]).reshape(N, K * K) @ S

        aa, ab = np.abs(self.c), np.abs(o.c)
        c = conv(self.c, o.c)
        e = conv(aa, o.e) + conv(self.e, ab) + conv(self.e, o.e) + _GAMMA * conv(aa, ab)
        return TaylorBatch(c, e * (1 + _REL), self.D)

    def modulus_bounds(self, ru: np.ndarray, rv: np.ndarray, half=None):
        """Lower and upper bounds of ``|P(h)|`` over ``|h_u| <= ru, |h_v| <= rv``.

        If ``half`` (N,4) gives the real/imaginary half-widths of rectangles
        ``h_u, h_v`` inside those disks, the affine part is enclosed exactly as
        a complex rectangle and only the higher-order terms use disk bounds.
        """
        _, index, _, ei, ej = _layout(self.D)
        ru = np.asarray(ru, dtype=float)
        rv = np.asarray(rv, dtype=float)
        w = (ru[:, None] ** ei[None, :]) * (rv[:, None] ** ej[None, :]) * (1 + _REL)
        mag = (np.abs(self.c) + self.e) * w
        tail = np.sum(mag[:, 1:], axis=1) * (1 + _REL)
        c0 = np.abs(self.c[:, 0])
        hi = (c0 + self.e[:, 0] + tail) * (1 + _REL)
        lo = np.maximum(c0 - self.e[:, 0] - tail - 8 * _U * hi, 0.0)
        if half is None or self.D < 1:
            return lo, hi
        # over the real rectangles every monomial h^a lies in a complex
        # rectangle, so the polynomial lies in a zonotope (centre plus two
        # generators per monomial), bounded through its support function
        half = np.asarray(half, dtype=float)
        pu = _rect_powers(half[:, 0], half[:, 1], self.D)
        pv = _rect_powers(half[:, 2], half[:, 3], self.D)
        nr, ni = _DIRS.real[None, :], _DIRS.imag[None, :]

        def dot(z):
            return z.real[:, None] * nr + z.imag[:, None] * ni

        slack = np.sum(self.e * w, axis=1) * (1 + _REL) + _GAMMA * hi
        # two variants: every monomial in the zonotope, or only the affine
        # part with disk bounds for the rest; both are sound, keep the best
        centre = dot(self.c[:, 0])
        spread_all = np.zeros_like(centre)
        centre_all = centre.copy()
        spread_aff = np.zeros_like(centre)
        disk_rest = np.zeros(len(ru))
        for k, (i, j) in enumerate(_layout(self.D)[0][1:], start=1):
            ck = self.c[:, k]
            r_lo, r_hi, i_lo, i_hi = _rect_mul(*pu[i], *pv[j])
            mid = 0.5 * (r_lo + r_hi) + 0.5j * (i_lo + i_hi)
            g = np.abs(dot(ck * (0.5 * (r_hi - r_lo)))) + np.abs(dot(1j * ck * (0.5 * (i_hi - i_lo))))
            centre_all += dot(ck * mid)
            spread_all += g
            if i + j == 1:
                spread_aff += g
            else:
                disk_rest += np.abs(ck) * w[:, k]
        disk_rest = disk_rest[:, None] * (1 + _REL)
        z_lo = np.maximum(np.max(centre_all - spread_all, axis=1), np.max(centre - spread_aff - disk_rest, axis=1))
        z_hi = np.minimum(np.max(centre_all + spread_all, axis=1), np.max(centre + spread_aff + disk_rest, axis=1))
        z_hi = z_hi / _COS
        lo2 = np.maximum(z_lo * (1 - _REL) - slack, 0.0)
        hi2 = (np.maximum(z_hi, 0.0) + slack) * (1 + _REL)
        return np.maximum(lo, lo2), np.minimum(hi, hi2)


def _mul_iv(alo, ahi, blo, bhi):
    p = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return p.min(axis=0), p.max(axis=0)


def _rect_mul(ar_lo, ar_hi, ai_lo, ai_hi, br_lo, br_hi, bi_lo, bi_hi):
    p_lo, p_hi = _mul_iv(ar_lo, ar_hi, br_lo, br_hi)
    q_lo, q_hi = _mul_iv(ai_lo, ai_hi, bi_lo, bi_hi)
    r_lo, r_hi = _mul_iv(ar_lo, ar_hi, bi_lo, bi_hi)
    s_lo, s_hi = _mul_iv(ai_lo, ai_hi, br_lo, br_hi)
    return p_lo - q_hi, p_hi - q_lo, r_lo + s_lo, r_hi + s_hi


def _rect_powers(hr, hi_, D):
    """Interval enclosures of ``h^k`` for ``h`` in ``[-hr,hr] + i[-hi_,hi_]``, k = 0..D."""
    one = (np.ones_like(hr), np.ones_like(hr), np.zeros_like(hr), np.zeros_like(hr))
    h = (-hr, hr, -hi_, hi_)
    out = [one]
    for _ in range(D):
        out.append(_rect_mul(*out[-1], *h))
    return out


_NDIR = 32
_DIRS = np.exp(2j * np.pi * np.arange(_NDIR) / _NDIR)
# slightly below cos(pi/N): the circumscribed polygon's circumradius factor
_COS = math.cos(math.pi / _NDIR) * (1 - 1e-12)


def disk_radius(half_re: np.ndarray, half_im: np.ndarray) -> np.ndarray:
    """Radius (rounded up) of the disk circumscribing a rectangle with these half-widths."""
    return np.nextafter(np.hypot(half_re, half_im) * (1 + _REL), np.inf)


__all__ = ["ComplexBox", "RealInterval", "TaylorBatch", "disk_radius"]
