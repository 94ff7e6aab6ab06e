"""Interval certification of the trapping region, the Jacobian bound and witness conics.

Boxes live in the three affine charts ``p_c = 1``; the two free coordinates
range over squares ``[-1,1]^2`` (real and imaginary parts), which cover the
closed unit polydisk of every chart and hence all of P^2. All enclosures are
scale-invariant ratios, so boxes reaching outside the unit polydisk are still
sound, merely redundant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .endo import HomPolyMap, sj_ratio_array
from .interval import ComplexBox, RealInterval, TaylorBatch, disk_radius
from .projgeom import ProjPoint, conic_defect, conic_defect_array, normalize

CERTIFIED = "Certified"
FALSIFIED = "Falsified"
UNKNOWN = "Unknown"

_REL = 1e-12
_OTHERS = ((1, 2), (0, 2), (0, 1))


@dataclass(frozen=True)
class ProjBox:
    chart: int
    u: ComplexBox
    v: ComplexBox

    @property
    def center(self) -> ProjPoint:
        raw = [0j, 0j, 0j]
        raw[self.chart] = 1.0
        a, b = _OTHERS[self.chart]
        raw[a], raw[b] = self.u.center, self.v.center
        return normalize(raw)

    def to_json(self) -> dict:
        return {
            "chart": self.chart,
            "u": [[self.u.re.lo, self.u.re.hi], [self.u.im.lo, self.u.im.hi]],
            "v": [[self.v.re.lo, self.v.re.hi], [self.v.im.lo, self.v.im.hi]],
        }

    @classmethod
    def around(cls, p: ProjPoint, half_width: float, chart: int | None = None) -> "ProjBox":
        c = p.pivot if chart is None else chart
        a, b = _OTHERS[c]
        s = p.coords[c]
        return cls(c, ComplexBox.around(p.coords[a] / s, half_width), ComplexBox.around(p.coords[b] / s, half_width))


@dataclass
class Certificate:
    status: str
    boxes_processed: int
    max_depth_reached: int
    bound_achieved: float
    witness: ProjBox | None = None
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "status": self.status,
            "boxes_processed": self.boxes_processed,
            "max_depth_reached": self.max_depth_reached,
            "bound_achieved": self.bound_achieved,
        }
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
            out["witness_center"] = [[z.real, z.imag] for z in self.witness.center.coords]
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    @property
    def exit_code(self) -> int:
        return {CERTIFIED: 0, FALSIFIED: 1}.get(self.status, 2)


# --- batched box arithmetic -----------------------------------------------------


class _Boxes:
    """Struct-of-arrays box list: chart, depth and 4 real intervals per box."""

    def __init__(self, chart, lo, hi, depth):
        self.chart = np.asarray(chart, dtype=np.int64)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.depth = np.asarray(depth, dtype=np.int64)

    def __len__(self):
        return len(self.chart)

    @classmethod
    def cover(cls) -> "_Boxes":
        return cls([0, 1, 2], -np.ones((3, 4)), np.ones((3, 4)), [0, 0, 0])

    def take(self, m) -> "_Boxes":
        return _Boxes(self.chart[m], self.lo[m], self.hi[m], self.depth[m])

    def centers(self):
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        cu = mid[:, 0] + 1j * mid[:, 1]
        cv = mid[:, 2] + 1j * mid[:, 3]
        ru = disk_radius(half[:, 0], half[:, 1])
        rv = disk_radius(half[:, 2], half[:, 3])
        return cu, cv, ru, rv

    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def split(self) -> "_Boxes":
        w = self.hi - self.lo
        k = np.argmax(w, axis=1)  # first widest dimension
        idx = np.arange(len(self))
        mid = 0.5 * (self.lo[idx, k] + self.hi[idx, k])
        lo1, hi1 = self.lo.copy(), self.hi.copy()
        hi1[idx, k] = mid
        lo2, hi2 = self.lo.copy(), self.hi.copy()
        lo2[idx, k] = mid
        return _Boxes(
            np.concatenate([self.chart, self.chart]),
            np.concatenate([lo1, lo2]),
            np.concatenate([hi1, hi2]),
            np.concatenate([self.depth + 1, self.depth + 1]),
        )

    def clip_to_polydisk(self) -> "_Boxes":
        """Shrink each coordinate rectangle to the bounding box of its part in the closed unit disk.

        Only the part of a box inside its chart's unit polydisk needs covering;
        the clip keeps that part (bounds are rounded outward).
        """
        lo, hi = self.lo.copy(), self.hi.copy()
        for re, im in ((0, 1), (2, 3)):
            for a, b in ((re, im), (im, re)):
                # |b| is at least its minimum over the interval, which caps |a|
                bmin = np.where(lo[:, b] > 0, lo[:, b], np.where(hi[:, b] < 0, -hi[:, b], 0.0))
                cap = np.nextafter(np.sqrt(np.maximum(1.0 - bmin * bmin, 0.0)), np.inf)
                cap = np.nextafter(cap * (1 + 1e-15), np.inf)
                lo[:, a] = np.maximum(lo[:, a], -cap)
                hi[:, a] = np.minimum(hi[:, a], cap)
        empty = np.any(lo > hi, axis=1)
        lo[empty] = self.lo[empty]
        hi[empty] = self.hi[empty]
        out = _Boxes(self.chart, lo, hi, self.depth)
        out.empty = empty
        return out

    def order(self) -> np.ndarray:
        """Widest first, ties broken by chart then coordinates (scheduling-invariant)."""
        w = np.max(self.hi - self.lo, axis=1)
        keys = [self.lo[:, k] for k in range(3, -1, -1)] + [self.chart, -w]
        return np.lexsort(keys)

    def proj_box(self, i: int) -> ProjBox:
        lo, hi = self.lo[i], self.hi[i]
        return ProjBox(
            int(self.chart[i]),
            ComplexBox(RealInterval(lo[0], hi[0]), RealInterval(lo[1], hi[1])),
            ComplexBox(RealInterval(lo[2], hi[2]), RealInterval(lo[3], hi[3])),
        )

    def center_points(self) -> np.ndarray:
        cu, cv, _, _ = self.centers()
        P = np.zeros((len(self), 3), dtype=complex)
        for c in range(3):
            m = self.chart == c
            a, b = _OTHERS[c]
            P[m, c] = 1.0
            P[m, a] = cu[m]
            P[m, b] = cv[m]
        return kernels.normalize_rows(P)[0]


def _coords(chart, cu, cv, D):
    """Taylor forms of the lift ``(x, y, z)`` with ``p_chart = 1``."""
    n = len(cu)
    one = TaylorBatch.constant(np.ones(n), D)
    tu = TaylorBatch.affine(cu, 1.0, 0.0, D)
    tv = TaylorBatch.affine(cv, 0.0, 1.0, D)
    a, b = _OTHERS[chart]
    out = [None, None, None]
    out[chart], out[a], out[b] = one, tu, tv
    return out


def _powers(t: TaylorBatch, top: int):
    pw = [TaylorBatch.constant(np.ones(t.c.shape[0]), t.D)]
    for _ in range(top):
        pw.append(pw[-1] * t)
    return pw


def _eval_components(f: HomPolyMap, xyz, D):
    pw = [_powers(t, f.degree) for t in xyz]
    n = xyz[0].c.shape[0]
    comps = []
    for k in range(3):
        acc = TaylorBatch.constant(np.zeros(n), D)
        for j, (a, b, c) in enumerate(f.monos):
            co = complex(f.coefs[k, j])
            if co == 0:
                continue
            acc = acc + (pw[0][a] * pw[1][b] * pw[2][c]).scale(co)
        comps.append(acc)
    return comps


def _derivative_components(f: HomPolyMap, xyz, D):
    pw = [_powers(t, f.degree) for t in xyz]
    n = xyz[0].c.shape[0]
    J = [[None] * 3 for _ in range(3)]
    for k in range(3):
        for m in range(3):
            acc = TaylorBatch.constant(np.zeros(n), D)
            for j, e in enumerate(f.monos):
                co = complex(f.coefs[k, j]) * int(e[m])
                if co == 0:
                    continue
                ee = list(e)
                ee[m] -= 1
                acc = acc + (pw[0][ee[0]] * pw[1][ee[1]] * pw[2][ee[2]]).scale(co)
            J[k][m] = acc
    return J


def _det3(J):
    t0 = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1])
    t1 = J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0])
    t2 = J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0])
    return t0 - t1 + t2


def _conic_poly(xyz):
    x, y, z = xyz
    return z * z - x * y


def _defect_bounds(boxes: _Boxes, D: int = 2, polydisk: bool = False):
    """(lo, hi) of ``|z^2-xy| / max|.|^2`` per box.

    With ``polydisk`` the bounds cover only the part of the box inside the
    chart's closed unit polydisk (where the pivot is the max coordinate);
    empty intersections get ``lo = inf``.
    """
    n = len(boxes)
    lo = np.empty(n)
    hi = np.empty(n)
    cu, cv, ru, rv = boxes.centers()
    hw = boxes.half_widths()
    for c in range(3):
        m = boxes.chart == c
        if not np.any(m):
            continue
        g = _conic_poly(_coords(c, cu[m], cv[m], D))
        glo, ghi = g.modulus_bounds(ru[m], rv[m], hw[m])
        umax = np.maximum(np.abs(cu[m]) + ru[m], np.abs(cv[m]) + rv[m]) * (1 + _REL)
        umin = np.maximum(_rect_min_modulus(boxes.lo[m, :2], boxes.hi[m, :2]),
                          _rect_min_modulus(boxes.lo[m, 2:], boxes.hi[m, 2:])) * (1 - _REL)
        mmax = np.maximum(1.0, umax)
        mmin = np.maximum(1.0, umin)
        if polydisk:
            lo[m] = np.where(umin > 1.0, np.inf, glo * (1 - 4 * _REL))
            hi[m] = ghi * (1 + 4 * _REL)
        else:
            lo[m] = glo / (mmax * mmax) * (1 - 4 * _REL)
            hi[m] = ghi / (mmin * mmin) * (1 + 4 * _REL)
    return lo, hi


def _rect_min_modulus(lo, hi):
    """Smallest modulus over axis-parallel rectangles ``[lo0,hi0] x [lo1,hi1]``."""
    a = np.where(lo[:, 0] > 0, lo[:, 0], np.where(hi[:, 0] < 0, -hi[:, 0], 0.0))
    b = np.where(lo[:, 1] > 0, lo[:, 1], np.where(hi[:, 1] < 0, -hi[:, 1], 0.0))
    return np.hypot(a, b)


def _image_lower_max(comps, ru, rv, half):
    lows = [t.modulus_bounds(ru, rv, half)[0] for t in comps]
    return np.maximum.reduce(lows)


def _trap_bounds(f: HomPolyMap, boxes: _Boxes):
    """Upper bound of the image conic defect per box (inf when undecidable)."""
    D = 2 * f.degree
    n = len(boxes)
    out = np.full(n, np.inf)
    cu, cv, ru, rv = boxes.centers()
    hw = boxes.half_widths()
    for c in range(3):
        m = boxes.chart == c
        if not np.any(m):
            continue
        comps = _eval_components(f, _coords(c, cu[m], cv[m], D), D)
        G = _conic_poly(comps)
        _, ghi = G.modulus_bounds(ru[m], rv[m], hw[m])
        mlo = _image_lower_max(comps, ru[m], rv[m], hw[m])
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(mlo > 0, ghi / (mlo * mlo) * (1 + 4 * _REL), np.inf)
        out[m] = val
    return out


def _sj_bounds(f: HomPolyMap, boxes: _Boxes):
    """Upper bound of the scale-free chart Jacobian determinant per box."""
    d = f.degree
    D = max(2 * d, 3 * (d - 1))
    n = len(boxes)
    out = np.full(n, np.inf)
    cu, cv, ru, rv = boxes.centers()
    hw = boxes.half_widths()
    for c in range(3):
        m = boxes.chart == c
        if not np.any(m):
            continue
        xyz = _coords(c, cu[m], cv[m], D)
        comps = _eval_components(f, xyz, D)
        det = _det3(_derivative_components(f, xyz, D))
        _, dhi = det.modulus_bounds(ru[m], rv[m], hw[m])
        mlo = _image_lower_max(comps, ru[m], rv[m], hw[m])
        pmax = np.maximum(1.0, np.maximum(np.abs(cu[m]) + ru[m], np.abs(cv[m]) + rv[m]) * (1 + _REL))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(mlo > 0, dhi * pmax**3 / (d * mlo**3) * (1 + 8 * _REL), np.inf)
        out[m] = val
    return out


def box_conic_defect(box: ProjBox) -> RealInterval:
    b = _Boxes(
        [box.chart],
        [[box.u.re.lo, box.u.im.lo, box.v.re.lo, box.v.im.lo]],
        [[box.u.re.hi, box.u.im.hi, box.v.re.hi, box.v.im.hi]],
        [0],
    )
    lo, hi = _defect_bounds(b)
    return RealInterval(float(lo[0]), float(hi[0]))


# --- subdivision driver -------------------------------------------------------------


def _run(bound_fn, target: float, delta: float, max_depth: int, falsify_fn, max_boxes: int = 5_000_000):
    work = _Boxes.cover()
    processed = 0
    max_depth_reached = 0
    achieved = 0.0
    unknown_witness = None
    flags: list[str] = []
    while len(work):
        work = work.take(work.order())
        processed += len(work)
        max_depth_reached = max(max_depth_reached, int(work.depth.max()))
        clipped = work.clip_to_polydisk()
        dlo, _ = _defect_bounds(clipped, polydisk=True)
        meets = (dlo <= delta) & ~clipped.empty
        work = work.take(meets)
        clipped = clipped.take(meets)
        if not len(work):
            break
        b = bound_fn(clipped)
        ok = b <= target
        if np.any(ok):
            achieved = max(achieved, float(np.max(b[ok])))
        bad = work.take(~ok)
        if len(bad):
            hit = falsify_fn(bad.center_points())
            if np.any(hit):
                i = int(np.argmax(hit))
                return Certificate(FALSIFIED, processed, max_depth_reached, float(np.max(b[~ok])), bad.proj_box(i))
        at_cap = bad.depth >= max_depth
        if np.any(at_cap) and unknown_witness is None:
            unknown_witness = bad.proj_box(int(np.argmax(at_cap)))
            flags.append("depth cap reached")
        work = bad.take(~at_cap).split() if np.any(~at_cap) else bad.take(~at_cap)
        if processed + len(work) > max_boxes:
            flags.append("box budget exhausted")
            return Certificate(UNKNOWN, processed, max_depth_reached, achieved, work.proj_box(0), flags)
    if unknown_witness is not None:
        return Certificate(UNKNOWN, processed, max_depth_reached, achieved, unknown_witness, flags)
    return Certificate(CERTIFIED, processed, max_depth_reached, achieved)


def certify_trapping(f: HomPolyMap, delta: float, margin: float, max_depth: int = 16) -> Certificate:
    """Certify ``f(U(delta))`` inside ``U(margin)`` with ``margin < delta``."""
    if not (0 < margin < delta < 1):
        raise ValueError("need 0 < margin < delta < 1")

    def falsify(P):
        img = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, P))[0]
        return (conic_defect_array(P) <= delta) & (conic_defect_array(img) > delta)

    return _run(lambda b: _trap_bounds(f, b), margin, delta, max_depth, falsify)


def certify_sj(f: HomPolyMap, alpha: float, delta_n: float, max_depth: int = 16) -> Certificate:
    """Certify ``|chart_det| < alpha`` on ``U(delta_n)``."""
    if not (alpha > 0 and 0 < delta_n < 1):
        raise ValueError("need alpha > 0 and 0 < delta_n < 1")
    # strict inequality: certify against the largest float below alpha
    target = math.nextafter(alpha, 0.0)

    def falsify(P):
        return (conic_defect_array(P) <= delta_n) & (sj_ratio_array(f, P) >= alpha)

    cert = _run(lambda b: _sj_bounds(f, b), target, delta_n, max_depth, falsify)
    if cert.status == UNKNOWN and cert.bound_achieved == 0.0 and cert.witness is not None:
        cert.flags.append("no finite derivative enclosure")
    return cert


def spot_check_trapping(f: HomPolyMap, delta: float, margin: float, samples: int = 100_000, seed: int = 0) -> int:
    """Number of sampled points of ``U(delta)`` whose image has defect above ``margin + 1e-9``."""
    from .endo import sample_region

    rng = np.random.default_rng(seed)
    P = sample_region(rng, samples, delta, off_conic=False)
    img = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, P))[0]
    return int(np.sum(conic_defect_array(img) > margin + 1e-9))


# --- witness conic -------------------------------------------------------------


@dataclass
class WitnessConic:
    """Conic ``a_i^2 (xy - z^2) = x_i^2 (a_1 a_2 - a_3^2)`` through ``a``.

    ``coefficients`` maps monomial names to the coefficients of the quadratic
    form (vanishing on the conic).
    """

    point: ProjPoint
    pivot: int
    k: complex
    coefficients: dict
    on_conic_residual: float
    identity_verified: bool
    defect_bound: float
    boxes_processed: int
    max_depth_reached: int
    certified: bool

    def to_json(self) -> dict:
        return {
            "point": [[z.real, z.imag] for z in self.point.coords],
            "pivot": self.pivot,
            "k": [self.k.real, self.k.imag],
            "coefficients": {m: [c.real, c.imag] for m, c in self.coefficients.items()},
            "on_conic_residual": self.on_conic_residual,
            "identity_verified": self.identity_verified,
            "defect_bound": self.defect_bound,
            "boxes_processed": self.boxes_processed,
            "max_depth_reached": self.max_depth_reached,
            "certified": self.certified,
        }


def _witness_param(pivot: int, k: complex, far: bool, cs, D: int):
    """Taylor forms of the conic parametrization in ``s`` (or ``t = 1/s`` if ``far``)."""
    n = len(cs)
    s = TaylorBatch.affine(cs, 1.0, 0.0, D)
    one = TaylorBatch.constant(np.ones(n), D)
    s2 = s * s
    ks2 = s2.scale(k)
    if pivot == 2:
        trip = (one, (s2.scale(1 + k)), s) if far else (s2, one.scale(1 + k), s)
    elif pivot == 0:
        trip = (one, s2 + one.scale(k), s) if far else (s2, one + ks2, s)
    else:
        trip = (s2 + one.scale(k), one, s) if far else (one + ks2, s2, s)
    return list(trip)


def witness_conic(p: ProjPoint, delta: float, max_depth: int = 10) -> WitnessConic:
    a = p.coords
    e = a[0] * a[1] - a[2] * a[2]
    i = p.pivot  # a_i = 1 on the normalized representative
    k = e / (a[i] * a[i])
    dp = conic_defect(p)
    if not dp < delta:
        raise ValueError("witness needs conic_defect(p) < delta")
    coeffs = {"xy": a[i] ** 2, "zz": -(a[i] ** 2)}
    name = ("xx", "yy", "zz")[i]
    coeffs[name] = coeffs.get(name, 0) - e
    res = abs(a[i] ** 2 * (a[0] * a[1] - a[2] ** 2) - a[i] ** 2 * e)
    bound = dp * (1 + 1e-6)
    D = 4
    ident = True
    processed = 0
    depth_reached = 0
    certified = True
    for far in (False, True):
        lo = np.array([[-1.0, -1.0]])
        hi = np.array([[1.0, 1.0]])
        depth = 0
        while len(lo):
            processed += len(lo)
            depth_reached = max(depth_reached, depth)
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            cs = mid[:, 0] + 1j * mid[:, 1]
            r = disk_radius(half[:, 0], half[:, 1])
            x, y, z = _witness_param(i, k, far, cs, D)
            # identity x y - z^2 - k x_i^2 == 0 as polynomials in s
            xi = (x, y, z)[i]
            rem = x * y - z * z - (xi * xi).scale(k)
            ident &= bool(np.all(np.abs(rem.c) <= rem.e + 1e-300))
            zero = np.zeros(len(cs))
            _, xi_hi = xi.modulus_bounds(r, zero)
            mlo = np.maximum.reduce([t.modulus_bounds(r, zero)[0] for t in (x, y, z)])
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(mlo > 0, (xi_hi / mlo) ** 2 * (1 + 4 * _REL), np.inf)
            # |x_i| <= max |x_j| always, so the ratio never needs to exceed 1
            val = abs(k) * (1 + 4 * _REL) * np.minimum(ratio, 1.0)
            good = val <= bound
            bad = ~good
            if not np.any(bad):
                break
            if depth >= max_depth:
                certified = False
                break
            lo, hi = lo[bad], hi[bad]
            w = hi - lo
            kdim = np.argmax(w, axis=1)
            idx = np.arange(len(lo))
            m = 0.5 * (lo[idx, kdim] + hi[idx, kdim])
            lo1, hi1, lo2, hi2 = lo.copy(), hi.copy(), lo.copy(), hi.copy()
            hi1[idx, kdim] = m
            lo2[idx, kdim] = m
            lo = np.concatenate([lo1, lo2])
            hi = np.concatenate([hi1, hi2])
            depth += 1
    certified = certified and ident and res <= 1e-12 and bound < delta
    return WitnessConic(p, i, complex(k), coeffs, float(res), ident, float(abs(k)), processed, depth_reached, certified)


__all__ = [
    "CERTIFIED", "FALSIFIED", "UNKNOWN", "Certificate", "ProjBox", "WitnessConic", "box_conic_defect",
    "certify_sj", "certify_trapping", "spot_check_trapping", "witness_conic",
]
