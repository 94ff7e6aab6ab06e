"""Acceptance criteria as plain functions, shared by ``saddlelab report`` and the test suite.

Each ``criterion_k`` returns a :class:`CriterionResult` whose ``parts`` maps
sub-check names to booleans; ``passed`` is their conjunction.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .certify import CERTIFIED, FALSIFIED, _Boxes, _defect_bounds, _sj_bounds, _trap_bounds
from .certify import certify_sj, certify_trapping, spot_check_trapping
from .empirical import EmpiricalMeasure
from .endo import chart_jacobians, eval_lift, eval_points, family_Ftheta, lift_jacobian, sample_region
from .endo import sj_ratio, sj_ratio_array, squaring_map
from .green import conic_arc_disk, error_bound, green_array, green_lift
from .measures import basin_seeds, birkhoff, disintegration_check, equidistribution_report, non_increasing
from .measures import skewed_reference
from .measures import nu_reference, pushforward_check, wasserstein1
from .orbits import backward_orbit, conic_stable_family, flat_graph, forward_orbit, frame_at_fixed_point
from .orbits import graph_pullback, graph_transform, holonomy_probe, local_stable, lyapunov, make_frame
from .periodic import default_strategy, find_periodic, lefschetz_expected
from .projgeom import conic_defect, conic_defect_array, conic_parameter, conic_point, dist, dist_matrix, point

THETA = 0.01
DELTA = 0.05


@dataclass
class CriterionResult:
    number: int
    title: str
    parts: dict[str, bool]
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.parts.values())

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [k for k, v in self.parts.items() if not v]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"criterion {self.number:2d} {status}  {self.title} [{self.seconds:.1f}s]{tail}"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed, "parts": dict(self.parts),
                "details": self.details, "seconds": round(self.seconds, 3)}


def _timed(number: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(**kw) -> CriterionResult:
            t0 = time.perf_counter()
            parts, details = fn(**kw)
            return CriterionResult(number, title, parts, details, time.perf_counter() - t0)
        return run
    return wrap


@functools.lru_cache(maxsize=None)
def _periodic(theta: float, n: int, delta: float):
    f = family_Ftheta(theta)
    return tuple(find_periodic(f, n, delta, default_strategy(f, n)))


# --- 1-2: certification ---------------------------------------------------------------


@_timed(1, "trapping certification")
def criterion_1(theta=THETA, delta=DELTA, margin=0.025, max_depth=14, samples=100_000):
    f = family_Ftheta(theta)
    t0 = time.perf_counter()
    cert = certify_trapping(f, delta, margin, max_depth)
    elapsed = time.perf_counter() - t0
    violations = spot_check_trapping(f, delta, margin, samples)
    neg = certify_trapping(family_Ftheta(0.9), delta, margin, max_depth)
    parts = {
        "certified": cert.status == CERTIFIED,
        "within_60s": elapsed <= 60.0,
        "depth_le_14": cert.max_depth_reached <= 14,
        "zero_violations": violations == 0,
        "negative_control": neg.status != CERTIFIED,
    }
    return parts, {"certificate": cert.to_json(), "seconds": elapsed, "violations": violations,
                   "negative_status": neg.status}


@_timed(2, "small-Jacobian certification")
def criterion_2(theta=THETA, delta_n=DELTA, alpha=0.2, alpha_bad=0.01, max_depth=16):
    f = family_Ftheta(theta)
    good = certify_sj(f, alpha, delta_n, max_depth)
    bad = certify_sj(f, alpha_bad, delta_n, max_depth)
    verified = False
    if bad.status == FALSIFIED and bad.witness is not None:
        c = bad.witness.center
        verified = conic_defect(c) <= delta_n and sj_ratio(f, c) >= alpha_bad
    parts = {"certified": good.status == CERTIFIED, "falsified": bad.status == FALSIFIED,
             "witness_verified": verified}
    return parts, {"certificate": good.to_json(), "falsified": bad.to_json()}


# --- 3-5: periodic points, equidistribution, hyperbolicity ---------------------------------


@_timed(3, "Lefschetz counts")
def criterion_3(theta=THETA, delta=DELTA, n_max=8):
    t0 = time.perf_counter()
    counts, worst = [], 0.0
    for n in range(1, n_max + 1):
        pts = _periodic(theta, n, delta)
        counts.append(len(pts))
        worst = max([worst] + [pp.residual for pp in pts])
    elapsed = time.perf_counter() - t0
    expected = [lefschetz_expected(2, n) for n in range(1, n_max + 1)]
    parts = {"counts": counts == expected, "residuals": worst < 1e-9, "within_5min": elapsed <= 300.0}
    return parts, {"counts": counts, "expected": expected, "max_residual": worst, "seconds": elapsed}


@_timed(4, "equidistribution of periodic points")
def criterion_4(theta=THETA, delta=DELTA, n_max=8, reference_atoms=512):
    f = family_Ftheta(theta)
    rows = equidistribution_report(f, range(1, n_max + 1), delta, reference_atoms)
    w = [r.w1 for r in rows]
    bounds = [math.pi / (2**r.n - 1) + 0.01 for r in rows]
    parts = {"non_increasing": non_increasing(w, 0.1), "below_bound": all(a <= b for a, b in zip(w, bounds))}
    return parts, {"rows": [r.to_json() for r in rows], "bounds": bounds}


@_timed(5, "saddle hyperbolicity")
def criterion_5(theta=THETA, steps=100_000, seed=7, n_max=8, delta=DELTA):
    f = family_Ftheta(theta)
    p0 = conic_point(np.exp(2j * np.pi * 0.2718281828))
    t0 = time.perf_counter()
    est = lyapunov(f, p0, steps, seed)
    elapsed = time.perf_counter() - t0
    chi2 = math.log(2 * theta)
    circle, other = [], []
    for n in range(1, n_max + 1):
        for pp in _periodic(theta, n, delta):
            w = conic_parameter(pp.point)
            (circle if abs(abs(w) - 1) < 1e-9 else other).append(pp.cls)
    parts = {
        "chi1": abs(est.chi1 - math.log(2)) <= 0.01,
        "chi2": abs(est.chi2 - chi2) <= 0.02,
        "within_30s": elapsed < 30.0,
        "circle_points_saddle": bool(circle) and all(c == "saddle" for c in circle),
    }
    return parts, {"lyapunov": est.to_json(), "seconds": elapsed, "circle_points": len(circle),
                   "off_circle_classes": sorted(set(other))}


# --- 6-9: measures ------------------------------------------------------------------------


@_timed(6, "conditionals induced by the Green current")
def criterion_6(theta=THETA, arcs=16, depth=40):
    f = family_Ftheta(theta)
    rep = disintegration_check(f, (0.0, math.pi), arcs, depth)
    ctl = disintegration_check(f, (0.0, math.pi), arcs, depth, reference_angles=skewed_reference())
    parts = {"discrepancy": rep.max_discrepancy < 0.1, "skewed_control": ctl.max_discrepancy > 0.3}
    return parts, {"report": rep.to_json(), "skewed_control": ctl.max_discrepancy}


@_timed(7, "holonomy invariance")
def criterion_7(theta=THETA, center=0.7, half_width=0.4, count=32, shift=0.005, bend=0.15, depth=40):
    f = family_Ftheta(theta)
    leaves, tg = conic_stable_family(f, center, half_width, count)
    D = conic_arc_disk(center, half_width)
    D2 = conic_arc_disk(center, half_width, shift=shift, bend=bend)
    same = holonomy_probe(f, D, D, leaves, depth, t_guesses=tg)
    moved = holonomy_probe(f, D, D2, leaves, depth, t_guesses=tg)
    parts = {"discrepancy": moved.max_discrepancy < 0.05, "identical_is_zero": same.max_discrepancy == 0.0,
             "has_data": moved.flag != "no data"}
    return parts, {"moved": moved.to_json(), "identical": same.to_json()}


@_timed(8, "pushforward convergence")
def criterion_8(theta=THETA, n_max=10, depth=40, atom_count=1000):
    f = family_Ftheta(theta)
    disk = conic_arc_disk(0.0, math.pi / 8)
    rows = pushforward_check(f, disk, range(0, n_max + 1), depth, atom_count)
    w = [r.w1 for r in rows]
    parts = {"non_increasing": non_increasing(w, 0.1), "below_0.05_at_end": w[-1] < 0.05}
    return parts, {"rows": [r.to_json() for r in rows]}


@_timed(9, "Birkhoff basin statistics")
def criterion_9(theta=THETA, seeds=20, N=10_000, delta=DELTA, seed=0):
    f = family_Ftheta(theta)
    ref = nu_reference(f)
    w, d = [], []
    for p0 in basin_seeds(seeds, delta, seed):
        res = birkhoff(f, p0, N)
        w.append(wasserstein1(res.orbit_measure, ref))
        d.append(res.mean_conic_defect)
    parts = {"w1": max(w) < 0.05, "mean_defect": max(d) < 1e-3}
    return parts, {"max_w1": max(w), "max_mean_defect": max(d), "w1": w}


# --- 10: kernel invariant suites ----------------------------------------------------------


def _lift(f, V):
    return kernels.eval_lift(f.monos, f.coefs, np.asarray(V, dtype=complex))


def _random_points(rng, n):
    P = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    return kernels.normalize_rows(P)[0]


def suite_projgeom(rng) -> dict[str, bool]:
    P, Q, R = (_random_points(rng, 300) for _ in range(3))
    dpq = np.diag(dist_matrix(P, Q))
    dqp = np.diag(dist_matrix(Q, P))
    dqr = np.diag(dist_matrix(Q, R))
    dpr = np.diag(dist_matrix(P, R))
    lam = np.exp(1j * rng.uniform(0, 2 * np.pi, (300, 1))) * rng.uniform(0.1, 10, (300, 1))
    return {
        "identity": float(np.max(np.diag(dist_matrix(P, lam * P)))) < 1e-7,
        "symmetry": bool(np.allclose(dpq, dqp, atol=1e-14)),
        "triangle": bool(np.all(dpr <= dpq + dqr + 1e-12)),
        "scalar_api": abs(dist(point(*P[0]), point(*Q[0])) - dpq[0]) < 1e-12,
    }


def suite_endo(rng) -> dict[str, bool]:
    ok_h, ok_j = True, True
    for f in (family_Ftheta(THETA), family_Ftheta(0.3 + 0.2j), squaring_map(3)):
        V = rng.normal(size=(50, 3)) + 1j * rng.normal(size=(50, 3))
        lam = complex(rng.normal(), rng.normal())
        F = _lift(f, V)
        ok_h &= bool(np.allclose(_lift(f, lam * V), lam**f.degree * F, rtol=1e-12, atol=1e-12))
        h = 1e-6
        for v in V[:10]:
            J = lift_jacobian(f, v)
            for k in range(3):
                e = np.zeros(3, dtype=complex)
                e[k] = h
                fd = (eval_lift(f, v + e) - eval_lift(f, v - e)) / (2 * h)
                ok_j &= bool(np.allclose(fd, J[:, k], rtol=1e-6, atol=1e-6 * np.abs(J).max()))
    return {"homogeneity": ok_h, "fd_jacobian": ok_j}


def suite_green(rng) -> dict[str, bool]:
    f = family_Ftheta(THETA)
    P = sample_region(rng, 200, 0.3, off_conic=False)
    g10, g40 = green_array(f, P, 10), green_array(f, P, 40)
    cauchy = bool(np.all(np.abs(g40 - g10) <= error_bound(f, 10) + error_bound(f, 40)))
    V = P * rng.uniform(0.5, 2.0, (len(P), 1))
    fe = np.abs(green_lift(f, _lift(f, V), 40) - f.degree * green_lift(f, V, 40))
    return {"cauchy_bound": cauchy, "functional_equation": float(fe.max()) < 1e-9}


def suite_certify(rng, samples: int = 10_000) -> dict[str, bool]:
    """Enclosures from the box arithmetic must contain every sampled value."""
    f = family_Ftheta(THETA)
    nb, per = 100, samples // 100
    centers = sample_region(rng, nb, 0.1, off_conic=False)
    chart = np.argmax(np.abs(centers), axis=1)
    lo, hi = np.empty((nb, 4)), np.empty((nb, 4))
    pts = []
    for i in range(nb):
        a, b = [k for k in range(3) if k != chart[i]]
        u, v = centers[i, a], centers[i, b]
        c = np.array([u.real, u.imag, v.real, v.imag])
        r = rng.uniform(1e-4, 0.05)
        lo[i], hi[i] = c - r, c + r
        s = rng.uniform(lo[i], hi[i], (per, 4))
        P = np.zeros((per, 3), dtype=complex)
        P[:, chart[i]] = 1.0
        P[:, a] = s[:, 0] + 1j * s[:, 1]
        P[:, b] = s[:, 2] + 1j * s[:, 3]
        pts.append(P)
    boxes = _Boxes(chart, lo, hi, np.zeros(nb, dtype=np.int64))
    dlo, dhi = _defect_bounds(boxes)
    trap = _trap_bounds(f, boxes)
    sj = _sj_bounds(f, boxes)
    ok = {"defect": True, "image_defect": True, "sj": True}
    for i, P in enumerate(pts):
        d = conic_defect_array(P)
        ok["defect"] &= bool(np.all((d >= dlo[i]) & (d <= dhi[i])))
        ok["image_defect"] &= bool(np.all(conic_defect_array(eval_points(f, P)) <= trap[i]))
        ok["sj"] &= bool(np.all(sj_ratio_array(f, P) <= sj[i]))
    return ok


def _chart_map(f, src, dst, n):
    def g(u, v):
        w = np.zeros(3, dtype=complex)
        a, b = [k for k in range(3) if k != src]
        w[src], w[a], w[b] = 1.0, u, v
        for _ in range(n):
            w = eval_lift(f, w)
        c, d = [k for k in range(3) if k != dst]
        return np.array([w[c] / w[dst], w[d] / w[dst]])
    return g


def suite_orbits(rng) -> dict[str, bool]:
    f = family_Ftheta(THETA)
    chain = True
    for p in _random_points(rng, 20):
        q = eval_points(f, p[None])[0]
        r = eval_points(f, q[None])[0]
        i, j, k = (int(np.argmax(np.abs(x))) for x in (p, q, r))
        A = chart_jacobians(f, p[None], np.array([i]), np.array([j]))[0]
        B = chart_jacobians(f, q[None], np.array([j]), np.array([k]))[0]
        g = _chart_map(f, i, k, 2)
        a, b = [m for m in range(3) if m != i]
        u, v, h = p[a] / p[i], p[b] / p[i], 1e-6
        fd = np.column_stack([(g(u + h, v) - g(u - h, v)) / (2 * h), (g(u, v + h) - g(u, v - h)) / (2 * h)])
        chain &= bool(np.allclose(B @ A, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max()))
    # f carries the stable disk at q into the stable disk at f(q)
    q = conic_point(np.exp(0.9j))
    fq = point(*eval_points(f, np.array([q.coords]))[0])
    est = lyapunov(f, q, 2000)
    chi = (est.chi1, est.chi2)
    fr_q = make_frame(f, backward_orbit(f, q, 30), 0.1, 0.1, 30, 0, chi)
    fr_fq = make_frame(f, backward_orbit(f, fq, 30), 0.1, 0.1, 30, 0, chi)
    Wq, Wfq = local_stable(f, q, fr_q), local_stable(f, fq, fr_fq)
    off = Wfq.offset(eval_points(f, Wq.sample(64, 0.5)))
    compat = float(off.max()) < 1e-6 * fr_fq.radius
    # unstable graph at the fixed point [1:1:1] stays on the invariant conic
    fr = frame_at_fixed_point(f, point(1, 1, 1), 0.05, 0.05)
    gr = flat_graph(fr)
    for _ in range(40):
        gr = graph_transform(f, fr, fr, gr)
    on_conic = float(conic_defect_array(gr.sample(64)).max()) < 1e-10
    return {"chain_rule": chain, "stable_f_compatible": compat, "unstable_on_conic": on_conic}


def suite_measures(rng) -> dict[str, bool]:
    def rand(n):
        return EmpiricalMeasure(_random_points(rng, n), rng.uniform(0.1, 1, n)).normalized()

    a, b, c = rand(40), rand(50), rand(60)
    ab, ba = wasserstein1(a, b), wasserstein1(b, a)
    f = family_Ftheta(THETA)
    push = a.pushforward(f, 3)
    raw = EmpiricalMeasure(_random_points(rng, 30), rng.uniform(0.1, 1, 30))
    return {
        "identity": wasserstein1(a, a) < 1e-12,
        "symmetry": abs(ab - ba) < 1e-9,
        "triangle": wasserstein1(a, c) <= ab + wasserstein1(b, c) + 1e-9,
        "positivity": ab > 0,
        "mass_pushforward": abs(push.mass - a.mass) < 1e-12,
        "mass_normalized": abs(raw.normalized().mass - 1.0) < 1e-12,
    }


SUITES = {"projgeom": suite_projgeom, "endo": suite_endo, "green": suite_green, "certify": suite_certify,
          "orbits": suite_orbits, "measures": suite_measures}


@_timed(10, "kernel invariant suites")
def criterion_10(seed=0, budget=120.0):
    parts, details = {}, {}
    for name, suite in SUITES.items():
        t0 = time.perf_counter()
        res = suite(np.random.default_rng(seed))
        dt = time.perf_counter() - t0
        parts[name] = all(res.values()) and dt <= budget
        details[name] = {"checks": res, "seconds": dt}
    return parts, details


# --- 11: exactness sentinels --------------------------------------------------------------


@_timed(11, "exactness sentinels")
def criterion_11(theta=THETA, seed=0):
    rng = np.random.default_rng(seed)
    P = _random_points(rng, 1000)
    sq = green_array(squaring_map(2), P, 40)
    f = family_Ftheta(theta)
    w = np.exp(2j * np.pi * rng.uniform(size=200)) * rng.uniform(0.2, 5.0, 200)
    C = np.stack([w * w, np.ones_like(w), w], axis=1)
    img = kernels.normalize_rows(_lift(f, C))[0]
    conic = float(conic_defect_array(img).max())
    fr = frame_at_fixed_point(f, point(1, 1, 1), 0.05, 0.05)
    gr, step = flat_graph(fr), math.inf
    for _ in range(60):
        nxt = graph_transform(f, fr, fr, gr)
        step = float(np.abs(nxt.coeffs - gr.coeffs).max())
        gr = nxt
        if step < 1e-13:
            break
    fixed = float(np.abs(graph_transform(f, fr, fr, gr).coeffs - gr.coeffs).max())
    # straight-axis map: the flat graphs themselves are invariant
    from .endo import make_map
    g = make_map([[((2, 0, 0), 1)], [((0, 2, 0), 1)], [((1, 0, 1), 0.5), ((0, 0, 2), 1)]], 2)
    fa = frame_at_fixed_point(g, point(1, 1, 0), 0.05, 0.05)
    flat_u = float(np.abs(graph_transform(g, fa, fa, flat_graph(fa)).coeffs).max())
    flat_s = float(np.abs(graph_pullback(g, fa, fa, flat_graph(fa, "vertical")).coeffs).max())
    parts = {
        "squaring_green_zero": bool(np.all(sq == 0.0)),
        "conic_invariance": conic < 1e-12,
        "unstable_graph_fixed": fixed < 1e-10,
        "flat_axes_invariant": max(flat_u, flat_s) < 1e-10,
    }
    return parts, {"squaring_max": float(np.abs(sq).max()), "conic_defect": conic, "graph_fixed_residual": fixed,
                   "axis_residuals": [flat_u, flat_s]}


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 12)}


def run_all(numbers=None, echo=None) -> list[CriterionResult]:
    out = []
    for k in numbers or sorted(CRITERIA):
        res = CRITERIA[k]()
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
