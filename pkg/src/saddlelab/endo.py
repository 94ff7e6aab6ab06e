"""Homogeneous polynomial endomorphisms of the projective plane."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import kernels
from .errors import (
    BranchBudgetExceeded,
    DegenerateMap,
    DegenerateParameter,
    DegreeMismatch,
    DegreeUnsupported,
    NearChartBoundary,
    SolverDivergence,
)
from .polyroots import durand_kerner, newton_polish, resultant_in_s
from .projgeom import (
    CHART_TOL,
    ProjPoint,
    conic_defect,
    conic_defect_array,
    dist,
    lift_from_chart,
    normalize,
)

Monomial = tuple[tuple[int, int, int], complex]


def monomials_of_degree(d: int) -> list[tuple[int, int, int]]:
    return [(i, j, d - i - j) for i in range(d, -1, -1) for j in range(d - i, -1, -1)]


def _parse_poly(poly, d: int) -> list[Monomial]:
    """Accept a dict ``{(i,j,k): coef}`` or an iterable of ``((i,j,k), coef)`` pairs."""
    items = poly.items() if isinstance(poly, dict) else poly
    out = []
    for exps, c in items:
        e = tuple(int(t) for t in exps)
        if len(e) != 3 or min(e) < 0:
            raise DegreeMismatch(f"bad exponent triple {exps!r}")
        if sum(e) != d:
            raise DegreeMismatch(f"monomial {e} has degree {sum(e)}, expected {d}")
        c = complex(c)
        if c != 0:
            out.append((e, c))
    return out


@dataclass(frozen=True)
class HomPolyMap:
    """Three homogeneous polynomials of a common degree ``d >= 2``."""

    degree: int
    components: tuple[tuple[Monomial, ...], tuple[Monomial, ...], tuple[Monomial, ...]]
    label: str = ""
    family: str | None = None
    params: dict[str, Any] = field(default_factory=dict, compare=False)
    monos: np.ndarray = field(init=False, repr=False, compare=False)
    coefs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = self.degree
        if d < 2:
            raise DegreeMismatch("degree must be at least 2")
        monos = monomials_of_degree(d)
        index = {m: n for n, m in enumerate(monos)}
        coefs = np.zeros((3, len(monos)), dtype=complex)
        for k, comp in enumerate(self.components):
            for e, c in comp:
                if sum(e) != d:
                    raise DegreeMismatch(f"component {k}: monomial {e} not of degree {d}")
                coefs[k, index[e]] += c
        object.__setattr__(self, "monos", np.array(monos, dtype=np.int64))
        object.__setattr__(self, "coefs", coefs)

    @property
    def circle_kind(self) -> str | None:
        """Known invariant circle carrying the doubling-type restriction, if any."""
        if self.family == "Ftheta":
            return "conic"
        if self.is_power_map():
            return "line"
        return None

    @property
    def supports_retract(self) -> bool:
        return self.circle_kind is not None

    def is_power_map(self) -> bool:
        d = self.degree
        target = np.zeros_like(self.coefs)
        monos = [tuple(m) for m in self.monos]
        for k in range(3):
            e = [0, 0, 0]
            e[k] = d
            target[k, monos.index(tuple(e))] = 1
        return bool(np.array_equal(self.coefs, target))

    def to_json(self) -> dict:
        comps = []
        for comp in self.components:
            comps.append(
                [{"exps": list(e), "re": c.real, "im": c.imag} for e, c in comp]
            )
        out = {"degree": self.degree, "components": comps, "label": self.label}
        if self.family:
            out["family"] = self.family
            out["params"] = {
                k: ({"re": v.real, "im": v.imag} if isinstance(v, complex) else v)
                for k, v in self.params.items()
            }
        return out


def make_map(components, degree: int, label: str = "", check: bool = True, **kw) -> HomPolyMap:
    comps = tuple(tuple(_parse_poly(c, degree)) for c in components)
    if len(comps) != 3:
        raise DegreeMismatch("expected three components")
    f = HomPolyMap(degree, comps, label, **kw)
    if check:
        check_nondegenerate(f)
    return f


def check_nondegenerate(f: HomPolyMap, samples: int = 64, seed: int = 0) -> None:
    """Probabilistic check that the components share no zero off the origin."""
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(samples, 3)) + 1j * rng.normal(size=(samples, 3))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    img = kernels.eval_lift(f.monos, f.coefs, V)
    if np.min(np.linalg.norm(img, axis=1)) < 1e-12:
        raise DegenerateMap(f"map {f.label!r} nearly vanishes on a sampled unit vector")


def map_from_json(obj: dict) -> HomPolyMap:
    fam = obj.get("family")
    if fam == "Ftheta":
        return family_Ftheta(_complex_param(obj["params"]["theta"]))
    if fam == "f0":
        p = obj["params"]
        return family_f0(_poly_from_json(p["P"]), _poly_from_json(p["Q"]), int(obj["degree"]))
    comps = [_poly_from_json(c) for c in obj["components"]]
    return make_map(comps, int(obj["degree"]), obj.get("label", ""))


def _complex_param(v) -> complex:
    if isinstance(v, dict):
        return complex(v.get("re", 0.0), v.get("im", 0.0))
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _poly_from_json(c) -> list[Monomial]:
    return [(tuple(m["exps"]), complex(m.get("re", 0.0), m.get("im", 0.0))) for m in c]


def family_f0(P, Q, d: int) -> HomPolyMap:
    """``[x:y:z] -> [P : Q : z^d]``, a perturbation of the line at infinity."""
    Pm = _parse_poly(P, d)
    Qm = _parse_poly(Q, d)
    Z = [((0, 0, d), 1 + 0j)]
    params = {"P": [{"exps": list(e), "re": c.real, "im": c.imag} for e, c in Pm],
              "Q": [{"exps": list(e), "re": c.real, "im": c.imag} for e, c in Qm]}
    return make_map([Pm, Qm, Z], d, label=f"f0(d={d})", family="f0", params=params)


def squaring_map(d: int = 2) -> HomPolyMap:
    return family_f0({(d, 0, 0): 1}, {(0, d, 0): 1}, d)


def family_Ftheta(theta: complex) -> HomPolyMap:
    """``[x:y:z] -> [x^2 : y^2 : xy + theta (z^2 - xy)]``; the conic ``z^2=xy`` attracts."""
    theta = complex(theta)
    if theta == 0:
        raise DegenerateParameter("theta = 0 has the common zero [0:0:1]")
    comps = [
        [((2, 0, 0), 1)],
        [((0, 2, 0), 1)],
        [((1, 1, 0), 1 - theta), ((0, 0, 2), theta)],
    ]
    # non-degenerate for theta != 0: x=y=0 forces theta z^2 = 0
    return make_map(comps, 2, label=f"Ftheta({theta:g})", check=False,
                    family="Ftheta", params={"theta": theta})


# --- evaluation -----------------------------------------------------------


def eval_lift(f: HomPolyMap, v) -> np.ndarray:
    return kernels.eval_lift(f.monos, f.coefs, np.asarray(v, dtype=complex).reshape(1, 3))[0]


def eval(f: HomPolyMap, p: ProjPoint) -> ProjPoint:  # noqa: A001 - mirrors the operation name
    return normalize(eval_lift(f, p.coords))


def iterate(f: HomPolyMap, p: ProjPoint, n: int) -> ProjPoint:
    for _ in range(n):
        p = eval(f, p)
    return p


def eval_points(f: HomPolyMap, P: np.ndarray) -> np.ndarray:
    """Normalized images of the rows of ``P``."""
    Q, _ = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, P))
    return Q


def lift_jacobian(f: HomPolyMap, v) -> np.ndarray:
    return kernels.lift_jacobian(f.monos, f.coefs, np.asarray(v, dtype=complex).reshape(1, 3))[0]


_OTHERS = ((1, 2), (0, 2), (0, 1))


def chart_jacobian_at(f: HomPolyMap, v, src: int, dst: int) -> np.ndarray:
    """Derivative of the chart expression of ``f`` from chart ``src`` to chart ``dst`` at ``v``."""
    v = np.asarray(v, dtype=complex)
    if abs(v[src]) < CHART_TOL:
        raise NearChartBoundary(f"source chart {src} inadmissible")
    v = v / v[src]
    F = eval_lift(f, v)
    if abs(F[dst]) < CHART_TOL * np.max(np.abs(F)):
        raise NearChartBoundary(f"target chart {dst} inadmissible")
    D = lift_jacobian(f, v)
    a = _OTHERS[src]
    k = _OTHERS[dst]
    fj = F[dst]
    J = np.empty((2, 2), dtype=complex)
    for r in range(2):
        for s in range(2):
            J[r, s] = (D[k[r], a[s]] * fj - F[k[r]] * D[dst, a[s]]) / fj**2
    return J


def chart_jacobians(f: HomPolyMap, P: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Vectorized :func:`chart_jacobian_at` over rows of ``P``."""
    P = np.asarray(P, dtype=complex)
    n = np.arange(P.shape[0])
    V = P / P[n, src][:, None]
    F = kernels.eval_lift(f.monos, f.coefs, V)
    D = kernels.lift_jacobian(f.monos, f.coefs, V)
    oth = np.array(_OTHERS)
    a = oth[src]
    k = oth[dst]
    fj = F[n, dst]
    J = np.empty((P.shape[0], 2, 2), dtype=complex)
    for r in range(2):
        for s in range(2):
            J[:, r, s] = (D[n, k[:, r], a[:, s]] * fj - F[n, k[:, r]] * D[n, dst, a[:, s]]) / fj**2
    return J


@dataclass(frozen=True)
class JacobianData:
    lift_det: complex
    chart_jac: np.ndarray
    chart_det: complex
    src_chart: int
    dst_chart: int


def jacobian(f: HomPolyMap, p: ProjPoint) -> JacobianData:
    fp = eval(f, p)
    J = chart_jacobian_at(f, p.coords, p.pivot, fp.pivot)
    ld = complex(np.linalg.det(lift_jacobian(f, p.coords)))
    return JacobianData(ld, J, complex(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]), p.pivot, fp.pivot)


def sj_ratio(f: HomPolyMap, p: ProjPoint) -> float:
    """``|det|`` of the chart derivative between max-normalized representatives."""
    return abs(jacobian(f, p).chart_det)


def sj_ratio_array(f: HomPolyMap, P: np.ndarray) -> np.ndarray:
    """Same quantity via ``|det DF| / (d max|F|^3)`` on normalized rows."""
    Q, _ = kernels.normalize_rows(P)
    D = kernels.lift_jacobian(f.monos, f.coefs, Q)
    F = kernels.eval_lift(f.monos, f.coefs, Q)
    return np.abs(np.linalg.det(D)) / (f.degree * np.max(np.abs(F), axis=1) ** 3)


# --- preimages ------------------------------------------------------------

def _unitary(rng) -> np.ndarray:
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    Q, R = np.linalg.qr(A)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


_FRAMES = [_unitary(np.random.default_rng(1000 + k)) for k in range(6)]


def preimages(f: HomPolyMap, q: ProjPoint, tol: float = 1e-8) -> list[tuple[ProjPoint, int]]:
    """All ``d^2`` preimages of ``q`` with multiplicity.

    Two equations ``F_k q_j - F_j q_k = 0`` are set up in a random unitary frame,
    one variable is eliminated by a sampled resultant, the univariate factor is
    solved by Durand-Kerner and every root is Newton-polished in two variables.
    """
    d = f.degree
    if d > 3:
        raise DegreeUnsupported(f"preimage solver handles d <= 3, got {d}")
    last_err = None
    for M in _FRAMES:
        try:
            return _preimages_in_frame(f, q, M, tol)
        except SolverDivergence as err:
            last_err = err
    raise last_err  # type: ignore[misc]


def _system(f, q):
    j = q.pivot
    k1, k2 = _OTHERS[j]
    qv = q.coords

    def val(v):
        F = kernels.eval_lift(f.monos, f.coefs, v)
        return np.stack([F[:, k1] * qv[j] - F[:, j] * qv[k1], F[:, k2] * qv[j] - F[:, j] * qv[k2]], axis=1)

    def grad(v):
        D = kernels.lift_jacobian(f.monos, f.coefs, v)
        return np.stack([D[:, k1, :] * qv[j] - D[:, j, :] * qv[k1], D[:, k2, :] * qv[j] - D[:, j, :] * qv[k2]], axis=1)

    return val, grad


def _preimages_in_frame(f, q, M, tol):
    d = f.degree
    val, grad = _system(f, q)
    tn = np.exp(2j * np.pi * np.arange(d + 1) / (d + 1))
    V = np.vander(tn, d + 1)  # highest power first

    def t_polys(s):
        pts = (M @ np.stack([np.full(d + 1, s), tn, np.ones(d + 1)])).T
        vals = val(pts)
        a = np.linalg.solve(V, vals[:, 0])
        b = np.linalg.solve(V, vals[:, 1])
        return a, b

    res, tail = resultant_in_s(t_polys, d * d)
    if not np.isfinite(tail) or tail > 1e-8 or abs(res[0]) < 1e-12 * np.max(np.abs(res)):
        raise SolverDivergence("resultant degree deficient in this frame")
    s_roots, _ = durand_kerner(res)
    s_roots = newton_polish(res, s_roots)
    sols = []
    for s in s_roots:
        a, b = t_polys(s)
        t_roots, _ = durand_kerner(a)
        if len(t_roots) == 0:
            continue
        bt = np.abs(np.polyval(b, t_roots))
        t = t_roots[int(np.argmin(bt))]
        st = _newton2(val, grad, M, complex(s), complex(t))
        sols.append(st)
    pts = [normalize(M @ np.array([s, t, 1.0])) for s, t in sols]
    bad = [p for p in pts if dist(eval(f, p), q) >= tol]
    if len(pts) != d * d or bad:
        raise SolverDivergence(
            f"{len(bad)} of {len(pts)} preimages failed the forward check",
            partial=[(p, 1) for p in pts if p not in bad],
        )
    return _merge(pts)


def _newton2(val, grad, M, s, t, steps=50, tol=1e-12):
    x = np.array([s, t], dtype=complex)
    for _ in range(steps):
        v = (M @ np.array([x[0], x[1], 1.0]))[None, :]
        r = val(v)[0]
        if np.max(np.abs(r)) < 1e-300:
            break
        G = grad(v)[0] @ M[:, :2]
        try:
            dx = np.linalg.solve(G, r)
        except np.linalg.LinAlgError:
            break
        x = x - dx
        if np.max(np.abs(dx)) < tol * max(1.0, np.max(np.abs(x))) * 1e-3:
            break
    return x


def _merge(pts, radius=1e-6):
    groups: list[list[ProjPoint]] = []
    for p in pts:
        for g in groups:
            if dist(g[0], p) < radius:
                g.append(p)
                break
        else:
            groups.append([p])
    return [(g[0], len(g)) for g in groups]


# --- (Sd_t) probe -----------------------------------------------------------


def sample_region(rng, count: int, delta: float, off_conic: bool = True) -> np.ndarray:
    """Random normalized points with ``0 < conic_defect <= delta`` (rows of a (count,3) array)."""
    out = []
    while sum(len(o) for o in out) < count:
        n = max(2 * count, 64)
        piv = rng.integers(0, 3, size=n)
        r = np.sqrt(rng.uniform(0, 1, size=(n, 2)))
        ph = np.exp(2j * np.pi * rng.uniform(size=(n, 2)))
        uv = r * ph
        # choose two coordinates freely; the third from the conic equation with a defect
        e = delta * np.sqrt(rng.uniform(0.0 if not off_conic else 1e-4, 1, size=n)) * np.exp(
            2j * np.pi * rng.uniform(size=n)
        )
        P = np.zeros((n, 3), dtype=complex)
        sign = rng.choice([-1.0, 1.0], size=n)
        for i in range(n):
            a, b = uv[i]
            if piv[i] == 2:  # free x, y
                x, y = a, b
                z = sign[i] * np.sqrt(x * y + e[i])
            elif piv[i] == 0:  # free y, z; solve x from z^2 - x y = e
                y, z = a, b
                x = (z * z - e[i]) / y if abs(y) > 1e-3 else 1.0
            else:
                x, z = a, b
                y = (z * z - e[i]) / x if abs(x) > 1e-3 else 1.0
            P[i] = (x, y, z)
        Q, _ = kernels.normalize_rows(P)
        dft = conic_defect_array(Q)
        keep = (dft <= delta) & ((dft > 0) if off_conic else True)
        out.append(Q[keep])
    return np.concatenate(out)[:count]


@dataclass
class TopDegreeReport:
    n: int
    delta: float
    sample_count: int
    max_count: int
    histogram: dict[int, int]
    holds: bool
    flag: str = ""

    def to_json(self) -> dict:
        return {
            "n": self.n, "delta": self.delta, "sample_count": self.sample_count,
            "max_count": self.max_count, "histogram": {str(k): v for k, v in self.histogram.items()},
            "holds": self.holds, "flag": self.flag,
        }


def count_preimages_in_region(f: HomPolyMap, q: ProjPoint, n: int, delta: float) -> int:
    level = [q]
    for _ in range(n):
        nxt = []
        for p in level:
            nxt.extend(pp for pp, _ in preimages(f, p))
        level = nxt
    inside = [p for p in level if conic_defect(p) <= delta]
    return len(_merge(inside, radius=1e-9))


def small_topdegree_probe(f: HomPolyMap, delta: float, n: int, sample_count: int, rng_seed: int) -> TopDegreeReport:
    d = f.degree
    if n * math.log(d * d) > math.log(1e6) + 1e-12:
        raise BranchBudgetExceeded(f"{(d * d) ** n} branches exceed the 1e6 budget")
    if sample_count == 0:
        return TopDegreeReport(n, delta, 0, 0, {}, True, flag="no data")
    rng = np.random.default_rng(rng_seed)
    P = sample_region(rng, sample_count, delta)
    counts = []
    for row in P:
        q = iterate(f, normalize(row), n)
        counts.append(count_preimages_in_region(f, q, n, delta))
    hist = dict(sorted(Counter(counts).items()))
    mx = max(counts)
    return TopDegreeReport(n, delta, sample_count, mx, hist, mx < d**n)


def all_preimage_branches(f: HomPolyMap, q: ProjPoint, n: int) -> list[ProjPoint]:
    """Leaves of the full depth-``n`` preimage tree (exhaustive enumeration)."""
    level = [q]
    for _ in range(n):
        level = [pp for p in level for pp, m in preimages(f, p) for _ in range(m)]
    return level


def chart_lift(chart: int, u: complex, v: complex) -> np.ndarray:
    return np.array(lift_from_chart(chart, u, v), dtype=complex)


__all__ = [
    "HomPolyMap", "JacobianData", "TopDegreeReport", "all_preimage_branches", "chart_jacobian_at",
    "chart_jacobians", "eval", "eval_lift", "eval_points", "family_Ftheta", "family_f0", "iterate",
    "jacobian", "lift_jacobian", "make_map", "map_from_json", "preimages", "sample_region",
    "sj_ratio", "sj_ratio_array", "small_topdegree_probe", "squaring_map",
]
