"""Histories, Lyapunov exponents, Oseledets directions, Pesin frames and local manifolds.

Tangent vectors live in the affine chart of the pivot coordinate of their
base point; derivatives between consecutive points use
:func:`saddlelab.endo.chart_jacobians` between those pivot charts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .endo import HomPolyMap, chart_jacobians, preimages
from .errors import (
    ChartBreakdown,
    DegenerateSplitting,
    FrameNotFound,
    GraphEscapesBox,
    NewtonDivergence,
    NoPreimageInRegion,
    NoTransversalIntersection,
    PreconditionError,
)
from .projgeom import ProjPoint, conic_defect, conic_parameter, conic_point, dist, normalize

_OTHERS = ((1, 2), (0, 2), (0, 1))

POLICIES = ("nearest_to_conic", "uniform_in_region")
FORWARD_POLICIES = ("auto", "plain", "retract")


# --- natural extension ------------------------------------------------------------


@dataclass
class BackwardOrbit:
    """History ``points[k] = p_{-k}`` with ``f(points[k+1]) = points[k]``."""

    points: list[ProjPoint]
    branch_choices: list[int]
    seed: int
    residuals: list[float] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.points) - 1

    def array(self) -> np.ndarray:
        return np.array([p.coords for p in self.points], dtype=complex)

    def to_json(self) -> dict:
        return {
            "points": [[[z.real, z.imag] for z in p.coords] for p in self.points],
            "branch_choices": list(self.branch_choices),
            "seed": self.seed,
            "residuals": list(self.residuals),
        }


def backward_orbit(f: HomPolyMap, p0: ProjPoint, depth: int, policy: str = "nearest_to_conic",
                   rng_seed: int = 0, delta: float = 0.05) -> BackwardOrbit:
    """Sample a history of ``p0`` by choosing one preimage per step.

    ``nearest_to_conic`` keeps the preimages of least conic defect and picks
    among equally good ones at random, except that a preimage equal to the
    current point is always taken (fixed points keep their constant history).
    For the circle family, preimages of conic points are re-projected onto
    the conic, which is invariant but transversally repelling backwards.
    ``uniform_in_region`` picks uniformly among the preimages in ``U(delta)``.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    rng = np.random.default_rng(rng_seed)
    snap = f.circle_kind == "conic"
    pts = [p0]
    choices: list[int] = []
    res: list[float] = []
    p = p0
    for step in range(depth):
        cands = [q for q, _ in preimages(f, p)]
        defects = np.array([conic_defect(q) for q in cands])
        if policy == "nearest_to_conic":
            best = defects.min()
            pool = [i for i in range(len(cands)) if defects[i] <= max(best * 10, best + 1e-10)]
        else:
            pool = [i for i in range(len(cands)) if defects[i] <= delta]
            if not pool:
                raise NoPreimageInRegion(f"no preimage in U({delta}) at step {step}", step=step)
        same = [i for i in pool if dist(cands[i], p) < 1e-12]
        k = same[0] if same else int(pool[rng.integers(len(pool))])
        q = cands[k]
        if snap and conic_defect(p) <= 1e-12 and defects[k] <= 1e-6:
            # the conic repels backward orbits by 1/|2 theta|; pin exact conic preimages back on it
            q = conic_point(conic_parameter(q))
        r = dist(_eval(f, q), p)
        if r >= 1e-9:
            raise ChartBreakdown(f"backward step {step} residual {r:.2e}")
        pts.append(q)
        choices.append(k)
        res.append(r)
        p = q
    return BackwardOrbit(pts, choices, rng_seed, res)


def _eval(f: HomPolyMap, p: ProjPoint) -> ProjPoint:
    v = kernels.eval_lift(f.monos, f.coefs, np.array([p.coords]))[0]
    return normalize(v)


def _resolve_policy(f: HomPolyMap, p0: ProjPoint, policy: str) -> int:
    if policy not in FORWARD_POLICIES:
        raise ValueError(f"unknown forward policy {policy!r}")
    if policy == "plain":
        return kernels.RETRACT_NONE
    if policy == "retract":
        if not f.supports_retract:
            raise PreconditionError("retraction to |x| = |y| is only valid for the built-in circle maps")
        return kernels.RETRACT_XY
    x, y = abs(p0.coords[0]), abs(p0.coords[1])
    on = f.supports_retract and x > 0 and y > 0 and abs(x - y) <= 1e-9 * max(x, y)
    return kernels.RETRACT_XY if on else kernels.RETRACT_NONE


def forward_orbit(f: HomPolyMap, p0: ProjPoint, steps: int, policy: str = "auto") -> np.ndarray:
    """Rows ``f^k(p0)``, k = 0..steps (normalized)."""
    r = _resolve_policy(f, p0, policy)
    return kernels.forward_orbit(f.monos, f.coefs, np.array(p0.coords, dtype=complex), steps, r)


# --- Lyapunov exponents -----------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovEstimate:
    chi1: float
    chi2: float
    steps: int
    stderr: float
    stderr1: float = 0.0
    stderr2: float = 0.0

    def to_json(self) -> dict:
        return {"chi1": self.chi1, "chi2": self.chi2, "steps": self.steps, "stderr": self.stderr,
                "stderr1": self.stderr1, "stderr2": self.stderr2}


def _block_stderr(x: np.ndarray, blocks: int = 10) -> float:
    if not np.all(np.isfinite(x)):
        return math.inf
    b = np.array_split(x, blocks)
    means = np.array([np.mean(c) for c in b])
    return float(np.std(means, ddof=1) / math.sqrt(blocks))


def lyapunov(f: HomPolyMap, p0: ProjPoint, steps: int = 100_000, rng_seed: int = 0,
             forward_policy: str = "auto", burn_in: int = 100) -> LyapunovEstimate:
    """Exponents from the QR-reorthonormalized product of chart Jacobians along the orbit of ``p0``.

    The first ``burn_in`` steps only align the frame and are not averaged.
    """
    if steps < 100:
        raise ValueError("need at least 100 steps")
    r = _resolve_policy(f, p0, forward_policy)
    rng = np.random.default_rng(rng_seed)
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    Q, _ = np.linalg.qr(A)
    p = np.array(p0.coords, dtype=complex)
    if burn_in:
        _, _, p, Q = kernels.lyapunov_qr(f.monos, f.coefs, p, burn_in, r, Q)
    r1, r2, _, _ = kernels.lyapunov_qr(f.monos, f.coefs, p, steps, r, Q)
    chi1, chi2 = float(np.mean(r1)), float(np.mean(r2))
    s1, s2 = _block_stderr(r1), _block_stderr(r2)
    return LyapunovEstimate(chi1, chi2, steps, max(s1, s2), s1, s2)


# --- Oseledets directions -------------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _perp(v: np.ndarray) -> np.ndarray:
    return np.array([-np.conj(v[1]), np.conj(v[0])])


def line_angle(a, b) -> float:
    """Angle between complex lines spanned by ``a`` and ``b`` (sine of the principal angle)."""
    a, b = _unit(np.asarray(a)), _unit(np.asarray(b))
    c = min(1.0, abs(np.vdot(a, b)))
    return math.sqrt(max(0.0, 1.0 - c * c))


def _step_jacobians(f: HomPolyMap, P: np.ndarray) -> np.ndarray:
    """Chart Jacobians from row k (its pivot chart) to row k+1 (its pivot chart)."""
    P = np.asarray(P, dtype=complex)
    piv = np.argmax(np.abs(P), axis=1)
    return chart_jacobians(f, P[:-1], piv[:-1], piv[1:])


def pushforward_direction(f: HomPolyMap, P: np.ndarray, v0=None) -> np.ndarray:
    """Push ``v0`` (default generic) along the rows of ``P`` (oldest first), normalizing each step."""
    v = _unit(np.array([0.6 + 0.3j, -0.5 + 0.55j]) if v0 is None else np.asarray(v0, dtype=complex))
    for J in _step_jacobians(f, P):
        v = _unit(J @ v)
    return v


def pullback_top_direction(f: HomPolyMap, P: np.ndarray, w0=None) -> tuple[np.ndarray, float, float]:
    """Top right singular direction of the product of Jacobians along ``P`` (forward order).

    Computed by adjoint pullback of a generic vector; also returns log singular
    values of the product via a QR sweep.
    """
    Js = _step_jacobians(f, P)
    w = _unit(np.array([0.35 - 0.7j, 0.6 + 0.1j]) if w0 is None else np.asarray(w0, dtype=complex))
    for J in Js[::-1]:
        w = _unit(J.conj().T @ w)
    Q = np.eye(2, dtype=complex)
    l1 = l2 = 0.0
    for J in Js:
        Q, R = np.linalg.qr(J @ Q)
        l1 += math.log(max(abs(R[0, 0]), 1e-300))
        l2 += math.log(max(abs(R[1, 1]), 1e-300))
    return w, l1, l2


def _forward_points(f: HomPolyMap, orbit: BackwardOrbit, index: int, m: int) -> np.ndarray:
    """``p_{-index}`` followed by its next ``m`` forward images (recorded ones first)."""
    rec = [orbit.points[k].coords for k in range(index, max(index - m, 0) - 1, -1)]
    P = np.array(rec, dtype=complex)
    extra = m - (len(rec) - 1)
    if extra > 0:
        tail = forward_orbit(f, orbit.points[0], extra)
        P = np.concatenate([P, tail[1:]])
    return P


def oseledets_directions(f: HomPolyMap, orbit: BackwardOrbit, growth_steps: int = 30,
                         index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``(Eu, Es)`` at ``p_{-index}`` in its pivot chart."""
    m = growth_steps
    if m < 10 or orbit.depth - index < m:
        raise PreconditionError("need orbit depth >= growth_steps >= 10")
    hist = np.array([orbit.points[k].coords for k in range(index + m, index - 1, -1)], dtype=complex)
    Eu = pushforward_direction(f, hist)
    top, l1, l2 = pullback_top_direction(f, _forward_points(f, orbit, index, m))
    if abs(l1 - l2) < math.log1p(1e-3):
        raise DegenerateSplitting("singular values of the forward product agree to 1e-3")
    Es = _unit(_perp(top))
    return Eu, Es


# --- Pesin frames ---------------------------------------------------------------------


@dataclass
class ChartFrame:
    """Affine frame ``z = c + xi*Eu + eta*Es`` in chart ``chart`` around ``center``."""

    center: ProjPoint
    chart: int
    Eu: np.ndarray
    Es: np.ndarray
    radius: float
    gamma: float
    eps0: float
    chi_u: float = 0.0
    chi_s: float = 0.0
    hyperbolic: bool = True
    a_u: complex = 1.0
    a_s: complex = 1.0

    def __post_init__(self):
        self.Eu = _unit(np.asarray(self.Eu, dtype=complex))
        self.Es = _unit(np.asarray(self.Es, dtype=complex))
        if abs(np.vdot(self.Eu, self.Es)) >= 1 - 1e-6:
            raise DegenerateSplitting("frame directions are not transversal")
        if not (0 < self.radius <= 1):
            raise ValueError("frame radius must lie in (0, 1]")

    @property
    def basis(self) -> np.ndarray:
        return np.column_stack([self.Eu, self.Es])

    @property
    def base_chart_point(self) -> np.ndarray:
        a, b = _OTHERS[self.chart]
        c = self.center.coords
        return np.array([c[a] / c[self.chart], c[b] / c[self.chart]])

    def lift(self, xi, eta) -> np.ndarray:
        """Homogeneous lifts (N,3) of frame points ``(xi, eta)``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=complex))
        eta = np.atleast_1d(np.asarray(eta, dtype=complex))
        z = self.base_chart_point[None, :] + xi[:, None] * self.Eu[None, :] + eta[:, None] * self.Es[None, :]
        V = np.empty((len(z), 3), dtype=complex)
        a, b = _OTHERS[self.chart]
        V[:, self.chart] = 1.0
        V[:, a], V[:, b] = z[:, 0], z[:, 1]
        return V

    def coords(self, P) -> tuple[np.ndarray, np.ndarray]:
        """Frame coordinates of the rows of ``P`` (any representatives)."""
        P = np.atleast_2d(np.asarray(P, dtype=complex))
        a, b = _OTHERS[self.chart]
        s = P[:, self.chart]
        z = np.column_stack([P[:, a] / s, P[:, b] / s]) - self.base_chart_point[None, :]
        w = np.linalg.solve(self.basis, z.T)
        return w[0], w[1]

    def to_json(self) -> dict:
        return {
            "center": [[z.real, z.imag] for z in self.center.coords], "chart": self.chart,
            "Eu": [[z.real, z.imag] for z in self.Eu], "Es": [[z.real, z.imag] for z in self.Es],
            "radius": self.radius, "gamma": self.gamma, "eps0": self.eps0, "chi_u": self.chi_u,
            "chi_s": self.chi_s, "hyperbolic": self.hyperbolic,
        }


def frame_map(f: HomPolyMap, src: ChartFrame, dst: ChartFrame, xi, eta):
    """``f`` in frame coordinates: returns ``(xi', eta', Df)`` with Df (N,2,2)."""
    V = src.lift(xi, eta)
    F = kernels.eval_lift(f.monos, f.coefs, V)
    n = len(V)
    J = chart_jacobians(f, V, np.full(n, src.chart), np.full(n, dst.chart))
    x2, e2 = dst.coords(F)
    Binv = np.linalg.inv(dst.basis)
    Df = Binv[None, :, :] @ J @ src.basis[None, :, :]
    return x2, e2, Df


def hyperbolicity_holds(chi_u: float, chi_s: float, gamma: float, eps0: float) -> bool:
    eg = math.exp(gamma)
    return math.exp(chi_u - gamma) - eps0 > eg > 1 and math.exp(chi_s + gamma) + eps0 < 1 / eg < 1


def make_frame(f: HomPolyMap, orbit: BackwardOrbit, gamma: float, eps0: float, growth_steps: int = 30,
               index: int = 0, chi: tuple[float, float] | None = None, samples: int = 1000,
               rng_seed: int = 0) -> ChartFrame:
    """Frame at ``p_{-index}`` with the largest dyadic radius <= 0.1 whose nonlinearity stays below ``eps0``.

    The linear part is taken against the frame spanned by the pushforwards of
    ``(Eu, Es)``, so it is diagonal by construction.
    """
    p = orbit.points[index]
    m = min(growth_steps, orbit.depth - index)
    if m >= 10:
        Eu, Es = oseledets_directions(f, orbit, m, index)
    else:
        top, _, _ = pullback_top_direction(f, _forward_points(f, orbit, index, growth_steps))
        Es = _unit(_perp(top))
        hist = np.array([orbit.points[k].coords for k in range(index + m, index - 1, -1)], dtype=complex)
        Eu = pushforward_direction(f, hist) if m > 0 else _unit(top)
    if chi is None:
        est = lyapunov(f, p, 2000, rng_seed)
        chi = (est.chi1, est.chi2)
    chi_u, chi_s = chi
    if not (chi_u > 0 > chi_s):
        raise PreconditionError(f"frame needs chi_u > 0 > chi_s, got {chi_u:.3g}, {chi_s:.3g}")
    c = p.pivot
    fp = _eval(f, p)
    J = chart_jacobians(f, np.array([p.coords]), np.array([c]), np.array([fp.pivot]))[0]
    a_u, a_s = np.linalg.norm(J @ Eu), np.linalg.norm(J @ Es)
    hyper = hyperbolicity_holds(chi_u, chi_s, gamma, eps0)
    src = ChartFrame(p, c, Eu, Es, 0.1, gamma, eps0, chi_u, chi_s, hyper, a_u, a_s)
    dst = ChartFrame(fp, fp.pivot, J @ Eu, J @ Es, 0.1, gamma, eps0, chi_u, chi_s, hyper)
    A = np.diag([a_u, a_s])
    rng = np.random.default_rng(rng_seed)
    rad = 0.1
    while rad >= 1e-6:
        r = rad * np.sqrt(rng.uniform(size=(samples, 2)))
        ph = np.exp(2j * np.pi * rng.uniform(size=(samples, 2)))
        w = r * ph
        try:
            _, _, Df = frame_map(f, src, dst, w[:, 0], w[:, 1])
            nl = np.linalg.norm(Df - A[None], ord=2, axis=(1, 2))
            ok = np.all(np.isfinite(nl)) and float(np.max(nl)) <= eps0
        except (np.linalg.LinAlgError, FloatingPointError):
            ok = False
        if ok:
            src.radius = rad
            return src
        rad /= 2
    raise FrameNotFound(f"no radius >= 1e-6 keeps the nonlinearity below {eps0}")


def frame_at_fixed_point(f: HomPolyMap, p: ProjPoint, gamma: float, eps0: float) -> ChartFrame:
    """Eigen-aligned frame at a fixed point (exact linear algebra, no sampling of histories)."""
    J = chart_jacobians(f, np.array([p.coords]), np.array([p.pivot]), np.array([p.pivot]))[0]
    vals, vecs = np.linalg.eig(J)
    order = np.argsort(-np.abs(vals))
    Eu, Es = vecs[:, order[0]], vecs[:, order[1]]
    chi_u, chi_s = float(np.log(abs(vals[order[0]]))), float(np.log(abs(vals[order[1]])))
    orbit = BackwardOrbit([p] * 41, [0] * 40, 0)
    fr = make_frame(f, orbit, gamma, eps0, 30, 0, (chi_u, chi_s))
    return ChartFrame(p, p.pivot, Eu, Es, fr.radius, gamma, eps0, chi_u, chi_s, fr.hyperbolic,
                      vals[order[0]], vals[order[1]])


# --- graphs ---------------------------------------------------------------------------

GRAPH_DEGREE = 7
_RING_RADII = np.cos(np.pi * (2 * np.arange(4) + 1) / 16)  # Chebyshev-style radii in (0, 1)
_NODES = (_RING_RADII[:, None] * np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)[None, :]).ravel()


@dataclass
class GraphDisk:
    """Graph over the base disk of radius ``frame.radius``.

    ``coeffs[k]`` multiplies ``s**k`` with ``s = base / radius``; for a
    horizontal graph the base is ``xi`` and the value ``eta``, for a vertical
    graph the reverse.
    """

    frame: ChartFrame
    kind: str
    coeffs: np.ndarray
    lipschitz_bound: float
    fit_residual: float = 0.0

    def value(self, base) -> np.ndarray:
        s = np.asarray(base, dtype=complex) / self.frame.radius
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def slope(self, base) -> np.ndarray:
        s = np.asarray(base, dtype=complex) / self.frame.radius
        return np.polynomial.polynomial.polyval(s, np.polynomial.polynomial.polyder(self.coeffs)) / self.frame.radius

    def frame_points(self, base) -> tuple[np.ndarray, np.ndarray]:
        base = np.asarray(base, dtype=complex)
        val = self.value(base)
        return (base, val) if self.kind == "horizontal" else (val, base)

    def lift(self, base) -> np.ndarray:
        xi, eta = self.frame_points(base)
        return self.frame.lift(xi, eta)

    def sample(self, count: int = 64, fraction: float = 1.0) -> np.ndarray:
        """Normalized points of the disk on circles inside ``fraction`` of the base radius."""
        k = np.arange(count)
        base = self.frame.radius * fraction * np.sqrt((k + 0.5) / count) * np.exp(2j * np.pi * 0.618034 * k)
        return kernels.normalize_rows(self.lift(base))[0]

    def sup_norm(self, grid: int = 64) -> float:
        t = np.exp(2j * np.pi * np.arange(grid) / grid)
        return float(np.max(np.abs(self.value(self.frame.radius * t))))

    def offset(self, P) -> np.ndarray:
        """Frame-coordinate distance of the rows of ``P`` from the graph (value minus graph value)."""
        xi, eta = self.frame.coords(P)
        if self.kind == "horizontal":
            return np.abs(eta - self.value(xi))
        return np.abs(xi - self.value(eta))

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "frame": self.frame.to_json(),
            "coeffs": [[c.real, c.imag] for c in self.coeffs], "lipschitz_bound": self.lipschitz_bound,
            "fit_residual": self.fit_residual,
        }


def flat_graph(frame: ChartFrame, kind: str = "horizontal") -> GraphDisk:
    return GraphDisk(frame, kind, np.zeros(GRAPH_DEGREE + 1, dtype=complex), 0.0)


def _fit(base_nodes: np.ndarray, values: np.ndarray, radius: float):
    V = np.vander(base_nodes / radius, GRAPH_DEGREE + 1, increasing=True)
    c, *_ = np.linalg.lstsq(V, values, rcond=None)
    res = float(np.max(np.abs(V @ c - values)))
    return c, res


def _newton_1d(fun, x0, steps: int = 60, tol: float = 1e-15):
    """Vectorized 1-D complex Newton; ``fun(x)`` returns (value, derivative)."""
    x = np.array(x0, dtype=complex)
    for _ in range(steps):
        val, der = fun(x)
        dx = val / der
        x = x - dx
        if np.all(np.abs(dx) <= tol * np.maximum(1.0, np.abs(x))):
            return x, True
    val, _ = fun(x)
    return x, bool(np.all(np.abs(val) < 1e-12))


def graph_transform(f: HomPolyMap, src: ChartFrame, dst: ChartFrame, graph: GraphDisk) -> GraphDisk:
    """Image of a horizontal graph in ``src`` as a horizontal graph in ``dst``."""
    if graph.kind != "horizontal":
        raise ValueError("graph_transform acts on horizontal graphs")
    if dist(_eval(f, src.center), dst.center) > 1e-9:
        raise PreconditionError("destination frame is not centred at the image of the source centre")
    targets = dst.radius * _NODES

    def fun(xi):
        eta = graph.value(xi)
        x2, _, Df = frame_map(f, src, dst, xi, eta)
        der = Df[:, 0, 0] + Df[:, 0, 1] * graph.slope(xi)
        return x2 - targets, der

    a_u = abs(src.a_u) if src.a_u else 1.0
    xi, ok = _newton_1d(fun, targets / max(a_u, 1e-12))
    bad = ~np.isfinite(xi) | (np.abs(xi) > src.radius * (1 + 1e-9))
    if not ok or np.any(bad):
        raise GraphEscapesBox("preimage of the target base disk leaves the source disk", samples=xi[bad])
    _, eta2, _ = frame_map(f, src, dst, xi, graph.value(xi))
    if np.any(np.abs(eta2) > dst.radius):
        raise GraphEscapesBox("image graph leaves the destination bidisk", samples=eta2[np.abs(eta2) > dst.radius])
    coeffs, res = _fit(targets, eta2, dst.radius)
    if res >= 1e-8 * dst.radius:
        raise GraphEscapesBox(f"image is not a degree-{GRAPH_DEGREE} graph to 1e-8 (residual {res:.2e})")
    L = _lipschitz(coeffs, dst.radius)
    return GraphDisk(dst, "horizontal", coeffs, L, res)


def _lipschitz(coeffs, radius, samples: int = 256) -> float:
    """Sup of the slope on the base disk (attained on the boundary circle)."""
    t = np.exp(2j * np.pi * np.arange(samples) / samples)
    d = np.polynomial.polynomial.polyder(coeffs)
    return float(np.max(np.abs(np.polynomial.polynomial.polyval(t, d)))) / radius


def _linear_part(f, src, dst):
    _, _, Df = frame_map(f, src, dst, np.zeros(1), np.zeros(1))
    return Df[0]


def graph_pullback(f: HomPolyMap, src: ChartFrame, dst: ChartFrame, graph: GraphDisk) -> GraphDisk:
    """Preimage in ``src`` of a vertical graph in ``dst`` (the branch through the frame centres)."""
    if graph.kind != "vertical":
        raise ValueError("graph_pullback acts on vertical graphs")
    etas = src.radius * _NODES

    def fun(xi):
        x2, e2, Df = frame_map(f, src, dst, xi, etas)
        g = graph.value(e2)
        gp = graph.slope(e2)
        return x2 - g, Df[:, 0, 0] - gp * Df[:, 1, 0]

    xi, ok = _newton_1d(fun, np.zeros_like(etas))
    if not ok or np.any(np.abs(xi) > src.radius):
        raise GraphEscapesBox("pulled-back vertical graph leaves the source bidisk", samples=xi)
    coeffs, res = _fit(etas, xi, src.radius)
    return GraphDisk(src, "vertical", coeffs, _lipschitz(coeffs, src.radius), res)


def frame_chain(f: HomPolyMap, orbit: BackwardOrbit, k: int, gamma: float, eps0: float,
                growth_steps: int = 30, chi: tuple[float, float] | None = None) -> list[ChartFrame]:
    """Frames at ``p_{-k}, ..., p_0`` (oldest first) with a common radius (the smallest found)."""
    if chi is None:
        est = lyapunov(f, orbit.points[0], 2000)
        chi = (est.chi1, est.chi2)
    frames = [make_frame(f, orbit, gamma, eps0, growth_steps, j, chi) for j in range(k, -1, -1)]
    rad = min(fr.radius for fr in frames)
    for fr in frames:
        fr.radius = rad
    return frames


def _set_linear_parts(f, frames):
    for src, dst in zip(frames[:-1], frames[1:]):
        A = _linear_part(f, src, dst)
        src.a_u, src.a_s = A[0, 0], A[1, 1]


@dataclass
class UnstableResult:
    disk: GraphDisk
    history: list[GraphDisk]
    lipschitz: list[float]


def local_unstable(f: HomPolyMap, orbit: BackwardOrbit, frames: list[ChartFrame], iterations: int,
                   return_history: bool = False):
    """``iterations``-fold graph transform of the flat graph at ``p_{-k}`` along ``frames`` (oldest first)."""
    k = iterations
    if orbit.depth < k or len(frames) < k + 1:
        raise PreconditionError("orbit and frame chain must reach p_{-k}")
    chain = frames[len(frames) - k - 1:]
    _set_linear_parts(f, chain)
    g = flat_graph(chain[0])
    hist = [g]
    for src, dst in zip(chain[:-1], chain[1:]):
        g = graph_transform(f, src, dst, g)
        hist.append(g)
    if return_history:
        return UnstableResult(g, hist, [h.lipschitz_bound for h in hist])
    return g


def backward_shadowing(f: HomPolyMap, history: list[GraphDisk], count: int = 16):
    """Pull points of the final disk back along the graph history.

    Returns an array ``D[k', i]`` of frame-coordinate distances of the pulled
    back points from the frame centres ``p_{-k'}``.
    """
    disk = history[-1]
    base = disk.frame.radius * 0.9 * np.exp(2j * np.pi * np.arange(count) / count)
    out = [np.abs(base) + np.abs(disk.value(base))]
    target = base
    for j in range(len(history) - 1, 0, -1):
        src_g = history[j - 1]
        src, dst = src_g.frame, history[j].frame

        def fun(xi, src_g=src_g, src=src, dst=dst, target=target):
            x2, _, Df = frame_map(f, src, dst, xi, src_g.value(xi))
            return x2 - target, Df[:, 0, 0] + Df[:, 0, 1] * src_g.slope(xi)

        xi, _ = _newton_1d(fun, target / max(abs(src.a_u), 1e-12))
        out.append(np.abs(xi) + np.abs(src_g.value(xi)))
        target = xi
    return np.array(out)


# --- local stable manifolds -------------------------------------------------------------------


@dataclass
class StableResult:
    disk: GraphDisk
    residual: float
    contraction_constant: float
    contraction_exponent: float
    horizon: int


def local_stable(f: HomPolyMap, p0: ProjPoint, frame: ChartFrame, order: int = 3, newton_steps: int = 30,
                 horizon: int = 8, test_steps: int = 20, return_report: bool = False):
    """Vertical graph ``xi = psi(eta)`` (jet of order ``order``) whose points shadow the orbit of ``p0``.

    The coefficients solve, by Gauss-Newton, ``f^n(psi(eta), eta) ~ f^n(p0)`` for
    n up to ``horizon`` (continuation in n); the residual is the unstable
    offset after ``n`` steps divided by the accumulated expansion.
    """
    if not frame.chi_s < 0:
        raise PreconditionError("local_stable needs a negative stable exponent")
    if order < 1:
        raise ValueError("order must be at least 1")
    rho = frame.radius
    nodes = rho * _NODES
    coeffs = np.zeros(order + 1, dtype=complex)  # s^0..s^order, s = eta/rho; coeffs[0] stays 0
    orbit_fwd = forward_orbit(f, p0, horizon + test_steps + 1, "plain")

    def images(c, n):
        xi = np.polynomial.polynomial.polyval(nodes / rho, c)
        V = frame.lift(xi, nodes)
        for _ in range(n):
            V = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, V))[0]
        return V

    def resid(c, n):
        V = images(c, n)
        q = orbit_fwd[n]
        piv = int(np.argmax(np.abs(q)))
        a, b = _OTHERS[piv]
        z = np.column_stack([V[:, a] / V[:, piv] - q[a] / q[piv], V[:, b] / V[:, piv] - q[b] / q[piv]])
        return z.ravel()

    expansion = 1.0
    res_scaled = math.inf
    for n in range(1, horizon + 1):
        expansion = math.exp(frame.chi_u * n)
        for _ in range(newton_steps):
            r0 = resid(coeffs, n)
            h = 1e-7 * rho
            Jc = np.empty((len(r0), order), dtype=complex)
            for j in range(1, order + 1):
                c2 = coeffs.copy()
                c2[j] += h
                Jc[:, j - 1] = (resid(c2, n) - r0) / h
            step, *_ = np.linalg.lstsq(Jc, -r0, rcond=None)
            coeffs[1:] += step
            if not np.all(np.isfinite(coeffs)):
                raise NewtonDivergence("stable jet coefficients diverged")
            if np.max(np.abs(step)) < 1e-14 * rho:
                break
        xi_err = np.abs(resid(coeffs, n))
        res_scaled = float(np.max(xi_err)) / expansion
    if res_scaled > 1e-8 * rho:
        raise NewtonDivergence(f"stable jet residual {res_scaled:.2e} above 1e-8 * radius")
    disk = GraphDisk(frame, "vertical", coeffs, float(np.max(np.abs(np.polynomial.polynomial.polyder(coeffs)))) / 1.0)
    C, slope, nmax = _contraction(f, disk, orbit_fwd, test_steps, frame)
    rep = StableResult(disk, res_scaled, C, slope, nmax)
    return rep if return_report else disk


def _contraction(f, disk, orbit_fwd, steps, frame, count: int = 20):
    P = disk.sample(count, 0.9)
    d = np.zeros((steps + 1, count))
    V = P
    for n in range(steps + 1):
        Q = np.broadcast_to(orbit_fwd[n], V.shape)
        d[n] = _dist_rows(V, Q)
        V = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, V))[0]
    dm = np.max(d, axis=1)
    # fit the contracting prefix only: past the rounding floor, noise grows along the unstable direction
    nmax = 0
    while nmax + 1 <= steps and dm[nmax + 1] > 1e-13 and dm[nmax + 1] < dm[nmax]:
        nmax += 1
    ns = np.arange(nmax + 1)
    with np.errstate(divide="ignore"):
        C = float(np.max(dm[: nmax + 1] / np.exp((frame.chi_s + frame.gamma) * ns)))
    slope = float(np.polyfit(ns[1:], np.log(dm[1 : nmax + 1]), 1)[0]) if nmax >= 2 else float("nan")
    return C, slope, nmax


def _dist_rows(P, Q):
    c = np.cross(P, Q)
    return np.linalg.norm(c, axis=1) / (np.linalg.norm(P, axis=1) * np.linalg.norm(Q, axis=1))


# --- holonomy ---------------------------------------------------------------------------------


@dataclass
class HolonomyReport:
    bins: list[dict]
    max_discrepancy: float
    skipped: int
    flag: str = ""

    def to_json(self) -> dict:
        return {"bins": self.bins, "max_discrepancy": self.max_discrepancy, "skipped": self.skipped,
                "flag": self.flag}


def _disk_intersection(disk_param, leaf: GraphDisk, t0: complex, steps: int = 60):
    """Solve ``phi(t) = leaf point(eta)`` for ``(t, eta)`` by 2-D Newton in the leaf's chart."""
    fr = leaf.frame
    c = fr.chart
    a, b = _OTHERS[c]
    base = fr.base_chart_point
    t = complex(t0)
    eta = 0j
    for _ in range(steps):
        V = disk_param.lift(np.array([t]))[0]
        dV = disk_param.lift_derivative(np.array([t]))[0]
        z = np.array([V[a] / V[c], V[b] / V[c]])
        dz = np.array([(dV[a] * V[c] - V[a] * dV[c]) / V[c] ** 2, (dV[b] * V[c] - V[b] * dV[c]) / V[c] ** 2])
        xi = leaf.value(eta)
        w = base + xi * fr.Eu + eta * fr.Es
        dw = leaf.slope(eta) * fr.Eu + fr.Es
        r = z - w
        M = np.column_stack([dz, -dw])
        try:
            step = np.linalg.solve(M, -r)
        except np.linalg.LinAlgError:
            raise NoTransversalIntersection("tangential crossing") from None
        t += step[0]
        eta += step[1]
        if np.max(np.abs(step)) < 1e-15:
            break
    V = disk_param.lift(np.array([t]))[0]
    res = float(np.max(np.abs(np.array([V[a] / V[c], V[b] / V[c]]) - (base + leaf.value(eta) * fr.Eu + eta * fr.Es))))
    if not np.isfinite(res) or res >= 1e-9 or abs(eta) > fr.radius * 1.5 or abs(t) > 1:
        raise NoTransversalIntersection(f"no crossing found (residual {res:.2e})")
    return t, eta


def conic_stable_family(f: HomPolyMap, center: float, half_width: float, count: int = 32,
                        gamma: float = 0.1, eps0: float = 0.1, fill: float = 0.9, order: int = 3,
                        history_depth: int = 12, chi: tuple[float, float] | None = None):
    """Local stable disks at ``count`` conic points spread over ``fill`` of an arc.

    Returns ``(leaves, t_guesses)`` where ``t_guesses`` are the arc parameters
    of the base points (for :func:`holonomy_probe`).
    """
    if chi is None:
        est = lyapunov(f, conic_point(np.exp(1j * (center + 0.1234567))), 5000)
        chi = (est.chi1, est.chi2)
    s = np.linspace(-fill, fill, count)
    leaves = []
    for j, sj in enumerate(s):
        q = conic_point(np.exp(1j * (center + half_width * sj)))
        ob = backward_orbit(f, q, history_depth, rng_seed=j)
        fr = make_frame(f, ob, gamma, eps0, min(10, history_depth), 0, chi)
        leaves.append(local_stable(f, q, fr, order))
    return leaves, s.astype(complex)


def holonomy_probe(f: HomPolyMap, D, D2, stable_family: list[GraphDisk], depth: int = 40, bins: int = 16,
                   n_grid: int = 64, t_guesses=None) -> HolonomyReport:
    """Compare ``T ^ [D]`` and ``T ^ [D2]`` over holonomy-matched sub-disks.

    Each leaf of ``stable_family`` is intersected with both disks; consecutive
    groups of leaves bound sub-disks whose diameters join the crossing points,
    and the slice masses of matched sub-disks are compared.
    """
    from .green import slice_mass

    if not stable_family:
        return HolonomyReport([], 0.0, 0, flag="no data")
    cross = []
    skipped = 0
    for j, leaf in enumerate(stable_family):
        g = 0j if t_guesses is None else t_guesses[j]
        try:
            t1, _ = _disk_intersection(D, leaf, g)
            t2 = t1 if D2 is D else _disk_intersection(D2, leaf, t1)[0]
        except NoTransversalIntersection:
            skipped += 1
            continue
        cross.append((t1, t2))
    if len(cross) < 2:
        return HolonomyReport([], 0.0, skipped, flag="no data")
    cross.sort(key=lambda c: c[0].real)
    L = len(cross)
    nb = min(bins, L - 1)
    edges = [round(b * (L - 1) / nb) for b in range(nb + 1)]
    rows = []
    worst = 0.0
    for b in range(nb):
        (s1, s2), (e1, e2) = cross[edges[b]], cross[edges[b + 1]]
        c1, r1 = 0.5 * (s1 + e1), 0.5 * abs(e1 - s1)
        m1 = slice_mass(f, D, r1, c1, depth, n_grid)
        if D2 is D:
            m2 = m1
        else:
            c2, r2 = 0.5 * (s2 + e2), 0.5 * abs(e2 - s2)
            m2 = slice_mass(f, D2, r2, c2, depth, n_grid)
        rel = abs(m1 - m2) / max(abs(m1), 1e-300)
        worst = max(worst, rel)
        rows.append({"bin": b, "mass_D": m1, "mass_D2": m2, "relative_discrepancy": rel})
    return HolonomyReport(rows, worst, skipped)


__all__ = [
    "BackwardOrbit", "ChartFrame", "GraphDisk", "HolonomyReport", "LyapunovEstimate", "backward_orbit",
    "backward_shadowing", "conic_stable_family", "flat_graph", "forward_orbit", "frame_at_fixed_point", "frame_chain", "frame_map",
    "graph_pullback", "graph_transform", "holonomy_probe", "hyperbolicity_holds", "line_angle",
    "local_stable", "local_unstable", "lyapunov", "make_frame", "oseledets_directions",
]
