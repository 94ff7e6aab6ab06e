"""Periodic points: Newton location, multiplier classification and the measures nu_n.

"Period n" means a fixed point of f^n; the minimal period is recorded
alongside.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .empirical import EmpiricalMeasure
from .endo import HomPolyMap, chart_jacobians, sample_region
from .errors import NeutralAmbiguous, PreconditionError, SeedBudgetExceeded, UnsupportedMap
from .projgeom import ProjPoint, conic_defect_array, normalize

STRATEGIES = ("grid_newton", "conic_roots", "both")
RESIDUAL_TOL = 1e-9
DEDUP_TOL = 1e-7
NEUTRAL_BAND = 1e-6
MAX_NEWTON = 80
GRID = 64

_OTHERS = np.array([(1, 2), (0, 2), (0, 1)])


@dataclass(frozen=True)
class PeriodicPoint:
    point: ProjPoint
    period: int
    minimal_period: int
    multipliers: tuple[complex, complex] = (0j, 0j)
    cls: str = ""
    residual: float = 0.0
    flags: tuple[str, ...] = ()

    def to_row(self) -> dict:
        m = sorted((abs(z) for z in self.multipliers), reverse=True)
        row = {"period": self.period, "minimal_period": self.minimal_period}
        for c, z in zip("xyz", self.point.coords):
            row[f"re_{c}"] = repr(z.real)
            row[f"im_{c}"] = repr(z.imag)
        row.update({"abs_mult1": repr(m[0]), "abs_mult2": repr(m[1]), "class": self.cls,
                    "residual": repr(self.residual)})
        return row


def lefschetz_expected(d: int, n: int) -> int:
    return d**n + 1


# --- iteration with derivatives ---------------------------------------------------


def _iterate(f: HomPolyMap, V: np.ndarray, n: int) -> np.ndarray:
    for _ in range(n):
        V = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, V))[0]
    return V


def _iterate_with_jacobian(f: HomPolyMap, V: np.ndarray, n: int):
    """``(W, M)`` with ``W`` a lift of ``f^n(V)`` and ``M = D(F^n)(V)`` on the same scale."""
    W = np.array(V, dtype=complex)
    M = np.broadcast_to(np.eye(3, dtype=complex), (len(W), 3, 3)).copy()
    for _ in range(n):
        D = kernels.lift_jacobian(f.monos, f.coefs, W)
        W = kernels.eval_lift(f.monos, f.coefs, W)
        M = D @ M
        s = np.max(np.abs(W), axis=1)
        W /= s[:, None]
        M /= s[:, None, None]
    return W, M


def _dist_rows(P, Q):
    c = np.cross(P, Q)
    return np.linalg.norm(c, axis=1) / (np.linalg.norm(P, axis=1) * np.linalg.norm(Q, axis=1))


def _residual(f, P, n):
    return _dist_rows(_iterate(f, P, n), P)


def _newton(f: HomPolyMap, P: np.ndarray, n: int, steps: int = MAX_NEWTON):
    """Projective Newton on ``f^n(p) = p`` in the pivot chart of the current iterate.

    A step that increases the residual is halved (up to 8 times) before being taken.
    """
    P = kernels.normalize_rows(np.asarray(P, dtype=complex))[0]
    res = _residual(f, P, n)
    alive = np.isfinite(res)
    for _ in range(steps):
        act = np.where(alive & (res > 1e-15))[0]
        if not len(act):
            break
        Q, piv = kernels.normalize_rows(P[act])
        W, M = _iterate_with_jacobian(f, Q, n)
        idx = np.arange(len(act))
        ab = _OTHERS[piv]
        wc = W[idx, piv]
        G = np.stack([W[idx, ab[:, 0]] / wc - Q[idx, ab[:, 0]], W[idx, ab[:, 1]] / wc - Q[idx, ab[:, 1]]], axis=1)
        J = np.empty((len(act), 2, 2), dtype=complex)
        for r in range(2):
            for s in range(2):
                J[:, r, s] = (M[idx, ab[:, r], ab[:, s]] * wc - W[idx, ab[:, r]] * M[idx, piv, ab[:, s]]) / wc**2
        J -= np.eye(2)[None]
        ok = np.abs(np.linalg.det(J)) > 1e-300
        step = np.zeros_like(G)
        step[ok] = np.linalg.solve(J[ok], -G[ok][:, :, None])[:, :, 0]
        lam = np.ones(len(act))
        cur = res[act]
        newP = Q.copy()
        pending = np.ones(len(act), dtype=bool)
        for _ in range(9):
            trial = Q.copy()
            trial[idx, ab[:, 0]] += lam * step[:, 0]
            trial[idx, ab[:, 1]] += lam * step[:, 1]
            with np.errstate(all="ignore"):
                tr = _residual(f, trial, n)
            better = pending & np.isfinite(tr) & (tr <= cur)
            newP[better] = trial[better]
            pending &= ~better
            lam *= 0.5
            if not np.any(pending):
                break
        moved = np.any(newP != Q, axis=1)
        P[act] = kernels.normalize_rows(newP)[0]
        with np.errstate(all="ignore"):
            res[act] = _residual(f, P[act], n)
        stuck = ~moved | ~ok | ~np.all(np.isfinite(P[act]), axis=1)
        alive[act[stuck]] = False
    return P, res


def polish(f: HomPolyMap, p: ProjPoint, n: int, steps: int = MAX_NEWTON) -> tuple[ProjPoint, float]:
    P, res = _newton(f, np.array([p.coords]), n, steps)
    return normalize(P[0]), float(res[0])


# --- seeds ---------------------------------------------------------------------------


def conic_seeds(f: HomPolyMap, n: int) -> np.ndarray:
    """Solutions of ``w^(d^n) = w`` carried to the built-in invariant curve."""
    kind = f.circle_kind
    if kind is None:
        raise UnsupportedMap("conic_roots needs a built-in map with a known invariant curve")
    N = f.degree**n - 1
    w = np.exp(2j * np.pi * np.arange(N) / N)
    if kind == "conic":
        pts = [np.column_stack([w**2, np.ones(N), w]), np.array([[0, 1, 0], [1, 0, 0]], dtype=complex)]
    else:
        pts = [np.column_stack([w, np.ones(N), np.zeros(N)]), np.array([[0, 1, 0], [1, 0, 0]], dtype=complex)]
    return np.concatenate(pts)


def grid_seeds(delta: float, rng_seed: int, per_chart: int = GRID * GRID) -> np.ndarray:
    """``3 * per_chart`` seeded points of ``U(delta)``, spread over the three pivot charts."""
    rng = np.random.default_rng(rng_seed)
    return sample_region(rng, 3 * per_chart, delta, off_conic=False)


# --- main search -------------------------------------------------------------------------


def _dedupe(P: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    keep: list[int] = []
    for i in range(len(P)):
        if not keep or np.min(_dist_rows(P[keep], np.broadcast_to(P[i], (len(keep), 3)))) >= tol:
            keep.append(i)
    return P[keep]


def minimal_period(f: HomPolyMap, p: ProjPoint, n: int, tol: float = 1e-8) -> int:
    P = np.array([p.coords])
    for m in range(1, n + 1):
        if n % m == 0 and _residual(f, P, m)[0] < tol:
            return m
    return n


def find_periodic(f: HomPolyMap, n: int, delta: float = 0.05, strategy: str = "both", rng_seed: int = 0,
                  seed_budget: int = 3 * GRID * GRID + 10_000, do_classify: bool = True) -> list[PeriodicPoint]:
    """Fixed points of ``f^n`` with conic defect at most ``delta`` (sorted, deduplicated)."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if n < 1:
        raise ValueError("period must be positive")
    use_conic = strategy in ("conic_roots", "both")
    use_grid = strategy in ("grid_newton", "both")
    if use_conic and n > 12:
        raise PreconditionError("conic_roots is limited to n <= 12")
    if use_grid and n > 6:
        raise PreconditionError("grid_newton is limited to n <= 6")
    seeds = []
    if use_conic:
        seeds.append(conic_seeds(f, n))
    if use_grid:
        seeds.append(grid_seeds(delta, rng_seed))
    S = np.concatenate(seeds) if seeds else np.zeros((0, 3), dtype=complex)
    over = len(S) > seed_budget
    S = S[:seed_budget]
    P, res = _newton(f, S, n)
    good = np.isfinite(res) & (res < RESIDUAL_TOL)
    P, res = P[good], res[good]
    inside = conic_defect_array(P) <= delta
    P = _dedupe(P[inside])
    P = P[np.lexsort((np.angle(P[:, 2]), np.angle(P[:, 0]), np.round(np.abs(P[:, 0]), 12)))] if len(P) else P
    out = []
    for row in P:
        p = normalize(row)
        r = float(_residual(f, np.array([p.coords]), n)[0])  # re-verified by forward iteration
        if r >= RESIDUAL_TOL:
            continue
        pp = PeriodicPoint(p, n, minimal_period(f, p, n), residual=r)
        out.append(classify(f, pp) if do_classify else pp)
    if over:
        raise SeedBudgetExceeded(f"seed budget {seed_budget} exceeded", partial=out)
    return out


# --- classification --------------------------------------------------------------------------


def cycle_jacobian(f: HomPolyMap, p: ProjPoint, n: int) -> np.ndarray:
    """Product of pivot-chart Jacobians along ``p, f(p), ..., f^n(p)`` (closed in the chart of ``p``)."""
    V = np.array([p.coords])
    orbit = [V[0]]
    for _ in range(n):
        V = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, V))[0]
        orbit.append(V[0])
    O = np.array(orbit)
    piv = np.argmax(np.abs(O), axis=1)
    piv[-1] = piv[0]  # the cycle closes on p itself
    Js = chart_jacobians(f, O[:-1], piv[:-1], piv[1:])
    A = np.eye(2, dtype=complex)
    for J in Js:
        A = J @ A
    return A


def classify(f: HomPolyMap, pp: PeriodicPoint, strict: bool = False) -> PeriodicPoint:
    if pp.residual >= RESIDUAL_TOL:
        raise PreconditionError(f"residual {pp.residual:.2e} too large to classify")
    ev = np.linalg.eigvals(cycle_jacobian(f, pp.point, pp.period))
    ev = ev[np.argsort(-np.abs(ev))]
    m = np.abs(ev)
    flags = tuple(pp.flags)
    if np.any(np.abs(m - 1) <= NEUTRAL_BAND):
        if strict:
            raise NeutralAmbiguous(f"multiplier moduli {m[0]:.9g}, {m[1]:.9g} within the neutral band")
        cls = "neutral"
        flags = flags + ("neutral_ambiguous",)
    elif m[1] > 1:
        cls = "repelling"
    elif m[0] < 1:
        cls = "attracting"
    else:
        cls = "saddle"
    return replace(pp, multipliers=(complex(ev[0]), complex(ev[1])), cls=cls, flags=flags)


# --- measures and export ---------------------------------------------------------------------


def nu_n(f: HomPolyMap, n: int, delta: float = 0.05, points: list[PeriodicPoint] | None = None,
         strategy: str | None = None, rng_seed: int = 0) -> EmpiricalMeasure:
    """Atoms ``d^-n`` at the period-n points in ``U(delta)``; mass is ``count / d^n``."""
    if points is None:
        strategy = strategy or default_strategy(f, n)
        points = find_periodic(f, n, delta, strategy, rng_seed, do_classify=False)
    label = f"nu_{n}"
    if not points:
        return EmpiricalMeasure.empty(label=label, flags=["empty"])
    P = np.array([pp.point.coords for pp in points])
    meas = EmpiricalMeasure(P, np.full(len(P), float(f.degree) ** -n), label)
    meas.params.update({"n": n, "delta": delta, "count": len(points), "expected_mass": lefschetz_expected(f.degree, n) / f.degree**n})
    return meas


def default_strategy(f: HomPolyMap, n: int) -> str:
    if f.circle_kind is None:
        return "grid_newton"
    return "both" if n <= 6 else "conic_roots"


def to_csv(points: list[PeriodicPoint]) -> str:
    buf = io.StringIO()
    cols = ["period", "minimal_period", "re_x", "im_x", "re_y", "im_y", "re_z", "im_z", "abs_mult1", "abs_mult2",
            "class", "residual"]
    wr = csv.DictWriter(buf, cols, lineterminator="\n")
    wr.writeheader()
    for pp in points:
        wr.writerow(pp.to_row())
    return buf.getvalue()


__all__ = [
    "PeriodicPoint", "classify", "conic_seeds", "cycle_jacobian", "default_strategy", "find_periodic", "grid_seeds",
    "lefschetz_expected", "minimal_period", "nu_n", "polish", "to_csv",
]
