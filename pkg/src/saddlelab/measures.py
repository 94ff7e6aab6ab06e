"""Transport distances, the reference measure nu, Birkhoff averages and the comparison batteries."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .empirical import EmpiricalMeasure
from .endo import HomPolyMap
from .errors import MassMismatch, PreconditionError, UnsupportedMap
from .green import DEFAULT_DEPTH, DiskParam, conic_arc_disk, slice_mass, slice_sample
from .periodic import default_strategy, find_periodic, lefschetz_expected, nu_n
from .projgeom import ProjPoint, conic_defect_array, dist_matrix

EXACT_LIMIT = 2048
MASS_TOL = 1e-9
REFERENCE_ATOMS = 512


def _ot():
    # keep POT from probing GPU frameworks it does not need
    for name in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    import ot

    return ot


# --- test dictionary ------------------------------------------------------------------

_PAIRS = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
_PRODUCTS = [((0, 1), (0, 1)), ((0, 2), (0, 2)), ((1, 2), (1, 2)), ((0, 1), (1, 2)), ((0, 2), (2, 1)),
             ((0, 1), (2, 2)), ((0, 2), (1, 1)), ((2, 0), (2, 1)), ((0, 0), (1, 2)), ((0, 1), (0, 2)), ((1, 0), (1, 2))]


def sphere_conic_defect(P: np.ndarray) -> np.ndarray:
    """``|z^2 - xy|`` on unit-norm representatives (at most 1, zero exactly on the conic)."""
    U = np.asarray(P, dtype=complex)
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    return np.abs(U[:, 2] ** 2 - U[:, 0] * U[:, 1])


@dataclass
class TestDictionary:
    """32 bounded test functions on the projective plane with chordal Lipschitz constants.

    Entries are real and imaginary parts of ``u_i conj(u_j)`` and of products
    of two such entries (``u`` the unit representative), plus the sphere
    conic defect. Since ``|P_u - P_v|_F = sqrt(2) dist(u, v)`` for the
    projectors, single entries are sqrt(2)-Lipschitz and products 2 sqrt(2).
    """

    __test__ = False  # not a pytest class

    names: list[str] = field(default_factory=list)
    lipschitz: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        names, lip = [], []
        for i, j in _PAIRS:
            names.append(f"re(u{i}u{j}*)")
            lip.append(math.sqrt(2))
            if i != j:
                names.append(f"im(u{i}u{j}*)")
                lip.append(math.sqrt(2))
        for (i, j), (k, l) in _PRODUCTS:
            for part in ("re", "im"):
                names.append(f"{part}(u{i}u{j}* u{k}u{l}*)")
                lip.append(2 * math.sqrt(2))
        names.append("conic_defect")
        lip.append(math.sqrt(12))  # sqrt(6) on unit vectors, times sqrt(2) from the phase-aligned distance
        self.names = names
        self.lipschitz = np.array(lip)

    def __len__(self) -> int:
        return len(self.names)

    def evaluate(self, P: np.ndarray) -> np.ndarray:
        """(N, 32) matrix of function values at the rows of ``P``."""
        U = np.asarray(P, dtype=complex)
        U = U / np.linalg.norm(U, axis=1, keepdims=True)
        M = U[:, :, None] * U[:, None, :].conj()
        cols = []
        for i, j in _PAIRS:
            cols.append(M[:, i, j].real)
            if i != j:
                cols.append(M[:, i, j].imag)
        for (i, j), (k, l) in _PRODUCTS:
            v = M[:, i, j] * M[:, k, l]
            cols.extend([v.real, v.imag])
        cols.append(sphere_conic_defect(U))
        return np.column_stack(cols)

    def integrate(self, mu: EmpiricalMeasure) -> np.ndarray:
        if not len(mu):
            return np.zeros(len(self))
        return mu.weights @ self.evaluate(mu.atoms)


# --- transport ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransportResult:
    value: float
    mode: str
    normalized: bool = False

    def to_json(self) -> dict:
        return {"value": self.value, "mode": self.mode, "normalized": self.normalized}


def transport(mu: EmpiricalMeasure, rho: EmpiricalMeasure, mode: str = "auto",
              exact_limit: int = EXACT_LIMIT, dictionary: TestDictionary | None = None) -> TransportResult:
    """W1 under the chordal metric, with the mode used and whether masses were renormalized."""
    if mode not in ("auto", "exact", "dictionary"):
        raise ValueError(f"unknown mode {mode!r}")
    m1, m2 = mu.mass, rho.mass
    if m1 <= 0 or m2 <= 0:
        raise MassMismatch("cannot compare a zero measure")
    normalized = False
    a, b = mu.weights, rho.weights
    if abs(m1 - m2) > MASS_TOL * max(m1, m2):
        a, b = a / m1, b / m2
        normalized = True
    if abs(np.sum(a) - np.sum(b)) > MASS_TOL * max(np.sum(a), 1.0) * 10:
        raise MassMismatch("masses differ after normalization")
    exact = mode == "exact" or (mode == "auto" and max(len(mu), len(rho)) <= exact_limit)
    if mu.atoms.shape == rho.atoms.shape and np.array_equal(mu.atoms, rho.atoms) and np.array_equal(a, b):
        return TransportResult(0.0, "exact" if exact else "dictionary", normalized)
    if exact:
        C = dist_matrix(mu.atoms, rho.atoms)
        b = b * (np.sum(a) / np.sum(b))  # POT wants exactly equal sums
        val = float(_ot().emd2(a, b, C, numItermax=10_000_000))
        return TransportResult(max(val, 0.0), "exact", normalized)
    D = dictionary or TestDictionary()
    mu2 = EmpiricalMeasure(mu.atoms, a)
    rho2 = EmpiricalMeasure(rho.atoms, b)
    diff = np.abs(D.integrate(mu2) - D.integrate(rho2)) / D.lipschitz
    return TransportResult(float(np.max(diff)), "dictionary", normalized)


def wasserstein1(mu: EmpiricalMeasure, rho: EmpiricalMeasure, mode: str = "auto",
                 exact_limit: int = EXACT_LIMIT) -> float:
    return transport(mu, rho, mode, exact_limit).value


# --- reference measure ---------------------------------------------------------------------


def nu_reference(f: HomPolyMap, atom_count: int = REFERENCE_ATOMS) -> EmpiricalMeasure:
    """Uniform measure on the invariant circle of a built-in map, as ``atom_count`` roots of unity."""
    kind = f.circle_kind
    N = int(atom_count)
    if N < 1:
        raise ValueError("atom_count must be positive")
    w = np.exp(2j * np.pi * np.arange(N) / N)
    if kind == "conic":
        P = np.column_stack([w * w, np.ones(N), w])
    elif kind == "line":
        P = np.column_stack([w, np.ones(N), np.zeros(N)])
    else:
        raise UnsupportedMap("reference measure needs a built-in map with known circle dynamics")
    meas = EmpiricalMeasure(P, np.full(N, 1.0 / N), f"nu_ref({N})")
    meas.params["atom_count"] = N
    return meas


def circle_angles(f: HomPolyMap, P: np.ndarray) -> np.ndarray:
    """Angle in ``[0, 2 pi)`` of the circle parameter of points near the invariant circle."""
    P = np.asarray(P, dtype=complex)
    if f.circle_kind == "conic":
        w = np.where(np.abs(P[:, 1]) >= np.abs(P[:, 0]), P[:, 2] / np.where(P[:, 1] == 0, 1, P[:, 1]),
                     P[:, 0] / np.where(P[:, 2] == 0, 1, P[:, 2]))
    elif f.circle_kind == "line":
        w = P[:, 0] / np.where(P[:, 1] == 0, 1, P[:, 1])
    else:
        raise UnsupportedMap("no parametrized circle for this map")
    return np.mod(np.angle(w), 2 * np.pi)


# --- Birkhoff averages -----------------------------------------------------------------------


@dataclass
class BirkhoffResult:
    averages: np.ndarray
    names: list[str]
    orbit_measure: EmpiricalMeasure
    mean_conic_defect: float
    steps: int
    policy: str

    def to_json(self) -> dict:
        return {"averages": dict(zip(self.names, map(float, self.averages))),
                "mean_conic_defect": self.mean_conic_defect, "steps": self.steps, "policy": self.policy,
                "orbit_atoms": len(self.orbit_measure)}


def birkhoff(f: HomPolyMap, p0: ProjPoint, N: int, dictionary: TestDictionary | None = None,
             forward_policy: str = "auto") -> BirkhoffResult:
    """Averages of the dictionary over ``f^i(p0)``, i < N; the orbit measure keeps the last N/2 points."""
    from .orbits import _resolve_policy

    if N < 1000:
        raise PreconditionError("Birkhoff averages need N >= 1000")
    D = dictionary or TestDictionary()
    r = _resolve_policy(f, p0, forward_policy)
    orb = kernels.forward_orbit(f.monos, f.coefs, np.array(p0.coords, dtype=complex), N - 1, r)
    vals = D.evaluate(orb)
    # shifted mean: exact for constant orbits and less cancellation otherwise
    avg = vals[0] + (vals - vals[0]).mean(axis=0)
    tail = orb[N // 2:]
    meas = EmpiricalMeasure(tail, np.full(len(tail), 1.0 / len(tail)), "birkhoff")
    policy = "retract" if r == kernels.RETRACT_XY else "plain"
    return BirkhoffResult(avg, D.names, meas, float(np.mean(conic_defect_array(orb))), N, policy)


def basin_seeds(count: int, delta: float = 0.05, rng_seed: int = 0, min_defect: float = 1e-3) -> list[ProjPoint]:
    """Points ``[e^{ia} : e^{ib} : z]`` of ``U(delta)`` off the conic on ``|x| = |y|``.

    ``|x| = |y|`` is where the Green current lives inside ``U``; angles come
    from 53-bit uniforms, which avoids the dyadic (non-generic) ones.
    """
    from .projgeom import normalize

    rng = np.random.default_rng(rng_seed)
    out = []
    while len(out) < count:
        a, b = 2 * np.pi * rng.uniform(size=2)
        x, y = np.exp(1j * a), np.exp(1j * b)
        e = rng.uniform(min_defect, delta) * np.exp(2j * np.pi * rng.uniform())
        z = np.sqrt(x * y + e) * (1 if rng.uniform() < 0.5 else -1)
        p = normalize((x, y, z))
        if min_defect <= conic_defect_array(np.array([p.coords]))[0] <= delta:
            out.append(p)
    return out


# --- equidistribution of periodic points ---------------------------------------------------------


@dataclass
class EquidistributionRow:
    n: int
    count: int
    expected: int
    mass: float
    w1: float
    bound: float
    mode: str

    def to_json(self) -> dict:
        return dict(self.__dict__)


def equidistribution_report(f: HomPolyMap, n_range, delta: float = 0.05, reference_atoms: int = REFERENCE_ATOMS,
                            rng_seed: int = 0) -> list[EquidistributionRow]:
    ref = nu_reference(f, reference_atoms)
    rows = []
    d = f.degree
    for n in n_range:
        pts = find_periodic(f, n, delta, default_strategy(f, n), rng_seed, do_classify=False)
        nu = nu_n(f, n, delta, points=pts)
        if len(nu):
            tr = transport(nu.normalized(), ref)
            w1, mode = tr.value, tr.mode
        else:
            w1, mode = math.nan, "empty"
        bound = math.pi / (d**n - 1) + 0.01 if d**n > 1 else math.inf
        rows.append(EquidistributionRow(n, len(pts), lefschetz_expected(d, n), nu.mass, w1, bound, mode))
    return rows


def non_increasing(values, slack: float = 0.1) -> bool:
    v = [x for x in values]
    return all(v[i + 1] <= v[i] * (1 + slack) for i in range(len(v) - 1))


# --- disintegration along the invariant circle -------------------------------------------------------


@dataclass
class DisintegrationReport:
    arcs: list[tuple[float, float]]
    reference: np.ndarray
    slice: np.ndarray
    relative: np.ndarray
    max_discrepancy: float

    def to_json(self) -> dict:
        return {"arcs": [list(a) for a in self.arcs], "reference": self.reference.tolist(),
                "slice": self.slice.tolist(), "relative": self.relative.tolist(),
                "max_discrepancy": self.max_discrepancy}


def skewed_reference(atom_count: int = REFERENCE_ATOMS, segment=(0.0, math.pi)) -> np.ndarray:
    """Negative control: angles ``a + (b-a) s^2`` for uniform ``s``, a deliberately wrong conditional."""
    a, b = segment
    s = (np.arange(atom_count) + 0.5) / atom_count
    return a + (b - a) * s**2


def disintegration_check(f: HomPolyMap, segment=(0.0, math.pi), arcs=16, depth: int = DEFAULT_DEPTH,
                         reference_atoms: int = REFERENCE_ATOMS, reference_angles=None,
                         n_grid: int = 64) -> DisintegrationReport:
    """Compare conditional masses of the reference measure and of ``T ^ [segment]`` on an arc partition.

    ``arcs`` is a count (equal arcs) or an increasing list of boundary angles.
    The slice side measures each arc by the sub-disk whose diameter is the arc
    in the parameter of the segment disk.
    """
    if f.circle_kind != "conic":
        raise UnsupportedMap("disintegration_check works on the conic of the circle family")
    a, b = map(float, segment)
    if not b > a:
        raise ValueError("segment must have positive length")
    bounds = np.linspace(a, b, int(arcs) + 1) if np.isscalar(arcs) else np.asarray(arcs, dtype=float)
    if reference_angles is None:
        ref = nu_reference(f, reference_atoms)
        ang = circle_angles(f, ref.atoms)
        w = ref.weights
    else:
        ang = np.asarray(reference_angles, dtype=float)
        w = np.full(len(ang), 1.0 / len(ang))
    width = b - a
    # half-open arcs; the shift moves atoms rounded just below a boundary onto it
    ang = np.mod(ang - a + 1e-9, 2 * np.pi) + a
    ref_mass = np.array([w[(ang >= lo) & (ang < hi)].sum() for lo, hi in zip(bounds[:-1], bounds[1:])])
    if ref_mass.sum() <= 0:
        raise ValueError("reference measure puts no mass on the segment")
    ref_mass = ref_mass / ref_mass.sum()
    disk = conic_arc_disk(0.5 * (a + b), 0.5 * width)
    ts = (bounds - 0.5 * (a + b)) / (0.5 * width)
    sl = np.array([slice_mass(f, disk, 0.5 * (t1 - t0), 0.5 * (t0 + t1), depth, n_grid)
                   for t0, t1 in zip(ts[:-1], ts[1:])])
    sl = sl / sl.sum()
    rel = np.abs(sl - ref_mass) / np.maximum(ref_mass, 1e-300)
    return DisintegrationReport(list(zip(bounds[:-1].tolist(), bounds[1:].tolist())), ref_mass, sl, rel,
                                float(np.max(rel)))


# --- pushforward of slice measures ------------------------------------------------------------------


@dataclass
class PushforwardRow:
    n: int
    w1: float
    mode: str

    def to_json(self) -> dict:
        return dict(self.__dict__)


def pushforward_check(f: HomPolyMap, disk: DiskParam, n_range, depth: int = DEFAULT_DEPTH, atom_count: int = 1000,
                      rng_seed: int = 0, reference_atoms: int = REFERENCE_ATOMS) -> list[PushforwardRow]:
    """W1 between ``f^n_*`` of the normalized slice measure of ``disk`` and the reference measure."""
    ref = nu_reference(f, reference_atoms)
    mu = slice_sample(f, disk, depth, atom_count, rng_seed).normalized()
    rows = []
    cur, at = mu, 0
    for n in sorted(n_range):
        if n < at:
            raise ValueError("n_range must be non-negative")
        cur = cur.pushforward(f, n - at)
        at = n
        tr = transport(cur, ref)
        rows.append(PushforwardRow(n, tr.value, tr.mode))
    return rows


__all__ = [
    "BirkhoffResult", "DisintegrationReport", "EquidistributionRow", "PushforwardRow", "TestDictionary",
    "TransportResult", "basin_seeds", "birkhoff", "circle_angles", "disintegration_check",
    "equidistribution_report", "non_increasing", "nu_reference", "pushforward_check", "skewed_reference",
    "sphere_conic_defect", "transport", "wasserstein1",
]
