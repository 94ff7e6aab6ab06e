"""Green function by escape-rate telescoping, and slice measures on holomorphic disks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import kernels
from .empirical import EmpiricalMeasure
from .endo import HomPolyMap
from .errors import EmptySlice, GridTooCoarse
from .projgeom import ProjPoint

DEFAULT_DEPTH = 40
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GreenValue:
    value: float
    depth: int
    error_bound: float


@lru_cache(maxsize=64)
def green_constant(f: HomPolyMap, samples: int = 10_000, seed: int = 0) -> float:
    """1.5 x the sampled sup of ``|log max|F(v)||`` over normalized ``v``."""
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(samples, 3)) + 1j * rng.normal(size=(samples, 3))
    V, _ = kernels.normalize_rows(V)
    F = kernels.eval_lift(f.monos, f.coefs, V)
    s = float(np.max(np.abs(np.log(np.max(np.abs(F), axis=1)))))
    return 1.5 * s


def error_bound(f: HomPolyMap, depth: int) -> float:
    d = f.degree
    return green_constant(f) / (d - 1) / d**depth


def green(f: HomPolyMap, p: ProjPoint, depth: int = DEFAULT_DEPTH) -> GreenValue:
    if depth > 60:
        raise ValueError("depth is capped at 60")
    v = green_array(f, np.array([p.coords]), depth)[0]
    return GreenValue(float(v), depth, error_bound(f, depth))


def green_array(f: HomPolyMap, P: np.ndarray, depth: int = DEFAULT_DEPTH) -> np.ndarray:
    """Green function at normalized representatives of the rows of ``P``."""
    return kernels.green_batch(f.monos, f.coefs, f.degree, np.asarray(P, dtype=complex), depth)


def green_lift(f: HomPolyMap, V: np.ndarray, depth: int = DEFAULT_DEPTH) -> np.ndarray:
    """Escape rate of the lifts ``V`` themselves (not of their normalized representatives)."""
    V = np.asarray(V, dtype=complex)
    return np.log(np.max(np.abs(V), axis=1)) + green_array(f, V, depth)


# --- disks ------------------------------------------------------------------


@dataclass(frozen=True)
class DiskParam:
    """Holomorphic disk ``t -> [phi_0(t) : phi_1(t) : phi_2(t)]`` on ``|t| <= 1``.

    ``coeffs`` is (3, K): polynomial coefficients of each lift component, lowest
    degree first.
    """

    coeffs: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        if c.shape[0] != 3:
            raise ValueError("disk lift needs three component polynomials")
        object.__setattr__(self, "coeffs", c)
        if c.shape[1] < 2 or np.allclose(c[:, 1:], 0):
            raise ValueError("disk parametrization is constant")

    def lift(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        return np.stack([npoly.polyval(t, self.coeffs[k]) for k in range(3)], axis=-1)

    def lift_derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        return np.stack([npoly.polyval(t, npoly.polyder(self.coeffs[k])) for k in range(3)], axis=-1)

    def points(self, t) -> np.ndarray:
        Q, _ = kernels.normalize_rows(self.lift(np.ravel(t)))
        return Q


def line_disk(base, direction, label: str = "") -> DiskParam:
    """``t -> base + t direction`` (affine line through ``base``)."""
    c = np.zeros((3, 2), dtype=complex)
    c[:, 0] = base
    c[:, 1] = direction
    return DiskParam(c, label)


def _exp_series(poly, order: int = 28) -> np.ndarray:
    """Truncated Taylor series of ``exp(poly(t))`` (coefficients lowest first)."""
    poly = np.asarray(poly, dtype=complex)
    c0 = poly[0]
    q = poly.copy()
    q[0] = 0
    out = np.zeros(order + 1, dtype=complex)
    out[0] = 1
    term = np.array([1 + 0j])
    for k in range(1, order + 1):
        term = npoly.polymul(term, q)[: order + 1] / k
        out[: len(term)] += term
    return np.exp(c0) * out


def conic_arc_disk(center: float, half_width: float, shift: float = 0.0, bend: float = 0.0,
                   order: int = 28, label: str = "") -> DiskParam:
    """Disk ``t -> [w^2 : 1 : w (1+shift)]`` with ``w = exp(i (center + half_width (t + bend t^2)))``.

    For ``shift = 0`` the disk lies on the conic and real ``t`` in ``[-1,1]``
    sweeps the unit-circle arc of angular half-width ``half_width``.
    """
    phase = np.array([1j * center, 1j * half_width, 1j * half_width * bend])
    w = _exp_series(phase, order)
    w2 = npoly.polymul(w, w)[: order + 1]
    c = np.zeros((3, order + 1), dtype=complex)
    c[0] = w2
    c[1, 0] = 1
    c[2] = w * (1 + shift)
    return DiskParam(c, label or f"conic_arc({center:.4g},{half_width:.4g})")


# --- slice measures -----------------------------------------------------------


def disk_potential(f: HomPolyMap, disk: DiskParam, t, depth: int = DEFAULT_DEPTH) -> np.ndarray:
    t = np.asarray(t, dtype=complex)
    return green_lift(f, disk.lift(t.ravel()), depth).reshape(t.shape)


def _contour_mass(f, disk, center, radius, depth, n_grid):
    h = 2.0 / n_grid
    m = 4 * n_grid
    ang = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
    t_out = center + (radius + h / 2) * ang
    t_in = center + max(radius - h / 2, 0.0) * ang
    g = disk_potential(f, disk, np.concatenate([t_out, t_in]), depth)
    dr = (g[:m] - g[m:]) / (radius + h / 2 - max(radius - h / 2, 0.0))
    return float(radius * np.mean(dr))


def slice_mass(f: HomPolyMap, disk: DiskParam, radius: float = 1.0, center: complex = 0.0,
               depth: int = DEFAULT_DEPTH, n_grid: int = 64, check: bool = True) -> float:
    """Mass of ``dd^c (G o phi)`` on ``|t - center| <= radius`` via the flux of ``G o phi``."""
    if n_grid < 64:
        raise GridTooCoarse("n_grid must be at least 64")
    fine = _contour_mass(f, disk, center, radius, depth, 2 * n_grid)
    if check:
        coarse = _contour_mass(f, disk, center, radius, depth, n_grid)
        scale = max(abs(fine), abs(coarse))
        if scale > 1e-9 and abs(fine - coarse) > 0.05 * scale:
            raise GridTooCoarse(f"slice mass {coarse:.6g} -> {fine:.6g} under grid doubling")
    if fine < -1e-6:
        raise GridTooCoarse(f"negative slice mass {fine:.3g}")
    return max(fine, 0.0)


def _cell_masses(f, disk, centers, step, depth):
    """5-point Laplacian masses (already divided by 2 pi) at the given cell centers."""
    c = np.asarray(centers, dtype=complex).ravel()
    offs = np.array([0, step, -step, 1j * step, -1j * step])
    g = disk_potential(f, disk, c[:, None] + offs[None, :], depth)
    return (g[:, 1] + g[:, 2] + g[:, 3] + g[:, 4] - 4 * g[:, 0]) / (2 * np.pi)


@dataclass
class SliceGrid:
    centers: np.ndarray
    masses: np.ndarray
    step: float
    clamped: float


def slice_grid(f: HomPolyMap, disk: DiskParam, depth: int = DEFAULT_DEPTH, n_grid: int = 64) -> SliceGrid:
    h = 2.0 / n_grid
    xs = -1 + (np.arange(n_grid) + 0.5) * h
    T = xs[None, :] + 1j * xs[:, None]
    inside = np.abs(T) <= 1.0
    centers = T[inside]
    mass = _cell_masses(f, disk, centers, h, depth)
    neg = -float(np.sum(mass[mass < 0]))
    mass = np.clip(mass, 0.0, None)
    return SliceGrid(centers, mass, h, neg)


def _pick(cum, u):
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, len(cum) - 1)


def slice_sample(f: HomPolyMap, disk: DiskParam, depth: int = DEFAULT_DEPTH, atom_count: int = 1000,
                 rng_seed: int = 0, n_grid: int = 64, refine_levels: int = 14) -> EmpiricalMeasure:
    """Atoms distributed like ``T ^ [disk]``.

    Cells are drawn by inverse-CDF sampling of the clamped Laplacian masses at
    shifted Kronecker quantiles; each drawn cell is then refined ``refine_levels`` times on a 4x4
    sub-grid so atoms land on the support rather than on cell centres.
    """
    total = slice_mass(f, disk, 1.0, 0.0, depth, n_grid)
    if total <= 1e-6:
        raise EmptySlice(f"slice mass {total:.3g} too small to sample")
    grid = slice_grid(f, disk, depth, n_grid)
    pos = float(np.sum(grid.masses))
    if pos <= 0:
        raise EmptySlice("no positive Laplacian mass on the grid")
    if grid.clamped > 0.01 * pos:
        raise GridTooCoarse(f"clamped weight {grid.clamped:.3g} exceeds 1% of {pos:.3g}")
    rng = np.random.default_rng(rng_seed)
    # randomly shifted golden-ratio quantiles: x -> 2x maps such a sequence to another one,
    # so forward images under doubling-type dynamics keep low discrepancy
    u = np.mod(rng.uniform() + np.arange(atom_count) * _GOLDEN, 1.0)
    cum = np.cumsum(grid.masses) / pos
    idx = _pick(cum, u)
    lo = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    width = np.maximum(cum[idx] - lo, 1e-300)
    frac = np.clip((u - lo) / width, 0.0, 1.0 - 1e-16)
    t = grid.centers[idx].copy()
    step = grid.step
    sub = (np.arange(4) - 1.5) / 4.0
    sub_offsets = (sub[None, :] + 1j * sub[:, None]).ravel()
    for _ in range(refine_levels):
        s = step / 4
        cand = t[:, None] + step * sub_offsets[None, :]
        m = np.clip(_cell_masses(f, disk, cand, s, depth).reshape(len(t), 16), 0.0, None)
        tot = m.sum(axis=1)
        ok = tot > 0
        cm = np.cumsum(m, axis=1) / np.where(ok, tot, 1.0)[:, None]
        j = np.minimum(np.sum(cm <= frac[:, None], axis=1), 15)
        before = np.where(j > 0, cm[np.arange(len(t)), np.maximum(j - 1, 0)], 0.0)
        wj = cm[np.arange(len(t)), j] - before
        new_frac = np.clip((frac - before) / np.maximum(wj, 1e-300), 0.0, 1.0 - 1e-16)
        t = np.where(ok, cand[np.arange(len(t)), j], t)
        frac = np.where(ok, new_frac, frac)
        step = s
    P = disk.points(t)
    meas = EmpiricalMeasure(P, np.full(atom_count, total / atom_count), label=f"slice:{disk.label}")
    meas.params["t"] = t
    return meas


__all__ = [
    "DEFAULT_DEPTH", "DiskParam", "GreenValue", "conic_arc_disk", "disk_potential", "error_bound",
    "green", "green_array", "green_constant", "green_lift", "line_disk", "slice_grid", "slice_mass",
    "slice_sample",
]
