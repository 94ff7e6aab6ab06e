"""Weighted atom clouds on the projective plane."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

DEDUP_RADIUS = 1e-12


def projector_embedding(P: np.ndarray) -> np.ndarray:
    """Real coordinates of ``p p^H / |p|^2``; Euclidean distance there is sqrt(2) x chordal."""
    P = np.asarray(P, dtype=complex)
    U = P / np.linalg.norm(P, axis=1, keepdims=True)
    M = U[:, :, None] * U[:, None, :].conj()
    M = M.reshape(len(P), 9)
    return np.concatenate([M.real, M.imag], axis=1)


def dedupe(P: np.ndarray, w: np.ndarray, radius: float = DEDUP_RADIUS):
    if len(P) < 2:
        return P, w
    tree = cKDTree(projector_embedding(P))
    pairs = tree.query_pairs(np.sqrt(2.0) * radius, output_type="ndarray")
    if len(pairs) == 0:
        return P, w
    parent = np.arange(len(P))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(P))])
    keep = np.unique(roots)
    W = np.zeros(len(P))
    np.add.at(W, roots, w)
    return P[keep], W[keep]


@dataclass
class EmpiricalMeasure:
    atoms: np.ndarray  # (N,3) normalized representatives
    weights: np.ndarray  # (N,)
    label: str = ""
    flags: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.atoms, dtype=complex)).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(A) != len(w):
            raise ValueError("atoms and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if len(A):
            A, _ = kernels.normalize_rows(A)
            A, w = dedupe(A, w)
        self.atoms = A
        self.weights = w

    @classmethod
    def empty(cls, label: str = "", flags=None) -> "EmpiricalMeasure":
        return cls(np.zeros((0, 3), dtype=complex), np.zeros(0), label, list(flags or []))

    @classmethod
    def uniform(cls, P, mass: float = 1.0, label: str = "") -> "EmpiricalMeasure":
        P = np.asarray(P, dtype=complex).reshape(-1, 3)
        return cls(P, np.full(len(P), mass / max(len(P), 1)), label)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def normalized(self) -> "EmpiricalMeasure":
        m = self.mass
        if m <= 0:
            raise ValueError("cannot normalize a zero measure")
        return EmpiricalMeasure(self.atoms, self.weights / m, self.label, list(self.flags), dict(self.params))

    def integrate(self, func) -> float:
        """``sum w_i func(atoms)`` with ``func`` vectorized over (N,3) rows."""
        if not len(self):
            return 0.0
        return float(np.dot(self.weights, func(self.atoms)))

    def pushforward(self, f, n: int = 1) -> "EmpiricalMeasure":
        A = self.atoms
        for _ in range(n):
            A, _ = kernels.normalize_rows(kernels.eval_lift(f.monos, f.coefs, A))
        return EmpiricalMeasure(A, self.weights.copy(), self.label, list(self.flags), dict(self.params))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["re_x", "im_x", "re_y", "im_y", "re_z", "im_z", "weight"])
        for p, w in zip(self.atoms, self.weights):
            wr.writerow([repr(float(c)) for z in p for c in (z.real, z.imag)] + [repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, label: str = "") -> "EmpiricalMeasure":
        rows = list(csv.DictReader(io.StringIO(text)))
        P = np.array(
            [[complex(float(r[f"re_{c}"]), float(r[f"im_{c}"])) for c in "xyz"] for r in rows],
            dtype=complex,
        ).reshape(-1, 3)
        w = np.array([float(r["weight"]) for r in rows])
        return cls(P, w, label)
