import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddlelab.errors import NearChartBoundary, ZeroVector
from saddlelab.projgeom import (conic_defect, conic_defect_array, conic_parameter, conic_point, dist, dist_matrix,
                                from_chart, normalize, point, to_chart)

from conftest import random_points

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)
triples = st.tuples(cplx, cplx, cplx).filter(lambda t: max(abs(c) for c in t) > 1e-100)


# --- oracle examples ---------------------------------------------------------------


@pytest.mark.parametrize("raw, pivot, coords", [
    ((2, 0, 0), 0, (1, 0, 0)),
    ((0, 3j, 0), 1, (0, 1, 0)),
    ((2j, 1, 0), 0, (1, -0.5j, 0)),
])
def test_normalize_examples(raw, pivot, coords):
    p = normalize(raw)
    assert p.pivot == pivot
    assert p.coords == tuple(complex(c) for c in coords)


def test_normalize_rejects_zero_and_nan():
    with pytest.raises(ZeroVector):
        normalize((0, 0, 0))
    with pytest.raises(ValueError):
        normalize((float("nan"), 1, 0))


def test_tie_picks_smallest_index():
    assert normalize((1, -1, 1j)).pivot == 0
    assert normalize((0, 2, 2)).pivot == 1


@pytest.mark.parametrize("p, q, expected", [
    ((1, 2, 3), (1, 2, 3), 0.0),
    ((1, 0, 0), (0, 1, 0), 1.0),
    ((1, 0, 0), (1, 1, 0), 1 / math.sqrt(2)),
])
def test_dist_examples(p, q, expected):
    assert dist(point(*p), point(*q)) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("p, chart, uv", [
    ((1, 0, 0), 0, (0, 0)),
    ((1, 1, 1), 2, (1, 1)),
    ((1, -1, 0), 0, (-1, 0)),
])
def test_to_chart_examples(p, chart, uv):
    a = to_chart(point(*p), chart)
    assert (a.chart, a.u, a.v) == (chart, complex(uv[0]), complex(uv[1]))


def test_to_chart_boundary():
    with pytest.raises(NearChartBoundary):
        to_chart(point(1, 0, 0), 1)


@pytest.mark.parametrize("p, expected", [((1, 1, 1), 0.0), ((1, 1, 0), 1.0), ((0, 0, 1), 1.0)])
def test_conic_defect_examples(p, expected):
    assert conic_defect(point(*p)) == expected


def test_conic_parametrization_roundtrip():
    for w in (0.3 + 0.1j, 1j, np.exp(2.0j), 4 - 2j):
        assert conic_defect(conic_point(w)) < 1e-15
        assert abs(conic_parameter(conic_point(w)) - w) < 1e-12 * max(1, abs(w))


# --- properties ------------------------------------------------------------------------


@given(triples)
def test_normalize_invariants_and_idempotence(t):
    p = normalize(t)
    assert p.coords[p.pivot] == 1 + 0j
    assert all(abs(c) <= 1 for c in p.coords)
    assert normalize(p.coords) == p
    # projectively equal to the input
    assert dist(p, t) < 1e-12


@given(triples, st.floats(-3, 3), st.floats(0, 2 * math.pi))
def test_dist_scale_invariance(t, log_r, phi):
    lam = 10**log_r * complex(math.cos(phi), math.sin(phi))
    q = point(0.3, -1j, 0.7)
    assert abs(dist(normalize([lam * c for c in t]), q) - dist(normalize(t), q)) < 1e-14


@given(triples, st.floats(0.01, 100), st.floats(0, 2 * math.pi))
def test_conic_defect_representative_free(t, r, phi):
    lam = r * complex(math.cos(phi), math.sin(phi))
    scaled = tuple(lam * c for c in t)
    assert abs(conic_defect(scaled) - conic_defect(normalize(t))) < 1e-13


@settings(max_examples=50)
@given(triples)
def test_chart_roundtrip(t):
    p = normalize(t)
    assert dist(from_chart(to_chart(p, p.pivot)), p) < 1e-14


def test_metric_axioms_bulk(rng):
    # the chordal distance is a genuine metric; the factor 2 allowed for comparable metrics is not needed
    P, Q, R = (random_points(rng, 10_000) for _ in range(3))
    for p, q, r in zip(P, Q, R):
        p, q, r = tuple(p), tuple(q), tuple(r)
        pq, qr = dist(p, q), dist(q, r)
        assert pq == dist(q, p)
        assert dist(p, r) <= pq + qr + 1e-12
        assert 0.0 <= pq <= 1.0


def test_dist_matrix_matches_scalar(rng):
    P, Q = random_points(rng, 20), random_points(rng, 30)
    M = dist_matrix(P, Q)
    for i in (0, 7, 19):
        for j in (0, 11, 29):
            assert M[i, j] == pytest.approx(dist(tuple(P[i]), tuple(Q[j])), abs=1e-12)


def test_dist_matrix_small_distances_are_accurate():
    p = np.array([[1.0, 0.3, 0.2j]])
    q = p + np.array([[0, 1e-10, 0]])
    exact = dist(tuple(p[0]), tuple(q[0]))
    assert dist_matrix(p, q)[0, 0] == pytest.approx(exact, rel=1e-6)
    assert dist_matrix(p, p)[0, 0] == 0.0


def test_conic_defect_array_matches_scalar(rng):
    P = random_points(rng, 50)
    d = conic_defect_array(P)
    assert np.allclose(d, [conic_defect(tuple(r)) for r in P], atol=1e-15)
