import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saddlelab.endo import (all_preimage_branches, chart_jacobian_at, eval, eval_lift, family_f0, family_Ftheta,
                            jacobian, lift_jacobian, make_map, map_from_json, preimages, sample_region,
                            sj_ratio, sj_ratio_array, small_topdegree_probe, squaring_map)
from saddlelab.errors import (BranchBudgetExceeded, DegenerateMap, DegenerateParameter, DegreeMismatch,
                              DegreeUnsupported)
from saddlelab.projgeom import conic_defect, conic_defect_array, conic_point, dist, point

from conftest import random_points


# --- construction -----------------------------------------------------------------


def test_f0_examples():
    sq = family_f0({(2, 0, 0): 1}, {(0, 2, 0): 1}, 2)
    assert sq.is_power_map()
    g = family_f0({(2, 0, 0): 1, (0, 1, 1): 1}, {(0, 2, 0): 1}, 2)
    assert g.components[2] == (((0, 0, 2), 1 + 0j),)
    cube = family_f0({(3, 0, 0): 1}, {(0, 3, 0): 1}, 3)
    assert cube.is_power_map() and cube.degree == 3


def test_construction_errors():
    with pytest.raises(DegreeMismatch):
        family_f0({(1, 0, 0): 1}, {(0, 2, 0): 1}, 2)
    with pytest.raises(DegenerateParameter):
        family_Ftheta(0)
    with pytest.raises(DegenerateMap):
        make_map([[((2, 0, 0), 0)], [((1, 1, 0), 0)], [((0, 0, 2), 0)]], 2)


@pytest.mark.parametrize("p, img", [((1, 1, 1), (1, 1, 1)), ((1, -1, 0), (1, 1, -0.99)), ((0, 0, 1), (0, 0, 1)),
                                    ((1, 0, 0), (1, 0, 0))])
def test_Ftheta_evaluation(F, p, img):
    assert dist(eval(F, point(*p)), point(*img)) < 1e-15


def test_eval_examples(F, SQ):
    assert dist(eval(SQ, point(1, 1j, 0)), point(1, -1, 0)) == 0.0
    w = cmath.exp(1j * math.pi / 3)
    assert dist(eval(F, conic_point(w)), conic_point(w**2)) < 1e-15


def test_eval_lift_examples(F, SQ):
    assert np.array_equal(eval_lift(SQ, (2, 0, 0)), [4, 0, 0])
    assert np.array_equal(eval_lift(F, (0, 0, 0)), [0, 0, 0])
    assert np.allclose(eval_lift(F, (1, 1, 0)), [1, 1, 0.99], rtol=0, atol=1e-16)


def test_serialization_roundtrip(F, SQ):
    for f in (F, SQ, family_Ftheta(0.2 - 0.1j), make_map([[((2, 0, 0), 1), ((0, 1, 1), 0.5j)], [((0, 2, 0), 1)],
                                                           [((0, 0, 2), 1)]], 2, label="custom")):
        g = map_from_json(f.to_json())
        assert np.array_equal(g.coefs, f.coefs) and g.degree == f.degree


# --- jacobians --------------------------------------------------------------------------


def test_jacobian_examples(F, SQ):
    J = jacobian(F, point(1, 1, 1))
    assert J.lift_det == pytest.approx(0.08, abs=1e-15)
    S = jacobian(SQ, point(1, 1, 1))
    assert np.allclose(S.chart_jac, np.diag([2, 2]), atol=1e-15)
    assert sj_ratio(SQ, point(1, 1, 1)) == pytest.approx(4.0)


def test_lift_det_closed_form(F, rng):
    for v in random_points(rng, 20):
        assert np.linalg.det(lift_jacobian(F, v)) == pytest.approx(8 * 0.01 * v[0] * v[1] * v[2], rel=1e-10)


def test_sj_ratio_on_circle_is_4theta(F):
    for t in np.linspace(0, 1, 9, endpoint=False):
        assert sj_ratio(F, conic_point(cmath.exp(2j * math.pi * t))) == pytest.approx(0.04, rel=1e-12)


def test_sj_ratio_at_critical_point(F):
    # lift_det = 8 theta xyz vanishes on the coordinate lines
    p = point(1, 0.5, 0)
    assert jacobian(F, p).lift_det == 0
    assert sj_ratio(F, p) == 0


def test_sj_ratio_array_matches_pointwise(F, rng):
    P = random_points(rng, 40)
    assert np.allclose(sj_ratio_array(F, P), [sj_ratio(F, point(*r)) for r in P], rtol=1e-9)


def _chart_fd(f, v, src, dst, h=1e-5):
    a, b = [k for k in range(3) if k != src]
    c, d = [k for k in range(3) if k != dst]

    def g(u, w):
        x = np.zeros(3, dtype=complex)
        x[src], x[a], x[b] = 1, u, w
        y = eval_lift(f, x)
        return np.array([y[c] / y[dst], y[d] / y[dst]])

    u, w = v[a] / v[src], v[b] / v[src]
    return np.column_stack([(g(u + h, w) - g(u - h, w)) / (2 * h), (g(u, w + h) - g(u, w - h)) / (2 * h)])


def test_chart_jacobian_matches_finite_differences(F, rng):
    for f in (F, family_Ftheta(0.4 + 0.3j), squaring_map(3)):
        for v in random_points(rng, 1000 if f is F else 100):
            p = point(*v)
            q = eval(f, p)
            J = chart_jacobian_at(f, p.coords, p.pivot, q.pivot)
            fd = _chart_fd(f, np.array(p.coords), p.pivot, q.pivot)
            assert np.allclose(J, fd, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(fd).max()))


def test_chart_det_independent_of_admissible_charts(F):
    # both charts admissible means the two coordinates tie in modulus; then the chart change is an isometry
    for p in (point(1, 0.5, 1j), point(-1, 0.3, 1), point(1, 0.2 + 0.1j, np.exp(0.7j))):
        q = eval(F, p)
        v = np.array(p.coords)
        d0 = abs(np.linalg.det(chart_jacobian_at(F, v, 0, q.pivot)))
        d2 = abs(np.linalg.det(chart_jacobian_at(F, v, 2, q.pivot)))
        assert d0 == pytest.approx(d2, rel=1e-8)


def test_chart_det_transformation_law(F):
    p = point(0.9, 0.8, 1)
    q = eval(F, p)
    d2 = abs(np.linalg.det(chart_jacobian_at(F, p.coords, 2, q.pivot)))
    d0 = abs(np.linalg.det(chart_jacobian_at(F, p.coords, 0, q.pivot)))
    assert d0 == pytest.approx(d2 * abs(p.coords[0] / p.coords[2]) ** 3, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(0.1, 10), st.floats(0, 6.3))
def test_homogeneity(xs, r, phi):
    f = family_Ftheta(0.01)
    v = np.array([complex(xs[0], xs[1]), complex(xs[2], xs[3]), complex(xs[4], xs[5])])
    lam = r * complex(math.cos(phi), math.sin(phi))
    lhs = eval_lift(f, lam * v)
    rhs = lam**2 * eval_lift(f, v)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13 * max(1.0, np.abs(rhs).max()))


def test_conic_forward_invariance(F, rng):
    w = np.exp(2j * np.pi * rng.uniform(size=500)) * rng.uniform(0.1, 10, 500)
    for z in w:
        assert conic_defect(eval(F, conic_point(z))) <= 1e-12


# --- preimages ---------------------------------------------------------------------------


def test_preimages_squaring_examples(SQ):
    pts = preimages(SQ, point(1, 1, 1))
    expected = [point(1, s, t) for s in (1, -1) for t in (1, -1)]
    assert sum(m for _, m in pts) == 4
    for e in expected:
        assert min(dist(p, e) for p, _ in pts) < 1e-12
    crit = preimages(SQ, point(1, 0, 0))
    assert len(crit) == 1 and crit[0][1] == 4


def test_preimages_Ftheta(F):
    q = point(1, 1, 1)
    pts = preimages(F, q)
    assert sum(m for _, m in pts) == 4
    for p, _ in pts:
        assert dist(eval(F, p), q) < 1e-8


def test_preimages_contain_original(F, rng):
    for v in random_points(rng, 25):
        p = point(*v)
        pts = preimages(F, eval(F, p))
        assert sum(m for _, m in pts) == 4
        assert min(dist(x, p) for x, _ in pts) < 1e-8


def test_preimages_degree_cap():
    f = family_f0({(4, 0, 0): 1}, {(0, 4, 0): 1}, 4)
    with pytest.raises(DegreeUnsupported):
        preimages(f, point(1, 1, 1))


def test_preimages_cubic():
    f = squaring_map(3)
    pts = preimages(f, point(1, 0.5, 0.3j))
    assert sum(m for _, m in pts) == 9


# --- small topological degree probe ------------------------------------------------------


def test_topdegree_probe_matches_enumeration(F):
    rep = small_topdegree_probe(F, 0.05, 1, 10, 3)
    P = sample_region(np.random.default_rng(3), 10, 0.05)
    counts = []
    for row in P:
        q = eval(F, point(*row))
        branches = all_preimage_branches(F, q, 1)
        counts.append(sum(conic_defect(b) <= 0.05 for b in branches))
    assert rep.max_count == max(counts)
    # the conic is covered twice by itself, so both conic-near preimages stay in U
    assert rep.max_count == 2 and not rep.holds


def test_topdegree_probe_squaring_reports_honestly(SQ):
    rep = small_topdegree_probe(SQ, 0.05, 1, 10, 0)
    assert rep.max_count <= 4 and rep.sample_count == 10


def test_topdegree_probe_edge_cases(F):
    rep = small_topdegree_probe(F, 0.05, 1, 0, 0)
    assert rep.holds and rep.flag == "no data"
    with pytest.raises(BranchBudgetExceeded):
        small_topdegree_probe(F, 0.05, 10, 1, 0)


def test_sample_region_respects_delta(rng):
    P = sample_region(rng, 500, 0.05)
    d = conic_defect_array(P)
    assert np.all((d > 0) & (d <= 0.05))
    assert np.allclose(np.max(np.abs(P), axis=1), 1.0)
