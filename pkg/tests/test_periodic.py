import csv
import io

import numpy as np
import pytest

from saddlelab.endo import eval_points, make_map
from saddlelab.errors import NeutralAmbiguous, PreconditionError, SeedBudgetExceeded, UnsupportedMap
from saddlelab.periodic import (
    PeriodicPoint, classify, cycle_jacobian, default_strategy, find_periodic, lefschetz_expected, minimal_period,
    nu_n, polish, to_csv,
)
from saddlelab.projgeom import conic_defect, conic_point, dist, normalize, point


def _contains(points, q, tol=1e-9):
    return any(dist(pp.point, q) < tol for pp in points)


def _iterate(f, p, n):
    V = np.array([p.coords])
    for _ in range(n):
        V = eval_points(f, V)
    return V[0]


@pytest.fixture(scope="module")
def per(F):
    return {n: find_periodic(F, n, 0.05, default_strategy(F, n)) for n in range(1, 9)}


def test_fixed_points_of_Ftheta(per):
    pts = per[1]
    assert len(pts) == 3
    for q in [point(1, 0, 0), point(0, 1, 0), point(1, 1, 1)]:
        assert _contains(pts, q)


def test_period_two_points_of_Ftheta(per):
    pts = per[2]
    assert len(pts) == 5
    w = np.exp(2j * np.pi / 3)
    assert _contains(pts, conic_point(w)) and _contains(pts, conic_point(w.conjugate()))
    assert sorted(pp.minimal_period for pp in pts) == [1, 1, 1, 2, 2]


def test_squaring_fixed_points_global(SQ):
    pts = find_periodic(SQ, 1, 1.0, "grid_newton")
    assert len(pts) == 7
    for q in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)]:
        assert _contains(pts, point(*q))


@pytest.mark.parametrize("n", range(1, 9))
def test_lefschetz_count_in_region(per, n):
    assert len(per[n]) == lefschetz_expected(2, n)


@pytest.mark.parametrize("n", range(1, 9))
def test_conic_periodic_points_are_saddles(per, n):
    for pp in per[n]:
        if conic_defect(pp.point) < 1e-9 and min(abs(c) for c in pp.point.coords) > 0:
            assert pp.cls == "saddle"


def test_returned_points_close_up(F, per):
    for n in (3, 5):
        for pp in per[n]:
            assert dist(_iterate(F, pp.point, n), pp.point) < 1e-9
            assert pp.residual < 1e-9
            m = pp.minimal_period
            assert n % m == 0
            for k in range(1, m):
                assert dist(_iterate(F, pp.point, k), pp.point) > 1e-8


def test_local_uniqueness_under_perturbation(F, per, rng):
    for pp in per[3]:
        v = np.array(pp.point.coords) + 1e-5 * (rng.normal(size=3) + 1j * rng.normal(size=3))
        q, res = polish(F, normalize(v), 3)
        assert res < 1e-9
        assert dist(q, pp.point) < 1e-9


def test_classify_fixed_point_saddle(F, per):
    pp = next(p for p in per[1] if dist(p.point, point(1, 1, 1)) < 1e-12)
    assert pp.cls == "saddle"
    assert sorted(abs(m) for m in pp.multipliers) == pytest.approx([0.02, 2.0], rel=1e-9)


def test_classify_origin_against_eigenvalues(F):
    p = point(0, 0, 1)
    pp = classify(F, PeriodicPoint(p, 1, 1, residual=dist(_iterate(F, p, 1), p)))
    m = np.sort(np.abs(np.linalg.eigvals(cycle_jacobian(F, p, 1))))
    assert sorted(abs(z) for z in pp.multipliers) == pytest.approx(m)
    expect = "attracting" if m[1] < 1 else "repelling" if m[0] > 1 else "saddle"
    assert pp.cls == expect


def test_classify_squaring_repelling(SQ):
    pp = classify(SQ, PeriodicPoint(point(1, 1, 1), 1, 1))
    assert pp.cls == "repelling"
    assert [abs(m) for m in pp.multipliers] == pytest.approx([2, 2])


def test_classify_neutral_flag():
    # identity-like tangent multiplier at [1:0:0]: x^2, xy, z^2 has multiplier 1 along y
    g = make_map([[((2, 0, 0), 1)], [((1, 1, 0), 1)], [((0, 0, 2), 1)]], 2, check=False)
    pp = PeriodicPoint(point(1, 0, 0), 1, 1)
    out = classify(g, pp)
    assert out.cls == "neutral" and "neutral_ambiguous" in out.flags
    with pytest.raises(NeutralAmbiguous):
        classify(g, pp, strict=True)


def test_classify_rejects_large_residual(F):
    with pytest.raises(PreconditionError):
        classify(F, PeriodicPoint(point(0.3, 0.2, 1), 1, 1, residual=0.5))


def test_minimal_period(F):
    w = np.exp(2j * np.pi / 3)
    assert minimal_period(F, conic_point(w), 2) == 2
    assert minimal_period(F, point(1, 1, 1), 6) == 1


def test_nu_n_mass(F, per):
    m = nu_n(F, 2, points=per[2])
    assert len(m) == 5
    assert m.mass == pytest.approx(5 / 4)
    assert m.params["expected_mass"] == pytest.approx(5 / 4)


def test_nu_n_mass_tends_to_one(F, per):
    masses = [nu_n(F, n, points=per[n]).mass for n in range(1, 9)]
    assert masses == pytest.approx([(2**n + 1) / 2**n for n in range(1, 9)])
    assert all(b < a for a, b in zip(masses, masses[1:]))


def test_nu_n_empty(F):
    m = nu_n(F, 3, points=[])
    assert len(m) == 0 and m.mass == 0 and "empty" in m.flags


@pytest.mark.parametrize("d,n,expected", [(2, 1, 3), (2, 10, 1025), (3, 2, 10)])
def test_lefschetz_expected(d, n, expected):
    assert lefschetz_expected(d, n) == expected


def test_conic_roots_large_n(F):
    pts = find_periodic(F, 10, 0.05, "conic_roots")
    assert len(pts) == 1025


def test_strategy_limits(F):
    with pytest.raises(PreconditionError):
        find_periodic(F, 7, 0.05, "grid_newton")
    with pytest.raises(PreconditionError):
        find_periodic(F, 13, 0.05, "conic_roots")
    with pytest.raises(ValueError):
        find_periodic(F, 1, 0.05, "bogus")
    g = make_map([[((2, 0, 0), 1)], [((0, 2, 0), 1)], [((1, 0, 1), 0.5), ((0, 0, 2), 1)]], 2)
    with pytest.raises(UnsupportedMap):
        find_periodic(g, 1, 0.05, "conic_roots")


def test_seed_budget_partial(F):
    with pytest.raises(SeedBudgetExceeded) as ei:
        find_periodic(F, 1, 0.05, "both", seed_budget=10)
    assert isinstance(ei.value.partial, list)


def test_csv_export(per):
    text = to_csv(per[2])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 5
    assert set(rows[0]) == {"period", "minimal_period", "re_x", "im_x", "re_y", "im_y", "re_z", "im_z",
                            "abs_mult1", "abs_mult2", "class", "residual"}
    assert all(float(r["residual"]) < 1e-9 for r in rows)
