import json
import math

import numpy as np
import pytest

from saddlelab.empirical import EmpiricalMeasure
from saddlelab.endo import family_Ftheta, make_map
from saddlelab.errors import MassMismatch, PreconditionError, UnsupportedMap
from saddlelab.green import conic_arc_disk
from saddlelab.measures import (
    TestDictionary, basin_seeds, birkhoff, circle_angles, disintegration_check, equidistribution_report,
    non_increasing, nu_reference, pushforward_check, skewed_reference, sphere_conic_defect, transport,
    wasserstein1,
)
from saddlelab.projgeom import conic_defect_array, conic_point, point

from conftest import random_points


def _dirac(p):
    return EmpiricalMeasure(np.array([p.coords]), np.ones(1))


def _roots(N):
    w = np.exp(2j * np.pi * np.arange(N) / N)
    return np.column_stack([w * w, np.ones(N), w])


# --- transport ----------------------------------------------------------------------------


def test_w1_self_is_zero(F, rng):
    mu = EmpiricalMeasure.uniform(random_points(rng, 50))
    assert wasserstein1(mu, mu) == 0.0


def test_w1_diracs_on_axes():
    assert wasserstein1(_dirac(point(1, 0, 0)), _dirac(point(0, 1, 0))) == pytest.approx(1.0)


@pytest.mark.parametrize("N", [8, 16, 64])
def test_w1_roots_of_unity_against_fine_reference(F, N):
    mu = EmpiricalMeasure(_roots(N), np.full(N, 1.0 / N))
    assert wasserstein1(mu, nu_reference(F, 2048)) <= math.pi / N + 1e-9


def test_w1_metric_axioms(rng):
    bad = 0
    for _ in range(1000):
        A, B, C = (EmpiricalMeasure.uniform(random_points(rng, 4)) for _ in range(3))
        ab, ba = wasserstein1(A, B), wasserstein1(B, A)
        bad += abs(ab - ba) > 1e-12
        bad += wasserstein1(A, C) > ab + wasserstein1(B, C) + 1e-12
    assert bad == 0


def test_w1_normalizes_unequal_masses(rng):
    P = random_points(rng, 10)
    tr = transport(EmpiricalMeasure(P, np.full(10, 0.5)), EmpiricalMeasure(P, np.full(10, 0.1)))
    assert tr.normalized and tr.value == pytest.approx(0.0, abs=1e-12)


def test_w1_rejects_zero_measure(rng):
    with pytest.raises(MassMismatch):
        wasserstein1(EmpiricalMeasure.empty(), EmpiricalMeasure.uniform(random_points(rng, 3)))


def test_dictionary_mode_is_lower_bound(rng):
    for _ in range(20):
        A = EmpiricalMeasure.uniform(random_points(rng, 30))
        B = EmpiricalMeasure.uniform(random_points(rng, 30))
        exact = transport(A, B, "exact").value
        dic = transport(A, B, "dictionary")
        assert dic.mode == "dictionary"
        assert dic.value <= exact + 1e-12


def test_auto_mode_switches_above_limit(F):
    big = nu_reference(F, 3000)
    assert transport(big, nu_reference(F, 512)).mode == "dictionary"
    assert transport(nu_reference(F, 100), nu_reference(F, 512)).mode == "exact"


def test_dictionary_functions_bounded_and_lipschitz(rng):
    D = TestDictionary()
    assert len(D) == 32
    P = random_points(rng, 2000)
    V = D.evaluate(P)
    assert np.abs(V).max() <= 1 + 1e-12
    Q = P + 1e-3 * (rng.normal(size=P.shape) + 1j * rng.normal(size=P.shape))
    from saddlelab.projgeom import dist_matrix
    d = np.array([dist_matrix(P[i : i + 1], Q[i : i + 1])[0, 0] for i in range(len(P))])
    ratio = np.abs(D.evaluate(Q) - V) / d[:, None]
    assert np.all(ratio <= D.lipschitz[None, :] * (1 + 1e-6))


def test_sphere_conic_defect_zero_on_conic():
    assert sphere_conic_defect(_roots(16)).max() < 1e-15


# --- reference measure --------------------------------------------------------------------


def test_nu_reference_four_atoms(F):
    ref = nu_reference(F, 4)
    expect = np.array([conic_point(w).coords for w in (1, 1j, -1, -1j)])
    from saddlelab.projgeom import dist_matrix
    assert np.all(dist_matrix(ref.atoms, expect).min(axis=1) < 1e-15)
    assert ref.mass == pytest.approx(1.0)


def test_nu_reference_invariance(F):
    N = 256
    img = nu_reference(F, 2 * N).pushforward(F, 1)
    assert wasserstein1(img, nu_reference(F, N)) < 1e-9


def test_nu_reference_supported_on_conic(F):
    ref = nu_reference(F, 512)
    assert ref.integrate(conic_defect_array) == pytest.approx(0.0, abs=1e-15)


def test_nu_reference_needs_builtin():
    g = make_map([[((2, 0, 0), 1)], [((0, 2, 0), 1)], [((1, 0, 1), 0.5), ((0, 0, 2), 1)]], 2)
    with pytest.raises(UnsupportedMap):
        nu_reference(g, 8)


def test_circle_angles_roundtrip(F):
    t = np.linspace(0.1, 6.2, 40)
    P = np.array([conic_point(np.exp(1j * a)).coords for a in t])
    assert np.allclose(circle_angles(F, P), t, atol=1e-12)


def test_pushforward_preserves_mass(F, rng):
    mu = EmpiricalMeasure(random_points(rng, 100), rng.uniform(size=100))
    assert mu.pushforward(F, 3).mass == mu.mass


# --- Birkhoff averages -------------------------------------------------------------------


def test_birkhoff_at_fixed_point(F):
    p = point(1, 1, 1)
    res = birkhoff(F, p, 1000)
    D = TestDictionary()
    assert np.array_equal(res.averages, D.evaluate(np.array([p.coords]))[0])


def test_birkhoff_basin_orbit(F):
    ref = nu_reference(F, 512)
    for p0 in basin_seeds(3, 0.05, rng_seed=5):
        res = birkhoff(F, p0, 10_000)
        assert res.mean_conic_defect < 1e-3
        assert wasserstein1(res.orbit_measure, ref) < 0.05


def test_birkhoff_needs_length(F):
    with pytest.raises(PreconditionError):
        birkhoff(F, point(1, 1, 1), 999)


def test_basin_seeds_in_region():
    P = np.array([p.coords for p in basin_seeds(50, 0.05, rng_seed=2)])
    d = conic_defect_array(P)
    assert np.all((d >= 1e-3) & (d <= 0.05))
    assert np.allclose(np.abs(P[:, 0]), np.abs(P[:, 1]))


def test_birkhoff_json(F):
    js = json.loads(json.dumps(birkhoff(F, point(1, 1, 1), 1000).to_json()))
    assert js["steps"] == 1000 and len(js["averages"]) == 32


# --- equidistribution -------------------------------------------------------------------


@pytest.fixture(scope="module")
def equi(F):
    return equidistribution_report(F, range(1, 9))


def test_equidistribution_counts(equi):
    assert [r.count for r in equi] == [3, 5, 9, 17, 33, 65, 129, 257]
    assert all(r.count == r.expected for r in equi)


def test_equidistribution_decay(equi):
    w = [r.w1 for r in equi]
    assert non_increasing(w, 0.1)
    assert all(r.w1 <= r.bound for r in equi[1:])
    assert equi[-1].w1 <= math.pi / 255 + 0.01


def test_equidistribution_first_row_informational(equi):
    assert 0.3 < equi[0].w1 < 0.9
    assert equi[0].mode == "exact"


def test_non_increasing_helper():
    assert non_increasing([1.0, 1.05, 0.5])
    assert not non_increasing([1.0, 1.2])


# --- disintegration -------------------------------------------------------------------


def test_disintegration_uniform(F):
    rep = disintegration_check(F, (0.0, math.pi), 16, 40)
    assert rep.max_discrepancy < 0.1
    assert rep.reference.sum() == pytest.approx(1.0)


def test_disintegration_single_arc(F):
    rep = disintegration_check(F, (0.0, math.pi), 1, 40)
    assert rep.max_discrepancy == 0.0


def test_disintegration_skewed_control(F):
    rep = disintegration_check(F, (0.0, math.pi), 16, 40, reference_angles=skewed_reference())
    assert rep.max_discrepancy > 0.3


def test_disintegration_needs_conic_family(SQ):
    with pytest.raises(UnsupportedMap):
        disintegration_check(SQ)


# --- pushforward -------------------------------------------------------------------------


def test_pushforward_baseline_and_end(F):
    rows = pushforward_check(F, conic_arc_disk(0.0, math.pi / 8), [0, 10], 40, 1000)
    assert rows[0].n == 0 and rows[0].w1 > 0.3
    assert rows[-1].w1 < 0.05


def test_pushforward_full_circle_is_uniform(F):
    rows = pushforward_check(F, conic_arc_disk(0.0, math.pi), [0], 40, 1000)
    assert rows[0].w1 < 0.01
