import math

import numpy as np
import pytest

from saddlelab import kernels
from saddlelab.endo import make_map
from saddlelab.errors import EmptySlice, GridTooCoarse
from saddlelab.green import (conic_arc_disk, error_bound, green, green_array, green_constant, green_lift,
                             line_disk, slice_grid, slice_mass, slice_sample)
from saddlelab.measures import nu_reference, wasserstein1
from saddlelab.projgeom import point

from conftest import random_points


def test_green_constant_examples(F, SQ):
    assert green_constant(SQ) == 0.0
    assert green_constant(F) >= abs(math.log(0.99))


def _doubled(f):
    return make_map([[(e, 2 * c) for e, c in comp] for comp in f.components], f.degree, check=False)


def test_green_constant_scaling(F, SQ):
    # the sup is taken of |log max|F||; doubling shifts every log by log 2
    assert green_constant(_doubled(SQ)) >= green_constant(SQ) + math.log(2) - 1e-12
    # for F_theta the sup sits at a negative log-norm, so it moves down by exactly 1.5 log 2
    assert green_constant(_doubled(F)) == pytest.approx(green_constant(F) - 1.5 * math.log(2), rel=1e-12)


def test_squaring_green_is_exactly_zero(SQ, rng):
    P = random_points(rng, 1000)
    for depth in (1, 7, 40, 60):
        assert np.all(green_array(SQ, P, depth) == 0.0)
    assert green(SQ, point(0.3, 1, -0.2j), 25).value == 0.0


def test_green_at_fixed_point(F):
    g30, g60 = green(F, point(1, 1, 1), 30), green(F, point(1, 1, 1), 60)
    assert math.isfinite(g30.value)
    assert g30.error_bound < 1e-8 * green_constant(F)
    assert abs(g30.value - g60.value) <= g30.error_bound
    with pytest.raises(ValueError):
        green(F, point(1, 1, 1), 61)


def test_green_cauchy_property(F, rng):
    P = random_points(rng, 300)
    C = green_constant(F)
    prev = green_array(F, P, 1)
    for n in range(1, 30):
        cur = green_array(F, P, n + 1)
        assert np.all(np.abs(cur - prev) <= C * 2.0 ** -(n + 1) + 1e-15)
        prev = cur


def test_functional_equation(F, rng):
    P = random_points(rng, 1000)
    n = 40
    eb = error_bound(F, n)
    Fv = kernels.eval_lift(F.monos, F.coefs, P)
    lhs = 2 * green_array(F, P, n) - green_array(F, Fv, n) - np.log(np.max(np.abs(Fv), axis=1))
    assert np.max(np.abs(lhs)) < 2 * eb
    # same identity through lifts: G(F(v)) = d G(v)
    V = P * 3.7
    assert np.allclose(green_lift(F, kernels.eval_lift(F.monos, F.coefs, V), n), 2 * green_lift(F, V, n), atol=1e-9)


# --- slice measures --------------------------------------------------------------------


def test_slice_mass_fatou_disk_is_zero(SQ):
    assert slice_mass(SQ, line_disk([1, 0, 0], [0, 0.1, 0]), 0.9) == 0.0


def test_slice_mass_crossing_julia_circle(SQ):
    disk = line_disk([1, 0.5, 0], [0, 1, 0])
    # fraction of the unit circle inside |w - 0.5| <= 0.9
    expected = math.acos(0.44) / math.pi
    assert slice_mass(SQ, disk, 0.9) == pytest.approx(expected, rel=1e-3)


def test_slice_mass_conic_arc_matches_uniform_circle(F):
    # G on the conic is 2 log+|w|, so the slice has mass 2 x (angular fraction of the circle)
    for h in (0.3, math.pi / 8):
        assert slice_mass(F, conic_arc_disk(0.0, h)) == pytest.approx(2 * h / math.pi, rel=0.05)


def test_slice_mass_monotone_in_radius(F, SQ):
    for f, disk in ((F, conic_arc_disk(0.4, 0.3)), (SQ, line_disk([1, 0.5, 0], [0, 1, 0]))):
        m = [slice_mass(f, disk, r) for r in (0.3, 0.7, 0.9)]
        assert 0 <= m[0] <= m[1] <= m[2]


def test_slice_mass_grid_checks(F, SQ):
    with pytest.raises(GridTooCoarse):
        slice_mass(F, conic_arc_disk(0, 0.3), n_grid=32)
    with pytest.raises(GridTooCoarse):
        # the contour |w - 0.5| = 0.5 is tangent to the Julia circle at w = 1
        slice_mass(SQ, line_disk([1, 0.5, 0], [0, 1, 0]), radius=0.5)


def test_slice_grid_clamped_weight_small(F):
    g = slice_grid(F, conic_arc_disk(0, 0.3))
    assert g.clamped <= 0.01 * g.masses.sum()


def test_slice_sample_concentrates_on_circle(SQ):
    meas = slice_sample(SQ, line_disk([1, 0.5, 0], [0, 1, 0]), atom_count=1000)
    w = meas.atoms[:, 1] / meas.atoms[:, 0]
    near = np.abs(np.abs(w) - 1) < 0.05
    assert np.sum(meas.weights[near]) >= 0.95 * meas.mass
    assert meas.mass == pytest.approx(slice_mass(SQ, line_disk([1, 0.5, 0], [0, 1, 0])), rel=1e-12)


def test_slice_sample_empty(SQ):
    with pytest.raises(EmptySlice):
        slice_sample(SQ, line_disk([1, 0, 0], [0, 0.1, 0]))


def test_slice_sample_converges_with_atom_count(SQ):
    disk = line_disk([1, 0, 0], [0, 1.5, 0])  # contains the whole Julia circle of the line z=0
    ref = nu_reference(SQ, 512)
    w = [wasserstein1(slice_sample(SQ, disk, atom_count=n, rng_seed=1).normalized(), ref) for n in (500, 1000)]
    # shifted Kronecker quantiles converge like 1/N, so doubling N roughly halves the error
    assert w[1] <= w[0] < 0.03


def test_slice_sample_deterministic(F):
    a = slice_sample(F, conic_arc_disk(0, 0.3), atom_count=200, rng_seed=5)
    b = slice_sample(F, conic_arc_disk(0, 0.3), atom_count=200, rng_seed=5)
    assert np.array_equal(a.atoms, b.atoms)


def test_csv_export(F):
    meas = slice_sample(F, conic_arc_disk(0, 0.3), atom_count=10)
    lines = meas.to_csv().splitlines()
    assert lines[0] == "re_x,im_x,re_y,im_y,re_z,im_z,weight"
    assert len(lines) == 11
