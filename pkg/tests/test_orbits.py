import cmath
import json
import math

import numpy as np
import pytest

from saddlelab import orbits as O
from saddlelab.endo import chart_jacobians, eval_points, make_map
from saddlelab.errors import FrameNotFound, PreconditionError
from saddlelab.green import conic_arc_disk
from saddlelab.orbits import (
    BackwardOrbit, ChartFrame, backward_orbit, backward_shadowing, flat_graph, forward_orbit, frame_at_fixed_point,
    frame_chain, frame_map, graph_pullback, graph_transform, holonomy_probe, line_angle, local_stable,
    local_unstable, lyapunov, make_frame, oseledets_directions,
)
from saddlelab.projgeom import conic_defect, conic_defect_array, conic_parameter, conic_point, dist, point

LOG2 = math.log(2)
CHI2 = math.log(0.02)
W0 = cmath.exp(2j * math.pi * 0.3)


def _fixed_jacobian(f, p):
    return chart_jacobians(f, np.array([p.coords]), np.array([p.pivot]), np.array([p.pivot]))[0]


def _conic_tangent(p):
    """Tangent of ``w -> [w^2:1:w]`` at ``p`` in the pivot chart of ``p``."""
    w = conic_parameter(p)
    c = p.pivot
    a, b = [k for k in range(3) if k != c]
    V = np.array([w * w, 1, w])
    dV = np.array([2 * w, 0, 1])
    return np.array([(dV[a] * V[c] - V[a] * dV[c]) / V[c] ** 2, (dV[b] * V[c] - V[b] * dV[c]) / V[c] ** 2])


def _conic_graph(frame, kind="horizontal"):
    """Coefficients of the conic as a graph over ``Eu`` near the frame centre."""
    nodes = frame.radius * O._NODES
    c = frame.chart
    a, b = [k for k in range(3) if k != c]
    z0 = frame.base_chart_point
    # V(eta) is affine in eta, so z^2 - xy is a quadratic in eta
    out = []
    for xi in nodes:
        base = z0 + xi * frame.Eu
        V0 = np.zeros(3, dtype=complex)
        V1 = np.zeros(3, dtype=complex)
        V0[c], V0[a], V0[b] = 1.0, base[0], base[1]
        V1[a], V1[b] = frame.Es
        q2 = V1[2] ** 2 - V1[0] * V1[1]
        q1 = 2 * V0[2] * V1[2] - V0[0] * V1[1] - V1[0] * V0[1]
        q0 = V0[2] ** 2 - V0[0] * V0[1]
        r = np.roots([q2, q1, q0])
        out.append(r[np.argmin(np.abs(r))])
    coeffs, _ = O._fit(nodes, np.array(out), frame.radius)
    return coeffs


@pytest.fixture(scope="module")
def conic_orbit(F):
    return backward_orbit(F, conic_point(W0), 40, rng_seed=1)


# --- backward orbits -------------------------------------------------------------------


def test_backward_orbit_fixed_point_constant(F):
    ob = backward_orbit(F, point(1, 1, 1), 20)
    assert ob.depth == 20
    assert all(dist(p, point(1, 1, 1)) < 1e-12 for p in ob.points)


def test_backward_orbit_roots_on_conic(F):
    ob = backward_orbit(F, conic_point(W0), 10, rng_seed=4)
    for k, p in enumerate(ob.points):
        w = conic_parameter(p)
        assert abs(w ** (2**k) - W0) < 1e-9
        assert conic_defect(p) < 1e-9
    assert max(ob.residuals) < 1e-9
    for k in range(10):
        assert dist(eval_points(F, np.array([ob.points[k + 1].coords]))[0], ob.points[k].coords) < 1e-9


def test_backward_orbit_depth_zero(F):
    ob = backward_orbit(F, conic_point(W0), 0)
    assert ob.depth == 0 and ob.branch_choices == [] and ob.points == [conic_point(W0)]


def test_backward_orbit_rejects_unknown_policy(F):
    with pytest.raises(ValueError):
        backward_orbit(F, point(1, 1, 1), 3, policy="bogus")


def test_backward_orbit_json(F):
    js = json.loads(json.dumps(backward_orbit(F, conic_point(W0), 3).to_json()))
    assert len(js["points"]) == 4 and len(js["residuals"]) == 3


def test_backward_orbit_reproducible(F):
    a = backward_orbit(F, conic_point(W0), 12, rng_seed=9)
    b = backward_orbit(F, conic_point(W0), 12, rng_seed=9)
    assert a.branch_choices == b.branch_choices


# --- Lyapunov exponents ------------------------------------------------------------------


def test_lyapunov_generic_conic_point(F):
    est = lyapunov(F, conic_point(cmath.exp(2j * math.pi * 0.2718281828)), 100_000, rng_seed=7)
    assert est.chi1 == pytest.approx(LOG2, abs=0.01)
    assert est.chi2 == pytest.approx(CHI2, abs=0.02)
    assert est.chi1 >= est.chi2


def test_lyapunov_squaring_line_circle(SQ):
    est = lyapunov(SQ, point(1, cmath.exp(1j * 2.0), 0), 10_000)
    assert est.chi1 == pytest.approx(LOG2, abs=0.01)


def test_lyapunov_fixed_point_eigenvalues(F):
    p = point(1, 1, 1)
    vals = np.sort(np.abs(np.linalg.eigvals(_fixed_jacobian(F, p))))[::-1]
    assert vals == pytest.approx([2, 0.02], rel=1e-12)
    est = lyapunov(F, p, 1000)
    assert est.chi1 == pytest.approx(math.log(vals[0]), abs=1e-8)
    assert est.chi2 == pytest.approx(math.log(vals[1]), abs=1e-8)


def test_lyapunov_shift_invariance(F):
    p = conic_point(cmath.exp(2j * math.pi * 0.123))
    a = lyapunov(F, p, 20_000)
    q = point(*forward_orbit(F, p, 10)[-1])
    b = lyapunov(F, q, 20_000)
    for x, y in [(a.chi1, b.chi1), (a.chi2, b.chi2)]:
        assert abs(x - y) <= max(2 * (a.stderr + b.stderr), 1e-9)


def test_lyapunov_needs_steps(F):
    with pytest.raises(ValueError):
        lyapunov(F, point(1, 1, 1), 50)


def test_retract_policy_guard():
    g = _axis_map()
    with pytest.raises(PreconditionError):
        forward_orbit(g, point(1, 1, 1), 5, policy="retract")


# --- Oseledets directions --------------------------------------------------------------


def test_oseledets_unstable_tangent_to_conic(F, conic_orbit):
    Eu, Es = oseledets_directions(F, conic_orbit, 30)
    assert line_angle(Eu, _conic_tangent(conic_orbit.points[0])) < 1e-6
    assert line_angle(Es, Eu) > 0.1


def test_oseledets_squaring_line(SQ):
    p = point(1, cmath.exp(1j * 0.7), 0)
    ob = backward_orbit(SQ, p, 30, policy="uniform_in_region", delta=2.0)
    Eu, _ = oseledets_directions(SQ, ob, 30)
    # chart 0 coordinates (y/x, z/x): the line z = 0 is the first axis
    assert line_angle(Eu, [1, 0]) < 1e-6


def test_oseledets_fixed_point_eigenvectors(F):
    p = point(1, 1, 1)
    vals, vecs = np.linalg.eig(_fixed_jacobian(F, p))
    order = np.argsort(-np.abs(vals))
    Eu, Es = oseledets_directions(F, BackwardOrbit([p] * 41, [0] * 40, 0), 30)
    assert line_angle(Eu, vecs[:, order[0]]) < 1e-6
    assert line_angle(Es, vecs[:, order[1]]) < 1e-6


def test_oseledets_needs_depth(F):
    with pytest.raises(PreconditionError):
        oseledets_directions(F, backward_orbit(F, point(1, 1, 1), 5), 30)


def test_oseledets_angle_decay_rate(F, conic_orbit):
    # a fixed off-tangent vector pushed m steps forward aligns at rate exp(-(chi1 - chi2)) per step
    v0 = np.array([0.3 + 0.2j, 1.0])
    ms = np.arange(1, 5)  # m = 5 already reaches the rounding floor
    ang = []
    for m in ms:
        hist = np.array([conic_orbit.points[k].coords for k in range(m, -1, -1)])
        ang.append(line_angle(O.pushforward_direction(F, hist, v0), _conic_tangent(conic_orbit.points[0])))
    slope = np.polyfit(ms, np.log(ang), 1)[0]
    predicted = -(LOG2 - CHI2 - 2 * 0.05)
    assert abs(slope - predicted) <= 0.2 * abs(predicted)


# --- frames ----------------------------------------------------------------------------


def test_make_frame_generic_conic(F, conic_orbit):
    fr = make_frame(F, conic_orbit, 0.05, 0.05, chi=(LOG2, CHI2))
    assert fr.radius >= 1e-3 and fr.radius <= 0.1
    assert fr.hyperbolic
    assert abs(np.vdot(fr.Eu, fr.Es)) < 1 - 1e-6


def test_frame_at_fixed_point_centre_is_fixed(F):
    fr = frame_at_fixed_point(F, point(1, 1, 1), 0.05, 0.05)
    x, e, Df = frame_map(F, fr, fr, np.zeros(1), np.zeros(1))
    assert abs(x[0]) < 1e-14 and abs(e[0]) < 1e-14
    assert np.allclose(Df[0], np.diag([fr.a_u, fr.a_s]), atol=1e-12)


def test_make_frame_violated_inequalities(F, conic_orbit):
    assert not O.hyperbolicity_holds(LOG2, CHI2, 0.4, 0.3)
    try:
        fr = make_frame(F, conic_orbit, 0.4, 0.3, chi=(LOG2, CHI2))
    except FrameNotFound:
        return
    assert fr.hyperbolic is False


def test_make_frame_needs_saddle_exponents(SQ):
    p = point(1, cmath.exp(0.4j), cmath.exp(1.9j))
    with pytest.raises(PreconditionError):
        make_frame(SQ, BackwardOrbit([p], [], 0), 0.05, 0.05, chi=(LOG2, LOG2))


def test_chart_frame_rejects_parallel_axes():
    from saddlelab.errors import DegenerateSplitting
    with pytest.raises(DegenerateSplitting):
        ChartFrame(point(1, 1, 1), 0, [1, 0], [2, 0], 0.1, 0.05, 0.05)


def test_frame_coords_roundtrip(F, conic_orbit):
    fr = make_frame(F, conic_orbit, 0.05, 0.05, chi=(LOG2, CHI2))
    xi, eta = np.array([0.01, -0.02j]), np.array([0.003, 0.001 + 0.001j])
    x2, e2 = fr.coords(fr.lift(xi, eta) * 3.7j)
    assert np.allclose(x2, xi, atol=1e-15) and np.allclose(e2, eta, atol=1e-15)


# --- graph transform --------------------------------------------------------------------


def _axis_map():
    return make_map([[((2, 0, 0), 1)], [((0, 2, 0), 1)], [((1, 0, 1), 0.5), ((0, 0, 2), 1)]], 2)


def test_flat_graph_invariant_on_straight_axes():
    g = _axis_map()
    fr = frame_at_fixed_point(g, point(1, 1, 0), 0.05, 0.05)
    assert np.abs(graph_transform(g, fr, fr, flat_graph(fr)).coeffs).max() < 1e-10


def test_vertical_pullback_stays_vertical():
    g = _axis_map()
    fr = frame_at_fixed_point(g, point(1, 1, 0), 0.05, 0.05)
    out = graph_pullback(g, fr, fr, flat_graph(fr, "vertical"))
    assert out.kind == "vertical"
    assert np.abs(out.coeffs).max() < 1e-10


def test_vertical_pullback_conic_frames(F, conic_orbit):
    src, dst = frame_chain(F, conic_orbit, 1, 0.05, 0.05, chi=(LOG2, CHI2))
    out = graph_pullback(F, src, dst, flat_graph(dst, "vertical"))
    assert out.kind == "vertical" and out.fit_residual < 1e-8 * src.radius
    assert math.isfinite(out.lipschitz_bound)
    # its points land on the flat vertical graph at the image
    P = out.sample(32, 0.8)
    xi, _ = dst.coords(eval_points(F, P))
    assert np.abs(xi).max() < 1e-8 * dst.radius


def test_graph_transform_conic_arc(F, conic_orbit):
    src, dst = frame_chain(F, conic_orbit, 1, 0.05, 0.05, chi=(LOG2, CHI2))
    O._set_linear_parts(F, [src, dst])
    g = O.GraphDisk(src, "horizontal", _conic_graph(src), 0.0)
    img = graph_transform(F, src, dst, g)
    assert np.abs(img.coeffs - _conic_graph(dst)).max() < 1e-8
    assert img.fit_residual < 1e-8 * dst.radius


def test_graph_transform_contracts_slopes(F):
    fr = frame_at_fixed_point(F, point(1, 1, 1), 0.05, 0.05)
    c = np.zeros(O.GRAPH_DEGREE + 1, dtype=complex)
    c[1] = 0.5 * fr.radius
    g = O.GraphDisk(fr, "horizontal", c, 0.5)
    L = [g.lipschitz_bound]
    for _ in range(4):
        g = graph_transform(F, fr, fr, g)
        L.append(g.lipschitz_bound)
    assert all(b <= a for a, b in zip(L, L[1:]))


def test_graph_transform_rejects_wrong_frames(F, conic_orbit):
    fr = frame_at_fixed_point(F, point(1, 1, 1), 0.05, 0.05)
    other = make_frame(F, conic_orbit, 0.05, 0.05, chi=(LOG2, CHI2))
    with pytest.raises(PreconditionError):
        graph_transform(F, fr, other, flat_graph(fr))
    with pytest.raises(ValueError):
        graph_transform(F, fr, fr, flat_graph(fr, "vertical"))


# --- local unstable manifolds ------------------------------------------------------------


@pytest.fixture(scope="module")
def unstable(F, conic_orbit):
    frames = frame_chain(F, conic_orbit, 8, 0.05, 0.05, chi=(LOG2, CHI2))
    return frames, local_unstable(F, conic_orbit, frames, 8, return_history=True)


def test_local_unstable_lies_on_conic(unstable):
    _, res = unstable
    assert conic_defect_array(res.disk.sample(200)).max() < 1e-8


def test_local_unstable_backward_shadowing(F, unstable):
    _, res = unstable
    D = backward_shadowing(F, res.history).max(axis=1)
    k = np.arange(len(D))
    C = float(np.max(D * np.exp((LOG2 - 0.05) * k)))
    assert C < 10 * D[0]
    assert D[-1] < D[0]


def test_local_unstable_f_compatible(F, conic_orbit, unstable):
    frames, res = unstable
    q = point(*eval_points(F, np.array([conic_orbit.points[0].coords]))[0])
    ob2 = BackwardOrbit([q] + conic_orbit.points, [0] + conic_orbit.branch_choices, 0)
    frames2 = frame_chain(F, ob2, 8, 0.05, 0.05, chi=(LOG2, CHI2))
    disk2 = local_unstable(F, ob2, frames2, 8)
    P = eval_points(F, res.disk.sample(32, 0.2))
    assert disk2.offset(P).max() < 1e-6


def test_local_unstable_fixed_point_tangent(F):
    p = point(1, 1, 1)
    fr = frame_at_fixed_point(F, p, 0.05, 0.05)
    ob = BackwardOrbit([p] * 11, [0] * 10, 0)
    disk = local_unstable(F, ob, [fr] * 11, 10)
    assert abs(disk.slope(0)) < 1e-8


def test_local_unstable_zero_iterations_is_flat(F, conic_orbit, unstable):
    frames, _ = unstable
    disk = local_unstable(F, conic_orbit, frames, 0)
    assert np.all(disk.coeffs == 0)


# --- local stable manifolds ---------------------------------------------------------------


def test_local_stable_fixed_point_first_order_zero(F):
    fr = frame_at_fixed_point(F, point(1, 1, 1), 0.05, 0.05)
    disk = local_stable(F, point(1, 1, 1), fr, 3)
    assert disk.kind == "vertical"
    assert abs(disk.coeffs[1]) < 1e-8


def test_local_stable_generic_conic_point(F, conic_orbit):
    fr = make_frame(F, conic_orbit, 0.05, 0.05, chi=(LOG2, CHI2))
    rep = local_stable(F, conic_orbit.points[0], fr, 3, return_report=True)
    assert abs(rep.contraction_exponent - CHI2) < 0.1
    assert rep.residual < 1e-8 * fr.radius
    # transverse to the conic
    tangent_in_frame = np.linalg.solve(fr.basis, _conic_tangent(conic_orbit.points[0]))
    slope = rep.disk.slope(0)
    assert line_angle([slope, 1], tangent_in_frame) > 0.5


def test_local_stable_positive_exponent_rejected(SQ):
    p = point(1, cmath.exp(0.4j), cmath.exp(1.9j))
    fr = ChartFrame(p, 0, [1, 0], [0, 1], 0.1, 0.05, 0.05, LOG2, LOG2)
    with pytest.raises(PreconditionError):
        local_stable(SQ, p, fr)


# --- holonomy ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_family(F):
    return O.conic_stable_family(F, 0.7, 0.4, 8, chi=(LOG2, CHI2))


def test_holonomy_identical_disks(F, small_family):
    leaves, tg = small_family
    D = conic_arc_disk(0.7, 0.4)
    rep = holonomy_probe(F, D, D, leaves, 40, bins=4, t_guesses=tg)
    assert rep.flag == "" and rep.bins
    assert rep.max_discrepancy == 0.0


def test_holonomy_empty_family(F):
    D = conic_arc_disk(0.7, 0.4)
    rep = holonomy_probe(F, D, D, [])
    assert rep.flag == "no data" and rep.bins == [] and rep.max_discrepancy == 0.0


def test_holonomy_report_json(F, small_family):
    leaves, tg = small_family
    D = conic_arc_disk(0.7, 0.4)
    D2 = conic_arc_disk(0.7, 0.4, shift=0.005, bend=0.15)
    rep = holonomy_probe(F, D, D2, leaves, 40, bins=4, t_guesses=tg)
    js = json.loads(json.dumps(rep.to_json()))
    assert len(js["bins"]) == 4
    assert js["max_discrepancy"] < 0.05
