import csv
import io
import math

import numpy as np
import pytest

from wslab.cylinder import (
    ClampedLinear,
    ClampedPolynomial,
    CombinedOuter,
    CylinderFunction,
    GaussianBump,
    IdentityClampOuter,
    PolynomialOuter,
    ReindexedOuter,
    SlopeProbeReport,
    cylinder_from_json,
    cylinder_to_json,
    derivative_along_curve,
    differential,
    differential_norm,
    eval_cylinder,
    geodesic_interpolate,
    slope_lower_bound,
    slope_upper_probe,
    suggested_clamp,
)
from wslab.cylinder import _saturate, _saturate_prime
from wslab.experiments import concave_cylinder_function, generic_cylinder_function
from wslab.measures import DiscreteMeasure
from wslab.norms import CostSpec, euclidean, one_norm, p_norm
from wslab.transport import solve_ot

from .conftest import box_measure, make_rng


# ------------------------------------------------------------------ saturation


def test_saturation_shape():
    c = 2.0
    t = np.linspace(-6, 6, 241)
    s = _saturate(t, c)
    inside = np.abs(t) <= c
    assert np.array_equal(s[inside], t[inside])
    assert np.all(np.abs(s) < c + 1.0)
    assert np.all(np.diff(s) > 0)  # strictly increasing
    sp = _saturate_prime(t, c)
    assert np.all(sp <= 1.0) and np.all(sp > 0)
    assert _saturate_prime(np.array([c]), c)[0] == 1.0  # C^1 at the joint


def test_saturation_derivative_fd():
    c = 1.5
    t = np.array([-3.0, -1.2, 0.0, 1.49, 1.51, 4.0])
    h = 1e-6
    fd = (_saturate(t + h, c) - _saturate(t - h, c)) / (2 * h)
    assert np.allclose(fd, _saturate_prime(t, c), atol=1e-6)


# ---------------------------------------------------------------- inner fields


FIELDS = [
    ClampedPolynomial(exponents=((2, 0), (1, 1), (0, 1)), coeffs=(0.7, -1.1, 0.5), clamp=3.0),
    GaussianBump(center=(0.3, -0.4), width=0.8, amplitude=1.7),
    ClampedLinear(covector=(1.2, -0.7), clamp=2.0),
]


@pytest.mark.parametrize("field", FIELDS, ids=lambda f: type(f).__name__)
def test_field_gradient_matches_fd(field):
    rng = make_rng("field-fd", type(field).__name__)
    x = rng.uniform(-2, 2, (40, 2))
    g = field.gradient(x)
    h = 1e-6
    for l in range(2):
        e = np.zeros(2)
        e[l] = h
        fd = (field.value(x + e) - field.value(x - e)) / (2 * h)
        assert np.allclose(fd, g[:, l], atol=5e-5)


@pytest.mark.parametrize("field", FIELDS, ids=lambda f: type(f).__name__)
def test_field_bound_and_lipschitz(field):
    rng = make_rng("field-bounds", type(field).__name__)
    x = rng.uniform(-8, 8, (4000, 2))
    assert float(np.max(np.abs(field.value(x)))) <= field.bound + 1e-12
    g = field.gradient(x)
    lip = field.lipschitz_bound()
    assert float(np.max(np.sqrt(np.sum(g * g, axis=1)))) <= lip + 1e-9


def test_gaussian_lipschitz_bound_is_tight():
    b = GaussianBump(center=(0.0, 0.0), width=0.6, amplitude=-2.0)
    want = 2.0 * math.exp(-0.5) / 0.6
    assert b.lipschitz_bound() == pytest.approx(want, rel=1e-14)
    # attained on the ray at radius = width
    at = b.gradient(np.array([[0.6, 0.0]]))[0]
    assert float(np.abs(at[0])) == pytest.approx(want, rel=1e-14)


def test_field_validation():
    with pytest.raises(ValueError):
        ClampedPolynomial(exponents=((1, 0),), coeffs=(1.0,), clamp=0.0)
    with pytest.raises(ValueError):
        ClampedPolynomial(exponents=((1, 0), (0, 1)), coeffs=(1.0,), clamp=1.0)
    with pytest.raises(ValueError):
        GaussianBump(center=(0.0,), width=0.0, amplitude=1.0)
    with pytest.raises(ValueError):
        ClampedLinear(covector=(1.0,), clamp=-1.0)


def test_suggested_clamp_covers_samples():
    vals = np.array([-3.0, 0.5, 2.0])
    assert suggested_clamp(vals) == pytest.approx(8.0)
    assert suggested_clamp(vals) > float(np.max(np.abs(vals)))


# --------------------------------------------------------- cylinder evaluation


def _simple_cylinder():
    lin = ClampedLinear(covector=(1.0, 2.0), clamp=50.0)
    return CylinderFunction(inner=(lin,), outer=IdentityClampOuter(clamp=100.0))


def test_eval_cylinder_hand_value():
    mu = DiscreteMeasure(points=[[1.0, 0.0], [0.0, 1.0]], weights=[0.25, 0.75])
    # F(mu) = 0.25 * (1) + 0.75 * (2) = 1.75, clamps inactive
    assert eval_cylinder(_simple_cylinder(), mu) == pytest.approx(1.75, abs=1e-14)
    got = differential(_simple_cylinder(), mu, mu.points)
    assert np.allclose(got, [[1.0, 2.0], [1.0, 2.0]], atol=1e-14)


def test_differential_matches_fd_in_measure():
    rng = make_rng("cyl-fd")
    mu = box_measure(rng, 6, 2)
    func = generic_cylinder_function(rng, 2, mu.points)
    v = rng.normal(size=mu.points.shape)
    dot = float(np.sum(mu.weights[:, None] * differential(func, mu, mu.points) * v))
    h = 1e-6
    up = DiscreteMeasure(points=mu.points + h * v, weights=mu.weights)
    dn = DiscreteMeasure(points=mu.points - h * v, weights=mu.weights)
    fd = (eval_cylinder(func, up) - eval_cylinder(func, dn)) / (2 * h)
    assert dot == pytest.approx(fd, rel=2e-5, abs=1e-8)


def test_differential_single_point_shape():
    mu = DiscreteMeasure.dirac([0.2, -0.1])
    func = _simple_cylinder()
    single = differential(func, mu, np.array([0.5, 0.5]))
    assert single.shape == (2,)
    batch = differential(func, mu, np.array([[0.5, 0.5]]))
    assert batch.shape == (1, 2)
    assert np.array_equal(single, batch[0])


def test_representation_independence():
    rng = make_rng("repr")
    mu = box_measure(rng, 8, 2)
    f1 = FIELDS[0]
    f2 = FIELDS[1]
    outer = PolynomialOuter(exponents=((1, 0), (0, 2), (1, 1)), coeffs=(1.0, 0.5, -0.3), clamp=40.0)
    base = CylinderFunction(inner=(f1, f2), outer=outer)
    flipped = CylinderFunction(
        inner=(f2, f1), outer=ReindexedOuter(outer=outer, perm=(1, 0))
    )
    wrapped = CylinderFunction(inner=(f1, f2), outer=CombinedOuter(parts=((1.0, outer),)))
    x = rng.uniform(-1, 1, (5, 2))
    for other in (flipped, wrapped):
        assert eval_cylinder(other, mu) == pytest.approx(eval_cylinder(base, mu), abs=1e-13)
        assert np.allclose(differential(other, mu, x), differential(base, mu, x), atol=1e-13)


def test_cylinder_algebra():
    rng = make_rng("algebra")
    mu = box_measure(rng, 5, 2)
    f = CylinderFunction(inner=(FIELDS[0],), outer=IdentityClampOuter(clamp=30.0))
    g = CylinderFunction(inner=(FIELDS[2],), outer=IdentityClampOuter(clamp=30.0))
    x = rng.uniform(-1, 1, (4, 2))
    fv, gv = eval_cylinder(f, mu), eval_cylinder(g, mu)
    assert eval_cylinder(f + g, mu) == pytest.approx(fv + gv, abs=1e-13)
    assert eval_cylinder(f - g, mu) == pytest.approx(fv - gv, abs=1e-13)
    assert eval_cylinder(-f, mu) == pytest.approx(-fv, abs=1e-13)
    assert eval_cylinder(2.5 * f, mu) == pytest.approx(2.5 * fv, abs=1e-13)
    assert np.allclose(
        differential(f + g, mu, x),
        differential(f, mu, x) + differential(g, mu, x),
        atol=1e-13,
    )
    assert np.allclose(differential(0.5 * f, mu, x), 0.5 * differential(f, mu, x), atol=1e-13)


def test_cylinder_validation():
    with pytest.raises(ValueError):
        CylinderFunction(inner=(FIELDS[0], FIELDS[1]), outer=IdentityClampOuter(clamp=1.0))
    with pytest.raises(ValueError):
        CylinderFunction(
            inner=(FIELDS[0], ClampedLinear(covector=(1.0,), clamp=1.0)),
            outer=PolynomialOuter(exponents=((1, 0), (0, 1)), coeffs=(1.0, 1.0), clamp=1.0),
        )
    with pytest.raises(ValueError):
        eval_cylinder(_simple_cylinder(), DiscreteMeasure.dirac([0.0]))


# ------------------------------------------------------------------ geodesics


def test_geodesic_endpoints_and_constant_speed():
    rng = make_rng("geodesic")
    cost = CostSpec(norm=euclidean(2), p=2.0)
    mu = box_measure(rng, 6, 2)
    nu = box_measure(rng, 5, 2)
    sol = solve_ot(mu, nu, cost)
    f = generic_cylinder_function(rng, 2, mu.points)
    assert eval_cylinder(f, geodesic_interpolate(sol, 0.0)) == pytest.approx(
        eval_cylinder(f, mu), abs=1e-12
    )
    assert eval_cylinder(f, geodesic_interpolate(sol, 1.0)) == pytest.approx(
        eval_cylinder(f, nu), abs=1e-12
    )
    m_s = geodesic_interpolate(sol, 0.3)
    m_t = geodesic_interpolate(sol, 0.7)
    mid = solve_ot(m_s, m_t, cost)
    assert mid.wp == pytest.approx(0.4 * sol.wp, rel=1e-7)
    with pytest.raises(ValueError):
        geodesic_interpolate(sol, 1.2)


def test_derivative_along_curve_matches_fd():
    rng = make_rng("curve-fd")
    cost = CostSpec(norm=euclidean(2), p=2.0)
    mu = box_measure(rng, 5, 2)
    nu = box_measure(rng, 7, 2)
    sol = solve_ot(mu, nu, cost)
    func = generic_cylinder_function(rng, 2, mu.points)
    h = 1e-6
    for s in (0.2, 0.5, 0.8):
        got = derivative_along_curve(func, sol, s)
        fd = (
            eval_cylinder(func, geodesic_interpolate(sol, s + h))
            - eval_cylinder(func, geodesic_interpolate(sol, s - h))
        ) / (2 * h)
        assert got == pytest.approx(fd, rel=1e-4, abs=1e-7)
    with pytest.raises(ValueError):
        derivative_along_curve(func, sol, -0.1)


# --------------------------------------------------------------- slope probes


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_slope_bracket_on_concave_battery(p):
    rng = make_rng("slope", str(p))
    cost = CostSpec(norm=euclidean(2), p=p)
    mu = box_measure(rng, 5, 2)
    func = concave_cylinder_function(rng, 2, mu.points)
    dn = differential_norm(func, mu, cost)
    lower = slope_lower_bound(func, mu, cost, eps=1e-3)
    assert lower <= dn + 1e-9
    assert lower >= 0.95 * dn
    probe = slope_upper_probe(func, mu, cost, pairs_per_radius=8, seed=17)
    ratios = list(probe.ratios)
    assert all(a >= b - 1e-12 for a, b in zip(ratios, ratios[1:]))  # non-increasing
    for q, cap in zip(probe.ratios, probe.ball_differential_sup):
        assert q <= cap + 1e-6
    assert abs(probe.ratios[-1] - dn) <= 0.05 * dn


def test_constant_function_has_zero_slope():
    rng = make_rng("const")
    mu = box_measure(rng, 4, 2)
    cost = CostSpec(norm=one_norm(2), p=2.0)
    const = CylinderFunction(
        inner=(ClampedPolynomial(exponents=((0, 0),), coeffs=(1.3,), clamp=5.0),),
        outer=IdentityClampOuter(clamp=5.0),
    )
    assert differential_norm(const, mu, cost) == 0.0
    assert slope_lower_bound(const, mu, cost) == 0.0
    probe = slope_upper_probe(const, mu, cost, pairs_per_radius=3, seed=2)
    assert all(r == 0.0 for r in probe.ratios)


def test_probe_report_csv():
    rep = SlopeProbeReport(radii=(0.5, 0.25), ratios=(1.5, 1.2), ball_differential_sup=(2.0, 1.8))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["radius", "max_ratio", "bracket_upper"]
    assert [float(v) for v in rows[1]] == [0.5, 1.5, 2.0]
    assert len(rows) == 3


def test_differential_norm_uses_dual_norm():
    # one atom, linear field: dn = |a|_* regardless of p
    mu = DiscreteMeasure.dirac([0.0, 0.0])
    f = CylinderFunction(
        inner=(ClampedLinear(covector=(3.0, -4.0), clamp=90.0),),
        outer=IdentityClampOuter(clamp=90.0),
    )
    assert differential_norm(f, mu, CostSpec(norm=euclidean(2), p=2.0)) == pytest.approx(5.0)
    assert differential_norm(f, mu, CostSpec(norm=one_norm(2), p=2.0)) == pytest.approx(4.0)
    assert differential_norm(
        f, mu, CostSpec(norm=p_norm(2, float("inf")), p=3.0)
    ) == pytest.approx(7.0)


# -------------------------------------------------------------- serialization


def test_cylinder_json_round_trip():
    rng = make_rng("cyl-json")
    mu = box_measure(rng, 6, 2)
    x = rng.uniform(-1, 1, (5, 2))
    outer = CombinedOuter(
        parts=(
            (0.7, ReindexedOuter(outer=PolynomialOuter(
                exponents=((1, 0), (0, 1)), coeffs=(1.0, -0.5), clamp=20.0), perm=(1, 0))),
            (1.3, IdentityClampOuter(clamp=4.0)),
        )
    )
    func = CylinderFunction(inner=(FIELDS[0], FIELDS[1], FIELDS[2]), outer=outer)
    back = cylinder_from_json(cylinder_to_json(func))
    assert eval_cylinder(back, mu) == eval_cylinder(func, mu)
    assert np.array_equal(differential(back, mu, x), differential(func, mu, x))
