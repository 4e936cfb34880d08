import csv
import io
import math

import numpy as np
import pytest

from wslab.cylinder import (
    ClampedLinear,
    CylinderFunction,
    IdentityClampOuter,
    differential_norm,
    eval_cylinder,
)
from wslab.energy import (
    BoasParams,
    boas_qsum_preservation,
    boas_residual,
    clarkson_params,
    convexity_modulus_probe,
    lq_functional,
    pce_functional,
    pre_cheeger,
    sobolev_functional,
    sobolev_q_functional,
)
from wslab.experiments import generic_cylinder_function, random_meta_measure
from wslab.measures import DiscreteMeasure, MetaMeasure
from wslab.norms import CostSpec, euclidean, one_norm, p_norm

from .conftest import box_measure, make_rng


def _linear_cylinder(a):
    return CylinderFunction(
        inner=(ClampedLinear(covector=tuple(a), clamp=500.0),),
        outer=IdentityClampOuter(clamp=500.0),
    )


# ----------------------------------------------------------------- pre-Cheeger


def test_pre_cheeger_hand_value():
    # linear F: differential_norm is |a|_* at every measure, so
    # pCE_q = total_mass * |a|_*^q
    m = MetaMeasure(
        atoms=(
            (0.4, DiscreteMeasure.dirac([0.0, 0.0])),
            (1.1, DiscreteMeasure(points=[[1.0, 0.0], [0.0, 2.0]], weights=[0.5, 0.5])),
        )
    )
    func = _linear_cylinder([3.0, 4.0])
    cost = CostSpec(norm=euclidean(2), p=2.0)
    assert pre_cheeger(func, m, cost, 2.0) == pytest.approx(1.5 * 25.0, rel=1e-13)
    assert pre_cheeger(func, m, cost, 3.0) == pytest.approx(1.5 * 125.0, rel=1e-13)
    # dual of l^1 is l^inf
    assert pre_cheeger(func, m, CostSpec(norm=one_norm(2), p=2.0), 2.0) == pytest.approx(
        1.5 * 16.0, rel=1e-13
    )
    with pytest.raises(ValueError):
        pre_cheeger(func, m, cost, 1.0)


def test_sobolev_functional_composition():
    rng = make_rng("sobolev")
    meta = random_meta_measure(rng, 4, 3, 2, 1.5)
    cost = CostSpec(norm=euclidean(2), p=2.0)
    cloud = np.vstack([mu.points for _, mu in meta.atoms])
    func = generic_cylinder_function(rng, 2, cloud)
    q = 2.5
    rep = sobolev_functional(func, meta, cost, q)
    assert rep.q == q
    assert rep.lq_norm_q == pytest.approx(float(rep.lq_contributions.sum()), rel=1e-14)
    assert rep.pce_q == pytest.approx(float(rep.pce_contributions.sum()), rel=1e-14)
    assert rep.pce_q == pytest.approx(pre_cheeger(func, meta, cost, q), rel=1e-14)
    assert rep.sobolev_norm == pytest.approx((rep.lq_norm_q + rep.pce_q) ** (1 / q), rel=1e-14)
    # closure oracles agree with the report
    assert lq_functional(meta, q)(func) == pytest.approx(rep.lq_norm_q ** (1 / q), rel=1e-13)
    assert pce_functional(meta, cost, q)(func) == pytest.approx(rep.pce_q ** (1 / q), rel=1e-13)
    assert sobolev_q_functional(meta, cost, q)(func) == pytest.approx(rep.sobolev_norm, rel=1e-14)
    with pytest.raises(ValueError):
        sobolev_functional(func, meta, cost, math.inf)


# -------------------------------------------------------------- parallelogram


def test_parallelogram_identity_hilbert_case():
    # p' = 2 with euclidean cost and q = 2 make the Sobolev functional an
    # L^2 norm of (values, gradients), so the (2,2) residual vanishes
    rng = make_rng("pgram")
    meta = random_meta_measure(rng, 5, 3, 2, 1.5)
    cost = CostSpec(norm=euclidean(2), p=2.0)
    cloud = np.vstack([mu.points for _, mu in meta.atoms])
    j = sobolev_q_functional(meta, cost, 2.0)
    params = BoasParams(r=2.0, s=2.0)
    for _ in range(30):
        u = generic_cylinder_function(rng, 2, cloud)
        v = generic_cylinder_function(rng, 2, cloud)
        res = boas_residual(j, u, v, params)
        scale = max(j(u), j(v), 1e-12)
        assert abs(res) <= 1e-12 * max(1.0, scale)


# ------------------------------------------------------------- Boas residuals


def test_boas_residual_zero_v_closed_form():
    rng = make_rng("boas-v0")
    meta = random_meta_measure(rng, 3, 3, 2, 1.5)
    cost = CostSpec(norm=p_norm(2, 3.0), p=1.5)
    j = sobolev_q_functional(meta, cost, 2.0)
    u = generic_cylinder_function(rng, 2, np.vstack([mu.points for _, mu in meta.atoms]))
    params = BoasParams(r=3.0, s=1.5)
    want = (2.0 ** (1.0 / params.s_prime) - 2.0 ** (1.0 / params.r)) * j(u)
    assert boas_residual(j, u, 0.0 * u, params) == pytest.approx(want, rel=1e-12)


def test_boas_residual_rejects_negative_j():
    with pytest.raises(ValueError):
        boas_residual(lambda u: float(u), 1.0, -5.0, BoasParams(r=2.0, s=2.0))


def test_boas_presets_on_sobolev_functional():
    # the two shipping presets [p', r, s, q]; residuals must be nonnegative
    rng = make_rng("boas-presets")
    for p_prime, r, s, q in ((2.0, 2.0, 2.0, 2.0), (3.0, 3.0, 1.5, 2.0)):
        meta = random_meta_measure(rng, 4, 3, 2, 1.5)
        cloud = np.vstack([mu.points for _, mu in meta.atoms])
        cost = CostSpec(norm=euclidean(2), p=p_prime / (p_prime - 1.0))
        assert cost.p_prime == pytest.approx(p_prime)
        j = sobolev_q_functional(meta, cost, q)
        params = BoasParams(r=r, s=s)
        worst = math.inf
        for _ in range(60):
            u = generic_cylinder_function(rng, 2, cloud)
            v = generic_cylinder_function(rng, 2, cloud)
            worst = min(worst, boas_residual(j, u, v, params))
        assert worst >= -1e-9


def test_boas_detects_invalid_pair():
    # the l^{3/2} norm on R^2 does not satisfy the (2,2) inequality:
    # u = e1, v = e2 gives lhs 2^{7/6} > rhs 2
    j = lambda u: float(np.sum(np.abs(u) ** 1.5) ** (1.0 / 1.5))
    u = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    res = boas_residual(j, u, v, BoasParams(r=2.0, s=2.0))
    assert res == pytest.approx(2.0 - 2.0 ** (7.0 / 6.0), abs=1e-12)
    assert res < -0.2


# ------------------------------------------------------------------- q-sum


def test_qsum_preservation_zero_violations():
    w1 = np.array([1.0, 2.0])
    w2 = np.array([3.0, 0.5])
    j1 = lambda u: float(np.sqrt(np.sum(w1 * u * u)))
    j2 = lambda u: float(np.sqrt(np.sum(w2 * u * u)))
    pair = lambda rng: (rng.normal(size=2), rng.normal(size=2))
    rep = boas_qsum_preservation(
        j1, j2, q=2.0, params=BoasParams(r=2.0, s=2.0), pair_source=pair, trials=200, seed=9
    )
    assert rep.passed and rep.violations == 0
    assert rep.min_residual >= -1e-9
    assert len(rep.residuals) == 200
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["trial", "residual", "r", "s", "q"]
    assert len(rows) == 201
    summary = rep.to_json_summary()
    assert summary["violations"] == 0 and summary["params"]["q"] == 2.0


def test_qsum_rejects_q_outside_range():
    j = lambda u: float(np.abs(u))
    with pytest.raises(ValueError):
        boas_qsum_preservation(
            j, j, q=4.0, params=BoasParams(r=3.0, s=1.5),
            pair_source=lambda rng: (1.0, 2.0), trials=1, seed=0,
        )


def test_check_sobolev_path():
    BoasParams(r=2.0, s=2.0).check_sobolev_path(2.0)
    BoasParams(r=3.0, s=1.5).check_sobolev_path(2.0)
    BoasParams(r=3.0, s=1.5).check_sobolev_path(3.0)
    with pytest.raises(ValueError):
        BoasParams(r=3.0, s=1.5).check_sobolev_path(4.0)
    with pytest.raises(ValueError):
        BoasParams(r=3.0, s=1.5).check_sobolev_path(1.2)
    with pytest.raises(ValueError):
        # s below the conjugate r' never qualifies
        BoasParams(r=3.0, s=1.2).check_sobolev_path(2.0)


# ------------------------------------------------------------------ clarkson


def test_clarkson_params_mapping():
    assert clarkson_params(2.0) == BoasParams(r=2.0, s=2.0)
    assert clarkson_params(3.0) == BoasParams(r=3.0, s=1.5)
    assert clarkson_params(1.5) == BoasParams(r=3.0, s=1.5)
    got = clarkson_params(4.0)
    assert got.r == 4.0 and got.s == pytest.approx(4.0 / 3.0)
    # always a legal Boas pair with s <= r
    for t in (1.2, 2.0, 5.0):
        pr = clarkson_params(t)
        assert pr.s <= pr.r
        assert pr.r_prime <= pr.s + 1e-12


# ------------------------------------------------------------------- modulus


def test_modulus_euclidean_quarter_square():
    j = lambda u: float(np.sqrt(u @ u))
    sampler = lambda rng: rng.normal(size=2)
    table = convexity_modulus_probe(j, sampler, t=2.0, trials=300, seed=21)
    assert np.allclose(table.gaps, table.separations**2 / 4.0, atol=1e-12)
    eps, g = table.envelope()
    assert np.all(np.diff(eps) >= 0)
    assert np.all(np.diff(g) >= -1e-15)  # suffix minimum is nondecreasing
    away = eps > 0.5
    assert np.all(g[away] > 0.05)


def test_modulus_flat_face_of_max_norm():
    # the sup-norm square has a flat edge: u=(1,1), v=(1,-1) are unit
    # vectors whose midpoint is also unit, so the gap vanishes at
    # separation 2 and the envelope collapses to zero there
    j = lambda u: float(np.max(np.abs(u)))
    state = {"flip": False}

    def sampler(rng):
        del rng
        state["flip"] = not state["flip"]
        return np.array([1.0, 1.0]) if state["flip"] else np.array([1.0, -1.0])

    table = convexity_modulus_probe(j, sampler, t=2.0, trials=8, seed=3)
    assert np.allclose(table.separations, 2.0)
    assert np.allclose(table.gaps, 0.0)
    eps, g = table.envelope()
    assert np.all(g == 0.0)


def test_modulus_homogeneity_guard():
    j = lambda u: float(u @ u)  # squared norm: j(2u) = 4 j(u)
    sampler = lambda rng: rng.normal(size=2) + np.array([2.0, 0.0])
    with pytest.raises(ValueError):
        convexity_modulus_probe(j, sampler, t=2.0, trials=4, seed=1)
    with pytest.raises(ValueError):
        convexity_modulus_probe(lambda u: float(np.abs(u).sum()), sampler, t=1.0, trials=2, seed=1)


def test_modulus_table_csv():
    table = convexity_modulus_probe(
        lambda u: float(np.sqrt(u @ u)), lambda rng: rng.normal(size=2), t=2.0, trials=5, seed=2
    )
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert rows[0] == ["separation", "midpoint_gap"]
    assert len(rows) == 6
    assert float(rows[1][0]) == pytest.approx(table.separations[0])


# ------------------------------------------------------------------- params


def test_boas_params_validation():
    with pytest.raises(ValueError):
        BoasParams(r=1.0, s=2.0)
    with pytest.raises(ValueError):
        BoasParams(r=2.0, s=math.inf)
    pr = BoasParams(r=3.0, s=1.5)
    assert pr.r_prime == pytest.approx(1.5)
    assert pr.s_prime == pytest.approx(3.0)
