import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelnd.field import DomainBox, FieldSpec, SpacetimePoint as P, covariance, variance
from wavelnd.lnd import (
    LndConfig,
    LndError,
    SphereRule,
    conditional_variance_points,
    diagonal_grid,
    dyadic_shrink,
    nested_conditional_variances,
    proof_grid_conditional_check,
    sectorial_bound,
    sectorial_check_k1,
    slnd_integral,
    slnd_ratio_scan,
)
from wavelnd.numerics import integrate_adaptive


@pytest.mark.parametrize("k,area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_sphere_rule_weights(k, area):
    w, weight = SphereRule(k).nodes()
    assert weight * len(w) == pytest.approx(area)
    assert np.allclose(np.linalg.norm(w, axis=1), 1.0)


def test_sphere_rule_accuracy_on_kinked_integrand():
    # int_{S^1} |0.3 + 0.8 w_1|^0.5 dw against adaptive quadrature in the angle
    ref = integrate_adaptive(lambda th: np.abs(0.3 + 0.8 * np.cos(th)) ** 0.5, 0.0, 2 * math.pi,
                             points=[math.acos(-0.375), 2 * math.pi - math.acos(-0.375)])
    w, weight = SphereRule(2).nodes()
    assert weight * np.sum(np.abs(0.3 + 0.8 * w[:, 0]) ** 0.5) == pytest.approx(ref, rel=1e-4)
    # on S^2 the integral of |a + b w_1|^e reduces to 2 pi int_{-1}^{1} |a + b u|^e du
    ref3 = 2 * math.pi * integrate_adaptive(lambda u: np.abs(0.3 + 0.8 * u) ** 0.5, -1.0, 1.0,
                                            points=[-0.375])
    w, weight = SphereRule(3).nodes()
    assert weight * np.sum(np.abs(0.3 + 0.8 * w[:, 0]) ** 0.5) == pytest.approx(ref3, rel=2e-3)


def test_sphere_rule_validation():
    with pytest.raises(LndError):
        SphereRule(1, 4)
    with pytest.raises(LndError):
        SphereRule(3, 8)
    with pytest.raises(LndError):
        SphereRule(4)
    assert SphereRule(2).doubled().n_nodes == 1024
    assert SphereRule(1).doubled().n_nodes == 2


def test_slnd_integral_k1_single_point():
    tg, c = P(1.5, (0.2,)), P(1.3, (0.5,))
    e = 2 - 0.5
    dt, dx = 0.2, -0.3
    assert slnd_integral(tg, [c], 0.5) == pytest.approx(abs(dt + dx) ** e + abs(dt - dx) ** e)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8))
def test_property_sectorial_equals_k1_sphere_integral(seed, n):
    # S^0 = {-1, 1}, so the two bounds coincide for k = 1
    rng = np.random.default_rng(seed)
    tg = P(rng.uniform(1, 2), (rng.uniform(-1, 1),))
    cond = [P(rng.uniform(1, 2), (rng.uniform(-1, 1),)) for _ in range(n)]
    assert sectorial_bound(tg, cond, 0.7) == pytest.approx(slnd_integral(tg, cond, 0.7), rel=1e-14)


def test_conditional_variance_two_points():
    sp = FieldSpec(1, 0.5)
    tg, c = P(1.5, (0.2,)), P(1.3, (0.5,))
    ref = variance(sp, tg) - covariance(sp, tg, c) ** 2 / variance(sp, c)
    assert conditional_variance_points(sp, tg, [c]) == pytest.approx(ref, rel=1e-12)
    assert conditional_variance_points(sp, tg, [c, tg]) == 0.0
    assert conditional_variance_points(sp, tg, [c, c]) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_property_nested_conditioning_decreases(seed):
    rng = np.random.default_rng(seed)
    sp = FieldSpec(1, 1.0)
    tg = P(rng.uniform(1, 2), (rng.uniform(-1, 1),))
    cond = [P(rng.uniform(1, 2), (rng.uniform(-1, 1),)) for _ in range(6)]
    cv = nested_conditional_variances(sp, tg, cond)
    assert np.all(np.diff(cv) <= 1e-9 * variance(sp, tg))
    assert np.all(cv >= 0)


def test_config_defaults_and_validation(box):
    assert LndConfig(box).delta == 0.5
    with pytest.raises(LndError):
        LndConfig(box, n_conditioning=9)
    with pytest.raises(LndError):
        LndConfig(box, delta=0.0)


def test_small_scan_positive_and_thread_invariant(box):
    sp = FieldSpec(1, 0.5)
    cfg = LndConfig(box, n_conditioning=8, trials=30, seed=4)
    a = slnd_ratio_scan(sp, cfg)
    b = slnd_ratio_scan(sp, cfg, threads=3)
    assert a.to_dict() == b.to_dict()
    assert a.min_ratio > 0
    assert a.diagnostics["nested_variance_violations"] == 0
    s = sectorial_check_k1(sp, cfg)
    assert s.min_ratio == pytest.approx(a.min_ratio, rel=1e-12)


def test_sectorial_requires_k1(box):
    with pytest.raises(LndError):
        sectorial_check_k1(FieldSpec(2, 1.0), LndConfig(box, trials=1))


def test_dyadic_geometry(box):
    assert dyadic_shrink(box, 1) == 0.25
    assert dyadic_shrink(box, 3) == pytest.approx(0.5 / (1 + math.sqrt(3)))
    pts = diagonal_grid(box, 1, 3)
    assert len(pts) == 9
    assert pts[-1].t == pytest.approx(1.25) and pts[-1].x[0] == pytest.approx(-0.75)


def test_proof_grid_white_noise(box):
    res = proof_grid_conditional_check(FieldSpec(1, 1.0), box, 3, C2=1.0)
    lv = res["levels"]
    # level 0: (1, -1) lies on the edge of the backward cone of (1.25, -0.75), so
    # Cov = Var(1, -1) = 1/4 and the conditional variance is 25/64 - 1/4
    assert lv[0]["conditional_variance"] == pytest.approx(9 / 64, rel=1e-12)
    assert lv[0]["epsilon_sq"] == pytest.approx(0.5)
    assert all(v["ratio"] > 0 for v in lv)
    with pytest.raises(LndError):
        proof_grid_conditional_check(FieldSpec(1, 1.0), box, 12, C2=1.0)
