import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compgrowth.geometry import (Cone, DensityReport, GeometryError, GeometryPreconditionError,
                                 Norm, SiteConfiguration, coexistence_geometry_check, cone_member,
                                 homothety_stability_check, relative_density, segment_minimum,
                                 translate_stability_check, voronoi_delta_member, voronoi_labels,
                                 voronoi_member)

NORMS = [Norm.p(1), Norm.p(2), Norm.p(np.inf), Norm.euclidean(scale=0.7)]
vec = st.tuples(st.floats(-50, 50), st.floats(-50, 50)).map(np.array)


def _diag_table():
    d = np.array([[1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d, np.where(np.abs(d).min(axis=1) > 0, np.sqrt(2.0), 1.0)


def test_builtin_values():
    x = np.array([3.0, -4.0])
    assert Norm.p(1)(x) == 7.0 and Norm.p(2)(x) == 5.0 and Norm.p(np.inf)(x) == 4.0
    assert Norm.p(1, scale=2.0)(x) == 14.0
    with pytest.raises(GeometryError):
        Norm.p(3)
    with pytest.raises(GeometryError):
        Norm("l2", dim=1)


@pytest.mark.parametrize("norm", NORMS, ids=repr)
@given(x=vec, y=vec, lam=st.floats(0, 100))
def test_norm_axioms(norm, x, y, lam):
    assert norm(x + y) <= norm(x) + norm(y) + 1e-9 * (1 + norm(x) + norm(y))
    assert norm(lam * x) == pytest.approx(lam * norm(x), rel=1e-12, abs=1e-12)
    assert norm(-x) == norm(x)


def test_tabulated_nearest_and_hull():
    d, v = _diag_table()
    near = Norm.tabulated(d, v, lipschitz=2.0)
    hull = Norm.tabulated(d, v, lipschitz=2.0, interpolation="hull")
    x = np.random.default_rng(1).normal(size=(500, 2))
    assert np.allclose(hull(x), np.abs(x).sum(axis=1), rtol=1e-12)
    assert np.allclose(near(d), v, rtol=1e-15)
    assert np.all(near.error_bound(x) >= np.abs(near(x) - np.abs(x).sum(axis=1)) - 1e-12)
    assert near.triangle_violations(2000) == []
    assert hull.triangle_violations(2000, tol=1e-12) == []
    for n in (near, hull):
        back = Norm.from_dict(json.loads(json.dumps(n.to_dict())))
        assert np.array_equal(back(x), n(x))
    with pytest.raises(GeometryError):
        Norm.tabulated(d[:1], v[:1], interpolation="hull")
    with pytest.raises(GeometryError):
        Norm.tabulated(d, -v)


def test_site_configuration_checks():
    with pytest.raises(GeometryError):
        SiteConfiguration(np.array([[0.0, 0.0]]))
    with pytest.raises(GeometryError):
        SiteConfiguration(np.array([[0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(GeometryError):
        SiteConfiguration(np.array([[0.0], [1.0]]))
    cfg = SiteConfiguration(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert np.array_equal(cfg.scaled(3).points, [[3, 0], [-3, 0]])


def test_strict_cells_exclude_the_bisector():
    cfg = SiteConfiguration(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    z = np.array([[0.0, 5.0], [0.5, 2.0], [-3.0, 1.0]])
    assert voronoi_labels(z, cfg, Norm.p(1)).tolist() == [0, 1, 2]
    assert voronoi_member([0.5, 0.0], 1, cfg, Norm.p(2))
    assert not voronoi_delta_member([0.5, 0.0], 1, cfg, Norm.p(2), delta=1.0)
    with pytest.raises(IndexError):
        voronoi_member([0.0, 0.0], 3, cfg, Norm.p(2))


@given(z=vec, d1=st.floats(0, 3), d2=st.floats(0, 3))
def test_larger_delta_shrinks_the_cell(z, d1, d2):
    cfg = SiteConfiguration(np.array([[0.0, 0.0], [2.0, 1.0], [-1.0, 3.0]]))
    lo, hi = sorted((d1, d2))
    for i in (1, 2, 3):
        if voronoi_delta_member(z, i, cfg, Norm.p(2), hi):
            assert voronoi_delta_member(z, i, cfg, Norm.p(2), lo)


@pytest.mark.parametrize("norm", NORMS[:3], ids=repr)
@pytest.mark.parametrize("delta", [0.0, 0.5, -0.5])
def test_cell_stability_under_homothety_and_translation(norm, delta):
    x = np.array([2.0, 1.0])
    cfg = SiteConfiguration(np.stack([np.zeros(2), x]))
    pred = lambda z: voronoi_delta_member(z, 1, cfg, norm, delta)  # noqa: E731
    assert homothety_stability_check(pred, x, trials=3000, seed=1) == []
    assert translate_stability_check(x, delta, norm, trials=3000, seed=2) == []


def test_stability_checks_catch_a_bad_set():
    disc = lambda z: (np.atleast_2d(z) ** 2).sum(axis=1) < 4.0  # noqa: E731
    assert homothety_stability_check(disc, np.array([5.0, 0.0]), trials=200, seed=0)
    assert translate_stability_check(np.array([1.0, 0.0]), 0.0, Norm.p(2), trials=200,
                                     predicate=disc)


def test_cone_membership():
    cone = Cone.from_points(np.array([[1.0, 0.0], [0.0, 2.0]]) * [[2.0], [1.0]])
    assert cone_member([5.0, 0.0], cone)
    assert cone_member([0.0, 2.0], cone)
    assert not cone_member([1.0, 0.0], cone)
    assert not cone_member([3.0, 0.1], cone)
    with pytest.raises(GeometryError):
        Cone.from_points(np.array([[1.0, 0.0], [0.0, 2.0]]))


def test_segment_criterion():
    ok = coexistence_geometry_check(SiteConfiguration(np.array([[1.0, 0.0], [-1.0, 0.0]])), Norm.p(1))
    assert ok.passed
    flat = coexistence_geometry_check(SiteConfiguration(np.array([[1.0, 0.0], [0.0, 1.0]])), Norm.p(1))
    assert not flat.passed and flat.failing_pair() == (1, 2)
    round_ = coexistence_geometry_check(SiteConfiguration(np.array([[1.0, 0.0], [0.0, 1.0]])), Norm.p(2))
    assert round_.passed
    with pytest.raises(GeometryPreconditionError):
        coexistence_geometry_check(SiteConfiguration(np.array([[2.0, 0.0], [0.0, 1.0]])), Norm.p(2))
    t, z, value = segment_minimum(Norm.p(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert t == pytest.approx(0.5, abs=1e-6) and value == pytest.approx(np.sqrt(0.5), abs=1e-9)


def test_relative_density_of_a_half_plane():
    half = lambda z: z[:, 0] > 0  # noqa: E731
    mc = relative_density(half, None, [10, 20, 40], samples=40000, seed=3)
    assert abs(mc.ratios[-1] - 0.5) < 4 * mc.stderr[-1]
    grid = relative_density(half, None, [5, 10], estimator="grid", pitch=0.05)
    assert abs(grid.ratios[-1] - 0.5) < 0.01
    quadrant = lambda z: (z[:, 0] > 0) & (z[:, 1] > 0)  # noqa: E731
    rel = relative_density(quadrant, half, [10, 20], estimator="grid", pitch=0.1)
    assert abs(rel.lower_estimate - 0.5) < 0.02
    back = DensityReport.from_dict(json.loads(mc.to_json()))
    assert np.array_equal(back.ratios, mc.ratios)
    assert mc.to_csv().splitlines()[0] == "radius,ratio,stderr,samples"
    with pytest.raises(GeometryError):
        relative_density(lambda z: z[:, 0] > 0, lambda z: z[:, 0] > 1e9, [1.0, 2.0])
    with pytest.raises(GeometryError):
        relative_density(None, None, [2.0, 1.0])
