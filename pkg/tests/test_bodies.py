import math

import numpy as np
import pytest

from capwidth.bodies import (
    BallProductSpec,
    BodyError,
    ball,
    ball_product_body,
    bidisk_spec,
    boundary_grid,
    classify_factors,
    cond_check,
    cube,
    ellipsoid,
    linear_image,
    minkowski_sum,
    polydisk,
    polydisk_spec,
    scale_body,
    square,
    square_disk_spec,
    standard_bodies,
)

RNG = np.random.default_rng(1234)


def random_dirs(dim, m=200):
    g = RNG.standard_normal((m, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@pytest.mark.parametrize("body", list(standard_bodies().values()), ids=lambda b: b.label)
def test_support_homogeneous_and_subadditive(body):
    U = random_dirs(body.dim, 120)
    h = body.support(U)
    assert np.all(h > 0)
    # positive 1-homogeneity
    np.testing.assert_allclose(body.support(2.5 * U), 2.5 * h, rtol=1e-12)
    # subadditivity on random pairs
    V = random_dirs(body.dim, 120)
    lhs = body.support(U + V)
    assert np.all(lhs <= body.support(U) + body.support(V) + 1e-10)


def test_exact_volumes():
    assert ball(1).volume == pytest.approx(math.pi, rel=1e-14)
    assert ball(2).volume == pytest.approx(math.pi**2 / 2, rel=1e-14)
    assert cube(1).volume == pytest.approx(4.0, rel=1e-14)
    assert cube(2).volume == pytest.approx(16.0, rel=1e-14)
    assert polydisk(1, 2).volume == pytest.approx(4 * math.pi**2, rel=1e-14)
    assert ball_product_body(bidisk_spec()).volume == pytest.approx(math.pi**2, rel=1e-14)
    assert ball_product_body(square_disk_spec()).volume == pytest.approx(4 * math.pi, rel=1e-14)


def test_bidisk_support_closed_form():
    # factor columns are (x1, x2) and (y1, y2)
    U = random_dirs(4, 300)
    expect = np.linalg.norm(U[:, :2], axis=1) + np.linalg.norm(U[:, 2:], axis=1)
    np.testing.assert_allclose(ball_product_body(bidisk_spec()).support(U), expect, rtol=1e-12)


def test_square_support_is_l1():
    U = random_dirs(2, 300)
    np.testing.assert_allclose(square().support(U), np.abs(U).sum(axis=1), rtol=1e-12)


def test_ellipsoid_distance_matches_membership():
    body = ellipsoid((2.0, 1.0))
    pts = RNG.uniform(-3, 3, size=(400, 2))
    inside = (pts[:, 0] / 2.0) ** 2 + pts[:, 1] ** 2 <= 1.0
    d = body.distance(pts)
    assert np.all(d[inside] <= 1e-9)
    assert np.all(d[~inside] > 0)
    # distance to a point far along the long axis is exact
    far = np.array([[5.0, 0.0]])
    assert body.distance(far)[0] == pytest.approx(3.0, abs=1e-8)


def test_ellipsoid_support_closed_form():
    a = np.array([2.0, 1.0, 0.5, 3.0])
    body = ellipsoid(a)
    U = random_dirs(4, 200)
    np.testing.assert_allclose(body.support(U), np.linalg.norm(U * a, axis=1), rtol=1e-12)


def test_minkowski_sum_adds_supports_and_planar_area():
    from capwidth.steiner import volume_sum_ball

    k = minkowski_sum(ball(1), cube(1))
    U = random_dirs(2, 200)
    np.testing.assert_allclose(k.support(U), ball(1).support(U) + cube(1).support(U), rtol=1e-12)
    # Steiner: area(square + 1*B) = 4 + 8 + pi; MC volume within 4 sigma
    est = volume_sum_ball(cube(1), 1.0, budget=200_000, seed=5)
    assert abs(est.value - (12.0 + math.pi)) <= 4 * est.std_error


def test_scale_and_linear_image_support_identity():
    body = polydisk(1, 2)
    U = random_dirs(4, 150)
    np.testing.assert_allclose(scale_body(body, 0.7).support(U), 0.7 * body.support(U), rtol=1e-12)
    A = RNG.standard_normal((4, 4)) + 4 * np.eye(4)
    img = linear_image(body, A)
    np.testing.assert_allclose(img.support(U), body.support(U @ A), rtol=1e-10)


def test_coupling_condition_classification():
    assert cond_check(bidisk_spec())
    assert cond_check(square_disk_spec())
    assert cond_check(polydisk_spec((1.0, 2.0)))
    segments = BallProductSpec(n=1, radii=(1.0, 2.0), I=((1,), ()), J=((), (1,)))
    assert not cond_check(segments)


def test_toric_classification():
    assert classify_factors(polydisk_spec((1.0, 2.0))).toric
    assert not classify_factors(bidisk_spec()).toric
    assert not classify_factors(square_disk_spec()).toric


def test_factor_columns_zero_based_and_disjoint():
    spec = square_disk_spec()
    cols = spec.factor_columns()
    flat = [c for cc in cols for c in cc]
    assert sorted(flat) == list(range(4))
    spec2 = bidisk_spec()
    assert [tuple(c) for c in spec2.factor_columns()] == [(0, 1), (2, 3)]


def test_boundary_grid_lies_on_boundary():
    spec = polydisk_spec((1.0, 2.0))
    pts = boundary_grid(spec, budget=2048, seed=3)
    assert pts.shape[1] == 4
    ratios = []
    for rho, cc in zip(spec.radii, spec.factor_columns()):
        ratios.append(np.linalg.norm(pts[:, list(cc)], axis=1) / rho)
    R = np.stack(ratios, axis=1)
    assert np.all(R <= 1 + 1e-9)
    np.testing.assert_allclose(R.max(axis=1), 1.0, atol=1e-9)


def test_invalid_specs_rejected():
    with pytest.raises(BodyError):
        BallProductSpec(n=1, radii=(1.0,), I=((1, 1), ()), J=((), ())).factor_columns()
    with pytest.raises((BodyError, ValueError)):
        ellipsoid((1.0, -2.0))


def test_catalog_labels_unique():
    cat = standard_bodies()
    labels = [b.label for b in cat.values()]
    assert len(set(labels)) == len(labels)
    assert {b.dim for b in cat.values()} == {2, 4}
