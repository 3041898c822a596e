import math

import numpy as np
import pytest

from capwidth.bodies import (
    BallProductSpec,
    ball_product_body,
    bidisk_spec,
    ellipsoid,
    polydisk_spec,
    square_disk_spec,
)
from capwidth.sphere import SphereSampler
from capwidth.symplectic import (
    SymmetricDirection,
    coordinate_directions,
    exp_direction,
    first_variation,
    local_search,
    log_symmetric_part,
    polar_decompose,
    product_first_variation,
    random_direction,
    second_variation,
    standard_j,
    verify_local_min,
)

SEGMENTS = BallProductSpec(n=1, radii=(1.0, 2.0), I=((1,), ()), J=((), (1,)))


def test_standard_j_squares_to_minus_identity():
    for n in (1, 2, 3):
        J = standard_j(n)
        np.testing.assert_allclose(J @ J, -np.eye(2 * n), atol=1e-14)


def test_direction_matrices_are_sp_tangent():
    # tangent condition at the identity: (JY) symmetric
    rng = np.random.default_rng(0)
    for n in (1, 2):
        J = standard_j(n)
        for Y in coordinate_directions(n) + [random_direction(n, rng)]:
            JY = J @ Y.matrix
            np.testing.assert_allclose(JY, JY.T, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_exp_direction_is_symplectic(n):
    rng = np.random.default_rng(3)
    J = standard_j(n)
    for _ in range(5):
        Y = random_direction(n, rng)
        M = exp_direction(Y, s=0.37).matrix
        np.testing.assert_allclose(M.T @ J @ M, J, atol=1e-10)
        assert np.linalg.det(M) == pytest.approx(1.0, rel=1e-10)


def test_polar_decompose_roundtrip():
    rng = np.random.default_rng(4)
    n = 2
    Y = random_direction(n, rng)
    U_part, P_part = polar_decompose(exp_direction(Y, s=0.8).matrix)
    M = U_part.matrix @ P_part.matrix
    np.testing.assert_allclose(M, exp_direction(Y, s=0.8).matrix, atol=1e-10)
    # the symmetric log of the positive part recovers a symmetric direction
    S = log_symmetric_part(M)
    np.testing.assert_allclose(S.matrix, S.matrix.T, atol=1e-12)


def test_first_variation_generic_vs_product():
    # the structured estimator must agree with the generic one where both apply
    sampler = SphereSampler(dim=2, seed=5, count=200_000)
    rng = np.random.default_rng(6)
    Y = random_direction(1, rng)
    body = ball_product_body(SEGMENTS)
    generic = first_variation(body, Y, sampler)
    product = product_first_variation(SEGMENTS, Y, sampler)
    gap = abs(generic.value - product.value)
    assert gap <= 4 * math.hypot(generic.std_error, product.std_error)
    # and the structured error is no larger
    assert product.std_error <= generic.std_error * 1.05


@pytest.mark.parametrize(
    "spec", [bidisk_spec(), square_disk_spec(), polydisk_spec((1.0, 2.0))],
    ids=["bidisk", "square_disk", "polydisk_1_2"],
)
def test_product_first_variation_exact_zero_on_coupled_products(spec):
    # every exactly integrable term cancels at setup, so coupled products
    # give literal zeros, not merely small values
    sampler = SphereSampler(dim=2 * spec.n, seed=8, count=50_000)
    for k, Y in enumerate(coordinate_directions(spec.n)):
        est = product_first_variation(spec, Y, sampler)
        assert est.value == 0.0, f"direction {k}"
        assert est.std_error == 0.0


def test_descent_witness_on_uncoupled_segments():
    # stretching x against y on mismatched radii drops the width at rate 4/pi
    sampler = SphereSampler(dim=2, seed=9, count=200_000)
    Y = coordinate_directions(1)[0]
    est = product_first_variation(SEGMENTS, Y, sampler)
    assert abs(abs(est.value) - 4.0 / math.pi) <= 4 * est.std_error
    assert abs(est.value) > 5 * est.std_error


def test_second_variation_positive_on_bidisk():
    sampler = SphereSampler(dim=4, seed=10, count=100_000)
    rng = np.random.default_rng(11)
    Y = random_direction(2, rng)
    est = second_variation(ball_product_body(bidisk_spec()), Y, sampler)
    assert est.value > 3 * est.std_error


def test_verify_local_min_passes_on_bidisk():
    rep = verify_local_min(bidisk_spec(), directions=6, seed=12,
                           sampler=SphereSampler(dim=4, seed=12, count=100_000))
    assert rep.passed
    assert rep.coupling_ok
    assert rep.witness is None
    assert len(rep.checks) == 6
    assert "PASS" in rep.summary()


def test_verify_local_min_fails_with_witness_on_segments():
    rep = verify_local_min(SEGMENTS, directions=4, seed=13,
                           sampler=SphereSampler(dim=2, seed=13, count=100_000))
    assert not rep.passed
    assert not rep.coupling_ok
    assert rep.witness is not None
    assert abs(rep.witness["value"]) > 5 * rep.witness["std_error"]


def test_local_search_reaches_round_ellipse():
    # area pi*2 is conserved, so the best width is that of the radius-sqrt(2)
    # disk: 2 sqrt(2)
    res = local_search(ellipsoid((2.0, 1.0)), steps=100)
    assert res.converged
    assert res.value == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-3)
    trace = np.asarray(res.trace)
    assert np.all(np.diff(trace) <= 1e-12)


def test_local_search_fixed_point_on_disk():
    res = local_search(ellipsoid((1.0, 1.0)), steps=40)
    assert res.converged
    assert res.value == pytest.approx(2.0, abs=1e-9)


def test_symmetric_direction_validation():
    with pytest.raises(ValueError):
        SymmetricDirection(C=np.array([[0.0, 1.0], [0.5, 0.0]]), D=np.zeros((2, 2)))
    Y = SymmetricDirection(C=np.array([[2.0]]), D=np.array([[1.0]]))
    roundtrip = SymmetricDirection.from_coordinates(1, Y.to_coordinates())
    np.testing.assert_allclose(roundtrip.matrix, Y.matrix, atol=0)
