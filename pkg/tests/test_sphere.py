import math

import numpy as np
import pytest
from scipy.special import ellipe

from capwidth.bodies import (
    ball,
    ball_product_body,
    bidisk_spec,
    cube,
    ellipsoid,
    polydisk,
    square,
)
from capwidth.sphere import (
    Estimate,
    SphereSampler,
    integrate_rows,
    mean_width,
    mean_width_2d,
    sampled_mean_width,
    sphere_moment,
    support_sampled,
)

SQUARE_WIDTH = 8.0 / math.pi


def test_estimate_validation():
    with pytest.raises(ValueError):
        Estimate(value=float("nan"), std_error=0.0, count=10)
    with pytest.raises(ValueError):
        Estimate(value=1.0, std_error=-1.0, count=10)
    with pytest.raises(ValueError):
        Estimate(value=1.0, std_error=0.0, count=0)
    lo, hi = Estimate(value=1.0, std_error=0.1, count=10).interval()
    assert (lo, hi) == (0.7, 1.3)


def test_sampler_rows_deterministic():
    s = SphereSampler(dim=4, seed=9, count=10_000)
    a = np.vstack(list(s.chunks()))
    b = np.vstack(list(s.chunks()))
    assert np.array_equal(a, b)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12)
    # different seed gives different nodes
    c = np.vstack(list(SphereSampler(dim=4, seed=10, count=10_000).chunks()))
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_width_exact_zero_variance(n):
    # the antithetic estimator is constant on the ball, so se is exactly 0
    est = mean_width(ball(n), SphereSampler(dim=2 * n, seed=0, count=20_000))
    assert est.value == 2.0
    assert est.std_error == 0.0


def test_square_width_quadrature_and_mc():
    assert mean_width_2d(square()) == pytest.approx(SQUARE_WIDTH, abs=1e-9)
    est = mean_width(square(), SphereSampler(dim=2, seed=7, count=200_000))
    assert abs(est.value - SQUARE_WIDTH) <= 0.01
    assert abs(est.value - SQUARE_WIDTH) <= 4 * est.std_error


def test_ellipse_width_matches_elliptic_integral():
    # M = perimeter / pi; perimeter of ellipse(2,1) is 8 E(3/4)
    target = 8.0 * float(ellipe(0.75)) / math.pi
    assert mean_width_2d(ellipsoid((2.0, 1.0))) == pytest.approx(target, abs=1e-9)


def test_bidisk_width_mc():
    est = mean_width(ball_product_body(bidisk_spec()), SphereSampler(dim=4, seed=7, count=200_000))
    assert abs(est.value - 8.0 / 3.0) <= 0.02
    assert abs(est.value - 8.0 / 3.0) <= 4 * est.std_error


def test_polydisk_width_mc():
    # polydisk(1,2) = B^2 x 2B^2: M = 2*(1/3)*(2*1 + 2*2)... the oracle is
    # the exact split moment identity M = E|pi_1 u| M_1 + E|pi_2 u| M_2
    # with factor widths 2 rho and split moment 2/3 in dim (2,2): M = 4.
    est = mean_width(polydisk(1, 2), SphereSampler(dim=4, seed=3, count=200_000))
    assert abs(est.value - 4.0) <= 4 * est.std_error
    assert est.std_error < 0.01


def test_antithetic_halves_work_budget():
    body = cube(1)
    anti = mean_width(body, SphereSampler(dim=2, seed=1, count=100_000, antithetic=True))
    plain = mean_width(body, SphereSampler(dim=2, seed=1, count=100_000, antithetic=False))
    # same support-evaluation budget: pairs count once in the row tally
    assert anti.count == plain.count // 2
    assert abs(anti.value - SQUARE_WIDTH) <= 4 * anti.std_error
    assert abs(plain.value - SQUARE_WIDTH) <= 4 * plain.std_error


def test_integrate_rows_reduces_in_chunk_order():
    s = SphereSampler(dim=2, seed=4, count=50_000)
    est1 = integrate_rows(s, lambda U: np.abs(U).sum(axis=1))
    est2 = integrate_rows(s, lambda U: np.abs(U).sum(axis=1))
    assert est1 == est2


def test_sphere_moment_closed_form():
    # for the bidisk split (2+2), E[u1^2 / |pi_1 u|] = E|pi_1 u| / 2 = 1/3
    spec = bidisk_spec()
    s = SphereSampler(dim=4, seed=11, count=200_000)
    est = sphere_moment(spec, ell=1, r=1, kind="x", sampler=s)
    assert abs(est.value - 1.0 / 3.0) <= 4 * est.std_error
    # mixed moment with an odd coordinate integrates to zero
    mixed = sphere_moment(spec, ell=1, r=1, kind="x", sampler=s, r2=1, kind2="y")
    assert abs(mixed.value) <= 4 * mixed.std_error


def test_sampled_support_below_true_and_monotone():
    body = ball_product_body(bidisk_spec())
    rng = np.random.default_rng(2)
    # random boundary-ish cloud inside the body
    raw = rng.standard_normal((4096, 4))
    pts = raw / body.support(raw)[:, None] * rng.uniform(0.2, 1.0, size=4096)[:, None]
    u = np.array([0.3, -0.5, 0.7, 0.4])
    u /= np.linalg.norm(u)
    h_small = support_sampled(pts[:512], u)
    h_big = support_sampled(pts, u)
    assert h_small <= h_big <= float(body.support(u)) + 1e-12
    est = sampled_mean_width(pts, SphereSampler(dim=4, seed=1, count=50_000))
    true = mean_width(body, SphereSampler(dim=4, seed=1, count=50_000))
    assert est.value <= true.value + 1e-12
