import math

import numpy as np
import pytest

from capwidth.bodies import (
    ball,
    ellipsoid,
    polydisk_spec,
    square,
    square_disk_spec,
)
from capwidth.experiments import (
    AreaMapError,
    PolynomialHamiltonian,
    build_area_map,
    calibrate_prefactor,
    disk_profile,
    flow_points,
    green_test,
    naive_extension_probe,
    nonlinear_flow_check,
    orthogonal_product,
    product_formula_report,
    product_mean_width,
    rounded_product_test,
    split_moment,
    square_profile,
    squash_family,
    superellipse_profile,
)
from capwidth.sphere import SphereSampler, mean_width

# quadrature of the closed-form ellipse support against cos(2 theta)
ELLIPSE_I_COS = 1.5486656380826764


def test_green_flags_minimizers():
    assert green_test(ball(1)).minimal
    assert green_test(square()).minimal
    rep = green_test(ellipsoid((2.0, 1.0)))
    assert not rep.minimal
    assert rep.i_cos == pytest.approx(ELLIPSE_I_COS, abs=1e-8)
    assert rep.i_sin == pytest.approx(0.0, abs=1e-8)


def test_green_rotation_invariant_magnitude():
    from capwidth.bodies import linear_image

    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    base = green_test(ellipsoid((2.0, 1.0)))
    turned = green_test(linear_image(ellipsoid((2.0, 1.0)), R))
    assert turned.magnitude == pytest.approx(base.magnitude, rel=1e-6)
    # individual harmonics rotate into each other; only the pair is invariant
    assert abs(turned.i_sin) > 0.1


def test_squash_family_endpoints_and_monotonicity():
    fam = squash_family()
    assert fam.monotone
    assert fam.rows[0].p == 2.0
    # p = 2 is the equal-area disk: width exactly 4/sqrt(pi)
    assert fam.rows[0].mean_width == pytest.approx(4.0 / math.sqrt(math.pi), abs=1e-9)
    lo, hi = fam.endpoint_gaps()
    assert lo <= 1e-9
    assert hi <= 0.01
    assert all(r.area_defect <= 1e-8 for r in fam.rows)


def test_squash_family_rejects_p_below_two():
    with pytest.raises(ValueError):
        squash_family(p_values=(1.5, 2.0))


def test_split_moment_closed_form():
    assert split_moment(2, 2) == pytest.approx(2.0 / 3.0, rel=1e-12)
    # complementary splits sum to more than 1 (both projections shrink)
    s12 = split_moment(1, 2)
    s21 = split_moment(2, 1)
    assert 0 < s12 < 1 and 0 < s21 < 1
    # MC cross-check on the (2, 2) split
    rng = np.random.default_rng(0)
    g = rng.standard_normal((400_000, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    mc = np.linalg.norm(g[:, :2], axis=1).mean()
    assert mc == pytest.approx(2.0 / 3.0, abs=2e-3)


def test_product_mean_width_exact_for_balls():
    # M(B^2 x B^2) = 8/3 via the exact splitting identity
    val = product_mean_width(2.0, 2, 2.0, 2, mode="calibrated")
    assert val == pytest.approx(8.0 / 3.0, rel=1e-12)
    assert product_mean_width(2.0, 2, 2.0, 2, mode="halved") == pytest.approx(4.0 / 3.0, rel=1e-12)


def test_calibrate_prefactor_quarter():
    cal = calibrate_prefactor(2, 2, samples=100_000, seed=3)
    assert abs(cal.estimate.value - 0.25) <= 4 * cal.estimate.std_error
    assert cal.calibrated == 0.25
    assert cal.ratio_to_halved == pytest.approx(2.0, abs=0.01)


def test_orthogonal_product_support_and_width():
    prod = orthogonal_product(ball(1), ball(1))
    est = mean_width(prod, SphereSampler(dim=4, seed=5, count=100_000))
    assert abs(est.value - 8.0 / 3.0) <= 4 * est.std_error


def test_product_formula_report_consistent():
    rep = product_formula_report(ball(1), square(), samples=100_000, seed=4)
    assert rep.consistent
    assert rep.formula_halved == pytest.approx(rep.formula / 2, rel=1e-12)


def test_area_map_square_to_disk():
    # equal areas: square side 2 and disk radius 2/sqrt(pi)
    amap = build_area_map(square_profile(1.0), disk_profile(2.0 / math.sqrt(math.pi)))
    assert amap.phi(2 * math.pi) == pytest.approx(2 * math.pi, abs=1e-8)
    defect, _ = amap.jacobian_defect(n_points=500, seed=1)
    assert defect <= 1e-6
    assert amap.boundary_image_defect() <= 1e-7
    inverse = build_area_map(disk_profile(2.0 / math.sqrt(math.pi)), square_profile(1.0))
    assert amap.round_trip_defect(inverse) <= 1e-7


def test_area_map_rejects_area_mismatch():
    with pytest.raises(AreaMapError):
        build_area_map(square_profile(1.0), superellipse_profile(4.0, 1.2))


def test_hamiltonian_gradient_matches_fd():
    rng = np.random.default_rng(7)
    ham = PolynomialHamiltonian.random(4, rng, terms=5, max_degree=4)
    Z = rng.standard_normal((10, 4)) * 0.5
    g = ham.gradient(Z)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (ham.value(Z + e) - ham.value(Z - e)) / (2 * h)
        np.testing.assert_allclose(g[:, j], fd, atol=1e-5)


def test_flow_conserves_energy():
    rng = np.random.default_rng(8)
    ham = PolynomialHamiltonian.random(4, rng, terms=4, max_degree=3)
    Z = rng.standard_normal((16, 4)) * 0.4
    moved = flow_points(Z, ham, 0.3)
    np.testing.assert_allclose(ham.value(moved), ham.value(Z), atol=1e-8)
    # flowing back returns the cloud
    back = flow_points(moved, ham, -0.3)
    np.testing.assert_allclose(back, Z, atol=1e-7)


def test_nonlinear_flow_check_toric_product():
    rep = nonlinear_flow_check(polydisk_spec((1.0, 2.0)), hamiltonians=2,
                               samples=40_000, seed=6)
    assert rep.toric
    assert rep.all_within
    assert len(rep.rows) == 2


def test_rounded_product_drops_width():
    rep = rounded_product_test(square_disk_spec(), plane=1, p=2.0,
                               samples=100_000, seed=9)
    assert rep.decreased
    assert rep.consistent
    assert rep.predicted > 0
    assert rep.volume_after == pytest.approx(rep.volume_before, rel=1e-9)


def test_naive_extension_probe_reports_interval():
    rep = naive_extension_probe(square_disk_spec(), axis=1, p=2.0,
                                samples=100_000, seed=10)
    assert rep.verdict in ("decrease", "increase", "inconclusive")
    # the planar projection really is the square before the map
    assert rep.projection_defect <= 1e-9
    if rep.verdict == "decrease":
        assert rep.difference.value > 3 * rep.difference.std_error
