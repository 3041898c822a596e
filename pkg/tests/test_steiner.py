import math

import numpy as np
import pytest

from capwidth.bodies import ball, cube, polydisk, square, standard_bodies
from capwidth.capacity import eh_capacity_estimate
from capwidth.sphere import mean_width_2d
from capwidth.steiner import (
    FitError,
    ball_volume,
    f_functions,
    quermass_capacity_scan,
    steiner_fit,
    volume_sum_ball,
)


@pytest.fixture(scope="module")
def square_fit():
    return steiner_fit(square(), budget=400_000, seed=7)


def test_ball_volume_constants():
    assert ball_volume(1) == pytest.approx(2.0, rel=1e-14)
    assert ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
    assert ball_volume(4) == pytest.approx(math.pi**2 / 2, rel=1e-14)


def test_volume_sum_ball_exact_cases():
    # Vol(B + t*square) = 4t^2 + 8t + pi, exactly
    est0 = volume_sum_ball(cube(1), 0.0, budget=100_000, seed=1)
    assert abs(est0.value - math.pi) <= 4 * est0.std_error
    est1 = volume_sum_ball(cube(1), 1.0, budget=200_000, seed=1)
    assert abs(est1.value - (4.0 + 8.0 + math.pi)) <= 4 * est1.std_error


def test_square_fit_recovers_quermassintegrals(square_fit):
    # exact coefficients: W0 = area = 4, W1 = perimeter/2 = 4, W2 = pi
    target = np.array([4.0, 4.0, math.pi])
    err = np.maximum(square_fit.W_err, 1e-12)
    assert np.all(np.abs(square_fit.W - target) <= 4 * err)
    m, m_err = square_fit.mean_width()
    assert abs(m - 8.0 / math.pi) <= 4 * m_err + 1e-12
    assert abs(m - mean_width_2d(square())) <= 0.02


def test_ball_fit_is_sharp():
    fit = steiner_fit(ball(1), budget=200_000, seed=3)
    target = math.pi * np.ones(3)
    assert np.max(np.abs(fit.W - target) / target) <= 0.02


def test_volume_poly_matches_mc(square_fit):
    # fitted polynomial evaluated off the nodes against a fresh MC estimate
    t = 0.73
    est = volume_sum_ball(square(), t, budget=300_000, seed=99)
    poly = float(square_fit.volume_poly(t))
    assert abs(poly - est.value) <= 4 * est.std_error + 0.01


def test_wbar_chain_and_range(square_fit):
    w0 = square_fit.wbar(0)[0]
    w1 = square_fit.wbar(1)[0]
    assert w0 <= w1 + 1e-9
    with pytest.raises(ValueError):
        square_fit.wbar(2)


def test_common_noise_tightens_the_fit():
    # same budget, same seed: correlated nodes give a far smaller true error
    crn = steiner_fit(ball(2), budget=400_000, seed=7, common_noise=True)
    ind = steiner_fit(ball(2), budget=400_000, seed=7, common_noise=False)
    kap = ball_volume(4)
    err_crn = np.max(np.abs(crn.W - kap) / kap)
    err_ind = np.max(np.abs(ind.W - kap) / kap)
    assert err_crn <= 0.02
    assert err_crn < err_ind


def test_fit_rejects_degenerate_grid():
    with pytest.raises((FitError, ValueError)):
        steiner_fit(square(), nodes=2, budget=10_000, seed=0)


def test_f_functions_square():
    fit = steiner_fit(square(), budget=400_000, seed=7)
    tab = f_functions(
        square(),
        lambda b: eh_capacity_estimate(b, modes=6, starts=4, seed=7),
        t_grid=np.linspace(0.0, 2.0, 6),
        budget=200_000,
        seed=7,
        fit=fit,
    )
    # comparison curve sits below on the grid; slope check at the origin
    err = np.hypot(tab.F_err, tab.Ftilde_err)
    assert np.all(tab.Ftilde <= tab.F + 3 * err)
    assert tab.slope_fd == pytest.approx(tab.slope_closed, rel=0.05)
    # closed-form slope for the square: sqrt(c) - M/2 with c approx area/pi
    assert tab.slope_closed < 0


def test_scan_rows_consistent():
    cat = {k: v for k, v in standard_bodies().items() if k in ("ball2", "square")}
    rows = quermass_capacity_scan(
        cat,
        lambda b: eh_capacity_estimate(b, modes=6, starts=4, seed=7),
        budget=200_000,
        seed=7,
    )
    assert [r.label for r in rows] == [cat["ball2"].label, cat["square"].label]
    for r in rows:
        assert r.chain_ok
        # the mean-width column is the theorem: it must hold for both bodies
        assert r.holds[-1]
    ball_row = rows[0]
    assert ball_row.capacity == pytest.approx(1.0, abs=1e-9)
    assert ball_row.wbar_sq[-1] == pytest.approx(1.0, abs=0.03)
