import math

import numpy as np
import pytest

from capwidth.bodies import ball, cube, linear_image, polydisk, scale_body, square
from capwidth.capacity import (
    LoopPath,
    eh_capacity_estimate,
    inequality_suite,
    loop_action,
    loop_action_quadrature,
    loop_cost,
)

RAW_BALL = 2.0 * math.sqrt(math.pi)


def circle_loop(n=1, r=1.0, plane=0):
    # r * (cos t, sin t) in the (x_plane, y_plane) symplectic plane
    a = np.zeros((1, 2 * n))
    b = np.zeros((1, 2 * n))
    a[0, plane] = r
    b[0, n + plane] = -r
    return LoopPath(n=n, a=a, b=b)


def test_loop_action_closed_form_vs_quadrature():
    rng = np.random.default_rng(5)
    loop = LoopPath(n=2, a=rng.standard_normal((4, 4)), b=rng.standard_normal((4, 4)))
    assert loop_action(loop) == pytest.approx(loop_action_quadrature(loop), rel=1e-10)


def test_circle_action_and_cost():
    loop = circle_loop(r=1.0)
    # action convention carries no 1/2: the unit circle scores 2 pi r^2
    assert abs(loop_action(loop)) == pytest.approx(2 * math.pi, rel=1e-12)
    # cost of the unit circle against the disk: mean |z'| * 2 pi = 2 pi
    assert loop_cost(ball(1), loop) == pytest.approx(2 * math.pi, rel=1e-12)


def test_action_scaling_and_time_reversal():
    loop = circle_loop(r=1.3)
    act = loop_action(loop)
    assert loop_action(loop.scaled(2.0)) == pytest.approx(4.0 * act, rel=1e-12)
    # reversing the loop flips the action sign
    rev = LoopPath(n=loop.n, a=loop.a, b=-loop.b)
    assert loop_action(rev) == pytest.approx(-act, rel=1e-12)


def test_square_loop_cost_frozen():
    # the unit circle against the square: mean of |cos|+|sin| is 4/pi, so the
    # cost is 2 pi * 4/pi = 8; the kinks slow the trapezoid rule to O(1/N^2)
    assert loop_cost(square(), circle_loop(), n_nodes=1 << 16) == pytest.approx(8.0, abs=1e-7)


@pytest.mark.parametrize("n", [1, 2])
def test_ball_raw_cost(n):
    res = eh_capacity_estimate(ball(n), modes=6, starts=4, seed=7)
    assert res.converged
    assert abs(res.raw.value - RAW_BALL) / RAW_BALL <= 0.01
    assert res.normalized.value == pytest.approx(1.0, abs=1e-12)


def test_capacity_scales_quadratically():
    res = eh_capacity_estimate(scale_body(ball(1), 1.5), modes=6, starts=4, seed=7)
    assert res.normalized.value == pytest.approx(2.25, rel=1e-6)


def test_polydisk_capacity_near_one():
    res = eh_capacity_estimate(polydisk(1, 2), modes=6, starts=4, seed=7)
    assert abs(res.normalized.value - 1.0) <= 0.05


def test_mode_refinement_never_hurts():
    coarse = eh_capacity_estimate(square(), modes=4, starts=4, seed=7)
    fine = eh_capacity_estimate(square(), modes=8, starts=4, seed=7)
    # upper-bound semantics: more modes can only lower the minimum found
    assert fine.raw.value <= coarse.raw.value + 1e-6


def test_symplectic_invariance():
    # shear (x, y) -> (x + 0.4 y, y) is symplectic in dim 2
    A = np.array([[1.0, 0.4], [0.0, 1.0]])
    base = eh_capacity_estimate(square(), modes=6, starts=6, seed=7)
    moved = eh_capacity_estimate(linear_image(square(), A), modes=6, starts=6, seed=7)
    assert moved.normalized.value == pytest.approx(base.normalized.value, rel=0.02)


def test_capacity_monotone_under_inclusion():
    small = eh_capacity_estimate(ball(1), modes=6, starts=4, seed=7)
    big = eh_capacity_estimate(cube(1), modes=6, starts=4, seed=7)
    # B^2 sits inside the square, so its capacity cannot be larger
    assert small.normalized.value <= big.normalized.value + 0.02


def test_inequality_suite_small_catalog():
    bodies = {"ball2": ball(1), "square": square()}
    rep = inequality_suite(
        bodies,
        pairs=[("ball2", "square")],
        modes=6,
        starts=4,
        seed=7,
        samples=100_000,
    )
    assert [r.label for r in rep.rows] == [bodies["ball2"].label, bodies["square"].label]
    assert all(r.width_ok for r in rep.rows)
    assert all(p.ok for p in rep.pairs)
    assert rep.all_ok
    # the ball is the equality case of the width bound
    ball_row = rep.rows[0]
    assert ball_row.capacity == pytest.approx(ball_row.width_bound, abs=0.02)
