"""The loop-based capacity estimator.

A closed characteristic on the boundary realizes the smallest action;
minimizing the support cost over Fourier loops with the action pinned
gives an upper bound on that action.  Normalizing by the ball's own
minimized cost turns the raw value into a capacity with c(B) = 1.
"""
import math

from capwidth import ball, cube, eh_capacity_estimate, polydisk, scale_body, square


def show(name, body, modes=8, starts=8):
    res = eh_capacity_estimate(body, modes=modes, starts=starts, seed=7)
    print(f"{name:>16}: c = {res.normalized.value:8.5f} +- {res.normalized.std_error:.2g}"
          f"   raw = {res.raw.value:8.5f}  converged = {res.converged}")
    return res


def main():
    print(f"raw target for the ball: 2 sqrt(pi) = {2 * math.sqrt(math.pi):.6f}\n")
    show("ball(1)", ball(1))
    show("ball(2)", ball(2))
    show("1.5 * ball(1)", scale_body(ball(1), 1.5))
    show("square", square())
    show("polydisk(1,2)", polydisk(1, 2))
    show("cube(2)", cube(2))

    print("""
notes:
  - scaling law: c(r K) = r^2 c(K); the 1.5-ball row lands on 2.25.
  - polydisk(1,2): the short factor's circle is the minimizer, c = 1.
  - in the plane c equals area/pi, so square -> 4/pi = %.5f; the
    estimator is an upper bound and overshoots slightly there.""" % (4 / math.pi))


if __name__ == "__main__":
    main()
