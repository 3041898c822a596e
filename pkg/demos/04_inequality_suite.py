"""Capacity against mean width across the catalog.

Two checks per body: the width bound c(K) <= (M(K)/2)^2, with equality
on the ball, and sqrt-superadditivity of the capacity over Minkowski
sums on a list of pairs.  The volume-radius column is printed for
context; near its equality cases the estimator's upper bias shows, so
it carries no verdict.
"""
from capwidth import inequality_suite, standard_bodies

PAIRS = [
    ("ball2", "square"),
    ("ball2", "ellipse_2_1"),
    ("square", "rect_1_2"),
    ("ball4", "cube4"),
    ("polydisk_1_1", "bidisk"),
    ("ball4", "bidisk"),
]


def main():
    rep = inequality_suite(standard_bodies(), pairs=PAIRS, seed=7,
                           samples=200_000, modes=8, starts=8)

    print(f"{'body':>24} {'c':>8} {'(M/2)^2':>9} {'width ok':>9} {'vol col':>8}")
    for r in rep.rows:
        vit = "-" if r.viterbo_ok is None else ("ok" if r.viterbo_ok else "above")
        print(f"{r.label:>24} {r.capacity:8.4f} {r.width_bound:9.4f} "
              f"{str(r.width_ok):>9} {vit:>8}")

    print("\nsqrt-superadditivity on Minkowski pairs:")
    for p in rep.pairs:
        print(f"  {p.label:>32}: sqrt(c(K1+K2)) = {p.lhs:.4f} >= {p.rhs:.4f} - tol  -> {p.ok}")

    print("\nnear-ball volume check per dimension:")
    for dim, sqrt_c, radius, ok in rep.near_ball:
        print(f"  dim {dim}: sqrt(c) = {sqrt_c:.4f} vs volume radius {radius:.4f}  -> {ok}")

    print(f"\nall gated checks: {rep.all_ok}")


if __name__ == "__main__":
    main()
