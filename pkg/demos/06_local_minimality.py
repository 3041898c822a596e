"""Is a product of balls a local minimum of mean width in its symplectic orbit?

We move the body by exp(sY) for symmetric symplectic directions Y and
look at f(s) = M(exp(sY) K).  For products whose factors couple x- and
y-coordinates pairwise, f'(0) vanishes in every direction and f''(0) is
positive: a genuine local minimum.  Break the coupling (a segment times
a segment of a different length) and an explicit descent direction
appears, with slope -4/pi at unit radii ratio 1:2.
"""
import math

from capwidth import (
    BallProductSpec,
    bidisk_spec,
    ellipsoid,
    local_search,
    square_disk_spec,
    verify_local_min,
)


def main():
    for name, spec in (("bidisk B^2 x B^2", bidisk_spec()),
                       ("square x disk", square_disk_spec())):
        rep = verify_local_min(spec, directions=20, seed=7)
        print(f"{name}: {rep.summary()}")

    segments = BallProductSpec(n=1, radii=(1.0, 2.0), I=((1,), ()), J=((), (1,)))
    rep = verify_local_min(segments, directions=20, seed=7)
    print(f"segment x segment (1:2): {rep.summary()}")
    print(f"  expected witness slope magnitude 4/pi = {4 / math.pi:.5f}")

    print("\ngradient descent from the stretched ellipse:")
    res = local_search(ellipsoid((2.0, 1.0)), steps=100)
    print(f"  final width {res.value:.6f} after {len(res.trace) - 1} accepted steps"
          f" (round target 2 sqrt(2) = {2 * math.sqrt(2):.6f})")


if __name__ == "__main__":
    main()
