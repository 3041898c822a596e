"""Mean widths of the standard catalog, three ways.

Planar bodies get adaptive quadrature; everything gets Monte Carlo with
antithetic directions.  The ball is the degenerate case: the antithetic
integrand is constant, so its MC error is exactly zero.
"""
import math

from capwidth import SphereSampler, mean_width, mean_width_2d, standard_bodies

SAMPLES = 200_000


def main():
    catalog = standard_bodies()
    print(f"{'body':>12}  {'MC':>10}  {'se':>9}  {'quadrature':>10}")
    for name, body in catalog.items():
        est = mean_width(body, SphereSampler(dim=body.dim, seed=7, count=SAMPLES))
        quad = f"{mean_width_2d(body):10.6f}" if body.dim == 2 else "          "
        print(f"{name:>12}  {est.value:10.6f}  {est.std_error:9.2e}  {quad}")

    print()
    print("reference values:")
    print(f"  ball (any dim)      2")
    print(f"  square              8/pi      = {8 / math.pi:.6f}")
    print(f"  bidisk B^2 x B^2    8/3       = {8 / 3:.6f}")
    print(f"  polydisk(1,2)       4")


if __name__ == "__main__":
    main()
