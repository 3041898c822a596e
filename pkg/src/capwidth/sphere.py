"""Monte Carlo and quadrature integration over the unit sphere.

The mean width used throughout is
    M(K) = integral over the unit sphere of (h(u) + h(-u)) d sigma(u),
with sigma the rotation-invariant probability measure, so M(ball) = 2.
In the plane this reduces to M = (1/pi) * integral of h over [0, 2pi],
i.e. perimeter / pi.

Sampling is reproducible by construction: node chunk i is a pure function
of (seed, i), and reductions always run in chunk order, so results do not
depend on how chunks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
from scipy import integrate

from .bodies import BallProductSpec, BodyError, SupportBody

Array = np.ndarray

_CHUNK_ROWS = 1 << 14
_SPHERE_NS = 17


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate: value, standard error, and sample count."""

    value: float
    std_error: float
    count: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"estimate value is not finite: {self.value}")
        if not (self.std_error >= 0 and math.isfinite(self.std_error)):
            raise ValueError(f"standard error must be finite and >= 0: {self.std_error}")
        if self.count <= 0:
            raise ValueError(f"sample count must be positive: {self.count}")

    def interval(self, width: float = 3.0) -> tuple[float, float]:
        return (self.value - width * self.std_error, self.value + width * self.std_error)


@dataclass(frozen=True)
class SphereSampler:
    """Uniform sphere sampler with deterministic chunking.

    With antithetic=True the node set consists of +-u pairs and estimators
    evaluate both members of each pair; `count` is the total number of
    support evaluations either way (rounded up to even when antithetic).
    """

    dim: int
    seed: int = 0
    count: int = 200_000
    antithetic: bool = True

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"sphere dimension must be >= 2, got {self.dim}")
        if self.count <= 0:
            raise ValueError(f"sample count must be positive, got {self.count}")

    @property
    def n_rows(self) -> int:
        """Rows of base nodes generated (pairs count once)."""
        if self.antithetic:
            return (self.count + 1) // 2
        return self.count

    def chunk(self, index: int) -> Array:
        """Unit-vector rows of chunk `index`; pure function of (seed, index)."""
        start = index * _CHUNK_ROWS
        rows = min(_CHUNK_ROWS, self.n_rows - start)
        if rows <= 0:
            raise IndexError(f"chunk {index} out of range")
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, _SPHERE_NS, index)))
        g = rng.standard_normal((rows, self.dim))
        nrm = np.linalg.norm(g, axis=1)
        # a zero Gaussian row has probability zero; guard anyway
        bad = nrm == 0
        if np.any(bad):
            g[bad, 0] = 1.0
            nrm[bad] = 1.0
        return g / nrm[:, None]

    def chunks(self) -> Iterator[Array]:
        n_chunks = (self.n_rows + _CHUNK_ROWS - 1) // _CHUNK_ROWS
        for i in range(n_chunks):
            yield self.chunk(i)


def integrate_rows(sampler: SphereSampler, row_fn: Callable[[Array], Array]) -> Estimate:
    """Average row_fn over the sampler's base rows, reducing in chunk order.

    row_fn receives a chunk of unit rows U and must return one value per
    row.  Antithetic pairing is the caller's business: with an antithetic
    sampler, row_fn should combine u and -u itself.
    """
    total = 0.0
    total_sq = 0.0
    n = 0
    for U in sampler.chunks():
        v = np.asarray(row_fn(U), dtype=float)
        if v.shape != (U.shape[0],):
            raise ValueError(f"row function returned shape {v.shape} for chunk of {U.shape[0]}")
        total += float(v.sum())
        total_sq += float((v * v).sum())
        n += len(v)
    if n == 0:
        raise ValueError("zero sample count")
    mean = total / n
    if n > 1:
        var = max(0.0, (total_sq - n * mean * mean) / (n - 1))
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return Estimate(value=mean, std_error=se, count=n)


def mean_width(body: SupportBody, sampler: SphereSampler) -> Estimate:
    """Monte Carlo mean width.

    Antithetic mode averages h(u) + h(-u) over pairs, which is exact
    (zero variance) on the round ball.
    """
    if body.dim != sampler.dim:
        raise BodyError(f"body dimension {body.dim} != sampler dimension {sampler.dim}")
    if sampler.antithetic:
        def row_fn(U):
            return body.support(U) + body.support(-U)
    else:
        def row_fn(U):
            return 2.0 * body.support(U)
    return integrate_rows(sampler, row_fn)


def mean_width_2d(body: SupportBody, epsabs: float = 1e-12) -> float:
    """Deterministic planar mean width: (1/pi) * integral of h(theta)."""
    if body.dim != 2:
        raise BodyError(f"quadrature mean width needs a planar body, got dim {body.dim}")

    def f(th):
        return body.support(np.array([math.cos(th), math.sin(th)]))

    val, _ = integrate.quad(f, 0.0, 2.0 * math.pi, epsabs=epsabs, epsrel=1e-12, limit=800)
    return val / math.pi


def sphere_moment(
    spec: BallProductSpec,
    ell: int,
    r: int,
    kind: str,
    sampler: SphereSampler,
    r2: Optional[int] = None,
    kind2: Optional[str] = None,
) -> Estimate:
    """Estimate the factor moment  integral of z_r * z_r2 / |pi_ell u| d sigma.

    kind/kind2 select x or y coordinates (1-based index r).  By default the
    second coordinate equals the first, giving the squared moment.  The
    integrand is even, so antithetic pairs contribute a single value.
    """
    if not 1 <= ell <= spec.k:
        raise BodyError(f"factor index {ell} outside 1..{spec.k}")
    cols = spec.factor_columns()[ell - 1]

    def coord_col(which_r: int, which_kind: str) -> int:
        if which_kind not in ("x", "y"):
            raise BodyError(f"kind must be 'x' or 'y', got {which_kind!r}")
        if not 1 <= which_r <= spec.n:
            raise BodyError(f"axis index {which_r} outside 1..{spec.n}")
        return which_r - 1 if which_kind == "x" else spec.n + which_r - 1

    c1 = coord_col(r, kind)
    c2 = coord_col(r2 if r2 is not None else r, kind2 if kind2 is not None else kind)

    def row_fn(U):
        nrm = np.linalg.norm(U[:, cols], axis=1)
        nrm = np.where(nrm > 0, nrm, np.inf)  # vanishing projection: measure-zero set
        return U[:, c1] * U[:, c2] / nrm

    return integrate_rows(sampler, row_fn)


def support_sampled(points: Array, u: Array) -> float | Array:
    """Support of a finite point cloud: max_p <p, u>.

    Never exceeds the support of any body containing the cloud, and is
    monotone in the cloud.  u may be a single direction or (k, dim) rows.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("need a nonempty (m, dim) point cloud")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        return float(np.max(points @ u))
    return np.max(u @ points.T, axis=1)


def sampled_mean_width(points: Array, sampler: SphereSampler) -> Estimate:
    """Mean width of the convex hull of a point cloud, by direction MC.

    A lower-bound estimator for any body containing the cloud.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("need a nonempty (m, dim) point cloud")
    if points.shape[1] != sampler.dim:
        raise ValueError(f"cloud dimension {points.shape[1]} != sampler dimension {sampler.dim}")
    PT = points.T

    def row_fn(U):
        dots = U @ PT
        if sampler.antithetic:
            return dots.max(axis=1) - dots.min(axis=1)  # max over -U is -min
        return 2.0 * dots.max(axis=1)

    return integrate_rows(sampler, row_fn)


def sampled_mean_width_diff(points_a: Array, points_b: Array, sampler: SphereSampler) -> Estimate:
    """Estimate M(hull(points_a)) - M(hull(points_b)) with shared directions.

    Sharing directions makes the difference far more precise than
    differencing two independent estimates.
    """
    A = np.asarray(points_a, dtype=float).T
    B = np.asarray(points_b, dtype=float).T
    if A.shape[0] != sampler.dim or B.shape[0] != sampler.dim:
        raise ValueError("cloud dimensions must match the sampler")

    def row_fn(U):
        da = U @ A
        db = U @ B
        if sampler.antithetic:
            return (da.max(axis=1) - da.min(axis=1)) - (db.max(axis=1) - db.min(axis=1))
        return 2.0 * (da.max(axis=1) - db.max(axis=1))

    return integrate_rows(sampler, row_fn)
