"""Convex bodies represented by their support functions.

Every body lives in R^(2n) with coordinates ordered (x_1..x_n, y_1..y_n);
e_i is the i-th x axis, f_j the j-th y axis.  A body is a bundle of
callables: the support function h(u) = sup_{k in K} <k, u> (evaluated as
its positively 1-homogeneous extension, so u need not be a unit vector),
its gradient where defined, and optionally an exact Euclidean distance
oracle and a closed-form volume.

Products of balls assigned to axis subsets are the workhorse family.
They are described by a `BallProductSpec` (radii plus two partitions of
{1..n} saying which x axes and which y axes each factor occupies).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

Array = np.ndarray


class BodyError(ValueError):
    """Raised for invalid body construction or use."""


def _batched(fn: Callable[[Array], Array], dim: int) -> Callable[[Array], Array]:
    """Wrap an (m, dim) -> (m,) evaluator so it also accepts a single vector."""

    def wrapped(u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            if u.shape[0] != dim:
                raise BodyError(f"expected a vector of length {dim}, got {u.shape[0]}")
            return float(fn(u[None, :])[0])
        if u.ndim != 2 or u.shape[1] != dim:
            raise BodyError(f"expected shape (m, {dim}), got {u.shape}")
        return fn(u)

    return wrapped


def _batched_grad(fn: Callable[[Array], Array], dim: int) -> Callable[[Array], Array]:
    def wrapped(u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            if u.shape[0] != dim:
                raise BodyError(f"expected a vector of length {dim}, got {u.shape[0]}")
            return fn(u[None, :])[0]
        if u.ndim != 2 or u.shape[1] != dim:
            raise BodyError(f"expected shape (m, {dim}), got {u.shape}")
        return fn(u)

    return wrapped


@dataclass(frozen=True)
class SupportBody:
    """A convex body given by support-function evaluators.

    Attributes
    ----------
    dim : int
        Ambient dimension 2n.
    support : callable
        h(u); accepts (dim,) or (m, dim) arrays, returns float or (m,).
    support_gradient : callable
        grad h(u) where h is differentiable (a.e. choice elsewhere);
        same shapes as the input.
    distance : callable or None
        Exact Euclidean distance to the body, when available.
    volume : float or None
        Closed-form volume, when available.
    circumradius : float or None
        max_{|u|=1} h(u), or a finite upper bound for it.
    """

    dim: int
    support: Callable[[Array], Array]
    support_gradient: Callable[[Array], Array]
    distance: Optional[Callable[[Array], Array]] = None
    volume: Optional[float] = None
    circumradius: Optional[float] = None
    label: str = "body"

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2 != 0:
            raise BodyError(f"dimension must be a positive even integer, got {self.dim}")

    @property
    def half_dim(self) -> int:
        return self.dim // 2


@dataclass(frozen=True)
class BallProductSpec:
    """Datum (radii, I, J) for a product of balls along axis subsets.

    Factor l is radii[l] times the unit ball of the subspace spanned by
    the x axes in I[l] and the y axes in J[l].  I and J are partitions of
    {1..n} into k possibly-empty parts; part l of I and part l of J may
    not both be empty.  Indices are 1-based.
    """

    n: int
    radii: tuple[float, ...]
    I: tuple[frozenset[int], ...]
    J: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.n <= 0:
            raise BodyError(f"need n >= 1, got n={self.n}")
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "I", tuple(frozenset(int(i) for i in s) for s in self.I))
        object.__setattr__(self, "J", tuple(frozenset(int(j) for j in s) for s in self.J))
        k = len(self.radii)
        if k == 0:
            raise BodyError("need at least one factor")
        if len(self.I) != k or len(self.J) != k:
            raise BodyError(
                f"radii, I, J must have equal length; got {k}, {len(self.I)}, {len(self.J)}"
            )
        for ell, r in enumerate(self.radii, start=1):
            if not (r > 0 and math.isfinite(r)):
                raise BodyError(f"factor {ell}: radius must be positive and finite, got {r}")
        for ell, (a, b) in enumerate(zip(self.I, self.J), start=1):
            if not a and not b:
                raise BodyError(f"factor {ell}: I and J parts are both empty")
        for name, parts in (("I", self.I), ("J", self.J)):
            seen: set[int] = set()
            for ell, part in enumerate(parts, start=1):
                bad = [i for i in part if not 1 <= i <= self.n]
                if bad:
                    raise BodyError(f"factor {ell}: {name} index {bad[0]} outside 1..{self.n}")
                dup = seen & part
                if dup:
                    raise BodyError(f"factor {ell}: {name} index {min(dup)} used twice")
                seen |= part
            if seen != set(range(1, self.n + 1)):
                missing = min(set(range(1, self.n + 1)) - seen)
                raise BodyError(f"{name} does not cover axis {missing}")

    @property
    def k(self) -> int:
        return len(self.radii)

    def factor_dim(self, ell: int) -> int:
        """Dimension m_l of factor l (1-based)."""
        return len(self.I[ell - 1]) + len(self.J[ell - 1])

    def factor_columns(self) -> list[np.ndarray]:
        """0-based coordinate columns of each factor, x axes then y axes."""
        cols = []
        for a, b in zip(self.I, self.J):
            cols.append(np.array(sorted(i - 1 for i in a) + sorted(self.n + j - 1 for j in b)))
        return cols

    def describe(self) -> str:
        parts = []
        for r, a, b in zip(self.radii, self.I, self.J):
            ax = [f"x{i}" for i in sorted(a)] + [f"y{j}" for j in sorted(b)]
            parts.append(f"{r:g}B^{len(ax)}({','.join(ax)})")
        return " x ".join(parts)


def cond_check(spec: BallProductSpec) -> bool:
    """True iff every cross-factor index coupling matches dimension and radius.

    Whenever an axis index appears in I of factor l and in J of a different
    factor l', the two factors must have equal dimension and equal radius.
    """
    for ell in range(spec.k):
        for ellp in range(spec.k):
            if ell == ellp:
                continue
            if spec.I[ell] & spec.J[ellp]:
                same_dim = spec.factor_dim(ell + 1) == spec.factor_dim(ellp + 1)
                same_rad = spec.radii[ell] == spec.radii[ellp]
                if not (same_dim and same_rad):
                    return False
    return True


@dataclass(frozen=True)
class FactorClassification:
    symplectic: tuple[bool, ...]  # factor l spans matching x and y axes
    toric: bool                   # all factors symplectic
    coupling_ok: bool             # cond_check verdict
    in_test_family: bool          # coupling_ok and at least one nonsymplectic factor


def classify_factors(spec: BallProductSpec) -> FactorClassification:
    symp = tuple(a == b for a, b in zip(spec.I, spec.J))
    ok = cond_check(spec)
    return FactorClassification(
        symplectic=symp,
        toric=all(symp),
        coupling_ok=ok,
        in_test_family=ok and not all(symp),
    )


def ball_volume_of_dim(d: int) -> float:
    """Volume of the unit ball in R^d."""
    if d <= 0:
        raise BodyError(f"dimension must be positive, got {d}")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def ball_product_body(spec: BallProductSpec, label: Optional[str] = None) -> SupportBody:
    """Build the SupportBody for a ball-product spec.

    h(u) = sum_l rho_l |pi_l u|; the gradient drops any factor whose
    projection vanishes (the a.e. choice).  The distance oracle is exact:
    dist(x)^2 = sum_l max(0, |pi_l x| - rho_l)^2.
    """
    dim = 2 * spec.n
    cols = spec.factor_columns()
    radii = np.asarray(spec.radii)

    def support(U):
        total = np.zeros(U.shape[0])
        for r, c in zip(radii, cols):
            total += r * np.linalg.norm(U[:, c], axis=1)
        return total

    def gradient(U):
        out = np.zeros_like(U)
        for r, c in zip(radii, cols):
            block = U[:, c]
            nrm = np.linalg.norm(block, axis=1)
            nz = nrm > 0
            out[np.ix_(nz, c)] = r * block[nz] / nrm[nz, None]
        return out

    def distance(X):
        total = np.zeros(X.shape[0])
        for r, c in zip(radii, cols):
            excess = np.maximum(np.linalg.norm(X[:, c], axis=1) - r, 0.0)
            total += excess * excess
        return np.sqrt(total)

    volume = float(np.prod([ball_volume_of_dim(len(c)) * r ** len(c) for r, c in zip(radii, cols)]))
    return SupportBody(
        dim=dim,
        support=_batched(support, dim),
        support_gradient=_batched_grad(gradient, dim),
        distance=_batched(distance, dim),
        volume=volume,
        circumradius=float(np.sqrt(np.sum(radii**2))),
        label=label or spec.describe(),
    )


# ---------------------------------------------------------------------------
# Named constructors
# ---------------------------------------------------------------------------

def ball_spec(n: int) -> BallProductSpec:
    full = frozenset(range(1, n + 1))
    return BallProductSpec(n=n, radii=(1.0,), I=(full,), J=(full,))

def ball(n: int, radius: float = 1.0) -> SupportBody:
    """Round ball of given radius in R^(2n)."""
    full = frozenset(range(1, n + 1))
    spec = BallProductSpec(n=n, radii=(float(radius),), I=(full,), J=(full,))
    return ball_product_body(spec, label=f"ball({n})" if radius == 1.0 else f"{radius:g}*ball({n})")

def cube_spec(n: int) -> BallProductSpec:
    # 2n segment factors: one per x axis, one per y axis
    I = [frozenset({i}) for i in range(1, n + 1)] + [frozenset()] * n
    J = [frozenset()] * n + [frozenset({j}) for j in range(1, n + 1)]
    return BallProductSpec(n=n, radii=(1.0,) * (2 * n), I=tuple(I), J=tuple(J))

def cube(n: int) -> SupportBody:
    """Cube [-1,1]^(2n), as a product of 2n segments."""
    return ball_product_body(cube_spec(n), label=f"cube({n})")

def square() -> SupportBody:
    return ball_product_body(cube_spec(1), label="square")

def polydisk_spec(radii: Sequence[float]) -> BallProductSpec:
    n = len(radii)
    I = tuple(frozenset({ell}) for ell in range(1, n + 1))
    return BallProductSpec(n=n, radii=tuple(radii), I=I, J=I)

def polydisk(*radii: float) -> SupportBody:
    """Product of disks, the l-th of radius radii[l], in the (x_l, y_l) planes."""
    spec = polydisk_spec(radii)
    return ball_product_body(spec, label="polydisk(" + ",".join(f"{r:g}" for r in radii) + ")")

def bidisk_spec() -> BallProductSpec:
    # the x-ball times y-ball product in R^4
    return BallProductSpec(
        n=2, radii=(1.0, 1.0), I=(frozenset({1, 2}), frozenset()), J=(frozenset(), frozenset({1, 2}))
    )

def bidisk() -> SupportBody:
    return ball_product_body(bidisk_spec(), label="bidisk")

def square_disk_spec() -> BallProductSpec:
    # square in the (x1, y1) plane times disk in the (x2, y2) plane
    return BallProductSpec(
        n=2,
        radii=(1.0, 1.0, 1.0),
        I=(frozenset({1}), frozenset(), frozenset({2})),
        J=(frozenset(), frozenset({1}), frozenset({2})),
    )

def square_disk() -> SupportBody:
    return ball_product_body(square_disk_spec(), label="square_disk")

def rect_spec(rx: float = 1.0, ry: float = 2.0) -> BallProductSpec:
    """Segment product rx*B^1(e1) x ry*B^1(f1); violates the coupling condition when rx != ry."""
    return BallProductSpec(
        n=1, radii=(float(rx), float(ry)), I=(frozenset({1}), frozenset()), J=(frozenset(), frozenset({1}))
    )


def ellipsoid(semi_axes: Sequence[float]) -> SupportBody:
    """Axis-aligned ellipsoid sum (z_i / a_i)^2 <= 1 in R^(2n)."""
    a = np.asarray([float(v) for v in semi_axes])
    if a.ndim != 1 or len(a) == 0 or len(a) % 2 != 0:
        raise BodyError(f"need an even number of semi-axes, got {len(a)}")
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        bad = int(np.argmin(a > 0)) + 1
        raise BodyError(f"semi-axis {bad} must be positive and finite")
    dim = len(a)
    a2 = a * a

    def support(U):
        return np.sqrt((U * U) @ a2)

    def gradient(U):
        h = np.sqrt((U * U) @ a2)
        h = np.where(h > 0, h, 1.0)
        return U * a2 / h[:, None]

    def distance(X):
        # closest point y_i = a_i^2 x_i / (a_i^2 + lam); solve sum y_i^2/a_i^2 = 1
        X = np.asarray(X, dtype=float)
        inside = (X * X) @ (1.0 / a2) <= 1.0
        out = np.zeros(X.shape[0])
        todo = ~inside
        if np.any(todo):
            Z = X[todo]
            lo = np.zeros(Z.shape[0])
            hi = a.max() * (np.linalg.norm(Z, axis=1) + a.max())
            for _ in range(90):
                if float((hi - lo).max()) <= 1e-11 * (1.0 + float(hi.max())):
                    break
                mid = 0.5 * (lo + hi)
                g = ((a2 * Z * Z) / (a2 + mid[:, None]) ** 2).sum(axis=1)
                high = g > 1.0
                lo = np.where(high, mid, lo)
                hi = np.where(high, hi, mid)
            lam = 0.5 * (lo + hi)
            y = a2 * Z / (a2 + lam[:, None])
            out[todo] = np.linalg.norm(Z - y, axis=1)
        return out

    volume = ball_volume_of_dim(dim) * float(np.prod(a))
    return SupportBody(
        dim=dim,
        support=_batched(support, dim),
        support_gradient=_batched_grad(gradient, dim),
        distance=_batched(distance, dim),
        volume=volume,
        circumradius=float(a.max()),
        label="ellipsoid(" + ",".join(f"{v:g}" for v in a) + ")",
    )


def superellipse(p: float, scale: float = 1.0) -> SupportBody:
    """Planar body |x|^p + |y|^p <= scale^p, for p >= 2.

    The support function is scale times the dual q-norm, q = p/(p-1).
    """
    if p < 2:
        raise BodyError(f"need p >= 2, got {p}")
    if scale <= 0:
        raise BodyError(f"scale must be positive, got {scale}")
    q = 1.0 if math.isinf(p) else p / (p - 1.0)  # p = inf is the square itself
    s = float(scale)

    def support(U):
        return s * np.linalg.norm(U, ord=q, axis=1)

    def gradient(U):
        A = np.abs(U)
        nq = np.linalg.norm(U, ord=q, axis=1)
        nq = np.where(nq > 0, nq, 1.0)
        return s * np.sign(U) * (A / nq[:, None]) ** (q - 1.0)

    area = superellipse_area(p) * s * s
    return SupportBody(
        dim=2,
        support=_batched(support, 2),
        support_gradient=_batched_grad(gradient, 2),
        volume=area,
        circumradius=s * 2 ** (1.0 / q - 0.5) if q <= 2 else s,
        label=f"superellipse(p={p:g}, scale={s:g})",
    )


def superellipse_area(p: float) -> float:
    """Area of the unit p-ball in the plane."""
    if p <= 0:
        raise BodyError(f"need p > 0, got {p}")
    return 4.0 * math.gamma(1 + 1 / p) ** 2 / math.gamma(1 + 2 / p)


def square_area_superellipse(p: float) -> SupportBody:
    """The superellipse with the same area (4) as the square [-1,1]^2."""
    r = 2.0 / math.sqrt(superellipse_area(p))
    body = superellipse(p, scale=r)
    return replace(body, label=f"squash(p={p:g})")


def superellipse_product(spec: BallProductSpec, plane: int, p: float) -> SupportBody:
    """Replace the symplectic square of `spec` in the (x_plane, y_plane) plane
    by the area-equal superellipse, keeping all other factors.

    The product must contain the pair of segment factors rho*B^1(e_plane)
    and rho*B^1(f_plane) with equal radii.
    """
    pair = _find_square_pair(spec, plane)
    if pair is None:
        raise BodyError(f"spec has no segment pair forming a square in plane {plane}")
    la, lb, rho = pair
    n = spec.n
    dim = 2 * n
    rounded = square_area_superellipse(p)
    cols_plane = np.array([plane - 1, n + plane - 1])
    rest = [
        (r, c)
        for ell, (r, c) in enumerate(zip(spec.radii, spec.factor_columns()))
        if ell not in (la, lb)
    ]

    def support(U):
        total = rho * rounded.support(U[:, cols_plane])
        for r, c in zip([r for r, _ in rest], [c for _, c in rest]):
            total += r * np.linalg.norm(U[:, c], axis=1)
        return total

    def gradient(U):
        out = np.zeros_like(U)
        out[:, cols_plane] = rho * rounded.support_gradient(U[:, cols_plane])
        for r, c in rest:
            block = U[:, c]
            nrm = np.linalg.norm(block, axis=1)
            nz = nrm > 0
            out[np.ix_(nz, c)] = r * block[nz] / nrm[nz, None]
        return out

    rest_vol = float(np.prod([ball_volume_of_dim(len(c)) * r ** len(c) for r, c in rest])) if rest else 1.0
    return SupportBody(
        dim=dim,
        support=_batched(support, dim),
        support_gradient=_batched_grad(gradient, dim),
        volume=rounded.volume * rho * rho * rest_vol,
        circumradius=float(np.sqrt((rho * rounded.circumradius) ** 2 + sum(r * r for r, _ in rest))),
        label=f"{spec.describe()} with plane {plane} rounded (p={p:g})",
    )


def _find_square_pair(spec: BallProductSpec, plane: int) -> Optional[tuple[int, int, float]]:
    """Locate the segment-factor pair (0-based indices) forming the square in `plane`."""
    ia = ib = None
    for ell in range(spec.k):
        if spec.I[ell] == {plane} and not spec.J[ell] and spec.factor_dim(ell + 1) == 1:
            ia = ell
        if spec.J[ell] == {plane} and not spec.I[ell] and spec.factor_dim(ell + 1) == 1:
            ib = ell
    if ia is None or ib is None:
        return None
    if spec.radii[ia] != spec.radii[ib]:
        return None
    return ia, ib, spec.radii[ia]


# ---------------------------------------------------------------------------
# Algebra of bodies
# ---------------------------------------------------------------------------

def minkowski_sum(k1: SupportBody, k2: SupportBody, label: Optional[str] = None) -> SupportBody:
    """Minkowski sum: supports and gradients add.  Distance and volume are dropped."""
    if k1.dim != k2.dim:
        raise BodyError(f"dimension mismatch: {k1.dim} vs {k2.dim}")
    dim = k1.dim

    def support(U):
        return k1.support(U) + k2.support(U)

    def gradient(U):
        return k1.support_gradient(U) + k2.support_gradient(U)

    circ = None
    if k1.circumradius is not None and k2.circumradius is not None:
        circ = k1.circumradius + k2.circumradius
    return SupportBody(
        dim=dim,
        support=_batched(support, dim),
        support_gradient=_batched_grad(gradient, dim),
        circumradius=circ,
        label=label or f"({k1.label} + {k2.label})",
    )


def scale_body(k: SupportBody, t: float) -> SupportBody:
    """Dilate a body by t > 0, keeping every oracle it has."""
    if t <= 0:
        raise BodyError(f"scale factor must be positive, got {t}")
    t = float(t)
    dim = k.dim

    def support(U):
        return t * k.support(U)

    def gradient(U):
        return t * k.support_gradient(U)

    distance = None
    if k.distance is not None:
        def distance(X):  # noqa: F811 - deliberate rebind
            return t * np.asarray(k.distance(X / t))

        distance = _batched(distance, dim)
    return SupportBody(
        dim=dim,
        support=_batched(support, dim),
        support_gradient=_batched_grad(gradient, dim),
        distance=distance,
        volume=None if k.volume is None else k.volume * t**dim,
        circumradius=None if k.circumradius is None else t * k.circumradius,
        label=f"{t:g}*{k.label}",
    )


def linear_image(k: SupportBody, A: Array, label: Optional[str] = None) -> SupportBody:
    """Image A K of a body under an invertible matrix: h_{AK}(u) = h_K(A^T u)."""
    A = np.asarray(A, dtype=float)
    if A.shape != (k.dim, k.dim):
        raise BodyError(f"matrix shape {A.shape} does not match dimension {k.dim}")
    det = np.linalg.det(A)
    if abs(det) < 1e-12:
        raise BodyError("matrix is singular")
    dim = k.dim
    At = A.T

    def support(U):
        return k.support(U @ A)        # rows u -> A^T u

    def gradient(U):
        return k.support_gradient(U @ A) @ At  # chain rule: A grad h(A^T u)

    # distance survives when A is orthogonal (A^T x pulls back isometrically)
    distance = None
    if k.distance is not None and np.allclose(At @ A, np.eye(dim), atol=1e-12):
        def distance(X):  # noqa: F811
            return np.asarray(k.distance(X @ A))

        distance = _batched(distance, dim)
    circ = None
    if k.circumradius is not None:
        circ = float(np.linalg.norm(A, ord=2)) * k.circumradius
    return SupportBody(
        dim=dim,
        support=_batched(support, dim),
        support_gradient=_batched_grad(gradient, dim),
        distance=distance,
        volume=None if k.volume is None else abs(det) * k.volume,
        circumradius=circ,
        label=label or f"linimg({k.label})",
    )


def standard_bodies() -> dict[str, SupportBody]:
    """The desk-scale catalog (n <= 2).  Every entry has a distance oracle."""
    return {
        "ball2": ball(1),
        "square": square(),
        "ellipse_2_1": ellipsoid((2.0, 1.0)),
        "rect_1_2": ball_product_body(rect_spec(1.0, 2.0), label="rect_1_2"),
        "ball4": ball(2),
        "cube4": cube(2),
        "polydisk_1_1": polydisk(1.0, 1.0),
        "polydisk_1_2": polydisk(1.0, 2.0),
        "bidisk": bidisk(),
        "square_disk": square_disk(),
    }


def boundary_grid(spec: BallProductSpec, budget: int = 4096, seed: int = 0) -> Array:
    """Grid of extreme points of a ball product: the product of factor spheres.

    Each factor sphere gets an equal share of the budget (segments get their
    two endpoints).  Extreme points of the product are exactly products of
    factor-sphere points, and their hull recovers the body.
    """
    if budget < 1:
        raise BodyError(f"budget must be positive, got {budget}")
    cols = spec.factor_columns()
    free = [c for c in cols if len(c) > 1]
    # segments contribute both endpoints; spheres share the rest of the budget
    n_seg = sum(1 for c in cols if len(c) == 1)
    remaining = max(1, budget // (2**n_seg)) if n_seg else budget
    per = max(4, int(round(remaining ** (1.0 / len(free))))) if free else 1

    factor_points = []
    for ell, (r, c) in enumerate(zip(spec.radii, cols)):
        m = len(c)
        if m == 1:
            pts = np.array([[-r], [r]])
        elif m == 2:
            # grid anchored at angle 0: doubling the budget nests the grid,
            # so sampled supports are monotone in the budget
            th = 2 * np.pi * np.arange(per) / per
            pts = r * np.stack([np.cos(th), np.sin(th)], axis=1)
        else:
            # prefix-stable stream per factor, same nesting property
            rng = np.random.default_rng(np.random.SeedSequence((seed, 61, ell)))
            g = rng.standard_normal((per, m))
            pts = r * g / np.linalg.norm(g, axis=1, keepdims=True)
        factor_points.append(pts)

    counts = [len(p) for p in factor_points]
    total = int(np.prod(counts))
    out = np.zeros((total, 2 * spec.n))
    idx = np.indices(counts).reshape(len(counts), -1).T
    for f, (c, pts) in enumerate(zip(cols, factor_points)):
        out[:, c] = pts[idx[:, f]]
    return out
