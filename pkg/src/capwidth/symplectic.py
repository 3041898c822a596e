"""Linear symplectic maps and mean-width variations along them.

The positive-definite part of Sp(2n) is parameterized by exponentials of
symmetric matrices of the block form
    Y = [[C, D], [D, -C]],   C, D symmetric n x n,
which is exactly sym(2n) intersected with the symplectic Lie algebra for
J = [[0, -Id], [Id, 0]].  Polar decomposition splits any symplectic P as
Q S with Q orthogonal symplectic and S = (P^T P)^(1/2) of the exponential
form above, and the mean width only sees S, so first and second
variations along curves exp(sY) decide local minimality over the whole
group orbit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .bodies import (
    BallProductSpec,
    BodyError,
    SupportBody,
    ball_product_body,
    cond_check,
    classify_factors,
    linear_image,
)
from .sphere import Estimate, SphereSampler, integrate_rows, mean_width, mean_width_2d, sphere_moment

Array = np.ndarray

_DIR_NS = 37
_SYMPLECTIC_TOL = 1e-10
_EXP_GUARD = 6.0


class SymplecticError(ValueError):
    """Raised for invalid symplectic data."""


def standard_j(n: int) -> Array:
    """The symplectic structure J on R^(2n), coordinates (x_1..x_n, y_1..y_n)."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


@dataclass(frozen=True)
class SymmetricDirection:
    """Block datum (C, D) for the symmetric symplectic direction [[C, D], [D, -C]]."""

    C: Array
    D: Array

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        D = np.asarray(self.D, dtype=float)
        if C.ndim != 2 or C.shape != D.shape or C.shape[0] != C.shape[1]:
            raise SymplecticError(f"blocks must be equal square matrices, got {C.shape}, {D.shape}")
        if not np.allclose(C, C.T, atol=1e-12) or not np.allclose(D, D.T, atol=1e-12):
            raise SymplecticError("blocks C and D must be symmetric")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def matrix(self) -> Array:
        return np.block([[self.C, self.D], [self.D, -self.C]])

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def unit(self) -> "SymmetricDirection":
        nrm = self.frobenius()
        if nrm == 0:
            raise SymplecticError("cannot normalize the zero direction")
        return SymmetricDirection(C=self.C / nrm, D=self.D / nrm)

    def scaled(self, s: float) -> "SymmetricDirection":
        return SymmetricDirection(C=s * self.C, D=s * self.D)

    def to_coordinates(self) -> Array:
        """Upper-triangle entries of C then D."""
        iu = np.triu_indices(self.n)
        return np.concatenate([self.C[iu], self.D[iu]])

    @staticmethod
    def from_coordinates(n: int, vec: Array) -> "SymmetricDirection":
        vec = np.asarray(vec, dtype=float)
        m = n * (n + 1) // 2
        if vec.shape != (2 * m,):
            raise SymplecticError(f"expected coordinate vector of length {2 * m}, got {vec.shape}")
        iu = np.triu_indices(n)
        C = np.zeros((n, n))
        D = np.zeros((n, n))
        C[iu] = vec[:m]
        D[iu] = vec[m:]
        C = C + np.triu(C, 1).T
        D = D + np.triu(D, 1).T
        return SymmetricDirection(C=C, D=D)


def coordinate_directions(n: int) -> list[SymmetricDirection]:
    """The basis directions behind `to_coordinates`, in order."""
    m = n * (n + 1) // 2
    out = []
    eye = np.eye(2 * m)
    for k in range(2 * m):
        out.append(SymmetricDirection.from_coordinates(n, eye[k]))
    return out


def random_direction(n: int, rng: np.random.Generator) -> SymmetricDirection:
    """Gaussian symmetric blocks, normalized to unit Frobenius norm."""
    C = rng.standard_normal((n, n))
    D = rng.standard_normal((n, n))
    return SymmetricDirection(C=(C + C.T) / 2.0, D=(D + D.T) / 2.0).unit()


@dataclass(frozen=True)
class SymplecticElement:
    """A matrix validated against M^T J M = J."""

    matrix: Array

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2 != 0:
            raise SymplecticError(f"need an even square matrix, got shape {M.shape}")
        J = standard_j(M.shape[0] // 2)
        defect = float(np.linalg.norm(M.T @ J @ M - J))
        if not np.all(np.isfinite(M)) or defect > _SYMPLECTIC_TOL:
            raise SymplecticError(f"matrix is not symplectic (defect {defect:.3e})")
        object.__setattr__(self, "matrix", M)

    @property
    def n(self) -> int:
        return self.matrix.shape[0] // 2


def exp_direction(direction: SymmetricDirection, s: float = 1.0) -> SymplecticElement:
    """exp(s Y) for a symmetric direction Y, a positive-definite symplectic matrix.

    Guarded against overflow: |s| * ||Y||_2 may not exceed 6, past which the
    symplectic defect of the floating-point exponential is no longer
    negligible.
    """
    Y = direction.matrix
    scale = abs(s) * float(np.linalg.norm(Y, ord=2))
    if scale > _EXP_GUARD:
        raise SymplecticError(
            f"exponential overflow guard: |s| * ||Y||_2 = {scale:.3g} exceeds {_EXP_GUARD}"
        )
    return SymplecticElement(matrix=expm(s * Y))


def polar_decompose(M: Array | SymplecticElement) -> tuple[SymplecticElement, SymplecticElement]:
    """Split a symplectic M as Q S with Q orthogonal symplectic, S = (M^T M)^(1/2).

    Both factors are symplectic; S is the exponential of a symmetric
    direction and carries all of the mean-width action.
    """
    if isinstance(M, SymplecticElement):
        mat = M.matrix
    else:
        mat = np.asarray(M, dtype=float)
        SymplecticElement(matrix=mat)  # validates; raises on non-symplectic input
    w, V = np.linalg.eigh(mat.T @ mat)
    if np.any(w <= 0):
        raise SymplecticError("polar decomposition hit a non-positive singular value")
    S = (V * np.sqrt(w)) @ V.T
    S_inv = (V / np.sqrt(w)) @ V.T
    Q = mat @ S_inv
    return SymplecticElement(matrix=Q), SymplecticElement(matrix=S)


def log_symmetric_part(M: Array | SymplecticElement) -> SymmetricDirection:
    """The symmetric direction Y with exp(Y) = polar factor S of M."""
    _, S = polar_decompose(M)
    w, V = np.linalg.eigh(S.matrix)
    Y = (V * np.log(w)) @ V.T
    n = S.n
    C = 0.5 * (Y[:n, :n] - Y[n:, n:])
    D = 0.5 * (Y[:n, n:] + Y[n:, :n])
    return SymmetricDirection(C=0.5 * (C + C.T), D=0.5 * (D + D.T))


# ---------------------------------------------------------------------------
# Variations of the mean width along exp(sY)
# ---------------------------------------------------------------------------

def first_variation(body: SupportBody, direction: SymmetricDirection, sampler: SphereSampler) -> Estimate:
    """Monte Carlo estimate of d/ds M(exp(sY) K) at s = 0.

    Integrand: <grad h(u), Y u> + <grad h(-u), -Y u>, which is already
    even-symmetrized, so a.e. differentiability of h suffices.
    """
    if body.dim != sampler.dim:
        raise BodyError(f"body dimension {body.dim} != sampler dimension {sampler.dim}")
    Y = direction.matrix
    if Y.shape[0] != body.dim:
        raise SymplecticError(f"direction size {Y.shape[0]} != body dimension {body.dim}")

    def row_fn(U):
        YU = U @ Y  # Y symmetric: rows <- Y u
        plus = np.einsum("md,md->m", body.support_gradient(U), YU)
        minus = np.einsum("md,md->m", body.support_gradient(-U), -YU)
        return plus + minus

    return integrate_rows(sampler, row_fn)


def product_first_variation(
    spec: BallProductSpec,
    direction: SymmetricDirection,
    sampler: SphereSampler,
) -> Estimate:
    """First variation for a ball product, exact parts integrated out.

    Factor norms are invariant under coordinate sign flips, which average
    every off-diagonal integrand term to zero, so only Y_ii u_i^2 terms
    survive.  Those are further averaged over the swaps
    (x_i, y_i) -> (y_i, x_i), again measure preserving.  Nothing here
    assumes the coupling condition; the estimator stays unbiased for every
    product, it just integrates the solvable part in closed form, so the
    residual noise is what the factor structure actually leaves behind.
    """
    n = spec.n
    if 2 * n != sampler.dim:
        raise BodyError(f"spec dimension {2 * n} != sampler dimension {sampler.dim}")
    dvec = direction.matrix.diagonal().copy()
    cols = spec.factor_columns()
    radii = spec.radii

    # Per factor, average over the swap bits that touch it; other bits act
    # trivially, so this keeps the whole-group average.  Terms are keyed
    # by the column set they actually read, each term sums in value-column
    # order, and exact-negation partners (same columns, opposite weights)
    # sort adjacent, so they cancel bit-exactly rather than to roundoff.
    # That matters because a roundoff-scale mean would get z-scored
    # against a roundoff-scale error.
    groups: dict[tuple, list] = {}
    for rho, cc in zip(radii, cols):
        pairs = sorted({int(c) % n for c in cc})
        if len(pairs) > 12:
            pairs = []  # subgroup too large; sign symmetry alone is unbiased
        for bits in range(1 << len(pairs)):
            perm = np.arange(2 * n)
            for k, i in enumerate(pairs):
                if (bits >> k) & 1:
                    perm[i], perm[n + i] = n + i, i
            pairs_vw = sorted((int(perm[c]), int(c)) for c in cc)
            vcs = tuple(v for v, _ in pairs_vw)
            wts = tuple(float(dvec[w]) for _, w in pairs_vw)
            scale = rho / (1 << len(pairs))
            groups.setdefault(vcs, []).append((scale, wts))
    # Two members of a group with equal scale and exactly negated weights
    # would evaluate to bitwise negations of each other, so such pairs are
    # cancelled here instead of being sampled; only unpaired members carry
    # signal.  For products satisfying the coupling condition everything
    # pairs off and the estimate is exactly zero.
    survivors: dict[tuple, list] = {}
    for key, members in groups.items():
        members.sort(key=lambda m: (m[0], m[1]))
        left = []
        for m in members:
            neg = (m[0], tuple(-w for w in m[1]))
            if neg in left:
                left.remove(neg)
            else:
                left.append(m)
        if left:
            survivors[key] = left

    def row_fn(U):
        total = np.zeros(len(U))
        for vcs, members in survivors.items():
            sq = np.zeros(len(U))
            for c in vcs:
                sq += U[:, c] ** 2
            norm = np.sqrt(sq)
            norm = np.where(norm > 0, norm, 1.0)
            for scale, wts in members:
                s = np.zeros(len(U))
                for w, c in zip(wts, vcs):
                    s += w * U[:, c] ** 2
                total += scale * (s / norm)
        # factor 2 matches the +-u pair convention of the generic estimator
        return 2.0 * total

    return integrate_rows(sampler, row_fn)


def second_variation(
    body: SupportBody,
    direction: SymmetricDirection,
    sampler: SphereSampler,
    step: float = 0.25,
) -> Estimate:
    """Central-difference estimate of d^2/ds^2 M(exp(sY) K) at s = 0.

    Uses common random numbers across the five s values and Richardson
    extrapolation over step halving; the quoted error combines the Monte
    Carlo spread with the observed extrapolation gap.
    """
    if step < 1e-5:
        raise ValueError(f"step {step} is noise-dominated; use a larger finite-difference step")
    if body.dim != sampler.dim:
        raise BodyError(f"body dimension {body.dim} != sampler dimension {sampler.dim}")
    svals = [step, step / 2.0]
    mats = {s: expm(s * direction.matrix) for s in (-step, -step / 2, step / 2, step)}

    def pair_width(U, S):
        W = U @ S.T
        return body.support(W) + body.support(-W)

    sums = {s: 0.0 for s in svals}
    sq = {s: 0.0 for s in svals}
    coarse_total = 0.0
    fine_total = 0.0
    n = 0
    for U in sampler.chunks():
        g0 = pair_width(U, np.eye(body.dim))
        dh = (pair_width(U, mats[step]) - 2.0 * g0 + pair_width(U, mats[-step])) / step**2
        dh2 = (pair_width(U, mats[step / 2]) - 2.0 * g0 + pair_width(U, mats[-step / 2])) / (step / 2) ** 2
        rich = (4.0 * dh2 - dh) / 3.0
        sums[step] += float(rich.sum())
        sq[step] += float((rich * rich).sum())
        coarse_total += float(dh.sum())
        fine_total += float(dh2.sum())
        n += len(rich)
    if n == 0:
        raise ValueError("zero sample count")
    mean = sums[step] / n
    var = max(0.0, (sq[step] - n * mean * mean) / max(n - 1, 1))
    se = math.sqrt(var / n)
    trunc = abs(fine_total - coarse_total) / (3.0 * n)  # Richardson residual proxy
    return Estimate(value=mean, std_error=math.sqrt(se**2 + trunc**2), count=n)


def factor_curvature_bound(
    spec: BallProductSpec, direction: SymmetricDirection, sampler: SphereSampler
) -> Estimate:
    """Sign cross-check for the second variation of a ball product.

    Along exp(sY) the second derivative splits into a nonnegative Hessian
    part and the gradient part
        2 * sum_l rho_l [ sum_{i in I_l} L_ii m_l(x_i) + sum_{j in J_l} L_jj m_l(y_j) ],
    with L = C^2 + D^2 and m_l the factor moments; L has nonnegative
    diagonal, so this is a lower bound for the full second variation.
    """
    L = direction.C @ direction.C + direction.D @ direction.D
    total = 0.0
    var = 0.0
    count = 0
    for ell in range(1, spec.k + 1):
        for i in sorted(spec.I[ell - 1]):
            est = sphere_moment(spec, ell, i, "x", sampler)
            total += 2.0 * spec.radii[ell - 1] * L[i - 1, i - 1] * est.value
            var += (2.0 * spec.radii[ell - 1] * L[i - 1, i - 1] * est.std_error) ** 2
            count = max(count, est.count)
        for j in sorted(spec.J[ell - 1]):
            est = sphere_moment(spec, ell, j, "y", sampler)
            total += 2.0 * spec.radii[ell - 1] * L[j - 1, j - 1] * est.value
            var += (2.0 * spec.radii[ell - 1] * L[j - 1, j - 1] * est.std_error) ** 2
            count = max(count, est.count)
    return Estimate(value=total, std_error=math.sqrt(var), count=count or 1)


# ---------------------------------------------------------------------------
# Local minimality verdicts and descent search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionCheck:
    coordinates: Array
    first: Estimate
    second: Estimate
    first_ok: bool    # |f'(0)| <= 3 std errors
    second_ok: bool   # f''(0) > 0


@dataclass(frozen=True)
class LocalMinReport:
    label: str
    coupling_ok: bool
    toric: bool
    passed: bool
    checks: tuple[DirectionCheck, ...]
    witness: Optional[dict]  # descent direction data for coupling violations

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        worst = max((abs(c.first.value) / max(c.first.std_error, 1e-300) for c in self.checks), default=0.0)
        out = f"{self.label}: {verdict} (max |f'|/se = {worst:.2f} over {len(self.checks)} directions)"
        if self.witness is not None:
            out += f"; descent witness f' = {self.witness['value']:.4f} +- {self.witness['std_error']:.4f}"
        return out


def verify_local_min(
    spec: BallProductSpec,
    directions: int = 20,
    sampler: Optional[SphereSampler] = None,
    seed: int = 0,
    step: float = 0.25,
) -> LocalMinReport:
    """Test flatness and upward curvature of M over exp(sY) in random directions.

    Passes when every sampled direction has |f'(0)| within 3 standard
    errors of zero and positive second variation.  For specs violating the
    coupling condition, coordinate directions are scanned for a descent
    witness with |f'(0)| above 5 standard errors.  First variations use
    the product-structured estimator, whose exactly integrable parts are
    removed before sampling.
    """
    body = ball_product_body(spec)
    sampler = sampler or SphereSampler(dim=body.dim, seed=seed, count=200_000)
    info = classify_factors(spec)

    checks = []
    for i in range(directions):
        rng = np.random.default_rng(np.random.SeedSequence((sampler.seed, _DIR_NS, i)))
        Y = random_direction(spec.n, rng)
        fv = product_first_variation(spec, Y, sampler)
        sv = second_variation(body, Y, sampler, step=step)
        checks.append(
            DirectionCheck(
                coordinates=Y.to_coordinates(),
                first=fv,
                second=sv,
                first_ok=bool(abs(fv.value) <= 3.0 * fv.std_error),
                second_ok=bool(sv.value > 0),
            )
        )

    witness = None
    if not info.coupling_ok:
        for k, Y in enumerate(coordinate_directions(spec.n)):
            fv = product_first_variation(spec, Y, sampler)
            if abs(fv.value) > 5.0 * fv.std_error:
                witness = {
                    "coordinates": Y.to_coordinates().tolist(),
                    "index": k,
                    "value": fv.value,
                    "std_error": fv.std_error,
                }
                break

    passed = all(c.first_ok and c.second_ok for c in checks) and witness is None
    return LocalMinReport(
        label=body.label,
        coupling_ok=info.coupling_ok,
        toric=info.toric,
        passed=passed,
        checks=tuple(checks),
        witness=witness,
    )


@dataclass(frozen=True)
class SearchResult:
    direction: SymmetricDirection  # log of the polar part of the final element
    value: float
    trace: Array                   # objective per accepted step, nonincreasing
    converged: bool


def _variation_quad_2d(body: SupportBody, direction: SymmetricDirection, grid: int = 4096) -> float:
    th = 2.0 * math.pi * (np.arange(grid) + 0.5) / grid
    U = np.stack([np.cos(th), np.sin(th)], axis=1)
    vals = np.einsum("md,md->m", body.support_gradient(U), U @ direction.matrix)
    return float(2.0 * vals.mean())


def local_search(
    body: SupportBody,
    start: Optional[SymmetricDirection] = None,
    sampler: Optional[SphereSampler] = None,
    steps: int = 120,
    grad_tol: float = 1e-7,
) -> SearchResult:
    """Descend the mean width over the positive symplectic factor.

    The iterate is a symplectic matrix updated multiplicatively by
    exponentials of the negative gradient direction; the gradient
    coordinates come from first-variation integrands at the current body.
    Planar bodies use deterministic quadrature for both the objective and
    the gradient; higher dimensions use the sampler with a fixed seed, so
    the line search sees a deterministic objective.

    The returned trace is monotone nonincreasing by construction.
    """
    n = body.half_dim
    if body.dim != 2 and sampler is None:
        sampler = SphereSampler(dim=body.dim, seed=0, count=100_000)
    if sampler is not None and sampler.dim != body.dim:
        raise BodyError(f"sampler dimension {sampler.dim} != body dimension {body.dim}")

    P = np.eye(body.dim) if start is None else expm(start.matrix)

    def objective(mat: Array) -> float:
        moved = linear_image(body, mat)
        if body.dim == 2:
            return mean_width_2d(moved)
        return mean_width(moved, sampler).value

    def gradient(mat: Array) -> Array:
        moved = linear_image(body, mat)
        comps = []
        for E in coordinate_directions(n):
            if body.dim == 2:
                comps.append(_variation_quad_2d(moved, E))
            else:
                comps.append(first_variation(moved, E, sampler).value)
        return np.asarray(comps)

    trace = [objective(P)]
    step = 0.5
    converged = False
    for _ in range(steps):
        g = gradient(P)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol * (1.0 + abs(trace[-1])):
            converged = True
            break
        G = SymmetricDirection.from_coordinates(n, g)
        alpha = step
        accepted = False
        for _ in range(40):
            if alpha * float(np.linalg.norm(G.matrix, ord=2)) > _EXP_GUARD:
                alpha *= 0.5
                continue
            trial = expm(-alpha * G.matrix) @ P
            val = objective(trial)
            if val <= trace[-1] - 1e-4 * alpha * gnorm * gnorm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            converged = True  # no further descent at line-search resolution
            break
        P = trial
        trace.append(val)
        step = min(2.0 * alpha, 1.0)
        if float(np.linalg.norm(P, ord=2)) > math.exp(_EXP_GUARD):
            raise SymplecticError("search diverged: iterate norm exceeded the overflow guard")

    return SearchResult(
        direction=log_symmetric_part(P),
        value=trace[-1],
        trace=np.asarray(trace),
        converged=converged,
    )
