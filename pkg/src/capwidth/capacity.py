"""Loop-based upper estimates of the smallest symplectic capacity.

The estimator minimizes the support cost
    cost(z) = integral over [0, 2pi] of h_K(z'(t)) dt
over truncated Fourier loops z subject to the action constraint
    A(z) = integral of <J z, z'> dt = 2.
For the round ball the constrained minimum over all loops is attained by
the planar circle of action 2 and equals 2 sqrt(pi).  Restricting to
finitely many Fourier modes only shrinks the feasible set, so every
reported raw value is an upper bound for the true minimum and can only
decrease as modes are added.

Raw costs are converted to a normalized capacity by calibrating on the
ball: c(K) = (v_K / v_ball)^2, where v_ball is this estimator's own raw
ball value at identical settings.  That makes c(ball) = 1 exactly and
c(r * ball) = r^2 up to optimizer tolerance; the analytic raw ball value
2 sqrt(pi) is kept alongside as a reference constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bodies import BodyError, SupportBody, ball
from .sphere import Estimate, SphereSampler, mean_width
from .steiner import ball_volume, volume_sum_ball
from .symplectic import standard_j

Array = np.ndarray

RAW_BALL_COST = 2.0 * math.sqrt(math.pi)

# optimizer tolerance quoted as a relative standard error on raw values
_OPT_REL_TOL = 1e-3

_START_NS = 23
_CAL_CACHE: dict[tuple, float] = {}


@dataclass(frozen=True)
class LoopPath:
    """Truncated Fourier loop z(t) = sum_k a_k cos(kt) + b_k sin(kt), k = 1..K.

    The mean term is omitted: the action and the cost ignore it, and the
    admissible class fixes it to zero anyway.
    """

    n: int
    a: Array  # (K, 2n)
    b: Array  # (K, 2n)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 2 or a.shape != b.shape or a.shape[1] != 2 * self.n:
            raise ValueError(f"coefficient arrays must both be (K, {2 * self.n})")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("loop coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def modes(self) -> int:
        return self.a.shape[0]

    def position(self, ts: Array) -> Array:
        k = np.arange(1, self.modes + 1)[:, None]
        ts = np.asarray(ts, dtype=float)[None, :]
        return np.cos(k * ts).T @ self.a + np.sin(k * ts).T @ self.b

    def velocity(self, ts: Array) -> Array:
        k = np.arange(1, self.modes + 1)[:, None]
        ts = np.asarray(ts, dtype=float)[None, :]
        return (-k * np.sin(k * ts)).T @ self.a + (k * np.cos(k * ts)).T @ self.b

    def scaled(self, s: float) -> "LoopPath":
        return LoopPath(n=self.n, a=s * self.a, b=s * self.b)


def loop_action(loop: LoopPath) -> float:
    """Symplectic action, closed form: sum_k 2 pi k <J a_k, b_k>."""
    J = standard_j(loop.n)
    k = np.arange(1, loop.modes + 1)
    return float(2.0 * math.pi * np.sum(k * np.einsum("kd,kd->k", loop.a @ J.T, loop.b)))


def loop_action_quadrature(loop: LoopPath, n_nodes: Optional[int] = None) -> float:
    """Action by trapezoid quadrature of <J z, z'>; cross-checks the closed form."""
    N = n_nodes or max(64, 32 * loop.modes)
    ts = 2.0 * math.pi * np.arange(N) / N
    z = loop.position(ts)
    dz = loop.velocity(ts)
    J = standard_j(loop.n)
    return float(np.einsum("td,td->t", z @ J.T, dz).mean() * 2.0 * math.pi)


def loop_cost(body: SupportBody, loop: LoopPath, n_nodes: Optional[int] = None) -> float:
    """Support cost by trapezoid quadrature at >= 32 * modes equispaced nodes."""
    if body.dim != 2 * loop.n:
        raise BodyError(f"body dimension {body.dim} != loop dimension {2 * loop.n}")
    N = n_nodes or max(64, 32 * loop.modes)
    if N < 32 * loop.modes:
        raise ValueError(f"need at least {32 * loop.modes} quadrature nodes, got {N}")
    ts = 2.0 * math.pi * np.arange(N) / N
    return float(np.mean(body.support(loop.velocity(ts))) * 2.0 * math.pi)


@dataclass(frozen=True)
class CapacityResult:
    """Outcome of the loop minimization for one body."""

    raw: Estimate           # minimized support cost; upper bound semantics
    normalized: Estimate    # (raw / ball raw)^2, ball-calibrated
    modes: int
    starts: int
    converged: bool
    loop: LoopPath
    label: str = ""


# ---------------------------------------------------------------------------
# Optimizer.  Variables are the stacked coefficient array z = [a; b], shape
# (2K, 2n).  The action constraint is handled by an augmented Lagrangian with
# gradient-descent inner steps and backtracking line search; h-subgradients
# stand in for the gradient where the support function has edges.
# ---------------------------------------------------------------------------

class _LoopProblem:
    def __init__(self, body: SupportBody, n: int, modes: int, n_nodes: int):
        self.body = body
        self.n = n
        self.modes = modes
        self.N = n_nodes
        ts = 2.0 * math.pi * np.arange(n_nodes) / n_nodes
        k = np.arange(1, modes + 1)[:, None]
        self.dcos = -k * np.sin(k * ts)   # (K, N): d/dt of cos(kt)
        self.dsin = k * np.cos(k * ts)    # (K, N): d/dt of sin(kt)
        self.J = standard_j(n)
        self.kvec = np.arange(1, modes + 1, dtype=float)

    def velocity(self, z: Array) -> Array:
        a, b = z[: self.modes], z[self.modes:]
        return self.dcos.T @ a + self.dsin.T @ b

    def cost(self, z: Array) -> float:
        return float(np.mean(self.body.support(self.velocity(z))) * 2.0 * math.pi)

    def cost_grad(self, z: Array) -> tuple[float, Array]:
        dz = self.velocity(z)
        vals = self.body.support(dz)
        g = self.body.support_gradient(dz)        # (N, 2n)
        w = 2.0 * math.pi / self.N
        ga = w * (self.dcos @ g)
        gb = w * (self.dsin @ g)
        return float(vals.mean() * 2.0 * math.pi), np.vstack([ga, gb])

    def action(self, z: Array) -> float:
        a, b = z[: self.modes], z[self.modes:]
        return float(2.0 * math.pi * np.sum(self.kvec * np.einsum("kd,kd->k", a @ self.J.T, b)))

    def action_grad(self, z: Array) -> Array:
        a, b = z[: self.modes], z[self.modes:]
        ga = -2.0 * math.pi * self.kvec[:, None] * (b @ self.J.T)
        gb = 2.0 * math.pi * self.kvec[:, None] * (a @ self.J.T)
        return np.vstack([ga, gb])


def _minimize_one(prob: _LoopProblem, z0: Array, outer: int, inner: int) -> tuple[Array, float, bool]:
    """Augmented Lagrangian descent from one start.  Returns (z, |A-2|, ok)."""
    z = z0.copy()
    lam = 0.0
    mu = 10.0
    gap_prev = abs(prob.action(z) - 2.0)
    step = 0.1
    for _ in range(outer):
        for _ in range(inner):
            A = prob.action(z)
            L, gL = prob.cost_grad(z)
            gA = prob.action_grad(z)
            factor = -lam + mu * (A - 2.0)
            g = gL + factor * gA
            gnorm = float(np.linalg.norm(g))
            if gnorm <= 1e-9 * (1.0 + abs(L)):
                break
            phi0 = L - lam * (A - 2.0) + 0.5 * mu * (A - 2.0) ** 2
            # backtracking with a gentle Armijo slope
            alpha = step
            accepted = False
            for _ in range(40):
                zt = z - alpha * g
                At = prob.action(zt)
                phit = prob.cost(zt) - lam * (At - 2.0) + 0.5 * mu * (At - 2.0) ** 2
                if phit <= phi0 - 1e-4 * alpha * gnorm * gnorm:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            z = zt
            step = min(alpha * 2.0, 1.0)
        A = prob.action(z)
        lam -= mu * (A - 2.0)
        gap = abs(A - 2.0)
        if gap > 0.25 * gap_prev:
            mu *= 4.0
        gap_prev = gap
        if gap <= 1e-10:
            break
    gap = abs(prob.action(z) - 2.0)
    return z, gap, gap <= 1e-5


def _starts(n: int, modes: int, starts: int, seed: int) -> list[Array]:
    """Planar action-2 circles in each symplectic plane, then seeded perturbations."""
    r = 1.0 / math.sqrt(math.pi)
    base = []
    for j in range(n):
        z = np.zeros((2 * modes, 2 * n))
        z[0, j] = r               # a_1 along e_j
        z[modes, n + j] = r       # b_1 along f_j
        base.append(z)
    out = []
    for s in range(starts):
        z = base[s % n].copy()
        if s >= n:
            rng = np.random.default_rng(np.random.SeedSequence((seed, _START_NS, s)))
            k = np.arange(1, modes + 1, dtype=float)
            noise_scale = 0.25 * r / np.concatenate([k, k])[:, None] ** 2
            z = z + noise_scale * rng.standard_normal(z.shape)
        out.append(z)
    return out


def _raw_minimum(
    body: SupportBody, modes: int, starts: int, seed: int, n_nodes: int, outer: int, inner: int
) -> tuple[float, LoopPath, bool]:
    n = body.dim // 2
    prob = _LoopProblem(body, n, modes, n_nodes)
    best_val = math.inf
    best_loop = None
    any_ok = False
    for z0 in _starts(n, modes, starts, seed):
        z, _, ok = _minimize_one(prob, z0, outer, inner)
        A = prob.action(z)
        if A <= 1e-6:
            continue  # degenerate start; cannot be rescaled onto the constraint
        z = z * math.sqrt(2.0 / A)  # exact feasibility, preserving upper-bound semantics
        val = prob.cost(z)
        any_ok = any_ok or ok
        if val < best_val:
            best_val = val
            best_loop = LoopPath(n=n, a=z[:modes].copy(), b=z[modes:].copy())
    if best_loop is None:
        raise RuntimeError(f"{body.label}: all capacity starts degenerated")
    return best_val, best_loop, any_ok


def _ball_calibration(n: int, modes: int, starts: int, seed: int, n_nodes: int, outer: int, inner: int) -> float:
    key = (n, modes, starts, seed, n_nodes, outer, inner)
    if key not in _CAL_CACHE:
        val, _, _ = _raw_minimum(ball(n), modes, starts, seed, n_nodes, outer, inner)
        _CAL_CACHE[key] = val
    return _CAL_CACHE[key]


def eh_capacity_estimate(
    body: SupportBody,
    modes: int = 8,
    starts: int = 8,
    seed: int = 0,
    n_nodes: Optional[int] = None,
    outer: int = 10,
    inner: int = 200,
) -> CapacityResult:
    """Upper estimate of the capacity of `body` by Fourier loop descent.

    Returns both the raw minimized cost and the ball-calibrated capacity.
    The quoted standard errors are optimizer tolerance proxies, not
    statistical errors.
    """
    if modes < 1:
        raise ValueError(f"need at least one mode, got {modes}")
    if starts < 1:
        raise ValueError(f"need at least one start, got {starts}")
    n = body.dim // 2
    N = n_nodes or max(64, 32 * modes)
    if N < 32 * modes:
        raise ValueError(f"need at least {32 * modes} quadrature nodes, got {N}")

    v, best_loop, ok = _raw_minimum(body, modes, starts, seed, N, outer, inner)
    v_ball = _ball_calibration(n, modes, starts, seed, N, outer, inner)
    c = (v / v_ball) ** 2
    raw = Estimate(value=v, std_error=_OPT_REL_TOL * v, count=starts)
    normalized = Estimate(value=c, std_error=2.0 * c * _OPT_REL_TOL, count=starts)
    return CapacityResult(
        raw=raw,
        normalized=normalized,
        modes=modes,
        starts=starts,
        converged=ok,
        loop=best_loop,
        label=body.label,
    )


# ---------------------------------------------------------------------------
# Inequality suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityRow:
    label: str
    capacity: float
    capacity_err: float
    mean_width: float
    mean_width_err: float
    width_bound: float        # (M/2)^2
    width_bound_err: float
    width_ok: bool            # c <= (M/2)^2 within 3 combined errors
    volume_radius_sq: Optional[float]   # (Vol/kappa)^(1/n), when volume is known
    viterbo_ok: Optional[bool]


@dataclass(frozen=True)
class PairRow:
    label: str
    lhs: float    # sqrt(c(K1 + K2))
    rhs: float    # sqrt(c(K1)) + sqrt(c(K2))
    tol: float
    ok: bool      # lhs >= rhs - tol (superadditivity, soft)


@dataclass(frozen=True)
class InequalityReport:
    rows: tuple[InequalityRow, ...]
    pairs: tuple[PairRow, ...]
    # one (dim, sqrt(c), volume radius, ok) entry per dimension in the catalog
    near_ball: tuple[tuple[int, float, float, bool], ...]

    @property
    def all_ok(self) -> bool:
        # the volume-ratio column is informational: the estimator's upper
        # bias shows through wherever that inequality is near equality
        fine = all(r.width_ok for r in self.rows)
        fine = fine and all(p.ok for p in self.pairs)
        fine = fine and all(entry[3] for entry in self.near_ball)
        return fine


def inequality_suite(
    bodies: dict[str, SupportBody],
    pairs: Optional[Sequence[tuple[str, str]]] = None,
    modes: int = 8,
    starts: int = 8,
    seed: int = 0,
    samples: int = 200_000,
    near_ball_eps: float = 0.1,
    capacities: Optional[dict[str, CapacityResult]] = None,
) -> InequalityReport:
    """Check c <= (M/2)^2 per body, superadditivity on pairs, and a near-ball bound.

    All capacity numbers are upper estimates, so a failed soft inequality
    may reflect estimator overshoot; tolerances carry 3 combined errors.
    """
    from .bodies import cube, minkowski_sum, scale_body

    def cap(b: SupportBody) -> CapacityResult:
        return eh_capacity_estimate(b, modes=modes, starts=starts, seed=seed)

    rows = []
    caps: dict[str, CapacityResult] = {}
    for name, body in bodies.items():
        res = (capacities or {}).get(name) or cap(body)
        caps[name] = res
        sampler = SphereSampler(dim=body.dim, seed=seed, count=samples)
        mw = mean_width(body, sampler)
        bound = (mw.value / 2.0) ** 2
        bound_err = mw.value * mw.std_error / 2.0
        c, c_err = res.normalized.value, res.normalized.std_error
        tol = 3.0 * math.sqrt(c_err**2 + bound_err**2)
        vol_term = None
        vit_ok = None
        if body.volume is not None:
            vol_term = (body.volume / ball_volume(body.dim)) ** (2.0 / body.dim)
            vit_ok = bool(c <= vol_term + 3.0 * c_err)
        rows.append(
            InequalityRow(
                label=body.label,
                capacity=c,
                capacity_err=c_err,
                mean_width=mw.value,
                mean_width_err=mw.std_error,
                width_bound=bound,
                width_bound_err=bound_err,
                width_ok=bool(c <= bound + tol),
                volume_radius_sq=vol_term,
                viterbo_ok=vit_ok,
            )
        )

    pair_rows = []
    for na, nb in pairs or []:
        ka, kb = bodies[na], bodies[nb]
        summed = minkowski_sum(ka, kb)
        cs = cap(summed).normalized
        ca = caps.get(na) or cap(ka)
        cb = caps.get(nb) or cap(kb)
        caps.setdefault(na, ca)
        caps.setdefault(nb, cb)
        lhs = math.sqrt(cs.value)
        rhs = math.sqrt(ca.normalized.value) + math.sqrt(cb.normalized.value)
        tol = 3.0 * (
            0.5 * cs.std_error / max(lhs, 1e-12)
            + 0.5 * ca.normalized.std_error / max(math.sqrt(ca.normalized.value), 1e-12)
            + 0.5 * cb.normalized.std_error / max(math.sqrt(cb.normalized.value), 1e-12)
        )
        pair_rows.append(
            PairRow(label=f"{na} + {nb}", lhs=lhs, rhs=rhs, tol=tol, ok=bool(lhs >= rhs - tol))
        )

    near = []
    if near_ball_eps and bodies:
        for dim in sorted({b.dim for b in bodies.values()}):
            n = dim // 2
            k_cube = cube(n)
            near_body = minkowski_sum(ball(n), scale_body(k_cube, near_ball_eps))
            c_near = cap(near_body).normalized
            vol = volume_sum_ball(k_cube, near_ball_eps, budget=samples, seed=seed, node_tag=4242)
            radius = (vol.value / ball_volume(dim)) ** (1.0 / dim)
            radius_err = radius * vol.std_error / (dim * vol.value)
            sqrt_c = math.sqrt(c_near.value)
            sqrt_c_err = 0.5 * c_near.std_error / max(sqrt_c, 1e-12)
            ok = bool(sqrt_c <= radius + 3.0 * math.sqrt(sqrt_c_err**2 + radius_err**2))
            near.append((dim, sqrt_c, radius, ok))

    return InequalityReport(rows=tuple(rows), pairs=tuple(pair_rows), near_ball=tuple(near))
