"""Outer-parallel volumes, quermassintegral fits, and the F comparison curves.

Volume(ball + t K) is a polynomial in t whose coefficients carry the
quermassintegrals:
    Volume(B + tK) = sum_i binom(2n, i) W_i(K) t^(2n - i),
so W_0 = Volume(K), W_2n = kappa_2n, and the mean width sits in the top
mixed coefficient: W_{2n-1} = kappa_2n * M(K) / 2.  We estimate volumes
by box Monte Carlo at Chebyshev nodes and recover the W_i by weighted
least squares.

Normalized quermassintegrals Wbar_i = (W_i / kappa_2n)^(1/(2n-i)) are
monotone in i for convex bodies, which brackets the capacity question:
the i = 0 power is the volume radius, the i = 2n-1 power is half the
mean width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bodies import BodyError, SupportBody, ball_volume_of_dim
from .sphere import Estimate

Array = np.ndarray

_VOL_NS = 29
_VOL_CHUNK = 1 << 18


class FitError(RuntimeError):
    """Raised when the Steiner fit is unusable."""


def ball_volume(d: int) -> float:
    """Volume kappa_d of the unit ball in R^d."""
    return ball_volume_of_dim(d)


def volume_sum_ball(
    body: SupportBody,
    t: float,
    budget: int = 400_000,
    seed: int = 0,
    node_tag: int = 0,
) -> Estimate:
    """Monte Carlo volume of B + t * body, via the body's distance oracle.

    Membership: x lies in B + tK iff dist(x, tK) <= 1, and dist(x, tK)
    = t * dist(x / t, K).  Points are drawn uniformly from the box with
    per-axis half-width 1 + t * circumradius.
    """
    if body.distance is None:
        raise BodyError(f"{body.label}: volume estimation needs a distance oracle")
    if body.circumradius is None:
        raise BodyError(f"{body.label}: volume estimation needs a circumradius bound")
    if t < 0:
        raise ValueError(f"need t >= 0, got {t}")
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    dim = body.dim
    half = 1.0 + t * body.circumradius
    box_vol = (2.0 * half) ** dim

    hits = 0
    done = 0
    chunk_idx = 0
    while done < budget:
        m = min(_VOL_CHUNK, budget - done)
        rng = np.random.default_rng(np.random.SeedSequence((seed, _VOL_NS, node_tag, chunk_idx)))
        X = rng.uniform(-half, half, size=(m, dim))
        if t == 0.0:
            inside = np.linalg.norm(X, axis=1) <= 1.0
        else:
            inside = np.asarray(body.distance(X / t)) * t <= 1.0
        hits += int(inside.sum())
        done += m
        chunk_idx += 1

    p = hits / budget
    se = box_vol * math.sqrt(max(p * (1.0 - p), 0.0) / budget)
    return Estimate(value=box_vol * p, std_error=max(se, box_vol / budget), count=budget)


@dataclass(frozen=True)
class SteinerFit:
    """Least-squares fit of Volume(B + tK) and the quermassintegrals it yields."""

    n: int
    t_max: float
    node_ts: Array
    node_volumes: tuple[Estimate, ...]
    coeffs: Array          # c_j multiplies t^j, j = 0..2n
    coeff_err: Array
    W: Array               # W_i, i = 0..2n
    W_err: Array
    residual: float        # rms of weighted residuals (approx 1 when noise-limited)
    condition: float
    label: str = ""

    def volume_poly(self, t) -> Array:
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.coeffs)

    def wbar(self, i: int) -> tuple[float, float]:
        """Normalized quermassintegral Wbar_i and its propagated error."""
        d = 2 * self.n
        if not 0 <= i <= d - 1:
            raise ValueError(f"index {i} outside 0..{d - 1}")
        kap = ball_volume(d)
        w = self.W[i]
        if w <= 0:
            raise FitError(f"W_{i} fit non-positive ({w:.3g}); raise the volume budget")
        power = 1.0 / (d - i)
        val = (w / kap) ** power
        err = val * power * self.W_err[i] / w
        return val, err

    def mean_width(self) -> tuple[float, float]:
        """M = 2 W_{2n-1} / kappa_2n, with propagated error."""
        d = 2 * self.n
        kap = ball_volume(d)
        return 2.0 * self.W[d - 1] / kap, 2.0 * self.W_err[d - 1] / kap


def steiner_fit(
    body: SupportBody,
    t_max: float = 2.0,
    nodes: int = 12,
    budget: int = 400_000,
    seed: int = 0,
    max_node_budget: int = 4_000_000,
    common_noise: bool = True,
) -> SteinerFit:
    """Fit the outer-parallel volume polynomial on Chebyshev nodes in [0, t_max].

    Per-node budgets are scaled from a pilot run so the relative volume
    error stays roughly constant as the box grows with t.

    With common_noise the nodes reuse the same uniform draws (scaled to
    each node's box), so the noise is strongly correlated across t and
    mostly cancels in the coefficient solve.  Quoted errors still treat
    the nodes as independent, which makes them conservative.
    """
    d = body.dim
    if nodes < d + 1:
        raise FitError(f"need at least {d + 1} nodes for degree {d}, got {nodes}")
    if t_max <= 0:
        raise ValueError(f"need t_max > 0, got {t_max}")

    # Chebyshev-Lobatto nodes including both endpoints
    ks = np.arange(nodes)
    ts = 0.5 * t_max * (1.0 - np.cos(math.pi * ks / (nodes - 1)))

    # pilot hit rates decide how to split the budget across nodes
    pilot = max(4000, budget // 50)
    rates = []
    for j, t in enumerate(ts):
        est = volume_sum_ball(body, float(t), budget=pilot, seed=seed, node_tag=1000 + j)
        half = 1.0 + t * body.circumradius
        rates.append(max(est.value / (2.0 * half) ** d, 1.0 / pilot))
    rates = np.asarray(rates)
    node_budgets = np.clip((budget * rates[0] / rates).astype(int), budget // 2, max_node_budget)

    ests = tuple(
        volume_sum_ball(
            body, float(t), budget=int(nb), seed=seed,
            node_tag=0 if common_noise else j,
        )
        for j, (t, nb) in enumerate(zip(ts, node_budgets))
    )
    vals = np.array([e.value for e in ests])
    sig = np.array([e.std_error for e in ests])

    # weighted least squares in the monomial basis
    V = np.vander(ts, N=d + 1, increasing=True)
    A = V / sig[:, None]
    y = vals / sig
    cond = float(np.linalg.cond(A))
    if cond > 1e10:
        raise FitError(
            f"fit condition number {cond:.2g} too large; lower the degree or raise the budget"
        )
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    coeff_err = np.sqrt(np.diag(cov))
    resid = A @ coef - y
    dof = max(1, nodes - (d + 1))
    residual = float(np.sqrt(resid @ resid / dof))

    # c_j multiplies t^j and equals binom(2n, 2n-j) W_{2n-j}: W_i = c_{2n-i}/binom(2n,i)
    binom = np.array([math.comb(d, i) for i in range(d + 1)])
    W = coef[::-1] / binom
    W_err = coeff_err[::-1] / binom
    return SteinerFit(
        n=d // 2,
        t_max=t_max,
        node_ts=ts,
        node_volumes=ests,
        coeffs=coef,
        coeff_err=coeff_err,
        W=W,
        W_err=W_err,
        residual=residual,
        condition=cond,
        label=body.label,
    )


def meanwidth_from_quermass(fit: SteinerFit) -> tuple[float, float]:
    """Mean width recovered from the top mixed coefficient of the fit."""
    return fit.mean_width()


@dataclass(frozen=True)
class FTable:
    """The comparison curves F and Ftilde on a t grid, plus the slope check at 0.

    F(t) = sqrt(c(B + tK)) / (Vol(B + tK)/kappa)^(1/2n) compares capacity
    with the volume radius along outer-parallel bodies; Ftilde replaces the
    numerator with 1 + t sqrt(c(K)), a lower bound by capacity
    superadditivity.  Ftilde'(0+) <= 0 is equivalent to
    sqrt(c(K)) <= M(K)/2.
    """

    label: str
    t: Array
    F: Array
    F_err: Array
    Ftilde: Array
    Ftilde_err: Array
    volumes: tuple[Estimate, ...]
    c_body: float
    c_body_err: float
    slope_fd: float          # finite differences of Ftilde at 0+, on the fitted volume
    slope_closed: float      # sqrt(c(K)) - M(K)/2 with M from the Steiner fit
    fit: SteinerFit


def f_functions(
    body: SupportBody,
    estimator: Callable[[SupportBody], "object"],
    t_grid: Optional[Sequence[float]] = None,
    budget: int = 400_000,
    seed: int = 0,
    fit: Optional[SteinerFit] = None,
) -> FTable:
    """Tabulate F and Ftilde for one body.

    `estimator` maps a body to a CapacityResult (anything with a
    `.normalized` Estimate).  Grid volumes are fresh Monte Carlo
    estimates; the derivative at 0 uses the smooth fitted polynomial,
    where finite differences are well conditioned.
    """
    from .bodies import ball, minkowski_sum, scale_body  # local to avoid cycles

    d = body.dim
    kap = ball_volume(d)
    if t_grid is None:
        t_grid = np.linspace(0.0, 2.0, 10)
    ts = np.asarray(list(t_grid), dtype=float)
    if np.any(ts < 0):
        raise ValueError("t grid must be nonnegative")

    if fit is None:
        fit = steiner_fit(body, t_max=max(ts.max(), 1.0), budget=budget, seed=seed)

    c_res = estimator(body)
    c_body = c_res.normalized.value
    c_body_err = c_res.normalized.std_error
    sqrt_c = math.sqrt(c_body)

    unit = ball(d // 2)
    vols = []
    F = np.zeros(len(ts))
    F_err = np.zeros(len(ts))
    Ft = np.zeros(len(ts))
    Ft_err = np.zeros(len(ts))
    for j, t in enumerate(ts):
        vol = volume_sum_ball(body, float(t), budget=budget, seed=seed, node_tag=7000 + j)
        vols.append(vol)
        denom = (vol.value / kap) ** (1.0 / d)
        dden = denom * vol.std_error / (d * vol.value)
        summed = unit if t == 0 else minkowski_sum(unit, scale_body(body, float(t)))
        c_sum = estimator(summed)
        F[j] = math.sqrt(c_sum.normalized.value) / denom
        F_err[j] = F[j] * math.sqrt(
            (0.5 * c_sum.normalized.std_error / c_sum.normalized.value) ** 2
            + (dden / denom) ** 2
        )
        Ft[j] = (1.0 + t * sqrt_c) / denom
        Ft_err[j] = Ft[j] * math.sqrt(
            ((t * 0.5 * c_body_err / sqrt_c) / (1.0 + t * sqrt_c)) ** 2 + (dden / denom) ** 2
        )

    # right slope of Ftilde at 0 on the fitted (smooth) volume polynomial
    def ftilde_fit(t):
        return (1.0 + t * sqrt_c) / (fit.volume_poly(t) / kap) ** (1.0 / d)

    h = 1e-3
    d1 = (ftilde_fit(h) - ftilde_fit(0.0)) / h
    d2 = (ftilde_fit(h / 2) - ftilde_fit(0.0)) / (h / 2)
    slope_fd = float(2.0 * d2 - d1)  # Richardson for the one-sided difference
    m_fit, _ = fit.mean_width()
    slope_closed = sqrt_c - 0.5 * m_fit

    return FTable(
        label=body.label,
        t=ts,
        F=F,
        F_err=F_err,
        Ftilde=Ft,
        Ftilde_err=Ft_err,
        volumes=tuple(vols),
        c_body=c_body,
        c_body_err=c_body_err,
        slope_fd=slope_fd,
        slope_closed=slope_closed,
        fit=fit,
    )


@dataclass(frozen=True)
class ScanRow:
    label: str
    capacity: float
    capacity_err: float
    wbar_sq: Array            # (Wbar_i)^2 for i = 0..2n-1
    wbar_sq_err: Array
    holds: Array              # capacity <= (Wbar_i)^2 within 3 combined errors
    chain_ok: bool            # Wbar_i nondecreasing within 3 combined errors


def quermass_capacity_scan(
    bodies: dict[str, SupportBody],
    estimator: Callable[[SupportBody], "object"],
    budget: int = 400_000,
    seed: int = 0,
    fits: Optional[dict[str, SteinerFit]] = None,
) -> list[ScanRow]:
    """For each body: capacity against every normalized quermassintegral power.

    Reports which intermediate powers dominate the capacity estimate; the
    i = 2n-1 column is the mean-width bound, i = 0 the volume radius.
    """
    rows = []
    for name, body in bodies.items():
        if body.distance is None:
            raise BodyError(f"{name}: scan needs bodies with distance oracles")
        d = body.dim
        fit = (fits or {}).get(name) or steiner_fit(body, budget=budget, seed=seed)
        c_res = estimator(body)
        c, c_err = c_res.normalized.value, c_res.normalized.std_error
        wb = np.zeros(d)
        wb_err = np.zeros(d)
        for i in range(d):
            wb[i], wb_err[i] = fit.wbar(i)
        holds = c <= wb**2 + 3.0 * np.sqrt((2 * wb * wb_err) ** 2 + c_err**2)
        gaps = np.diff(wb)
        gap_err = np.sqrt(wb_err[1:] ** 2 + wb_err[:-1] ** 2)
        chain_ok = bool(np.all(gaps >= -3.0 * gap_err))
        rows.append(
            ScanRow(
                label=body.label,
                capacity=c,
                capacity_err=c_err,
                wbar_sq=wb**2,
                wbar_sq_err=2 * wb * wb_err,
                holds=holds,
                chain_ok=chain_ok,
            )
        )
    return rows
