"""Acceptance suite: one runnable check per headline claim.

Each criterion is a small function returning pass/fail plus a detail
line with the observed numbers and the tolerance it was held to.  The
context object pins seeds, sample counts, and fit budgets, and caches
the expensive intermediates (Steiner fits, capacity estimates) that
several criteria share.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from threading import Lock
from typing import Callable, Optional

import numpy as np

from . import bodies, capacity, experiments, steiner, symplectic
from .bodies import SupportBody
from .sphere import SphereSampler, mean_width, mean_width_2d

RAW_BALL_TARGET = 2.0 * math.sqrt(math.pi)
SQUARE_WIDTH = 8.0 / math.pi
BIDISK_WIDTH = 8.0 / 3.0

# dim -> (budget, max_node_budget); four-dimensional boxes waste more
# samples, so they get a bigger slice
FIT_BUDGETS = {2: (400_000, 4_000_000), 4: (8_000_000, 24_000_000)}

PAIR_NAMES = (
    ("ball2", "square"),
    ("ball2", "ellipse_2_1"),
    ("square", "rect_1_2"),
    ("ball4", "cube4"),
    ("polydisk_1_1", "bidisk"),
    ("ball4", "bidisk"),
)

BALL_PRODUCT_NAMES = (
    "square",
    "rect_1_2",
    "cube4",
    "polydisk_1_1",
    "polydisk_1_2",
    "bidisk",
    "square_disk",
)


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    details: str
    seconds: float = 0.0


class VerifyContext:
    """Pinned settings plus shared caches for the criteria."""

    def __init__(
        self,
        seed: int = 7,
        samples: int = 200_000,
        modes: int = 8,
        starts: int = 8,
    ):
        self.seed = seed
        self.samples = samples
        self.modes = modes
        self.starts = starts
        self.catalog = bodies.standard_bodies()
        self._lock = Lock()
        self._samplers: dict[int, SphereSampler] = {}
        self._fits: dict[str, steiner.SteinerFit] = {}
        self._caps: dict[str, capacity.CapacityResult] = {}

    def sampler(self, dim: int) -> SphereSampler:
        with self._lock:
            if dim not in self._samplers:
                self._samplers[dim] = SphereSampler(dim=dim, seed=self.seed, count=self.samples)
            return self._samplers[dim]

    def fit(self, name: str) -> steiner.SteinerFit:
        with self._lock:
            cached = self._fits.get(name)
        if cached is not None:
            return cached
        body = self.catalog[name]
        budget, cap = FIT_BUDGETS[body.dim]
        fit = steiner.steiner_fit(
            body, t_max=2.0, nodes=12, budget=budget, seed=self.seed, max_node_budget=cap
        )
        with self._lock:
            self._fits[name] = fit
        return fit

    def cap(self, body: SupportBody, key: Optional[str] = None) -> capacity.CapacityResult:
        key = key or body.label
        with self._lock:
            cached = self._caps.get(key)
        if cached is not None:
            return cached
        res = capacity.eh_capacity_estimate(
            body, modes=self.modes, starts=self.starts, seed=self.seed
        )
        with self._lock:
            self._caps[key] = res
        return res


def _fmt(x: float, digits: int = 5) -> str:
    return f"{x:.{digits}g}"


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def _c01_mean_width_basics(ctx: VerifyContext) -> tuple[bool, str]:
    parts = []
    ok = True
    for name in ("ball2", "ball4"):
        body = ctx.catalog[name]
        est = mean_width(body, ctx.sampler(body.dim))
        exact = est.value == 2.0 and est.std_error == 0.0
        ok &= exact
        parts.append(f"{name} M={est.value!r} se={est.std_error!r} exact={exact}")
    quad = mean_width_2d(ctx.catalog["square"])
    quad_ok = abs(quad - SQUARE_WIDTH) <= 1e-9
    ok &= quad_ok
    parts.append(f"square quad |err|={_fmt(abs(quad - SQUARE_WIDTH), 3)} (tol 1e-9)")
    mc = mean_width(ctx.catalog["square"], ctx.sampler(2))
    mc_ok = abs(mc.value - SQUARE_WIDTH) <= 0.01
    ok &= mc_ok
    parts.append(f"square MC |err|={_fmt(abs(mc.value - SQUARE_WIDTH), 3)} (tol 0.01)")
    return ok, "; ".join(parts)


def _c02_lagrangian_bidisk_width(ctx: VerifyContext) -> tuple[bool, str]:
    est = mean_width(ctx.catalog["bidisk"], ctx.sampler(4))
    err = abs(est.value - BIDISK_WIDTH)
    return err <= 0.02, f"M={est.value:.5f} vs 8/3={BIDISK_WIDTH:.5f}, |err|={_fmt(err, 3)} (tol 0.02)"


def _c03_steiner_coefficients(ctx: VerifyContext) -> tuple[bool, str]:
    parts = []
    ok = True
    for name in ("ball2", "ball4"):
        fit = ctx.fit(name)
        kap = steiner.ball_volume(ctx.catalog[name].dim)
        rel = float(np.max(np.abs(fit.W - kap) / kap))
        good = rel <= 0.02
        ok &= good
        parts.append(f"{name} max relW err {_fmt(rel, 3)}")
    for name in BALL_PRODUCT_NAMES:
        body = ctx.catalog[name]
        fit = ctx.fit(name)
        rel = abs(fit.W[0] - body.volume) / body.volume
        good = rel <= 0.02
        ok &= good
        parts.append(f"{name} W0 err {_fmt(rel, 3)}")
    bad_quer = []
    for name, body in ctx.catalog.items():
        fit = ctx.fit(name)
        m_fit, m_err = fit.mean_width()
        if body.dim == 2:
            ref, ref_err = mean_width_2d(body), 0.0
        else:
            est = mean_width(body, ctx.sampler(body.dim))
            ref, ref_err = est.value, est.std_error
        if abs(m_fit - ref) > 3.0 * math.hypot(m_err, ref_err):
            bad_quer.append(name)
    ok &= not bad_quer
    parts.append("quer vs width ok" if not bad_quer else f"quer mismatch: {bad_quer}")
    return ok, "; ".join(parts) + " (tol 2% / 3 errors)"


def _c04_normalized_chain(ctx: VerifyContext) -> tuple[bool, str]:
    worst_name, worst = "", -math.inf
    ok = True
    for name, body in ctx.catalog.items():
        fit = ctx.fit(name)
        for i in range(body.dim - 1):
            v0, e0 = fit.wbar(i)
            v1, e1 = fit.wbar(i + 1)
            slack = (v0 - v1) / max(math.hypot(e0, e1), 1e-300)
            if slack > worst:
                worst_name, worst = f"{name}[{i}]", slack
            if v0 - v1 > 3.0 * math.hypot(e0, e1):
                ok = False
    return ok, f"chain nondecreasing within 3 errors; tightest margin {worst_name} at {worst:.2f} sigma"


def _c05_capacity_baselines(ctx: VerifyContext) -> tuple[bool, str]:
    ball = ctx.catalog["ball2"]
    res = ctx.cap(ball, "ball2")
    raw_rel = abs(res.raw.value - RAW_BALL_TARGET) / RAW_BALL_TARGET
    norm_dev = abs(res.normalized.value - 1.0)
    poly = ctx.cap(ctx.catalog["polydisk_1_2"], "polydisk_1_2")
    poly_rel = abs(poly.normalized.value - 1.0)
    scaled = ctx.cap(bodies.scale_body(ball, 1.5), "ball2*1.5")
    scale_rel = abs(scaled.normalized.value / 2.25 - 1.0)
    ok = raw_rel <= 0.01 and norm_dev <= 1e-12 and poly_rel <= 0.05 and scale_rel <= 1e-9
    return ok, (
        f"raw ball {res.raw.value:.6f} vs {RAW_BALL_TARGET:.6f} rel {_fmt(raw_rel, 3)} (tol 1%); "
        f"c(ball)-1 = {_fmt(norm_dev, 3)}; c(polydisk(1,2)) dev {_fmt(poly_rel, 3)} (tol 5%); "
        f"c(1.5 ball)/2.25 dev {_fmt(scale_rel, 3)} (tol 1e-9)"
    )


def _c06_inequality_suite(ctx: VerifyContext) -> tuple[bool, str]:
    caps = {name: ctx.cap(body, name) for name, body in ctx.catalog.items()}
    rep = capacity.inequality_suite(
        ctx.catalog,
        pairs=PAIR_NAMES,
        modes=ctx.modes,
        starts=ctx.starts,
        seed=ctx.seed,
        samples=ctx.samples,
        capacities=caps,
    )
    eq_ok = True
    for name in ("ball2", "ball4"):
        row = next(r for r in rep.rows if r.label == ctx.catalog[name].label)
        tol = 3.0 * math.hypot(row.capacity_err, row.width_bound_err)
        eq_ok &= abs(row.capacity - row.width_bound) <= tol
    width_ok = all(r.width_ok for r in rep.rows)
    pairs_ok = len(rep.pairs) >= 5 and all(p.ok for p in rep.pairs)
    near_ok = all(entry[3] for entry in rep.near_ball)
    ok = width_ok and pairs_ok and near_ok and eq_ok
    min_slack = min(r.width_bound - r.capacity for r in rep.rows)
    return ok, (
        f"width bound ok={width_ok} (min slack {_fmt(min_slack, 3)}); ball equality ok={eq_ok}; "
        f"superadditivity {sum(p.ok for p in rep.pairs)}/{len(rep.pairs)} pairs; near-ball ok={near_ok}"
    )


def _c07_f_curves(ctx: VerifyContext) -> tuple[bool, str]:
    square = ctx.catalog["square"]
    tab = steiner.f_functions(
        square,
        lambda b: ctx.cap(b),
        t_grid=np.linspace(0.0, 2.0, 10),
        budget=ctx.samples,
        seed=ctx.seed,
        fit=ctx.fit("square"),
    )
    margins = tab.F - tab.Ftilde
    tols = 3.0 * np.hypot(tab.F_err, tab.Ftilde_err)
    below = bool(np.all(margins >= -tols))
    rel = abs(tab.slope_fd - tab.slope_closed) / abs(tab.slope_closed)
    ok = below and rel <= 0.02
    return ok, (
        f"Ftilde <= F at 10/10 nodes (min margin {_fmt(float(margins.min()), 3)}); "
        f"slope fd {tab.slope_fd:.6f} vs closed {tab.slope_closed:.6f}, rel {_fmt(rel, 3)} (tol 2%)"
    )


def _c08_local_minimality(ctx: VerifyContext) -> tuple[bool, str]:
    parts = []
    ok = True
    for name, spec in (("bidisk", bodies.bidisk_spec()), ("square_disk", bodies.square_disk_spec())):
        rep = symplectic.verify_local_min(spec, directions=20, seed=ctx.seed)
        ok &= rep.passed
        worst = max(abs(c.first.value) / max(c.first.std_error, 1e-300) for c in rep.checks)
        fmin = min(c.second.value for c in rep.checks)
        parts.append(f"{name} {'PASS' if rep.passed else 'FAIL'} (max|z| {worst:.2f}, min f'' {fmin:.2f})")
    segs = bodies.BallProductSpec(n=1, radii=(1.0, 2.0), I=((1,), ()), J=((), (1,)))
    rep = symplectic.verify_local_min(segs, directions=20, seed=ctx.seed)
    witness_ok = (not rep.passed) and rep.witness is not None
    ok &= witness_ok
    if rep.witness:
        parts.append(
            f"segment product FAIL with witness f'={rep.witness['value']:.4f}"
            f"+-{rep.witness['std_error']:.1e}"
        )
    else:
        parts.append("segment product missing descent witness")
    return ok, "; ".join(parts)


def _c09_planar_minimality(ctx: VerifyContext) -> tuple[bool, str]:
    disk = experiments.green_test(ctx.catalog["ball2"])
    square = experiments.green_test(ctx.catalog["square"])
    ellipse = experiments.green_test(ctx.catalog["ellipse_2_1"])
    res = symplectic.local_search(ctx.catalog["ellipse_2_1"])
    target = 2.0 * math.sqrt(2.0)
    drift = abs(res.value - target)
    ok = disk.minimal and square.minimal and not ellipse.minimal and drift <= 1e-3
    return ok, (
        f"disk minimal={disk.minimal}, square minimal={square.minimal}, "
        f"ellipse minimal={ellipse.minimal} (|I| {_fmt(ellipse.magnitude, 3)}); "
        f"search value {res.value:.6f} vs 2*sqrt(2) (err {_fmt(drift, 3)}, tol 1e-3)"
    )


def _c10_area_maps(ctx: VerifyContext) -> tuple[bool, str]:
    p = 4.0
    area_p = 4.0 * math.gamma(1 + 1 / p) ** 2 / math.gamma(1 + 2 / p)
    target = experiments.superellipse_profile(p, 2.0 / math.sqrt(area_p))
    amap = experiments.build_area_map(experiments.square_profile(1.0), target)
    phi_defect = abs(amap.phi_end - 2.0 * math.pi)
    jac_defect, _ = amap.jacobian_defect(n_points=1000, seed=ctx.seed)
    fam = experiments.squash_family()
    lo, hi = fam.endpoint_gaps()
    ok = (
        phi_defect <= 1e-6
        and jac_defect <= 1e-6
        and fam.monotone
        and lo <= 0.01
        and hi <= 0.01
    )
    return ok, (
        f"phi(2pi) defect {_fmt(phi_defect, 3)} (tol 1e-6); jacobian defect {_fmt(jac_defect, 3)} "
        f"at 1000 pts (tol 1e-6); squash monotone={fam.monotone}, endpoint gaps "
        f"{_fmt(lo, 3)}/{_fmt(hi, 3)} (tol 1%)"
    )


def _c11_rounded_product(ctx: VerifyContext) -> tuple[bool, str]:
    rep = experiments.rounded_product_test(
        bodies.square_disk_spec(), plane=1, p=2.0, samples=ctx.samples, seed=ctx.seed
    )
    ok = rep.decreased and rep.consistent
    return ok, (
        f"width drop {rep.decrease.value:.5f}+-{rep.decrease.std_error:.5f}, "
        f"predicted {rep.predicted:.5f}; decreased={rep.decreased}, formula-consistent={rep.consistent}"
    )


def _c12_flow_invariance(ctx: VerifyContext) -> tuple[bool, str]:
    rep = experiments.nonlinear_flow_check(
        bodies.polydisk_spec((1.0, 2.0)), hamiltonians=5, seed=ctx.seed
    )
    worst = max(abs(r.derivative.value) / max(r.derivative.std_error, 1e-300) for r in rep.rows)
    ok = rep.toric and rep.all_within and len(rep.rows) == 5
    return ok, (
        f"toric={rep.toric}; |dM/dt| within 3 sigma for {sum(r.within_noise for r in rep.rows)}/5 "
        f"flows (worst z {worst:.2f})"
    )


def _c13_product_formula(ctx: VerifyContext) -> tuple[bool, str]:
    cal = experiments.calibrate_prefactor(2, 2, samples=ctx.samples, seed=ctx.seed)
    cal_ok = abs(cal.estimate.value - cal.calibrated) <= 3.0 * cal.estimate.std_error
    rep_bb = experiments.product_formula_report(
        ctx.catalog["ball2"], ctx.catalog["ball2"], samples=ctx.samples, seed=ctx.seed
    )
    rep_sb = experiments.product_formula_report(
        ctx.catalog["square"], ctx.catalog["ball2"], samples=ctx.samples, seed=ctx.seed
    )
    ok = cal_ok and rep_bb.consistent and rep_sb.consistent
    return ok, (
        f"implied prefactor {cal.estimate.value:.6f}+-{cal.estimate.std_error:.1e} vs "
        f"{cal.calibrated} (ratio to halved variant {cal.ratio_to_halved:.4f}, recorded); "
        f"ball x ball consistent={rep_bb.consistent} ({rep_bb.formula:.5f} vs "
        f"{rep_bb.direct.value:.5f}); square x disk consistent={rep_sb.consistent}"
    )


CRITERIA: tuple[tuple[str, Callable[[VerifyContext], tuple[bool, str]]], ...] = (
    ("mean width baselines", _c01_mean_width_basics),
    ("Lagrangian bidisk width", _c02_lagrangian_bidisk_width),
    ("Steiner coefficients", _c03_steiner_coefficients),
    ("normalized quermass chain", _c04_normalized_chain),
    ("capacity baselines", _c05_capacity_baselines),
    ("capacity-width inequalities", _c06_inequality_suite),
    ("F comparison curves", _c07_f_curves),
    ("local minimality of products", _c08_local_minimality),
    ("planar minimality and search", _c09_planar_minimality),
    ("area-preserving maps and squash", _c10_area_maps),
    ("rounded product width drop", _c11_rounded_product),
    ("Hamiltonian flow invariance", _c12_flow_invariance),
    ("product width formula", _c13_product_formula),
)


@dataclass(frozen=True)
class VerifyReport:
    results: tuple[CriterionResult, ...]
    seconds: float

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def summary_lines(self) -> list[str]:
        lines = []
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"[{status}] {r.index:2d} {r.name} ({r.seconds:.1f}s): {r.details}")
        lines.append(
            f"{'all passed' if self.all_passed else 'FAILURES PRESENT'} "
            f"({sum(r.passed for r in self.results)}/{len(self.results)}) in {self.seconds:.1f}s"
        )
        return lines


def run_criterion(index: int, ctx: VerifyContext) -> CriterionResult:
    """Run one criterion by 1-based index."""
    name, fn = CRITERIA[index - 1]
    t0 = time.perf_counter()
    passed, details = fn(ctx)
    return CriterionResult(
        index=index, name=name, passed=passed, details=details,
        seconds=time.perf_counter() - t0,
    )


def verify_all(ctx: Optional[VerifyContext] = None, workers: int = 1) -> VerifyReport:
    """Run every acceptance criterion; results come back in index order.

    The Steiner fits are precomputed sequentially before any parallel
    fan-out so the shared cache is written once and reads race-free.
    """
    ctx = ctx or VerifyContext()
    t0 = time.perf_counter()
    indices = range(1, len(CRITERIA) + 1)
    if workers <= 1:
        results = [run_criterion(i, ctx) for i in indices]
    else:
        for name in ctx.catalog:
            ctx.fit(name)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_criterion(i, ctx), indices))
    results.sort(key=lambda r: r.index)
    return VerifyReport(results=tuple(results), seconds=time.perf_counter() - t0)
