"""Experiment runner for the width/capacity laboratory.

Every subcommand appends flat rows to report.csv in the output
directory, carrying the experiment id, body label, parameter, value,
standard error, verdict, seed, and budget.  Verdict-bearing rows gate
the exit status ("FAIL" anywhere means nonzero), so the runner doubles
as a CI gate.  Wall-clock timings go to runlog.json only, which keeps
report.csv bit-identical across re-runs with the same config and seed.

The `run` subcommand executes an INI config of sections, one per
experiment cell; independent cells can fan out over a thread pool while
the report keeps the section order.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import bodies, capacity, experiments, steiner, symplectic, verify
from .bodies import BallProductSpec
from .grammar import GrammarError, parse_body
from .sphere import SphereSampler, mean_width, mean_width_2d

DEFAULT_SEED = 7
DEFAULT_SAMPLES = 200_000
DEFAULT_OUT = "capwidth_out"
DEFAULT_SQUASH_PS = (2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 24.0, 64.0)


def _s(x) -> str:
    """Deterministic scalar formatting for report files."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _json_scalar(obj):
    # numpy scalars and arrays sneak into detail payloads
    if hasattr(obj, "item") and not hasattr(obj, "__len__"):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


@dataclass
class Row:
    experiment: str
    body: str
    parameter: str
    value: float
    std_error: float
    verdict: str
    seed: int
    budget: int

    def as_list(self) -> list[str]:
        return [
            self.experiment,
            self.body,
            self.parameter,
            _s(float(self.value)),
            _s(float(self.std_error)),
            self.verdict,
            str(self.seed),
            str(self.budget),
        ]


@dataclass
class RunIO:
    """Collects rows, artifacts, and timings for one invocation."""

    outdir: Path
    rows: list[Row] = field(default_factory=list)
    timings: list[tuple[str, float]] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    def say(self, text: str) -> None:
        self.messages.append(text)
        print(text)

    def write_report(self) -> None:
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / "report.csv"
        with path.open("w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(
                ["experiment", "body", "parameter", "value", "std_error", "verdict", "seed", "budget"]
            )
            for row in self.rows:
                w.writerow(row.as_list())

    def write_runlog(self, command: str) -> None:
        self.outdir.mkdir(parents=True, exist_ok=True)
        payload = {
            "command": command,
            "cells": [{"name": name, "seconds": secs} for name, secs in self.timings],
            "total_seconds": sum(secs for _, secs in self.timings),
        }
        (self.outdir / "runlog.json").write_text(json.dumps(payload, indent=2) + "\n")

    def write_json(self, name: str, payload: dict) -> None:
        self.outdir.mkdir(parents=True, exist_ok=True)
        text = json.dumps(payload, indent=2, sort_keys=True, default=_json_scalar)
        (self.outdir / name).write_text(text + "\n")

    @property
    def failed(self) -> bool:
        return any(r.verdict == "FAIL" for r in self.rows)


def emit_plotdata(series: dict[str, Sequence[tuple]], outdir: Path, headers: dict[str, Sequence[str]]) -> None:
    """One CSV per figure-like series; headers first, no rendering."""
    outdir.mkdir(parents=True, exist_ok=True)
    for name, rows in series.items():
        with (outdir / f"series_{name}.csv").open("w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(headers[name])
            for row in rows:
                w.writerow([_s(v) for v in row])


def _parse(text: str):
    try:
        return parse_body(text)
    except GrammarError as exc:
        raise SystemExit(f"body grammar error: {exc}")


def _need_spec(parsed, command: str) -> BallProductSpec:
    if parsed.spec is None:
        raise SystemExit(f"{command} needs a ball-product body, got {parsed.body.label}")
    return parsed.spec


# ---------------------------------------------------------------------------
# subcommand handlers; each takes parsed args and a RunIO
# ---------------------------------------------------------------------------

def _cmd_meanwidth(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    body = parsed.body
    sampler = SphereSampler(
        dim=body.dim, seed=args.seed, count=args.samples, antithetic=args.antithetic
    )
    est = mean_width(body, sampler)
    io.rows.append(
        Row("meanwidth", body.label, "M", est.value, est.std_error, "", args.seed, args.samples)
    )
    if body.dim == 2:
        quad = mean_width_2d(body)
        io.rows.append(Row("meanwidth", body.label, "M_quadrature", quad, 0.0, "", args.seed, 0))
    io.say(f"M({body.label}) = {est.value:.6f} +- {est.std_error:.2g}")


def _cmd_quermass(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    body = parsed.body
    fit = steiner.steiner_fit(
        body, t_max=args.tmax, nodes=args.nodes, budget=args.budget, seed=args.seed
    )
    io.outdir.mkdir(parents=True, exist_ok=True)
    with (io.outdir / "quermass.csv").open("w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["body", "i", "W_i", "W_i_err", "Wbar_i"])
        for i in range(body.dim + 1):
            wbar_txt = _s(float(fit.wbar(i)[0])) if i < body.dim else ""
            w.writerow([body.label, i, _s(float(fit.W[i])), _s(float(fit.W_err[i])), wbar_txt])
    for i in range(body.dim + 1):
        io.rows.append(
            Row("quermass", body.label, f"W_{i}", float(fit.W[i]), float(fit.W_err[i]), "", args.seed, args.budget)
        )
    m, m_err = fit.mean_width()
    io.rows.append(Row("quermass", body.label, "M_from_fit", m, m_err, "", args.seed, args.budget))
    io.say(f"quermass({body.label}): W = {[f'{v:.5g}' for v in fit.W]}, M = {m:.5f} +- {m_err:.2g}")


def _cmd_ffunctions(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    body = parsed.body
    grid = np.linspace(0.0, args.tmax, args.points)
    tab = steiner.f_functions(
        body,
        lambda b: capacity.eh_capacity_estimate(b, modes=args.modes, starts=args.starts, seed=args.seed),
        t_grid=grid,
        budget=args.budget,
        seed=args.seed,
    )
    io.outdir.mkdir(parents=True, exist_ok=True)
    with (io.outdir / "ffunctions.csv").open("w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "F", "F_err", "Ftilde"])
        for t, f, fe, ft in zip(tab.t, tab.F, tab.F_err, tab.Ftilde):
            w.writerow([_s(float(t)), _s(float(f)), _s(float(fe)), _s(float(ft))])
    emit_plotdata(
        {
            "F": list(zip(map(float, tab.t), map(float, tab.F))),
            "Ftilde": list(zip(map(float, tab.t), map(float, tab.Ftilde))),
        },
        io.outdir,
        {"F": ("t", "F"), "Ftilde": ("t", "Ftilde")},
    )
    below = bool(np.all(tab.Ftilde <= tab.F + 3.0 * np.hypot(tab.F_err, tab.Ftilde_err)))
    io.rows.append(
        Row("ffunctions", body.label, "Ftilde_below_F", float(below), 0.0,
            "PASS" if below else "FAIL", args.seed, args.budget)
    )
    io.rows.append(
        Row("ffunctions", body.label, "slope_fd", tab.slope_fd, 0.0, "", args.seed, args.budget)
    )
    io.rows.append(
        Row("ffunctions", body.label, "slope_closed", tab.slope_closed, 0.0, "", args.seed, args.budget)
    )
    io.say(f"ffunctions({body.label}): slope {tab.slope_fd:.5f} vs {tab.slope_closed:.5f}, below={below}")


def _cmd_capacity(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    body = parsed.body
    res = capacity.eh_capacity_estimate(body, modes=args.modes, starts=args.starts, seed=args.seed)
    payload = {
        "body": body.label,
        "raw": {"value": res.raw.value, "std_error": res.raw.std_error},
        "normalized": {"value": res.normalized.value, "std_error": res.normalized.std_error},
        "modes": res.modes,
        "starts": res.starts,
        "converged": res.converged,
        "seed": args.seed,
    }
    io.write_json("capacity.json", payload)
    io.rows.append(
        Row("capacity", body.label, "normalized", res.normalized.value, res.normalized.std_error,
            "" if res.converged else "FAIL", args.seed, args.modes)
    )
    io.rows.append(
        Row("capacity", body.label, "raw", res.raw.value, res.raw.std_error, "", args.seed, args.modes)
    )
    io.say(f"c({body.label}) = {res.normalized.value:.6f} +- {res.normalized.std_error:.2g} (converged={res.converged})")


def _cmd_localmin(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    spec = _need_spec(parsed, "localmin")
    sampler = SphereSampler(dim=2 * spec.n, seed=args.seed, count=args.samples)
    rep = symplectic.verify_local_min(
        spec, directions=args.directions, sampler=sampler, seed=args.seed
    )
    payload = {
        "body": rep.label,
        "coupling_ok": rep.coupling_ok,
        "toric": rep.toric,
        "passed": rep.passed,
        "directions": len(rep.checks),
        "witness": rep.witness,
        "seed": args.seed,
    }
    io.write_json("localmin.json", payload)
    for k, c in enumerate(rep.checks):
        io.rows.append(
            Row("localmin", rep.label, f"f_prime_{k}", c.first.value, c.first.std_error, "", args.seed, args.samples)
        )
        io.rows.append(
            Row("localmin", rep.label, f"f_second_{k}", c.second.value, c.second.std_error, "", args.seed, args.samples)
        )
    io.rows.append(
        Row("localmin", rep.label, "verdict", float(rep.passed), 0.0,
            "PASS" if rep.passed else "FAIL", args.seed, args.samples)
    )
    io.say(rep.summary())


def _cmd_search(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    body = parsed.body
    sampler = None
    if body.dim != 2:
        sampler = SphereSampler(dim=body.dim, seed=args.seed, count=args.samples)
    res = symplectic.local_search(body, sampler=sampler, steps=args.steps)
    emit_plotdata(
        {"search": [(k, float(v)) for k, v in enumerate(res.trace)]},
        io.outdir,
        {"search": ("step", "mean_width")},
    )
    io.rows.append(
        Row("search", body.label, "final_width", res.value, 0.0,
            "" if res.converged else "FAIL", args.seed, args.steps)
    )
    io.say(f"search({body.label}): {res.value:.6f} after {len(res.trace) - 1} steps (converged={res.converged})")


def _cmd_green(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    body = parsed.body
    rep = experiments.green_test(body)
    verdict = "MINIMAL" if rep.minimal else "NOT_MINIMAL"
    io.rows.append(Row("green", body.label, "i_cos", rep.i_cos, 0.0, "", args.seed, 0))
    io.rows.append(Row("green", body.label, "i_sin", rep.i_sin, 0.0, "", args.seed, 0))
    io.rows.append(Row("green", body.label, "magnitude", rep.magnitude, 0.0, verdict, args.seed, 0))
    io.say(rep.summary())


def _cmd_squash(args, io: RunIO) -> None:
    ps = tuple(float(p) for p in args.p_values.split(","))
    fam = experiments.squash_family(p_values=ps)
    for row in fam.rows:
        io.rows.append(Row("squash", f"squash(p={row.p:g})", "M", row.mean_width, 0.0, "", args.seed, 0))
    lo, hi = fam.endpoint_gaps()
    ok = fam.monotone and lo <= 0.01 and hi <= 0.01
    io.rows.append(
        Row("squash", "family", "monotone", float(fam.monotone), 0.0, "PASS" if ok else "FAIL", args.seed, 0)
    )
    emit_plotdata(
        {"squash": [(row.p, row.mean_width) for row in fam.rows]},
        io.outdir,
        {"squash": ("p", "mean_width")},
    )
    io.say(f"squash family: monotone={fam.monotone}, endpoint gaps {lo:.4f}/{hi:.4f}")


def _cmd_roundtest(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    spec = _need_spec(parsed, "roundtest")
    rep = experiments.rounded_product_test(
        spec, plane=args.plane, p=args.p, samples=args.samples, seed=args.seed
    )
    ok = rep.decreased and rep.consistent
    io.rows.append(
        Row("roundtest", rep.label, "width_drop", rep.decrease.value, rep.decrease.std_error,
            "PASS" if ok else "FAIL", args.seed, args.samples)
    )
    io.rows.append(
        Row("roundtest", rep.label, "predicted_drop", rep.predicted, 0.0, "", args.seed, args.samples)
    )
    io.say(
        f"roundtest({rep.label}, p={args.p:g}): drop {rep.decrease.value:.5f} +- "
        f"{rep.decrease.std_error:.5f}, predicted {rep.predicted:.5f}, ok={ok}"
    )


def _cmd_probe(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    spec = _need_spec(parsed, "probe")
    rep = experiments.naive_extension_probe(
        spec, axis=args.axis, p=args.p, samples=args.samples, seed=args.seed
    )
    io.rows.append(
        Row("probe", rep.label, "projection_defect", rep.projection_defect, 0.0, "", args.seed, args.samples)
    )
    io.rows.append(
        Row("probe", rep.label, "width_difference", rep.difference.value, rep.difference.std_error,
            rep.verdict, args.seed, args.samples)
    )
    io.say(rep.summary())


def _cmd_flowcheck(args, io: RunIO) -> None:
    parsed = _parse(args.body)
    spec = _need_spec(parsed, "flowcheck")
    rep = experiments.nonlinear_flow_check(
        spec, hamiltonians=args.hamiltonians, t=args.t, samples=args.samples, seed=args.seed
    )
    for r in rep.rows:
        verdict = ("PASS" if r.within_noise else "FAIL") if rep.toric else ""
        io.rows.append(
            Row("flowcheck", rep.label, r.hamiltonian, r.derivative.value, r.derivative.std_error,
                verdict, args.seed, args.samples)
        )
    io.say(rep.summary())


def _cmd_scan(args, io: RunIO) -> None:
    catalog = bodies.standard_bodies()
    rows = steiner.quermass_capacity_scan(
        catalog,
        lambda b: capacity.eh_capacity_estimate(b, modes=args.modes, starts=args.starts, seed=args.seed),
        budget=args.budget,
        seed=args.seed,
    )
    for r in rows:
        io.rows.append(
            Row("scan", r.label, "capacity", r.capacity, r.capacity_err, "", args.seed, args.budget)
        )
        last = len(r.wbar_sq) - 1
        for i, (v, e, holds) in enumerate(zip(r.wbar_sq, r.wbar_sq_err, r.holds)):
            # only the mean-width column is a theorem; lower powers can sit
            # at equality where the estimator's upper bias shows through
            if i == last:
                verdict = "PASS" if holds else "FAIL"
            else:
                verdict = "HOLDS" if holds else "ABOVE"
            io.rows.append(
                Row("scan", r.label, f"wbar_sq_{i}", float(v), float(e), verdict, args.seed, args.budget)
            )
    io.say(f"scan: {len(rows)} bodies, all chains ok={all(r.chain_ok for r in rows)}")


def _cmd_verify_all(args, io: RunIO) -> None:
    ctx = verify.VerifyContext(seed=args.seed, samples=args.samples)
    rep = verify.verify_all(ctx, workers=args.workers)
    for r in rep.results:
        io.rows.append(
            Row("verify", "", r.name, float(r.passed), 0.0,
                "PASS" if r.passed else "FAIL", args.seed, args.samples)
        )
        io.timings.append((f"criterion {r.index}", r.seconds))
    io.write_json(
        "verify.json",
        {
            "passed": rep.all_passed,
            "seed": args.seed,
            "criteria": [
                {"index": r.index, "name": r.name, "passed": r.passed, "details": r.details}
                for r in rep.results
            ],
        },
    )
    for line in rep.summary_lines():
        io.say(line)


HANDLERS: dict[str, Callable] = {
    "meanwidth": _cmd_meanwidth,
    "quermass": _cmd_quermass,
    "ffunctions": _cmd_ffunctions,
    "capacity": _cmd_capacity,
    "localmin": _cmd_localmin,
    "search": _cmd_search,
    "green": _cmd_green,
    "squash": _cmd_squash,
    "roundtest": _cmd_roundtest,
    "probe": _cmd_probe,
    "flowcheck": _cmd_flowcheck,
    "scan": _cmd_scan,
    "verify-all": _cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", type=str, default=DEFAULT_OUT)

    parser = argparse.ArgumentParser(
        prog="capwidth",
        description="Numerical experiments relating symplectic capacity and mean width.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("meanwidth", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--antithetic", dest="antithetic", action="store_true", default=True)
    p.add_argument("--no-antithetic", dest="antithetic", action="store_false")

    p = sub.add_parser("quermass", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--budget", type=int, default=400_000)
    p.add_argument("--tmax", type=float, default=2.0)
    p.add_argument("--nodes", type=int, default=12)

    p = sub.add_parser("ffunctions", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--budget", type=int, default=400_000)
    p.add_argument("--tmax", type=float, default=2.0)
    p.add_argument("--points", type=int, default=10)

    p = sub.add_parser("capacity", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--starts", type=int, default=8)

    p = sub.add_parser("localmin", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--directions", type=int, default=20)

    p = sub.add_parser("search", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--steps", type=int, default=120)

    p = sub.add_parser("green", parents=[common])
    p.add_argument("--body", required=True)

    p = sub.add_parser("squash", parents=[common])
    p.add_argument("--p-values", type=str, default=",".join(f"{v:g}" for v in DEFAULT_SQUASH_PS))

    p = sub.add_parser("roundtest", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--plane", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)

    p = sub.add_parser("probe", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--axis", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)

    p = sub.add_parser("flowcheck", parents=[common])
    p.add_argument("--body", required=True)
    p.add_argument("--hamiltonians", type=int, default=5)
    p.add_argument("--t", type=float, default=0.02)

    p = sub.add_parser("scan", parents=[common])
    p.add_argument("--budget", type=int, default=400_000)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--starts", type=int, default=8)

    sub.add_parser("verify-all", parents=[common])

    p = sub.add_parser("run", parents=[common])
    p.add_argument("config", type=str)

    return parser


def _run_config(args, io: RunIO) -> None:
    """Execute an INI config: [global] defaults plus one section per cell.

    Section names start with the subcommand; an optional suffix after
    whitespace distinguishes repeated cells.  Cells run on a worker pool
    but the report keeps section order.
    """
    cfg = configparser.ConfigParser()
    try:
        read = cfg.read(args.config)
    except configparser.Error as exc:
        raise SystemExit(f"config error: {exc}")
    if not read:
        raise SystemExit(f"config not found: {args.config}")
    defaults = dict(cfg["global"]) if cfg.has_section("global") else {}
    seed = int(defaults.get("seed", args.seed))
    samples = int(defaults.get("samples", args.samples))
    workers = int(defaults.get("workers", args.workers))

    parser = build_parser()
    cells = []
    for section in cfg.sections():
        if section == "global":
            continue
        command = section.split()[0]
        if command not in HANDLERS:
            raise SystemExit(f"unknown experiment [{section}] in {args.config}")
        argv = [command, "--seed", str(seed), "--samples", str(samples), "--out", str(io.outdir)]
        for key, value in cfg[section].items():
            flag = "--" + key.replace("_", "-")
            if value.strip().lower() in ("true", "false"):
                if value.strip().lower() == "true":
                    argv.append(flag)
                else:
                    argv.append("--no-" + flag[2:])
            else:
                argv.extend([flag, value])
        cells.append((section, parser.parse_args(argv)))

    def run_cell(item):
        # each cell keeps its own row buffer; failures stay local to the cell
        section, cell_args = item
        sub_io = RunIO(outdir=io.outdir)
        t0 = time.perf_counter()
        try:
            HANDLERS[cell_args.command](cell_args, sub_io)
        except (SystemExit, ValueError) as exc:
            sub_io.rows.append(
                Row(cell_args.command, "", f"error: {exc}", float("nan"), float("nan"),
                    "FAIL", seed, samples)
            )
        return section, sub_io, time.perf_counter() - t0

    if workers <= 1:
        outcomes = [run_cell(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_cell, cells))
    for section, sub_io, secs in outcomes:
        io.rows.extend(sub_io.rows)
        io.timings.append((section, secs))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    io = RunIO(outdir=Path(args.out))
    t0 = time.perf_counter()
    if args.command == "run":
        _run_config(args, io)
    else:
        try:
            HANDLERS[args.command](args, io)
        except ValueError as exc:
            print(f"{args.command}: {exc}", file=sys.stderr)
            return 2
        io.timings.append((args.command, time.perf_counter() - t0))
    io.write_report()
    io.write_runlog(args.command)
    return 1 if io.failed else 0


if __name__ == "__main__":
    sys.exit(main())
