"""Command-line experiment runner.

    bai run --config configs/pareto4.toml [--seed N] [--reps N] [--out DIR] [--threads N]

The subcommand selects the mode (run, sweep-delta, sweep-batch, lower-bound,
concentration, cost-fit) and overrides any ``mode`` key in the file.
Every mode writes CSV files plus a MANIFEST into the output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .concentration import btilde_conservative, mc_tail_estimate
from .config import MODES, ExperimentConfig, load_config
from .cost_model import (CostParams, fit_solver_cost, integer_batch, optimal_batch,
                         resolve_auto_batch)
from .distributions import DiscreteDistribution, RngStream
from .errors import BaiError, ConfigError
from .lower_bound import solve_allocation
from .track_stop import (StopConfig, glr_from_laws, resolve_btilde, resolve_config, run,
                         threshold_constant)

log = logging.getLogger("klinf_bai.bench")

RUN_COLUMNS = ["rep", "seed", "delta", "m", "tau", "batches", "best_arm", "correct",
               "lower_bound", "ratio", "solver_seconds", "sample_seconds"]
TIMING_COLUMNS = ("solver_seconds", "sample_seconds", "seconds")
CONC_COLUMNS = ["n", "u", "empirical_freq", "bound", "reps"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


class Report:
    """Collects CSV tables and writes them with a MANIFEST."""

    def __init__(self, out: Path, cfg: ExperimentConfig, mode: str):
        self.out, self.cfg, self.mode = out, cfg, mode
        self.files: dict[str, tuple[list, list]] = {}

    def table(self, name: str, columns: list) -> list:
        rows: list = []
        self.files[name] = (columns, rows)
        return rows

    def flush(self, complete: bool, note: str = "") -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        digests = []
        for name, (cols, rows) in self.files.items():
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([fmt(r.get(c)) for c in cols])
            data = buf.getvalue()
            (self.out / name).write_text(data)
            digests.append(f"file={name} rows={len(rows)} sha256={hashlib.sha256(data.encode()).hexdigest()}")
        lines = [f"status={'complete' if complete else 'incomplete'}", f"mode={self.mode}",
                 f"config={self.cfg.source}", f"seed={self.cfg.seed}",
                 f"replications={self.cfg.replications}"]
        if note:
            lines.append(f"note={note}")
        (self.out / "MANIFEST").write_text("\n".join(lines + digests) + "\n")


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------


def true_laws(cfg: ExperimentConfig):
    return [a.discretize(cfg.quad_nodes) for a in cfg.arms]


def true_allocation(cfg: ExperimentConfig):
    return solve_allocation(true_laws(cfg), cfg.mc)


def stop_config(cfg: ExperimentConfig, delta: float, m: int, V: float | None = None) -> StopConfig:
    K = len(cfg.arms)
    bt = cfg.btilde
    if bt == "arms":
        bt = None
    elif bt == "conservative":
        bt = tuple(btilde_conservative(cfg.mc) for _ in range(K))
    else:
        bt = tuple(bt)
    sc = StopConfig(delta=delta, alpha=cfg.alpha, C=cfg.C, m=m, btilde=bt,
                    max_samples=cfg.max_samples, n_grid=cfg.n_grid)
    if m == "auto":
        if V is None:
            V = true_allocation(cfg).V
        bts = resolve_btilde(sc, cfg.arms, cfg.mc)
        a = sc.alpha_for(K)
        cp = CostParams(cfg.cost.c1[0], cfg.cost.c21, cfg.cost.c22)
        if cfg.C == "auto":
            m_int, _ = resolve_auto_batch(cp, delta, a, V, K,
                                          lambda mm: threshold_constant(delta, a, K, mm, bts))
        else:
            m_int = integer_batch(optimal_batch(cp, delta, float(cfg.C), a, V), K)
        sc = replace(sc, m=m_int)
    return resolve_config(sc, cfg.arms, cfg.mc)


def _one_run(job):
    arms, mc, sc, seed, true_best = job
    res = run(arms, mc, sc, RngStream(seed), true_best=true_best)
    return {"tau": res.tau, "batches": res.batches, "best_arm": res.best_arm + 1,
            "correct": res.correct, "solver_seconds": res.solver_seconds,
            "sample_seconds": res.sample_seconds, "t_hat": res.t_hat.tolist(),
            "budget_exceeded": res.budget_exceeded,
            "floor_violations": res.floor_violations}


def _map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        for j in jobs:
            yield fn(j)
        return
    with ProcessPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, jobs)


def aggregate(rows: list, columns: list, keys: dict) -> list:
    """Mean and standard-error rows over the numeric columns."""
    if not rows:
        return []
    mean_row, se_row = dict(keys, rep="mean"), dict(keys, rep="se")
    for c in columns:
        if c in keys or c in ("rep", "seed"):
            continue
        vals = np.array([float(r[c]) for r in rows])
        mean_row[c] = float(np.mean(vals))
        se_row[c] = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return [mean_row, se_row]


def _replicated(cfg, report_rows, delta, m, sc, lb, threads, reps):
    best = int(np.argmax([a.mean for a in cfg.arms]))
    jobs = [(cfg.arms, cfg.mc, sc, cfg.seed + r, best) for r in range(reps)]
    block = []
    for r, out in enumerate(_map(_one_run, jobs, threads)):
        row = {"rep": r, "seed": cfg.seed + r, "delta": delta, "m": sc.m,
               "lower_bound": lb, "ratio": out["tau"] / lb if lb > 0 else math.inf}
        row.update({k: out[k] for k in ("tau", "batches", "best_arm", "correct",
                                         "solver_seconds", "sample_seconds")})
        block.append(row)
        report_rows.append(row)
    report_rows.extend(aggregate(block, RUN_COLUMNS, {"delta": delta, "m": sc.m,
                                                      "lower_bound": lb}))
    return block


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------


def mode_run(cfg, report, threads, deltas=None):
    rows = report.table("run.csv", RUN_COLUMNS)
    sol = true_allocation(cfg)
    summary = []
    for delta in deltas or cfg.deltas[:1]:
        lb = math.log(1.0 / (2.4 * delta)) / sol.V
        sc = stop_config(cfg, delta, cfg.m, sol.V)
        block = _replicated(cfg, rows, delta, sc.m, sc, lb, threads, cfg.replications)
        if block:
            tau = np.mean([b["tau"] for b in block])
            err = sum(1 for b in block if not b["correct"])
            summary.append(f"delta={delta:g} m={sc.m} reps={len(block)} mean_tau={tau:.1f} "
                           f"lower_bound={lb:.2f} ratio={tau / lb:.3f} errors={err}")
        else:
            summary.append(f"delta={delta:g} m={sc.m}: configuration valid, no replications")
    return summary


def mode_sweep_delta(cfg, report, threads):
    return mode_run(cfg, report, threads, deltas=cfg.deltas)


def mode_sweep_batch(cfg, report, threads):
    rows = report.table("run.csv", RUN_COLUMNS)
    cost_cols = ["m", "reps", "tau_mean", "batches_mean", "solver_seconds_mean",
                 "sample_seconds_mean"] + [f"cost_c1_{fmt(c)}" for c in cfg.cost.c1]
    cost_rows = report.table("sweep_batch_cost.csv", cost_cols)
    sol = true_allocation(cfg)
    delta = cfg.deltas[0]
    lb = math.log(1.0 / (2.4 * delta)) / sol.V
    for m in cfg.batches:
        sc = stop_config(cfg, delta, m, sol.V)
        block = _replicated(cfg, rows, delta, m, sc, lb, threads, cfg.replications)
        if not block:
            continue
        row = {"m": m, "reps": len(block)}
        for k in ("tau", "batches", "solver_seconds", "sample_seconds"):
            row[f"{k}_mean"] = float(np.mean([b[k] for b in block]))
        for c in cfg.cost.c1:
            # measured cost: sampling at c1 per sample plus the solver wall time
            row[f"cost_c1_{fmt(c)}"] = c * row["tau_mean"] + row["solver_seconds_mean"]
        cost_rows.append(row)
    out = []
    for c in cfg.cost.c1:
        if cost_rows:
            best = min(cost_rows, key=lambda r: r[f"cost_c1_{fmt(c)}"])
            out.append(f"c1={c:g}: grid argmin m={best['m']}")
    return out


def mode_lower_bound(cfg, report, threads):
    K = len(cfg.arms)
    sol = true_allocation(cfg)
    comp = [j for j in range(K) if j != sol.best]
    cols = ["V", "c_star"] + [f"t_{a + 1}" for a in range(K)] + [f"x_{j + 1}" for j in comp] \
        + ["solver_seconds"]
    rows = report.table("lower_bound.csv", cols)
    row = {"V": sol.V, "c_star": sol.c_star, "solver_seconds": sol.solver_seconds}
    for a in range(K):
        row[f"t_{a + 1}"] = sol.t_star[a]
    for j in comp:
        row[f"x_{j + 1}"] = sol.x_cross[j]
    rows.append(row)
    return [f"V={sol.V:.8g} c*={sol.c_star:.8g} t*={np.round(sol.t_star, 6).tolist()}"]


def mode_concentration(cfg, report, threads):
    rows = report.table("concentration.csv", CONC_COLUMNS)
    sec = cfg.concentration
    base = RngStream(cfg.seed)
    streams = base.spawn(len(sec.n))
    lines = []
    for n, s in zip(sec.n, streams):
        for rep in mc_tail_estimate(sec.arm, cfg.mc, n, sec.u, sec.reps, s):
            rows.append({"n": rep.n, "u": rep.u, "empirical_freq": rep.empirical_freq,
                         "bound": rep.bound, "reps": rep.reps})
            if rep.empirical_freq > rep.bound:
                lines.append(f"VIOLATION n={n} u={rep.u}")
    lines.append(f"{len(rows)} (n, u) cells; violations: "
                 f"{sum(1 for r in rows if r['empirical_freq'] > r['bound'])}")
    return lines


def time_solver(cfg, n_values, repeats, seed=0):
    """Wall time of one allocation solve plus one GLR evaluation at n total samples."""
    sol = true_allocation(cfg)
    out = []
    for i, n in enumerate(n_values):
        rng = RngStream(seed + i)
        streams = rng.spawn(len(cfg.arms))
        counts = np.maximum(np.round(sol.t_star * n).astype(int), 1)
        laws = [DiscreteDistribution.from_samples(a.sample(s, int(k)))
                for a, s, k in zip(cfg.arms, streams, counts)]
        ts = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            try:
                solve_allocation(laws, cfg.mc, n_grid=cfg.n_grid)
            except BaiError:
                pass
            glr_from_laws(laws, counts, cfg.mc)
            ts.append(time.perf_counter() - t0)
        out.append((int(counts.sum()), float(np.median(ts))))
    return out


def mode_cost_fit(cfg, report, threads):
    rows = report.table("cost_timings.csv", ["n", "seconds"])
    timings = time_solver(cfg, cfg.timing.n, cfg.timing.repeats, cfg.seed)
    for n, s in timings:
        rows.append({"n": n, "seconds": s})
    fit = fit_solver_cost(timings)
    sol = true_allocation(cfg)
    K = len(cfg.arms)
    delta = cfg.deltas[0]
    sc = stop_config(cfg, delta, max(cfg.m if cfg.m != "auto" else 0, (K + 1) ** 2), sol.V)
    cols = ["c21", "c22", "residual", "clamped", "c1", "m_star", "reference_m_star"]
    summ = report.table("cost_fit.csv", cols)
    lines = [f"fit: {fit.c21:.4g} + {fit.c22:.4g} n  (rms residual {fit.residual:.3g})",
             "reference line 1854 + 0.6 n (machine dependent, informational)"]
    for c1 in cfg.cost.c1:
        ms = optimal_batch(CostParams(c1, fit.c21, fit.c22), delta, sc.C, sc.alpha, sol.V) \
            if c1 + 0.5 * fit.c22 > 0 else math.nan
        ref = optimal_batch(CostParams(c1, 1854.0, 0.6), delta, sc.C, sc.alpha, sol.V)
        summ.append({"c21": fit.c21, "c22": fit.c22, "residual": fit.residual,
                     "clamped": fit.clamped, "c1": c1, "m_star": ms, "reference_m_star": ref})
        lines.append(f"c1={c1:g}: m*={ms:.1f} (reference constants give {ref:.1f})")
    return lines


MODE_FUNCS = {"run": mode_run, "sweep-delta": mode_sweep_delta, "sweep-batch": mode_sweep_batch,
              "lower-bound": mode_lower_bound, "concentration": mode_concentration,
              "cost-fit": mode_cost_fit}


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None,
                   threads: int | None = None) -> int:
    out = Path(out or cfg.out)
    threads = threads or os.cpu_count() or 1
    report = Report(out, cfg, cfg.mode)
    try:
        lines = MODE_FUNCS[cfg.mode](cfg, report, threads)
    except KeyboardInterrupt:
        report.flush(False, "interrupted")
        raise
    except Exception as err:
        report.flush(False, f"{type(err).__name__}: {err}")
        raise
    report.flush(True)
    for line in lines:
        print(line)
    print(f"wrote {', '.join(report.files)} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bai", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=True, help="TOML experiment file")
        sp.add_argument("--seed", type=int, help="base seed (replication r uses seed + r)")
        sp.add_argument("--reps", type=int, help="number of replications")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, help="worker processes (default: all cores)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.mode)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg.seed = args.seed
        if args.reps is not None:
            if args.reps < 0:
                raise ConfigError("--reps must be nonnegative")
            cfg.replications = args.reps
        return run_experiment(cfg, args.out, args.threads)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"io error: {err}", file=sys.stderr)
        return 3
    except BaiError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
