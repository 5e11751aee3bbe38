"""Command-line driver: classical oracle and simulated quantum estimates per scale.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 internal
inconsistency between oracles.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .homology import BettiCurve, HomologyInconsistency, betti_details, connected_components, write_betti_csv
from .ingest import IngestError, load_distance_matrix, load_points, pairwise_distances, scale_grid
from .qsim import (DEFAULT_QUBIT_CAP, RNG_NAME, SimulationError, derive_seed, estimate_betti,
                   grover_prepare)
from .simplicial import DEFAULT_MAX_VERTICES, ComplexError, FiltrationContext

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_INCONSISTENT = 0, 2, 3, 4
MODES = ("classical", "quantum", "both")
ESTIMATORS = ("boundary", "hodge", "both")
WORKERS_ENV = "QTDA_WORKERS"
DEFAULT_NUM_SCALES = 8


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class RunConfig:
    points: str | None = None
    distances: str | None = None
    scales: tuple[float, ...] | None = None
    num_scales: int = DEFAULT_NUM_SCALES
    kmax: int | None = None
    delta: float = 0.1
    samples: int = 10_000
    seed: int = 0
    mode: str = "both"
    estimator: str = "both"
    out: str | None = None
    curves_csv: str | None = None

    def problems(self, n: int | None = None) -> list[str]:
        out = []
        if (self.points is None) == (self.distances is None):
            out.append("exactly one of --points / --distances is required")
        if self.scales is not None:
            if len(set(self.scales)) != len(self.scales):
                out.append("--scales contains duplicates")
            if any(not math.isfinite(s) or s < 0 for s in self.scales):
                out.append("--scales must be finite and non-negative")
        elif self.num_scales < 1:
            out.append("--num-scales must be >= 1")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            out.append("--delta must be positive")
        if self.samples < 1:
            out.append("--samples must be >= 1")
        if self.mode not in MODES:
            out.append(f"--mode must be one of {', '.join(MODES)}")
        if self.estimator not in ESTIMATORS:
            out.append(f"--estimator must be one of {', '.join(ESTIMATORS)}")
        if self.kmax is not None and self.kmax < 0:
            out.append("--kmax must be >= 0")
        if n is not None and self.kmax is not None and self.kmax > n - 1:
            out.append(f"--kmax={self.kmax} exceeds n-1={n - 1}")
        return out

    def resolved_kmax(self, n: int) -> int:
        return min(n - 1, 4) if self.kmax is None else self.kmax

    def estimators(self) -> tuple[str, ...]:
        return ("boundary", "hodge") if self.estimator == "both" else (self.estimator,)


def version_and_capabilities() -> str:
    return (f"qtda {__version__} qubit-cap={DEFAULT_QUBIT_CAP} vertex-cap={DEFAULT_MAX_VERTICES} "
            f"rng={RNG_NAME}")


def _scale_task(ctx: FiltrationContext, cfg: RunConfig, index: int, eps: float, kmax: int) -> dict:
    """Everything the report needs at one scale."""
    quantum = cfg.mode in ("quantum", "both")
    classical = cfg.mode in ("classical", "both")
    rows, histograms, warnings = [], {}, []

    details = None
    if classical:
        details, rank_warnings = betti_details(ctx, eps, kmax)
        warnings.extend(f"eps[{index}] {w}" for w in rank_warnings)

    for k in range(kmax + 1):
        size = ctx.count(k, eps)
        row: dict = {"scale_index": index, "epsilon": eps, "k": k, "n_simplices": size,
                     "fill_fraction": ctx.fill_fraction(k, eps)}
        if classical:
            det = details[k]
            # order 0 is estimated from the Laplacian, so its reference fraction is betti / |S|
            truth_eta = None
            if size:
                truth_eta = (det.kernel_dim / size) if k >= 1 else det.betti / size
            row["classical"] = {"betti": det.betti, "kernel_dim": det.kernel_dim,
                                "eta": truth_eta}
            if k == 0:
                row["classical"]["components"] = connected_components(ctx, eps)
        if quantum:
            run = grover_prepare(ctx, k, eps, mode="optimal")
            row["grover"] = {"iterations": run.iterations, "oracle_calls": run.oracle_calls,
                             "success_probability": run.success_probability}
            row["quantum"] = {}
            for est in cfg.estimators():
                if not size:
                    row["quantum"][est] = None
                    continue
                res = estimate_betti(ctx, k, eps, cfg.delta, cfg.samples,
                                     derive_seed(cfg.seed, index, k, est), est)
                refs = []
                for frac in res.kernel_fractions:
                    ref = f"eps{index}/k{k}/{est}/order{frac.k}"
                    histograms[ref] = frac.histogram.to_dict()
                    refs.append(ref)
                entry = {
                    "betti_estimate": res.value,
                    "nearest_integer": res.nearest_integer,
                    "std_error": res.std_error,
                    "ci95": list(res.ci95),
                    "eta_estimate": res.kernel_fractions[0].eta if (k >= 1 or est == "hodge") else None,
                    "histograms": refs,
                    "samples": res.samples,
                    "warnings": list(res.warnings),
                }
                if classical:
                    entry["covers_classical"] = res.covers(det.betti)
                row["quantum"][est] = entry
                warnings.extend(f"eps[{index}] k={k} {est}: {w}" for w in res.warnings)
        rows.append(row)

    euler = None
    if classical:
        top = ctx.top_order(eps)
        full, _ = betti_details(ctx, eps, top)
        chi_s = sum((-1) ** d.k * d.n_simplices for d in full)
        chi_b = sum((-1) ** d.k * d.betti for d in full)
        euler = {"scale_index": index, "epsilon": eps, "chi_simplices": chi_s, "chi_betti": chi_b}
        if chi_s != chi_b:
            raise HomologyInconsistency(f"Euler identity fails at eps={eps}: {chi_s} != {chi_b}")
    return {"rows": rows, "histograms": histograms, "warnings": warnings, "euler": euler}


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run(cfg: RunConfig) -> dict:
    """Execute the pipeline and return the report document."""
    problems = cfg.problems()
    if problems:
        raise ConfigError(problems)
    if cfg.points is not None:
        pc = load_points(cfg.points)
        dm = pairwise_distances(pc)
        source = {"kind": "points", "path": str(cfg.points), "dimension": pc.d}
    else:
        dm = load_distance_matrix(cfg.distances)
        source = {"kind": "distances", "path": str(cfg.distances)}
    problems = cfg.problems(dm.n)
    if problems:
        raise ConfigError(problems)
    ctx = FiltrationContext(dm)
    if cfg.scales is not None:
        grid = scale_grid(dm, strategy="explicit", scales=cfg.scales)
    else:
        grid = scale_grid(dm, cfg.num_scales)
    kmax = cfg.resolved_kmax(dm.n)

    tasks = list(enumerate(grid.scales))
    workers = _workers()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_scale_task, ctx, cfg, i, eps, kmax) for i, eps in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_scale_task(ctx, cfg, i, eps, kmax) for i, eps in tasks]

    rows = [r for res in results for r in res["rows"]]
    histograms = {k: v for res in results for k, v in res["histograms"].items()}
    warnings = [w for res in results for w in res["warnings"]]
    euler = [res["euler"] for res in results if res["euler"] is not None]

    costs = {
        "vertices": dm.n,
        "distance_entries": dm.n * (dm.n - 1) // 2,
        "scales": len(grid),
        "max_simplex_space": max((r["n_simplices"] for r in rows), default=0),
        "candidate_space": 2 ** dm.n - 1,
    }
    if cfg.mode != "classical":
        costs["grover_oracle_calls"] = sum(r["grover"]["oracle_calls"] for r in rows)
        costs["phase_estimation_shots"] = sum(
            h["total"] for h in histograms.values())

    return {
        "tool": "qtda",
        "version": __version__,
        "rng": RNG_NAME,
        "config": {**{k: v for k, v in asdict(cfg).items() if k not in ("out", "curves_csv")},
                   "kmax": kmax, "scales": list(grid.scales)},
        "input": {**source, "n": dm.n},
        "cells": rows,
        "histograms": histograms,
        "euler": euler,
        "costs": costs,
        "warnings": warnings,
    }


def render_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def summarize(report: dict) -> str:
    lines = [f"n={report['input']['n']} scales={len(report['config']['scales'])} "
             f"kmax={report['config']['kmax']} mode={report['config']['mode']}"]
    for row in report["cells"]:
        parts = [f"eps={row['epsilon']:.6g}", f"k={row['k']}", f"|S|={row['n_simplices']}"]
        if "classical" in row:
            parts.append(f"betti={row['classical']['betti']}")
        for est, entry in row.get("quantum", {}).items():
            if entry is None:
                continue
            lo, hi = entry["ci95"]
            parts.append(f"{est}={entry['betti_estimate']:.3f} [{lo:.3f}, {hi:.3f}]")
        lines.append("  ".join(parts))
    if report["warnings"]:
        lines.append(f"{len(report['warnings'])} warning(s); see report")
    return "\n".join(lines)


def _curves(report: dict) -> list[BettiCurve]:
    by_k: dict[int, list] = {}
    for row in report["cells"]:
        if "classical" in row:
            by_k.setdefault(row["k"], []).append((row["epsilon"], row["classical"]["betti"]))
    return [BettiCurve(k, tuple(s)) for k, s in sorted(by_k.items())]


def _parse_scales(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse scale list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qtda",
        description="Vietoris-Rips Betti numbers: exact oracle vs simulated quantum estimates.")
    ap.add_argument("--version", action="store_true", help="print version and capabilities")
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--points", help="CSV of points, one per line")
    src.add_argument("--distances", help="CSV distance matrix (full or strict lower triangle)")
    sc = ap.add_mutually_exclusive_group()
    sc.add_argument("--scales", type=_parse_scales, help="comma-separated grouping scales")
    sc.add_argument("--num-scales", type=int, default=DEFAULT_NUM_SCALES,
                    help="size of the uniform scale grid (default %(default)s)")
    ap.add_argument("--kmax", type=int, default=None, help="highest order (default min(n-1, 4))")
    ap.add_argument("--delta", type=float, default=0.1, help="eigenvalue bin width")
    ap.add_argument("--samples", type=int, default=10_000, help="phase-estimation shots per estimate")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mode", default="both", help="classical | quantum | both")
    ap.add_argument("--estimator", default="both", help="boundary | hodge | both")
    ap.add_argument("--out", help="write the JSON report here (default: report.json)")
    ap.add_argument("--curves-csv", help="also write classical Betti curves as CSV")
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.version:
        print(version_and_capabilities())
        return EXIT_OK

    cfg = RunConfig(points=args.points, distances=args.distances, scales=args.scales,
                    num_scales=args.num_scales, kmax=args.kmax, delta=args.delta,
                    samples=args.samples, seed=args.seed, mode=args.mode,
                    estimator=args.estimator, out=args.out or "report.json",
                    curves_csv=args.curves_csv)
    try:
        report = run(cfg)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestError, ComplexError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HomologyInconsistency as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except SimulationError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    Path(cfg.out).write_text(render_report(report))
    if cfg.curves_csv:
        write_betti_csv(_curves(report), cfg.curves_csv)
    print(summarize(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
