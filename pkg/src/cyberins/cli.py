"""Command-line entry point: ``validate``, ``simulate``, ``premiums``, ``report``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import pipeline
from .epidemic import write_trace
from .model import ModelError, config_digest, loads_model


def _load(path: str):
    text = Path(path).read_text()
    return text, loads_model(text)


def cmd_validate(args) -> int:
    try:
        text, (grid, graph, scenario) = _load(args.config)
    except OSError as exc:
        print(json.dumps({"valid": False, "error": "io", "message": str(exc)}))
        return 2
    except ModelError as exc:
        diag = {"valid": False, "error": type(exc).__name__, "message": str(exc)}
        diag["path" if hasattr(exc, "path") else "entity"] = getattr(exc, "path", getattr(exc, "entity", None))
        print(json.dumps(diag))
        return 1
    print(
        json.dumps(
            {
                "valid": True,
                "buses": len(grid.buses),
                "lines": len(grid.lines),
                "tgs": len(grid.tgs),
                "vulnerabilities": len(graph.nodes),
                "digest": config_digest(text),
            }
        )
    )
    return 0


def cmd_simulate(args) -> int:
    text, (grid, graph, scenario) = _load(args.config)
    overrides = {}
    if args.years is not None:
        overrides["horizon_years"] = args.years
    if args.correlation is not None:
        overrides["correlation"] = args.correlation
    if args.risk_level is not None:
        overrides["risk_level"] = args.risk_level
    if overrides:
        scenario = dataclasses.replace(scenario, **overrides)
    seed = pipeline.resolve_seed(args.seed, scenario)
    names = args.scenario.split(",") if args.scenario else ["config"]
    runs = [(n, scenario if n == "config" else pipeline.apply_scenario(scenario, n)) for n in names]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    manifest = {
        "config": str(Path(args.config).resolve()),
        "config_digest": config_digest(text),
        "seed": seed,
        "workers": args.workers,
        "output_dir": str(out.resolve()),
        "versions": pipeline.versions(),
        "scenarios": {
            n: {
                "job_threads": dict(s.job_threads),
                "smart_monitoring": dict(s.smart_monitoring),
                "correlation": s.correlation,
                "risk_level": s.risk_level,
                "horizon_years": s.horizon_years,
                "steps_per_year": s.steps_per_year,
                "voll": s.voll,
                "reachability_gating": s.reachability_gating,
            }
            for n, s in runs
        },
    }
    pipeline.write_manifest(manifest_path, manifest)

    results = []
    timings = {}
    for name, sc in runs:
        t0 = time.perf_counter()
        res = pipeline.simulate(grid, graph, sc, seed, workers=args.workers)
        timings[name] = {**res.timings, "total": time.perf_counter() - t0}
        results.append((name, res))
        if args.trace:
            write_trace(res.sequences, out / f"trace_{name}.csv")

    pipeline.write_losses(out / "losses.csv", [(n, r.distribution) for n, r in results])
    pipeline.write_reliability(out / "reliability.csv", results)
    pipeline.update_manifest(manifest_path, timings=timings)
    for name, res in results:
        print(f"{name}: ELC={pipeline.fmt(res.elc)} MW ({pipeline.fmt(res.elc_pu)} p.u.) EFC={pipeline.fmt(res.efc)}")
    return 0


def cmd_premiums(args) -> int:
    dists = pipeline.read_losses(args.losses)
    reports = []
    for name, dist in dists.items():
        reports.append((name, pipeline.compute_premiums(dist, args.risk_level, args.delta, args.pi2, args.pi1)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.update_manifest(
        out / "manifest.json",
        premiums={
            "losses": str(Path(args.losses).resolve()),
            "losses_digest": config_digest(Path(args.losses).read_text()),
            "risk_level": args.risk_level,
            "delta": args.delta,
            "pi2": args.pi2,
            "pi1": args.pi1,
        },
    )
    pipeline.write_premiums(out / "premiums.csv", reports)
    pipeline.write_loss_stats(out / "loss_stats.csv", list(dists.items()))
    return 0


def cmd_report(args) -> int:
    path = pipeline.write_summary(args.run, args.format)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cyberins", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a config document")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="sample attacks, run the curtailment MCS, write losses")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--years", type=int)
    s.add_argument("--scenario", help="comma-separated presets S1..S6 (default: as configured)")
    s.add_argument("--correlation", type=float)
    s.add_argument("--risk-level", type=float)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--trace", action="store_true", help="also write per-step substation states")
    s.add_argument("--out", default="run")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("premiums", help="price pi1/pi2/pi3 from a losses file")
    m.add_argument("--losses", required=True)
    m.add_argument("--risk-level", type=float, required=True)
    m.add_argument("--delta", default="complement", help="'complement' (1 - risk level) or a loss threshold")
    m.add_argument("--pi2", default="pooled", choices=sorted(pipeline.PI2_CHOICES))
    m.add_argument("--pi1", default="individual", choices=["individual", "euler"])
    m.add_argument("--out", default="run")
    m.set_defaults(func=cmd_premiums)

    r = sub.add_parser("report", help="join run tables into a summary")
    r.add_argument("--run", required=True)
    r.add_argument("--format", choices=["csv", "json"], default="csv")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, ValueError, FileNotFoundError, pipeline.StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
