"""End-to-end run: compromise times, epidemic sampling, curtailment MCS,
monetisation, and the CSV/JSON artifacts that carry results between stages."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .actuarial import PI2_DESIGNS, default_delta, loss_stats, premium_report
from .cps import compromise_times, node_factors
from .epidemic import StateSequence, generate_state_sequences
from .model import AttackGraph, GridModel, ScenarioConfig
from .opf import LossDistribution, LossSeries, efc, elc, monetize, run_mcs
from .rng import substream

SEED_ENV = "CYBERINS_SEED"
PI2_CHOICES = tuple(PI2_DESIGNS)

# Hardening presets: (job threads, smart monitoring)
SCENARIOS = {
    "S1": ("J1", False),
    "S2": ("J2", False),
    "S3": ("J3", False),
    "S4": ("J1", True),
    "S5": ("J2", True),
    "S6": ("J3", True),
}


def fmt(x) -> str:
    """Six significant digits; NaN is written as ``nan``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def apply_scenario(scenario: ScenarioConfig, name: str) -> ScenarioConfig:
    """Set every host to the thread count and monitoring of a named scenario."""
    try:
        threads, monitored = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}") from None
    return dataclasses.replace(scenario, job_threads={"default": threads}, smart_monitoring={"default": monitored})


def resolve_seed(cli_seed: int | None, scenario: ScenarioConfig) -> int:
    """Command line, then config, then the environment variable."""
    if cli_seed is not None:
        return int(cli_seed)
    if scenario.seed is not None:
        return int(scenario.seed)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        return int(env)
    raise ValueError(f"no seed given (use --seed, scenario.seed or ${SEED_ENV})")


@dataclass
class SimulationResult:
    t_c: dict
    sequences: StateSequence
    series: LossSeries
    distribution: LossDistribution
    elc: float
    elc_pu: float
    efc: float
    timings: dict = field(default_factory=dict)


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {exc}")


def simulate(grid: GridModel, graph: AttackGraph, scenario: ScenarioConfig, seed: int, workers: int = 1) -> SimulationResult:
    """Run the sampling and reliability stages in order for one scenario."""
    timings = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:
            raise StageError(name, exc) from exc
        timings[name] = time.perf_counter() - t0
        return out

    factors = stage("exploit_factors", lambda: node_factors(graph, substream(seed, "exploit")))
    t_c = stage("compromise_time", lambda: compromise_times(graph, scenario, factors))
    seq = stage("epidemic", lambda: generate_state_sequences(grid, graph, t_c, scenario, seed, workers))
    series = stage("mcs", lambda: run_mcs(grid, seq.substations(), workers))
    dist = stage("monetize", lambda: monetize(series, scenario.voll, scenario.steps_per_year))
    return SimulationResult(t_c, seq, series, dist, elc(series), elc(series, grid.base_mva), efc(series), timings)


def write_losses(path, rows) -> None:
    """``rows`` yields ``(scenario, LossDistribution)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "tg", "year", "loss"])
        for name, dist in rows:
            for j, tg in enumerate(dist.tg_ids):
                for year in range(dist.losses.shape[0]):
                    w.writerow([name, tg, year + 1, fmt(dist.losses[year, j])])


def write_reliability(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "elc", "elc_pu", "efc"])
        for name, res in rows:
            w.writerow([name, fmt(res.elc), fmt(res.elc_pu), fmt(res.efc)])


def read_losses(path) -> dict[str, LossDistribution]:
    """Parse a losses file into one distribution per scenario.

    The ``scenario`` column is optional; without it everything lands under
    ``"default"``.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"tg", "year", "loss"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        data: dict = {}
        for row in reader:
            name = row.get("scenario") or "default"
            data.setdefault(name, {}).setdefault(row["tg"], {})[int(row["year"])] = float(row["loss"])
    out = {}
    for name, by_tg in data.items():
        tg_ids = list(by_tg)
        years = sorted(by_tg[tg_ids[0]])
        for tg in tg_ids:
            if sorted(by_tg[tg]) != years:
                raise ValueError(f"{path}: scenario {name}: tg {tg} has a different set of years")
        losses = np.array([[by_tg[tg][yr] for tg in tg_ids] for yr in years])
        out[name] = LossDistribution(tg_ids, losses)
    return out


def compute_premiums(dist: LossDistribution, level: float, delta_mode="complement", pi2="pooled", pi1="individual"):
    if len(dist.tg_ids) < 2:
        raise ValueError("mutual insurance needs at least two TGs")
    if dist.losses.shape[0] < 2:
        raise ValueError("at least two annual samples are required")
    threshold = None if delta_mode in (None, "complement") else float(delta_mode)
    delta = default_delta(dist.losses, level, threshold)
    return premium_report(dist.losses, dist.tg_ids, level, delta=delta, pi2=pi2, pi1_allocation=pi1)


def write_premiums(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "tg", "design", "premium", "indemnity", "rlc", "insolvency"])
        for name, report in rows:
            for tg, d, p, g, r, phi in report.rows():
                w.writerow([name, tg, d, fmt(p), fmt(g), fmt(r), fmt(phi)])


def write_loss_stats(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "tg", "mean", "sd", "cov"])
        for name, dist in rows:
            mean, sd, cov = loss_stats(dist.losses)
            for j, tg in enumerate(dist.tg_ids):
                w.writerow([name, tg, fmt(mean[j]), fmt(sd[j]), fmt(cov[j])])


def versions() -> dict:
    return {"cyberins": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def update_manifest(path, **sections) -> None:
    p = Path(path)
    manifest = json.loads(p.read_text()) if p.exists() else {}
    manifest.update(sections)
    write_manifest(p, manifest)


REPORT_INPUTS = ("reliability.csv", "loss_stats.csv", "premiums.csv")


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(s: str) -> float:
    return float(s)


def build_summary(run_dir) -> list[dict]:
    """One block per scenario joining reliability, loss and premium tables."""
    run = Path(run_dir)
    missing = [f for f in REPORT_INPUTS if not (run / f).exists()]
    if missing:
        raise FileNotFoundError(f"{run}: missing {', '.join(missing)}")
    rel = {r["scenario"]: r for r in _read_csv(run / "reliability.csv")}
    stats = _read_csv(run / "loss_stats.csv")
    prem = _read_csv(run / "premiums.csv")
    blocks = []
    for name in dict.fromkeys([*rel, *(s["scenario"] for s in stats)]):
        r = rel.get(name, {})
        tgs = []
        for s in (s for s in stats if s["scenario"] == name):
            entry = {"tg": s["tg"], "mean": _num(s["mean"]), "sd": _num(s["sd"]), "cov": _num(s["cov"])}
            for p in prem:
                if p["scenario"] == name and p["tg"] == s["tg"]:
                    entry[p["design"]] = {
                        k: _num(p[k]) for k in ("premium", "indemnity", "rlc", "insolvency")
                    }
            tgs.append(entry)
        blocks.append(
            {
                "scenario": name,
                "elc": _num(r["elc"]) if r else float("nan"),
                "elc_pu": _num(r["elc_pu"]) if r else float("nan"),
                "efc": _num(r["efc"]) if r else float("nan"),
                "tgs": tgs,
            }
        )
    return blocks


def write_summary(run_dir, fmt_name: str = "csv") -> Path:
    blocks = build_summary(run_dir)
    run = Path(run_dir)
    if fmt_name == "json":
        out = run / "summary.json"
        out.write_text(json.dumps(blocks, indent=2) + "\n")
        return out
    if fmt_name != "csv":
        raise ValueError(f"unknown report format {fmt_name!r}")
    out = run / "summary.csv"
    designs = ("pi1", "pi2", "pi3")
    metrics = ("premium", "indemnity", "rlc", "insolvency")
    header = ["scenario", "elc", "elc_pu", "efc", "tg", "mean", "sd", "cov"]
    header += [f"{d}_{m}" for d in designs for m in metrics]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for b in blocks:
            for t in b["tgs"]:
                row = [b["scenario"], fmt(b["elc"]), fmt(b["elc_pu"]), fmt(b["efc"]), t["tg"]]
                row += [fmt(t["mean"]), fmt(t["sd"]), fmt(t["cov"])]
                row += [fmt(t[d][m]) if d in t else "nan" for d in designs for m in metrics]
                w.writerow(row)
    return out
