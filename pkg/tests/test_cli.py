import csv
import json
import math

import numpy as np
import pytest

from cyberins import cli, pipeline
from cyberins.model import ScenarioConfig, fixture_path
from conftest import write_doc
from oracles import scan_tce, scan_var

THREE = str(fixture_path("three_bus"))


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_validate_ok(capsys):
    assert run("validate", "--config", THREE) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] and out["buses"] == 3 and out["tgs"] == 2


def test_validate_bad_cvss(tmp_path, three_bus_doc, capsys):
    three_bus_doc["attack_graph"]["nodes"][1]["cvss_score"] = 11
    path = write_doc(tmp_path / "bad.yaml", three_bus_doc)
    assert run("validate", "--config", path) != 0
    assert "v_s1" in capsys.readouterr().out


def test_validate_missing_scenario(tmp_path, three_bus_doc):
    del three_bus_doc["scenario"]
    assert run("validate", "--config", write_doc(tmp_path / "bad.yaml", three_bus_doc)) != 0


def test_validate_missing_file(tmp_path):
    assert run("validate", "--config", tmp_path / "none.yaml") == 2


def test_simulate_is_repeatable(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--config", THREE, "--seed", 42, "--years", 2, "--out", tmp_path / name) == 0
    for f in ("losses.csv", "reliability.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 42 and "timings" in manifest and manifest["config_digest"]


def test_simulate_without_attacks_has_no_losses(tmp_path, three_bus_doc):
    three_bus_doc["scenario"]["epidemic"] = {"epsilon": 0.0, "c": 0.0, "z_epi": 1e300, "r_epi": 1e-300}
    cfg = write_doc(tmp_path / "quiet.yaml", three_bus_doc)
    assert run("simulate", "--config", cfg, "--seed", 1, "--years", 1, "--out", tmp_path / "run") == 0
    with open(tmp_path / "run" / "losses.csv") as fh:
        assert all(float(r["loss"]) == 0.0 for r in csv.DictReader(fh))


def _rel(path):
    with open(path) as fh:
        return {r["scenario"]: r for r in csv.DictReader(fh)}


def test_more_threads_never_raise_elc(tmp_path):
    assert run("simulate", "--config", THREE, "--seed", 3, "--scenario", "S1,S3", "--out", tmp_path) == 0
    rel = _rel(tmp_path / "reliability.csv")
    assert float(rel["S3"]["elc"]) <= float(rel["S1"]["elc"])


def test_simulate_trace(tmp_path):
    assert run("simulate", "--config", THREE, "--seed", 3, "--years", 1, "--trace", "--out", tmp_path) == 0
    assert (tmp_path / "trace_config.csv").exists()


def test_unknown_scenario_is_an_error(tmp_path):
    assert run("simulate", "--config", THREE, "--seed", 3, "--scenario", "S9", "--out", tmp_path) == 1


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv(pipeline.SEED_ENV, "5")
    assert pipeline.resolve_seed(None, ScenarioConfig()) == 5
    assert pipeline.resolve_seed(None, ScenarioConfig(seed=9)) == 9
    assert pipeline.resolve_seed(1, ScenarioConfig(seed=9)) == 1
    monkeypatch.delenv(pipeline.SEED_ENV)
    with pytest.raises(ValueError):
        pipeline.resolve_seed(None, ScenarioConfig())


HAND_A = [3.0, 0.0, 7.5, 1.0, 12.0, 4.0, 0.5, 9.0, 2.0, 6.0]
HAND_B = [1.0, 2.0, 0.0, 8.0, 3.0, 5.5, 4.0, 0.0, 10.0, 1.5]


def _write_losses(path, cols):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tg", "year", "loss"])
        for tg, col in cols.items():
            for yr, v in enumerate(col, 1):
                w.writerow([tg, yr, v])


def _premiums(path):
    with open(path) as fh:
        return {(r["tg"], r["design"]): r for r in csv.DictReader(fh)}


def test_premiums_hand_instance(tmp_path):
    _write_losses(tmp_path / "l.csv", {"A": HAND_A, "B": HAND_B})
    assert run("premiums", "--losses", tmp_path / "l.csv", "--risk-level", 0.2, "--out", tmp_path) == 0
    got = _premiums(tmp_path / "premiums.csv")
    a, b = np.array(HAND_A), np.array(HAND_B)
    pool = a + b
    # two TGs, delta = 0.8: weights C(2,1) .8 .2 = .32 and .64
    va, vb = scan_var(a, 0.2), scan_var(b, 0.2)
    pi3_a = 0.5 * 0.32 * va + 0.5 * (0.64 * (va + vb) - 0.32 * vb)
    expect = {
        ("A", "pi1"): scan_tce(a, 0.2),
        ("B", "pi1"): scan_tce(b, 0.2),
        ("A", "pi2"): a.mean() + (scan_tce(pool, 0.2) - pool.mean()) / 2,
        ("B", "pi2"): b.mean() + (scan_tce(pool, 0.2) - pool.mean()) / 2,
        ("A", "pi3"): pi3_a,
    }
    for key, value in expect.items():
        assert float(got[key]["premium"]) == pytest.approx(value, rel=1e-5)
    for row in got.values():
        phi = float(row["insolvency"])
        assert math.isclose(phi * 10, round(phi * 10))


def test_premiums_zero_losses(tmp_path):
    _write_losses(tmp_path / "l.csv", {"A": [0.0] * 5, "B": [0.0] * 5})
    assert run("premiums", "--losses", tmp_path / "l.csv", "--risk-level", 0.1, "--out", tmp_path) == 0
    for row in _premiums(tmp_path / "premiums.csv").values():
        assert float(row["premium"]) == 0.0 and row["rlc"] == "nan"


def test_premiums_needs_two_tgs(tmp_path):
    _write_losses(tmp_path / "l.csv", {"A": HAND_A})
    assert run("premiums", "--losses", tmp_path / "l.csv", "--risk-level", 0.1, "--out", tmp_path) == 1


def test_premiums_threshold_delta(tmp_path):
    _write_losses(tmp_path / "l.csv", {"A": HAND_A, "B": HAND_B})
    assert run("premiums", "--losses", tmp_path / "l.csv", "--risk-level", 0.2, "--delta", 5, "--out", tmp_path) == 0


def test_report_round_trip(tmp_path):
    assert run("simulate", "--config", THREE, "--seed", 4, "--scenario", "S1,S4", "--out", tmp_path) == 0
    assert run("premiums", "--losses", tmp_path / "losses.csv", "--risk-level", 0.5, "--out", tmp_path) == 0
    assert run("report", "--run", tmp_path) == 0
    first = (tmp_path / "summary.csv").read_bytes()
    assert run("report", "--run", tmp_path) == 0
    assert (tmp_path / "summary.csv").read_bytes() == first
    assert run("report", "--run", tmp_path, "--format", "json") == 0
    blocks = json.loads((tmp_path / "summary.json").read_text())
    assert [b["scenario"] for b in blocks] == ["S1", "S4"]
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        b = next(b for b in blocks if b["scenario"] == r["scenario"])
        t = next(t for t in b["tgs"] if t["tg"] == r["tg"])
        assert float(r["mean"]) == t["mean"]
        assert float(r["pi3_premium"]) == t["pi3"]["premium"]


def test_report_missing_inputs(tmp_path):
    assert run("report", "--run", tmp_path) == 1
