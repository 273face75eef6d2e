import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from cyberins.cps import compromise_times, node_factors
from cyberins.epidemic import (
    _layout,
    epidemic_state,
    equicorrelated_uniforms,
    equicorrelation_matrix,
    generate_state_sequences,
    infection_probabilities,
    infection_probability,
    sample_recovery,
    sample_sct,
    write_trace,
)
from cyberins.model import EpidemicParams
from cyberins.rng import substream
from oracles import expected_p_atk


def _tc(three_bus, seed=5):
    _, graph, scenario = three_bus
    return compromise_times(graph, scenario, node_factors(graph, substream(seed, "exploit")))


def test_equicorrelation_matrix():
    m = equicorrelation_matrix(3, 0.4)
    assert np.allclose(np.diag(m), 1) and np.allclose(m[np.triu_indices(3, 1)], 0.4)


@pytest.mark.parametrize("r,target", [(0.0, 0.0), (0.5, 6 / math.pi * math.asin(0.25))])
def test_copula_pairwise_correlation(r, target):
    u = equicorrelated_uniforms(4, r, 10_000, np.random.default_rng(11))
    c = np.corrcoef(u.T)[np.triu_indices(4, 1)]
    assert np.all(np.abs(c - target) < 0.05)


def test_copula_comonotone_at_one():
    u = equicorrelated_uniforms(5, 1.0, 1000, np.random.default_rng(2))
    assert np.all(u == u[:, :1])


def test_copula_marginals_uniform():
    u = equicorrelated_uniforms(3, 0.5, 10_000, np.random.default_rng(4))
    for j in range(3):
        assert stats.kstest(u[:, j], "uniform").pvalue > 0.01


def test_copula_rejects_bad_r():
    with pytest.raises(ValueError):
        equicorrelated_uniforms(2, 1.5, 10, np.random.default_rng(0))


def test_sample_sct_examples():
    assert np.array_equal(sample_sct([100, 200], [1, 1]), [100, 200])
    assert np.array_equal(sample_sct([100, 200], [0, 0]), [0, 0])
    assert np.array_equal(sample_sct([100, 200], [0.5, 0.25]), [50, 50])
    assert sample_sct([math.inf], [0.0])[0] == math.inf


def test_recovery_examples():
    rng = np.random.default_rng(0)
    assert sample_recovery(4, 2.0, 0.0, rng) == 0.0
    assert sample_recovery(3, 2.0, 1.0, rng) == 6.0
    draws = [sample_recovery(5, 2.0, 0.8, rng) for _ in range(20_000)]
    assert np.mean(draws) == pytest.approx(8.0, abs=0.2)


def test_isolated_substation_probability():
    state = epidemic_state([], [], 2000.0, 4.0)
    assert abs(infection_probability(state) - 4 / 2004) < 1e-12


def test_infinite_epidemic_time():
    state = epidemic_state([math.inf, 10.0], [2.0, 4.0], 2000.0, 4.0)
    assert infection_probability(state) == 0.0


def test_longer_recovery_raises_probability():
    a = epidemic_state([300.0, 50.0], [2.0, 6.0], 2000.0, 4.0)
    b = epidemic_state([300.0, 50.0], [4.0, 12.0], 2000.0, 8.0)
    assert b.p_atk > a.p_atk


def test_vectorised_matches_scalar(three_bus):
    grid, graph, _ = three_bus
    t_c = _tc(three_bus)
    lay = _layout(grid, graph, t_c)
    rng = np.random.default_rng(9)
    u = rng.random((6, lay.y))
    rec = 2.0 * rng.integers(0, 4, size=(6, len(lay.hosts)))
    p = infection_probabilities(lay, u, rec, 2000.0, 4.0)
    adj = graph.host_adjacency()
    for step in range(6):
        for i, h in enumerate(lay.hosts):
            nbrs = sorted(adj[h])
            idx = [lay.hosts.index(n) for n in nbrs]
            sct = [t_c[n] * u[step, lay.tg_index[j]] for n, j in zip(nbrs, idx)]
            state = epidemic_state(sct, [rec[step, j] for j in idx], 2000.0, 4.0, nbrs)
            assert p[step, i] == pytest.approx(state.p_atk, rel=1e-12)


def test_all_uncompromisable_stays_up(three_bus):
    grid, graph, scenario = three_bus
    t_c = {h: math.inf for h in graph.hosts}
    seq = generate_state_sequences(grid, graph, t_c, dataclasses.replace(scenario, horizon_years=1), 1)
    assert seq.states.min() == 1


def test_certain_attack_takes_everything_down(three_bus):
    grid, graph, scenario = three_bus
    t_c = {h: 0.0 for h in graph.hosts}
    sc = dataclasses.replace(scenario, horizon_years=1, steps_per_year=500, epidemic=EpidemicParams(z_epi=1e-300))
    seq = generate_state_sequences(grid, graph, t_c, sc, 1)
    assert seq.states.max() == 0


def test_expected_probability_matches_quadrature(three_bus):
    # S1 neighbours CC1 (TG1, degree 1) and CC2 (TG2, degree 3)
    grid, graph, scenario = three_bus
    t_c = _tc(three_bus)
    sc = dataclasses.replace(scenario, horizon_years=4000, steps_per_year=20, reachability_gating=False)
    seq = generate_state_sequences(grid, graph, t_c, sc, 123, keep_probabilities=True)
    col = seq.hosts.index("S1")
    per_year = seq.p_atk[:, col].reshape(4000, 20).mean(axis=1)
    se = per_year.std(ddof=1) / math.sqrt(per_year.size)
    oracle = expected_p_atk([t_c["CC1"], t_c["CC2"]], [1, 3], 2.0, 0.8, 2000.0, 4.0)
    assert abs(per_year.mean() - oracle) < 4 * se


def test_infection_frequency_tracks_probability(three_bus):
    grid, graph, scenario = three_bus
    sc = dataclasses.replace(scenario, horizon_years=10, steps_per_year=10_000, reachability_gating=False)
    seq = generate_state_sequences(grid, graph, _tc(three_bus), sc, 77, keep_probabilities=True)
    for i, h in enumerate(seq.hosts):
        p = seq.p_atk[:, i].mean()
        freq = 1.0 - seq.states[:, i].mean()
        se = math.sqrt(p * (1 - p) / seq.n_steps)
        assert abs(freq - p) <= 3 * se, h


def test_gating_downs_cut_off_substations(three_bus):
    grid, graph, scenario = three_bus
    sc = dataclasses.replace(scenario, horizon_years=1)
    seq = generate_state_sequences(grid, graph, _tc(three_bus), sc, 3)
    cc2 = seq.host("CC2")
    assert np.all(seq.host("S2")[cc2 == 0] == 0)
    assert np.all(seq.host("S3")[cc2 == 0] == 0)


def test_gating_only_removes_availability(three_bus):
    grid, graph, scenario = three_bus
    on = generate_state_sequences(grid, graph, _tc(three_bus), dataclasses.replace(scenario, horizon_years=1), 3)
    off = generate_state_sequences(
        grid, graph, _tc(three_bus), dataclasses.replace(scenario, horizon_years=1, reachability_gating=False), 3
    )
    assert np.all(on.states <= off.states)


def test_worker_count_does_not_change_states(three_bus):
    grid, graph, scenario = three_bus
    t_c = _tc(three_bus)
    a = generate_state_sequences(grid, graph, t_c, scenario, 8, workers=1)
    b = generate_state_sequences(grid, graph, t_c, scenario, 8, workers=2)
    assert np.array_equal(a.states, b.states)


def test_write_trace(tmp_path, three_bus):
    grid, graph, scenario = three_bus
    sc = dataclasses.replace(scenario, horizon_years=1, steps_per_year=4)
    seq = generate_state_sequences(grid, graph, _tc(three_bus), sc, 1)
    path = tmp_path / "trace.csv"
    write_trace(seq, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,substation,en"
    assert len(lines) == 1 + 4 * 3
