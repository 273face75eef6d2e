"""Correlated cyber-epidemic state sampling for substations and control centers."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .model import AttackGraph, GridModel, ScenarioConfig, good_route_reachable
from .rng import substream


def equicorrelation_matrix(y: int, r: float) -> np.ndarray:
    """Unit-diagonal covariance with every off-diagonal entry equal to ``r``."""
    return (1.0 - r) * np.eye(y) + r * np.ones((y, y))


def equicorrelated_uniforms(y: int, r: float, n: int, rng) -> np.ndarray:
    """``n x y`` Gaussian-copula uniforms with pairwise normal correlation ``r``.

    Uses the one-factor form ``sqrt(r) Z0 + sqrt(1 - r) Z_i``, which has the
    equicorrelation covariance and stays exact at ``r = 1`` where the matrix
    is singular.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"correlation {r} outside [0, 1]")
    common = rng.standard_normal((n, 1))
    own = rng.standard_normal((n, y))
    z = math.sqrt(r) * common + math.sqrt(1.0 - r) * own
    return ndtr(z)


def sample_sct(t_c, u) -> np.ndarray:
    """Scale compromise times by copula uniforms (elementwise)."""
    t_c = np.asarray(t_c, dtype=float)
    u = np.asarray(u, dtype=float)
    if t_c.shape[-1] != u.shape[-1]:
        raise ValueError("compromise time and uniform vectors differ in length")
    with np.errstate(invalid="ignore"):
        out = t_c * u
    return np.where(np.isinf(t_c), np.inf, out)


def sample_recovery(gamma: int, epsilon: float, c: float, rng) -> float:
    """``epsilon`` hours per coupled neighbour among ``gamma`` Bernoulli(c) trials."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return epsilon * float(np.sum(rng.random(gamma) < c))


@dataclass
class SubstationEpidemicState:
    neighbors: tuple
    t_epi_vec: np.ndarray
    t_rec_vec: np.ndarray

    @property
    def t_epi(self) -> float:
        return float(np.mean(self.t_epi_vec))

    @property
    def t_rec(self) -> float:
        return float(np.max(self.t_rec_vec))

    @property
    def p_atk(self) -> float:
        return infection_probability(self)


def epidemic_state(neighbor_sct, neighbor_recovery, z_epi: float, r_epi: float, neighbors=()) -> SubstationEpidemicState:
    """Append the external infection/recovery slots to neighbour samples."""
    return SubstationEpidemicState(
        tuple(neighbors),
        np.append(np.asarray(neighbor_sct, dtype=float), z_epi),
        np.append(np.asarray(neighbor_recovery, dtype=float), r_epi),
    )


def infection_probability(state: SubstationEpidemicState) -> float:
    t_rec = state.t_rec
    t_epi = state.t_epi
    if math.isinf(t_epi):
        return 0.0
    if t_epi + t_rec <= 0:
        raise ValueError("degenerate epidemic state: T_epi + T_rec = 0")
    return t_rec / (t_epi + t_rec)


@dataclass
class StateSequence:
    """Hourly availability (1 = up) per host; rows are time steps."""

    hosts: list
    states: np.ndarray
    substation_ids: list = field(default_factory=list)
    p_atk: np.ndarray | None = None

    def host(self, host_id: str) -> np.ndarray:
        return self.states[:, self.hosts.index(host_id)]

    def substations(self) -> np.ndarray:
        """Columns for ``substation_ids`` in that order."""
        idx = [self.hosts.index(s) for s in self.substation_ids]
        return self.states[:, idx]

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class _Layout:
    hosts: list
    tg_index: np.ndarray
    degree: np.ndarray
    nbr: np.ndarray
    nbr_mask: np.ndarray
    t_c: np.ndarray
    y: int


def _layout(grid: GridModel, graph: AttackGraph, t_c) -> _Layout:
    hosts = graph.hosts
    tg_ids = [tg.id for tg in grid.tgs]
    owner = grid.tg_of_substation()
    owner.update({tg.control_center_id: tg.id for tg in grid.tgs})
    adj = graph.host_adjacency()
    maxdeg = max((len(v) for v in adj.values()), default=0)
    pos = {h: i for i, h in enumerate(hosts)}
    nbr = np.zeros((len(hosts), max(maxdeg, 1)), dtype=np.int64)
    mask = np.zeros_like(nbr, dtype=bool)
    for i, h in enumerate(hosts):
        for k, nb in enumerate(sorted(adj[h])):
            nbr[i, k] = pos[nb]
            mask[i, k] = True
    return _Layout(
        hosts=hosts,
        tg_index=np.array([tg_ids.index(owner[h]) for h in hosts]),
        degree=np.array([len(adj[h]) for h in hosts]),
        nbr=nbr,
        nbr_mask=mask,
        t_c=np.array([t_c[h] for h in hosts], dtype=float),
        y=len(tg_ids),
    )


def infection_probabilities(lay: _Layout, u_sct: np.ndarray, recovery: np.ndarray, z_epi: float, r_epi: float):
    """Per-step, per-host attack probabilities from one chunk of draws."""
    t_hat = sample_sct(lay.t_c[None, :], u_sct[:, lay.tg_index])
    nb_t = np.where(lay.nbr_mask[None], t_hat[:, lay.nbr], 0.0)
    t_epi = (nb_t.sum(axis=2) + z_epi) / (lay.degree + 1)
    nb_r = np.where(lay.nbr_mask[None], recovery[:, lay.nbr], -np.inf)
    t_rec = np.maximum(nb_r.max(axis=2), r_epi)
    with np.errstate(invalid="ignore"):
        p = t_rec / (t_epi + t_rec)
    return np.where(np.isinf(t_epi), 0.0, p)


def _draw_chunk(lay: _Layout, scenario: ScenarioConfig, seed: int, chunk: int, n: int):
    # compromise-time scaling is held for the whole chunk (one simulated
    # year); the attack draw P_v is fresh every step
    ep = scenario.epidemic
    rng = substream(seed, "epidemic", chunk)
    u_sct = equicorrelated_uniforms(lay.y, scenario.correlation, 1, rng)
    p_v = equicorrelated_uniforms(lay.y, scenario.correlation, n, rng)
    recovery = ep.epsilon * rng.binomial(lay.degree[None, :].repeat(n, axis=0), ep.c)
    p_atk = infection_probabilities(lay, u_sct, recovery, ep.z_epi, ep.r_epi)
    en = (p_v[:, lay.tg_index] >= p_atk).astype(np.uint8)
    return en, p_atk


def _sample_chunk(args):
    lay, scenario, seed, chunk, n, gating_ctx, keep_p = args
    en, p_atk = _draw_chunk(lay, scenario, seed, chunk, n)
    if gating_ctx is not None:
        _apply_gating(en, lay, *gating_ctx)
    return en, (p_atk if keep_p else None)


def _apply_gating(en: np.ndarray, lay: _Layout, graph: AttackGraph, tgs, adjacency) -> None:
    pos = {h: i for i, h in enumerate(lay.hosts)}
    cache: dict = {}
    for step in np.flatnonzero((en == 0).any(axis=1)):
        down = {lay.hosts[i] for i in np.flatnonzero(en[step] == 0)}
        for tg in tgs:
            tg_hosts = tg.substation_ids | {tg.control_center_id}
            infected = frozenset(down & tg_hosts)
            if not infected:
                continue
            key = (tg.id, infected)
            if key not in cache:
                cache[key] = tg.substation_ids - good_route_reachable(graph, tg, infected, adjacency)
            for s in cache[key]:
                en[step, pos[s]] = 0


def generate_state_sequences(
    grid: GridModel,
    graph: AttackGraph,
    t_c,
    scenario: ScenarioConfig,
    seed: int,
    workers: int = 1,
    keep_probabilities: bool = False,
) -> StateSequence:
    """Sample availability for every host over the scenario horizon.

    Work is split into one chunk per simulated year, each with its own
    substream, so the output does not depend on ``workers``. With
    ``keep_probabilities`` the per-step attack probabilities (before
    reachability gating) are kept on the result.
    """
    lay = _layout(grid, graph, t_c)
    gating = (graph, grid.tgs, graph.host_adjacency()) if scenario.reachability_gating else None
    spy = scenario.steps_per_year
    tasks = [(lay, scenario, seed, k, spy, gating, keep_probabilities) for k in range(scenario.horizon_years)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sample_chunk, tasks))
    else:
        chunks = [_sample_chunk(t) for t in tasks]
    states = np.concatenate([c[0] for c in chunks], axis=0)
    p_atk = np.concatenate([c[1] for c in chunks], axis=0) if keep_probabilities else None
    return StateSequence(lay.hosts, states, grid.substation_ids, p_atk)


def write_trace(seq: StateSequence, path) -> None:
    """Long-format CSV (step, substation, en) of the substation sequences."""
    sub = seq.substations()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "substation", "en"])
        for step in range(sub.shape[0]):
            for j, s in enumerate(seq.substation_ids):
                w.writerow([step, s, int(sub[step, j])])
