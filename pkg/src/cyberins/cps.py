"""Substation cyber-physical reliability: job threads, smart monitoring and
the Bayesian exploit chain that yields the substation compromise time."""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import AttackGraph, ScenarioConfig, VulnerabilityNode

log = logging.getLogger(__name__)


def transition_probs(lam: float, mu: float) -> tuple[float, float]:
    """Probabilities that the running thread outlives one / two task clocks.

    Returns ``(mu / (mu + lam), mu / (mu + 2 lam))``.
    """
    if lam <= 0 or mu <= 0:
        raise ValueError(f"rates must be positive, got lam={lam}, mu={mu}")
    return mu / (mu + lam), mu / (mu + 2 * lam)


@dataclass(frozen=True)
class JobAssignment:
    thread_count: str
    lam: float
    mu: float

    def __post_init__(self):
        if self.thread_count not in ("J1", "J2", "J3"):
            raise ValueError(f"unknown thread count {self.thread_count!r}")
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError("job assignment rates must be positive")


def sojourn_time(job: JobAssignment) -> float:
    """Expected sojourn (hours) of a vulnerability served by 1-3 job threads."""
    lam = job.lam
    t = 1.0 / lam
    if job.thread_count == "J1":
        return t
    p1, p2 = transition_probs(lam, job.mu)
    if p1 >= 1.0 or p2 >= 1.0:
        raise ValueError("degenerate transition probability (p1 or p2 equals 1)")
    t += 1.0 / (2 * lam * (1 - p1))
    if job.thread_count == "J2":
        return t
    return t + 1.0 / (3 * lam * (1 - p1) * (1 - p2))


@dataclass(frozen=True)
class MarkovMonitorModel:
    """Star-shaped smart-monitoring chain centred on ``Up_0``.

    ``down_states`` holds ``(label, lam_i, mu_i)`` for ``Dn_0..Dn_N`` and
    ``up_states`` the same for ``Up_1..Up_M``. Every state is entered from
    ``Up_0`` at ``lam_i`` and returns to it at ``mu_i``. The baseline rates
    follow from the chain: ``lam_b`` is the sum of all entry rates and
    ``mu_b`` is the repair rate of ``Dn_0``.
    """

    down_states: tuple
    up_states: tuple = ()

    def __post_init__(self):
        if not self.down_states:
            raise ValueError("degenerate monitor model: no down states")
        for label, lam, mu in (*self.down_states, *self.up_states):
            if lam <= 0 or mu <= 0:
                raise ValueError(f"state {label}: rates must be positive")
        mu_b = self.down_states[0][2]
        for label, _, mu in self.down_states[1:]:
            if mu < mu_b:
                raise ValueError(f"state {label}: repair rate below the baseline repair rate")

    @property
    def base_rates(self) -> tuple[float, float]:
        lam_b = math.fsum(lam for _, lam, _ in (*self.down_states, *self.up_states))
        return lam_b, self.down_states[0][2]

    def steady_state(self) -> dict[str, float]:
        """Stationary distribution by detailed balance on the star."""
        weights = {"Up_0": 1.0}
        for label, lam, mu in (*self.up_states, *self.down_states):
            weights[label] = lam / mu
        total = math.fsum(weights.values())
        return {k: w / total for k, w in weights.items()}

    def p_up(self) -> float:
        a = 1.0 + math.fsum(lam / mu for _, lam, mu in self.up_states)
        d = math.fsum(lam / mu for _, lam, mu in self.down_states)
        return a / (a + d)


@dataclass(frozen=True)
class CompositeRates:
    lam_c: float
    mu_c: float
    p_up: float


def composite_rates(m: MarkovMonitorModel) -> CompositeRates:
    """Reduce the monitor chain to an equivalent two-state model."""
    if len(m.down_states) == 1 and not m.up_states:
        _, lam0, mu0 = m.down_states[0]
        return CompositeRates(lam0, mu0, mu0 / (mu0 + lam0))
    lam_c = math.fsum(lam for _, lam, _ in m.down_states)
    a = 1.0 + math.fsum(lam / mu for _, lam, mu in m.up_states)
    d = math.fsum(lam / mu for _, lam, mu in m.down_states)
    p_up = a / (a + d)
    if p_up >= 1.0:
        raise ValueError("degenerate monitor model: availability is 1")
    # lam_c * p_up / (1 - p_up) with the (a + d) factors cancelled
    mu_c = lam_c * a / d
    return CompositeRates(lam_c, mu_c, p_up)


def monitor_model_from_elements(element_rates, attacked: bool = False) -> MarkovMonitorModel:
    """Build the chain from element rows labelled ``Dn_<i>`` / ``Up_<i>``.

    The ``Dn_b`` row is the attacked-server baseline; with ``attacked`` it
    replaces the server (``Dn_0``) entry.
    """
    down, up = {}, {}
    attacked_row = None
    for r in element_rates:
        kind, _, idx = r.state.partition("_")
        if idx == "b":
            attacked_row = r
        elif kind == "Dn":
            down[int(idx)] = (r.state, r.failure_rate, r.repair_rate)
        elif kind == "Up" and int(idx) > 0:
            up[int(idx)] = (r.state, r.failure_rate, r.repair_rate)
    if attacked and attacked_row is not None:
        down[0] = ("Dn_0", attacked_row.failure_rate, attacked_row.repair_rate)
    return MarkovMonitorModel(
        down_states=tuple(down[k] for k in sorted(down)),
        up_states=tuple(up[k] for k in sorted(up)),
    )


def host_rates(host: str, scenario: ScenarioConfig) -> tuple[float, float]:
    """(lam, mu) used for a host's job-thread sojourn."""
    m = monitor_model_from_elements(scenario.element_rates, attacked=host in scenario.attacked_hosts)
    if scenario.monitored(host):
        c = composite_rates(m)
        return c.lam_c, c.mu_c
    return m.base_rates


def exploit_probability(score: float) -> float:
    if not 0.0 <= score <= 10.0:
        raise ValueError(f"CVSS score {score} outside [0, 10]")
    return score / 10.0


@dataclass(frozen=True)
class ExploitChain:
    node_ids: tuple
    hosts: tuple
    p_v: np.ndarray
    p_c_given_v: np.ndarray
    joint: np.ndarray
    p_c: np.ndarray
    clipped: bool = False


def build_exploit_chain(path: Sequence[VulnerabilityNode], rng=None, factors=None) -> ExploitChain:
    """Exploit probabilities along an ordered attack path.

    Each node gets a factor ``u_h ~ U(0.8, 1)``; the conditional success is
    the running product of factors, so it never increases along the path.
    Pass ``factors`` to fix the draws instead of sampling from ``rng``.
    """
    if not path:
        raise ValueError("empty attack path")
    n = len(path)
    if factors is None:
        if rng is None:
            raise ValueError("either rng or factors is required")
        factors = rng.uniform(0.8, 1.0, size=n)
    u = np.asarray(factors, dtype=float)
    if u.shape != (n,):
        raise ValueError("one factor per path node is required")
    p_v = np.array([exploit_probability(v.cvss_score) for v in path])
    cond = np.cumprod(u)
    joint = p_v * cond
    total = np.cumsum(joint)
    clipped = bool(np.any(total > 1.0))
    if clipped:
        log.info("total exploit probability exceeds 1 on path %s; clipped", [v.id for v in path])
    return ExploitChain(
        node_ids=tuple(v.id for v in path),
        hosts=tuple(v.host_id for v in path),
        p_v=p_v,
        p_c_given_v=cond,
        joint=joint,
        p_c=np.minimum(total, 1.0),
        clipped=clipped,
    )


def substation_compromise_time(chain: ExploitChain, sojourn: Mapping[str, float]) -> float:
    """Sojourn times averaged with exploit-joint weights; ``inf`` if the
    terminal node cannot be compromised."""
    p_c = chain.p_c[-1]
    if p_c <= 0.0:
        return math.inf
    ts = np.array([sojourn[h] for h in chain.hosts])
    return float(np.dot(ts, chain.joint) / p_c)


def attack_path(graph: AttackGraph, host: str) -> list[VulnerabilityNode] | None:
    """Shortest exploit path from an entry node to the first node on ``host``.

    Breadth-first over directed exploit edges with sorted tie-breaking;
    ``None`` if the host cannot be reached.
    """
    idx = {n.id: n for n in graph.nodes}
    succ: dict[str, list] = {n.id: [] for n in graph.nodes}
    for a, b in graph.edges:
        succ[a].append(b)
    for k in succ:
        succ[k].sort()
    parent = {}
    queue = deque(sorted(graph.entry_nodes))
    for e in queue:
        parent[e] = None
    while queue:
        nid = queue.popleft()
        if idx[nid].host_id == host:
            path = []
            while nid is not None:
                path.append(idx[nid])
                nid = parent[nid]
            return path[::-1]
        for nxt in succ[nid]:
            if nxt not in parent:
                parent[nxt] = nid
                queue.append(nxt)
    return None


def sojourn_map(hosts, scenario: ScenarioConfig) -> dict[str, float]:
    out = {}
    for h in hosts:
        lam, mu = host_rates(h, scenario)
        out[h] = sojourn_time(JobAssignment(scenario.threads_for(h), lam, mu))
    return out


def node_factors(graph: AttackGraph, rng) -> dict[str, float]:
    """One U(0.8, 1) draw per vulnerability node, in declaration order."""
    u = rng.uniform(0.8, 1.0, size=len(graph.nodes))
    return {n.id: float(x) for n, x in zip(graph.nodes, u)}


def compromise_times(graph: AttackGraph, scenario: ScenarioConfig, factors: Mapping[str, float]) -> dict[str, float]:
    """Compromise time of every host in the attack graph."""
    hosts = graph.hosts
    ts = sojourn_map(hosts, scenario)
    out = {}
    for h in hosts:
        path = attack_path(graph, h)
        if path is None:
            out[h] = math.inf
            continue
        chain = build_exploit_chain(path, factors=[factors[v.id] for v in path])
        out[h] = substation_compromise_time(chain, ts)
    return out
