"""Grid and cyber data model, config loading and host-level reachability.

A config document is YAML (JSON is accepted too) with four sections::

    grid:        {base_mva, buses: [...], lines: [...]}
    tgs:         [{id, substation_ids, control_center_id}, ...]
    attack_graph: {nodes: [...], edges: [[src, dst], ...], entry_nodes: [...]}
    scenario:    {job_threads, smart_monitoring, correlation, risk_level, ...}

Rates are per hour and power is in MW.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import jsonschema
import yaml

JOB_THREADS = ("J1", "J2", "J3")
ANOMALY_KINDS = ("ROB", "DoS", "other")

# Default element parameters: (element, failure rate, repair rate, state label)
ELEMENT_RATES = (
    ("Server (Attacked)", 1 / 9200, 1 / 48, "Dn_b"),
    ("Server", 1 / 14000, 1 / 48, "Dn_0"),
    ("Bus", 1 / 876000, 1 / 6, "Dn_1"),
    ("Switch", 1 / 45000, 1 / 48, "Dn_2"),
    ("Optical fiber", 1 / 500000, 1 / 12, "Up_1"),
    ("EMU", 1 / 87600, 1 / 24, "Up_2"),
)


class ModelError(ValueError):
    """Base class for configuration problems."""


class ConfigParseError(ModelError):
    """The document does not match the schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ModelValidationError(ModelError):
    """A domain invariant is violated by a named entity."""

    def __init__(self, entity: str, message: str):
        self.entity = entity
        super().__init__(f"{entity}: {message}")


@dataclass(frozen=True)
class Bus:
    id: str
    substation_id: str
    load_capacity: float = 0.0
    generation_capacity: float = 0.0


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    susceptance: float
    thermal_limit: float


@dataclass(frozen=True)
class TransmissionGrid:
    id: str
    substation_ids: frozenset
    control_center_id: str


@dataclass(frozen=True)
class GridModel:
    buses: tuple
    lines: tuple
    tgs: tuple
    base_mva: float = 100.0

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    @property
    def substation_ids(self) -> list[str]:
        """Substations in first-appearance order over the bus list."""
        return list(dict.fromkeys(b.substation_id for b in self.buses))

    def tg_of_substation(self) -> dict[str, str]:
        return {s: tg.id for tg in self.tgs for s in tg.substation_ids}

    def tg_by_id(self, tg_id: str) -> TransmissionGrid:
        for tg in self.tgs:
            if tg.id == tg_id:
                return tg
        raise KeyError(tg_id)


@dataclass(frozen=True)
class VulnerabilityNode:
    id: str
    host_id: str
    cvss_score: float
    anomaly_kind: str = "other"


@dataclass(frozen=True)
class AttackGraph:
    nodes: tuple
    edges: tuple
    entry_nodes: frozenset

    def node(self, node_id: str) -> VulnerabilityNode:
        return self._index()[node_id]

    def _index(self) -> dict[str, VulnerabilityNode]:
        return {n.id: n for n in self.nodes}

    @property
    def hosts(self) -> list[str]:
        return list(dict.fromkeys(n.host_id for n in self.nodes))

    def host_adjacency(self) -> dict[str, set]:
        """Undirected host graph obtained by collapsing nodes per host."""
        idx = self._index()
        adj = {h: set() for h in self.hosts}
        for a, b in self.edges:
            ha, hb = idx[a].host_id, idx[b].host_id
            if ha != hb:
                adj[ha].add(hb)
                adj[hb].add(ha)
        return adj


@dataclass(frozen=True)
class EpidemicParams:
    epsilon: float = 2.0
    c: float = 0.8
    z_epi: float = 2000.0
    r_epi: float = 4.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ModelValidationError("scenario.epidemic", "epsilon must be >= 0")
        if not 0.0 <= self.c <= 1.0:
            raise ModelValidationError("scenario.epidemic", "c must lie in [0, 1]")
        if self.z_epi <= 0 or self.r_epi <= 0:
            raise ModelValidationError("scenario.epidemic", "z_epi and r_epi must be > 0")


@dataclass(frozen=True)
class ElementRate:
    element: str
    failure_rate: float
    repair_rate: float
    state: str


@dataclass(frozen=True)
class ScenarioConfig:
    """Run settings.

    ``job_threads`` and ``smart_monitoring`` map host ids to settings; the
    ``"default"`` key covers hosts not listed.
    """

    job_threads: Mapping = field(default_factory=lambda: {"default": "J1"})
    smart_monitoring: Mapping = field(default_factory=lambda: {"default": False})
    correlation: float = 0.0
    risk_level: float = 0.1
    epidemic: EpidemicParams = field(default_factory=EpidemicParams)
    horizon_years: int = 40
    steps_per_year: int = 8760
    voll: float = 10_000.0
    seed: int | None = None
    reachability_gating: bool = True
    attacked_hosts: frozenset = frozenset()
    element_rates: tuple = tuple(ElementRate(*row) for row in ELEMENT_RATES)

    def __post_init__(self):
        if not 0.0 < self.risk_level < 1.0:
            raise ModelValidationError("scenario", "risk_level must lie in (0, 1)")
        if not 0.0 <= self.correlation <= 1.0:
            raise ModelValidationError("scenario", "correlation must lie in [0, 1]")
        if self.horizon_years < 1:
            raise ModelValidationError("scenario", "horizon_years must be >= 1")
        if self.steps_per_year < 1:
            raise ModelValidationError("scenario", "steps_per_year must be >= 1")
        if self.voll <= 0:
            raise ModelValidationError("scenario", "voll must be > 0")
        for host, j in self.job_threads.items():
            if j not in JOB_THREADS:
                raise ModelValidationError(f"scenario.job_threads.{host}", f"unknown thread count {j!r}")

    def threads_for(self, host: str) -> str:
        return self.job_threads.get(host, self.job_threads.get("default", "J1"))

    def monitored(self, host: str) -> bool:
        return bool(self.smart_monitoring.get(host, self.smart_monitoring.get("default", False)))

    @property
    def n_steps(self) -> int:
        return self.horizon_years * self.steps_per_year


_NUM = {"type": "number"}
_ID = {"type": ["string", "integer"]}

SCHEMA = {
    "type": "object",
    "required": ["grid", "tgs", "attack_graph", "scenario"],
    "properties": {
        "grid": {
            "type": "object",
            "required": ["buses", "lines"],
            "properties": {
                "base_mva": _NUM,
                "buses": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id", "substation_id"],
                        "properties": {
                            "id": _ID,
                            "substation_id": _ID,
                            "load_capacity": _NUM,
                            "generation_capacity": _NUM,
                        },
                        "additionalProperties": False,
                    },
                },
                "lines": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["from_bus", "to_bus", "susceptance", "thermal_limit"],
                        "properties": {
                            "from_bus": _ID,
                            "to_bus": _ID,
                            "susceptance": _NUM,
                            "thermal_limit": _NUM,
                        },
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
        "tgs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "substation_ids", "control_center_id"],
                "properties": {
                    "id": _ID,
                    "substation_ids": {"type": "array", "items": _ID, "minItems": 1},
                    "control_center_id": _ID,
                },
                "additionalProperties": False,
            },
        },
        "attack_graph": {
            "type": "object",
            "required": ["nodes", "edges", "entry_nodes"],
            "properties": {
                "nodes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "host_id", "cvss_score"],
                        "properties": {
                            "id": _ID,
                            "host_id": _ID,
                            "cvss_score": _NUM,
                            "anomaly_kind": {"enum": list(ANOMALY_KINDS)},
                        },
                        "additionalProperties": False,
                    },
                },
                "edges": {
                    "type": "array",
                    "items": {"type": "array", "items": _ID, "minItems": 2, "maxItems": 2},
                },
                "entry_nodes": {"type": "array", "items": _ID},
            },
            "additionalProperties": False,
        },
        "scenario": {
            "type": "object",
            "properties": {
                "job_threads": {
                    "oneOf": [
                        {"enum": list(JOB_THREADS)},
                        {"type": "object", "additionalProperties": {"enum": list(JOB_THREADS)}},
                    ]
                },
                "smart_monitoring": {
                    "oneOf": [
                        {"type": "boolean"},
                        {"type": "object", "additionalProperties": {"type": "boolean"}},
                    ]
                },
                "correlation": _NUM,
                "risk_level": _NUM,
                "epidemic": {
                    "type": "object",
                    "properties": {"epsilon": _NUM, "c": _NUM, "z_epi": _NUM, "r_epi": _NUM},
                    "additionalProperties": False,
                },
                "horizon_years": {"type": "integer"},
                "steps_per_year": {"type": "integer"},
                "voll": _NUM,
                "seed": {"type": ["integer", "null"]},
                "reachability_gating": {"type": "boolean"},
                "attacked_hosts": {"type": "array", "items": _ID},
                "element_rates": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["element", "failure_rate", "repair_rate", "state"],
                        "properties": {
                            "element": {"type": "string"},
                            "failure_rate": _NUM,
                            "repair_rate": _NUM,
                            "state": {"type": "string"},
                        },
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _fmt_path(path: Iterable) -> str:
    parts = [str(p) for p in path]
    return ".".join(parts) if parts else "<root>"


def parse_document(text: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError("<root>", f"not valid YAML/JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigParseError("<root>", "document must be a mapping")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigParseError(_fmt_path(err.absolute_path), err.message)
    return doc


def _as_mapping(value, default) -> dict:
    if value is None:
        return {"default": default}
    if isinstance(value, dict):
        return {str(k): v for k, v in value.items()}
    return {"default": value}


def build_model(doc: dict) -> tuple[GridModel, AttackGraph, ScenarioConfig]:
    """Construct and validate the model from an already schema-checked mapping."""
    g = doc["grid"]
    buses = tuple(
        Bus(
            id=str(b["id"]),
            substation_id=str(b["substation_id"]),
            load_capacity=float(b.get("load_capacity", 0.0)),
            generation_capacity=float(b.get("generation_capacity", 0.0)),
        )
        for b in g["buses"]
    )
    lines = tuple(
        Line(str(ln["from_bus"]), str(ln["to_bus"]), float(ln["susceptance"]), float(ln["thermal_limit"]))
        for ln in g["lines"]
    )
    tgs = tuple(
        TransmissionGrid(str(t["id"]), frozenset(str(s) for s in t["substation_ids"]), str(t["control_center_id"]))
        for t in doc["tgs"]
    )
    grid = GridModel(buses, lines, tgs, float(g.get("base_mva", 100.0)))

    ag = doc["attack_graph"]
    graph = AttackGraph(
        nodes=tuple(
            VulnerabilityNode(str(n["id"]), str(n["host_id"]), float(n["cvss_score"]), n.get("anomaly_kind", "other"))
            for n in ag["nodes"]
        ),
        edges=tuple((str(a), str(b)) for a, b in ag["edges"]),
        entry_nodes=frozenset(str(e) for e in ag["entry_nodes"]),
    )

    sc = doc["scenario"]
    ep = sc.get("epidemic", {})
    defaults = EpidemicParams()
    rates = sc.get("element_rates")
    scenario = ScenarioConfig(
        job_threads=_as_mapping(sc.get("job_threads"), "J1"),
        smart_monitoring=_as_mapping(sc.get("smart_monitoring"), False),
        correlation=float(sc.get("correlation", 0.0)),
        risk_level=float(sc.get("risk_level", 0.1)),
        epidemic=EpidemicParams(
            epsilon=float(ep.get("epsilon", defaults.epsilon)),
            c=float(ep.get("c", defaults.c)),
            z_epi=float(ep.get("z_epi", defaults.z_epi)),
            r_epi=float(ep.get("r_epi", defaults.r_epi)),
        ),
        horizon_years=int(sc.get("horizon_years", 40)),
        steps_per_year=int(sc.get("steps_per_year", 8760)),
        voll=float(sc.get("voll", 10_000.0)),
        seed=sc.get("seed"),
        reachability_gating=bool(sc.get("reachability_gating", True)),
        attacked_hosts=frozenset(str(h) for h in sc.get("attacked_hosts", ())),
        element_rates=(
            tuple(
                ElementRate(r["element"], float(r["failure_rate"]), float(r["repair_rate"]), r["state"])
                for r in rates
            )
            if rates is not None
            else ScenarioConfig.element_rates
        ),
    )
    validate(grid, graph, scenario)
    return grid, graph, scenario


def validate(grid: GridModel, graph: AttackGraph, scenario: ScenarioConfig) -> None:
    """Fail fast on the first violated invariant."""
    seen = set()
    for b in grid.buses:
        if b.id in seen:
            raise ModelValidationError(f"bus {b.id}", "duplicate bus id")
        seen.add(b.id)
        if b.load_capacity < 0:
            raise ModelValidationError(f"bus {b.id}", "load_capacity must be >= 0")
        if b.generation_capacity < 0:
            raise ModelValidationError(f"bus {b.id}", "generation_capacity must be >= 0")

    for i, ln in enumerate(grid.lines):
        name = f"line {i} ({ln.from_bus}-{ln.to_bus})"
        for end in (ln.from_bus, ln.to_bus):
            if end not in seen:
                raise ModelValidationError(name, f"references unknown bus {end!r}")
        if ln.from_bus == ln.to_bus:
            raise ModelValidationError(name, "from_bus equals to_bus")
        if ln.thermal_limit <= 0:
            raise ModelValidationError(name, "thermal_limit must be > 0")
        if ln.susceptance == 0:
            raise ModelValidationError(name, "susceptance must be nonzero")

    if not _connected(grid):
        raise ModelValidationError("grid", "bus graph is not connected")

    subs = set(grid.substation_ids)
    owner: dict[str, str] = {}
    tg_ids = set()
    for tg in grid.tgs:
        if tg.id in tg_ids:
            raise ModelValidationError(f"tg {tg.id}", "duplicate tg id")
        tg_ids.add(tg.id)
        for s in sorted(tg.substation_ids):
            if s not in subs:
                raise ModelValidationError(f"tg {tg.id}", f"references unknown substation {s!r}")
            if s in owner:
                raise ModelValidationError(f"tg {tg.id}", f"substation {s!r} already owned by tg {owner[s]}")
            owner[s] = tg.id
        if tg.control_center_id in subs:
            raise ModelValidationError(f"tg {tg.id}", "control center id collides with a substation id")
    for s in grid.substation_ids:
        if s not in owner:
            raise ModelValidationError(f"substation {s}", "not assigned to any tg")

    node_ids = set()
    hosts = subs | {tg.control_center_id for tg in grid.tgs}
    for n in graph.nodes:
        if n.id in node_ids:
            raise ModelValidationError(f"node {n.id}", "duplicate node id")
        node_ids.add(n.id)
        if not 0.0 <= n.cvss_score <= 10.0:
            raise ModelValidationError(f"node {n.id}", f"cvss_score {n.cvss_score} outside [0, 10]")
        if n.host_id not in hosts:
            raise ModelValidationError(f"node {n.id}", f"unknown host {n.host_id!r}")
    hosted = {n.host_id for n in graph.nodes}
    for s in grid.substation_ids:
        if s not in hosted:
            raise ModelValidationError(f"substation {s}", "hosts no vulnerability node")
    preds: dict[str, set] = {n: set() for n in node_ids}
    for a, b in graph.edges:
        for end in (a, b):
            if end not in node_ids:
                raise ModelValidationError(f"edge {a}->{b}", f"references unknown node {end!r}")
        preds[b].add(a)
    for e in graph.entry_nodes:
        if e not in node_ids:
            raise ModelValidationError(f"entry node {e}", "unknown node")
        if preds[e]:
            raise ModelValidationError(f"entry node {e}", "has predecessors")
    if _has_cycle(node_ids, graph.edges):
        raise ModelValidationError("attack_graph", "exploit edges contain a cycle")

    for h in scenario.attacked_hosts:
        if h not in hosts:
            raise ModelValidationError("scenario.attacked_hosts", f"unknown host {h!r}")
    for key in list(scenario.job_threads) + list(scenario.smart_monitoring):
        if key != "default" and key not in hosts:
            raise ModelValidationError(f"scenario host {key}", "unknown host")
    for r in scenario.element_rates:
        if r.failure_rate <= 0 or r.repair_rate <= 0:
            raise ModelValidationError(f"element {r.element}", "rates must be > 0")


def _connected(grid: GridModel) -> bool:
    adj = {b.id: [] for b in grid.buses}
    for ln in grid.lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    start = grid.buses[0].id
    seen = {start}
    stack = [start]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(adj)


def _has_cycle(nodes: set, edges: Iterable) -> bool:
    out = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    queue = [n for n, d in indeg.items() if d == 0]
    visited = 0
    while queue:
        n = queue.pop()
        visited += 1
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    return visited != len(nodes)


def load_model(path) -> tuple[GridModel, AttackGraph, ScenarioConfig]:
    """Load and validate a config file."""
    return loads_model(Path(path).read_text())


def loads_model(text: str) -> tuple[GridModel, AttackGraph, ScenarioConfig]:
    return build_model(parse_document(text))


def to_document(grid: GridModel, graph: AttackGraph, scenario: ScenarioConfig) -> dict:
    sc = scenario
    return {
        "grid": {
            "base_mva": grid.base_mva,
            "buses": [
                {
                    "id": b.id,
                    "substation_id": b.substation_id,
                    "load_capacity": b.load_capacity,
                    "generation_capacity": b.generation_capacity,
                }
                for b in grid.buses
            ],
            "lines": [
                {
                    "from_bus": ln.from_bus,
                    "to_bus": ln.to_bus,
                    "susceptance": ln.susceptance,
                    "thermal_limit": ln.thermal_limit,
                }
                for ln in grid.lines
            ],
        },
        "tgs": [
            {"id": t.id, "substation_ids": sorted(t.substation_ids), "control_center_id": t.control_center_id}
            for t in grid.tgs
        ],
        "attack_graph": {
            "nodes": [
                {"id": n.id, "host_id": n.host_id, "cvss_score": n.cvss_score, "anomaly_kind": n.anomaly_kind}
                for n in graph.nodes
            ],
            "edges": [list(e) for e in graph.edges],
            "entry_nodes": sorted(graph.entry_nodes),
        },
        "scenario": {
            "job_threads": dict(sc.job_threads),
            "smart_monitoring": dict(sc.smart_monitoring),
            "correlation": sc.correlation,
            "risk_level": sc.risk_level,
            "epidemic": {
                "epsilon": sc.epidemic.epsilon,
                "c": sc.epidemic.c,
                "z_epi": sc.epidemic.z_epi,
                "r_epi": sc.epidemic.r_epi,
            },
            "horizon_years": sc.horizon_years,
            "steps_per_year": sc.steps_per_year,
            "voll": sc.voll,
            "seed": sc.seed,
            "reachability_gating": sc.reachability_gating,
            "attacked_hosts": sorted(sc.attacked_hosts),
            "element_rates": [
                {"element": r.element, "failure_rate": r.failure_rate, "repair_rate": r.repair_rate, "state": r.state}
                for r in sc.element_rates
            ],
        },
    }


def dump_model(grid: GridModel, graph: AttackGraph, scenario: ScenarioConfig) -> str:
    return yaml.safe_dump(to_document(grid, graph, scenario), sort_keys=False)


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture: ``"three_bus"`` or ``"rts24_5tg"``."""
    return Path(str(resources.files("cyberins") / "data" / f"{name}.yaml"))


def load_fixture(name: str):
    return load_model(fixture_path(name))


def partition_by_tg(grid: GridModel) -> dict[str, set]:
    """Bus ids owned by each TG, via the substation each bus sits in."""
    owner = grid.tg_of_substation()
    parts = {tg.id: set() for tg in grid.tgs}
    for b in grid.buses:
        parts[owner[b.substation_id]].add(b.id)
    return parts


def good_route_reachable(graph: AttackGraph, tg: TransmissionGrid, infected, adjacency=None) -> set:
    """Substations of ``tg`` linked to its control center through healthy hosts.

    Depth-first search over the host graph restricted to the TG's own hosts,
    never entering an infected host. An infected control center yields the
    empty set.
    """
    infected = set(infected)
    cc = tg.control_center_id
    if cc in infected:
        return set()
    adj = adjacency if adjacency is not None else graph.host_adjacency()
    allowed = set(tg.substation_ids) - infected
    seen = {cc}
    stack = [cc]
    while stack:
        h = stack.pop()
        for nb in adj.get(h, ()):
            if nb in allowed and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen - {cc}
