"""DC load-curtailment LP, the Monte Carlo loop over sampled states, and
reliability/monetary loss indices."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .model import GridModel, partition_by_tg

BALANCE_TOL = 1e-6


class SolverError(RuntimeError):
    pass


@dataclass
class DispatchResult:
    theta: np.ndarray
    G: np.ndarray
    K: np.ndarray
    F: np.ndarray

    @property
    def total_curtailment(self) -> float:
        return float(self.K.sum())


class CurtailmentLP:
    """Minimise total load curtailment for one availability pattern.

    Variables are ``[theta, G, K]`` per bus. Line flows are
    ``base_mva * b * (theta_from - theta_to)`` and every bus satisfies
    ``G + K - D = net outflow``. Generation at a bus is capped by its
    substation availability. When total curtailment is positive a second
    pass, holding the total at its optimum, steers the shedding toward TGs
    that lost generation so per-TG attribution is reproducible.
    """

    def __init__(self, grid: GridModel):
        self.grid = grid
        self.n = n = len(grid.buses)
        pos = {b.id: i for i, b in enumerate(grid.buses)}
        self.D = np.array([b.load_capacity for b in grid.buses])
        self.Gcap = np.array([b.generation_capacity for b in grid.buses])
        subs = grid.substation_ids
        self.bus_sub = np.array([subs.index(b.substation_id) for b in grid.buses])
        owner = grid.tg_of_substation()
        tg_ids = [t.id for t in grid.tgs]
        self.bus_tg = np.array([tg_ids.index(owner[b.substation_id]) for b in grid.buses])

        m = len(grid.lines)
        f = np.array([pos[ln.from_bus] for ln in grid.lines], dtype=int)
        t = np.array([pos[ln.to_bus] for ln in grid.lines], dtype=int)
        w = grid.base_mva * np.array([ln.susceptance for ln in grid.lines])
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([f, t]).ravel()
        vals = np.column_stack([w, -w]).ravel()
        # flow = Bf @ theta
        self.Bf = sparse.csr_matrix((vals, (rows, cols)), shape=(m, n))
        inc = sparse.csr_matrix(
            (np.r_[np.ones(m), -np.ones(m)], (np.r_[f, t], np.r_[np.arange(m), np.arange(m)])), shape=(n, m)
        )
        bbus = inc @ self.Bf
        eye = sparse.identity(n, format="csr")
        # G + K - Bbus theta = D
        self.A_eq = sparse.hstack([-bbus, eye, eye], format="csr")
        zero = sparse.csr_matrix((m, n))
        self.A_ub = sparse.vstack(
            [sparse.hstack([self.Bf, zero, zero]), sparse.hstack([-self.Bf, zero, zero])], format="csr"
        )
        self.Fcap = np.array([ln.thermal_limit for ln in grid.lines])
        self.b_ub = np.r_[self.Fcap, self.Fcap]
        self._cache: dict = {}

    def _bounds(self, bus_on: np.ndarray, ref: int):
        n = self.n
        lb = np.r_[np.full(n, -np.inf), np.zeros(n), np.zeros(n)]
        ub = np.r_[np.full(n, np.inf), self.Gcap * bus_on, self.D]
        lb[ref] = ub[ref] = 0.0
        return np.column_stack([lb, ub])

    def _tg_weights(self, bus_on):
        gen_tot = np.bincount(self.bus_tg, weights=self.Gcap)
        gen_on = np.bincount(self.bus_tg, weights=self.Gcap * bus_on)
        frac = np.divide(gen_on, gen_tot, out=np.ones_like(gen_tot), where=gen_tot > 0)
        return frac[self.bus_tg]

    def solve(self, availability) -> DispatchResult:
        avail = np.asarray(availability, dtype=np.uint8)
        key = avail.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._solve(avail)
        return hit

    def _solve(self, avail: np.ndarray) -> DispatchResult:
        n = self.n
        bus_on = avail[self.bus_sub].astype(float)
        online = np.flatnonzero(self.Gcap * bus_on > 0)
        if online.size == 0:
            return DispatchResult(np.zeros(n), np.zeros(n), self.D.copy(), np.zeros(len(self.Fcap)))
        ref = int(online[0])
        bounds = self._bounds(bus_on, ref)
        c = np.r_[np.zeros(2 * n), np.ones(n)]
        res = linprog(c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.D, bounds=bounds, method="highs")
        if res.status != 0:
            raise SolverError(f"curtailment LP failed: {res.message}")
        x = res.x
        total = float(x[2 * n :].sum())
        if total > BALANCE_TOL:
            c2 = np.r_[np.zeros(2 * n), self._tg_weights(bus_on)]
            a_ub = sparse.vstack([self.A_ub, sparse.csr_matrix(c)], format="csr")
            b_ub = np.r_[self.b_ub, total + 1e-7]
            res2 = linprog(c2, A_ub=a_ub, b_ub=b_ub, A_eq=self.A_eq, b_eq=self.D, bounds=bounds, method="highs")
            if res2.status == 0:
                x = res2.x
        theta, G, K = x[:n], x[n : 2 * n], x[2 * n :]
        return DispatchResult(theta, G, np.clip(K, 0.0, self.D), self.Bf @ theta)


def solve_curtailment(grid: GridModel, availability) -> DispatchResult:
    """One-off curtailment solve; ``availability`` is ordered like
    ``grid.substation_ids``."""
    avail = np.asarray(availability)
    if avail.shape != (len(grid.substation_ids),):
        raise ValueError("availability length does not match the substation count")
    return CurtailmentLP(grid).solve(avail)


@dataclass
class LossSeries:
    """Per-step curtailment (MW) by TG and count of faulty substations."""

    tg_ids: list
    curtailment: np.ndarray
    faulty: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.curtailment.sum(axis=1)


def _solve_patterns(args):
    grid, patterns = args
    lp = CurtailmentLP(grid)
    return [lp.solve(p) for p in patterns]


def run_mcs(grid: GridModel, substation_states: np.ndarray, workers: int = 1) -> LossSeries:
    """Curtailment for each step of a ``steps x substations`` availability matrix.

    Each distinct availability pattern is solved once.
    """
    states = np.asarray(substation_states, dtype=np.uint8)
    if states.ndim != 2 or states.shape[1] != len(grid.substation_ids):
        raise ValueError("state matrix must be steps x substations")
    patterns, inverse = np.unique(states, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    if workers > 1 and len(patterns) > 1:
        blocks = np.array_split(np.arange(len(patterns)), workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_solve_patterns, [(grid, patterns[b]) for b in blocks])
            results = [r for part in parts for r in part]
    else:
        results = _solve_patterns((grid, patterns))

    parts_by_tg = partition_by_tg(grid)
    tg_ids = [t.id for t in grid.tgs]
    pos = {b.id: i for i, b in enumerate(grid.buses)}
    member = np.zeros((len(grid.buses), len(tg_ids)))
    for j, t in enumerate(tg_ids):
        for b in parts_by_tg[t]:
            member[pos[b], j] = 1.0
    per_pattern = np.array([r.K @ member for r in results]).reshape(len(patterns), len(tg_ids))
    faulty = (states == 0).sum(axis=1)
    return LossSeries(tg_ids, per_pattern[inverse], faulty)


def elc(series: LossSeries, base_mva: float | None = None) -> float:
    """Expected load curtailment per step (MW, or p.u. given ``base_mva``)."""
    if series.curtailment.shape[0] == 0:
        raise ValueError("empty loss series")
    value = float(series.total.mean())
    return value / base_mva if base_mva else value


def efc(series: LossSeries) -> float:
    """Expected number of faulty substations per step."""
    if series.faulty.shape[0] == 0:
        raise ValueError("empty loss series")
    return float(series.faulty.mean())


@dataclass
class LossDistribution:
    """Annual monetary losses, ``years x TGs``."""

    tg_ids: list
    losses: np.ndarray

    def of(self, tg_id) -> np.ndarray:
        return self.losses[:, self.tg_ids.index(tg_id)]


def monetize(series: LossSeries, voll: float, steps_per_year: int = 8760, scale: float = 1e-6) -> LossDistribution:
    """Annual loss per TG: ``voll * sum(curtailed MW * 1 h) * scale``.

    With the default scale and ``voll`` in $/MWh the result is in M$.
    """
    if voll <= 0:
        raise ValueError("voll must be positive")
    n = series.curtailment.shape[0]
    years = n // steps_per_year
    if years < 1:
        raise ValueError("horizon shorter than one year")
    energy = series.curtailment[: years * steps_per_year].reshape(years, steps_per_year, -1).sum(axis=1)
    return LossDistribution(list(series.tg_ids), voll * energy * scale)
