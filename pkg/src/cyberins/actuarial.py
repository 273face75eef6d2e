"""Tail risk measures, premium designs, indemnity schedules and insolvency."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

MAX_PLAYERS = 20


def _samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample vector")
    return x


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise ValueError(f"risk level {level} outside (0, 1)")


def var(samples, level: float) -> float:
    """Smallest sample ``l`` whose empirical exceedance ``P(L > l)`` is at most ``level``."""
    _check_level(level)
    x = np.sort(_samples(samples))
    n = x.size
    exceed = n - np.searchsorted(x, x, side="right")
    ok = exceed <= level * n * (1 + 1e-12)
    return float(x[np.argmax(ok)])


def tce(samples, level: float) -> float:
    """Mean of samples strictly above the VaR.

    When nothing lies strictly above it (ties at the top), the mean of the
    largest ``ceil(level * n)`` samples is used instead.
    """
    x = _samples(samples)
    v = var(x, level)
    tail = x[x > v]
    if not tail.size:
        tail = np.sort(x)[-max(1, math.ceil(level * x.size)) :]
    # correctly rounded sum keeps the result independent of sample order
    return math.fsum(tail) / tail.size


def tce_premium_pi1(losses: np.ndarray, level: float, allocation: str = "individual") -> np.ndarray:
    """TCE premium per TG; ``losses`` is ``samples x TGs``.

    ``allocation="euler"`` instead charges each TG its expected loss on the
    samples where the pooled loss exceeds the pooled VaR.
    """
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    if allocation == "individual":
        return np.array([tce(L[:, q], level) for q in range(L.shape[1])])
    if allocation == "euler":
        pool = L.sum(axis=1)
        v = var(pool, level)
        mask = pool > v
        if not mask.any():
            k = max(1, math.ceil(level * pool.size))
            mask = np.zeros(pool.size, dtype=bool)
            mask[np.argsort(pool, kind="stable")[-k:]] = True
        return L[mask].mean(axis=0)
    raise ValueError(f"unknown pi1 allocation {allocation!r}")


def pooled_pi2(losses: np.ndarray, level: float) -> np.ndarray:
    """Expected loss plus an even share of the pooled tail buffer."""
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    y = L.shape[1]
    if y < 2:
        raise ValueError("coalitional premium needs at least two TGs")
    pool = L.sum(axis=1)
    buffer = tce(pool, level) - pool.mean()
    return L.mean(axis=0) + buffer / y


def even_pi2(losses: np.ndarray, level: float) -> np.ndarray:
    """Pooled TCE split in equal shares."""
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    y = L.shape[1]
    if y < 2:
        raise ValueError("coalitional premium needs at least two TGs")
    return np.full(y, tce(L.sum(axis=1), level) / y)


PI2_DESIGNS: dict[str, Callable] = {"pooled": pooled_pi2, "even": even_pi2}


def coalitional_premium_pi2(losses: np.ndarray, level: float, design="pooled") -> np.ndarray:
    fn = design if callable(design) else PI2_DESIGNS[design]
    return np.asarray(fn(losses, level), dtype=float)


def shapley_value(n_players: int, cost: Callable[[frozenset], float], player: int) -> float:
    """Exact Shapley value by enumerating every coalition without ``player``."""
    if n_players > MAX_PLAYERS:
        raise ValueError(f"exact Shapley enumeration limited to {MAX_PLAYERS} players")
    others = [p for p in range(n_players) if p != player]
    fact = [math.factorial(k) for k in range(n_players + 1)]
    total = 0.0
    for size in range(n_players):
        weight = fact[size] * fact[n_players - size - 1] / fact[n_players]
        acc = 0.0
        for S in combinations(others, size):
            s = frozenset(S)
            acc += cost(s | {player}) - cost(s)
        total += weight * acc
    return total


def shapley_values(n_players: int, cost: Callable[[frozenset], float]) -> np.ndarray:
    return np.array([shapley_value(n_players, cost, q) for q in range(n_players)])


def shapley_cost(vars_: np.ndarray, delta: float) -> Callable[[frozenset], float]:
    """Binomially weighted VaR cost of a claimant set, for one TG's ``delta``."""
    y = len(vars_)

    def cost(S: frozenset) -> float:
        k = len(S)
        if k == 0:
            return 0.0
        w = math.comb(y, k) * delta**k * (1 - delta) ** (y - k)
        return w * float(sum(vars_[j] for j in S))

    return cost


def shapley_premium_pi3(losses: np.ndarray, level: float, delta) -> np.ndarray:
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    y = L.shape[1]
    deltas = np.broadcast_to(np.asarray(delta, dtype=float), (y,))
    if np.any((deltas < 0) | (deltas > 1)):
        raise ValueError("delta must lie in [0, 1]")
    vars_ = np.array([var(L[:, q], level) for q in range(y)])
    return np.array([shapley_value(y, shapley_cost(vars_, deltas[q]), q) for q in range(y)])


def default_delta(losses: np.ndarray, level: float, threshold: float | None = None) -> np.ndarray:
    """No-claim probability per TG.

    Without ``threshold`` this is ``1 - level``; otherwise the empirical CDF
    of each TG's losses at ``threshold``.
    """
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    if threshold is None:
        return np.full(L.shape[1], 1.0 - level)
    return (L <= threshold).mean(axis=0)


def base_indemnity(tces, y: int, k: int) -> np.ndarray:
    """Self/group interpolated base indemnity for every TG with ``k`` claimants."""
    if y < 2:
        raise ValueError("base indemnity needs y >= 2")
    if not 1 <= k <= y:
        raise ValueError(f"k={k} outside [1, {y}]")
    t = np.asarray(tces, dtype=float)
    return (y - k) / (y - 1) * t + (k - 1) / (y - 1) * t.sum()


def scaled_indemnity(claims, claimants, premiums) -> np.ndarray:
    """Scale claimant indemnities down to the non-claimants' premium budget.

    ``claims`` holds the base indemnities of every TG; the returned vector is
    zero outside ``claimants``.
    """
    claims = np.asarray(claims, dtype=float)
    premiums = np.asarray(premiums, dtype=float)
    inside = np.zeros(claims.size, dtype=bool)
    inside[list(claimants)] = True
    demand = claims[inside].sum()
    budget = premiums[~inside].sum()
    out = np.where(inside, claims, 0.0)
    if demand <= budget:
        return out
    return out * (budget / demand)


@dataclass
class IndemnitySchedule:
    base: np.ndarray  # y x y, [q, k-1]
    scaled: np.ndarray
    premiums: np.ndarray

    @property
    def maximal(self) -> np.ndarray:
        return max_indemnity(self.scaled)


CLAIMANT_RULES = ("top", "containing")


def worst_claimants(claims: np.ndarray, q: int, k: int, rule: str = "top") -> list[int]:
    """Claimant set of size ``k`` used to budget TG ``q``.

    ``"top"`` takes the ``k`` largest claims overall, so ``q`` may be left
    out (and then receives nothing at that ``k``). ``"containing"`` takes
    ``q`` plus the ``k - 1`` largest other claims. Ties go to the lower index.
    """
    if rule == "top":
        return sorted(range(claims.size), key=lambda j: (-claims[j], j))[:k]
    if rule == "containing":
        others = sorted((j for j in range(claims.size) if j != q), key=lambda j: (-claims[j], j))
        return [q, *others[: k - 1]]
    raise ValueError(f"unknown claimant rule {rule!r}")


def indemnity_schedule(tces, premiums, rule: str = "top") -> IndemnitySchedule:
    """Scaled indemnity of each TG for every claimant count ``k``.

    The claimant set at each ``k`` is the one that stresses the budget
    most (see :func:`worst_claimants`).
    """
    tces = np.asarray(tces, dtype=float)
    premiums = np.asarray(premiums, dtype=float)
    y = tces.size
    base = np.empty((y, y))
    scaled = np.empty((y, y))
    for k in range(1, y + 1):
        claims = base_indemnity(tces, y, k)
        base[:, k - 1] = claims
        for q in range(y):
            scaled[q, k - 1] = scaled_indemnity(claims, worst_claimants(claims, q, k, rule), premiums)[q]
    return IndemnitySchedule(base, scaled, premiums)


def max_indemnity(scaled) -> np.ndarray:
    """Per-TG maximum over claimant counts (columns)."""
    return np.asarray(scaled, dtype=float).max(axis=-1)


def pi1_indemnity(pi1, indemnity_pi2) -> np.ndarray:
    """Share out the total TCE premium in proportion to the pi2 indemnities."""
    g = np.asarray(indemnity_pi2, dtype=float)
    denom = g.sum()
    if denom <= 0:
        raise ValueError("pi2 indemnities sum to zero")
    return float(np.sum(pi1)) * g / denom


def rlc(premium: float, samples) -> float:
    mean = float(_samples(samples).mean())
    if mean == 0:
        raise ValueError("risk loading undefined for zero expected loss")
    return premium / mean - 1.0


TIE_RTOL = 1e-12


def insolvency(samples, indemnity: float) -> float:
    """Fraction of samples strictly above the indemnity.

    A loss within ``TIE_RTOL`` (relative) of the indemnity counts as covered,
    so rounding in the premium arithmetic cannot flip a tie.
    """
    x = _samples(samples)
    above = (x > indemnity) & ~np.isclose(x, indemnity, rtol=TIE_RTOL, atol=0.0)
    return float(np.count_nonzero(above)) / x.size


@dataclass
class PremiumReport:
    tg_ids: list
    premium: dict = field(default_factory=dict)
    indemnity: dict = field(default_factory=dict)
    rlc: dict = field(default_factory=dict)
    insolvency: dict = field(default_factory=dict)

    DESIGNS = ("pi1", "pi2", "pi3")

    def rows(self):
        for d in self.DESIGNS:
            for j, tg in enumerate(self.tg_ids):
                yield tg, d, self.premium[d][j], self.indemnity[d][j], self.rlc[d][j], self.insolvency[d][j]


def premium_report(
    losses: np.ndarray,
    tg_ids,
    level: float,
    delta=None,
    pi2="pooled",
    pi1_allocation: str = "individual",
    claimant_rule: str = "top",
) -> PremiumReport:
    """All three premium designs with indemnities, risk loading and insolvency.

    ``losses`` is ``samples x TGs``. Indemnities for pi2 and pi3 come from
    the scaled schedule funded by the design's own premiums; pi1 indemnities
    are the pi1 pool shared in proportion to the pi2 indemnities. ``rlc`` is
    NaN for TGs with zero expected loss.
    """
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    y = L.shape[1]
    if y < 2:
        raise ValueError("mutual insurance needs at least two TGs")
    if delta is None:
        delta = default_delta(L, level)
    tces = np.array([tce(L[:, q], level) for q in range(y)])
    prem = {
        "pi1": tce_premium_pi1(L, level, pi1_allocation),
        "pi2": coalitional_premium_pi2(L, level, pi2),
        "pi3": shapley_premium_pi3(L, level, delta),
    }
    ind = {d: indemnity_schedule(tces, prem[d], claimant_rule).maximal for d in ("pi2", "pi3")}
    if ind["pi2"].sum() > 0:
        ind["pi1"] = pi1_indemnity(prem["pi1"], ind["pi2"])
    else:
        ind["pi1"] = np.zeros(y)
    means = L.mean(axis=0)
    report = PremiumReport(list(tg_ids), prem, ind)
    for d in PremiumReport.DESIGNS:
        report.rlc[d] = np.where(means > 0, prem[d] / np.where(means > 0, means, 1.0) - 1.0, np.nan)
        report.insolvency[d] = np.array([insolvency(L[:, q], ind[d][q]) for q in range(y)])
    return report


def loss_stats(losses: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, sample SD and coefficient of variation per TG (CoV NaN at zero mean)."""
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    mean = L.mean(axis=0)
    sd = L.std(axis=0, ddof=1) if L.shape[0] > 1 else np.zeros(L.shape[1])
    cov = np.divide(sd, mean, out=np.full_like(mean, np.nan), where=mean > 0)
    return mean, sd, cov
