"""Independent reference implementations used to check the library.

Nothing here imports the code under test except plain data classes, so a
bug in the library cannot be mirrored by the oracle.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


# ---------------------------------------------------------------- actuarial

def permutation_shapley(n, cost):
    """Average marginal cost over all n! orderings."""
    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for order in perms:
        s = frozenset()
        for p in order:
            phi[p] += cost(s | {p}) - cost(s)
            s = s | {p}
    return phi / len(perms)


def scan_var(samples, level):
    """Walk the sorted samples upward until the count strictly above is small enough."""
    x = sorted(float(v) for v in samples)
    n = len(x)
    for v in x:
        above = sum(1 for w in x if w > v)
        if above / n <= level + 1e-12:
            return v
    return x[-1]


def scan_tce(samples, level):
    v = scan_var(samples, level)
    tail = [w for w in samples if w > v]
    if tail:
        return math.fsum(tail) / len(tail)
    k = max(1, math.ceil(level * len(samples)))
    return math.fsum(sorted(samples)[-k:]) / k


# ------------------------------------------------------------------ markov

def simulate_job_threads(threads, lam, mu, trials, rng):
    """Mean absorption time of the fault-tolerant thread chain.

    A single thread survives an Exp(lam) task clock. With a second thread
    the survivor stage lasts Exp(2 lam) and ends in either a recruitment
    (Exp(mu) wins against one Exp(lam) failure; the stage repeats) or an
    advance. A third thread adds a stage of Exp(3 lam) that repeats unless
    the failures beat recruitment in both of its races (lam and 2 lam).
    """
    t = rng.exponential(1 / lam, trials)
    if threads >= 2:
        t += _repeat_stage(2 * lam, [(mu, lam)], trials, rng)
    if threads >= 3:
        t += _repeat_stage(3 * lam, [(mu, lam), (mu, 2 * lam)], trials, rng)
    return t


def _repeat_stage(rate, races, trials, rng):
    total = np.zeros(trials)
    active = np.arange(trials)
    while active.size:
        total[active] += rng.exponential(1 / rate, active.size)
        advance = np.ones(active.size, dtype=bool)
        for a, b in races:
            recruit = rng.exponential(1 / a, active.size)
            fail = rng.exponential(1 / b, active.size)
            advance &= fail < recruit
        active = active[~advance]
    return total


def simulate_star_availability(up_states, down_states, cycles, rng):
    """Long-run up fraction of the star chain by renewal-reward cycles."""
    states = [(lam, mu, True) for lam, mu in up_states] + [(lam, mu, False) for lam, mu in down_states]
    lams = np.array([s[0] for s in states])
    mus = np.array([s[1] for s in states])
    is_up = np.array([s[2] for s in states])
    total = lams.sum()
    hub = rng.exponential(1 / total, cycles)
    which = rng.choice(len(states), size=cycles, p=lams / total)
    away = rng.exponential(1 / mus[which])
    up_time = hub.sum() + away[is_up[which]].sum()
    return up_time / (hub.sum() + away.sum())


# --------------------------------------------------------------------- LP

def _network(grid):
    pos = {b.id: i for i, b in enumerate(grid.buses)}
    n, m = len(grid.buses), len(grid.lines)
    A = np.zeros((m, n))
    for k, ln in enumerate(grid.lines):
        A[k, pos[ln.from_bus]] = 1.0
        A[k, pos[ln.to_bus]] = -1.0
    w = grid.base_mva * np.array([ln.susceptance for ln in grid.lines])
    B = A.T @ np.diag(w) @ A
    ptdf = np.zeros((m, n))
    keep = np.arange(1, n)
    ptdf[:, keep] = np.diag(w) @ A[:, keep] @ np.linalg.inv(B[np.ix_(keep, keep)])
    return ptdf


def _lp_data(grid, avail):
    on ={s: bool(a) for s, a in zip(grid.substation_ids, avail)}
    D = np.array([b.load_capacity for b in grid.buses])
    Gmax = np.array([b.generation_capacity if on[b.substation_id] else 0.0 for b in grid.buses])
    F = np.array([ln.thermal_limit for ln in grid.lines])
    return D, Gmax, F


def ptdf_curtailment(grid, avail):
    """Minimum shedding with flows written through a PTDF matrix (x = [G, K]),
    solved by interior point with crossover."""
    ptdf = _network(grid)
    D, Gmax, F = _lp_data(grid, avail)
    n = D.size
    # flows = PTDF (G + K - D)
    H = np.hstack([ptdf, ptdf])
    A_ub = np.vstack([H, -H])
    b_ub = np.r_[F + ptdf @ D, F - ptdf @ D]
    A_eq = np.ones((1, 2 * n))
    b_eq = [D.sum()]
    c = np.r_[np.zeros(n), np.ones(n)]
    bounds = [(0, g) for g in Gmax] + [(0, d) for d in D]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs-ipm")
    assert res.status == 0, res.message
    return res.fun


def vertex_curtailment(grid, avail):
    """Exhaustive vertex enumeration of the PTDF-form LP in (G, K).

    Every basic solution picks 2n active constraints out of the balance row,
    the flow rows and the variable bounds; the smallest feasible objective
    is the optimum. Only practical for a handful of buses.
    """
    ptdf = _network(grid)
    D, Gmax, F = _lp_data(grid, avail)
    n = D.size
    nv = 2 * n
    H = np.hstack([ptdf, ptdf])
    rows = [np.ones(nv)]
    rhs = [D.sum()]
    # inequalities as a x <= b
    ineq_a, ineq_b = [], []
    for k in range(H.shape[0]):
        ineq_a += [H[k], -H[k]]
        ineq_b += [F[k] + H[k, :n] @ D, F[k] - H[k, :n] @ D]
    ub = np.r_[Gmax, D]
    for j in range(nv):
        e = np.zeros(nv)
        e[j] = 1.0
        ineq_a += [e, -e]
        ineq_b += [ub[j], 0.0]
    ineq_a = np.array(ineq_a)
    ineq_b = np.array(ineq_b)
    best = math.inf
    for active in itertools.combinations(range(len(ineq_b)), nv - 1):
        M = np.vstack([rows[0], ineq_a[list(active)]])
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, np.r_[rhs, ineq_b[list(active)]])
        if np.all(ineq_a @ x <= ineq_b + 1e-7):
            best = min(best, x[n:].sum())
    return best


# -------------------------------------------------------------- epidemic

def expected_p_atk(t_c_nbrs, degree_nbrs, eps, c, z_epi, r_epi, nodes=64):
    """E[p_atk] for one substation by Gauss-Legendre quadrature over the
    neighbours' uniform scalings and exact binomial enumeration of their
    recovery counts.

    ``t_c_nbrs`` lists neighbour compromise times. Every neighbour is assumed
    to scale with its own independent uniform (correlation 0, distinct TGs).
    """
    from scipy.stats import binom

    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    w = 0.5 * w
    k = len(t_c_nbrs)
    # T_rec distribution: max over neighbours of eps * Bin(deg, c), floored at r_epi
    supports = [eps * np.arange(d + 1) for d in degree_nbrs]
    pmfs = [binom.pmf(np.arange(d + 1), d, c) for d in degree_nbrs]
    rec_vals, rec_p = [r_epi], [1.0]
    if k:
        rec_vals, rec_p = [], []
        for combo in itertools.product(*[range(len(s)) for s in supports]):
            p = np.prod([pmfs[i][j] for i, j in enumerate(combo)])
            rec_vals.append(max(max(supports[i][j] for i, j in enumerate(combo)), r_epi))
            rec_p.append(p)
    rec_vals = np.array(rec_vals)
    rec_p = np.array(rec_p)
    grids = np.meshgrid(*([u] * k), indexing="ij") if k else []
    wts = np.ones([nodes] * k) if k else np.ones(())
    for i in range(k):
        shape = [1] * k
        shape[i] = nodes
        wts = wts * w.reshape(shape)
    t_epi = (sum(t_c_nbrs[i] * grids[i] for i in range(k)) + z_epi) / (k + 1)
    t_epi = np.asarray(t_epi)[..., None]
    p = rec_vals / (t_epi + rec_vals)
    return float(np.sum(wts[..., None] * p * rec_p))
