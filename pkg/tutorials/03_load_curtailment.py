"""
Load curtailment under outages
==============================

A DC power flow decides how much load must be shed when substations are
lost. Losing a substation takes its generation offline; lines stay in
service.
"""

import numpy as np

from cyberins.model import load_fixture
from cyberins.opf import CurtailmentLP, elc, efc, monetize, run_mcs

grid, graph, scenario = load_fixture("rts24_5tg")
lp = CurtailmentLP(grid)
print("load", lp.D.sum(), "MW, generation", lp.Gcap.sum(), "MW")

# Outages one substation at a time
for j, s in enumerate(grid.substation_ids):
    avail = np.ones(len(grid.substation_ids), dtype=np.uint8)
    avail[j] = 0
    shed = lp.solve(avail).total_curtailment
    if shed > 0:
        print(f"{s:4s} out: {shed:7.1f} MW shed")

# %%
# A toy Monte Carlo run
# ---------------------
# Random outages each hour for a year. Repeated patterns hit the cache, so
# most hours cost nothing to evaluate.
rng = np.random.default_rng(3)
states = (rng.random((8760, 24)) > 0.01).astype(np.uint8)
series = run_mcs(grid, states)
print("ELC", elc(series), "MW  EFC", efc(series))
dist = monetize(series, voll=scenario.voll)
for tg, loss in zip(dist.tg_ids, dist.losses[0]):
    print(f"{tg}: {loss:.2f} M$")
