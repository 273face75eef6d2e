"""
Correlated epidemic sampling
============================

Each hour every host is either up or taken by the attacker. A host is more
exposed when its neighbours are quick to compromise and slow to recover.
The transmission grids are linked through a Gaussian copula, so a bad year
for one tends to be a bad year for the others.
"""

import dataclasses

import numpy as np

from cyberins.cps import compromise_times, node_factors
from cyberins.epidemic import epidemic_state, equicorrelated_uniforms, generate_state_sequences
from cyberins.model import load_fixture
from cyberins.rng import substream

# An isolated substation only sees the external infection and recovery
# slots, which fixes its attack probability.
print("isolated:", epidemic_state([], [], 2000.0, 4.0).p_atk)

# The copula has one parameter. Rank-type correlation between the uniforms
# is a little below the normal correlation.
rng = np.random.default_rng(1)
for r in (0.0, 0.5, 1.0):
    u = equicorrelated_uniforms(3, r, 20_000, rng)
    print(r, np.corrcoef(u.T)[0, 1].round(3))

# %%
# Sampling a horizon
# ------------------
grid, graph, scenario = load_fixture("three_bus")
t_c = compromise_times(graph, scenario, node_factors(graph, substream(7, "exploit")))
sc = dataclasses.replace(scenario, horizon_years=3)
seq = generate_state_sequences(grid, graph, t_c, sc, seed=7, keep_probabilities=True)
for i, h in enumerate(seq.hosts):
    print(f"{h}: down {1 - seq.states[:, i].mean():.4%} of hours, mean p_atk {seq.p_atk[:, i].mean():.4%}")

# Reachability gating: when CC2 is down, the substations it controls can not
# be reached over healthy hosts and count as down too.
down_cc2 = seq.host("CC2") == 0
print("S2 up while CC2 down:", int(seq.host("S2")[down_cc2].sum()))
