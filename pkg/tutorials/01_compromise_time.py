"""
Substation compromise time
==========================

How long does an attacker need to take a substation down? The answer here
combines three ingredients: the job threads serving each host, whether the
host runs smart monitoring, and the chain of vulnerabilities the attacker
must exploit to reach it.
"""

import numpy as np

from cyberins.cps import (
    JobAssignment,
    attack_path,
    build_exploit_chain,
    compromise_times,
    host_rates,
    node_factors,
    sojourn_time,
)
from cyberins.model import ScenarioConfig, load_fixture
from cyberins.rng import substream

# Start from the baseline server rates. Adding threads lengthens the time a
# vulnerability stays open to the attacker, and the gain is large because
# threads are recruited far faster than they fail.
lam, mu = host_rates("S1", ScenarioConfig())
for j in ("J1", "J2", "J3"):
    print(j, f"{sojourn_time(JobAssignment(j, lam, mu)):.4g} h")

# Smart monitoring folds the backup elements into a composite two-state
# model with a faster effective repair.
lam_m, mu_m = host_rates("S1", ScenarioConfig(smart_monitoring={"default": True}))
print("availability without / with monitoring:", mu / (mu + lam), mu_m / (mu_m + lam_m))

# %%
# The exploit chain
# -----------------
# On the bundled three-bus system the attacker enters at the first control
# center. The path to S3 crosses four vulnerabilities; each adds its joint
# exploit probability and the compromise time is the sojourn average
# weighted by those joints.
grid, graph, scenario = load_fixture("three_bus")
path = attack_path(graph, "S3")
chain = build_exploit_chain(path, rng=np.random.default_rng(0))
for node, pv, cond in zip(chain.node_ids, chain.p_v, chain.p_c_given_v):
    print(f"{node:6s} p(v)={pv:.2f} p(c|v)={cond:.3f}")

# The pipeline draws one factor per node from a seeded substream so every
# host shares the draws of the nodes they have in common.
factors = node_factors(graph, substream(42, "exploit"))
for h, t in compromise_times(graph, scenario, factors).items():
    print(h, f"{t:.0f} h")
