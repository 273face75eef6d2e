"""
End to end on the 24-bus system
===============================

The same steps the command line runs: compromise times, epidemic states,
curtailment, monetary losses and premiums, for the six hardening scenarios.
"""

import dataclasses

from cyberins import pipeline
from cyberins.actuarial import loss_stats
from cyberins.model import load_fixture

grid, graph, scenario = load_fixture("rts24_5tg")
base = dataclasses.replace(scenario, horizon_years=4)

for name in pipeline.SCENARIOS:
    res = pipeline.simulate(grid, graph, pipeline.apply_scenario(base, name), seed=20240601)
    print(f"{name}: ELC {res.elc:8.4f} MW  EFC {res.efc:.5f}  ({sum(res.timings.values()):.1f}s)")

# %%
# Premiums for the baseline scenario over the full forty years. The
# correlation between grids comes from the copula parameter.
res = pipeline.simulate(grid, graph, dataclasses.replace(scenario, correlation=0.5), seed=20240601)
mean, sd, cov = loss_stats(res.distribution.losses)
print("mean loss (M$):", mean.round(1), " CoV:", cov.round(2))
report = pipeline.compute_premiums(res.distribution, level=0.1)
for d in report.DESIGNS:
    print(d, "premiums", report.premium[d].round(1), "insolvency", report.insolvency[d])

# The command line equivalent:
#   cyberins simulate --config <rts24_5tg.yaml> --seed 20240601 --correlation 0.5 --out run
#   cyberins premiums --losses run/losses.csv --risk-level 0.1 --out run
#   cyberins report --run run
