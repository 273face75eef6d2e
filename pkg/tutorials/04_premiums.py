"""
Premiums, indemnities and insolvency
====================================

Three ways to price mutual cover for the same annual losses: each grid pays
its own tail expectation, or the pool's tail buffer is shared, or each pays
its Shapley share of a binomially weighted VaR cost.
"""

import numpy as np

from cyberins.actuarial import premium_report, shapley_values, shapley_cost

# A small Shapley game first. With VaRs 10, 20 and 30 and a fair coin for
# each claim the shares come out at 0.375 VaR minus a twelfth of the total.
print(shapley_values(3, shapley_cost(np.array([10.0, 20.0, 30.0]), 0.5)))

# %%
# Forty years of heavy-tailed losses for four grids, with a common shock.
rng = np.random.default_rng(4)
shock = rng.pareto(2.5, size=(40, 1))
losses = 20 * (0.6 * shock + 0.4 * rng.pareto(2.5, size=(40, 4))) * np.array([1.0, 1.5, 2.0, 0.7])

report = premium_report(losses, ["A", "B", "C", "D"], level=0.1)
print(f"{'tg':3s} {'design':6s} {'premium':>9s} {'indemnity':>10s} {'rho':>6s} {'phi':>6s}")
for tg, d, p, g, rho, phi in report.rows():
    print(f"{tg:3s} {d:6s} {p:9.2f} {g:10.2f} {rho:6.2f} {phi:6.3f}")

# With forty samples every insolvency probability is a multiple of 2.5%.
print(np.unique(np.concatenate(list(report.insolvency.values())) * 40))
