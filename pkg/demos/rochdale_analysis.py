"""Ising graph, goodness of fit and a two-component test on the Rochdale table.

    python demos/rochdale_analysis.py
"""

from isingmix import (SETTING_1, builtin_dataset, fit_mle, gof_test, lrt_test,
                      posterior_gamma_ising, significant_edges)
from isingmix.gof import top_expected_counts

table = builtin_dataset("rochdale")
summary = posterior_gamma_ising(table, SETTING_1, M=20_000, rng_seed=0, R=10)
for a, b, g in significant_edges(summary):
    print(f"edge ({a},{b})  P(gamma=1 | n) = {g:.2f}")

ising = fit_mle(table, 1)
mixture = fit_mle(table, 2, shared_main=True, J=10, rng_seed=0)
print(gof_test(table, ising, statistic="pearson", df_convention="cells"))
print(gof_test(table, ising))
print(lrt_test(table, ising, mixture))
for row in top_expected_counts(table, {"ising": ising.params, "mixture": mixture.params}, top=5):
    print(row)
