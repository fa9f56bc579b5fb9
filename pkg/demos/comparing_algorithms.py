"""
Comparing stochastic solvers when some runs fail
================================================

A run that ends without a feasible roster has no cost to average. Instead
of inventing one, every trial of one algorithm is compared with every
trial of another: a win scores +1, a loss -1, a tie 0, and an infeasible
run loses to any feasible one. The mean of those scores is the E measure.
"""

import numpy as np

from nurseroster.harness import paper_e_values, paper_table2
from nurseroster.stats import (
    TrialSet,
    compute_E,
    overall_comparison,
    pair_counts,
    rank_instance,
    sign_test,
    wilcoxon_signed_rank,
)

# three made-up algorithms, ten runs each; INF marks a run with no feasible roster
alg3 = TrialSet.of("ALG3", "p", [1, 1, 1, 2, 3, 3, 3, 4, 5, 5])
alg4 = TrialSet.of("ALG4", "p", [2, 4, 5, 5, 6, 7, 8, 8, "INF", "INF"])
alg5 = TrialSet.of("ALG5", "p", [3, 4, 5, 8, 9, 10, 10, "INF", "INF", "INF"])

c = pair_counts(alg3, alg4)
print(f"ALG3 vs ALG4: {c.wins} wins, {c.ties} ties, {c.losses} losses -> E = {compute_E(alg3, alg4):+.2f}")
print(f"ALG3 vs ALG5: E = {compute_E(alg3, alg5):+.2f}")
print(f"ALG4 vs ALG5: E = {compute_E(alg4, alg5):+.2f}")

# with alpha < 1 a feasible-vs-feasible win counts for less than beating an infeasible run
for alpha in (0.5, 1.0):
    print(f"alpha={alpha}: E(ALG4, ALG5) = {compute_E(alg4, alg5, alpha):+.3f}")

###############################################################################
# Ranking eight GA variants on three weeks of published costs
# -----------------------------------------------------------
# Each algorithm scores one point per rival it beats (positive E) and loses
# one per rival it loses to. Ranks run from 1 (worst) to 8 (best), with
# mid-ranks for ties.

sets = paper_table2()
for week in ("week01", "week02", "week03"):
    ranks = rank_instance([t for t in sets if t.instance == week])
    print(week, " ".join(f"{r:g}" for r in ranks))

report = overall_comparison(sets)
print(report.to_text())

###############################################################################
# Paired tests over 52 weeks
# --------------------------
# Given per-week E values for a pair of algorithms, Wilcoxon's signed-rank
# test asks whether they are centred on zero, and the sign test asks whether
# positive and negative weeks are equally likely.

for label, which in (("V6 vs V3", "v6_v3"), ("V8 vs V6", "v8_v6")):
    e = paper_e_values(which)
    w, s = wilcoxon_signed_rank(e), sign_test(e)
    print(
        f"{label}: T+={w.statistics['T+']:g} T-={w.statistics['T-']:g} Z={w.z:.3f} p={w.p_value:.3g}; "
        f"B={s.statistics['B']} of n={s.n}, p={s.p_value:.3g}"
    )

# median week-by-week advantage, for a sense of scale
print("median E (V8 vs V6):", np.median(paper_e_values("v8_v6")))
