"""Infeasibility-aware comparison of stochastic algorithms.

Each algorithm is run K times per instance; a run's outcome is an
:class:`~nurseroster.problem.ExtendedCost`. Two algorithms are compared on
one instance by the mean of a trial-vs-trial score over all pairs of runs
(the E measure), which needs no numeric value for infeasible runs. E values
then feed per-instance rankings, a Friedman test across instances, and
pairwise Wilcoxon signed-rank and sign tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .problem import ExtendedCost

SIGNIFICANCE = 0.05


def _check_alpha(alpha: float) -> None:
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def pair_D(c_i: ExtendedCost, c_j: ExtendedCost, alpha: float = 1.0) -> float:
    """Score of one trial of algorithm i against one trial of algorithm j.

    +1 / -1 when exactly one of the two is infeasible (the feasible one wins),
    +alpha / -alpha when both are feasible and differ, 0 on equal outcomes
    (including two infeasible ones).
    """
    _check_alpha(alpha)
    if c_i == c_j:
        return 0.0
    sign = 1.0 if c_i < c_j else -1.0
    if c_i.feasible and c_j.feasible:
        return sign * alpha
    return sign


@dataclass(frozen=True)
class TrialSet:
    algorithm: str
    instance: str
    costs: tuple[ExtendedCost, ...]

    def __post_init__(self):
        costs = tuple(c if isinstance(c, ExtendedCost) else ExtendedCost.parse(str(c)) for c in self.costs)
        if not costs:
            raise ValueError(f"empty trial set for {self.algorithm} on {self.instance}")
        object.__setattr__(self, "costs", costs)

    @classmethod
    def of(cls, algorithm: str, instance: str, costs: Iterable) -> "TrialSet":
        """Build from ints and ``"INF"``/``None`` tokens."""
        parsed = []
        for c in costs:
            if isinstance(c, ExtendedCost):
                parsed.append(c)
            elif c is None:
                parsed.append(ExtendedCost(None))
            else:
                parsed.append(ExtendedCost.parse(str(c)))
        return cls(algorithm, instance, tuple(parsed))

    def as_array(self) -> np.ndarray:
        """Costs as floats with infeasible runs at +inf (order-preserving)."""
        return np.array([c.as_float() for c in self.costs])

    def __len__(self):
        return len(self.costs)


@dataclass(frozen=True)
class PairCounts:
    """Outcome counts over all K x L trial pairs, from the first set's point of view."""

    wins_feasible: int
    losses_feasible: int
    wins_infeasible: int
    losses_infeasible: int
    ties: int

    @property
    def wins(self) -> int:
        return self.wins_feasible + self.wins_infeasible

    @property
    def losses(self) -> int:
        return self.losses_feasible + self.losses_infeasible

    @property
    def total(self) -> int:
        return self.wins + self.losses + self.ties

    def e_value(self, alpha: float = 1.0) -> float:
        net = self.wins_infeasible - self.losses_infeasible
        if alpha == 1:
            return (net + self.wins_feasible - self.losses_feasible) / self.total
        return (net + alpha * (self.wins_feasible - self.losses_feasible)) / self.total


def pair_counts(a: TrialSet, b: TrialSet) -> PairCounts:
    x, y = a.as_array()[:, None], b.as_array()[None, :]
    both = np.isfinite(x) & np.isfinite(y)
    less, greater = x < y, x > y
    return PairCounts(
        wins_feasible=int((less & both).sum()),
        losses_feasible=int((greater & both).sum()),
        wins_infeasible=int((less & ~both).sum()),
        losses_infeasible=int((greater & ~both).sum()),
        ties=int((x == y).sum()),
    )


def compute_E(a: TrialSet, b: TrialSet, alpha: float = 1.0) -> float:
    """Mean of :func:`pair_D` over every pair of a trial from ``a`` and one from ``b``."""
    _check_alpha(alpha)
    if a.instance != b.instance:
        raise ValueError(f"trial sets are for different instances: {a.instance!r} vs {b.instance!r}")
    return pair_counts(a, b).e_value(alpha)


@dataclass(frozen=True)
class EMatrix:
    instance: str
    algorithms: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = (self.algorithms.index(x) for x in pair)
        return float(self.values[i, j])

    def cycles(self) -> list[tuple[str, str, str]]:
        """Triples (h, i, j) with h beating i, i beating j and j beating h.

        Each cycle is listed once, starting from its lowest-indexed algorithm.
        """
        v, names = self.values, self.algorithms
        out = []
        for h, i, j in itertools.permutations(range(len(names)), 3):
            if h < i and h < j and v[h, i] > 0 and v[i, j] > 0 and v[j, h] > 0:
                out.append((names[h], names[i], names[j]))
        return out


def e_matrix(trial_sets: Sequence[TrialSet], alpha: float = 1.0) -> EMatrix:
    _check_alpha(alpha)
    instances = {ts.instance for ts in trial_sets}
    if len(instances) != 1:
        raise ValueError(f"trial sets span several instances: {sorted(instances)}")
    k = len(trial_sets)
    values = np.zeros((k, k))
    for i, j in itertools.combinations(range(k), 2):
        values[i, j] = compute_E(trial_sets[i], trial_sets[j], alpha)
        values[j, i] = -values[i, j]
    return EMatrix(instances.pop(), tuple(ts.algorithm for ts in trial_sets), values)


def copeland_scores(values: np.ndarray) -> np.ndarray:
    """Net pairwise wins: for each row, the number of positive minus negative off-diagonal entries."""
    return np.sign(values).sum(axis=1)


def rank_instance(trial_sets: Sequence[TrialSet], alpha: float = 1.0) -> np.ndarray:
    """Mid-ranks of the algorithms on one instance, 1 = worst, K = best.

    Algorithms are scored by Copeland's rule on the sign of the E measure,
    which stays well defined when pairwise relations are cyclic.
    """
    if len(trial_sets) < 2:
        raise ValueError("ranking needs at least two algorithms")
    return sps.rankdata(copeland_scores(e_matrix(trial_sets, alpha).values), method="average")


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    test: str
    statistics: dict
    n: int
    p_value: float
    z: float | None = None
    exact: bool = False
    sidedness: str = "two-sided"
    degenerate: bool = False

    def significant(self, level: float = SIGNIFICANCE) -> bool:
        return not self.degenerate and self.p_value < level

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistics": {k: _plain(v) for k, v in self.statistics.items()},
            "n": self.n,
            "z": self.z,
            "exact": self.exact,
            "p_value": self.p_value,
            "sidedness": self.sidedness,
            "degenerate": self.degenerate,
        }


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def friedman(rank_matrix) -> TestOutcome:
    """Friedman test on a P x K matrix of within-block mid-ranks.

    The statistic is divided by the usual tie correction
    ``1 - sum(t^3 - t) / (P K (K^2 - 1))`` and referred to chi-square with
    K - 1 degrees of freedom. When every block is fully tied the statistic
    is taken as 0 (p = 1).
    """
    r = np.asarray(rank_matrix, dtype=float)
    if r.ndim != 2:
        raise ValueError("rank matrix must be 2-D (instances x algorithms)")
    blocks, k = r.shape
    if blocks < 2:
        raise ValueError("Friedman's test needs at least two instances")
    if k < 2:
        raise ValueError("Friedman's test needs at least two algorithms")
    sums = r.sum(axis=0)
    raw = 12.0 / (blocks * k * (k + 1)) * np.sum(sums**2) - 3.0 * blocks * (k + 1)
    ties = 0.0
    for row in r:
        _, counts = np.unique(row, return_counts=True)
        ties += float(np.sum(counts**3 - counts))
    correction = 1.0 - ties / (blocks * k * (k * k - 1))
    degenerate = correction <= 1e-12
    stat = 0.0 if degenerate else max(raw / correction, 0.0)
    p = 1.0 if degenerate else float(sps.chi2.sf(stat, k - 1))
    return TestOutcome(
        "friedman",
        {"S": stat, "df": k - 1, "average_ranks": sums / blocks},
        n=blocks,
        p_value=p,
        degenerate=degenerate,
    )


def wilcoxon_signed_rank(values: Sequence[float]) -> TestOutcome:
    """Wilcoxon signed-rank test of symmetry about zero, normal approximation.

    Exact zeros are dropped; absolute values are mid-ranked. No continuity
    correction and no tie correction to the variance are applied.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("Wilcoxon's test needs at least one value")
    nz = v[v != 0]
    n = nz.size
    if n == 0:
        return TestOutcome("wilcoxon", {"T+": 0.0, "T-": 0.0}, n=0, p_value=1.0, z=0.0, degenerate=True)
    ranks = sps.rankdata(np.abs(nz), method="average")
    t_plus = float(ranks[nz > 0].sum())
    t_minus = float(ranks[nz < 0].sum())
    mean = n * (n + 1) / 4
    sd = math.sqrt(n * (n + 1) * (2 * n + 1) / 24)
    z = (t_plus - mean) / sd
    p = float(min(1.0, 2 * sps.norm.sf(abs(z))))
    return TestOutcome("wilcoxon", {"T+": t_plus, "T-": t_minus}, n=n, p_value=p, z=z)


def sign_test(values: Sequence[float]) -> TestOutcome:
    """Exact two-sided sign test: B positives among n nonzero values against Binomial(n, 1/2)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("the sign test needs at least one value")
    b = int((v > 0).sum())
    n = int((v != 0).sum())
    if n == 0:
        return TestOutcome("sign", {"B": 0}, n=0, p_value=1.0, exact=True, degenerate=True)
    lower = sps.binom.cdf(b, n, 0.5)
    upper = sps.binom.sf(b - 1, n, 0.5)
    p = float(min(1.0, 2 * min(lower, upper)))
    return TestOutcome("sign", {"B": b}, n=n, p_value=p, exact=True)


@dataclass(frozen=True)
class PairwiseOutcome:
    first: str
    second: str
    e_values: np.ndarray
    wilcoxon: TestOutcome
    sign: TestOutcome

    def verdict(self, level: float = SIGNIFICANCE) -> str:
        """``"first"``/``"second"`` for the significantly better algorithm, or ``"none"``.

        Significant means both tests reject at ``level``; the direction comes
        from the sign of the Wilcoxon statistic.
        """
        if self.wilcoxon.significant(level) and self.sign.significant(level):
            return "first" if self.wilcoxon.z > 0 else "second"
        return "none"

    def to_dict(self, level: float = SIGNIFICANCE) -> dict:
        return {
            "first": self.first,
            "second": self.second,
            "e_values": self.e_values.tolist(),
            "wilcoxon": self.wilcoxon.to_dict(),
            "sign": self.sign.to_dict(),
            "verdict": self.verdict(level),
        }


@dataclass(frozen=True)
class ComparisonReport:
    alpha: float
    algorithms: tuple[str, ...]
    instances: tuple[str, ...]
    ematrices: tuple[EMatrix, ...]
    ranks: np.ndarray
    average_ranks: np.ndarray
    friedman: TestOutcome | None
    pairwise: tuple[PairwiseOutcome, ...]
    cycles: dict = field(default_factory=dict)

    def ordering(self) -> list[str]:
        """Algorithms from best to worst by average rank (ties keep input order)."""
        order = np.argsort(-self.average_ranks, kind="stable")
        return [self.algorithms[i] for i in order]

    def verdicts(self, level: float = SIGNIFICANCE) -> dict[tuple[str, str], str]:
        return {(p.first, p.second): p.verdict(level) for p in self.pairwise}

    def to_dict(self, level: float = SIGNIFICANCE) -> dict:
        return {
            "alpha": self.alpha,
            "algorithms": list(self.algorithms),
            "instances": list(self.instances),
            "e_matrices": {em.instance: em.values.tolist() for em in self.ematrices},
            "ranks": {inst: row.tolist() for inst, row in zip(self.instances, self.ranks)},
            "average_ranks": dict(zip(self.algorithms, self.average_ranks.tolist())),
            "ordering": self.ordering(),
            "friedman": self.friedman.to_dict() if self.friedman else None,
            "pairwise": [p.to_dict(level) for p in self.pairwise],
            "cycles": {k: [list(c) for c in v] for k, v in self.cycles.items()},
            "significance_level": level,
        }

    def to_text(self, level: float = SIGNIFICANCE) -> str:
        names = self.algorithms
        width = max(8, *(len(a) + 2 for a in names))
        inst_w = max(10, *(len(i) + 2 for i in self.instances)) if self.instances else 10
        lines = [f"alpha = {self.alpha:g}", "", "Per-instance ranks (1 = worst)"]
        lines.append("instance".ljust(inst_w) + "".join(a.rjust(width) for a in names))
        for inst, row in zip(self.instances, self.ranks):
            lines.append(inst.ljust(inst_w) + "".join(f"{x:g}".rjust(width) for x in row))
        lines.append("average".ljust(inst_w) + "".join(f"{x:.3f}".rjust(width) for x in self.average_ranks))
        lines += ["", "Ordering (best first): " + " > ".join(self.ordering())]
        if self.friedman:
            f = self.friedman
            lines.append(f"Friedman: S = {f.statistics['S']:.3f}, df = {f.statistics['df']}, p = {f.p_value:.4g}")
        else:
            lines.append("Friedman: not applicable (needs at least two instances and two algorithms)")
        if self.pairwise:
            lines += ["", "Pairwise tests on E values"]
            header = f"{'pair':<{2 * width}}{'T+':>10}{'T-':>10}{'Z':>9}{'p(W)':>10}{'B':>5}{'n':>5}{'p(S)':>10}  verdict"
            lines.append(header)
            for p in self.pairwise:
                w, s = p.wilcoxon, p.sign
                verdict = {"first": f"{p.first} better", "second": f"{p.second} better", "none": "no difference"}
                lines.append(
                    f"{p.first + ' vs ' + p.second:<{2 * width}}"
                    f"{w.statistics['T+']:>10g}{w.statistics['T-']:>10g}{w.z:>9.3f}{w.p_value:>10.3g}"
                    f"{s.statistics['B']:>5}{s.n:>5}{s.p_value:>10.3g}  {verdict[p.verdict(level)]}"
                )
        cyc = {k: v for k, v in self.cycles.items() if v}
        if cyc:
            lines += ["", "Cyclic pairwise relations:"]
            for inst, cs in cyc.items():
                lines.append(f"  {inst}: " + "; ".join(" > ".join(c) for c in cs))
        return "\n".join(lines) + "\n"


def _grid(trial_sets: Iterable[TrialSet]) -> tuple[list[str], list[str], dict]:
    cells: dict[tuple[str, str], TrialSet] = {}
    algorithms: list[str] = []
    instances: list[str] = []
    for ts in trial_sets:
        key = (ts.algorithm, ts.instance)
        if key in cells:
            raise ValueError(f"duplicate trial set for algorithm {ts.algorithm!r} on {ts.instance!r}")
        cells[key] = ts
        if ts.algorithm not in algorithms:
            algorithms.append(ts.algorithm)
        if ts.instance not in instances:
            instances.append(ts.instance)
    missing = [(a, i) for i in instances for a in algorithms if (a, i) not in cells]
    if missing:
        listed = ", ".join(f"{a}@{i}" for a, i in missing)
        raise ValueError(f"incomplete results grid, missing cells: {listed}")
    return algorithms, instances, cells


def overall_comparison(trial_sets: Iterable[TrialSet], alpha: float = 1.0) -> ComparisonReport:
    """E matrices, per-instance ranks, Friedman's test and all pairwise tests.

    Every algorithm must have a trial set on every instance. Pairwise
    Wilcoxon and sign tests use the per-instance E values of the first
    algorithm against the second, pairs taken in order of first appearance.
    """
    _check_alpha(alpha)
    algorithms, instances, cells = _grid(trial_sets)
    ematrices = tuple(e_matrix([cells[a, inst] for a in algorithms], alpha) for inst in instances)
    k = len(algorithms)
    if k >= 2:
        ranks = np.array([sps.rankdata(copeland_scores(em.values), method="average") for em in ematrices])
    else:
        ranks = np.ones((len(instances), k))
    ranks = ranks.reshape(len(instances), k)
    average = ranks.mean(axis=0) if len(instances) else np.full(k, np.nan)
    fr = friedman(ranks) if len(instances) >= 2 and k >= 2 else None
    pairwise = []
    for i, j in itertools.combinations(range(k), 2):
        e = np.array([em.values[i, j] for em in ematrices])
        pairwise.append(PairwiseOutcome(algorithms[i], algorithms[j], e, wilcoxon_signed_rank(e), sign_test(e)))
    return ComparisonReport(
        alpha=alpha,
        algorithms=tuple(algorithms),
        instances=tuple(instances),
        ematrices=ematrices,
        ranks=ranks,
        average_ranks=average,
        friedman=fr,
        pairwise=tuple(pairwise),
        cycles={em.instance: em.cycles() for em in ematrices},
    )


def alpha_stability(reports: Mapping[float, ComparisonReport], level: float = SIGNIFICANCE) -> dict:
    """Whether per-instance rank rows and pairwise verdicts agree across alpha values."""
    items = sorted(reports.items())
    if not items:
        return {"alphas": [], "ranks_stable": True, "verdicts_stable": True, "differences": []}
    ref_alpha, ref = items[0]
    diffs = []
    for alpha, rep in items[1:]:
        for inst, a, b in zip(ref.instances, ref.ranks, rep.ranks):
            if not np.array_equal(a, b):
                diffs.append(f"ranks on {inst} differ between alpha={ref_alpha:g} and alpha={alpha:g}")
        ref_v, v = ref.verdicts(level), rep.verdicts(level)
        for pair, verdict in ref_v.items():
            if v.get(pair) != verdict:
                diffs.append(f"verdict {pair[0]} vs {pair[1]} differs between alpha={ref_alpha:g} and alpha={alpha:g}")
    return {
        "alphas": [a for a, _ in items],
        "ranks_stable": not any(d.startswith("ranks") for d in diffs),
        "verdicts_stable": not any(d.startswith("verdict") for d in diffs),
        "differences": diffs,
    }
