"""Indirect genetic algorithm: evolve an ordering of nurses, decode it greedily.

The GA itself only sees permutations. A deterministic decoder walks the
nurses in permutation order and gives each the best-scoring pattern of its
feasible set given the demand still uncovered, so all problem knowledge sits
in the decoder.

Two parts of the decoder and operator set are approximations of mechanisms
that are only named, not defined, in the literature this package follows:
the look-ahead bound (a criticality bonus, see :func:`decode`) and the
"automatic" crossover and auto-weight options (see :class:`IndirectOperators`).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numba
import numpy as np

from .ga_direct import GaConfig, Operators, TrialResult, _rng, evolve
from .problem import ProblemInstance, population_scores

MODES = ("lowest_cost", "most_uncovered", "combined")
BOUNDS = ("none", "greedy", "look_ahead")
INDIRECT_CROSSOVERS = ("uniform", "one_point", "ox1", "two_point", "automatic", "rank_based", "bound_based")

AUTO_EPSILON = 0.1
WEIGHT_UP, WEIGHT_DOWN = 1.1, 0.95
WEIGHT_RANGE = (1.0, 1e4)
CACHE_LIMIT = 200_000


@dataclass(frozen=True)
class DecoderConfig:
    """How the greedy decoder scores a pattern for the nurse being placed.

    ``w_cover=None`` means "use the instance's mean feasible preference
    cost", which keeps the cover and cost terms on comparable scales.
    """

    mode: str = "combined"
    w_cover: float | None = None
    w_cost: float = 1.0
    bound: str = "look_ahead"
    auto_weights: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"decoder mode must be one of {MODES}, got {self.mode!r}")
        if self.bound not in BOUNDS:
            raise ValueError(f"decoder bound must be one of {BOUNDS}, got {self.bound!r}")
        if self.w_cost < 0 or (self.w_cover is not None and self.w_cover < 0):
            raise ValueError("decoder weights must be nonnegative")

    def cover_weight(self, inst: ProblemInstance) -> float:
        if self.w_cover is not None:
            return float(self.w_cover)
        return float(inst.pref_cost[inst.feasible_mask].mean())

    def to_dict(self) -> dict:
        return asdict(self)


def _check_perm(perm: np.ndarray, n: int) -> None:
    if perm.shape[-1] != n or not np.array_equal(np.sort(perm, axis=-1), np.broadcast_to(np.arange(n), perm.shape)):
        raise ValueError("not a permutation of the nurses")


@numba.njit(cache=True)
def _decode_kernel(perms, cover, qual, cost, mask, demand, cap, mode, w_cover, w_cost, look_ahead, out):
    size, n = perms.shape
    m, slots = cover.shape
    grades = demand.shape[1]
    residual = np.empty_like(demand)
    cap_left = np.empty_like(demand)
    cap_total = np.zeros_like(demand)
    for i in range(n):
        cap_total += cap[i]
    open_k = np.empty(slots)
    crit_k = np.empty(slots)
    for r in range(size):
        residual[:] = demand
        cap_left[:] = cap_total
        for t in range(n):
            i = perms[r, t]
            if look_ahead:
                cap_left -= cap[i]
            # per slot: open cells this nurse qualifies for, and how many of them are critical
            for k in range(slots):
                open_k[k] = 0.0
                crit_k[k] = 0.0
                for s in range(grades):
                    if qual[i, s] and residual[k, s] > 0:
                        open_k[k] += 1.0
                        if look_ahead and residual[k, s] > cap_left[k, s]:
                            crit_k[k] += 1.0
            best_j = -1
            best_score = -np.inf
            best_cost = np.inf
            for j in range(m):
                if not mask[i, j]:
                    continue
                units = 0.0
                crit = 0.0
                for k in range(slots):
                    if cover[j, k]:
                        units += open_k[k]
                        crit += crit_k[k]
                c = cost[i, j]
                if mode == 0:
                    score = -c
                elif mode == 1:
                    score = units
                else:
                    score = w_cover * units - w_cost * c
                if look_ahead:
                    score = score + w_cover * crit
                # ties: lower preference cost, then lower pattern index
                if best_j < 0 or score > best_score or (score == best_score and c < best_cost):
                    best_j, best_score, best_cost = j, score, c
            out[r, i] = best_j
            for k in range(slots):
                if cover[best_j, k]:
                    for s in range(grades):
                        if qual[i, s] and residual[k, s] > 0:
                            residual[k, s] -= 1


def decode_batch(perms: np.ndarray, inst: ProblemInstance, dcfg: DecoderConfig, w_cover: float | None = None) -> np.ndarray:
    """Decode a P x n array of nurse orderings into a P x n array of rosters."""
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    w_cover = dcfg.cover_weight(inst) if w_cover is None else w_cover
    out = np.empty(perms.shape, dtype=np.int64)
    _decode_kernel(
        perms,
        inst.cover.astype(np.bool_),
        inst.qual.astype(np.bool_),
        inst.pref_cost.astype(np.float64),
        inst.feasible_mask,
        inst.demand,
        inst.slot_capacity(),
        MODES.index(dcfg.mode),
        float(w_cover),
        float(dcfg.w_cost),
        dcfg.bound == "look_ahead",
        out,
    )
    return out


def decode(perm: Sequence[int], inst: ProblemInstance, dcfg: DecoderConfig | None = None) -> np.ndarray:
    """Build a roster by placing nurses greedily in ``perm`` order.

    Residual demand starts at the instance demand and each placement lowers
    every (slot, grade) cell the nurse covers, never below zero. For the
    nurse being placed every pattern in its feasible set is scored:

    * ``lowest_cost``: minus the preference cost;
    * ``most_uncovered``: the number of still-open cells the pattern covers;
    * ``combined``: ``w_cover * covered - w_cost * cost``.

    With ``bound="look_ahead"`` a pattern also earns ``w_cover`` for each
    covered cell whose residual demand exceeds the number of nurses not yet
    placed who could still cover it. ``"greedy"`` and ``"none"`` add nothing.
    The highest score wins; ties go to the lower cost, then the lower index.
    """
    dcfg = dcfg or DecoderConfig()
    perm = np.asarray(perm)
    _check_perm(perm, inst.n)
    return decode_batch(perm[None, :], inst, dcfg)[0]


def order_fill(a: np.ndarray, b: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Keep ``a`` where ``keep`` is set; fill the other positions left to right
    with the elements of ``b`` not yet used, in ``b``'s order."""
    size, n = a.shape
    rows = np.arange(size)[:, None]
    used = np.zeros((size, n), dtype=bool)
    used[rows, a] = keep
    b_order = np.argsort(used[rows, b], axis=1, kind="stable")
    free = np.argsort(keep, axis=1, kind="stable")
    child = a.copy()
    fill = np.arange(n)[None, :] < (n - keep.sum(axis=1))[:, None]
    r, k = np.nonzero(fill)
    child[r, free[r, k]] = b[r, b_order[r, k]]
    return child


def _segments(size: int, n: int, rng: np.random.Generator) -> np.ndarray:
    cuts = np.sort(rng.integers(0, n, size=(size, 2)), axis=1)
    pos = np.arange(n)[None, :]
    return (pos >= cuts[:, :1]) & (pos <= cuts[:, 1:])


def uniform_order_batch(a, b, bias, rng):
    bias = np.broadcast_to(np.asarray(bias, dtype=float).reshape(-1, 1), (a.shape[0], 1))
    return order_fill(a, b, rng.random(a.shape) < bias)


def one_point_order_batch(a, b, rng):
    n = a.shape[1]
    if n == 1:
        return a.copy()
    cut = rng.integers(1, n, size=(a.shape[0], 1))
    return order_fill(a, b, np.arange(n)[None, :] < cut)


def ox1_batch(a, b, rng):
    return order_fill(a, b, _segments(a.shape[0], a.shape[1], rng))


def two_point_order_batch(a, b, rng):
    """Complement of OX1: ``a`` outside a random segment, ``b``'s order inside it."""
    return order_fill(a, b, ~_segments(a.shape[0], a.shape[1], rng))


def order_crossover(parent_a: Sequence[int], parent_b: Sequence[int], rng=None) -> np.ndarray:
    """OX1: copy a random contiguous segment of ``parent_a`` into place and fill
    the remaining positions, left to right, with ``parent_b``'s other
    elements in ``parent_b``'s order."""
    a, b = np.atleast_2d(parent_a), np.atleast_2d(parent_b)
    return ox1_batch(a, b, _rng(rng))[0]


def swap_mutation_batch(perms: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    size, n = perms.shape
    hit = rng.random(size) < rate
    if n < 2:
        return perms.copy()
    i = rng.integers(0, n, size=size)
    j = (i + rng.integers(1, n, size=size)) % n
    out = perms.copy()
    r = np.flatnonzero(hit)
    out[r, i[r]], out[r, j[r]] = perms[r, j[r]], perms[r, i[r]]
    return out


def swap_mutation(perm: Sequence[int], rate: float, rng=None) -> np.ndarray:
    """With probability ``rate`` swap two distinct uniformly chosen positions."""
    if not 0 <= rate <= 1:
        raise ValueError("rate must lie in [0, 1]")
    return swap_mutation_batch(np.atleast_2d(perm), rate, _rng(rng))[0]


class IndirectOperators(Operators):
    """Permutation genotype with decoder phenotype.

    ``automatic`` crossover picks, each generation, between OX1 and the
    two-point variant: with probability 0.1 at random, otherwise the one
    whose offspring most often beat their parents' mean fitness when last
    used. Auto-weights multiply the decoder's cover weight by 1.1 after a
    generation whose best individual is infeasible and by 0.95 otherwise,
    clamped to [1, 10^4].
    """

    def __init__(self, inst, cfg, dcfg):
        if cfg.crossover not in INDIRECT_CROSSOVERS:
            raise ValueError(f"indirect GA crossover must be one of {INDIRECT_CROSSOVERS}, got {cfg.crossover!r}")
        super().__init__(inst, cfg)
        self.dcfg = dcfg
        self.w_cover = dcfg.cover_weight(inst)
        if dcfg.auto_weights:
            self.w_cover = float(np.clip(self.w_cover, *WEIGHT_RANGE))
        self.success = {"ox1": 1.0, "two_point": 1.0}
        self._last_op = None
        # the decoder is deterministic, so decoded rosters and their scores are
        # memoised per cover weight, keyed by the permutation
        n = inst.n
        self._radix = n ** np.arange(n, dtype=np.int64) if n**n < 2**62 else None
        self._index: dict = {}
        self._cache_weight = self.w_cover
        self._rosters = np.zeros((0, n), dtype=np.int64)
        self._cost = np.zeros(0, dtype=np.int64)
        self._short = np.zeros(0, dtype=np.int64)

    def init(self, size, rng):
        return np.argsort(rng.random((size, self.inst.n)), axis=1)

    def phenotype(self, pop):
        return self.score(pop)[0]

    def _keys(self, pop):
        if self._radix is not None:
            return (pop @ self._radix).tolist()
        return [row.tobytes() for row in pop]

    def score(self, pop):
        if self._cache_weight != self.w_cover or len(self._index) >= CACHE_LIMIT:
            self._index.clear()
            self._cache_weight = self.w_cover
        index = self._index
        keys = self._keys(pop)
        todo = {}
        for i, k in enumerate(keys):
            if k not in index and k not in todo:
                todo[k] = i
        if todo:
            rows = list(todo.values())
            rosters = decode_batch(pop[rows], self.inst, self.dcfg, self.w_cover)
            cost, short = population_scores(self.inst, rosters)
            start = len(index)
            stop = start + len(rows)
            if stop > len(self._rosters):
                grow = max(2 * len(self._rosters), stop)
                self._rosters = np.resize(self._rosters, (grow, self.inst.n))
                self._cost = np.resize(self._cost, grow)
                self._short = np.resize(self._short, grow)
            self._rosters[start:stop], self._cost[start:stop], self._short[start:stop] = rosters, cost, short
            for slot, k in enumerate(todo, start):
                index[k] = slot
        slots = [index[k] for k in keys]
        return self._rosters[slots], self._cost[slots], self._short[slots]

    def breed(self, a, b, fit_a, fit_b, rng):
        kind = self.cfg.crossover
        if kind == "uniform":
            return uniform_order_batch(a, b, self.cfg.bias, rng)
        if kind == "one_point":
            return one_point_order_batch(a, b, rng)
        if kind == "ox1":
            return ox1_batch(a, b, rng)
        if kind == "two_point":
            return two_point_order_batch(a, b, rng)
        if kind == "rank_based":
            # the wider the fitness-rank gap between the parents, the more of the fitter one is kept
            allfit = np.concatenate([fit_a, fit_b])
            rank = np.argsort(np.argsort(-allfit, kind="stable"), kind="stable") / max(len(allfit) - 1, 1)
            gap = rank[: len(fit_a)] - rank[len(fit_a) :]
            return uniform_order_batch(a, b, 0.5 + 0.5 * np.clip(gap, 0, 1), rng)
        if kind == "bound_based":
            # bias from the relative fitness gap: equal parents mix evenly, a dominant parent is mostly kept
            gap = (fit_b - fit_a) / np.maximum(np.abs(fit_b), 1.0)
            return uniform_order_batch(a, b, 0.5 + 0.5 * np.clip(gap, 0, 1), rng)
        if rng.random() < AUTO_EPSILON:
            op = ("ox1", "two_point")[int(rng.integers(2))]
        else:
            op = max(self.success, key=lambda k: (self.success[k], k == "ox1"))
        self._last_op = op
        return ox1_batch(a, b, rng) if op == "ox1" else two_point_order_batch(a, b, rng)

    def mutate(self, children, rng):
        return swap_mutation_batch(children, self.cfg.mutation_rate, rng)

    def feedback(self, child_fit, parent_mean, best_feasible):
        if self._last_op is not None and len(child_fit):
            self.success[self._last_op] = float(np.mean(child_fit < parent_mean))
        if self.dcfg.auto_weights:
            factor = WEIGHT_DOWN if best_feasible else WEIGHT_UP
            self.w_cover = float(np.clip(self.w_cover * factor, *WEIGHT_RANGE))


def run_indirect_ga(inst: ProblemInstance, cfg: GaConfig | None = None, dcfg: DecoderConfig | None = None) -> TrialResult:
    """Evolve nurse orderings; fitness is the penalty fitness of the decoded roster."""
    cfg = cfg or GaConfig(mutation_rate=0.5)
    return evolve(IndirectOperators(inst, cfg, dcfg or DecoderConfig()), cfg)
