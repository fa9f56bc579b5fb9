"""Direct genetic algorithm: the chromosome is the roster itself.

Gene ``i`` is the index of the shift pattern worked by nurse ``i``. Genes are
only ever drawn from the nurse's feasible set, so every individual satisfies
the one-pattern-per-nurse constraint and only demand cover is penalised.

The generational engine here (ranking selection, elitist replacement, island
model, best-ever tracking) is shared with the indirect GA.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .problem import INFEASIBLE, ExtendedCost, Feasible, ProblemInstance, population_scores

DIRECT_CROSSOVERS = ("uniform", "one_point")
SELECTIVE_PRESSURE = 1.5


@dataclass(frozen=True)
class GaConfig:
    """Run parameters common to both GAs.

    For the direct GA ``mutation_rate`` is a per-gene probability; for the
    indirect GA it is the per-individual probability of a swap. ``bias`` is
    the chance of taking a gene from the fitter parent under uniform
    crossover. ``elitism`` is the fraction of each (sub-)population carried
    over unchanged.
    """

    population: int = 100
    generations: int = 200
    crossover: str = "uniform"
    bias: float = 0.8
    mutation_rate: float = 0.05
    elitism: float = 0.1
    islands: int = 1
    migration_interval: int = 10
    migrants: int = 1
    hillclimber: bool = False
    w_demand: float = 200.0
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        for name in ("bias", "mutation_rate", "elitism"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.islands < 1:
            raise ValueError("islands must be at least 1")
        if self.population // self.islands < 2:
            raise ValueError("every island needs at least 2 individuals")
        if self.migration_interval < 1 or self.migrants < 0:
            raise ValueError("bad migration settings")
        if self.w_demand < 0:
            raise ValueError("w_demand must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def with_seed(self, seed: int) -> "GaConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrialResult:
    best: ExtendedCost
    roster: tuple[int, ...]
    best_fitness: float
    generations: int
    wall_time: float = field(compare=False)
    seed: int
    history: tuple[float, ...] = field(default=(), repr=False)
    """Best penalty fitness in the population after each generation (generation 0 first)."""


def rank_probabilities(size: int, pressure: float = SELECTIVE_PRESSURE) -> np.ndarray:
    """Linear ranking selection probabilities, best individual first."""
    if size == 1:
        return np.ones(1)
    rank = np.arange(size - 1, -1, -1, dtype=float)
    return (2 - pressure) / size + 2 * rank * (pressure - 1) / (size * (size - 1))


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def uniform_crossover_batch(a: np.ndarray, b: np.ndarray, bias: float, rng: np.random.Generator) -> np.ndarray:
    take_a = rng.random(a.shape) < bias
    return np.where(take_a, a, b)


def one_point_crossover_batch(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = a.shape[1]
    if n == 1:
        return a.copy()
    cut = rng.integers(1, n, size=(a.shape[0], 1))
    return np.where(np.arange(n)[None, :] < cut, a, b)


def uniform_crossover(parent_a: Sequence[int], parent_b: Sequence[int], bias: float, rng=None) -> np.ndarray:
    """Each gene comes from ``parent_a`` (the fitter parent) with probability ``bias``."""
    if not 0 <= bias <= 1:
        raise ValueError("bias must lie in [0, 1]")
    a, b = np.atleast_2d(parent_a), np.atleast_2d(parent_b)
    return uniform_crossover_batch(a, b, bias, _rng(rng))[0]


def one_point_crossover(parent_a: Sequence[int], parent_b: Sequence[int], rng=None) -> np.ndarray:
    """Prefix of ``parent_a`` up to a uniform cut in 1..n-1, suffix of ``parent_b``.

    With a single gene there is no cut point and a copy of ``parent_a`` is returned.
    """
    a, b = np.atleast_2d(parent_a), np.atleast_2d(parent_b)
    return one_point_crossover_batch(a, b, _rng(rng))[0]


def _padded_feasible(inst: ProblemInstance) -> tuple[np.ndarray, np.ndarray]:
    sizes = np.array([len(f) for f in inst.feasible])
    table = np.zeros((inst.n, sizes.max()), dtype=np.int64)
    for i, f in enumerate(inst.feasible):
        table[i, : len(f)] = f
    return table, sizes


def random_rosters(inst: ProblemInstance, size: int, rng: np.random.Generator, table=None) -> np.ndarray:
    table, sizes = table or _padded_feasible(inst)
    pick = np.floor(rng.random((size, inst.n)) * sizes[None, :]).astype(np.int64)
    return table[np.arange(inst.n)[None, :], pick]


def mutate_batch(pop: np.ndarray, rate: float, inst: ProblemInstance, rng: np.random.Generator, table=None) -> np.ndarray:
    hit = rng.random(pop.shape) < rate
    fresh = random_rosters(inst, pop.shape[0], rng, table)
    return np.where(hit, fresh, pop)


def mutate_direct(individual: Sequence[int], rate: float, inst: ProblemInstance, rng=None) -> np.ndarray:
    """Replace each gene, with probability ``rate``, by a uniform draw from that nurse's feasible set."""
    if not 0 <= rate <= 1:
        raise ValueError("rate must lie in [0, 1]")
    return mutate_batch(np.atleast_2d(individual), rate, inst, _rng(rng))[0]


def hillclimb(inst: ProblemInstance, r: Sequence[int], w_demand: float) -> np.ndarray:
    """First-improvement local search over single-nurse pattern changes.

    Nurses are scanned in index order; for each, the patterns of its feasible
    set are tried in index order and the first one that lowers the penalty
    fitness is taken. Passes repeat until one makes no change.
    """
    r = np.array(r, dtype=np.int64)
    nurses = np.arange(inst.n)
    cov = inst.cover[r].T @ inst.qual
    cost = int(inst.pref_cost[nurses, r].sum())
    fit = cost + w_demand * np.maximum(inst.demand - cov, 0).sum()
    changed = True
    while changed:
        changed = False
        for i in range(inst.n):
            cand = inst.feasible[i]
            q = inst.qual[i]
            base = cov - inst.cover[r[i]][:, None] * q[None, :]
            new_cov = base[None] + inst.cover[cand][:, :, None] * q[None, None, :]
            short = np.maximum(inst.demand[None] - new_cov, 0).sum(axis=(1, 2))
            new_cost = cost - inst.pref_cost[i, r[i]] + inst.pref_cost[i, cand]
            new_fit = new_cost + w_demand * short
            better = np.flatnonzero(new_fit < fit)
            if better.size:
                k = better[0]
                r[i] = cand[k]
                cov = new_cov[k]
                cost = int(new_cost[k])
                fit = new_fit[k]
                changed = True
    return r


class Operators:
    """Genotype-specific pieces plugged into the generational engine."""

    def __init__(self, inst: ProblemInstance, cfg: GaConfig):
        self.inst = inst
        self.cfg = cfg

    def init(self, size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def phenotype(self, pop: np.ndarray) -> np.ndarray:
        """Rosters (P x n) for a population of genotypes."""
        return pop

    def score(self, pop: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rosters, preference costs and total shortfalls of a population."""
        rosters = self.phenotype(pop)
        cost, short = population_scores(self.inst, rosters)
        return rosters, cost, short

    def breed(self, a, b, fit_a, fit_b, rng) -> np.ndarray:
        raise NotImplementedError

    def mutate(self, children: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def polish(self, elite: np.ndarray, fitness: np.ndarray) -> np.ndarray:
        return elite

    def feedback(self, child_fit: np.ndarray, parent_mean: np.ndarray, best_feasible: bool) -> None:
        """Called once per generation after evaluation; ``best_feasible`` refers
        to the current population's fittest individual."""


class DirectOperators(Operators):
    def __init__(self, inst, cfg):
        if cfg.crossover not in DIRECT_CROSSOVERS:
            raise ValueError(f"direct GA crossover must be one of {DIRECT_CROSSOVERS}, got {cfg.crossover!r}")
        super().__init__(inst, cfg)
        self._polished: set[bytes] = set()
        self._table = _padded_feasible(inst)

    def init(self, size, rng):
        return random_rosters(self.inst, size, rng, self._table)

    def breed(self, a, b, fit_a, fit_b, rng):
        if self.cfg.crossover == "one_point":
            return one_point_crossover_batch(a, b, rng)
        return uniform_crossover_batch(a, b, self.cfg.bias, rng)

    def mutate(self, children, rng):
        return mutate_batch(children, self.cfg.mutation_rate, self.inst, rng, self._table)

    def polish(self, elite, fitness):
        if not self.cfg.hillclimber:
            return elite
        out = elite.copy()
        for k, ind in enumerate(elite):
            key = ind.tobytes()
            if key in self._polished:
                continue
            out[k] = hillclimb(self.inst, ind, self.cfg.w_demand)
            self._polished.add(out[k].tobytes())
        return out


def _order(fitness: np.ndarray, short: np.ndarray) -> np.ndarray:
    """Indices best first: by fitness, then feasible before infeasible, then index."""
    return np.lexsort((np.arange(len(fitness)), short > 0, fitness))


def _island_sizes(total: int, count: int) -> list[int]:
    base, extra = divmod(total, count)
    return [base + (k < extra) for k in range(count)]


@dataclass
class _Scored:
    pop: np.ndarray
    fitness: np.ndarray
    short: np.ndarray
    order: np.ndarray

    def take(self, idx) -> tuple:
        return self.pop[idx], self.fitness[idx], self.short[idx]


def evolve(ops: Operators, cfg: GaConfig) -> TrialResult:
    """Run the generational loop and return the best-ever individual.

    Each generation, per island: keep the elite (optionally hill-climbed),
    fill the rest by ranking selection, crossover and mutation, evaluate.
    Islands migrate their best individuals around a ring every
    ``migration_interval`` generations. Best-ever ranks any feasible roster
    above every infeasible one, then by penalty fitness.
    """
    start = time.perf_counter()
    inst = ops.inst
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    cdfs: dict[int, np.ndarray] = {}
    best_key = (True, np.inf)
    best_roster = None
    history = []

    def evaluate(pop) -> _Scored:
        nonlocal best_key, best_roster
        rosters, cost, short = ops.score(pop)
        fitness = np.where(short > 0, cost + cfg.w_demand * short, cost).astype(float)
        order = _order(fitness, short)
        champion = np.lexsort((fitness, short > 0))[0]
        key = (bool(short[champion] > 0), float(fitness[champion]))
        if key < best_key:
            best_key, best_roster = key, rosters[champion].copy()
        return _Scored(pop, fitness, short, order)

    islands = [evaluate(ops.init(size, rng)) for size in _island_sizes(cfg.population, cfg.islands)]
    history.append(min(isl.fitness[isl.order[0]] for isl in islands))

    for gen in range(1, cfg.generations + 1):
        bred = []
        for isl in islands:
            size = len(isl.pop)
            n_elite = min(size, max(1, round(cfg.elitism * size))) if cfg.elitism > 0 else 0
            elite = ops.polish(isl.pop[isl.order[:n_elite]], isl.fitness[isl.order[:n_elite]])
            n_child = size - n_elite
            parent_mean = None
            if n_child:
                cdf = cdfs.get(size)
                if cdf is None:
                    cdf = cdfs[size] = np.cumsum(rank_probabilities(size))
                # draws are ranking positions; the lower position (fitter parent) goes first
                draws = np.sort(np.searchsorted(cdf, rng.random((n_child, 2)) * cdf[-1], side="right"), axis=1)
                picks = isl.order[np.minimum(draws, size - 1)]
                fa, fb = isl.fitness[picks[:, 0]], isl.fitness[picks[:, 1]]
                children = ops.mutate(ops.breed(isl.pop[picks[:, 0]], isl.pop[picks[:, 1]], fa, fb, rng), rng)
                elite = np.concatenate([elite, children])
                parent_mean = (fa + fb) / 2
            bred.append((evaluate(elite), n_elite, parent_mean))
        islands = [b[0] for b in bred]

        if cfg.islands > 1 and cfg.migrants and gen % cfg.migration_interval == 0:
            islands = _migrate(islands, cfg.migrants)

        child_fit = [isl.fitness[n:] for isl, n, pm in bred if pm is not None]
        parent_mean = [pm for _, _, pm in bred if pm is not None]
        top = min(islands, key=lambda isl: isl.fitness[isl.order[0]])
        ops.feedback(
            np.concatenate(child_fit) if child_fit else np.empty(0),
            np.concatenate(parent_mean) if parent_mean else np.empty(0),
            bool(top.short[top.order[0]] == 0),
        )
        history.append(top.fitness[top.order[0]])

    best_feasible = not best_key[0]
    cost = int(inst.pref_cost[np.arange(inst.n), best_roster].sum())
    return TrialResult(
        best=Feasible(cost) if best_feasible else INFEASIBLE,
        roster=tuple(int(x) for x in best_roster),
        best_fitness=best_key[1],
        generations=cfg.generations,
        wall_time=time.perf_counter() - start,
        seed=cfg.seed,
        history=tuple(float(h) for h in history),
    )


def _migrate(islands: list[_Scored], migrants: int) -> list[_Scored]:
    """Ring migration: island k's best individuals replace island k+1's worst."""
    out = []
    count = len(islands)
    for dst in range(count):
        src = islands[(dst - 1) % count]
        tgt = islands[dst]
        mig = min(migrants, len(src.pop) - 1, len(tgt.pop) - 1)
        pop, fitness, short = tgt.pop.copy(), tgt.fitness.copy(), tgt.short.copy()
        if mig > 0:
            worst, best = tgt.order[-mig:], src.order[:mig]
            pop[worst], fitness[worst], short[worst] = src.take(best)
        out.append(_Scored(pop, fitness, short, _order(fitness, short)))
    return out


def run_direct_ga(inst: ProblemInstance, cfg: GaConfig | None = None) -> TrialResult:
    """Evolve rosters directly under penalty fitness; deterministic for a fixed ``cfg.seed``."""
    cfg = cfg or GaConfig()
    return evolve(DirectOperators(inst, cfg), cfg)
