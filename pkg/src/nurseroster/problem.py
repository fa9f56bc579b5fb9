"""Problem model for the weekly nurse rostering integer program.

A week has 14 slots: slots 0..6 are days and 7..13 are nights. Every nurse
works exactly one shift pattern drawn from the patterns compatible with the
nurse's contract, and every (slot, grade) cell has a demand that must be
covered by nurses of that grade or higher (grade 1 is the highest).
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Sequence

import numpy as np

N_SLOTS = 14
DAYS = slice(0, 7)
NIGHTS = slice(7, 14)

ContractKind = Literal["days", "nights", "both"]


class InstanceError(ValueError):
    """Raised when a problem instance or roster violates the model's invariants."""


@dataclass(frozen=True)
class ShiftPattern:
    """A weekly work pattern: 14 booleans, days first then nights."""

    cover: tuple[bool, ...]

    def __post_init__(self):
        cover = tuple(bool(c) for c in self.cover)
        if len(cover) != N_SLOTS:
            raise InstanceError(f"shift pattern needs {N_SLOTS} slots, got {len(cover)}")
        object.__setattr__(self, "cover", cover)

    @classmethod
    def from_string(cls, bits: str) -> "ShiftPattern":
        bits = bits.replace(" ", "")
        if len(bits) != N_SLOTS or set(bits) - {"0", "1"}:
            raise InstanceError(f"bad shift pattern string {bits!r}")
        return cls(tuple(b == "1" for b in bits))

    def to_string(self) -> str:
        return "".join("1" if c else "0" for c in self.cover)

    @property
    def day_count(self) -> int:
        return sum(self.cover[DAYS])

    @property
    def night_count(self) -> int:
        return sum(self.cover[NIGHTS])

    @property
    def kind(self) -> ContractKind:
        """``"days"``, ``"nights"`` or ``"both"`` (a combined pattern).

        The empty pattern counts as both day-only and night-only; it is
        reported as ``"days"``.
        """
        if self.night_count == 0:
            return "days"
        if self.day_count == 0:
            return "nights"
        return "both"

    def __str__(self):
        s = self.to_string()
        return f"({s[:7]} {s[7:]})"


@dataclass(frozen=True)
class Contract:
    kind: ContractKind
    shifts: int

    def __post_init__(self):
        if self.kind not in ("days", "nights", "both"):
            raise InstanceError(f"unknown contract type {self.kind!r}")
        upper = 14 if self.kind == "both" else 7
        if not 0 <= self.shifts <= upper:
            raise InstanceError(f"{self.kind} contract needs 0..{upper} shifts, got {self.shifts}")

    def admits(self, pattern: ShiftPattern) -> bool:
        """Membership test for the nurse's feasible pattern set F(i)."""
        d, n = pattern.day_count, pattern.night_count
        if self.kind == "days":
            return n == 0 and d == self.shifts
        if self.kind == "nights":
            return d == 0 and n == self.shifts
        return d > 0 and n > 0 and d + n == self.shifts


@dataclass(frozen=True)
class Nurse:
    grade: int
    contract: Contract


def feasible_patterns(nurse: Nurse, patterns: Sequence[ShiftPattern]) -> set[int]:
    """Indices of the patterns the nurse may work under their contract.

    Day contracts admit day-only patterns with exactly ``shifts`` days, night
    contracts night-only patterns with exactly ``shifts`` nights, and combined
    contracts patterns that mix days and nights with ``shifts`` slots in total.
    """
    return {j for j, pat in enumerate(patterns) if nurse.contract.admits(pat)}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Immutable parameters of one weekly rostering problem.

    ``pref_cost`` is n x m, ``demand`` is 14 x p with column ``s - 1``
    holding the demand for grade ``s``. Derived arrays (pattern cover matrix,
    qualification matrix, feasible sets) are computed once at construction.
    """

    nurses: tuple[Nurse, ...]
    patterns: tuple[ShiftPattern, ...]
    pref_cost: np.ndarray
    demand: np.ndarray
    grade_count: int
    name: str = ""

    cover: np.ndarray = field(init=False, repr=False)
    qual: np.ndarray = field(init=False, repr=False)
    feasible: tuple[np.ndarray, ...] = field(init=False, repr=False)
    feasible_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nurses = tuple(self.nurses)
        patterns = tuple(self.patterns)
        p = int(self.grade_count)
        if p < 1:
            raise InstanceError("grade_count must be at least 1")
        n, m = len(nurses), len(patterns)
        if n < 1:
            raise InstanceError("an instance needs at least one nurse")
        if m < 1:
            raise InstanceError("an instance needs at least one shift pattern")
        cost = np.array(self.pref_cost)
        if cost.shape != (n, m):
            raise InstanceError(f"pref_cost has shape {cost.shape}, expected ({n}, {m})")
        demand = np.array(self.demand)
        if demand.shape != (N_SLOTS, p):
            raise InstanceError(f"demand has shape {demand.shape}, expected ({N_SLOTS}, {p})")
        for name, arr in (("pref_cost", cost), ("demand", demand)):
            if arr.size and not np.issubdtype(arr.dtype, np.integer):
                if not np.all(np.equal(np.mod(arr, 1), 0)):
                    raise InstanceError(f"{name} must hold integers")
            if np.any(arr < 0):
                raise InstanceError(f"{name} must be nonnegative")
        for i, nurse in enumerate(nurses):
            if not 1 <= nurse.grade <= p:
                raise InstanceError(f"nurse {i} has grade {nurse.grade}, outside 1..{p}")

        cover = np.array([pat.cover for pat in patterns], dtype=np.int64).reshape(m, N_SLOTS)
        grades = np.array([nu.grade for nu in nurses])
        qual = (grades[:, None] <= np.arange(1, p + 1)[None, :]).astype(np.int64)
        mask = np.array([[nu.contract.admits(pat) for pat in patterns] for nu in nurses])
        empty = [i for i in range(n) if not mask[i].any()]
        if empty:
            raise InstanceError(f"nurses {empty} have no feasible shift pattern")

        set_ = functools.partial(object.__setattr__, self)
        set_("nurses", nurses)
        set_("patterns", patterns)
        set_("grade_count", p)
        set_("pref_cost", _frozen(cost.astype(np.int64)))
        set_("demand", _frozen(demand.astype(np.int64)))
        set_("cover", _frozen(cover))
        set_("qual", _frozen(qual))
        set_("feasible_mask", _frozen(mask))
        set_("feasible", tuple(_frozen(np.flatnonzero(row)) for row in mask))

    @property
    def n(self) -> int:
        return len(self.nurses)

    @property
    def m(self) -> int:
        return len(self.patterns)

    @property
    def grades(self) -> np.ndarray:
        return np.array([nu.grade for nu in self.nurses])

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.nurses == other.nurses
            and self.patterns == other.patterns
            and self.grade_count == other.grade_count
            and np.array_equal(self.pref_cost, other.pref_cost)
            and np.array_equal(self.demand, other.demand)
        )

    __hash__ = None

    @functools.cached_property
    def contribution(self) -> np.ndarray:
        """n x m x (14 * p): cover nurse i adds to each flattened (slot, grade) cell by working j."""
        c = self.cover[None, :, :, None] * self.qual[:, None, None, :]
        return _frozen(c.reshape(self.n, self.m, -1))

    def slot_capacity(self) -> np.ndarray:
        """n x 14 x p array: 1 where nurse i could cover cell (k, s) with some j in F(i)."""
        return self._slot_capacity

    @functools.cached_property
    def _slot_capacity(self) -> np.ndarray:
        can_work = (self.feasible_mask.astype(np.int64) @ self.cover) > 0
        return _frozen(can_work[:, :, None] * self.qual[:, None, :])


Roster = Sequence[int]


def check_roster(inst: ProblemInstance, r: Roster) -> np.ndarray:
    a = np.asarray(r)
    if a.shape != (inst.n,):
        raise InstanceError(f"roster has shape {a.shape}, expected ({inst.n},)")
    if not np.issubdtype(a.dtype, np.integer):
        raise InstanceError("roster entries must be pattern indices")
    if np.any(a < 0) or np.any(a >= inst.m):
        raise InstanceError("roster pattern index out of range")
    if not inst.feasible_mask[np.arange(inst.n), a].all():
        bad = np.flatnonzero(~inst.feasible_mask[np.arange(inst.n), a]).tolist()
        raise InstanceError(f"nurses {bad} are assigned patterns outside their feasible set")
    return a


def roster_cost(inst: ProblemInstance, r: Roster) -> int:
    a = check_roster(inst, r)
    return int(inst.pref_cost[np.arange(inst.n), a].sum())


def coverage(inst: ProblemInstance, r: Roster) -> np.ndarray:
    """14 x p matrix of how many qualified nurses work each (slot, grade) cell."""
    a = check_roster(inst, r)
    return inst.cover[a].T @ inst.qual


def coverage_shortfall(inst: ProblemInstance, r: Roster) -> np.ndarray:
    return np.maximum(inst.demand - coverage(inst, r), 0)


def is_feasible(inst: ProblemInstance, r: Roster) -> bool:
    return not coverage_shortfall(inst, r).any()


def penalty_fitness(inst: ProblemInstance, r: Roster, w_demand: float) -> float:
    """Preference cost plus ``w_demand`` per uncovered (slot, grade) unit."""
    if w_demand < 0:
        raise ValueError("w_demand must be nonnegative")
    short = int(coverage_shortfall(inst, r).sum())
    cost = roster_cost(inst, r)
    return cost + w_demand * short if short else cost


def population_scores(inst: ProblemInstance, pop: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (cost, total shortfall) for a P x n array of rosters."""
    pop = np.asarray(pop)
    rows = np.arange(inst.n)[None, :]
    cost = inst.pref_cost[rows, pop].sum(axis=1)
    cov = inst.contribution[rows, pop].sum(axis=1)
    short = np.maximum(inst.demand.reshape(1, -1) - cov, 0).sum(axis=1)
    return cost, short


@functools.total_ordering
class ExtendedCost:
    """A trial outcome: a finite nonnegative cost or ``INFEASIBLE``.

    Ordered with every feasible cost below ``INFEASIBLE``; two infeasible
    outcomes compare equal.
    """

    __slots__ = ("cost",)

    def __init__(self, cost: int | None):
        if cost is not None:
            if int(cost) != cost or cost < 0:
                raise ValueError(f"feasible cost must be a nonnegative integer, got {cost!r}")
            cost = int(cost)
        object.__setattr__(self, "cost", cost)

    def __setattr__(self, name, value):
        raise AttributeError("ExtendedCost is immutable")

    @classmethod
    def parse(cls, token: str) -> "ExtendedCost":
        token = token.strip()
        if token.upper() in ("INF", "NS", "INFEASIBLE"):
            return INFEASIBLE
        return cls(int(token))

    @property
    def feasible(self) -> bool:
        return self.cost is not None

    def sort_key(self) -> tuple[int, int]:
        return (0, self.cost) if self.cost is not None else (1, 0)

    def as_float(self) -> float:
        return float(self.cost) if self.cost is not None else float("inf")

    def __eq__(self, other):
        if not isinstance(other, ExtendedCost):
            return NotImplemented
        return self.cost == other.cost

    def __lt__(self, other):
        if not isinstance(other, ExtendedCost):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __hash__(self):
        return hash(self.cost)

    def __str__(self):
        return "INF" if self.cost is None else str(self.cost)

    def __repr__(self):
        return "INFEASIBLE" if self.cost is None else f"Feasible({self.cost})"


INFEASIBLE = ExtendedCost(None)


def Feasible(cost: int) -> ExtendedCost:
    return ExtendedCost(cost)


def extended_cost(inst: ProblemInstance, r: Roster) -> ExtendedCost:
    return Feasible(roster_cost(inst, r)) if is_feasible(inst, r) else INFEASIBLE


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    BUDGET_EXCEEDED = "budget_exceeded"


@dataclass(frozen=True)
class ExactResult:
    status: SolveStatus
    roster: tuple[int, ...] | None
    cost: int | None
    nodes: int

    @property
    def extended(self) -> ExtendedCost:
        if self.status is SolveStatus.OPTIMAL:
            return Feasible(self.cost)
        return INFEASIBLE


class _Budget(Exception):
    pass


def _warm_start(inst: ProblemInstance, tries: int = 20) -> list[int] | None:
    """Cheapest feasible roster found by local search from a few random starts, or None.

    Used only as the initial incumbent, so it tightens pruning without
    affecting optimality.
    """
    from .ga_direct import hillclimb

    rng = np.random.Generator(np.random.PCG64(0))
    # any shortfall then outweighs every possible cost difference
    w = 1.0 + float(sum(inst.pref_cost[i, f].max() for i, f in enumerate(inst.feasible)))
    best = None
    for _ in range(tries):
        r = hillclimb(inst, [int(rng.choice(f)) for f in inst.feasible], w)
        if is_feasible(inst, r) and (best is None or roster_cost(inst, r) < roster_cost(inst, best)):
            best = [int(x) for x in r]
    return best


def exact_solve(
    inst: ProblemInstance,
    node_limit: int | None = 1_000_000,
    time_limit: float | None = 10.0,
) -> ExactResult:
    """Depth-first branch and bound over nurses in index order.

    Patterns are tried in increasing preference cost. A node is pruned when
    its partial cost plus the cheapest completion is no better than the
    incumbent, when the nurses still unassigned cannot cover the residual
    demand in some cell even if each of them covered it, or when they cannot
    supply enough shifts per grade over the days, the nights or the week.
    The incumbent starts from a local-search roster when one is found. Meant for desk-scale
    instances (a handful of nurses, a few dozen patterns).

    If the budget runs out the result is ``BUDGET_EXCEEDED`` and carries the
    incumbent, if any, which is not proven optimal.
    """
    n = inst.n
    costs = [inst.pref_cost[i, inst.feasible[i]] for i in range(n)]
    order = [inst.feasible[i][np.argsort(costs[i], kind="stable")] for i in range(n)]
    min_cost = np.array([c.min() for c in costs])
    rest_min = np.concatenate([np.cumsum(min_cost[::-1])[::-1], [0]])
    cap = inst.slot_capacity()
    rest_cap = np.concatenate([np.cumsum(cap[::-1], axis=0)[::-1], np.zeros((1,) + cap.shape[1:], int)])
    # volume bound: most shifts each nurse can work in the days, the nights and the whole week
    spans = (DAYS, NIGHTS, slice(0, N_SLOTS))
    most = np.array([[inst.cover[inst.feasible[i]][:, h].sum(axis=1).max() for h in spans] for i in range(n)])
    vol = most[:, :, None] * inst.qual[:, None, :]
    rest_vol = np.concatenate([np.cumsum(vol[::-1], axis=0)[::-1], np.zeros((1,) + vol.shape[1:], int)])
    # contribution[i][j] is the 14 x p coverage nurse i adds by working j
    contrib = [inst.cover[:, :, None] * inst.qual[i][None, None, :] for i in range(n)]

    best_cost = np.inf
    best: list[int] | None = None
    warm = _warm_start(inst)
    if warm is not None:
        best_cost, best = roster_cost(inst, warm), list(warm)
    current = [0] * n
    nodes = 0
    deadline = None if time_limit is None else time.monotonic() + time_limit

    def visit(i: int, partial: int, residual: np.ndarray):
        nonlocal best_cost, best, nodes
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            raise _Budget
        if deadline is not None and nodes % 1024 == 0 and time.monotonic() > deadline:
            raise _Budget
        if np.any(residual > rest_cap[i]):
            return
        volume = np.stack([residual[DAYS].sum(axis=0), residual[NIGHTS].sum(axis=0), residual.sum(axis=0)])
        if np.any(volume > rest_vol[i]):
            return
        if i == n:
            if partial < best_cost:
                best_cost, best = partial, current.copy()
            return
        for j in order[i]:
            c = partial + int(inst.pref_cost[i, j])
            if c + rest_min[i + 1] >= best_cost:
                break
            current[i] = int(j)
            visit(i + 1, c, np.maximum(residual - contrib[i][j], 0))

    try:
        visit(0, 0, inst.demand.copy())
    except _Budget:
        roster = tuple(best) if best is not None else None
        cost = int(best_cost) if best is not None else None
        return ExactResult(SolveStatus.BUDGET_EXCEEDED, roster, cost, nodes)
    if best is None:
        return ExactResult(SolveStatus.INFEASIBLE, None, None, nodes)
    return ExactResult(SolveStatus.OPTIMAL, tuple(best), int(best_cost), nodes)
