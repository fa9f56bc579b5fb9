import itertools

import numpy as np
import pytest
from conftest import make_instance

from nurseroster.ga_direct import GaConfig
from nurseroster.ga_indirect import (
    BOUNDS,
    INDIRECT_CROSSOVERS,
    MODES,
    DecoderConfig,
    decode,
    one_point_order_batch,
    order_crossover,
    order_fill,
    ox1_batch,
    run_indirect_ga,
    swap_mutation,
    swap_mutation_batch,
    two_point_order_batch,
    uniform_order_batch,
)
from nurseroster.instances import generate_instance, generator_preset
from nurseroster.problem import Feasible, exact_solve, is_feasible, roster_cost


def reference_decode(perm, inst, dcfg):
    """Straight transcription of the decoding rule, one nurse at a time."""
    residual = inst.demand.copy()
    w_cover = dcfg.cover_weight(inst)
    cap = inst.slot_capacity()
    remaining = cap.sum(axis=0)
    roster = [None] * inst.n
    for i in perm:
        remaining = remaining - cap[i]
        q = inst.qual[i].astype(bool)
        best = None
        for j in inst.feasible[i]:
            cells = [(k, s) for k in range(14) for s in range(inst.grade_count) if inst.cover[j, k] and q[s] and residual[k, s] > 0]
            units = len(cells)
            c = int(inst.pref_cost[i, j])
            score = {"lowest_cost": -c, "most_uncovered": units, "combined": w_cover * units - dcfg.w_cost * c}[dcfg.mode]
            if dcfg.bound == "look_ahead":
                score += w_cover * sum(residual[k, s] > remaining[k, s] for k, s in cells)
            key = (-score, c, j)
            if best is None or key < best:
                best = key
        j = best[2]
        roster[i] = int(j)
        for k in range(14):
            if inst.cover[j, k]:
                for s in range(inst.grade_count):
                    if q[s] and residual[k, s] > 0:
                        residual[k, s] -= 1
    return roster


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("bound", BOUNDS)
def test_decoder_matches_reference(mode, bound):
    rng = np.random.default_rng(0)
    dcfg = DecoderConfig(mode=mode, bound=bound)
    for seed in range(3):
        inst = generate_instance(generator_preset("desk", seed=seed))
        for _ in range(20):
            perm = rng.permutation(inst.n)
            assert decode(perm, inst, dcfg).tolist() == reference_decode(perm, inst, dcfg)


def test_lowest_cost_identity_takes_cheapest_pattern():
    inst = generate_instance(generator_preset("desk", seed=1))
    r = decode(np.arange(inst.n), inst, DecoderConfig(mode="lowest_cost", bound="none"))
    for i, f in enumerate(inst.feasible):
        costs = inst.pref_cost[i, f]
        assert r[i] == f[np.flatnonzero(costs == costs.min())[0]]


def test_zero_demand_combined_equals_lowest_cost():
    base = generate_instance(generator_preset("desk", seed=2))
    inst = make_instance(
        [(nu.grade, nu.contract.kind, nu.contract.shifts) for nu in base.nurses],
        [p.to_string() for p in base.patterns],
        base.pref_cost,
        p=base.grade_count,
    )
    rng = np.random.default_rng(1)
    for _ in range(20):
        perm = rng.permutation(inst.n)
        a = decode(perm, inst, DecoderConfig(mode="combined"))
        b = decode(perm, inst, DecoderConfig(mode="lowest_cost"))
        assert a.tolist() == b.tolist()


def test_order_decides_feasibility():
    # grade-1 nurse 0 can cover day 1 (grade-1 demand) or day 2 (grade-2 demand);
    # grade-2 nurse 1 can only help on day 2
    demand = np.zeros((14, 2), int)
    demand[0, 0] = 1
    demand[1, 1] = 1
    inst = make_instance([(1, "days", 1), (2, "days", 1)], ["10000000000000", "01000000000000"], [[1, 0], [0, 0]], demand, p=2)
    dcfg = DecoderConfig(mode="most_uncovered", bound="none")
    outcome = {perm: is_feasible(inst, decode(perm, inst, dcfg)) for perm in itertools.permutations(range(2))}
    assert outcome == {(0, 1): False, (1, 0): True}


def test_decode_is_total_and_deterministic():
    inst = generate_instance(generator_preset("desk", seed=3))
    rng = np.random.default_rng(2)
    for _ in range(50):
        perm = rng.permutation(inst.n)
        r = decode(perm, inst)
        assert all(g in inst.feasible[i] for i, g in enumerate(r))
        assert decode(perm, inst).tolist() == r.tolist()
    with pytest.raises(ValueError):
        decode([0, 0, 1], inst)


def _is_perm(rows, n):
    return np.array_equal(np.sort(rows, axis=1), np.broadcast_to(np.arange(n), rows.shape))


def test_order_fill_examples():
    a = np.array([[0, 1, 2, 3, 4]])
    b = np.array([[4, 3, 2, 1, 0]])
    assert order_fill(a, b, np.ones((1, 5), bool)).tolist() == a.tolist()
    assert order_fill(a, b, np.zeros((1, 5), bool)).tolist() == b.tolist()
    keep = np.array([[False, True, True, False, False]])
    assert order_fill(a, b, keep).tolist() == [[4, 1, 2, 3, 0]]


def test_order_crossover_identical_parents():
    p = np.array([3, 0, 2, 1])
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert order_crossover(p, p, rng).tolist() == p.tolist()


def test_permutation_operators_preserve_validity():
    rng = np.random.default_rng(11)
    n, size = 9, 10_000
    a = np.argsort(rng.random((size, n)), axis=1)
    b = np.argsort(rng.random((size, n)), axis=1)
    for child in (
        ox1_batch(a, b, rng),
        two_point_order_batch(a, b, rng),
        uniform_order_batch(a, b, 0.8, rng),
        one_point_order_batch(a, b, rng),
        swap_mutation_batch(a, 1.0, rng),
        swap_mutation_batch(a, 0.5, rng),
    ):
        assert _is_perm(child, n)


def test_swap_mutation():
    p = np.array([0, 1, 2, 3])
    assert swap_mutation(p, 0.0, 1).tolist() == p.tolist()
    assert swap_mutation([0, 1], 1.0, 1).tolist() == [1, 0]
    assert swap_mutation([0], 1.0, 1).tolist() == [0]
    out = swap_mutation(p, 1.0, 3)
    assert (out != p).sum() == 2


def test_single_nurse():
    inst = make_instance([(1, "days", 1)], ["10000000000000", "01000000000000"], [[4, 2]])
    res = run_indirect_ga(inst, GaConfig(population=4, generations=2))
    assert res.best == Feasible(2) and res.roster == (1,)


def test_zero_demand_lowest_cost_generation_zero():
    base = generate_instance(generator_preset("tiny", seed=1))
    inst = make_instance(
        [(nu.grade, nu.contract.kind, nu.contract.shifts) for nu in base.nurses],
        [p.to_string() for p in base.patterns],
        base.pref_cost,
        p=base.grade_count,
    )
    res = run_indirect_ga(inst, GaConfig(population=10, generations=0), DecoderConfig(mode="lowest_cost"))
    expect = sum(int(inst.pref_cost[i, f].min()) for i, f in enumerate(inst.feasible))
    assert res.best == Feasible(expect)


def test_best_is_best_decodable_and_no_better_than_exact(tiny_instances):
    for inst in tiny_instances[:3]:
        decoded = [decode(p, inst) for p in itertools.permutations(range(inst.n))]
        feasible = [roster_cost(inst, r) for r in decoded if is_feasible(inst, r)]
        res = run_indirect_ga(inst, GaConfig(population=60, generations=60, crossover="automatic", mutation_rate=0.5))
        opt = exact_solve(inst).cost
        if feasible:
            assert res.best == Feasible(min(feasible))
            assert res.best.cost >= opt


@pytest.mark.parametrize("crossover", INDIRECT_CROSSOVERS)
def test_every_crossover_runs_deterministically(crossover):
    inst = generate_instance(generator_preset("desk", seed=4))
    cfg = GaConfig(population=30, generations=15, crossover=crossover, mutation_rate=0.5, seed=3)
    res = run_indirect_ga(inst, cfg)
    assert res == run_indirect_ga(inst, cfg)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))
    assert all(g in inst.feasible[i] for i, g in enumerate(res.roster))


def test_auto_weights_run():
    inst = generate_instance(generator_preset("desk", seed=4, tightness=0.95))
    cfg = GaConfig(population=30, generations=20, crossover="automatic", mutation_rate=0.5)
    res = run_indirect_ga(inst, cfg, DecoderConfig(auto_weights=True))
    assert res == run_indirect_ga(inst, cfg, DecoderConfig(auto_weights=True))


def test_rejects_direct_only_settings():
    inst = generate_instance(generator_preset("tiny"))
    with pytest.raises(ValueError):
        run_indirect_ga(inst, GaConfig(crossover="bogus"))
    with pytest.raises(ValueError):
        DecoderConfig(mode="random")
    with pytest.raises(ValueError):
        DecoderConfig(bound="psychic")
