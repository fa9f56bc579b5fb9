import csv
import json
from pathlib import Path

import numpy as np
import pytest

from nurseroster.harness import (
    CLASSES,
    RESULTS_HEADER,
    AlgorithmPreset,
    ExperimentConfig,
    ExperimentError,
    ResultRow,
    classify,
    compare_results,
    emit_summary,
    get_preset,
    load_presets,
    paper_table2,
    read_results,
    run_experiment,
    trial_seed,
    trial_sets,
)
from nurseroster.instances import ConfigError, generate_instance, generator_preset, write_instance
from nurseroster.problem import INFEASIBLE, ExtendedCost, Feasible, exact_solve

GOLDEN = json.loads((Path(__file__).parent / "golden" / "tables_3_4.json").read_text())
SMALL = {"population": 16, "generations": 8}


def _config(tmp_path, algorithms=("V4", "V6"), trials=5, instances=3, **kw):
    entries = [{"generator": {"preset": "tiny", "seed": s}, "id": f"t{s}"} for s in range(instances)]
    d = {"instances": entries, "algorithms": list(algorithms), "trials": trials, "seed": 11, "ga_overrides": SMALL}
    d.update(kw)
    return ExperimentConfig.from_dict(d, base_dir=tmp_path)


def _rows(path):
    with open(path) as f:
        return list(csv.reader(f))


def test_all_24_presets_ship():
    presets = load_presets()
    assert list(presets) == [f"{s}{k}" for s in "VUW" for k in range(1, 9)]
    assert {n for n, p in presets.items() if p.kind == "direct"} == {"V6", "V7", "V8"}
    assert presets["V7"].ga.islands > 1 and presets["V8"].ga.hillclimber
    assert presets["V2"].decoder.bound == "none" and presets["V3"].decoder.bound == "greedy"
    assert presets["V5"].ga.crossover == "one_point"
    assert [presets[f"U{k}"].ga.bias for k in range(1, 5)] == [0.5, 0.67, 0.75, 0.8]
    assert presets["U5"].decoder.auto_weights and presets["U7"].decoder.auto_weights
    assert [presets[f"W{k}"].ga.elitism for k in range(1, 6)] == [0.5, 0.4, 0.3, 0.2, 0.05]
    for alias in ("U8", "W8"):
        assert presets[alias].alias_of == "V4"
        assert presets[alias].ga == presets["V4"].ga and presets[alias].decoder == presets["V4"].decoder
    for p in presets.values():
        assert p.specified and p.decided
        assert not set(p.specified) & set(p.decided)


def test_every_preset_runs():
    inst = generate_instance(generator_preset("tiny", seed=2))
    for name, p in load_presets().items():
        res = p.with_overrides(SMALL).run(inst, 1)
        assert isinstance(res.best, ExtendedCost), name


def test_preset_errors():
    with pytest.raises(ConfigError, match="unknown algorithm preset"):
        get_preset("V9")
    with pytest.raises(ConfigError):
        AlgorithmPreset.from_dict("x", {"kind": "direct", "decoder": {"bound": "none"}})
    with pytest.raises(ConfigError):
        AlgorithmPreset.from_dict("x", {"kind": "quantum"})


def test_trial_seed_is_pure_and_distinct():
    assert trial_seed(1, "V4", "week01", 0) == trial_seed(1, "V4", "week01", 0)
    seeds = {trial_seed(1, a, i, t) for a in ("V4", "V6") for i in ("w1", "w2") for t in range(10)}
    assert len(seeds) == 40
    assert all(0 <= s < 2**64 for s in seeds)


def test_experiment_row_count_and_header(tmp_path):
    path = run_experiment(_config(tmp_path), out=tmp_path / "r")
    rows = _rows(path)
    assert tuple(rows[0]) == RESULTS_HEADER
    assert len(rows) == 1 + 2 * 3 * 5
    assert [r[:3] for r in rows[1:4]] == [["V4", "t0", "0"], ["V4", "t0", "1"], ["V4", "t0", "2"]]
    assert all(r[4] == "INF" or r[4].isdigit() for r in rows[1:])
    assert (tmp_path / "r" / "config.json").exists()


def test_experiment_replay_is_identical(tmp_path):
    cfg = _config(tmp_path, trials=3)
    a = _rows(run_experiment(cfg, out=tmp_path / "a"))
    b = _rows(run_experiment(cfg, out=tmp_path / "b"))
    c = _rows(run_experiment(cfg, jobs=2, out=tmp_path / "c"))
    strip = lambda rows: [r[:6] for r in rows]  # noqa: E731
    assert strip(a) == strip(b) == strip(c)


def test_experiment_fails_fast(tmp_path):
    with pytest.raises(ConfigError, match="unknown algorithm preset"):
        run_experiment(_config(tmp_path, algorithms=("V4", "nope")), out=tmp_path / "x")
    assert not (tmp_path / "x").exists()
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ExperimentError, match="not writable"):
        run_experiment(_config(tmp_path), out=blocker / "sub")
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    cfg = ExperimentConfig.from_dict({"instances": [{"path": "bad.json"}], "algorithms": ["V4"]}, base_dir=tmp_path)
    with pytest.raises(ValueError):
        run_experiment(cfg, out=tmp_path / "y")
    assert not (tmp_path / "y").exists()


def test_experiment_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        _config(tmp_path, trials=0)
    with pytest.raises(ConfigError):
        _config(tmp_path, alphas=[1.2])
    with pytest.raises(ConfigError, match="unique"):
        _config(tmp_path, algorithms=("V4", "V4")).resolve_algorithms()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"instances": [], "junk": 1})


def test_instance_files_and_inline_algorithms(tmp_path):
    inst = generate_instance(generator_preset("tiny", seed=3))
    write_instance(inst, tmp_path / "wk.json")
    cfg = ExperimentConfig.from_dict(
        {
            "instances": [{"path": "wk.json"}],
            "algorithms": [{"name": "mine", "preset": "V6", "ga": {"mutation_rate": 0.1}}, "V1"],
            "trials": 2,
            "ga_overrides": SMALL,
        },
        base_dir=tmp_path,
    )
    presets = cfg.resolve_algorithms()
    assert presets[0].name == "mine" and presets[0].ga.mutation_rate == 0.1 and presets[0].ga.population == 16
    rows = _rows(run_experiment(cfg, out=tmp_path / "o"))
    assert {r[1] for r in rows[1:]} == {"wk"}


def test_direct_ga_on_tight_instance_leaves_infeasible_rows(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {
            "instances": [{"generator": {"preset": "desk", "seed": 0, "tightness": 1.0}, "id": "tight"}],
            "algorithms": ["V6"],
            "trials": 4,
            "ga_overrides": {"population": 20, "generations": 10},
        }
    )
    rows = _rows(run_experiment(cfg, out=tmp_path))
    assert any(r[4] == "INF" for r in rows[1:])


def test_read_results_validation(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,b\n")
    with pytest.raises(ExperimentError, match="header"):
        read_results(p)
    p.write_text(",".join(RESULTS_HEADER) + "\nV1,w,0,1,-3,10,1\n")
    with pytest.raises(ExperimentError, match=":2"):
        read_results(p)


def test_compare_table2_reproduces_tables_3_and_4(tmp_path):
    from nurseroster.harness import bundled_path

    reports = compare_results(bundled_path("table2_weeks1_3.csv"), [0.5, 1.0], out=tmp_path)
    rep = reports[1.0]
    assert rep.ranks.tolist() == list(GOLDEN["table4"].values())
    assert rep.ematrices[0]["V2", "V7"] == pytest.approx(0.17, abs=0.005)
    assert (tmp_path / "report_alpha_0_5.json").exists() and (tmp_path / "report_alpha_1.txt").exists()
    stab = json.loads((tmp_path / "stability.json").read_text())
    assert stab["ranks_stable"] and stab["verdicts_stable"]
    assert "same broad conclusions" in (tmp_path / "stability.txt").read_text()


def test_compare_single_algorithm():
    sets = [t for t in paper_table2() if t.algorithm == "V1"]
    rep = compare_results(sets, [1.0])[1.0]
    assert rep.pairwise == ()


def test_compare_two_copies_not_significant():
    v1 = [t for t in paper_table2() if t.algorithm == "V1"]
    rows = [ResultRow(name, t.instance, k, None, c, None, None) for name in ("X", "Y") for t in v1 for k, c in enumerate(t.costs)]
    rep = compare_results(trial_sets(rows), [0.5, 1.0])
    for r in rep.values():
        assert all(p.verdict() == "none" for p in r.pairwise)


def test_compare_incomplete_grid():
    rows = [ResultRow("A", "w1", 0, None, Feasible(1), None, None), ResultRow("B", "w2", 0, None, Feasible(1), None, None)]
    with pytest.raises(ValueError, match="missing cells"):
        compare_results(trial_sets(rows), [1.0])


def test_classify_boundaries():
    assert classify(INFEASIBLE, 5) == "infeasible"
    assert classify(Feasible(5), 5) == "optimal"
    assert classify(Feasible(8), 5) == "within3"
    assert classify(Feasible(9), 5) == "worse"


def _rows_for(inst_id, costs, alg="A"):
    return [ResultRow(alg, inst_id, k, None, c, None, None) for k, c in enumerate(costs)]


def test_summary_all_infeasible():
    s = emit_summary(_rows_for("w", [INFEASIBLE] * 5))
    assert [s.cell("A", "w").counts[k] for k in CLASSES] == [5, 0, 0, 0]


def test_summary_exact_baseline(tmp_path):
    inst = None
    for seed in range(50):
        cand = generate_instance(generator_preset("tiny", seed=seed, c_max=6))
        if exact_solve(cand).cost == 0:
            inst = cand
            break
    assert inst is not None
    rows = _rows_for("w", [Feasible(0), Feasible(2), Feasible(4), INFEASIBLE])
    s = emit_summary(rows, "exact", {"w": inst}, out=tmp_path)
    cell = s.cell("A", "w")
    assert cell.baseline == 0 and cell.baseline_kind == "exact"
    assert cell.counts == {"infeasible": 1, "optimal": 1, "within3": 1, "worse": 1}
    assert cell.trials == 4
    assert (tmp_path / "summary.csv").read_text().splitlines()[1] == "A,w,0,exact,1,1,1,1,"


def test_summary_best_known_across_algorithms():
    rows = _rows_for("w", [Feasible(10), Feasible(14)], "A") + _rows_for("w", [Feasible(7), INFEASIBLE], "B")
    s = emit_summary(rows)
    assert s.cell("A", "w").baseline == 7
    assert s.cell("A", "w").counts == {"infeasible": 0, "optimal": 0, "within3": 1, "worse": 1}


def test_summary_exact_budget_falls_back():
    inst = generate_instance(generator_preset("desk", seed=1))
    rows = _rows_for("w", [Feasible(30), Feasible(31)])
    with pytest.warns(UserWarning, match="budget"):
        s = emit_summary(rows, "exact", {"w": inst}, node_limit=5)
    cell = s.cell("A", "w")
    assert cell.baseline_kind == "best-known" and cell.baseline == 30 and "budget" in cell.warning


def test_compare_after_experiment_never_errors(tmp_path):
    path = run_experiment(_config(tmp_path, trials=3), out=tmp_path)
    reports = compare_results(path, [0.5, 1.0], out=tmp_path)
    assert set(reports) == {0.5, 1.0}
    s = emit_summary(path)
    assert all(c.trials == 3 for c in s.cells)
