"""Experiment orchestration: algorithm presets, seeded trial grids, results
files, comparison reports and solution-quality summaries.

Results are CSV with the header ``algorithm,instance,trial,seed,cost,generations,time_ms``
where ``cost`` is a nonnegative integer or ``INF``. Rows are ordered by
(algorithm, instance, trial) in config order, whatever the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ga_direct import GaConfig, TrialResult, run_direct_ga
from .ga_indirect import DecoderConfig, run_indirect_ga
from .instances import ConfigError, GeneratorConfig, generate_instance, generator_preset, read_instance
from .problem import ExtendedCost, ProblemInstance, SolveStatus, exact_solve
from .stats import ComparisonReport, TrialSet, alpha_stability, overall_comparison

log = logging.getLogger(__name__)

RESULTS_HEADER = ("algorithm", "instance", "trial", "seed", "cost", "generations", "time_ms")
DEFAULT_PRESETS = {"direct": "V6", "indirect": "V4"}
PAPER_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
WITHIN = 3


class ExperimentError(ValueError):
    pass


def _data(name: str):
    return resources.files("nurseroster").joinpath("data", name)


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled data file (``table2_weeks1_3.csv``, ``presets.json``, ...)."""
    with resources.as_file(_data(name)) as p:
        return Path(p)


# --- presets -----------------------------------------------------------------


@dataclass(frozen=True)
class AlgorithmPreset:
    """A named GA configuration. ``decoder`` is None for the direct GA.

    ``specified`` lists fields fixed by the published algorithm description;
    ``decided`` lists fields chosen here because they were not published.
    """

    name: str
    kind: str
    ga: GaConfig
    decoder: DecoderConfig | None = None
    specified: tuple[str, ...] = ()
    decided: tuple[str, ...] = ()
    alias_of: str | None = None
    note: str = ""

    def __post_init__(self):
        if self.kind not in ("direct", "indirect"):
            raise ConfigError(f"preset {self.name!r}: kind must be 'direct' or 'indirect', got {self.kind!r}")
        if self.kind == "indirect" and self.decoder is None:
            object.__setattr__(self, "decoder", DecoderConfig())
        if self.kind == "direct" and self.decoder is not None:
            raise ConfigError(f"preset {self.name!r}: the direct GA takes no decoder settings")

    def run(self, inst: ProblemInstance, seed: int) -> TrialResult:
        cfg = self.ga.with_seed(seed)
        if self.kind == "direct":
            return run_direct_ga(inst, cfg)
        return run_indirect_ga(inst, cfg, self.decoder)

    def with_overrides(self, ga: Mapping | None = None, decoder: Mapping | None = None, name: str | None = None):
        ga_cfg = replace(self.ga, **dict(ga or {}))
        dec = replace(self.decoder, **dict(decoder or {})) if decoder else self.decoder
        if decoder and self.kind == "direct":
            raise ConfigError(f"preset {self.name!r}: the direct GA takes no decoder settings")
        return replace(self, name=name or self.name, ga=ga_cfg, decoder=dec)

    @classmethod
    def from_dict(cls, name: str, d: Mapping) -> "AlgorithmPreset":
        unknown = set(d) - {"kind", "ga", "decoder", "specified", "decided", "alias_of", "note"}
        if unknown:
            raise ConfigError(f"preset {name!r}: unknown fields {sorted(unknown)}")
        try:
            ga = GaConfig(**d.get("ga", {}))
            dec = DecoderConfig(**d["decoder"]) if d.get("decoder") is not None else None
        except TypeError as e:
            raise ConfigError(f"preset {name!r}: {e}") from None
        return cls(
            name=name,
            kind=d.get("kind", "indirect"),
            ga=ga,
            decoder=dec,
            specified=tuple(d.get("specified", ())),
            decided=tuple(d.get("decided", ())),
            alias_of=d.get("alias_of"),
            note=d.get("note", ""),
        )

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "ga": self.ga.to_dict()}
        d["ga"].pop("seed")
        if self.decoder is not None:
            d["decoder"] = self.decoder.to_dict()
        d.update(specified=list(self.specified), decided=list(self.decided))
        if self.alias_of:
            d["alias_of"] = self.alias_of
        if self.note:
            d["note"] = self.note
        return d


@lru_cache(maxsize=None)
def load_presets() -> dict[str, AlgorithmPreset]:
    """The 24 bundled presets V1..V8, U1..U8, W1..W8."""
    raw = json.loads(_data("presets.json").read_text())
    return {name: AlgorithmPreset.from_dict(name, d) for name, d in raw.items()}


def get_preset(name: str) -> AlgorithmPreset:
    presets = load_presets()
    if name not in presets:
        raise ConfigError(f"unknown algorithm preset {name!r}; known: {', '.join(presets)}")
    return presets[name]


def trial_seed(base_seed: int, algorithm: str, instance: str, trial: int) -> int:
    """Seed of one trial: the first 8 bytes (big-endian) of
    ``sha256(f"{base_seed}|{algorithm}|{instance}|{trial}")``."""
    digest = hashlib.sha256(f"{base_seed}|{algorithm}|{instance}|{trial}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# --- experiment config ----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """A full (algorithm x instance x trial) grid.

    ``instances`` entries are ``{"path": ...}`` (id = file stem unless
    ``"id"`` is given) or ``{"generator": {...GeneratorConfig or "preset": name...}, "id": ...}``.
    ``algorithms`` entries are preset names or
    ``{"name": ..., "preset": ..., "ga": {...}, "decoder": {...}}`` overrides.
    ``ga_overrides`` apply to every algorithm (handy for shrinking budgets).
    """

    instances: tuple[dict, ...]
    algorithms: tuple = ("V4", "V6")
    trials: int = 20
    seed: int = 0
    alphas: tuple[float, ...] = (1.0,)
    out: str = "results"
    ga_overrides: dict = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.instances:
            raise ConfigError("the experiment needs at least one instance")
        if not self.algorithms:
            raise ConfigError("the experiment needs at least one algorithm")
        if any(not 0 <= a <= 1 for a in self.alphas):
            raise ConfigError("alpha values must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: str | os.PathLike = ".") -> "ExperimentConfig":
        known = {"instances", "algorithms", "trials", "seed", "alphas", "out", "ga_overrides"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment config fields {sorted(unknown)}")
        if "instances" not in d:
            raise ConfigError("experiment config needs an 'instances' list")
        kw = dict(d)
        kw["instances"] = tuple(dict(x) for x in d["instances"])
        kw["algorithms"] = tuple(d.get("algorithms", cls.algorithms))
        kw["alphas"] = tuple(float(a) for a in d.get("alphas", cls.alphas))
        return cls(**kw, base_dir=str(base_dir))

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read experiment config {path}: {e}") from None
        return cls.from_dict(d, base_dir=path.parent)

    def load_instances(self) -> dict[str, ProblemInstance]:
        out: dict[str, ProblemInstance] = {}
        for k, spec in enumerate(self.instances):
            if "path" in spec:
                p = Path(spec["path"])
                if not p.is_absolute():
                    p = Path(self.base_dir) / p
                inst = read_instance(p)
                iid = spec.get("id") or p.stem
            elif "generator" in spec:
                g = dict(spec["generator"])
                gcfg = generator_preset(g.pop("preset"), **g) if "preset" in g else GeneratorConfig.from_dict(g)
                iid = spec.get("id") or f"gen{k:03d}-s{gcfg.seed}"
                inst = generate_instance(gcfg, name=iid)
            else:
                raise ConfigError(f"instance entry {k} needs 'path' or 'generator'")
            if iid in out:
                raise ConfigError(f"duplicate instance id {iid!r}")
            out[iid] = inst
        return out

    def resolve_algorithms(self) -> list[AlgorithmPreset]:
        out = []
        for entry in self.algorithms:
            if isinstance(entry, str):
                p = get_preset(entry)
            else:
                entry = dict(entry)
                name = entry.pop("name", None) or entry.get("preset")
                if not name:
                    raise ConfigError(f"algorithm entry {entry} needs a 'name' or 'preset'")
                if "preset" in entry:
                    base = get_preset(entry.pop("preset"))
                else:
                    base = AlgorithmPreset.from_dict(name, {"kind": entry.pop("kind", "indirect")})
                extra = set(entry) - {"ga", "decoder"}
                if extra:
                    raise ConfigError(f"algorithm {name!r}: unknown fields {sorted(extra)}")
                p = base.with_overrides(entry.get("ga"), entry.get("decoder"), name=name)
            if self.ga_overrides:
                p = p.with_overrides(self.ga_overrides)
            out.append(p)
        names = [p.name for p in out]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"algorithm names must be unique, repeated: {dupes}")
        return out


# --- running ----------------------------------------------------------------------

_WORKER: dict = {}


def _init_worker(presets, instances):
    _WORKER["presets"] = presets
    _WORKER["instances"] = instances


def _run_task(task: tuple[str, str, int, int]) -> tuple:
    alg, iid, trial, seed = task
    res = _WORKER["presets"][alg].run(_WORKER["instances"][iid], seed)
    return (alg, iid, trial, seed, str(res.best), res.generations, int(round(res.wall_time * 1000)))


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out: str | os.PathLike | None = None) -> Path:
    """Run every trial of the grid and write ``results.csv`` into the output directory.

    Everything that can fail (presets, instances, output directory) is
    checked before the first trial runs. Re-running the same config
    rewrites an identical file apart from the ``time_ms`` column.
    """
    presets = {p.name: p for p in cfg.resolve_algorithms()}
    instances = cfg.load_instances()
    out_dir = Path(out if out is not None else cfg.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "results.csv"
        fh = open(path, "w", newline="")
    except OSError as e:
        raise ExperimentError(f"output directory {out_dir} is not writable: {e}") from None

    tasks = [
        (alg, iid, t, trial_seed(cfg.seed, alg, iid, t))
        for alg in presets
        for iid in instances
        for t in range(cfg.trials)
    ]
    log.info("running %d trials (%d algorithms x %d instances x %d)", len(tasks), len(presets), len(instances), cfg.trials)
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        if jobs <= 1:
            _init_worker(presets, instances)
            rows = map(_run_task, tasks)
            for row in rows:
                writer.writerow(row)
        else:
            # map() yields in submission order, so the single writer sees rows in grid order
            with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(presets, instances)) as pool:
                for row in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * jobs))):
                    writer.writerow(row)
    with open(out_dir / "config.json", "w") as f:
        json.dump(
            {
                "instances": list(cfg.instances),
                "algorithms": {name: p.to_dict() for name, p in presets.items()},
                "trials": cfg.trials,
                "seed": cfg.seed,
                "alphas": list(cfg.alphas),
            },
            f,
            indent=2,
        )
    return path


# --- results files -----------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    instance: str
    trial: int
    seed: int | None
    cost: ExtendedCost
    generations: int | None
    time_ms: int | None


def read_results(path: str | os.PathLike) -> list[ResultRow]:
    """Parse a results CSV; blank seed/generations/time cells are allowed (e.g. transcribed data)."""
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != RESULTS_HEADER:
            raise ExperimentError(f"{path}: expected header {','.join(RESULTS_HEADER)}, got {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(RESULTS_HEADER):
                raise ExperimentError(f"{path}:{lineno}: expected {len(RESULTS_HEADER)} fields, got {len(rec)}")
            alg, iid, trial, seed, cost, gens, ms = rec
            try:
                rows.append(
                    ResultRow(
                        alg,
                        iid,
                        int(trial),
                        int(seed) if seed else None,
                        ExtendedCost.parse(cost),
                        int(gens) if gens else None,
                        int(ms) if ms else None,
                    )
                )
            except ValueError as e:
                raise ExperimentError(f"{path}:{lineno}: {e}") from None
    return rows


def trial_sets(rows: Iterable[ResultRow]) -> list[TrialSet]:
    """Group rows into one TrialSet per (algorithm, instance), in first-appearance order."""
    groups: dict[tuple[str, str], list[ExtendedCost]] = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.instance), []).append(r.cost)
    return [TrialSet(a, i, tuple(c)) for (a, i), c in groups.items()]


def _alpha_tag(alpha: float) -> str:
    return f"{alpha:g}".replace(".", "_")


def compare_results(
    results: str | os.PathLike | Sequence[TrialSet],
    alphas: Sequence[float] = (1.0,),
    out: str | os.PathLike | None = None,
) -> dict[float, ComparisonReport]:
    """One comparison report per alpha, plus a statement of how stable the conclusions are across alphas.

    With ``out`` set, writes ``report_alpha_<a>.json``/``.txt`` per alpha and
    ``stability.json``/``.txt``.
    """
    sets = list(results) if not isinstance(results, (str, os.PathLike)) else trial_sets(read_results(results))
    if not alphas:
        raise ExperimentError("at least one alpha value is needed")
    reports = {float(a): overall_comparison(sets, a) for a in alphas}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for a, rep in reports.items():
            tag = _alpha_tag(a)
            (out / f"report_alpha_{tag}.json").write_text(json.dumps(rep.to_dict(), indent=2))
            (out / f"report_alpha_{tag}.txt").write_text(rep.to_text())
        stab = alpha_stability(reports)
        (out / "stability.json").write_text(json.dumps(stab, indent=2))
        (out / "stability.txt").write_text(stability_text(stab))
    return reports


def stability_text(stab: Mapping) -> str:
    alphas = ", ".join(f"{a:g}" for a in stab["alphas"])
    if stab["ranks_stable"] and stab["verdicts_stable"]:
        return f"alpha in {{{alphas}}}: same per-instance ranks and same pairwise verdicts (same broad conclusions).\n"
    lines = [f"alpha in {{{alphas}}}: conclusions change with alpha:"]
    lines += [f"  {d}" for d in stab["differences"]]
    return "\n".join(lines) + "\n"


# --- solution-quality summary ------------------------------------------------------------

CLASSES = ("infeasible", "optimal", "within3", "worse")


@dataclass
class SummaryCell:
    algorithm: str
    instance: str
    baseline: int | None
    baseline_kind: str
    counts: dict = field(default_factory=lambda: dict.fromkeys(CLASSES, 0))
    warning: str = ""

    @property
    def trials(self) -> int:
        return sum(self.counts.values())


@dataclass
class SummaryClassification:
    cells: list[SummaryCell]

    def cell(self, algorithm: str, instance: str) -> SummaryCell:
        for c in self.cells:
            if c.algorithm == algorithm and c.instance == instance:
                return c
        raise KeyError((algorithm, instance))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("algorithm", "instance", "baseline", "baseline_kind", *CLASSES, "warning"))
        for c in self.cells:
            base = "" if c.baseline is None else c.baseline
            w.writerow((c.algorithm, c.instance, base, c.baseline_kind, *(c.counts[k] for k in CLASSES), c.warning))
        return buf.getvalue()


def classify(cost: ExtendedCost, baseline: int | None, within: int = WITHIN) -> str:
    if not cost.feasible:
        return "infeasible"
    if baseline is None or cost.cost > baseline + within:
        return "worse"
    return "optimal" if cost.cost <= baseline else "within3"


def emit_summary(
    results: str | os.PathLike | Sequence[ResultRow],
    baseline: str = "best-known",
    instances: Mapping[str, ProblemInstance] | None = None,
    out: str | os.PathLike | None = None,
    node_limit: int = 1_000_000,
    time_limit: float = 10.0,
) -> SummaryClassification:
    """Classify every trial as infeasible / optimal / within 3 of the baseline / worse.

    ``baseline="best-known"`` uses the lowest feasible cost seen across all
    algorithms on the instance. ``baseline="exact"`` runs branch and bound;
    if it runs out of budget (or the instance is not supplied) the cell
    falls back to best-known and carries a warning.
    """
    if baseline not in ("best-known", "exact"):
        raise ExperimentError(f"baseline must be 'best-known' or 'exact', got {baseline!r}")
    rows = list(results) if not isinstance(results, (str, os.PathLike)) else read_results(results)

    best_known: dict[str, int | None] = {}
    for r in rows:
        cur = best_known.get(r.instance)
        if r.cost.feasible and (cur is None or r.cost.cost < cur):
            best_known[r.instance] = r.cost.cost
        else:
            best_known.setdefault(r.instance, cur)

    bases: dict[str, tuple[int | None, str, str]] = {}
    for iid, bk in best_known.items():
        if baseline == "best-known":
            bases[iid] = (bk, "best-known", "")
            continue
        inst = (instances or {}).get(iid)
        if inst is None:
            msg = f"instance {iid!r} not available for exact solving; using best-known"
        else:
            res = exact_solve(inst, node_limit=node_limit, time_limit=time_limit)
            if res.status == SolveStatus.OPTIMAL:
                bases[iid] = (res.cost, "exact", "")
                continue
            if res.status == SolveStatus.INFEASIBLE:
                bases[iid] = (None, "exact", "instance proven infeasible")
                continue
            msg = f"exact solve of {iid!r} exceeded its budget; using best-known"
        warnings.warn(msg, stacklevel=2)
        bases[iid] = (bk, "best-known", msg)

    cells: dict[tuple[str, str], SummaryCell] = {}
    for r in rows:
        key = (r.algorithm, r.instance)
        if key not in cells:
            b, kind, warn = bases[r.instance]
            cells[key] = SummaryCell(r.algorithm, r.instance, b, kind, warning=warn)
        cell = cells[key]
        cell.counts[classify(r.cost, cell.baseline)] += 1
    summary = SummaryClassification(list(cells.values()))
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(summary.to_csv())
    return summary


def paper_table2() -> list[TrialSet]:
    """Trial sets of V1..V8 on weeks 1-3 transcribed from the published costs (NS as INF)."""
    return trial_sets(read_results(bundled_path("table2_weeks1_3.csv")))


def paper_e_values(which: str) -> np.ndarray:
    """Published per-week E values: ``"v6_v3"`` (52 weeks) or ``"v8_v6"`` (52 weeks)."""
    files = {"v6_v3": "table5_e_v6_v3.csv", "v8_v6": "table6_e_v8_v6.csv"}
    if which not in files:
        raise KeyError(f"unknown table {which!r}; known: {sorted(files)}")
    with _data(files[which]).open() as f:
        return np.array([float(r["e"]) for r in csv.DictReader(f)])
