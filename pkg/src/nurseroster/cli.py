"""Command-line entry point: ``nurseroster <command> ...``.

Commands: generate, solve, exact, experiment, compare, summary.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    PAPER_ALPHAS,
    ExperimentConfig,
    ExperimentError,
    compare_results,
    emit_summary,
    get_preset,
    load_presets,
    run_experiment,
    stability_text,
)
from .stats import alpha_stability
from .instances import PRESETS, ConfigError, GeneratorConfig, generate_instance, generator_preset, read_instance, write_instance
from .problem import InstanceError, exact_solve


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _alphas(text: str) -> list[float]:
    if text == "paper":
        return list(PAPER_ALPHAS)
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None
    if not vals or any(not 0 <= a <= 1 for a in vals):
        raise argparse.ArgumentTypeError("alpha values must be a comma-separated list in [0, 1]")
    return vals


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None


def cmd_generate(args) -> int:
    if args.config:
        d = _read_json(args.config)
        cfg = generator_preset(d.pop("preset"), **d) if "preset" in d else GeneratorConfig.from_dict(d)
    else:
        cfg = generator_preset(args.preset)
    base_seed = args.seed if args.seed is not None else cfg.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        seed = base_seed + k
        name = f"{args.prefix}{seed:04d}"
        inst = generate_instance(GeneratorConfig.from_dict({**cfg.to_dict(), "seed": seed}), name=name)
        write_instance(inst, out / f"{name}.json")
        print(f"{out / (name + '.json')}: n={inst.n} m={inst.m} p={inst.grade_count}")
    return 0


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    preset = get_preset(args.algorithm)
    if args.config:
        d = _read_json(args.config)
        preset = preset.with_overrides(d.get("ga"), d.get("decoder"))
    res = preset.run(inst, args.seed)
    print(res.best)
    if args.verbose:
        print(f"roster: {' '.join(map(str, res.roster))}")
        print(f"fitness: {res.best_fitness:g}  generations: {res.generations}  time: {res.wall_time:.3f}s")
    return 0


def cmd_exact(args) -> int:
    inst = read_instance(args.instance)
    res = exact_solve(inst, node_limit=args.node_limit, time_limit=args.time_limit)
    print(f"{res.status.value} {res.extended}")
    if args.verbose and res.roster is not None:
        print(f"roster: {' '.join(map(str, res.roster))}")
        print(f"nodes: {res.nodes}")
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    path = run_experiment(cfg, jobs=args.jobs, out=args.out)
    print(path)
    if args.alpha:
        compare_results(path, args.alpha, out=path.parent)
    return 0


def cmd_compare(args) -> int:
    alphas = args.alpha or [1.0]
    reports = compare_results(args.results, alphas, out=args.out)
    for a, rep in reports.items():
        print(rep.to_text())
    if len(reports) > 1:
        print(stability_text(alpha_stability(reports)), end="")
    return 0


def cmd_summary(args) -> int:
    instances = None
    if args.baseline == "exact":
        if not args.config:
            raise ConfigError("--baseline exact needs --config (the experiment config naming the instances)")
        instances = ExperimentConfig.from_file(args.config).load_instances()
    summary = emit_summary(args.results, args.baseline, instances, out=args.out)
    print(summary.to_csv(), end="")
    return 0


def cmd_presets(args) -> int:
    for name, p in load_presets().items():
        extra = f"  (= {p.alias_of})" if p.alias_of else ""
        print(f"{name:<4} {p.kind:<9} {json.dumps(p.to_dict()['ga'])}{extra}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nurseroster", description="Nurse rostering GAs and infeasibility-aware comparison.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write random instance files")
    g.add_argument("--config", help="GeneratorConfig JSON (may name a 'preset' plus overrides)")
    g.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    g.add_argument("--seed", type=_u64)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--prefix", default="inst")
    g.add_argument("--out", default="instances")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", parents=[common], help="run one GA preset on one instance and print its cost")
    s.add_argument("instance")
    s.add_argument("--algorithm", default="V4")
    s.add_argument("--config", help="JSON with 'ga' and/or 'decoder' overrides")
    s.add_argument("--seed", type=_u64, default=0)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("exact", parents=[common], help="branch and bound")
    e.add_argument("instance")
    e.add_argument("--node-limit", type=int, default=1_000_000)
    e.add_argument("--time-limit", type=float, default=10.0)
    e.set_defaults(func=cmd_exact)

    x = sub.add_parser("experiment", parents=[common], help="run a full trial grid")
    x.add_argument("--config", required=True)
    x.add_argument("--seed", type=_u64)
    x.add_argument("--out")
    x.add_argument("--jobs", type=int, default=1)
    x.add_argument("--alpha", type=_alphas, help="also write comparison reports for these alphas")
    x.set_defaults(func=cmd_experiment)

    c = sub.add_parser("compare", parents=[common], help="statistical comparison of a results file")
    c.add_argument("results")
    c.add_argument("--alpha", type=_alphas, help="comma-separated list, or 'paper' for 0.5,...,1.0")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    m = sub.add_parser("summary", parents=[common], help="infeasible/optimal/within-3/worse counts per cell")
    m.add_argument("results")
    m.add_argument("--baseline", choices=("best-known", "exact"), default="best-known")
    m.add_argument("--config")
    m.add_argument("--out")
    m.set_defaults(func=cmd_summary)

    p = sub.add_parser("presets", parents=[common], help="list the algorithm presets")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InstanceError, ExperimentError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
