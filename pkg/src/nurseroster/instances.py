"""Synthetic instance generation, pattern catalogues and instance files.

Randomness comes from numpy's PCG64 bit generator. A config seed is fed to
``numpy.random.SeedSequence`` and spawned into four independent child
streams, in this order: catalogue sampling, nurse grades and contracts, the
seeding roster, and preference costs.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from math import comb
from typing import Iterable

import jsonschema
import numpy as np

from .problem import (
    N_SLOTS,
    Contract,
    InstanceError,
    Nurse,
    ProblemInstance,
    ShiftPattern,
    coverage,
)

FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


def _half_patterns(count: int, offset: int) -> list[ShiftPattern]:
    out = []
    for on in itertools.combinations(range(7), count):
        cover = [False] * N_SLOTS
        for k in on:
            cover[offset + k] = True
        out.append(ShiftPattern(tuple(cover)))
    return out


def _combined_patterns(count: int) -> list[ShiftPattern]:
    out = []
    for on in itertools.combinations(range(N_SLOTS), count):
        if on[0] < 7 <= on[-1]:
            cover = [False] * N_SLOTS
            for k in on:
                cover[k] = True
            out.append(ShiftPattern(tuple(cover)))
    return out


def enumerate_patterns(
    day_counts: Iterable[int] = (),
    night_counts: Iterable[int] = (),
    combined_counts: Iterable[int] = (),
) -> list[ShiftPattern]:
    """All day-only, night-only and combined patterns with the given slot counts.

    Within each group patterns appear in lexicographic order of their bit
    strings, highest first, so that for ``day_counts={5}`` the first pattern
    is ``11111000000000``. Groups come in the order days, nights, combined,
    and counts within a group in increasing order. Combined patterns work at
    least one day and at least one night, so no pattern is listed twice.
    """
    out: list[ShiftPattern] = []
    for c in sorted(set(day_counts)):
        if not 0 <= c <= 7:
            raise ConfigError(f"day count {c} outside 0..7")
        out += _half_patterns(c, 0)
    for c in sorted(set(night_counts)):
        if not 0 <= c <= 7:
            raise ConfigError(f"night count {c} outside 0..7")
        out += _half_patterns(c, 7)
    for c in sorted(set(combined_counts)):
        if not 0 <= c <= 14:
            raise ConfigError(f"combined count {c} outside 0..14")
        out += _combined_patterns(c)
    return out


def combined_pattern_count(count: int) -> int:
    """Number of 14-slot patterns with ``count`` slots that mix days and nights."""
    return comb(14, count) - 2 * comb(7, count) + (count == 0)


@dataclass(frozen=True)
class ContractShare:
    kind: str
    shifts: int
    share: float


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of a synthetic instance.

    ``contract_mix`` gives the share of nurses on each contract; nurse counts
    are allocated by largest remainder. ``combined_limit`` caps the number of
    combined patterns in the catalogue (a seeded sample of all of them);
    ``None`` keeps every combined pattern.
    """

    n: int = 10
    p: int = 3
    contract_mix: tuple[ContractShare, ...] = (
        ContractShare("days", 5, 0.4),
        ContractShare("nights", 4, 0.4),
        ContractShare("both", 5, 0.1),
        ContractShare("both", 6, 0.1),
    )
    tightness: float = 0.8
    c_max: int = 20
    seed: int = 0
    combined_limit: int | None = 4
    extra_day_counts: tuple[int, ...] = ()
    extra_night_counts: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.p < 1:
            raise ConfigError("p must be at least 1")
        if not 0 < self.tightness <= 1:
            raise ConfigError("tightness must lie in (0, 1]")
        if self.c_max < 0:
            raise ConfigError("c_max must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.combined_limit is not None and self.combined_limit < 0:
            raise ConfigError("combined_limit must be nonnegative")
        if not self.contract_mix:
            raise ConfigError("contract_mix is empty")
        for c in self.contract_mix:
            if c.share < 0:
                raise ConfigError("contract shares must be nonnegative")
            try:
                Contract(c.kind, c.shifts)
            except InstanceError as exc:
                raise ConfigError(str(exc)) from None
        total = sum(c.share for c in self.contract_mix)
        if abs(total - 1) > 1e-9:
            raise ConfigError(f"contract shares sum to {total}, expected 1")

    def contract_counts(self) -> list[int]:
        exact = [c.share * self.n for c in self.contract_mix]
        counts = [int(np.floor(x)) for x in exact]
        by_remainder = sorted(range(len(exact)), key=lambda k: (-(exact[k] - counts[k]), k))
        for k in by_remainder[: self.n - sum(counts)]:
            counts[k] += 1
        return counts

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["contract_mix"] = [vars(c).copy() for c in self.contract_mix]
        d["extra_day_counts"] = list(self.extra_day_counts)
        d["extra_night_counts"] = list(self.extra_night_counts)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown generator fields: {sorted(unknown)}")
        if "contract_mix" in d:
            d["contract_mix"] = tuple(ContractShare(**c) for c in d["contract_mix"])
        for k in ("extra_day_counts", "extra_night_counts"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


PRESETS: dict[str, GeneratorConfig] = {
    # 10 nurses, 3 grades, 21 + 35 + 4 = 60 patterns
    "desk": GeneratorConfig(),
    # 4..6 nurses and at most 20 patterns: exact_solve finishes instantly
    "tiny": GeneratorConfig(
        n=5,
        p=2,
        contract_mix=(
            ContractShare("days", 6, 0.4),
            ContractShare("nights", 6, 0.4),
            ContractShare("both", 6, 0.2),
        ),
        combined_limit=6,
        c_max=10,
    ),
    # 30 nurses, 3 grades, 91 + 91 + 229 = 411 patterns
    "paper-size": GeneratorConfig(
        n=30,
        p=3,
        contract_mix=(
            ContractShare("days", 5, 0.3),
            ContractShare("days", 4, 0.1),
            ContractShare("nights", 4, 0.25),
            ContractShare("nights", 3, 0.15),
            ContractShare("both", 5, 0.1),
            ContractShare("both", 6, 0.1),
        ),
        combined_limit=229,
        extra_day_counts=(3,),
        extra_night_counts=(5,),
        c_max=50,
    ),
}


def generator_preset(name: str, **overrides) -> GeneratorConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown generator preset {name!r}; known: {sorted(PRESETS)}") from None
    d = base.to_dict()
    d.update(overrides)
    return GeneratorConfig.from_dict(d)


def _catalog(cfg: GeneratorConfig, rng: np.random.Generator) -> list[ShiftPattern]:
    days = {c.shifts for c in cfg.contract_mix if c.kind == "days"} | set(cfg.extra_day_counts)
    nights = {c.shifts for c in cfg.contract_mix if c.kind == "nights"} | set(cfg.extra_night_counts)
    both = sorted({c.shifts for c in cfg.contract_mix if c.kind == "both"})
    patterns = enumerate_patterns(days, nights)
    combined = enumerate_patterns(combined_counts=both)
    if cfg.combined_limit is not None and len(combined) > cfg.combined_limit:
        # keep at least one pattern per combined count so every contract is workable
        keep = {next(j for j, pat in enumerate(combined) if sum(pat.cover) == b) for b in both}
        rest = [j for j in range(len(combined)) if j not in keep]
        extra = max(cfg.combined_limit - len(keep), 0)
        keep |= set(rng.choice(rest, size=min(extra, len(rest)), replace=False).tolist())
        combined = [combined[j] for j in sorted(keep)]
    return patterns + combined


def generate_instance(cfg: GeneratorConfig, name: str = "") -> ProblemInstance:
    """Draw a random instance that admits at least one feasible roster.

    A random roster is drawn first; demand is then set to
    ``floor(tightness * coverage)`` of that roster, so the seeding roster is
    itself feasible. Preference costs are uniform integers in ``[0, c_max]``.
    """
    streams = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(cfg.seed).spawn(4)]
    catalog_rng, nurse_rng, roster_rng, cost_rng = streams

    patterns = _catalog(cfg, catalog_rng)
    contracts: list[Contract] = []
    for share, count in zip(cfg.contract_mix, cfg.contract_counts()):
        contracts += [Contract(share.kind, share.shifts)] * count
    order = nurse_rng.permutation(cfg.n)
    grades = nurse_rng.integers(1, cfg.p + 1, size=cfg.n)
    nurses = tuple(Nurse(int(grades[i]), contracts[order[i]]) for i in range(cfg.n))

    cost = cost_rng.integers(0, cfg.c_max + 1, size=(cfg.n, len(patterns)))
    placeholder = ProblemInstance(nurses, patterns, cost, np.zeros((N_SLOTS, cfg.p), int), cfg.p)
    seed_roster = [int(roster_rng.choice(placeholder.feasible[i])) for i in range(cfg.n)]
    demand = np.floor(cfg.tightness * coverage(placeholder, seed_roster) + 1e-9).astype(np.int64)
    return ProblemInstance(nurses, patterns, cost, demand, cfg.p, name=name)


INSTANCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "grades", "nurses", "patterns", "pref_cost", "demand"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "name": {"type": "string"},
        "grades": {"type": "integer", "minimum": 1},
        "nurses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["grade", "contract"],
                "properties": {
                    "grade": {"type": "integer", "minimum": 1},
                    "contract": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["type", "shifts"],
                        "properties": {
                            "type": {"enum": ["days", "nights", "both"]},
                            "shifts": {"type": "integer", "minimum": 0, "maximum": 14},
                        },
                    },
                },
            },
        },
        "patterns": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "string", "pattern": "^[01]{14}$"},
        },
        "pref_cost": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        },
        "demand": {
            "type": "array",
            "minItems": N_SLOTS,
            "maxItems": N_SLOTS,
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        },
    },
}


def instance_to_dict(inst: ProblemInstance) -> dict:
    d = {
        "version": FORMAT_VERSION,
        "grades": inst.grade_count,
        "nurses": [
            {"grade": nu.grade, "contract": {"type": nu.contract.kind, "shifts": nu.contract.shifts}}
            for nu in inst.nurses
        ],
        "patterns": [pat.to_string() for pat in inst.patterns],
        "pref_cost": inst.pref_cost.tolist(),
        "demand": inst.demand.tolist(),
    }
    if inst.name:
        d["name"] = inst.name
    return d


def instance_from_dict(d: dict) -> ProblemInstance:
    try:
        jsonschema.validate(d, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InstanceError(f"invalid instance file at {where}: {exc.message}") from None
    nurses = tuple(
        Nurse(nu["grade"], Contract(nu["contract"]["type"], nu["contract"]["shifts"])) for nu in d["nurses"]
    )
    patterns = tuple(ShiftPattern.from_string(s) for s in d["patterns"])
    ragged = {len(row) for row in d["pref_cost"]} - {len(patterns)}
    if ragged or len(d["pref_cost"]) != len(nurses):
        raise InstanceError(f"pref_cost must be {len(nurses)} x {len(patterns)}")
    if {len(row) for row in d["demand"]} != {d["grades"]}:
        raise InstanceError(f"demand rows must have {d['grades']} entries")
    return ProblemInstance(
        nurses,
        patterns,
        np.array(d["pref_cost"], dtype=np.int64).reshape(len(nurses), len(patterns)),
        np.array(d["demand"], dtype=np.int64),
        d["grades"],
        name=d.get("name", ""),
    )


def write_instance(inst: ProblemInstance, path: str | os.PathLike) -> None:
    with open(path, "w") as f:
        json.dump(instance_to_dict(inst), f, indent=1)
        f.write("\n")


def read_instance(path: str | os.PathLike) -> ProblemInstance:
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from None
    try:
        return instance_from_dict(d)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from None
