"""Scenario inputs: scripted validation outcomes, backtrack origins, limits.

Validation is an external oracle for the machines: a run consults the
scenario at every validation point, keyed by (phase, index, attempt).  The
attempt number for a given (phase, index) starts at 1 and advances on every
query, which makes runs fully reproducible.  A seeded random failure mode is
available for fuzzing.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .hierarchy import Hierarchy


class ScenarioError(ValueError):
    """Invalid scenario document or inconsistent parameters."""


class UndefinedTraceOriginError(ScenarioError):
    """A scripted origin map has no entry for the failing level."""


class OriginKind(enum.Enum):
    FIXED = "fixed"
    SCRIPTED = "scripted"
    DEPENDENCY_MIN = "dependency_min"


@dataclass(frozen=True)
class TraceOriginStrategy:
    kind: OriginKind
    fixed_level: int | None = None
    scripted: dict[int, int] = field(default_factory=dict)

    @classmethod
    def fixed(cls, j0: int) -> "TraceOriginStrategy":
        return cls(OriginKind.FIXED, fixed_level=j0)

    @classmethod
    def scripted_map(cls, mapping: dict[int, int]) -> "TraceOriginStrategy":
        for i, j in mapping.items():
            if j > i:
                raise ScenarioError(f"scripted origin {j} exceeds failing level {i}")
        return cls(OriginKind.SCRIPTED, scripted=dict(mapping))

    @classmethod
    def dependency_min(cls) -> "TraceOriginStrategy":
        return cls(OriginKind.DEPENDENCY_MIN)


def resolve_trace_origin(
    strategy: TraceOriginStrategy,
    failing_level: int,
    failing_nodes: set[int],
    hierarchy: Hierarchy | None = None,
    implicated: set[int] | None = None,
) -> int:
    """Map a validation failure at ``failing_level`` to the refinement start.

    FIXED clamps to the failing level; SCRIPTED raises for missing entries;
    DEPENDENCY_MIN takes the minimum level among implicated ancestors of the
    failing nodes, defaulting to the failing level itself.  The result always
    satisfies 1 <= j <= failing_level.
    """
    if strategy.kind is OriginKind.FIXED:
        assert strategy.fixed_level is not None
        return max(1, min(strategy.fixed_level, failing_level))
    if strategy.kind is OriginKind.SCRIPTED:
        if failing_level not in strategy.scripted:
            raise UndefinedTraceOriginError(
                f"no scripted trace origin for level {failing_level}"
            )
        return max(1, min(strategy.scripted[failing_level], failing_level))
    # DEPENDENCY_MIN
    if hierarchy is None or not implicated:
        return failing_level
    levels = []
    for node_id in failing_nodes:
        for anc in hierarchy.ancestors(node_id):
            if anc.id in implicated:
                levels.append(anc.level)
    if not levels:
        return failing_level
    return max(1, min(min(levels), failing_level))


@dataclass
class CddScript:
    """CDD-specific scripting: which components fail tests or need feedback,
    and how many refine iterations each takes to converge."""

    test_failures: dict[int, int] = field(default_factory=dict)  # component -> times
    feedback_cycles: dict[int, int] = field(default_factory=dict)
    refine_iterations: dict[int, int] = field(default_factory=dict)  # component -> n
    increment_feedback: dict[int, int] = field(default_factory=dict)  # inc -> component


@dataclass
class Scenario:
    """Shared run configuration for the basic and hybrid machines."""

    r_max: int = 1
    k_thresholds: dict[int, int] = field(default_factory=dict)
    trace_origin: TraceOriginStrategy = field(
        default_factory=lambda: TraceOriginStrategy.fixed(1)
    )
    validation_script: dict[tuple[str, int, int], set[int]] = field(
        default_factory=dict
    )
    implicated_nodes: set[int] = field(default_factory=set)
    seed: int = 0
    random_failure_rate: float = 0.0
    # Basic-machine extras
    dad_missing_deps: dict[int, list[str]] = field(default_factory=dict)
    cdd: CddScript = field(default_factory=CddScript)
    increments: list[list[int]] | None = None

    _attempt_counters: dict[tuple[str, int], int] = field(
        default_factory=dict, repr=False
    )

    def reset_counters(self) -> None:
        self._attempt_counters.clear()

    def k_for(self, level: int, level_size: int) -> int:
        k = self.k_thresholds.get(level, level_size)
        if k > level_size:
            raise ScenarioError(
                f"K threshold {k} exceeds level {level} size {level_size}"
            )
        return k

    def next_attempt(self, phase: str, index: int) -> int:
        key = (phase, index)
        self._attempt_counters[key] = self._attempt_counters.get(key, 0) + 1
        return self._attempt_counters[key]

    def has_script_for(self, phase: str, index: int) -> bool:
        """True when the next attempt at (phase, index) has a scripted entry."""
        attempt = self._attempt_counters.get((phase, index), 0) + 1
        return (phase, index, attempt) in self.validation_script

    def failing_nodes(
        self, phase: str, index: int, attempt: int, candidates: list[int]
    ) -> set[int]:
        """Failing node ids for one validation query.

        Scripted entries win; otherwise the seeded Bernoulli mode draws a
        failure per candidate node (deterministic in the scenario seed).
        """
        key = (phase, index, attempt)
        if key in self.validation_script:
            return self.validation_script[key] & set(candidates)
        if self.random_failure_rate > 0.0:
            rng = random.Random(f"{self.seed}:{phase}:{index}:{attempt}")
            return {
                n for n in sorted(candidates) if rng.random() < self.random_failure_rate
            }
        return set()


def _origin_from_json(obj: dict[str, Any]) -> TraceOriginStrategy:
    kind = obj.get("strategy", "fixed")
    if kind == "fixed":
        return TraceOriginStrategy.fixed(int(obj["level"]))
    if kind == "scripted":
        return TraceOriginStrategy.scripted_map(
            {int(k): int(v) for k, v in obj["map"].items()}
        )
    if kind == "dependency_min":
        return TraceOriginStrategy.dependency_min()
    raise ScenarioError(f"unknown trace origin strategy {kind!r}")


def load_scenario(source: str | Path | dict) -> Scenario:
    """Load a scenario JSON document (path, JSON text, or parsed object)."""
    if isinstance(source, Path):
        obj = json.loads(source.read_text())
    elif isinstance(source, str):
        p = Path(source)
        obj = json.loads(p.read_text() if p.exists() else source)
    else:
        obj = source

    script: dict[tuple[str, int, int], set[int]] = {}
    for entry in obj.get("validation_script", []):
        key = (str(entry["phase"]), int(entry["index"]), int(entry["attempt"]))
        script[key] = {int(n) for n in entry["failing_node_ids"]}

    cdd_obj = obj.get("cdd", {})
    cdd = CddScript(
        test_failures={int(k): int(v) for k, v in cdd_obj.get("test_failures", {}).items()},
        feedback_cycles={
            int(k): int(v) for k, v in cdd_obj.get("feedback_cycles", {}).items()
        },
        refine_iterations={
            int(k): int(v) for k, v in cdd_obj.get("refine_iterations", {}).items()
        },
        increment_feedback={
            int(k): int(v) for k, v in cdd_obj.get("increment_feedback", {}).items()
        },
    )

    return Scenario(
        r_max=int(obj.get("r_max", 1)),
        k_thresholds={int(k): int(v) for k, v in obj.get("k", {}).items()},
        trace_origin=_origin_from_json(obj.get("trace_origin", {"strategy": "fixed", "level": 1})),
        validation_script=script,
        implicated_nodes={int(n) for n in obj.get("implicated_nodes", [])},
        seed=int(obj.get("seed", 0)),
        random_failure_rate=float(obj.get("random_failure_rate", 0.0)),
        dad_missing_deps={
            int(k): list(v) for k, v in obj.get("dad_missing_deps", {}).items()
        },
        cdd=cdd,
        increments=[[int(c) for c in inc] for inc in obj["increments"]]
        if "increments" in obj
        else None,
    )


def dump_scenario(s: Scenario) -> dict[str, Any]:
    origin: dict[str, Any]
    if s.trace_origin.kind is OriginKind.FIXED:
        origin = {"strategy": "fixed", "level": s.trace_origin.fixed_level}
    elif s.trace_origin.kind is OriginKind.SCRIPTED:
        origin = {
            "strategy": "scripted",
            "map": {str(k): v for k, v in s.trace_origin.scripted.items()},
        }
    else:
        origin = {"strategy": "dependency_min"}
    return {
        "r_max": s.r_max,
        "k": {str(k): v for k, v in s.k_thresholds.items()},
        "trace_origin": origin,
        "seed": s.seed,
        "random_failure_rate": s.random_failure_rate,
        "validation_script": [
            {
                "phase": phase,
                "index": index,
                "attempt": attempt,
                "failing_node_ids": sorted(nodes),
            }
            for (phase, index, attempt), nodes in sorted(s.validation_script.items())
        ],
        "implicated_nodes": sorted(s.implicated_nodes),
        "dad_missing_deps": {str(k): v for k, v in s.dad_missing_deps.items()},
        "cdd": {
            "test_failures": {str(k): v for k, v in s.cdd.test_failures.items()},
            "feedback_cycles": {str(k): v for k, v in s.cdd.feedback_cycles.items()},
            "refine_iterations": {
                str(k): v for k, v in s.cdd.refine_iterations.items()
            },
            "increment_feedback": {
                str(k): v for k, v in s.cdd.increment_feedback.items()
            },
        },
        **({"increments": s.increments} if s.increments is not None else {}),
    }
