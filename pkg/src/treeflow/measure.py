"""Lexicographic progress measure for the hybrid machines.

M = (k1, k2, k3, k4):
  k1  nodes not yet finalized (committed statuses),
  k2  remaining refinement budget, summed over all levels,
  k3  phase ordinal (processing 3, validation 2, bottom-up/depth 1, completion 0),
  k4  intra-phase progress (unvisited nodes in the current batch during
      processing; remaining range steps inside a refinement episode;
      remaining sweep levels in the bottom-up and completion phases).

Every non-terminal transition of both hybrid machines strictly decreases M,
which is what the descent monitor checks event by event.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

Measure = tuple[int, int, int, int]

PHASE_ORDINAL = {
    "S0": 3,
    "S1": 3,
    "S1R": 3,
    "S2": 2,
    "S2R": 2,
    "S3": 1,
    "S3R": 1,
    "S4": 0,
    "S5": 0,
    "T": 0,
}


@dataclass(frozen=True)
class TraceContext:
    """Static run parameters recovered from the first trace event.

    ``k2_touched_only`` switches the budget component to sum only levels
    whose counter has moved.  The default (all levels) keeps k2 monotone
    non-increasing and is what the engines and monitors use; the narrower
    reading is available for comparison only.
    """

    methodology: str
    levels: dict[int, tuple[int, ...]]
    max_level: int
    r_max: int
    k_thresholds: dict[int, int]
    k2_touched_only: bool = False

    @classmethod
    def from_payload(cls, methodology: str, payload: dict[str, Any]) -> "TraceContext":
        levels = {
            int(k): tuple(int(n) for n in v) for k, v in payload["levels"].items()
        }
        return cls(
            methodology=methodology,
            levels=levels,
            max_level=int(payload["L"]),
            r_max=int(payload["r_max"]),
            k_thresholds={int(k): int(v) for k, v in payload.get("k", {}).items()},
        )

    def level_ids(self, k: int) -> tuple[int, ...]:
        return self.levels.get(k, ())

    def node_count(self) -> int:
        return sum(len(v) for v in self.levels.values())


def measure_of(snapshot: dict[str, Any], ctx: TraceContext) -> Measure:
    """Recompute M from a state snapshot (phase, indices, attempts, statuses)."""
    statuses = {int(k): int(v) for k, v in snapshot["statuses"].items()}
    attempts = {int(k): int(v) for k, v in snapshot["attempts"].items()}
    phase = snapshot["phase"]
    k1 = sum(1 for v in statuses.values() if v != 2)
    if ctx.k2_touched_only:
        k2 = sum(
            ctx.r_max - c for l, c in attempts.items() if c > 0 and l <= ctx.max_level
        )
    else:
        k2 = sum(ctx.r_max - attempts.get(l, 0) for l in range(1, ctx.max_level + 1))
    k3 = PHASE_ORDINAL[phase]
    k4 = _k4(snapshot, ctx, statuses)
    m = (k1, k2, k3, k4)
    assert all(c >= 0 for c in m), f"measure components must be non-negative: {m}"
    return m


def _k4(snapshot: dict[str, Any], ctx: TraceContext, statuses: dict[int, int]) -> int:
    phase = snapshot["phase"]
    i = snapshot.get("i")
    j = snapshot.get("j")
    i_orig = snapshot.get("i_orig")
    if phase == "S0":
        return len(ctx.level_ids(1)) + 1
    if phase == "S1":
        return sum(1 for n in ctx.level_ids(int(i)) if statuses.get(n, 0) == 0)
    if phase == "S2":
        return 0
    if phase == "S1R":
        return (int(i_orig) - int(j)) + 2
    if phase == "S2R":
        return (int(i_orig) - int(j)) + 1
    if phase == "S3R":
        return (int(i_orig) - int(j)) + 1
    if phase == "S3":
        return max(int(i) - 2, 0) if ctx.methodology == "pdfd" else 0
    if phase == "S4":
        return ctx.max_level - int(i)
    return 0  # S5, T


def lex_less(a: Measure, b: Measure) -> bool:
    return a < b


def trace_length_cap(n_nodes: int, max_level: int, r_max: int) -> int:
    """Hard upper bound on trace length implied by the measure descent.

    Conservative: each budget or finalization step allows a bounded plateau
    of phase/progress moves."""
    plateau = 4 * (n_nodes + 2 * max_level + 8)
    return (n_nodes + max_level * r_max + 5) * plateau + 4
