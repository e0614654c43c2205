"""The four foundational machines: dependency-ordered DAG processing (DA
rules), depth-first traversal with backtrack validation (DF rules),
level-synchronized breadth-first processing (BF rules), and bounded
iterative refinement over component increments (CD rules).

Each run returns a Trace whose rule ids come straight from the machine's
transition table; payloads carry the condition snapshot that fired the rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .hierarchy import Hierarchy
from .scenario import Scenario
from .trace import Trace


class MachineError(RuntimeError):
    pass


class AcyclicityViolationError(MachineError):
    """A cycle was found at load or after a graph extension."""


class LoopUnboundedError(MachineError):
    """A component exceeded its refinement iteration cap."""

    def __init__(self, component: int, attempts: int, trace: Trace):
        super().__init__(f"component {component} still failing after {attempts} refinements")
        self.component = component
        self.attempts = attempts
        self.trace = trace


# -- DAG input ---------------------------------------------------------------


@dataclass
class Dag:
    """Directed acyclic dependency graph: deps[v] must complete before v."""

    node_names: dict[int, str]
    deps: dict[int, set[int]]
    root_id: int
    _next_id: int = field(default=0, repr=False)

    def __post_init__(self) -> None:
        self._next_id = max(self.node_names) + 1 if self.node_names else 1
        for v in self.node_names:
            self.deps.setdefault(v, set())

    @classmethod
    def from_rows(cls, rows: list[dict], root_id: int) -> "Dag":
        names = {int(r["id"]): str(r.get("name", r["id"])) for r in rows}
        deps = {int(r["id"]): {int(d) for d in r.get("deps", [])} for r in rows}
        return cls(node_names=names, deps=deps, root_id=root_id)

    @classmethod
    def from_hierarchy(cls, h: Hierarchy) -> "Dag":
        names = {n.id: n.name for n in h.nodes.values()}
        deps = {
            n.id: ({n.parent_id} if n.parent_id is not None else set())
            for n in h.nodes.values()
        }
        return cls(node_names=names, deps=deps, root_id=h.root_id)

    def children(self, v: int) -> list[int]:
        return sorted(u for u, d in self.deps.items() if v in d)

    def add_dependency_node(self, name: str, dependent: int) -> int:
        """Materialize a fresh node that ``dependent`` depends on."""
        new_id = self._next_id
        self._next_id += 1
        self.node_names[new_id] = name
        self.deps[new_id] = set()
        self.deps[dependent].add(new_id)
        return new_id

    def is_acyclic(self) -> bool:
        color: dict[int, int] = {}

        def visit(v: int) -> bool:
            color[v] = 1
            for u in self.deps[v]:
                state = color.get(u, 0)
                if state == 1 or (state == 0 and not visit(u)):
                    return False
            color[v] = 2
            return True

        return all(visit(v) for v in self.node_names if color.get(v, 0) == 0)


def run_dad(dag: Dag, scenario: Scenario | None = None) -> Trace:
    """Dependency-ordered processing with scripted graph extension.

    Nodes become ready once all dependencies are processed; a scripted
    missing dependency triggers one extend/enqueue cycle (DA4/DA5) before the
    node is re-queued.  Ends with DA6 when every node is processed.
    """
    scenario = scenario or Scenario()
    if not dag.is_acyclic():
        raise AcyclicityViolationError("input graph has a cycle")
    trace = Trace("dad")
    pending_missing = {v: list(names) for v, names in scenario.dad_missing_deps.items()}

    processed: set[int] = set()
    queued: set[int] = {dag.root_id}
    queue: list[int] = [dag.root_id]
    trace.emit("DA1", "S0", "S1", {"root": dag.root_id, "nodes": len(dag.node_names)})

    def ready(v: int) -> bool:
        return all(u in processed for u in dag.deps[v])

    while queue:
        v = queue.pop(0)
        queued.discard(v)
        trace.emit("DA2", "S1", "S2", {"node": v, "deps": sorted(dag.deps[v])})
        if pending_missing.get(v):
            name = pending_missing[v].pop(0)
            new_id = dag.add_dependency_node(name, v)
            if not dag.is_acyclic():
                raise AcyclicityViolationError(
                    f"extension for node {v} introduced a cycle"
                )
            trace.emit("DA4", "S2", "S3", {"node": v, "new_node": new_id, "name": name})
            trace.emit("DA5", "S3", "S1", {"enqueued": [new_id, v]})
            for w in (new_id, v):
                if w not in queued:
                    queue.append(w)
                    queued.add(w)
            continue
        if not ready(v):
            # An unprocessed in-graph dependency: schedule it ahead of v.
            missing = sorted(u for u in dag.deps[v] if u not in processed)
            trace.emit("DA4", "S2", "S3", {"node": v, "unresolved": missing})
            trace.emit("DA5", "S3", "S1", {"enqueued": missing + [v]})
            for w in missing + [v]:
                if w not in queued and w not in processed:
                    queue.append(w)
                    queued.add(w)
            continue
        processed.add(v)
        enq = [c for c in dag.children(v) if c not in processed and ready(c) and c not in queued]
        trace.emit("DA3", "S2", "S1", {"node": v, "children_enqueued": enq})
        for c in enq:
            queue.append(c)
            queued.add(c)

    if len(processed) != len(dag.node_names):
        raise MachineError(
            f"queue drained with {len(dag.node_names) - len(processed)} nodes unprocessed"
        )
    trace.emit("DA6", "S1", "T", {"processed": len(processed)})
    return trace


def run_dfd(h: Hierarchy) -> Trace:
    """Depth-first traversal: pre-order processing, sibling exploration via
    backtrack points, one subtree validation per closed backtrack point."""
    trace = Trace("dfd")
    processed: set[int] = set()
    trace.emit("DF1", "S0", "S1", {"root": h.root_id, "nodes": len(h)})

    def order(node_id: int) -> list[int]:
        return [c.id for c in h.children(node_id)]

    def next_unprocessed_child(b: int) -> int | None:
        for c in order(b):
            if c not in processed:
                return c
        return None

    current: int | None = h.root_id
    while current is not None:
        node = current
        processed.add(node)
        kids = order(node)
        if kids:
            trace.emit("DF2", "S1", "S1", {"node": node, "pushed": kids})
            current = kids[0]
            continue
        # Leaf: start backtracking from the parent (or the node itself at root).
        parent = h.parent(node)
        b = parent.id if parent is not None else node
        trace.emit("DF3", "S1", "S2", {"node": node, "backtrack_point": b})
        current = None
        while True:
            nxt = next_unprocessed_child(b)
            if nxt is not None:
                trace.emit("DF4", "S2", "S1", {"backtrack_point": b, "sibling": nxt})
                current = nxt
                break
            trace.emit("DF5", "S2", "S3", {"subtree_root": b})
            parent = h.parent(b)
            if parent is None:
                trace.emit(
                    "DF7", "S3", "T", {"processed": len(processed), "backtrack_point": b}
                )
                break
            trace.emit("DF6", "S3", "S2", {"subtree_root": b, "to": parent.id})
            b = parent.id
    return trace


def dfd_visit_order(trace: Trace) -> list[int]:
    """Processing order recovered from a depth-first trace."""
    order = []
    for ev in trace:
        if ev.rule == "DF1":
            order.append(ev.payload["root"])
        elif ev.rule in ("DF2", "DF3") and ev.payload["node"] not in order:
            order.append(ev.payload["node"])
    return order


def run_bfd(h: Hierarchy, within_level_order: str = "asc") -> Trace:
    """Level-synchronized breadth-first processing: every node of level k is
    processed (BF2) and the level validated (BF3) before level k+1 starts."""
    if within_level_order not in ("asc", "desc"):
        raise ValueError("within_level_order must be 'asc' or 'desc'")
    trace = Trace("bfd")
    max_level = h.max_level
    trace.emit("BF1", "S0", "S1", {"root": h.root_id, "max_level": max_level})
    for k in range(1, max_level + 1):
        nodes = [n.id for n in h.level(k)]
        if within_level_order == "desc":
            nodes = nodes[::-1]
        for v in nodes:
            children = [c.id for c in h.children(v)]
            trace.emit("BF2", "S1", "S1", {"node": v, "level": k, "enqueued": children})
        trace.emit("BF3", "S1", "S2", {"level": k, "validated": sorted(nodes)})
        if k < max_level:
            trace.emit("BF4", "S2", "S1", {"level": k + 1})
        else:
            trace.emit("BF5", "S2", "T", {"levels": max_level})
    return trace


def run_cdd(components: list[int], m_cap: int, scenario: Scenario | None = None) -> Trace:
    """Incremental development with bounded refinement loops.

    The scenario partitions components into increments (default: one
    increment with everything) and scripts test failures, feedback cycles,
    per-component refine iteration counts, and increment-level feedback.
    A component whose refinement needs more than ``m_cap`` iterations raises
    LoopUnboundedError after exactly ``m_cap`` refine iterations.
    """
    scenario = scenario or Scenario()
    trace = Trace("cdd")
    increments = scenario.increments or [list(components)]
    trace.emit(
        "CD1", "S0", "S1", {"components": list(components), "increments": len(increments)}
    )

    remaining_failures = dict(scenario.cdd.test_failures)
    remaining_feedback = dict(scenario.cdd.feedback_cycles)

    def refine(component: int, reason: str) -> None:
        needed = scenario.cdd.refine_iterations.get(component, 1)
        for iteration in range(1, m_cap + 1):
            if iteration >= needed:
                trace.emit(
                    "CD4",
                    "S2",
                    "S1",
                    {"component": component, "refine_iterations": iteration, "reason": reason},
                )
                return
        raise LoopUnboundedError(component, m_cap, trace)

    for inc_index, increment in enumerate(increments, start=1):
        for component in increment:
            trace.emit("CD2", "S1", "S1", {"component": component, "increment": inc_index})
            if remaining_failures.get(component, 0) > 0:
                remaining_failures[component] -= 1
                trace.emit("CD3a", "S1", "S2", {"component": component})
                refine(component, "test_failed")
            elif remaining_feedback.get(component, 0) > 0:
                remaining_feedback[component] -= 1
                trace.emit("CD3b", "S1", "S2", {"component": component})
                refine(component, "feedback_cycle")
        trace.emit("CD5", "S1", "S3", {"increment": inc_index, "components": increment})
        flaw = scenario.cdd.increment_feedback.get(inc_index)
        if flaw is not None:
            trace.emit("CD6", "S3", "S2", {"increment": inc_index, "component": flaw})
            refine(flaw, "increment_feedback")
            trace.emit("CD5", "S1", "S3", {"increment": inc_index, "components": increment})
        if inc_index < len(increments):
            # The only table-legal path back to development is a revision
            # cycle: the next increment's requirements arrive as feedback.
            head = increments[inc_index][0]
            trace.emit(
                "CD6",
                "S3",
                "S2",
                {"increment": inc_index, "component": head, "reason": "next_increment"},
            )
            trace.emit("CD4", "S2", "S1", {"component": head, "refine_iterations": 0})
    trace.emit("CD7", "S3", "T", {"increments": len(increments)})
    return trace
