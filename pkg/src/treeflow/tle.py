"""Grandparent/parent/child bitmask store with O(1) selection operations.

Each node at levels 1..L-2 that has grandchildren becomes one storage unit:
the unit is keyed by the grandparent node, its columns are that node's
children, and each column's bitmask encodes the selection of the column
node's own children.  The bottom two levels are therefore embedded as
columns/bits of level L-2 units and never get units of their own.

Selection state lives per subject (e.g. a person).  ``lookup`` and ``update``
touch exactly one record cell; an instrumented step counter provides the
constant-work evidence used by the benchmark suite.

Concurrency: a single writer per (subject, unit) record with any number of
readers is safe because bitmask values are immutable ints and records swap
whole cell values; torn reads cannot occur.  The reference mode used by all
tests is single-threaded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable

from .bitmask import Bitmask, WidthClass, empty
from .hierarchy import Hierarchy, HierarchyNode
from .trace import Trace

# A node is selectable iff it sits at or below this depth: the top two levels
# are structural anchors (record key and column of the root unit).
MIN_SELECTABLE_LEVEL = 3

# Elementary-step budgets (record fetch + cell fetch + bit op, plus the
# parent-liveness pre-check on selects).
LOOKUP_STEP_BUDGET = 3
UPDATE_STEP_BUDGET = 8


class TleError(ValueError):
    """Store usage error."""


class UnknownChildError(TleError):
    """A node id outside the hierarchy, or above the selectable levels."""


class OrphanSelectionError(TleError):
    """Select of a node whose parent is not currently selected."""


class ShallowHierarchyError(TleError):
    """Hierarchies with fewer than three levels have no storable unit."""


@dataclass(frozen=True)
class TleUnit:
    """One grandparent table: ordered parent columns with per-column widths."""

    grandparent_id: int
    parent_column_ids: tuple[int, ...]
    child_widths: dict[int, WidthClass]


@dataclass(frozen=True)
class TleSchema:
    units: dict[int, TleUnit]
    embedded_levels: tuple[int, int]

    def unit_for_child(self, h: Hierarchy, child_id: int) -> tuple[TleUnit, int]:
        """Resolve a selectable node to (unit, parent column id)."""
        node = h.node(child_id)
        if node.level < MIN_SELECTABLE_LEVEL:
            raise UnknownChildError(
                f"node {child_id} at level {node.level} has no ancestor unit"
            )
        parent = h.parent(child_id)
        assert parent is not None
        grandparent = h.parent(parent.id)
        assert grandparent is not None
        unit = self.units.get(grandparent.id)
        if unit is None or parent.id not in unit.child_widths:
            raise UnknownChildError(f"no unit column for node {child_id}")
        return unit, parent.id


def generate_schema(h: Hierarchy) -> TleSchema:
    """One unit per node at levels 1..L-2 with grandchildren; columns ordered
    by child_index; column width taken from the column node's width class.
    The two deepest levels are flagged embedded."""
    if h.max_level < 3:
        raise ShallowHierarchyError(
            f"need at least 3 levels for a storage unit, got {h.max_level}"
        )
    units: dict[int, TleUnit] = {}
    for level in range(1, h.max_level - 1):
        for g in h.level(level):
            columns = h.children(g.id)
            if not any(h.children(c.id) for c in columns):
                continue
            for c in columns:
                if len(h.children(c.id)) > c.width_class.capacity:
                    raise TleError(
                        f"column {c.id} width {c.width_class.serialize()} too "
                        f"small for {len(h.children(c.id))} children"
                    )
            units[g.id] = TleUnit(
                grandparent_id=g.id,
                parent_column_ids=tuple(c.id for c in columns),
                child_widths={c.id: c.width_class for c in columns},
            )
    return TleSchema(units=units, embedded_levels=(h.max_level - 1, h.max_level))


@dataclass
class TleRecord:
    subject_id: int
    unit_id: int
    cells: dict[int, Bitmask]


class StepCounter:
    """Counts elementary store steps: record fetch, cell fetch, bit op."""

    def __init__(self) -> None:
        self.steps = 0

    def tick(self, n: int = 1) -> None:
        self.steps += n


class TleStore:
    def __init__(self, hierarchy: Hierarchy, schema: TleSchema | None = None):
        self.hierarchy = hierarchy
        self.schema = schema or generate_schema(hierarchy)
        self.records: dict[tuple[int, int], TleRecord] = {}
        self.subjects: set[int] = set()
        self.counter = StepCounter()

    # -- record plumbing ----------------------------------------------------

    def _empty_record(self, subject: int, unit: TleUnit) -> TleRecord:
        return TleRecord(
            subject_id=subject,
            unit_id=unit.grandparent_id,
            cells={
                col: empty(unit.child_widths[col]) for col in unit.parent_column_ids
            },
        )

    def _fetch(self, subject: int, unit: TleUnit, create: bool) -> TleRecord | None:
        self.counter.tick()  # record fetch
        key = (subject, unit.grandparent_id)
        rec = self.records.get(key)
        if rec is None and create:
            rec = self._empty_record(subject, unit)
            self.records[key] = rec
            self.subjects.add(subject)
        return rec

    def _is_selected(self, subject: int, node: HierarchyNode) -> bool:
        """Raw bit test; structural levels count as always selected."""
        if node.level < MIN_SELECTABLE_LEVEL:
            return True
        unit, column = self.schema.unit_for_child(self.hierarchy, node.id)
        rec = self._fetch(subject, unit, create=False)
        self.counter.tick()  # cell fetch
        cell = rec.cells[column] if rec is not None else empty(unit.child_widths[column])
        self.counter.tick()  # bit test
        return cell.test(node.child_index)

    # -- public operations --------------------------------------------------

    def _selectable(self, child_id: int) -> "HierarchyNode":
        if child_id not in self.hierarchy.nodes:
            raise UnknownChildError(f"unknown node id {child_id}")
        node = self.hierarchy.node(child_id)
        if node.level < MIN_SELECTABLE_LEVEL:
            raise UnknownChildError(
                f"node {child_id} at level {node.level} is structural"
            )
        return node

    def lookup(self, subject: int, child_id: int) -> bool:
        """Selection status of one node; constant elementary steps."""
        return self._is_selected(subject, self._selectable(child_id))

    def update(self, subject: int, child_id: int, selected: bool) -> None:
        """Set or clear one selection bit.

        Selecting checks that the parent is live (mirrors the normalized
        store's orphan rule); deselecting touches only the single bit, the
        cascading wipe is ``reset_subtree``.
        """
        node = self._selectable(child_id)
        unit, column = self.schema.unit_for_child(self.hierarchy, node.id)
        if selected:
            parent = self.hierarchy.parent(child_id)
            assert parent is not None
            if not self._is_selected(subject, parent):
                raise OrphanSelectionError(
                    f"parent {parent.id} of node {child_id} is not selected"
                )
        rec = self._fetch(subject, unit, create=True)
        assert rec is not None
        self.counter.tick()  # cell fetch
        cell = rec.cells[column]
        self.counter.tick()  # bit write
        rec.cells[column] = cell.set(node.child_index) if selected else cell.clear(
            node.child_index
        )

    def reset_subtree(self, subject: int, node_id: int) -> None:
        """Clear the node's own bit and zero every cell whose column lies in
        the node's subtree, for this subject."""
        node = self.hierarchy.node(node_id)
        if node.level >= MIN_SELECTABLE_LEVEL:
            self.update(subject, node_id, False)
        subtree = self.hierarchy.subtree_ids(node_id)
        for (subj, unit_id), rec in self.records.items():
            if subj != subject:
                continue
            unit = self.schema.units[unit_id]
            for col in unit.parent_column_ids:
                if col in subtree and not rec.cells[col].is_empty():
                    rec.cells[col] = empty(unit.child_widths[col])

    def batch_query(
        self, predicate: Callable[[int, int, Bitmask], bool]
    ) -> list[tuple[int, int, int, Bitmask]]:
        """Visit every stored cell once; matches are
        (subject, unit, column, mask) tuples.  Work is linear in records."""
        matches = []
        for (subject, unit_id), rec in self.records.items():
            self.counter.tick()  # record visit
            for col, mask in rec.cells.items():
                self.counter.tick()  # one mask op per column
                if predicate(unit_id, col, mask):
                    matches.append((subject, unit_id, col, mask))
        return matches

    # -- decoding and reporting ----------------------------------------------

    def selected_children(self, subject: int, parent_id: int) -> list[HierarchyNode]:
        """Children of ``parent_id`` whose bits are set (raw, not reachability
        filtered).  Structural parents resolve through the root unit."""
        children = self.hierarchy.children(parent_id)
        if not children:
            return []
        first = children[0]
        if first.level < MIN_SELECTABLE_LEVEL:
            # children are structural too; all "selected"
            return children
        unit, column = self.schema.unit_for_child(self.hierarchy, first.id)
        rec = self.records.get((subject, unit.grandparent_id))
        if rec is None:
            return []
        mask = rec.cells[column]
        return [c for c in children if mask.test(c.child_index)]

    def selection_set(self, subject: int) -> set[int]:
        """Selected nodes reachable from the root through selected bits.
        Bits left set under a deselected ancestor are not visible."""
        out: set[int] = set()
        frontier = [self.hierarchy.root_id]
        while frontier:
            parent = frontier.pop()
            for child in self.selected_children(subject, parent):
                if child.level >= MIN_SELECTABLE_LEVEL:
                    out.add(child.id)
                frontier.append(child.id)
        return out

    def report_paths(self, subject: int) -> list[str]:
        """Root-to-selected-node paths, ``" > "``-joined, sorted
        lexicographically.  A selected node with no selected children
        terminates its path."""
        paths = []
        names: dict[int, str] = {self.hierarchy.root_id: self.hierarchy.root.name}
        frontier = [self.hierarchy.root_id]
        while frontier:
            parent = frontier.pop()
            selected = self.selected_children(subject, parent)
            for child in selected:
                names[child.id] = f"{names[parent]} > {child.name}"
                frontier.append(child.id)
            if not selected and self.hierarchy.node(parent).level >= MIN_SELECTABLE_LEVEL:
                paths.append(names[parent])
        return sorted(paths)

    # -- storage accounting ---------------------------------------------------

    def storage_report(self, key_bits: int) -> dict[str, Any]:
        """Bits used by this store vs one foreign-key row per selection.

        traditional = (selected child count) x key_bits; ours is the summed
        capacity of all allocated cells.  The ratio is exact."""
        if key_bits < 1:
            raise TleError("key_bits must be >= 1")
        tle_bits = 0
        selected = 0
        for rec in self.records.values():
            for mask in rec.cells.values():
                tle_bits += mask.width.capacity
                selected += mask.popcount()
        traditional = selected * key_bits
        ratio = Fraction(tle_bits, traditional) if traditional else None
        return {
            "tle_bits": tle_bits,
            "traditional_bits": traditional,
            "selected": selected,
            "ratio": ratio,
        }

    # -- persistence -----------------------------------------------------------

    def save_snapshot(self, path: str | Path) -> None:
        doc = {
            "schema": {
                "embedded_levels": list(self.schema.embedded_levels),
                "units": [
                    {
                        "grandparent_id": u.grandparent_id,
                        "columns": [
                            {"id": c, "width_class": u.child_widths[c].serialize()}
                            for c in u.parent_column_ids
                        ],
                    }
                    for u in self.schema.units.values()
                ],
            },
            "records": [
                {
                    "subject_id": rec.subject_id,
                    "unit_id": rec.unit_id,
                    "cells": {
                        str(col): mask.serialize() for col, mask in rec.cells.items()
                    },
                }
                for rec in self.records.values()
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load_snapshot(cls, hierarchy: Hierarchy, path: str | Path) -> "TleStore":
        doc = json.loads(Path(path).read_text())
        store = cls(hierarchy)
        for raw in doc["records"]:
            subject = int(raw["subject_id"])
            unit_id = int(raw["unit_id"])
            unit = store.schema.units[unit_id]
            rec = store._empty_record(subject, unit)
            for col_text, value in raw["cells"].items():
                col = int(col_text)
                rec.cells[col] = Bitmask.deserialize(unit.child_widths[col], value)
            store.records[(subject, unit_id)] = rec
            store.subjects.add(subject)
        return store


def decode(mask: Bitmask, parent: HierarchyNode, h: Hierarchy) -> set[HierarchyNode]:
    """Children of ``parent`` whose bit is set in ``mask``.

    Raises DanglingBitError when a set bit has no corresponding child."""
    from .bitmask import DanglingBitError

    by_index = {c.child_index: c for c in h.children(parent.id)}
    out = set()
    for i in mask.bits():
        if i not in by_index:
            raise DanglingBitError(
                f"bit {i} set but parent {parent.id} has no child at that index"
            )
        out.add(by_index[i])
    return out


# -- paged traversal ------------------------------------------------------------


@dataclass(frozen=True)
class TraversalPage:
    """One batch of parent nodes plus the user's selections for their children."""

    parent_ids: tuple[int, ...]
    selections: dict[int, bool]


def tle_traverse(
    store: TleStore, subject: int, pages: Iterable[TraversalPage]
) -> Trace:
    """Run the paged traversal loop over the store.

    Per page: load the parent batch, resolve grandparents, load their unit
    records, resolve children and preset their status from current bits, then
    apply the page's selections and commit.  One event per rule fired."""
    trace = Trace("tle")
    pages = list(pages)
    trace.emit("TLE1", "start", "S0", {"pages": len(pages)})
    for page_no, page in enumerate(pages, start=1):
        parents = [store.hierarchy.node(p) for p in page.parent_ids]
        trace.emit(
            "TLE2", "S0", "S1", {"page": page_no, "parents": [p.id for p in parents]}
        )
        grandparents = []
        for p in parents:
            g = store.hierarchy.parent(p.id)
            if g is None:
                raise TleError(f"page parent {p.id} has no grandparent unit")
            if g.id not in store.schema.units:
                raise TleError(f"page parent {p.id} resolves to unknown unit {g.id}")
            grandparents.append(g.id)
        trace.emit("TLE3", "S1", "S2", {"page": page_no, "grandparents": grandparents})
        for g in grandparents:
            store._fetch(subject, store.schema.units[g], create=True)
        trace.emit("TLE4", "S2", "S3", {"page": page_no, "units": grandparents})
        preset: dict[int, bool] = {}
        for p in parents:
            for child in store.hierarchy.children(p.id):
                preset[child.id] = store.lookup(subject, child.id)
        trace.emit("TLE5", "S3", "S4", {"page": page_no, "preset": preset})
        applied = {}
        for child_id in sorted(page.selections):
            wanted = page.selections[child_id]
            if preset.get(child_id) != wanted:
                store.update(subject, child_id, wanted)
            applied[child_id] = wanted
        trace.emit("TLE6", "S4", "S5", {"page": page_no, "applied": applied})
        if page_no < len(pages):
            trace.emit("TLE7", "S5", "S0", {"page": page_no})
    if pages:
        trace.emit("TLE8", "S5", "S6", {})
    else:
        trace.emit("TLE8", "S0", "S6", {})
    trace.emit("TLE9", "S6", "end", {})
    return trace
