"""Brute-force normalized selection store used as an equivalence oracle.

One row per selection with a surrogate key, a link to the parent level's
row, and a soft-delete flag.  Deselection marks the row deleted (history is
never lost); re-selecting undeletes the same row.  The live selection set is
the set of nodes whose row chain up to the top selectable level is entirely
non-deleted.  Intentionally naive: no indexes, no performance claims.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .hierarchy import Hierarchy
from .tle import MIN_SELECTABLE_LEVEL, OrphanSelectionError, UnknownChildError


@dataclass
class SelectionRow:
    row_id: int
    parent_selection_row_id: int | None
    subject_id: int
    node_id: int
    is_deleted: bool = False


@dataclass(frozen=True)
class OracleOp:
    """One scripted operation: kind in {select, deselect, reset_subtree}."""

    kind: str
    subject_id: int
    node_id: int


class NormalizedStore:
    def __init__(self, hierarchy: Hierarchy, min_selectable_level: int = MIN_SELECTABLE_LEVEL):
        self.hierarchy = hierarchy
        self.min_level = min_selectable_level
        self.rows: list[SelectionRow] = []
        self._by_key: dict[tuple[int, int], SelectionRow] = {}
        self._next_row_id = 1

    def _check_node(self, node_id: int) -> None:
        node = self.hierarchy.node(node_id)
        if node.level < self.min_level:
            raise UnknownChildError(
                f"node {node_id} at level {node.level} is not selection-tracked"
            )

    def row_for(self, subject: int, node_id: int) -> SelectionRow | None:
        return self._by_key.get((subject, node_id))

    def _parent_row_live(self, subject: int, node_id: int) -> bool:
        parent = self.hierarchy.parent(node_id)
        assert parent is not None
        if parent.level < self.min_level:
            return True
        row = self.row_for(subject, parent.id)
        return row is not None and not row.is_deleted

    def select(self, subject: int, node_id: int) -> SelectionRow:
        """Insert a row, or undelete the existing one for (subject, node)."""
        self._check_node(node_id)
        if not self._parent_row_live(subject, node_id):
            parent = self.hierarchy.parent(node_id)
            assert parent is not None
            raise OrphanSelectionError(
                f"parent {parent.id} of node {node_id} has no live selection row"
            )
        row = self.row_for(subject, node_id)
        if row is not None:
            row.is_deleted = False
            return row
        parent = self.hierarchy.parent(node_id)
        assert parent is not None
        parent_row = (
            self.row_for(subject, parent.id) if parent.level >= self.min_level else None
        )
        row = SelectionRow(
            row_id=self._next_row_id,
            parent_selection_row_id=parent_row.row_id if parent_row else None,
            subject_id=subject,
            node_id=node_id,
        )
        self._next_row_id += 1
        self.rows.append(row)
        self._by_key[(subject, node_id)] = row
        return row

    def deselect(self, subject: int, node_id: int) -> None:
        """Soft delete; a no-op when no row exists."""
        self._check_node(node_id)
        row = self.row_for(subject, node_id)
        if row is not None:
            row.is_deleted = True

    def reset_subtree(self, subject: int, node_id: int) -> None:
        """Cascading soft delete of the node's own row and every descendant row."""
        subtree = self.hierarchy.subtree_ids(node_id)
        for row in self.rows:
            if row.subject_id == subject and row.node_id in subtree:
                row.is_deleted = True

    def apply(self, ops: Iterable[OracleOp]) -> None:
        for op in ops:
            if op.kind == "select":
                self.select(op.subject_id, op.node_id)
            elif op.kind == "deselect":
                self.deselect(op.subject_id, op.node_id)
            elif op.kind == "reset_subtree":
                self.reset_subtree(op.subject_id, op.node_id)
            else:
                raise ValueError(f"unknown op kind {op.kind!r}")

    def live_rows(self, subject: int | None = None) -> list[SelectionRow]:
        return [
            r
            for r in self.rows
            if not r.is_deleted and (subject is None or r.subject_id == subject)
        ]

    def selection_set(self, subject: int) -> set[int]:
        """Nodes with a live row whose whole ancestor chain is live."""
        out = set()
        for row in self.live_rows(subject):
            node_id = row.node_id
            cur = self.hierarchy.node(node_id)
            ok = True
            while cur.level > self.min_level:
                parent = self.hierarchy.parent(cur.id)
                assert parent is not None
                prow = self.row_for(subject, parent.id)
                if prow is None or prow.is_deleted:
                    ok = False
                    break
                cur = parent
            if ok:
                out.add(node_id)
        return out

    def storage_bits(self, key_bits: int) -> int:
        """Live rows x foreign-key width: the row-per-selection cost model."""
        if key_bits < 1:
            raise ValueError("key_bits must be >= 1")
        return len(self.live_rows()) * key_bits

    def dump(self) -> list[dict]:
        return [
            {
                "row_id": r.row_id,
                "parent_selection_row_id": r.parent_selection_row_id,
                "subject_id": r.subject_id,
                "node_id": r.node_id,
                "is_deleted": int(r.is_deleted),
            }
            for r in self.rows
        ]
