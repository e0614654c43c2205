"""Hierarchy loading/validation and the pruned-tree node count."""

import json
from fractions import Fraction

import pytest

from treeflow.hierarchy import (
    Hierarchy,
    HierarchyError,
    load_hierarchy,
    dump_hierarchy,
    remaining_after_prune,
)


def row(id, parent, ci, level, width="int32", name=None):
    return {
        "id": id,
        "name": name or f"node{id}",
        "name_type_id": None,
        "width_class": width,
        "parent_id": parent,
        "child_index": ci,
        "level": level,
    }


GOOD = [
    row(1, None, 0, 1),
    row(2, 1, 0, 2, name="North America"),
    row(3, 1, 1, 2),
    row(4, 2, 0, 3),
]


class TestLoading:
    def test_loads_and_indexes(self):
        h = load_hierarchy(GOOD)
        assert h.max_level == 3
        assert h.root_id == 1
        assert [n.id for n in h.children(1)] == [2, 3]
        assert h.node(2).name == "North America"
        assert h.node(2).child_index == 0

    def test_single_node_document(self):
        h = load_hierarchy([row(0, None, 0, 1)])
        assert h.max_level == 1 and len(h) == 1

    def test_loads_from_json_text_and_path(self, tmp_path):
        text = json.dumps(GOOD)
        assert len(load_hierarchy(text)) == 4
        p = tmp_path / "h.json"
        p.write_text(text)
        assert len(load_hierarchy(p)) == 4

    def test_dump_round_trip(self):
        h = load_hierarchy(GOOD)
        again = load_hierarchy(dump_hierarchy(h))
        assert dump_hierarchy(again) == dump_hierarchy(h)

    def test_ancestors_and_subtree(self):
        h = load_hierarchy(GOOD)
        assert [a.id for a in h.ancestors(4)] == [2, 1]
        assert h.subtree_ids(2) == {2, 4}


class TestValidationErrors:
    def test_duplicate_id(self):
        with pytest.raises(HierarchyError, match="duplicate"):
            load_hierarchy(GOOD + [row(2, 1, 5, 2)])

    def test_dangling_parent(self):
        with pytest.raises(HierarchyError, match="dangling"):
            load_hierarchy(GOOD + [row(9, 99, 0, 2)])

    def test_child_index_collision(self):
        with pytest.raises(HierarchyError, match="collision"):
            load_hierarchy(GOOD + [row(9, 1, 0, 2)])

    def test_child_index_at_capacity(self):
        with pytest.raises(HierarchyError, match="capacity"):
            load_hierarchy(GOOD + [row(9, 1, 32, 2)])

    def test_level_inconsistent_with_parent(self):
        with pytest.raises(HierarchyError, match="inconsistent"):
            load_hierarchy(GOOD + [row(9, 1, 5, 3)])

    def test_multiple_roots(self):
        with pytest.raises(HierarchyError, match="multiple roots"):
            load_hierarchy(GOOD + [row(9, None, 0, 1)])

    def test_cycle_detected(self):
        rows = [row(1, None, 0, 1), row(2, 3, 0, 2), row(3, 2, 0, 2)]
        with pytest.raises(HierarchyError, match="cycle"):
            load_hierarchy(rows)

    def test_missing_field(self):
        bad = dict(GOOD[0])
        del bad["child_index"]
        with pytest.raises(HierarchyError, match="child_index"):
            load_hierarchy([bad])


def level_sum_remaining(n: int, h: int) -> int:
    """Independent oracle: count the surviving levels one by one."""
    return sum(n**k for k in range(0, h - 1))


class TestRemainingAfterPrune:
    def test_ternary_height_six(self):
        total, remaining, fraction = remaining_after_prune(3, 6)
        assert (total, remaining) == (1093, 121)
        assert abs(float(fraction) - 0.1107) < 1e-3
        assert fraction == Fraction(121, 1093)

    def test_binary_height_two(self):
        # Enumerated by hand: 7 nodes, only the root survives.
        assert remaining_after_prune(2, 2) == (7, 1, Fraction(1, 7))

    def test_matches_level_sum_oracle(self):
        for n in range(2, 6):
            for h in range(2, 9):
                total, remaining, fraction = remaining_after_prune(n, h)
                assert remaining == level_sum_remaining(n, h)
                assert total == sum(n**k for k in range(h + 1))
                assert fraction == Fraction(remaining, total)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            remaining_after_prune(1, 5)
        with pytest.raises(ValueError):
            remaining_after_prune(3, 1)

    def test_overflow_guard(self):
        with pytest.raises(OverflowError):
            remaining_after_prune(2, 64)


class TestLevelPartition:
    def test_levels_partition_nodes_and_parents_step_one(self):
        h = load_hierarchy(GOOD)
        seen = []
        for k in h.levels():
            seen.extend(n.id for n in h.level(k))
            for n in h.level(k):
                if n.parent_id is not None:
                    assert h.node(n.parent_id).level == n.level - 1
        assert sorted(seen) == sorted(h.nodes)
