"""Event-level conformance: alphabets and recognizers for every machine.

Each trace rule expands into a short sequence of named events (the
annotation).  A hand-encoded recognizer per methodology accepts exactly the
event sequences its process definitions allow, prefix-closed; rejection
reports the first illegal event.  Parameterized events serialize as
``name.param[.param]``; level parameters are bounded by the recognizer's
level domain (default 5, configurable for deeper trees).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from .trace import Trace, TraceEvent
from .verify import Verdict

DEFAULT_LEVEL_DOMAIN = 5

ALPHABETS: dict[str, set[str]] = {
    "dad": {
        "load_dag_actual", "initialize_queue_actual", "queue_not_empty",
        "dequeue_actual", "process_actual", "validate_dependencies_actual",
        "all_dependencies_processed", "missing_dependency", "extend_graph_actual",
        "enqueue_nodes_actual", "generate_children_actual", "all_nodes_processed",
        "perform_final_validation_actual", "terminate_successfully_actual",
        "terminate_with_error_actual",
    },
    "dfd": {
        "load_tree_actual", "initialize_stack_actual", "stack_is_empty",
        "stack_not_empty", "dequeue_actual", "process_actual", "is_non_leaf",
        "process_child_actual", "push_children_actual", "is_leaf",
        "set_backtrack_point_actual", "has_unprocessed_sibling",
        "get_unprocessed_sibling_actual", "push_sibling_actual",
        "no_unprocessed_sibling", "validate_subtree_actual", "subtree_validated",
        "backtrack_to_actual", "no_more_backtrack_points_above",
        "terminate_successfully_actual", "terminate_with_error_actual",
    },
    "bfd": {
        "load_project_actual", "initialize_queue_actual", "dequeue_actual",
        "develop_actual", "enqueue_children_actual", "current_level_processed_actual",
        "validate_level_actual", "not_last_level_actual", "advance_level_actual",
        "last_level_actual", "terminate_successfully_actual",
        "terminate_with_error_actual",
    },
    "cdd": {
        "load_graph_actual", "initialize_dependencies_actual", "process_node_actual",
        "test_failed", "feedback_cycle_detected", "refine_component_actual",
        "trigger_revision_actual", "refactor_complete_actual",
        "all_components_written_actual", "validate_increment_actual",
        "feedback_received_actual", "validation_failed_actual", "identify_flaw_actual",
        "flaw_identified_actual", "all_increments_validated_actual",
        "final_deployment_actual", "terminate_successfully_actual",
        "terminate_with_error_actual",
    },
    "pdfd": {
        "load_tree_actual", "initialize_refinement_attempts_actual",
        "determine_ki_actual", "process_level_actual", "get_trace_origin_actual",
        "increment_refinement_attempts_actual", "finalize_subtrees_actual",
        "finalize_unprocessed_nodes_actual", "is_level_validation_failed",
        "level_validation_successful", "is_refactor_validation_successful",
        "is_bottom_up_validation_failed", "bottom_up_validation_successful",
        "is_top_down_validation_failed", "top_down_validation_successful",
        "has_exhausted_rmax_for_level", "can_attempt_refinement",
        "cond_threshold_met", "cond_has_no_children",
        "cond_all_descendants_validated", "top_down_reaches_L5",
        "refinement_failed_no_retry", "no_refinement_path_available",
        "terminate_with_error_actual", "terminate_successfully_actual",
    },
    "pbfd": {
        "load_tree_actual", "initialize_refinement_attempts_actual",
        "process_pattern_actual", "validate_pattern_actual", "resolve_depth_actual",
        "process_refinement_pattern_actual", "validate_refinement_pattern_actual",
        "resolve_refinement_depth_actual", "finalize_pattern_actual",
        "increment_refinement_attempts_actual", "terminate_success_actual",
        "terminate_failure_actual", "cond_all_validated", "cond_not_all_validated",
        "cond_i_lt_L", "cond_i_eq_L", "cond_pattern_next_empty",
        "cond_pattern_next_nonempty", "cond_ref_attempts_lt_Rmax",
        "cond_ref_attempts_ge_Rmax", "cond_j_exists_for_i", "cond_j_not_exists_for_i",
        "cond_j_lt_i", "cond_j_eq_i", "cond_all_processed", "cond_not_all_processed",
        "cond_trace_origin_exists_for_unprocessed",
        "cond_trace_origin_not_exists_for_unprocessed",
    },
    "tle": {
        "start_actual", "load_page_actual", "parent_nodes_received_actual",
        "resolve_grandparent_actual", "load_grandparent_table_actual",
        "resolve_child_actual", "preset_child_status_actual", "update_bitmask_actual",
        "more_pages_exist_actual", "no_more_pages_exist_actual",
        "finalize_process_actual",
    },
}


# -- annotation: engine rule -> event names ------------------------------------------


def annotate_trace(trace: Trace, methodology: str | None = None) -> list[tuple[int, str]]:
    """Expand each trace event into (seq, csp_event) pairs."""
    methodology = methodology or trace.methodology
    fn = _ANNOTATORS[methodology]
    ctx: dict[str, Any] = {}
    if trace.events and "L" in trace.events[0].payload:
        ctx["L"] = int(trace.events[0].payload["L"])
    out: list[tuple[int, str]] = []
    for ev in trace:
        for name in fn(ev, ctx):
            out.append((ev.seq, name))
    return out


def _annotate_pdfd(ev: TraceEvent, ctx: dict) -> list[str]:
    p = ev.payload
    i = p.get("level")
    j = p.get("j")
    r = ev.rule
    if r == "PD1":
        return ["load_tree_actual", "initialize_refinement_attempts_actual"]
    if r == "PD2":
        i = int(ev.to_state[3:-1])
        return [f"determine_ki_actual.{i}", f"process_level_actual.{i}"]
    if r == "PD2a":
        return [
            f"is_level_validation_failed.{i}",
            f"get_trace_origin_actual.{i}.{j}",
            f"can_attempt_refinement.{j}",
            f"increment_refinement_attempts_actual.{j}",
        ]
    if r == "PD2b":
        return [f"level_validation_successful.{i}", f"cond_threshold_met.{i}"]
    if r == "PD4":
        if int(i) == ctx.get("L", i):
            return [f"level_validation_successful.{i}", f"cond_threshold_met.{i}"]
        return [f"level_validation_successful.{i}", f"cond_has_no_children.{i}"]
    if r == "PD3":
        return [f"determine_ki_actual.{i}", f"process_level_actual.{i}"]
    if r == "PD3a":
        end = p["range_end"]
        nxt = int(i) + 1
        return [
            f"is_refactor_validation_successful.{i}.{end}",
            f"increment_refinement_attempts_actual.{nxt}",
        ]
    if r == "PD3b":
        end = p["range_end"]
        return [f"is_refactor_validation_successful.{i}.{end}"]
    if r == "PD3c":
        end = p["range_end"]
        return [
            f"refinement_failed_no_retry.{i}.{end}",
            f"can_attempt_refinement.{i}",
            f"increment_refinement_attempts_actual.{i}",
        ]
    if r == "PD4a" or r == "PD5":
        return [
            f"finalize_subtrees_actual.{i}",
            f"bottom_up_validation_successful.{i}",
            f"cond_all_descendants_validated.{i}",
        ]
    if r == "PD4b":
        return [
            f"finalize_subtrees_actual.{i}",
            f"is_bottom_up_validation_failed.{i}",
            f"get_trace_origin_actual.{i}.{j}",
            f"can_attempt_refinement.{j}",
            f"increment_refinement_attempts_actual.{j}",
        ]
    if r == "PD6":
        return [
            f"finalize_unprocessed_nodes_actual.{i}",
            f"top_down_validation_successful.{i}",
        ]
    if r == "PD6a":
        return [
            f"finalize_unprocessed_nodes_actual.{i}",
            f"is_top_down_validation_failed.{i}",
            f"get_trace_origin_actual.{i}.{j}",
            f"can_attempt_refinement.{j}",
            f"increment_refinement_attempts_actual.{j}",
        ]
    if r == "PD6b":
        return [
            f"finalize_unprocessed_nodes_actual.{i}",
            f"is_top_down_validation_failed.{i}",
            f"no_refinement_path_available.{i}",
            "terminate_with_error_actual",
        ]
    if r == "PD7":
        return [
            f"finalize_unprocessed_nodes_actual.{i}",
            f"top_down_validation_successful.{i}",
            f"top_down_reaches_L5.{i}",
            "terminate_successfully_actual",
        ]
    if r == "PD8":
        if p.get("reason") == "refinement_exhausted":
            return [
                f"has_exhausted_rmax_for_level.{i}",
                "terminate_with_error_actual",
            ]
        from_fam = ev.from_state.split("(")[0]
        prefix = []
        if from_fam == "S2":
            prefix = [f"is_level_validation_failed.{i}"]
        elif from_fam == "S3":
            prefix = [f"finalize_subtrees_actual.{i}", f"is_bottom_up_validation_failed.{i}"]
        return prefix + [
            f"no_refinement_path_available.{i}",
            "terminate_with_error_actual",
        ]
    raise ValueError(f"unknown rule {r}")


def _annotate_pbfd(ev: TraceEvent, ctx: dict) -> list[str]:
    p = ev.payload
    i = p.get("level")
    j = p.get("j")
    r = ev.rule
    if r == "PB1":
        return ["load_tree_actual", "initialize_refinement_attempts_actual"]
    if r == "PB2":
        i = int(ev.to_state[3:-1])
        return [f"process_pattern_actual.{i}", f"cond_not_all_validated.{i}"]
    if r == "PB2a":
        i = int(ev.to_state[3:-1])
        return [f"process_pattern_actual.{i}", f"cond_all_validated.{i}"]
    if r == "PB4":
        return [f"validate_pattern_actual.{i}", f"cond_all_validated.{i}"]
    if r == "PB3":
        return [
            f"validate_pattern_actual.{i}",
            f"cond_not_all_validated.{i}",
            f"cond_j_exists_for_i.{i}.{j}",
            f"cond_ref_attempts_lt_Rmax.{j}",
            f"increment_refinement_attempts_actual.{j}",
        ]
    if r == "PB3c":
        return [
            f"validate_pattern_actual.{i}",
            f"cond_not_all_validated.{i}",
            f"cond_j_not_exists_for_i.{i}",
            "terminate_failure_actual",
        ]
    if r == "PB9":
        return [f"cond_ref_attempts_ge_Rmax.{i}", "terminate_failure_actual"]
    if r == "PB3a":
        return [f"process_refinement_pattern_actual.{i}", f"cond_not_all_validated.{i}"]
    if r == "PB3b":
        return [f"process_refinement_pattern_actual.{i}", f"cond_all_validated.{i}"]
    if r == "PB3a1":
        return [f"validate_refinement_pattern_actual.{i}", f"cond_all_validated.{i}"]
    if r == "PB3a2":
        return [
            f"validate_refinement_pattern_actual.{i}",
            f"cond_not_all_validated.{i}",
            f"cond_ref_attempts_lt_Rmax.{i}",
            f"increment_refinement_attempts_actual.{i}",
        ]
    if r == "PB5":
        nxt = int(i) + 1
        end = p["range_end"]
        return [
            f"resolve_refinement_depth_actual.{i}",
            f"cond_j_lt_i.{i}.{end}",
            f"increment_refinement_attempts_actual.{nxt}",
        ]
    if r == "PB6":
        end = p["range_end"]
        return [f"resolve_refinement_depth_actual.{i}", f"cond_j_eq_i.{i}.{end}"]
    if r == "PB4a":
        return [
            f"resolve_depth_actual.{i}",
            f"cond_i_lt_L.{i}",
            f"cond_pattern_next_nonempty.{i}",
        ]
    if r == "PB4b":
        if int(i) == ctx.get("L", i):
            return [f"resolve_depth_actual.{i}", f"cond_i_eq_L.{i}"]
        return [f"resolve_depth_actual.{i}", f"cond_pattern_next_empty.{i}"]
    if r == "PB7":
        return [
            f"finalize_pattern_actual.{i}",
            f"cond_all_processed.{i}",
            f"cond_i_lt_L.{i}",
        ]
    if r == "PB7a":
        return [
            f"finalize_pattern_actual.{i}",
            f"cond_not_all_processed.{i}",
            f"cond_trace_origin_exists_for_unprocessed.{i}.{j}",
            f"cond_ref_attempts_lt_Rmax.{j}",
            f"increment_refinement_attempts_actual.{j}",
        ]
    if r == "PB7b":
        return [
            f"finalize_pattern_actual.{i}",
            f"cond_not_all_processed.{i}",
            f"cond_trace_origin_not_exists_for_unprocessed.{i}",
            "terminate_failure_actual",
        ]
    if r == "PB8":
        return [
            f"finalize_pattern_actual.{i}",
            f"cond_all_processed.{i}",
            f"cond_i_eq_L.{i}",
            "terminate_success_actual",
        ]
    raise ValueError(f"unknown rule {r}")


def _annotate_dad(ev: TraceEvent, ctx: dict) -> list[str]:
    p = ev.payload
    r = ev.rule
    if r == "DA1":
        return ["load_dag_actual", f"initialize_queue_actual.{p['root']}"]
    if r == "DA2":
        v = p["node"]
        return [
            "queue_not_empty",
            f"dequeue_actual.{v}",
            f"process_actual.{v}",
            f"validate_dependencies_actual.{v}",
        ]
    if r == "DA3":
        v = p["node"]
        return [
            f"all_dependencies_processed.{v}",
            f"generate_children_actual.{v}",
            "enqueue_nodes_actual",
        ]
    if r == "DA4":
        v = p["node"]
        if "new_node" in p:
            return [f"missing_dependency.{v}", f"extend_graph_actual.{v}.{p['new_node']}"]
        return [f"missing_dependency.{v}"]
    if r == "DA5":
        return ["enqueue_nodes_actual"]
    if r == "DA6":
        return [
            "all_nodes_processed",
            "perform_final_validation_actual",
            "terminate_successfully_actual",
        ]
    raise ValueError(f"unknown rule {r}")


def _annotate_dfd(ev: TraceEvent, ctx: dict) -> list[str]:
    p = ev.payload
    r = ev.rule
    if r == "DF1":
        return ["load_tree_actual", f"initialize_stack_actual.{p['root']}"]
    if r == "DF2":
        c = p["node"]
        return [
            f"stack_not_empty.{c}",
            f"dequeue_actual.{c}",
            f"process_actual.{c}",
            f"is_non_leaf.{c}",
            f"process_child_actual.{c}",
            f"push_children_actual.{c}",
        ]
    if r == "DF3":
        c = p["node"]
        return [
            f"stack_not_empty.{c}",
            f"dequeue_actual.{c}",
            f"process_actual.{c}",
            f"is_leaf.{c}",
            f"set_backtrack_point_actual.{c}",
        ]
    if r == "DF4":
        b = p["backtrack_point"]
        return [
            f"has_unprocessed_sibling.{b}",
            f"get_unprocessed_sibling_actual.{b}",
            f"push_sibling_actual.{b}",
        ]
    if r == "DF5":
        b = p["subtree_root"]
        return [f"no_unprocessed_sibling.{b}", f"validate_subtree_actual.{b}"]
    if r == "DF6":
        return [f"subtree_validated.{p['subtree_root']}", f"backtrack_to_actual.{p['to']}"]
    if r == "DF7":
        return [
            f"no_more_backtrack_points_above.{p['backtrack_point']}",
            "terminate_successfully_actual",
        ]
    raise ValueError(f"unknown rule {r}")


def _annotate_bfd(ev: TraceEvent, ctx: dict) -> list[str]:
    p = ev.payload
    r = ev.rule
    if r == "BF1":
        return ["load_project_actual", f"initialize_queue_actual.{p['root']}"]
    if r == "BF2":
        c = p["node"]
        return [f"dequeue_actual.{c}", f"develop_actual.{c}", f"enqueue_children_actual.{c}"]
    if r == "BF3":
        return ["current_level_processed_actual", f"validate_level_actual.{p['level']}"]
    if r == "BF4":
        k = p["level"] - 1
        return [f"not_last_level_actual.{k}", f"advance_level_actual.{k}"]
    if r == "BF5":
        return [f"last_level_actual.{p['levels']}", "terminate_successfully_actual"]
    raise ValueError(f"unknown rule {r}")


def _annotate_cdd(ev: TraceEvent, ctx: dict) -> list[str]:
    p = ev.payload
    r = ev.rule
    if r == "CD1":
        return ["load_graph_actual", "initialize_dependencies_actual"]
    if r == "CD2":
        return [f"process_node_actual.{p['component']}"]
    if r == "CD3a":
        c = p["component"]
        return [f"test_failed.{c}", f"refine_component_actual.{c}"]
    if r == "CD3b":
        c = p["component"]
        return [f"feedback_cycle_detected.{c}", f"trigger_revision_actual.{c}"]
    if r == "CD4":
        c = p["component"]
        extra = max(int(p.get("refine_iterations", 1)) - 1, 0)
        return [f"refine_component_actual.{c}"] * extra + [f"refactor_complete_actual.{c}"]
    if r == "CD5":
        k = p["increment"]
        return [f"all_components_written_actual.{k}", f"validate_increment_actual.{k}"]
    if r == "CD6":
        return [
            "feedback_received_actual",
            "identify_flaw_actual",
            f"flaw_identified_actual.{p['component']}",
        ]
    if r == "CD7":
        return [
            "all_increments_validated_actual",
            "final_deployment_actual",
            "terminate_successfully_actual",
        ]
    raise ValueError(f"unknown rule {r}")


def _annotate_tle(ev: TraceEvent, ctx: dict) -> list[str]:
    return {
        "TLE1": ["start_actual"],
        "TLE2": ["load_page_actual", "parent_nodes_received_actual"],
        "TLE3": ["resolve_grandparent_actual"],
        "TLE4": ["load_grandparent_table_actual"],
        "TLE5": ["resolve_child_actual", "preset_child_status_actual"],
        "TLE6": ["update_bitmask_actual"],
        "TLE7": ["more_pages_exist_actual"],
        "TLE8": ["no_more_pages_exist_actual"],
        "TLE9": ["finalize_process_actual"],
    }[ev.rule]


_ANNOTATORS: dict[str, Callable[[TraceEvent, dict], list[str]]] = {
    "pdfd": _annotate_pdfd,
    "pbfd": _annotate_pbfd,
    "dad": _annotate_dad,
    "dfd": _annotate_dfd,
    "bfd": _annotate_bfd,
    "cdd": _annotate_cdd,
    "tle": _annotate_tle,
}


# -- generic recognizer machinery -------------------------------------------------


Branch = tuple[list[str], Callable[[dict[str, str]], Any]]


class Recognizer:
    """Prefix-closed event-sequence acceptor built from a dispatch function.

    The dispatch maps (process-state, next event) to a branch: the pattern
    list the branch consumes (the first pattern must match that event) and a
    continuation computing the next process state from captured parameters.
    Patterns are dot-joined segments: literals, ``*`` wildcards, or ``$name``
    captures that must agree within the branch.
    """

    def __init__(self, methodology: str, dispatch, start, level_domain: int | None = None):
        self.alphabet = ALPHABETS[methodology]
        self.dispatch = dispatch
        self.process = start
        self.level_domain = level_domain
        self.pending: list[str] = []
        self.bindings: dict[str, str] = {}
        self.cont: Callable[[dict[str, str]], Any] | None = None

    def _match(self, pattern: str, parts: list[str]) -> bool:
        pat = pattern.split(".")
        if len(pat) != len(parts):
            return False
        for seg, got in zip(pat, parts):
            if seg == "*":
                continue
            if seg.startswith("$"):
                name = seg[1:]
                if name in self.bindings and self.bindings[name] != got:
                    return False
                self.bindings[name] = got
                continue
            if seg != got:
                return False
        return True

    def step(self, event: str) -> bool:
        parts = event.split(".")
        if parts[0] not in self.alphabet:
            return False
        if self.level_domain is not None:
            for seg in parts[1:]:
                if seg.isdigit() and int(seg) > self.level_domain:
                    return False
        if not self.pending:
            if self.process == "STOP":
                return False
            branch = self.dispatch(self.process, event)
            if branch is None:
                return False
            patterns, cont = branch
            self.pending = list(patterns)
            self.cont = cont
            self.bindings = {}
        if not self._match(self.pending[0], parts):
            return False
        self.pending.pop(0)
        if not self.pending and self.cont is not None:
            self.process = self.cont(self.bindings)
            self.cont = None
        return True


def _const(state) -> Callable[[dict[str, str]], Any]:
    return lambda _b: state


# -- recognizers per methodology -----------------------------------------------------


def _pdfd_recognizer(level_domain: int) -> Recognizer:
    L = level_domain

    def dispatch(proc, event) -> Branch | None:
        base = event.split(".")[0]
        kind = proc[0]
        if kind == "start":
            if base == "load_tree_actual":
                return (
                    ["load_tree_actual", "initialize_refinement_attempts_actual"],
                    _const(("S1", 1)),
                )
            return None
        if kind == "S1":
            i = proc[1]
            if base == "determine_ki_actual":
                return (
                    [f"determine_ki_actual.{i}", f"process_level_actual.{i}"],
                    _const(("S2", i)),
                )
            return None
        if kind == "S2":
            i = proc[1]
            if base == "is_level_validation_failed":
                return ([f"is_level_validation_failed.{i}"], _const(("S2fail", i)))
            if base == "level_validation_successful":
                return ([f"level_validation_successful.{i}"], _const(("S2ok", i)))
            return None
        if kind == "S2fail":
            i = proc[1]
            if base == "get_trace_origin_actual":
                return (
                    [f"get_trace_origin_actual.{i}.$j"],
                    lambda b: ("RAL", int(b["j"]), i, "S2"),
                )
            if base == "no_refinement_path_available":
                return (
                    [f"no_refinement_path_available.{i}", "terminate_with_error_actual"],
                    _const("STOP"),
                )
            return None
        if kind == "S2ok":
            i = proc[1]
            if base == "cond_threshold_met":
                nxt = ("S1", i + 1) if i < L else ("S3", i)
                return ([f"cond_threshold_met.{i}"], _const(nxt))
            if base == "cond_has_no_children":
                return ([f"cond_has_no_children.{i}"], _const(("S3", i)))
            if base == "no_refinement_path_available":
                return (
                    [f"no_refinement_path_available.{i}", "terminate_with_error_actual"],
                    _const("STOP"),
                )
            return None
        if kind == "RAL":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "has_exhausted_rmax_for_level":
                return (
                    [f"has_exhausted_rmax_for_level.{j}", "terminate_with_error_actual"],
                    _const("STOP"),
                )
            if base == "can_attempt_refinement":
                return (
                    [
                        f"can_attempt_refinement.{j}",
                        f"increment_refinement_attempts_actual.{j}",
                    ],
                    _const(("S1R", j, i, origin)),
                )
            if base == "no_refinement_path_available":
                return (
                    ["no_refinement_path_available.*", "terminate_with_error_actual"],
                    _const("STOP"),
                )
            return None
        if kind == "S1R":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "has_exhausted_rmax_for_level":
                return (
                    [f"has_exhausted_rmax_for_level.{j}", "terminate_with_error_actual"],
                    _const("STOP"),
                )
            if base == "determine_ki_actual":
                return (
                    [f"determine_ki_actual.{j}", f"process_level_actual.{j}"],
                    _const(("S2R", j, i, origin)),
                )
            return None
        if kind == "S2R":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "is_refactor_validation_successful":
                if j < i:
                    return (
                        [
                            f"is_refactor_validation_successful.{j}.{i}",
                            f"increment_refinement_attempts_actual.{j + 1}",
                        ],
                        _const(("S1R", j + 1, i, origin)),
                    )
                return (
                    [f"is_refactor_validation_successful.{j}.{i}"],
                    _const((origin, i)),
                )
            if base == "refinement_failed_no_retry":
                return (
                    [f"refinement_failed_no_retry.{j}.{i}"],
                    _const(("RAL", j, i, origin)),
                )
            return None
        if kind == "S3":
            i = proc[1]
            if base == "finalize_subtrees_actual":
                return ([f"finalize_subtrees_actual.{i}"], _const(("S3v", i)))
            return None
        if kind == "S3v":
            i = proc[1]
            if base == "is_bottom_up_validation_failed":
                return ([f"is_bottom_up_validation_failed.{i}"], _const(("S3fail", i)))
            if base == "bottom_up_validation_successful":
                nxt = ("S4", 1) if i <= 2 else ("S3", i - 1)
                return (
                    [
                        f"bottom_up_validation_successful.{i}",
                        f"cond_all_descendants_validated.{i}",
                    ],
                    _const(nxt),
                )
            return None
        if kind == "S3fail":
            i = proc[1]
            if base == "get_trace_origin_actual":
                return (
                    [f"get_trace_origin_actual.{i}.$j"],
                    lambda b: ("RAL", int(b["j"]), i, "S3"),
                )
            if base == "no_refinement_path_available":
                return (
                    [f"no_refinement_path_available.{i}", "terminate_with_error_actual"],
                    _const("STOP"),
                )
            return None
        if kind == "S4":
            k = proc[1]
            if base == "finalize_unprocessed_nodes_actual":
                return ([f"finalize_unprocessed_nodes_actual.{k}"], _const(("S4v", k)))
            return None
        if kind == "S4v":
            k = proc[1]
            if base == "is_top_down_validation_failed":
                return ([f"is_top_down_validation_failed.{k}"], _const(("S4fail", k)))
            if base == "top_down_validation_successful":
                if k == L:
                    return (
                        [
                            f"top_down_validation_successful.{k}",
                            f"top_down_reaches_L5.{k}",
                            "terminate_successfully_actual",
                        ],
                        _const("STOP"),
                    )
                return ([f"top_down_validation_successful.{k}"], _const(("S4", k + 1)))
            return None
        if kind == "S4fail":
            k = proc[1]
            if base == "get_trace_origin_actual":
                return (
                    [f"get_trace_origin_actual.{k}.$j"],
                    lambda b: ("RAL", int(b["j"]), k, "S4"),
                )
            if base == "no_refinement_path_available":
                return (
                    [f"no_refinement_path_available.{k}", "terminate_with_error_actual"],
                    _const("STOP"),
                )
            return None
        return None

    return Recognizer("pdfd", dispatch, ("start",), level_domain)


def _pbfd_recognizer(level_domain: int) -> Recognizer:
    L = level_domain

    def dispatch(proc, event) -> Branch | None:
        base = event.split(".")[0]
        kind = proc[0]
        if kind == "start":
            if base == "load_tree_actual":
                return (
                    ["load_tree_actual", "initialize_refinement_attempts_actual"],
                    _const(("S1", 1)),
                )
            return None
        if kind == "S1":
            i = proc[1]
            if base == "process_pattern_actual":
                return ([f"process_pattern_actual.{i}"], _const(("S1c", i)))
            return None
        if kind == "S1c":
            i = proc[1]
            if base == "cond_all_validated":
                return ([f"cond_all_validated.{i}"], _const(("S3", i)))
            if base == "cond_not_all_validated":
                return ([f"cond_not_all_validated.{i}"], _const(("S2", i)))
            return None
        if kind == "S2":
            i = proc[1]
            if base == "validate_pattern_actual":
                return ([f"validate_pattern_actual.{i}"], _const(("S2c", i)))
            return None
        if kind == "S2c":
            i = proc[1]
            if base == "cond_all_validated":
                return ([f"cond_all_validated.{i}"], _const(("S3", i)))
            if base == "cond_not_all_validated":
                return ([f"cond_not_all_validated.{i}"], _const(("S2fail", i)))
            return None
        if kind == "S2fail":
            i = proc[1]
            if base == "cond_j_exists_for_i":
                return (
                    [f"cond_j_exists_for_i.{i}.$j"],
                    lambda b: ("Retry", int(b["j"]), i, "S2"),
                )
            if base == "cond_j_not_exists_for_i":
                return (
                    [f"cond_j_not_exists_for_i.{i}", "terminate_failure_actual"],
                    _const("STOP"),
                )
            return None
        if kind == "Retry":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "cond_ref_attempts_lt_Rmax":
                return (
                    [
                        f"cond_ref_attempts_lt_Rmax.{j}",
                        f"increment_refinement_attempts_actual.{j}",
                    ],
                    _const(("S1R", j, i, origin)),
                )
            if base == "cond_ref_attempts_ge_Rmax":
                return (
                    [f"cond_ref_attempts_ge_Rmax.{j}", "terminate_failure_actual"],
                    _const("STOP"),
                )
            return None
        if kind == "S1R":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "cond_ref_attempts_ge_Rmax":
                return (
                    [f"cond_ref_attempts_ge_Rmax.{j}", "terminate_failure_actual"],
                    _const("STOP"),
                )
            if base == "process_refinement_pattern_actual":
                return (
                    [f"process_refinement_pattern_actual.{j}"],
                    _const(("S1Rc", j, i, origin)),
                )
            return None
        if kind == "S1Rc":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "cond_all_validated":
                return ([f"cond_all_validated.{j}"], _const(("S3R", j, i, origin)))
            if base == "cond_not_all_validated":
                return ([f"cond_not_all_validated.{j}"], _const(("S2R", j, i, origin)))
            return None
        if kind == "S2R":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "validate_refinement_pattern_actual":
                return (
                    [f"validate_refinement_pattern_actual.{j}"],
                    _const(("S2Rc", j, i, origin)),
                )
            return None
        if kind == "S2Rc":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "cond_all_validated":
                return ([f"cond_all_validated.{j}"], _const(("S3R", j, i, origin)))
            if base == "cond_not_all_validated":
                return ([f"cond_not_all_validated.{j}"], _const(("Retry", j, i, origin)))
            return None
        if kind == "S3R":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "resolve_refinement_depth_actual":
                return (
                    [f"resolve_refinement_depth_actual.{j}"],
                    _const(("S3Rc", j, i, origin)),
                )
            return None
        if kind == "S3Rc":
            j, i, origin = proc[1], proc[2], proc[3]
            if base == "cond_j_lt_i":
                return (
                    [
                        f"cond_j_lt_i.{j}.{i}",
                        f"increment_refinement_attempts_actual.{j + 1}",
                    ],
                    _const(("S1R", j + 1, i, origin)),
                )
            if base == "cond_j_eq_i":
                nxt = ("S3", i) if origin == "S2" else ("S4", i)
                return ([f"cond_j_eq_i.{j}.{i}"], _const(nxt))
            return None
        if kind == "S3":
            i = proc[1]
            if base == "resolve_depth_actual":
                return ([f"resolve_depth_actual.{i}"], _const(("S3c", i)))
            return None
        if kind == "S3c":
            i = proc[1]
            if base == "cond_i_lt_L":
                return (
                    [f"cond_i_lt_L.{i}", f"cond_pattern_next_nonempty.{i}"],
                    _const(("S1", i + 1)),
                )
            if base == "cond_i_eq_L":
                return ([f"cond_i_eq_L.{i}"], _const(("S4", 1)))
            if base == "cond_pattern_next_empty":
                return ([f"cond_pattern_next_empty.{i}"], _const(("S4", 1)))
            return None
        if kind == "S4":
            i = proc[1]
            if base == "finalize_pattern_actual":
                return ([f"finalize_pattern_actual.{i}"], _const(("S4c", i)))
            return None
        if kind == "S4c":
            i = proc[1]
            if base == "cond_all_processed":
                return ([f"cond_all_processed.{i}"], _const(("S4ok", i)))
            if base == "cond_not_all_processed":
                return ([f"cond_not_all_processed.{i}"], _const(("S4fail", i)))
            return None
        if kind == "S4ok":
            i = proc[1]
            if base == "cond_i_lt_L":
                return ([f"cond_i_lt_L.{i}"], _const(("S4", i + 1)))
            if base == "cond_i_eq_L":
                return (
                    [f"cond_i_eq_L.{i}", "terminate_success_actual"],
                    _const("STOP"),
                )
            return None
        if kind == "S4fail":
            i = proc[1]
            if base == "cond_trace_origin_exists_for_unprocessed":
                return (
                    [f"cond_trace_origin_exists_for_unprocessed.{i}.$j"],
                    lambda b: ("Retry", int(b["j"]), i, "S4"),
                )
            if base == "cond_trace_origin_not_exists_for_unprocessed":
                return (
                    [
                        f"cond_trace_origin_not_exists_for_unprocessed.{i}",
                        "terminate_failure_actual",
                    ],
                    _const("STOP"),
                )
            return None
        return None

    return Recognizer("pbfd", dispatch, ("start",), level_domain)


def _dad_recognizer() -> Recognizer:
    def dispatch(proc, event) -> Branch | None:
        base = event.split(".")[0]
        kind = proc[0]
        if kind == "start" and base == "load_dag_actual":
            return (
                ["load_dag_actual", "initialize_queue_actual.*"],
                _const(("S1",)),
            )
        if kind == "S1":
            if base == "all_nodes_processed":
                return (
                    [
                        "all_nodes_processed",
                        "perform_final_validation_actual",
                        "terminate_successfully_actual",
                    ],
                    _const("STOP"),
                )
            if base == "queue_not_empty":
                return (
                    [
                        "queue_not_empty",
                        "dequeue_actual.$v",
                        "process_actual.$v",
                        "validate_dependencies_actual.$v",
                    ],
                    lambda b: ("S2", b["v"]),
                )
            return None
        if kind == "S2":
            v = proc[1]
            if base == "all_dependencies_processed":
                return (
                    [
                        f"all_dependencies_processed.{v}",
                        f"generate_children_actual.{v}",
                        "enqueue_nodes_actual",
                    ],
                    _const(("S1",)),
                )
            if base == "missing_dependency":
                return ([f"missing_dependency.{v}"], _const(("S3", v)))
            return None
        if kind == "S3":
            v = proc[1]
            if base == "extend_graph_actual":
                return ([f"extend_graph_actual.{v}.*"], _const(("S3", v)))
            if base == "enqueue_nodes_actual":
                return (["enqueue_nodes_actual"], _const(("S1",)))
            return None
        return None

    return Recognizer("dad", dispatch, ("start",))


def _dfd_recognizer() -> Recognizer:
    def dispatch(proc, event) -> Branch | None:
        base = event.split(".")[0]
        kind = proc[0]
        if kind == "start" and base == "load_tree_actual":
            return (["load_tree_actual", "initialize_stack_actual.*"], _const(("S1",)))
        if kind == "S1":
            if base == "stack_is_empty":
                return (
                    ["stack_is_empty", "terminate_successfully_actual"], _const("STOP")
                )
            if base == "stack_not_empty":
                return (
                    ["stack_not_empty.$c", "dequeue_actual.$c", "process_actual.$c"],
                    lambda b: ("S1p", b["c"]),
                )
            return None
        if kind == "S1p":
            c = proc[1]
            if base == "is_non_leaf":
                return (
                    [
                        f"is_non_leaf.{c}",
                        f"process_child_actual.{c}",
                        f"push_children_actual.{c}",
                    ],
                    _const(("S1",)),
                )
            if base == "is_leaf":
                return (
                    [f"is_leaf.{c}", f"set_backtrack_point_actual.{c}"],
                    _const(("S2",)),
                )
            return None
        if kind == "S2":
            if base == "has_unprocessed_sibling":
                return (
                    [
                        "has_unprocessed_sibling.$b",
                        "get_unprocessed_sibling_actual.$b",
                        "push_sibling_actual.$b",
                    ],
                    _const(("S1",)),
                )
            if base == "no_unprocessed_sibling":
                return (
                    ["no_unprocessed_sibling.$b", "validate_subtree_actual.$b"],
                    _const(("S3",)),
                )
            return None
        if kind == "S3":
            if base == "no_more_backtrack_points_above":
                return (
                    [
                        "no_more_backtrack_points_above.*",
                        "terminate_successfully_actual",
                    ],
                    _const("STOP"),
                )
            if base == "subtree_validated":
                return (
                    ["subtree_validated.$b", "backtrack_to_actual.*"], _const(("S2",))
                )
            return None
        return None

    return Recognizer("dfd", dispatch, ("start",))


def _bfd_recognizer() -> Recognizer:
    def dispatch(proc, event) -> Branch | None:
        base = event.split(".")[0]
        kind = proc[0]
        if kind == "start" and base == "load_project_actual":
            return (
                ["load_project_actual", "initialize_queue_actual.*"], _const(("S1",))
            )
        if kind == "S1":
            if base == "dequeue_actual":
                return (
                    [
                        "dequeue_actual.$c",
                        "develop_actual.$c",
                        "enqueue_children_actual.$c",
                    ],
                    _const(("S1",)),
                )
            if base == "current_level_processed_actual":
                return (
                    ["current_level_processed_actual", "validate_level_actual.$k"],
                    lambda b: ("S2", b["k"]),
                )
            return None
        if kind == "S2":
            k = proc[1]
            if base == "not_last_level_actual":
                return (
                    [f"not_last_level_actual.{k}", f"advance_level_actual.{k}"],
                    _const(("S1",)),
                )
            if base == "last_level_actual":
                return (
                    [f"last_level_actual.{k}", "terminate_successfully_actual"],
                    _const("STOP"),
                )
            return None
        return None

    return Recognizer("bfd", dispatch, ("start",))


def _cdd_recognizer() -> Recognizer:
    def dispatch(proc, event) -> Branch | None:
        base = event.split(".")[0]
        kind = proc[0]
        if kind == "start" and base == "load_graph_actual":
            return (
                ["load_graph_actual", "initialize_dependencies_actual"], _const(("S1",))
            )
        if kind == "S1":
            if base == "process_node_actual":
                return (["process_node_actual.*"], _const(("S1",)))
            if base == "test_failed":
                return (
                    ["test_failed.$c", "refine_component_actual.$c"],
                    lambda b: ("S2", b["c"]),
                )
            if base == "feedback_cycle_detected":
                return (
                    ["feedback_cycle_detected.$c", "trigger_revision_actual.$c"],
                    lambda b: ("S2", b["c"]),
                )
            if base == "all_components_written_actual":
                return (
                    [
                        "all_components_written_actual.$k",
                        "validate_increment_actual.$k",
                    ],
                    _const(("S3",)),
                )
            return None
        if kind == "S2":
            c = proc[1]
            if base == "refine_component_actual":
                return ([f"refine_component_actual.{c}"], _const(("S2", c)))
            if base == "refactor_complete_actual":
                return ([f"refactor_complete_actual.{c}"], _const(("S1",)))
            return None
        if kind == "S3":
            if base in ("feedback_received_actual", "validation_failed_actual"):
                return (
                    [base, "identify_flaw_actual", "flaw_identified_actual.$c"],
                    lambda b: ("S2", b["c"]),
                )
            if base == "all_increments_validated_actual":
                return (
                    [
                        "all_increments_validated_actual",
                        "final_deployment_actual",
                        "terminate_successfully_actual",
                    ],
                    _const("STOP"),
                )
            return None
        return None

    return Recognizer("cdd", dispatch, ("start",))


def _tle_recognizer() -> Recognizer:
    linear = {
        "S1": ("resolve_grandparent_actual", "S2"),
        "S2": ("load_grandparent_table_actual", "S3"),
        "S4": ("update_bitmask_actual", "S5"),
    }

    def dispatch(proc, event) -> Branch | None:
        base = event.split(".")[0]
        kind = proc[0]
        if kind == "start" and base == "start_actual":
            return (["start_actual"], _const(("S0",)))
        if kind == "S0":
            if base == "load_page_actual":
                return (
                    ["load_page_actual", "parent_nodes_received_actual"],
                    _const(("S1",)),
                )
            if base == "no_more_pages_exist_actual":
                return (["no_more_pages_exist_actual"], _const(("S6",)))
            return None
        if kind in linear:
            expected, nxt = linear[kind]
            if base == expected:
                return ([expected], _const((nxt,)))
            return None
        if kind == "S3":
            if base == "resolve_child_actual":
                return (
                    ["resolve_child_actual", "preset_child_status_actual"],
                    _const(("S4",)),
                )
            return None
        if kind == "S5":
            if base == "more_pages_exist_actual":
                return (["more_pages_exist_actual"], _const(("S0",)))
            if base == "no_more_pages_exist_actual":
                return (["no_more_pages_exist_actual"], _const(("S6",)))
            return None
        if kind == "S6" and base == "finalize_process_actual":
            return (["finalize_process_actual"], _const("STOP"))
        return None

    return Recognizer("tle", dispatch, ("start",))


def make_recognizer(methodology: str, level_domain: int | None = None) -> Recognizer:
    if methodology == "pdfd":
        return _pdfd_recognizer(level_domain or DEFAULT_LEVEL_DOMAIN)
    if methodology == "pbfd":
        return _pbfd_recognizer(level_domain or DEFAULT_LEVEL_DOMAIN)
    return {
        "dad": _dad_recognizer,
        "dfd": _dfd_recognizer,
        "bfd": _bfd_recognizer,
        "cdd": _cdd_recognizer,
        "tle": _tle_recognizer,
    }[methodology]()


@dataclass
class ConformanceResult:
    accepted: bool
    events: list[str]
    reject_index: int | None = None
    reject_seq: int | None = None

    @property
    def first_illegal_event(self) -> str | None:
        return None if self.reject_index is None else self.events[self.reject_index]


def accept_events(
    methodology: str, events: list[str], level_domain: int | None = None
) -> ConformanceResult:
    rec = make_recognizer(methodology, level_domain)
    for idx, name in enumerate(events):
        if not rec.step(name):
            return ConformanceResult(False, events, reject_index=idx)
    return ConformanceResult(True, events)


def check_csp_conformance(
    trace: Trace, methodology: str | None = None, level_domain: int | None = None
) -> Verdict:
    """Annotate the trace and run it through the methodology's recognizer."""
    methodology = methodology or trace.methodology
    name = f"csp-conformance[{methodology}]"
    if methodology in ("pdfd", "pbfd") and level_domain is None and trace.events:
        level_domain = int(trace.events[0].payload.get("L", DEFAULT_LEVEL_DOMAIN))
    try:
        annotated = annotate_trace(trace, methodology)
    except (KeyError, ValueError) as exc:
        return Verdict(name, False, f"annotation failed: {exc}")
    rec = make_recognizer(methodology, level_domain)
    for seq, event in annotated:
        if event.split(".")[0] not in ALPHABETS[methodology]:
            return Verdict(name, False, f"event {event!r} outside alphabet", seq)
        if not rec.step(event):
            return Verdict(name, False, f"illegal event {event!r}", seq)
    return Verdict(name, True, f"{len(annotated)} events accepted")
