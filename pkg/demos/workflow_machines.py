"""Walkthrough: the six workflow machines and the two bundled replays.

Run top to bottom:  python3 demos/workflow_machines.py
"""

from treeflow.basic_machines import Dag, run_bfd, run_cdd, run_dad, run_dfd
from treeflow.fixtures import (
    geo_hierarchy,
    pbfd_mvp_scenario,
    pdfd_mvp_scenario,
    perfect_tree,
    visited_places_hierarchy,
)
from treeflow.hybrid_machines import run_pbfd, run_pdfd
from treeflow.scenario import CddScript, Scenario, TraceOriginStrategy

tree = perfect_tree(2, 3)

print("== dependency-ordered DAG processing ==")
trace = run_dad(Dag.from_hierarchy(tree))
print(" ".join(trace.rules()))

print("\n== depth-first with backtrack validation ==")
trace = run_dfd(tree)
print(" ".join(trace.rules()))

print("\n== level-synchronized breadth-first ==")
trace = run_bfd(tree)
print(" ".join(trace.rules()))

print("\n== bounded iterative refinement ==")
scenario = Scenario(cdd=CddScript(test_failures={2: 1}, refine_iterations={2: 2}))
trace = run_cdd([1, 2, 3], m_cap=5, scenario=scenario)
print(" ".join(trace.rules()))

# The depth-led hybrid: forward level validation, a scripted failure at
# level 2 backtracks to level 1 and the episode resumes the forward pass.
print("\n== depth-led hybrid with one failure ==")
sc = Scenario(
    r_max=3,
    trace_origin=TraceOriginStrategy.fixed(1),
    validation_script={("level", 2, 1): {n.id for n in tree.level(2)}},
)
result = run_pdfd(tree, sc)
print(" ".join(result.trace.rules()))
print("outcome:", result.outcome, "attempts:", {k: v for k, v in result.attempts.items() if v})

# The bundled replays reproduce the reference runs exactly.
print("\n== bundled replay: depth-led ==")
result = run_pdfd(visited_places_hierarchy(), pdfd_mvp_scenario())
print("outcome:", result.outcome)
print("per-level refinement attempts:", {k: v for k, v in result.attempts.items() if v})

print("\n== bundled replay: breadth-led ==")
result = run_pbfd(geo_hierarchy(), pbfd_mvp_scenario())
print("outcome:", result.outcome)
print("max attempts recorded:", max(result.attempts.values()))
print("rules:", " ".join(result.trace.rules()))
