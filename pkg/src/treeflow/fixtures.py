"""Bundled datasets: the 7-level geographic hierarchy with its worked
selection state, the 6-level visited-places replay profile, and synthetic
tree builders for benchmarks and property tests.

The geographic fixture reproduces the reference selection state exactly:
continents mask 21, country masks 3/3/0, state masks 264192/4097, county
masks 4100/268435520, and city masks 3/3/257/0, which decode to the twelve
report paths.
"""

from __future__ import annotations

from .hierarchy import Hierarchy, load_hierarchy
from .scenario import Scenario, TraceOriginStrategy
from .tle import TleStore


def _row(id, name, parent, ci, level, width="int32", nt=None):
    return {
        "id": id,
        "name": name,
        "name_type_id": nt,
        "width_class": width,
        "parent_id": parent,
        "child_index": ci,
        "level": level,
    }


GEO_ROWS: list[dict] = [
    # Structural anchors enabling storage units from the apex.
    _row(0, "ContinentGrandparent", None, 0, 1),
    _row(1, "ContinentParent", 0, 0, 2),
    # Continents (level 3); bit positions drive the decimal mask 21.
    _row(2, "North America", 1, 0, 3, width="int32", nt=1),
    _row(3, "South America", 1, 1, 3, nt=1),
    _row(4, "Europe", 1, 2, 3, nt=1),
    _row(5, "Africa", 1, 3, 3, nt=1),
    _row(6, "Asia", 1, 4, 3, nt=1),
    _row(7, "Oceania", 1, 5, 3, nt=1),
    _row(8, "Antarctica", 1, 6, 3, nt=1),
    # Countries (level 4).  The United States carries a 64-bit mask for its
    # fifty states.
    _row(9, "United States", 2, 0, 4, width="int64", nt=2),
    _row(10, "Canada", 2, 1, 4, nt=2),
    _row(11, "Mexico", 2, 2, 4, nt=2),
    _row(12, "Guatemala", 2, 3, 4, nt=2),
    _row(13, "Honduras", 2, 4, 4, nt=2),
    _row(14, "Brazil", 3, 0, 4, nt=2),
    _row(19, "United Kingdom", 4, 0, 4, nt=2),
    _row(20, "France", 4, 1, 4, nt=2),
    _row(21, "Germany", 4, 2, 4, nt=2),
    _row(24, "China", 6, 0, 4, nt=2),
    _row(25, "India", 6, 1, 4, nt=2),
    # States (level 5).  Virginia's many counties need a variable-width mask.
    _row(30, "Alaska", 9, 1, 5, nt=3),
    _row(31, "California", 9, 4, 5, nt=3),
    _row(38, "Virginia", 9, 11, 5, width="var:120", nt=3),
    _row(45, "Maryland", 9, 18, 5, nt=3),
    _row(77, "Ontario", 10, 0, 5, nt=3),
    _row(89, "Nunavut", 10, 12, 5, nt=3),
    _row(50, "England", 19, 0, 5, nt=3),
    _row(51, "Scotland", 19, 1, 5, nt=3),
    _row(52, "Ile-de-France", 20, 0, 5, nt=3),
    # Counties (level 6).
    _row(92, "Baltimore County", 45, 2, 6, nt=4),
    _row(102, "Howard County", 45, 12, 6, nt=4),
    _row(120, "Arlington County", 38, 6, 6, nt=4),
    _row(186, "Fairfax County", 38, 28, 6, nt=4),
    # Cities (level 7).
    _row(138, "Arbutus", 92, 0, 7, nt=5),
    _row(139, "Catonsville", 92, 1, 7, nt=5),
    _row(146, "Columbia MD", 102, 0, 7, nt=5),
    _row(147, "Ellicott City", 102, 1, 7, nt=5),
    _row(149, "Laurel", 102, 3, 7, nt=5),
    _row(156, "Arlington", 120, 0, 7, nt=5),
    _row(164, "Virginia Square", 120, 8, 7, nt=5),
]

GEO_SUBJECT = 1

# Node-id shorthands used by tests.
GEO = {
    "root": 0, "anchor": 1,
    "north_america": 2, "south_america": 3, "europe": 4, "africa": 5,
    "asia": 6, "oceania": 7, "antarctica": 8,
    "united_states": 9, "canada": 10, "mexico": 11,
    "guatemala": 12, "honduras": 13, "brazil": 14,
    "united_kingdom": 19, "france": 20, "germany": 21,
    "china": 24, "india": 25,
    "alaska": 30, "california": 31,
    "england": 50, "scotland": 51, "ile_de_france": 52,
    "virginia": 38, "maryland": 45, "ontario": 77, "nunavut": 89,
    "baltimore_county": 92, "howard_county": 102,
    "arlington_county": 120, "fairfax_county": 186,
    "arbutus": 138, "catonsville": 139, "columbia_md": 146,
    "ellicott_city": 147, "laurel": 149,
    "arlington": 156, "virginia_square": 164,
}

# The selection state behind the worked masks and the 12-line report.
GEO_SELECTIONS: list[int] = [
    GEO["north_america"], GEO["europe"], GEO["asia"],
    GEO["united_states"], GEO["canada"],
    GEO["united_kingdom"], GEO["france"],
    GEO["virginia"], GEO["maryland"], GEO["ontario"], GEO["nunavut"],
    GEO["baltimore_county"], GEO["howard_county"],
    GEO["arlington_county"], GEO["fairfax_county"],
    GEO["arbutus"], GEO["catonsville"], GEO["columbia_md"], GEO["ellicott_city"],
    GEO["arlington"], GEO["virginia_square"],
]

GEO_REPORT_LINES = [
    "ContinentGrandparent > ContinentParent > Asia",
    "ContinentGrandparent > ContinentParent > Europe > France",
    "ContinentGrandparent > ContinentParent > Europe > United Kingdom",
    "ContinentGrandparent > ContinentParent > North America > Canada > Nunavut",
    "ContinentGrandparent > ContinentParent > North America > Canada > Ontario",
    "ContinentGrandparent > ContinentParent > North America > United States > Maryland"
    " > Baltimore County > Arbutus",
    "ContinentGrandparent > ContinentParent > North America > United States > Maryland"
    " > Baltimore County > Catonsville",
    "ContinentGrandparent > ContinentParent > North America > United States > Maryland"
    " > Howard County > Columbia MD",
    "ContinentGrandparent > ContinentParent > North America > United States > Maryland"
    " > Howard County > Ellicott City",
    "ContinentGrandparent > ContinentParent > North America > United States > Virginia"
    " > Arlington County > Arlington",
    "ContinentGrandparent > ContinentParent > North America > United States > Virginia"
    " > Arlington County > Virginia Square",
    "ContinentGrandparent > ContinentParent > North America > United States > Virginia"
    " > Fairfax County",
]


def geo_hierarchy() -> Hierarchy:
    return load_hierarchy(GEO_ROWS)


def geo_store(subject: int = GEO_SUBJECT) -> TleStore:
    """The geographic store pre-loaded with the worked selection state."""
    store = TleStore(geo_hierarchy())
    for node_id in GEO_SELECTIONS:
        store.update(subject, node_id, True)
    return store


# -- visited-places replay profile (6 levels, two nodes per level) ---------------


VISITED_PLACES_ROWS: list[dict] = [
    _row(1, "Visitor", None, 0, 1),
    _row(2, "North America", 1, 0, 2, nt=1),
    _row(3, "Asia", 1, 1, 2, nt=1),
    _row(4, "USA", 2, 0, 3, nt=2),
    _row(5, "Canada", 2, 1, 3, nt=2),
    _row(6, "Maryland", 4, 0, 4, nt=3),
    _row(7, "Virginia", 4, 1, 4, nt=3),
    _row(8, "Howard", 6, 0, 5, nt=4),
    _row(9, "Baltimore", 6, 1, 5, nt=4),
    _row(10, "Ellicott City", 8, 0, 6, nt=5),
    _row(11, "Columbia", 8, 1, 6, nt=5),
]


def visited_places_hierarchy() -> Hierarchy:
    return load_hierarchy(VISITED_PLACES_ROWS)


def pdfd_mvp_scenario() -> Scenario:
    """Replay profile: cap 60, refinement always returns to level 2, and one
    scripted first-attempt failure at each of levels 3, 4 and 5.

    Expected: three backtrack/resume pairs and final per-level attempt
    counters {2: 3, 3: 3, 4: 2, 5: 1}."""
    h = visited_places_hierarchy()
    return Scenario(
        r_max=60,
        k_thresholds={k: len(h.level(k)) for k in h.levels()},
        trace_origin=TraceOriginStrategy.fixed(2),
        validation_script={
            ("level", 3, 1): {4, 5},
            ("level", 4, 1): {6, 7},
            ("level", 5, 1): {8, 9},
        },
    )


PDFD_MVP_EXPECTED_ATTEMPTS = {1: 0, 2: 3, 3: 3, 4: 2, 5: 1, 6: 0}


def pbfd_mvp_scenario() -> Scenario:
    """Replay profile over the geographic hierarchy: cap 50, a single
    scripted failure at level 3 whose origin is level 1.

    Expected: one refinement cycle over levels 1..3 and a maximum recorded
    attempt count of 1."""
    return Scenario(
        r_max=50,
        trace_origin=TraceOriginStrategy.scripted_map({3: 1}),
        validation_script={
            ("pattern", 3, 1): {GEO["north_america"]},
        },
    )


# -- synthetic builders ------------------------------------------------------------


def uniform_hierarchy(level_sizes: list[int], widths: list[str] | None = None) -> Hierarchy:
    """Tree with the given node count per level; children are distributed
    round-robin over the previous level's nodes."""
    if not level_sizes or level_sizes[0] != 1:
        raise ValueError("level_sizes must start with a single root")
    rows = []
    next_id = 0
    prev_ids: list[int] = []
    for depth, count in enumerate(level_sizes, start=1):
        ids = []
        per_parent: dict[int, int] = {}
        for k in range(count):
            parent = None if depth == 1 else prev_ids[k % len(prev_ids)]
            ci = 0 if parent is None else per_parent.setdefault(parent, 0)
            if parent is not None:
                per_parent[parent] += 1
            width = widths[depth - 1] if widths else None
            if width is None:
                fanout = -(-level_sizes[depth] // count) if depth < len(level_sizes) else 0
                width = "int32" if fanout <= 32 else ("int64" if fanout <= 64 else f"var:{fanout}")
            rows.append(_row(next_id, f"n{depth}_{k}", parent, ci, depth, width=width))
            ids.append(next_id)
            next_id += 1
        prev_ids = ids
    return load_hierarchy(rows)


def perfect_tree(branching: int, levels: int) -> Hierarchy:
    """Perfect ``branching``-ary tree with ``levels`` levels."""
    sizes = [branching**d for d in range(levels)]
    width = "int32" if branching <= 32 else ("int64" if branching <= 64 else f"var:{branching}")
    return uniform_hierarchy(sizes, widths=[width] * levels)


def bench_hierarchy(scale: str) -> Hierarchy:
    """Four-level trees of roughly 10, 10^3 and 10^5 nodes."""
    shapes = {
        "small": [1, 2, 3, 4],
        "medium": [1, 9, 90, 900],
        "large": [1, 45, 2025, 99225],
    }
    return uniform_hierarchy(shapes[scale])
