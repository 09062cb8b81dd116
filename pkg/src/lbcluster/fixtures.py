"""Small named graphs used by the exact oracles."""

from __future__ import annotations

import numpy as np

from .graph import (
    Graph,
    complete_bipartite,
    complete_graph,
    cycle_graph,
    disjoint_union,
    lift_to_regular,
    make_clustered_regular,
    path_graph,
    star_graph,
)


def triangular_prism() -> Graph:
    return Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)])


def cube() -> Graph:
    return Graph.from_edges(8, [(u, u ^ (1 << b)) for u in range(8) for b in range(3) if u < u ^ (1 << b)])


def petersen() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    return Graph.from_edges(10, outer + inner + spokes)


def two_triangles_bridged() -> Graph:
    return Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])


def two_k4_swapped(seed: int = 0) -> Graph:
    """Two K4s with one edge each rewired across: 3-regular, 2 cross edges."""
    g, _ = make_clustered_regular(8, 2, 3, 1, np.random.default_rng(seed))
    return g


def enumeration_fixtures() -> dict[str, Graph]:
    """Regular graphs with n <= 6 and d <= 3, small enough for exact enumeration."""
    return {
        "K2": complete_graph(2),
        "K3": complete_graph(3),
        "C4": cycle_graph(4),
        "K4": complete_graph(4),
        "C5": cycle_graph(5),
        "C6": cycle_graph(6),
        "K3,3": complete_bipartite(3, 3),
        "prism": triangular_prism(),
        "2K3": disjoint_union(complete_graph(3), complete_graph(3)),
        "3K2": disjoint_union(*[complete_graph(2)] * 3),
    }


def cheeger_fixtures() -> dict[str, Graph]:
    """(Lifted-)regular graphs with n <= 10."""
    out = dict(enumeration_fixtures())
    out.update(
        {
            "K5": complete_graph(5),
            "C8": cycle_graph(8),
            "cube": cube(),
            "petersen": petersen(),
            "2K4-swapped": two_k4_swapped(),
            "2K4": disjoint_union(complete_graph(4), complete_graph(4)),
            "P3*": lift_to_regular(path_graph(3), 2),
            "K1,3*": lift_to_regular(star_graph(3), 3),
            "bridged-triangles*": lift_to_regular(two_triangles_bridged(), 3),
        }
    )
    return out
