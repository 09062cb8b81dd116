from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbcluster.fixtures import two_triangles_bridged
from lbcluster.graph import (
    Graph,
    GraphError,
    Partition,
    VolumeConvention,
    brute_force_rho,
    complete_graph,
    component_partition,
    conductance,
    connected_components,
    cut_size,
    cycle_graph,
    disjoint_union,
    lift_to_regular,
    make_clustered_regular,
    path_graph,
    planted_rho_upper,
    read_edge_list,
    read_partition,
    star_graph,
    validate,
    volume,
    write_edge_list,
    write_partition,
)

LIT, DEG = VolumeConvention.PAPER_LITERAL, VolumeConvention.DEGREE_SUM


@st.composite
def small_graphs(draw, min_n=2, max_n=8):
    n = draw(st.integers(min_n, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return Graph.from_edges(n, chosen)


# -- validation --------------------------------------------------------------

def test_validate_four_cycle():
    rep = validate(cycle_graph(4))
    assert rep.connected and rep.regular and rep.d == 2 and rep.ok


def test_validate_reports_duplicate_edge():
    rep = validate(Graph.from_edges(3, [(0, 1), (1, 0), (1, 2)]))
    assert rep.duplicate_edges == [(0, 1)]
    assert not rep.ok


def test_validate_two_triangles_disconnected(two_triangles):
    rep = validate(two_triangles)
    assert not rep.connected and rep.components == 2
    assert rep.ok  # disconnected graphs are allowed, only flagged


def test_validate_flags_self_loop_edge():
    rep = validate(Graph.from_edges(2, [(0, 0), (0, 1)]))
    assert rep.self_loop_edges == [0]


def test_out_of_range_endpoint_rejected():
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 3)])


def test_components_match_bfs_labels(two_triangles):
    comp = connected_components(two_triangles)
    assert comp.tolist() == [0, 0, 0, 1, 1, 1]


# -- volume and conductance --------------------------------------------------

def test_volume_four_cycle_adjacent_pair():
    g = cycle_graph(4)
    assert volume(g, [0, 1], LIT) == 3
    assert volume(g, [0, 1], DEG) == 4


def test_volume_empty_set_is_zero():
    assert volume(cycle_graph(5), [], LIT) == 0
    assert volume(cycle_graph(5), [], DEG) == 0


def test_conductance_k4_singleton_both_conventions():
    g = complete_graph(4)
    assert conductance(g, [0], LIT) == 1.0
    assert conductance(g, [0], DEG) == 1.0


def test_conductance_four_cycle_adjacent_pair():
    assert conductance(cycle_graph(4), [0, 1], LIT) == pytest.approx(2 / 3)


def test_conductance_whole_vertex_set_is_zero():
    assert conductance(cycle_graph(6), range(6)) == 0.0


def test_conductance_empty_set_raises():
    with pytest.raises(GraphError):
        conductance(cycle_graph(4), [])


@given(small_graphs(min_n=3, max_n=7), st.data())
@settings(max_examples=60, deadline=None)
def test_conductance_unchanged_under_disjoint_duplication(g, data):
    S = data.draw(st.lists(st.integers(0, g.n - 1), min_size=1, unique=True))
    if volume(g, S, DEG) == 0:
        return
    doubled = disjoint_union(g, g)
    for conv in (LIT, DEG):
        assert conductance(doubled, S, conv) == conductance(g, S, conv)


@given(small_graphs())
@settings(max_examples=60, deadline=None)
def test_literal_volume_never_exceeds_degree_sum(g):
    for r in range(1, g.n + 1):
        S = list(range(r))
        assert volume(g, S, LIT) <= volume(g, S, DEG)


# -- brute-force rho ---------------------------------------------------------

def test_rho_two_triangles_bridged_finds_triangles():
    g = two_triangles_bridged()
    rho, part = brute_force_rho(g, 2, DEG)
    assert sorted(map(sorted, (b.tolist() for b in part.blocks()))) == [[0, 1, 2], [3, 4, 5]]
    assert rho == pytest.approx(1 / 7)


def test_rho_k1_is_zero_with_whole_set():
    rho, part = brute_force_rho(cycle_graph(5), 1)
    assert rho == 0.0 and part.k == 1


def test_rho_k4_two_way():
    # The balanced 2+2 split beats every singleton split: cut 4 over
    # degree-sum volume 6 gives 2/3, over literal volume 5 gives 4/5.
    assert brute_force_rho(complete_graph(4), 2, DEG)[0] == pytest.approx(2 / 3)
    assert brute_force_rho(complete_graph(4), 2, LIT)[0] == pytest.approx(4 / 5)


def test_rho_k4_exhaustive_oracle():
    g = complete_graph(4)
    best = min(
        max(conductance(g, S, DEG), conductance(g, [v for v in range(4) if v not in S], DEG))
        for r in (1, 2, 3)
        for S in itertools.combinations(range(4), r)
    )
    assert brute_force_rho(g, 2, DEG)[0] == pytest.approx(best)


def test_rho_refuses_large_graphs():
    with pytest.raises(GraphError):
        brute_force_rho(cycle_graph(15), 2)


@given(small_graphs(min_n=3, max_n=7), st.integers(2, 3), st.data())
@settings(max_examples=40, deadline=None)
def test_rho_never_exceeds_planted_upper_bound(g, k, data):
    if k > g.n:
        return
    assignment = data.draw(st.lists(st.integers(0, k - 1), min_size=g.n, max_size=g.n))
    if len(set(assignment)) != k:
        return
    p = Partition.from_assignment(assignment)
    if any(volume(g, b, DEG) == 0 for b in p.blocks()):
        return
    for conv in (LIT, DEG):
        assert brute_force_rho(g, k, conv)[0] <= planted_rho_upper(g, p, conv) + 1e-12


def test_planted_rho_upper_of_components_is_zero(two_triangles):
    assert planted_rho_upper(two_triangles, component_partition(two_triangles)) == 0.0


def test_planted_rho_upper_single_cluster_is_zero():
    g = cycle_graph(6)
    assert planted_rho_upper(g, Partition.from_assignment([0] * 6)) == 0.0


# -- lift --------------------------------------------------------------------

def test_lift_identity_on_regular_graph():
    g = cycle_graph(5)
    h = lift_to_regular(g, 2)
    assert np.array_equal(h.edges, g.edges) and not h.loop_weight.any()


def test_lift_path_three():
    assert lift_to_regular(path_graph(3), 2).loop_weight.tolist() == [1, 0, 1]


def test_lift_star():
    assert lift_to_regular(star_graph(3), 3).loop_weight.tolist() == [0, 2, 2, 2]


def test_lift_below_max_degree_rejected():
    with pytest.raises(GraphError):
        lift_to_regular(star_graph(3), 2)


@given(small_graphs(), st.integers(0, 3))
@settings(max_examples=50, deadline=None)
def test_lift_preserves_edges_and_regularizes(g, extra):
    h = lift_to_regular(g, g.d_max + extra)
    assert np.array_equal(h.edges, g.edges)
    assert validate(h).lifted_regular and validate(h).D == g.d_max + extra


# -- generator ---------------------------------------------------------------

def _cross_edges(g: Graph, p: Partition) -> int:
    a = p.assignment
    return int(np.count_nonzero(a[g.edges[:, 0]] != a[g.edges[:, 1]]))


def test_generator_small_instance(rng):
    g, p = make_clustered_regular(12, 2, 3, 1, rng)
    rep = validate(g)
    assert rep.ok and rep.regular and rep.d == 3
    assert _cross_edges(g, p) == 2
    for b in p.blocks():
        # each side keeps 8 internal edges plus 2 cut edges
        assert volume(g, b, LIT) == 10
        assert conductance(g, b, LIT) == pytest.approx(2 / 10)
        assert conductance(g, b, DEG) == pytest.approx(2 / 18)
    assert planted_rho_upper(g, p, LIT) == pytest.approx(0.2)


def test_generator_single_cluster(rng):
    g, p = make_clustered_regular(8, 1, 3, 0, rng)
    assert p.k == 1 and validate(g).regular and validate(g).connected


def test_generator_criterion_fixture_conductance():
    g, p = make_clustered_regular(500, 2, 16, 5, np.random.default_rng(0))
    assert _cross_edges(g, p) == 10
    for b in p.blocks():
        assert conductance(g, b, DEG) == pytest.approx(10 / (16 * 250))


@pytest.mark.parametrize(
    "args",
    [(12, 5, 3, 0), (6, 2, 3, 0), (10, 2, 3, 1), (12, 2, 3, 100), (8, 1, 3, 1)],
    ids=["indivisible", "cluster-too-small", "odd-degree-sum", "too-many-swaps", "swaps-single-cluster"],
)
def test_generator_rejects_bad_parameters(args, rng):
    with pytest.raises(GraphError):
        make_clustered_regular(*args, rng)


@given(st.integers(0, 2**32 - 1), st.sampled_from([(12, 2, 3), (20, 2, 4), (30, 3, 4), (24, 4, 3)]), st.integers(0, 3))
@settings(max_examples=40, deadline=None)
def test_generator_invariants(seed, shape, swaps):
    n, k, d = shape
    g, p = make_clustered_regular(n, k, d, swaps, np.random.default_rng(seed))
    rep = validate(g)
    assert rep.ok and rep.regular and rep.d == d
    assert _cross_edges(g, p) == 2 * swaps
    sub_edges = [(u, v) for u, v in g.edges.tolist() if p.assignment[u] == p.assignment[v]]
    comp = connected_components(Graph.from_edges(n, sub_edges))
    for b in p.blocks():
        assert len(set(comp[b].tolist())) == 1


def test_generator_is_deterministic():
    a = make_clustered_regular(40, 2, 4, 3, np.random.default_rng(99))
    b = make_clustered_regular(40, 2, 4, 3, np.random.default_rng(99))
    assert np.array_equal(a[0].edges, b[0].edges)


# -- partitions and io -------------------------------------------------------

def test_partition_balance():
    p = Partition.from_assignment([0, 0, 0, 1])
    assert p.balance == pytest.approx(0.25)
    assert p.is_balanced(0.25) and not p.is_balanced(0.3)


def test_partition_rejects_gaps():
    with pytest.raises(GraphError):
        Partition.from_assignment([0, 2, 2])


def test_cut_size_counts_boundary_edges():
    assert cut_size(cycle_graph(6), [0, 1, 2]) == 2


def test_edge_list_and_partition_round_trip(tmp_path, rng):
    g, p = make_clustered_regular(12, 2, 3, 1, rng)
    write_edge_list(g, tmp_path / "g.txt")
    write_partition(p, tmp_path / "p.txt")
    g2, p2 = read_edge_list(tmp_path / "g.txt"), read_partition(tmp_path / "p.txt")
    assert np.array_equal(g2.edges, g.edges) and np.array_equal(p2.assignment, p.assignment)
    assert validate(g2).ok


def test_edge_list_header_mismatch(tmp_path):
    (tmp_path / "g.txt").write_text("3 2\n0 1\n")
    with pytest.raises(GraphError):
        read_edge_list(tmp_path / "g.txt")


def test_relabel_preserves_conductance():
    g = two_triangles_bridged()
    perm = [5, 3, 1, 0, 2, 4]
    h = g.relabel(perm)
    S = [0, 1, 2]
    assert conductance(h, [perm[v] for v in S]) == conductance(g, S)
