from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbcluster.analysis import (
    _assignment,
    _exhaustive,
    _greedy_refine,
    coverage_probability,
    covered_clusters,
    dense_evolution,
    dense_from_trace,
    equivalence_check,
    lemma3_trace,
    lemma5_check,
    mass_conservation_error,
    misclassification,
    run_streams,
    theorem_report,
)
from lbcluster.graph import Partition, component_partition, cycle_graph, disjoint_union, make_clustered_regular
from lbcluster.matching import Matching, Regular, apply_matching, sample_matching
from lbcluster.protocol import UNLABELED, ProtocolConfig, run_full
from lbcluster.spectral import cluster_basis, gap_report, good_nodes, graph_spectrum, top_k_projector


# -- dense replay ------------------------------------------------------------

def test_dense_round_zero_is_indicator_rows():
    g = cycle_graph(5)
    D = dense_evolution(g, [1, 3], [])
    assert D.shape == (1, 2, 5)
    assert D[0].tolist() == [[0, 1, 0, 0, 0], [0, 0, 0, 1, 0]]


def test_dense_rows_sum_to_one(clustered_small):
    g, p = clustered_small
    tr = run_full(g, p, ProtocolConfig(beta=0.4, T_override=80, rng_seed=2))
    assert mass_conservation_error(dense_from_trace(g, tr)) <= 1e-12


def test_sparse_dense_agreement():
    g, p = make_clustered_regular(50, 2, 6, 2, np.random.default_rng(10))
    tr = run_full(g, p, ProtocolConfig(beta=0.4, T_override=100, rng_seed=10))
    r = equivalence_check(tr, dense_from_trace(g, tr), tol=1e-12)
    assert r.passed, r.details


def test_corrupted_trace_is_pinpointed(clustered_small):
    g, p = clustered_small
    tr = run_full(g, p, ProtocolConfig(beta=0.5, T_override=40, rng_seed=1))
    dense = dense_from_trace(g, tr)
    v = next(v for v, s in enumerate(tr.final_states) if s)
    sid = min(tr.final_states[v])
    tr.final_states[v] = {**tr.final_states[v], sid: tr.final_states[v][sid] + 1e-9}
    r = equivalence_check(tr, dense)
    assert not r.passed
    assert r.details["node"] == v and r.details["seed"] == sid


def test_empty_seed_set_trivially_equivalent():
    g = cycle_graph(4)
    for s in range(5000):
        tr = run_full(g, component_partition(g), ProtocolConfig(beta=0.5, T_override=3, rng_seed=s))
        if not tr.seeds:
            break
    assert not tr.seeds
    assert equivalence_check(tr, dense_from_trace(g, tr)).passed


def test_dense_rejects_foreign_matching():
    with pytest.raises(ValueError):
        dense_evolution(cycle_graph(5), [0], [Matching.from_pairs(5, [(0, 2)])])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_norm_contracts_and_decomposes(seed):
    g, p = make_clustered_regular(24, 2, 4, 2, np.random.default_rng(seed))
    Q = top_k_projector(graph_spectrum(g), 2)
    rng = np.random.default_rng(seed + 1)
    y = rng.random(g.n)
    for _ in range(30):
        z = apply_matching(sample_matching(g, Regular(), rng), y)
        assert np.linalg.norm(z) <= np.linalg.norm(y) + 1e-15
        qz = Q @ z
        assert np.linalg.norm(qz) ** 2 + np.linalg.norm(z - qz) ** 2 == pytest.approx(np.linalg.norm(z) ** 2, abs=1e-10)
        y = z


def test_run_streams_are_reproducible():
    a = [r.random() for r in run_streams(5, 3)]
    b = [r.random() for r in run_streams(5, 3)]
    assert a == b and len(set(a)) == 3


# -- Lemma 3 and 5 -----------------------------------------------------------

def test_lemma3_round_zero_identity(clustered_small):
    g, p = clustered_small
    spec = graph_spectrum(g)
    tr = lemma3_trace(g, spec, 2, 0, runs=3, T_max=5, seed=0)
    F = spec.top(2)
    e = np.zeros(g.n)
    e[0] = 1
    assert tr.dist_q[0] == pytest.approx(np.linalg.norm(e - F @ (F.T @ e)), abs=1e-14)
    assert tr.bound[0] == 0 and np.allclose(tr.bound, 2 * tr.bound_tight)


def test_lemma3_disconnected_converges_to_cluster_mean():
    g = disjoint_union(cycle_graph(6), cycle_graph(6))
    spec = graph_spectrum(g)
    tr = lemma3_trace(g, spec, 2, 0, runs=10, T_max=400, seed=1)
    assert tr.dist_q[-1] <= 1e-6 < tr.dist_q[0]


def test_lemma3_csv(tmp_path, clustered_small):
    g, p = clustered_small
    tr = lemma3_trace(g, graph_spectrum(g), 2, 0, runs=2, T_max=3, seed=0)
    tr.write_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "t,distQ,distQ_se,bound,residual" and len(lines) == 5


def test_lemma5_exact_case():
    g = disjoint_union(cycle_graph(6), cycle_graph(6))
    p = component_partition(g)
    spec = graph_spectrum(g)
    basis = cluster_basis(spec, p)
    r = lemma5_check(g, spec, basis, p, 0, 0.5, runs=5, T=600, seed=0)
    assert r.details["reference_scale"] <= 1e-9
    assert r.details["mean_dist"] <= 1e-9 and r.passed


def test_lemma5_distance_grows_with_cross_edges():
    means = []
    for swaps in (1, 5, 25):
        g, p = make_clustered_regular(200, 2, 8, swaps, np.random.default_rng(42))
        spec = graph_spectrum(g)
        basis = cluster_basis(spec, p)
        T = gap_report(g, p, spec).T
        r = lemma5_check(g, spec, basis, p, 0, 0.5, runs=20, T=T, seed=3)
        means.append(r.details["mean_dist"])
    assert means[0] < means[1] < means[2]


# -- misclassification -------------------------------------------------------

def test_identity_labels():
    p = Partition.from_assignment([0, 0, 1, 1, 1])
    assert misclassification(p.assignment, np.ones(5, bool), p).count == 0


def test_swapped_names():
    p = Partition.from_assignment([0, 0, 1, 1, 1])
    labels = 1 - p.assignment
    assert misclassification(labels, np.ones(5, bool), p).count == 0


def test_single_flip():
    p = Partition.from_assignment([0, 0, 1, 1, 1])
    labels = p.assignment.copy()
    labels[0] = 1
    assert misclassification(labels, np.ones(5, bool), p).count == 1


def test_unlabeled_strict_and_lenient():
    p = Partition.from_assignment([0, 0, 1, 1])
    res = misclassification([5, UNLABELED, 9, 9], [True, False, True, True], p)
    assert res.count == 1 and res.lenient_count == 0 and res.unlabeled == 1


def test_more_labels_than_clusters():
    p = Partition.from_assignment([0, 0, 0, 1, 1, 1])
    res = misclassification([4, 4, 8, 6, 6, 6], np.ones(6, bool), p)
    assert res.count == 1 and res.mapping == {4: 0, 6: 1}


def _noisy_labels(rng, k, n_per, flip, extra):
    assignment = np.repeat(np.arange(k), n_per)
    names = rng.permutation(10**6)[: k + extra]
    labels = names[assignment]
    noise = rng.random(len(labels)) < flip
    labels[noise] = rng.choice(names, size=int(noise.sum()))
    return labels, Partition.from_assignment(assignment)


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.floats(0, 0.4), st.integers(0, 2))
@settings(max_examples=80, deadline=None)
def test_greedy_matches_exhaustive_on_noisy_planted_labels(seed, k, flip, extra):
    rng = np.random.default_rng(seed)
    labels, p = _noisy_labels(rng, k, 30, flip, extra)
    ex = misclassification(labels, np.ones(len(labels), bool), p, method="exhaustive")
    gr = misclassification(labels, np.ones(len(labels), bool), p, method="greedy")
    assert gr.count == ex.count


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=120, deadline=None)
def test_assignment_matches_exhaustive_on_any_table(a, k, seed):
    C = np.random.default_rng(seed).integers(0, 20, size=(a, k))
    assert _assignment(C)[0] == _exhaustive(C)[0]
    assert _greedy_refine(C)[0] <= _exhaustive(C)[0]


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_misclassification_invariant_under_relabeling(seed):
    rng = np.random.default_rng(seed)
    labels, p = _noisy_labels(rng, 4, 10, 0.3, 2)
    names = np.unique(labels)
    remap = dict(zip(names.tolist(), rng.permutation(10**6)[: len(names)].tolist()))
    relabeled = np.array([remap[x] for x in labels.tolist()])
    ones = np.ones(len(labels), bool)
    assert misclassification(labels, ones, p).count == misclassification(relabeled, ones, p).count


def test_auto_switches_to_assignment_for_many_labels():
    rng = np.random.default_rng(0)
    labels, p = _noisy_labels(rng, 10, 5, 0.1, 0)
    res = misclassification(labels, np.ones(50, bool), p)
    assert res.method == "assignment"
    assert res.count <= misclassification(labels, np.ones(50, bool), p, method="greedy").count


# -- coverage and the report -------------------------------------------------

def test_covered_clusters_all():
    p = Partition.from_assignment([0, 0, 1, 1, 2, 2])
    assert covered_clusters([(0, 5), (2, 9), (5, 1)], p) == 3


def test_coverage_probability_two_clusters():
    p = Partition.from_assignment([0] * 250 + [1] * 250)
    est = coverage_probability(p, 0.4, 300, seed=1)
    # exact: every cluster seeded unless all 250 * sbar trials in it miss
    sbar = math.ceil(3 / 0.4 * math.log(1 / 0.4))
    miss = (1 - 1 / 500) ** (250 * sbar)
    exact = 1 - 2 * miss + (1 - 1 / 500) ** (500 * sbar)
    assert abs(est.covered_fraction - exact) <= 4 * math.sqrt(exact * (1 - exact) / 300)


def test_theorem_report_fields(clustered_small):
    g, p = clustered_small
    spec = graph_spectrum(g)
    basis = cluster_basis(spec, p)
    tr = run_full(g, p, ProtocolConfig(beta=0.4, rng_seed=5))
    rep = theorem_report(tr, p, basis=basis, gap=gap_report(g, p, spec))
    assert rep["messages"]["wordsExchanged"] == tr.words_exchanged
    assert rep["messages"]["withinCountingBound"]
    assert rep["messages"]["ratioToCountingBound"] <= 1
    assert 0 <= rep["misclassification"]["fraction"] <= 1
    assert len(rep["seeds"]["good"]) == len(tr.seeds)
    good = set(good_nodes(basis, 1.0, 0.4, g.n).good.tolist())
    assert rep["seeds"]["good"] == [int(v in good) for v, _ in tr.seeds]
