"""Graphs, planted partitions, volumes and conductance.

Graphs are undirected and unweighted apart from an optional integer
self-loop weight per node, which is how almost-regular graphs are lifted to
regular ones (see :func:`lift_to_regular`).
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

BRUTE_FORCE_MAX_N = 14
SWAP_RETRY_BUDGET = 100
GENERATOR_RETRY_BUDGET = 100


class GraphError(ValueError):
    """Raised on malformed graphs, infeasible parameters or degenerate sets."""


class VolumeConvention(enum.Enum):
    #: number of edges with at least one endpoint in S
    PAPER_LITERAL = "paper-literal"
    #: sum of degrees (plus self-loop weight) over S
    DEGREE_SUM = "degree-sum"

    @classmethod
    def parse(cls, value: "str | VolumeConvention") -> "VolumeConvention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise GraphError(f"unknown volume convention {value!r}") from None


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    edges: np.ndarray
    loop_weight: np.ndarray

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence[int]],
        loop_weight: Sequence[int] | np.ndarray | None = None,
    ) -> "Graph":
        arr = np.array([(min(u, v), max(u, v)) for u, v in edges], dtype=np.int64).reshape(-1, 2)
        if n < 0:
            raise GraphError("node count must be non-negative")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise GraphError(f"edge endpoint out of range [0, {n})")
        if loop_weight is None:
            lw = np.zeros(n, dtype=np.int64)
        else:
            lw = np.asarray(loop_weight, dtype=np.int64).copy()
            if lw.shape != (n,):
                raise GraphError("loop_weight must have one entry per node")
        arr.setflags(write=False)
        lw.setflags(write=False)
        return cls(n=n, edges=arr, loop_weight=lw)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def _proper_edges(self) -> np.ndarray:
        return self.edges[self.edges[:, 0] != self.edges[:, 1]]

    @cached_property
    def degree(self) -> np.ndarray:
        e = self._proper_edges
        deg = np.bincount(e.ravel(), minlength=self.n).astype(np.int64)
        deg.setflags(write=False)
        return deg

    @property
    def d_max(self) -> int:
        return int(self.degree.max()) if self.n else 0

    @property
    def d_min(self) -> int:
        return int(self.degree.min()) if self.n else 0

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(offsets, targets): neighbours of ``u`` are ``targets[offsets[u]:offsets[u+1]]``.

        Multi-edges appear with multiplicity; self-loop edges are left out.
        """
        e = self._proper_edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.argsort(src, kind="stable")
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=offsets[1:])
        return offsets, dst[order]

    def neighbors(self, u: int) -> np.ndarray:
        offsets, targets = self.csr
        return targets[offsets[u]:offsets[u + 1]]

    @cached_property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(map(tuple, self._proper_edges.tolist()))

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edge_set

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        e = self._proper_edges
        np.add.at(a, (e[:, 0], e[:, 1]), 1.0)
        np.add.at(a, (e[:, 1], e[:, 0]), 1.0)
        return a

    def lifted_degree(self) -> np.ndarray:
        return self.degree + self.loop_weight

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with node ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        lw = np.empty_like(self.loop_weight)
        lw[perm] = self.loop_weight
        return Graph.from_edges(self.n, perm[self.edges].tolist(), lw)


@dataclass(frozen=True, eq=False)
class Partition:
    k: int
    assignment: np.ndarray

    @classmethod
    def from_assignment(cls, assignment: Sequence[int] | np.ndarray) -> "Partition":
        a = np.asarray(assignment, dtype=np.int64).copy()
        if a.ndim != 1 or a.size == 0:
            raise GraphError("partition needs a non-empty 1-d assignment")
        if a.min() < 0:
            raise GraphError("cluster indices must be non-negative")
        k = int(a.max()) + 1
        sizes = np.bincount(a, minlength=k)
        if (sizes == 0).any():
            raise GraphError(f"empty cluster(s) {np.flatnonzero(sizes == 0).tolist()}")
        a.setflags(write=False)
        return cls(k=k, assignment=a)

    @classmethod
    def from_blocks(cls, n: int, blocks: Sequence[Iterable[int]]) -> "Partition":
        a = np.full(n, -1, dtype=np.int64)
        for i, block in enumerate(blocks):
            for v in block:
                if a[v] != -1:
                    raise GraphError(f"node {v} assigned twice")
                a[v] = i
        if (a < 0).any():
            raise GraphError("blocks do not cover every node")
        return cls.from_assignment(a)

    @property
    def n(self) -> int:
        return len(self.assignment)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == i)

    def blocks(self) -> list[np.ndarray]:
        return [self.members(i) for i in range(self.k)]

    @property
    def balance(self) -> float:
        """Largest beta with min_i |S_i| >= beta * n."""
        return float(self.sizes.min()) / self.n

    def is_balanced(self, beta: float) -> bool:
        return bool(self.sizes.min() >= beta * self.n)


@dataclass
class ValidationReport:
    n: int
    m: int
    symmetric: bool
    duplicate_edges: list[tuple[int, int]]
    self_loop_edges: list[int]
    negative_loop_weights: list[int]
    connected: bool
    components: int
    regular: bool
    d: int | None
    lifted_regular: bool
    D: int | None
    d_max: int
    d_min: int
    degree_ratio: float
    findings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.duplicate_edges or self.self_loop_edges or self.negative_loop_weights) and self.symmetric


def connected_components(g: Graph) -> np.ndarray:
    """Component index per node, by BFS in node order."""
    comp = np.full(g.n, -1, dtype=np.int64)
    offsets, targets = g.csr
    c = 0
    for s in range(g.n):
        if comp[s] >= 0:
            continue
        comp[s] = c
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in targets[offsets[u]:offsets[u + 1]]:
                if comp[w] < 0:
                    comp[w] = c
                    queue.append(w)
        c += 1
    return comp


def validate(g: Graph) -> ValidationReport:
    findings = []
    counts: dict[tuple[int, int], int] = {}
    loops = []
    for u, v in g.edges.tolist():
        if u == v:
            loops.append(u)
            continue
        counts[(u, v)] = counts.get((u, v), 0) + 1
    dups = sorted(e for e, c in counts.items() if c > 1)
    if dups:
        findings.append(f"{len(dups)} duplicated edge(s)")
    if loops:
        findings.append(f"{len(loops)} self-loop edge(s); loops must be given as loop weights")
    neg = np.flatnonzero(g.loop_weight < 0).tolist()
    if neg:
        findings.append("negative loop weight(s)")

    offsets, targets = g.csr
    symmetric = True
    for u in range(g.n):
        for w in targets[offsets[u]:offsets[u + 1]]:
            back = targets[offsets[w]:offsets[w + 1]]
            if np.count_nonzero(back == u) != np.count_nonzero(targets[offsets[u]:offsets[u + 1]] == w):
                symmetric = False
                break
        if not symmetric:
            findings.append("adjacency not symmetric")
            break

    comp = connected_components(g)
    ncomp = int(comp.max()) + 1 if g.n else 0
    if ncomp > 1:
        findings.append(f"disconnected: {ncomp} components")

    deg = g.degree
    regular = bool(g.n) and bool((deg == deg[0]).all()) and not g.loop_weight.any()
    lifted = g.lifted_degree()
    lifted_regular = bool(g.n) and bool((lifted == lifted[0]).all())
    return ValidationReport(
        n=g.n,
        m=g.m,
        symmetric=symmetric,
        duplicate_edges=dups,
        self_loop_edges=loops,
        negative_loop_weights=neg,
        connected=ncomp <= 1,
        components=ncomp,
        regular=regular,
        d=int(deg[0]) if regular else None,
        lifted_regular=lifted_regular,
        D=int(lifted[0]) if lifted_regular else None,
        d_max=g.d_max,
        d_min=g.d_min,
        degree_ratio=(g.d_max / g.d_min) if g.d_min > 0 else math.inf,
        findings=findings,
    )


def _as_node_mask(g: Graph, S: Iterable[int] | np.ndarray) -> np.ndarray:
    idx = np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n):
        raise GraphError(f"node id out of range [0, {g.n})")
    mask = np.zeros(g.n, dtype=bool)
    mask[idx] = True
    return mask


def _cut_and_touching(g: Graph, mask: np.ndarray) -> tuple[int, int]:
    e = g._proper_edges
    a, b = mask[e[:, 0]], mask[e[:, 1]]
    return int(np.count_nonzero(a ^ b)), int(np.count_nonzero(a | b))


def cut_size(g: Graph, S: Iterable[int]) -> int:
    return _cut_and_touching(g, _as_node_mask(g, S))[0]


def volume(g: Graph, S: Iterable[int], conv: VolumeConvention | str = VolumeConvention.PAPER_LITERAL) -> int:
    conv = VolumeConvention.parse(conv)
    mask = _as_node_mask(g, S)
    if conv is VolumeConvention.PAPER_LITERAL:
        return _cut_and_touching(g, mask)[1]
    return int(g.lifted_degree()[mask].sum())


def conductance(g: Graph, S: Iterable[int], conv: VolumeConvention | str = VolumeConvention.PAPER_LITERAL) -> float:
    conv = VolumeConvention.parse(conv)
    mask = _as_node_mask(g, S)
    if not mask.any():
        raise GraphError("conductance of the empty set is undefined")
    cut, touching = _cut_and_touching(g, mask)
    vol = touching if conv is VolumeConvention.PAPER_LITERAL else int(g.lifted_degree()[mask].sum())
    if vol == 0:
        raise GraphError("conductance undefined: set has zero volume")
    return cut / vol


def planted_rho_upper(g: Graph, p: Partition, conv: VolumeConvention | str = VolumeConvention.PAPER_LITERAL) -> float:
    """max_i phi(S_i) over the planted clusters; an upper bound on rho(k)."""
    if p.n != g.n:
        raise GraphError("partition size does not match graph")
    return max(conductance(g, p.members(i), conv) for i in range(p.k))


def _restricted_growth_strings(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All set partitions of range(n) into exactly k blocks, as RGS tuples."""
    a = [0] * n

    def rec(i: int, used: int) -> Iterator[tuple[int, ...]]:
        if n - i < k - used:
            return
        if i == n:
            if used == k:
                yield tuple(a)
            return
        for b in range(min(used + 1, k)):
            a[i] = b
            yield from rec(i + 1, used + (b == used))

    if n == 0:
        return
    a[0] = 0
    yield from rec(1, 1)


def brute_force_rho(
    g: Graph, k: int, conv: VolumeConvention | str = VolumeConvention.PAPER_LITERAL
) -> tuple[float, Partition]:
    """Exact k-way expansion by enumerating every partition into k non-empty blocks.

    A block with no incident edges (zero volume) has no cut either and counts
    as conductance 0. Ties go to the first partition in restricted-growth order.
    """
    conv = VolumeConvention.parse(conv)
    if g.n > BRUTE_FORCE_MAX_N:
        raise GraphError(f"brute_force_rho refuses n={g.n} > {BRUTE_FORCE_MAX_N}")
    if not 1 <= k <= g.n:
        raise GraphError(f"k={k} out of range for n={g.n}")
    e = g._proper_edges
    weight = g.lifted_degree()
    best_val = math.inf
    best: np.ndarray | None = None
    gen = _restricted_growth_strings(g.n, k)
    while True:
        chunk = list(itertools.islice(gen, 4096))
        if not chunk:
            break
        A = np.array(chunk, dtype=np.int64)
        au, av = A[:, e[:, 0]], A[:, e[:, 1]]
        worst = np.zeros(len(A))
        for b in range(k):
            in_u, in_v = au == b, av == b
            cut = np.count_nonzero(in_u ^ in_v, axis=1)
            if conv is VolumeConvention.PAPER_LITERAL:
                vol = np.count_nonzero(in_u | in_v, axis=1)
            else:
                vol = ((A == b) * weight).sum(axis=1)
            phi = np.divide(cut, vol, out=np.zeros(len(A)), where=vol > 0)
            np.maximum(worst, phi, out=worst)
        i = int(np.argmin(worst))
        if worst[i] < best_val:
            best_val = float(worst[i])
            best = A[i]
    assert best is not None
    return best_val, Partition.from_assignment(best)


def lift_to_regular(g: Graph, D: int) -> Graph:
    """G*: add ``D - d_v`` self-loops at every node so that it is D-regular."""
    if D < g.d_max:
        raise GraphError(f"D={D} is below the maximum degree {g.d_max}")
    return Graph.from_edges(g.n, g.edges.tolist(), D - g.degree)


def _random_regular_edges(n: int, d: int, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    """One attempt at a uniform-ish simple d-regular graph by stub pairing.

    Stubs that would form a loop or multi-edge are put back and re-paired;
    returns None when the leftover stubs cannot be paired.
    """
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover: dict[int, int] = {}
        for s1, s2 in stubs.reshape(-1, 2).tolist():
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 != s2 and (s1, s2) not in edges:
                edges.add((s1, s2))
            else:
                leftover[s1] = leftover.get(s1, 0) + 1
                leftover[s2] = leftover.get(s2, 0) + 1
        if leftover:
            nodes = list(leftover)
            if not any(
                a != b and (min(a, b), max(a, b)) not in edges
                for a, b in itertools.combinations(nodes, 2)
            ):
                return None
        stubs = np.array([v for v, c in sorted(leftover.items()) for _ in range(c)], dtype=np.int64)
    return edges


def _subgraph_connected(n: int, edges: Iterable[tuple[int, int]], nodes: np.ndarray) -> bool:
    sub = [(u, v) for u, v in edges]
    g = Graph.from_edges(n, sub)
    comp = connected_components(g)
    return len(set(comp[nodes].tolist())) == 1


def make_clustered_regular(
    n: int, k: int, d: int, cross_swaps: int, rng: np.random.Generator
) -> tuple[Graph, Partition]:
    """k random d-regular expanders joined by degree-preserving 2-swaps.

    Cluster ``i`` holds nodes ``i*n/k .. (i+1)*n/k - 1``. Every swap removes
    one intra-cluster edge from each of two distinct clusters and reconnects
    the four endpoints across them, so the result stays d-regular and carries
    exactly ``2 * cross_swaps`` inter-cluster edges.
    """
    if k < 1 or d < 1 or n % k:
        raise GraphError(f"n={n} must be divisible by k={k}")
    size = n // k
    if size <= d:
        raise GraphError(f"cluster size {size} must exceed d={d}")
    if (d * size) % 2:
        raise GraphError("d * (n/k) must be even")
    if cross_swaps < 0 or 4 * k * cross_swaps > d * n:
        raise GraphError(f"cross_swaps={cross_swaps} exceeds d*n/(4k)={d * n / (4 * k):g}")
    if cross_swaps and k < 2:
        raise GraphError("cross swaps need at least two clusters")

    assignment = np.repeat(np.arange(k), size)
    clusters = [np.arange(i * size, (i + 1) * size) for i in range(k)]
    intra: list[list[tuple[int, int]]] = []
    for i in range(k):
        for _ in range(GENERATOR_RETRY_BUDGET):
            local = _random_regular_edges(size, d, rng)
            if local is None:
                continue
            shifted = sorted((u + i * size, v + i * size) for u, v in local)
            if _subgraph_connected(n, shifted, clusters[i]):
                intra.append(shifted)
                break
        else:
            raise GraphError(f"could not sample a connected {d}-regular cluster in {GENERATOR_RETRY_BUDGET} tries")

    for _ in range(GENERATOR_RETRY_BUDGET):
        edge_lists = [list(x) for x in intra]
        present = set().union(*map(set, edge_lists))
        cross: list[tuple[int, int]] = []
        for _ in range(cross_swaps):
            for _ in range(SWAP_RETRY_BUDGET):
                ci, cj = rng.choice(k, size=2, replace=False)
                ei = int(rng.integers(len(edge_lists[ci])))
                ej = int(rng.integers(len(edge_lists[cj])))
                a, b = edge_lists[ci][ei]
                c, e = edge_lists[cj][ej]
                if rng.random() < 0.5:
                    c, e = e, c
                new1, new2 = (min(a, c), max(a, c)), (min(b, e), max(b, e))
                if new1 in present or new2 in present:
                    continue
                present -= {(a, b), (min(c, e), max(c, e))}
                present |= {new1, new2}
                edge_lists[ci][ei] = edge_lists[ci][-1]
                edge_lists[ci].pop()
                edge_lists[cj][ej] = edge_lists[cj][-1]
                edge_lists[cj].pop()
                cross += [new1, new2]
                break
            else:
                raise GraphError(f"swap retry budget ({SWAP_RETRY_BUDGET}) exhausted")
        if all(_subgraph_connected(n, edge_lists[i], clusters[i]) for i in range(k)):
            edges = sorted(itertools.chain(*edge_lists, cross))
            return Graph.from_edges(n, edges), Partition.from_assignment(assignment)
    raise GraphError("cross swaps kept disconnecting a cluster")


# -- small named graphs ------------------------------------------------------

def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete_bipartite(a: int, b: int) -> Graph:
    return Graph.from_edges(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def disjoint_union(*graphs: Graph) -> Graph:
    edges, loops, off = [], [], 0
    for g in graphs:
        edges += (g.edges + off).tolist()
        loops.append(g.loop_weight)
        off += g.n
    return Graph.from_edges(off, edges, np.concatenate(loops) if loops else None)


def component_partition(g: Graph) -> Partition:
    return Partition.from_assignment(connected_components(g))


# -- text formats ------------------------------------------------------------

def write_edge_list(g: Graph, path: str | Path) -> None:
    lines = [f"{g.n} {g.m}"] + [f"{u} {v}" for u, v in g.edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise GraphError(f"{path}: header must be 'n m'")
    n, m = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != m:
        raise GraphError(f"{path}: header announces {m} edges, found {len(body)}")
    edges = []
    for i, r in enumerate(body, start=2):
        if len(r) != 2:
            raise GraphError(f"{path}:{i}: expected 'u v'")
        edges.append((int(r[0]), int(r[1])))
    return Graph.from_edges(n, edges)


def write_partition(p: Partition, path: str | Path) -> None:
    Path(path).write_text("".join(f"{c}\n" for c in p.assignment.tolist()))


def read_partition(path: str | Path) -> Partition:
    values = [int(x) for x in Path(path).read_text().split()]
    return Partition.from_assignment(values)
