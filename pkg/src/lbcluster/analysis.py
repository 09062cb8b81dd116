"""Ground-truth oracles for protocol runs and the convergence/misclassification metrics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .checks import CheckResult
from .graph import Graph, Partition
from .matching import Matching, Regular, ProtocolVariant, apply_matching, sample_matching
from .protocol import RunTrace, UNLABELED, assign_ids, seeding
from .spectral import ClusterBasis, GapReport, Spectrum, good_nodes, indicator

EXHAUSTIVE_MAX_LABELS = 8
EXHAUSTIVE_MAX_MAPS = 10**6


def run_streams(seed: int, runs: int) -> list[np.random.Generator]:
    """One independent generator per run index, derived from ``seed``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(runs)]


# -- dense replay ------------------------------------------------------------

def dense_evolution(g: Graph, seed_nodes: Sequence[int], matchings: Sequence[Matching]) -> np.ndarray:
    """x^(t,i) for t = 0..T as an array of shape (T+1, s, n)."""
    s = len(seed_nodes)
    out = np.zeros((len(matchings) + 1, s, g.n))
    out[0, np.arange(s), list(seed_nodes)] = 1.0
    for t, m in enumerate(matchings, start=1):
        if m.n != g.n or not m.is_valid(g):
            raise ValueError(f"round {t}: matching does not belong to this graph")
        out[t] = apply_matching(m, out[t - 1])
    return out


def dense_from_trace(g: Graph, trace: RunTrace) -> np.ndarray:
    return dense_evolution(g, [v for v, _ in trace.seeds], trace.matchings)


def equivalence_check(trace: RunTrace, dense: np.ndarray, tol: float = 1e-12) -> CheckResult:
    """Sparse final states versus the last dense round (absent entries read as 0)."""
    final = dense[-1]
    worst = 0.0
    for i, (_, sid) in enumerate(trace.seeds):
        for v in range(trace.n):
            sparse = trace.final_states[v].get(sid, 0.0)
            err = abs(sparse - final[i, v])
            worst = max(worst, err)
            if err > tol:
                return CheckResult(
                    "sparse-dense", False,
                    {"node": v, "seed": sid, "sparse": sparse, "dense": float(final[i, v]), "error": err},
                )
    return CheckResult("sparse-dense", True, {"max_error": worst, "seeds": len(trace.seeds)})


def mass_conservation_error(dense: np.ndarray) -> float:
    if dense.shape[1] == 0:
        return 0.0
    return float(np.abs(dense.sum(axis=2) - 1.0).max())


# -- convergence -------------------------------------------------------------

@dataclass
class ConvergenceTrace:
    t: np.ndarray
    dist_q: np.ndarray
    dist_q_se: np.ndarray
    bound: np.ndarray  # 2 sqrt(t (1 - lambda_k)) ||Q y0||
    bound_tight: np.ndarray  # same without the factor 2
    residual: np.ndarray  # mean ||Q_perp y^(t)||

    def write_csv(self, path: str | Path) -> None:
        rows = ["t,distQ,distQ_se,bound,residual"]
        for t, d, se, b, r in zip(self.t, self.dist_q, self.dist_q_se, self.bound, self.residual):
            rows.append(f"{t},{d:.12g},{se:.12g},{b:.12g},{r:.12g}")
        Path(path).write_text("\n".join(rows) + "\n")


def lemma3_trace(
    g: Graph,
    spec: Spectrum,
    k: int,
    start: int,
    runs: int,
    T_max: int,
    seed: int,
    variant: ProtocolVariant | None = None,
) -> ConvergenceTrace:
    """Monte Carlo E||Q chi_v - y^(t)|| for t = 0..T_max over fresh matching sequences."""
    variant = variant or Regular()
    F = spec.top(k)
    y0 = np.zeros(g.n)
    y0[start] = 1.0
    qy0 = F @ (F.T @ y0)
    dist = np.zeros((runs, T_max + 1))
    resid = np.zeros((runs, T_max + 1))
    for r, rng in enumerate(run_streams(seed, runs)):
        y = y0.copy()
        for t in range(T_max + 1):
            if t:
                y = apply_matching(sample_matching(g, variant, rng), y)
            dist[r, t] = np.linalg.norm(qy0 - y)
            resid[r, t] = np.linalg.norm(y - F @ (F.T @ y))
    ts = np.arange(T_max + 1)
    tight = np.sqrt(ts * max(1 - spec.lam(k), 0.0)) * np.linalg.norm(qy0)
    se = dist.std(axis=0, ddof=1) / math.sqrt(runs) if runs > 1 else np.zeros(T_max + 1)
    return ConvergenceTrace(
        t=ts, dist_q=dist.mean(axis=0), dist_q_se=se, bound=2 * tight, bound_tight=tight, residual=resid.mean(axis=0)
    )


def lemma5_check(
    g: Graph,
    spec: Spectrum,
    basis: ClusterBasis,
    planted: Partition,
    node: int,
    beta: float,
    runs: int,
    T: int,
    seed: int,
    ratio_cap: float = 10.0,
    C_good: float = 1.0,
    tol: float = 1e-9,
) -> CheckResult:
    """Mean ||y^(T) - chi_{S_j}|| from a start node against k E sqrt(log n log(1/beta)/(beta n))."""
    n = g.n
    cluster = int(planted.assignment[node])
    target = indicator(n, planted.members(cluster))
    dists = []
    for rng in run_streams(seed, runs):
        y = np.zeros(n)
        y[node] = 1.0
        for _ in range(T):
            y = apply_matching(sample_matching(g, Regular(), rng), y)
        dists.append(np.linalg.norm(y - target))
    mean = float(np.mean(dists))
    scale = basis.k * basis.epsilon * math.sqrt(math.log(n) * math.log(1 / beta) / (beta * n))
    is_good = bool(np.isin(node, good_nodes(basis, C_good, beta, n).good))
    return CheckResult(
        name="lemma5",
        passed=mean <= ratio_cap * scale + tol,
        details={
            "mean_dist": mean,
            "se": float(np.std(dists, ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0,
            "reference_scale": scale,
            "ratio": mean / scale if scale > 0 else math.inf if mean > tol else 0.0,
            "ratio_cap": ratio_cap,
            "good_node": is_good,
        },
    )


# -- misclassification -------------------------------------------------------

@dataclass
class MisclassificationResult:
    count: int
    mapping: dict[int, int]  # output label -> planted cluster
    unlabeled: int
    lenient_count: int
    n: int
    method: str

    @property
    def fraction(self) -> float:
        return self.count / self.n

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "fraction": float(f"{self.fraction:.12g}"),
            "unlabeled": self.unlabeled,
            "lenientCount": self.lenient_count,
            "mapping": {str(k): v for k, v in sorted(self.mapping.items())},
            "method": self.method,
        }


def _contingency(labels: np.ndarray, assignment: np.ndarray, k: int) -> tuple[list[int], np.ndarray]:
    out = sorted(set(labels.tolist()))
    index = {l: i for i, l in enumerate(out)}
    C = np.zeros((len(out), k), dtype=np.int64)
    np.add.at(C, ([index[l] for l in labels.tolist()], assignment), 1)
    return out, C


def _exhaustive(C: np.ndarray) -> tuple[int, dict[int, int]]:
    a, k = C.shape
    best, best_map = -1, {}
    if a <= k:
        for perm in itertools.permutations(range(k), a):
            val = sum(C[i, perm[i]] for i in range(a))
            if val > best:
                best, best_map = val, {i: perm[i] for i in range(a)}
    else:
        for perm in itertools.permutations(range(a), k):
            val = sum(C[perm[j], j] for j in range(k))
            if val > best:
                best, best_map = val, {perm[j]: j for j in range(k)}
    return int(best), best_map


def _greedy_refine(C: np.ndarray) -> tuple[int, dict[int, int]]:
    a, k = C.shape
    mapping: dict[int, int] = {}
    free_rows, free_cols = set(range(a)), set(range(k))
    order = sorted(((C[i, j], -i, -j) for i in range(a) for j in range(k)), reverse=True)
    for _, ni, nj in order:
        i, j = -ni, -nj
        if i in free_rows and j in free_cols:
            mapping[i] = j
            free_rows.discard(i)
            free_cols.discard(j)
    # one refinement pass: pairwise swaps, then moving a cluster to an unmatched label
    rows = sorted(mapping)
    for x, y in itertools.combinations(rows, 2):
        cx, cy = mapping[x], mapping[y]
        if C[x, cy] + C[y, cx] > C[x, cx] + C[y, cy]:
            mapping[x], mapping[y] = cy, cx
    for x in rows:
        for r in sorted(free_rows):
            if C[r, mapping[x]] > C[x, mapping[x]]:
                mapping[r] = mapping.pop(x)
                free_rows.discard(r)
                free_rows.add(x)
                break
    return int(sum(C[i, j] for i, j in mapping.items())), mapping


def _assignment(C: np.ndarray) -> tuple[int, dict[int, int]]:
    """Exact maximum-weight injective map via the Hungarian method."""
    rows, cols = linear_sum_assignment(C, maximize=True)
    mapping = {int(i): int(j) for i, j in zip(rows, cols)}
    return int(C[rows, cols].sum()), mapping


def _max_maps(a: int, k: int) -> int:
    lo, hi = min(a, k), max(a, k)
    return math.perm(hi, lo)


def misclassification(
    labels: Sequence[int] | np.ndarray,
    labeled: Sequence[bool] | np.ndarray,
    planted: Partition,
    method: str = "auto",
) -> MisclassificationResult:
    """Disagreements minimised over injective maps from output labels to clusters.

    Unlabeled nodes count as misclassified; ``lenient_count`` leaves them out.
    ``method`` is ``"exhaustive"``, ``"assignment"`` (Hungarian, also exact),
    ``"greedy"`` (greedy matching plus one refinement pass, a heuristic) or
    ``"auto"``: exhaustive while the number of maps is small, else assignment.
    """
    labels = np.asarray(labels, dtype=np.int64)
    labeled = np.asarray(labeled, dtype=bool) & (labels != UNLABELED)
    n = len(labels)
    unl = int(np.count_nonzero(~labeled))
    out_labels, C = _contingency(labels[labeled], planted.assignment[labeled], planted.k)
    if method == "auto":
        small = len(out_labels) <= EXHAUSTIVE_MAX_LABELS and _max_maps(len(out_labels), planted.k) <= EXHAUSTIVE_MAX_MAPS
        method = "exhaustive" if small else "assignment"
    if not out_labels:
        agree, idx_map = 0, {}
    elif method == "exhaustive":
        agree, idx_map = _exhaustive(C)
    elif method == "assignment":
        agree, idx_map = _assignment(C)
    elif method == "greedy":
        agree, idx_map = _greedy_refine(C)
    else:
        raise ValueError(f"unknown method {method!r}")
    wrong_labeled = int(np.count_nonzero(labeled)) - agree
    return MisclassificationResult(
        count=wrong_labeled + unl,
        mapping={out_labels[i]: int(j) for i, j in idx_map.items()},
        unlabeled=unl,
        lenient_count=wrong_labeled,
        n=n,
        method=method,
    )


# -- seeding statistics ------------------------------------------------------

def covered_clusters(seeds: Sequence[tuple[int, int]], planted: Partition) -> int:
    return len({int(planted.assignment[v]) for v, _ in seeds})


@dataclass
class CoverageEstimate:
    executions: int
    covered_fraction: float
    bound: float  # 1 - e^-3
    sigma: float  # binomial sd of the fraction at p = bound

    @property
    def passed(self) -> bool:
        return self.covered_fraction >= self.bound - 3 * self.sigma


def coverage_probability(planted: Partition, beta: float, executions: int, seed: int) -> CoverageEstimate:
    n = planted.n
    hits = 0
    for rng in run_streams(seed, executions):
        ids, _ = assign_ids(n, rng)
        sd = seeding(n, ids, beta, rng)
        hits += covered_clusters(sd.seeds, planted) == planted.k
    bound = 1 - math.exp(-3)
    return CoverageEstimate(
        executions=executions,
        covered_fraction=hits / executions,
        bound=bound,
        sigma=math.sqrt(bound * (1 - bound) / executions),
    )


# -- report ------------------------------------------------------------------

def _f(x: float) -> float:
    return float(f"{x:.12g}")


def theorem_report(
    trace: RunTrace,
    planted: Partition,
    basis: ClusterBasis | None = None,
    gap: GapReport | None = None,
    C_good: float = 1.0,
) -> dict:
    """Misclassification, message complexity, seed coverage and seed quality for one run."""
    mis = misclassification(trace.labels, trace.labeled, planted)
    k = planted.k
    budget = trace.T * trace.n * trace.seed_trials
    klogk = k * math.log(k) if k > 1 else 1.0
    report = {
        "n": trace.n,
        "k": k,
        "T": trace.T,
        "config": trace.config.to_json(),
        "misclassification": mis.to_json(),
        "messages": {
            "wordsExchanged": trace.words_exchanged,
            "countingBound": budget,
            "ratioToCountingBound": _f(trace.words_exchanged / budget) if budget else 0.0,
            "withinCountingBound": trace.words_exchanged <= budget,
            "perTnKlogK": _f(trace.words_exchanged / (trace.T * trace.n * klogk)) if trace.T else 0.0,
        },
        "seeds": {
            "count": len(trace.seeds),
            "seedTrials": trace.seed_trials,
            "clustersCovered": covered_clusters(trace.seeds, planted),
            "allCovered": covered_clusters(trace.seeds, planted) == k,
        },
        "unlabeledCount": trace.unlabeled_count,
    }
    if basis is not None:
        good = set(good_nodes(basis, C_good, trace.config.beta, trace.n).good.tolist())
        report["seeds"]["good"] = [int(v in good) for v, _ in trace.seeds]
        report["epsilonObserved"] = _f(basis.epsilon)
    if gap is not None:
        report["gap"] = gap.to_json()
    return report
