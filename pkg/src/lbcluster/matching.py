"""Random matchings for load balancing and exact/statistical oracles for their mean.

One round: every node is active with probability 1/2, every active node
proposes to a uniformly random neighbour, and a non-active node that receives
exactly one proposal is matched with its proposer. Matched nodes average
their loads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .checks import CheckResult
from .graph import Graph, GraphError
from .spectral import random_walk_matrix

ENUM_MAX_N = 8
ENUM_MAX_DEGREE = 3
ENUM_MAX_TERMS = 10**7


@dataclass(frozen=True)
class Regular:
    """The protocol as stated for d-regular graphs."""

    def describe(self) -> str:
        return "regular"


@dataclass(frozen=True)
class AlmostRegularEmulation:
    """Runs the protocol on the lift G*: an active node picks one of D slots,
    ``d_v`` of which are its real neighbours; a self-slot means no proposal."""

    D: int

    def describe(self) -> str:
        return f"emulate-D{self.D}"


ProtocolVariant = Regular | AlmostRegularEmulation


def parse_variant(text: str, D: int | None = None) -> ProtocolVariant:
    if text == "regular":
        return Regular()
    if text.startswith("emulate"):
        tail = text[len("emulate"):].lstrip("-:D")
        D = int(tail) if tail else D
        if D is None:
            raise ValueError("emulation variant needs D")
        return AlmostRegularEmulation(D)
    raise ValueError(f"unknown protocol variant {text!r}")


def _check_variant(g: Graph, variant: ProtocolVariant) -> None:
    if isinstance(variant, AlmostRegularEmulation) and variant.D < g.d_max:
        raise GraphError(f"emulation needs D >= d_max={g.d_max}, got D={variant.D}")


@dataclass(frozen=True, eq=False)
class Matching:
    n: int
    pairs: tuple[tuple[int, int], ...]

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]]) -> "Matching":
        return cls(n, tuple(sorted((min(u, v), max(u, v)) for u, v in pairs)))

    @property
    def matched(self) -> np.ndarray:
        flag = np.zeros(self.n, dtype=bool)
        for u, v in self.pairs:
            flag[u] = flag[v] = True
        return flag

    def partner(self) -> np.ndarray:
        """partner[v] is v's match, or v itself when unmatched."""
        out = np.arange(self.n)
        for u, v in self.pairs:
            out[u], out[v] = v, u
        return out

    def is_valid(self, g: Graph) -> bool:
        seen: set[int] = set()
        for u, v in self.pairs:
            if u == v or u in seen or v in seen or not g.has_edge(u, v):
                return False
            seen.update((u, v))
        return True

    def matrix(self) -> np.ndarray:
        M = np.eye(self.n)
        for u, v in self.pairs:
            M[u, u] = M[v, v] = M[u, v] = M[v, u] = 0.5
        return M

    def __len__(self) -> int:
        return len(self.pairs)


def sample_matching(g: Graph, variant: ProtocolVariant, rng: np.random.Generator) -> Matching:
    _check_variant(g, variant)
    n = g.n
    offsets, targets = g.csr
    deg = g.degree
    active = rng.random(n) < 0.5
    pick = rng.random(n)
    slots = deg if isinstance(variant, Regular) else np.full(n, variant.D)
    choice = np.floor(pick * slots).astype(np.int64)
    proposes = active & (choice < deg)
    proposers = np.flatnonzero(proposes)
    chosen = targets[offsets[proposers] + choice[proposers]]
    to_passive = ~active[chosen]
    proposers, chosen = proposers[to_passive], chosen[to_passive]
    hits = np.bincount(chosen, minlength=n)
    keep = hits[chosen] == 1
    return Matching.from_pairs(n, zip(proposers[keep].tolist(), chosen[keep].tolist()))


def dbar(d: int) -> float:
    """(1 - 1/(2d))^(d-1)."""
    if d < 1:
        raise ValueError("dbar needs d >= 1")
    return (1 - 1 / (2 * d)) ** (d - 1)


def dbar_exact(d: int) -> Fraction:
    if d < 1:
        raise ValueError("dbar needs d >= 1")
    return (1 - Fraction(1, 2 * d)) ** (d - 1)


def edge_inclusion_probability(d: int) -> float:
    """Probability that a fixed edge of a d-regular graph is matched in a round."""
    return dbar(d) / (2 * d)


def apply_matching(m: Matching, loads: np.ndarray) -> np.ndarray:
    """Average loads across matched pairs; the node axis is the last one.

    A 2-d array of shape (s, n) is treated as s load vectors balanced by the
    same matching.
    """
    x = np.asarray(loads, dtype=float)
    if x.shape[-1] != m.n:
        raise ValueError(f"load dimension {x.shape[-1]} does not match n={m.n}")
    out = x.copy()
    if m.pairs:
        u, v = np.array(m.pairs).T
        avg = (x[..., u] + x[..., v]) / 2
        out[..., u] = avg
        out[..., v] = avg
    return out


def _node_options(g: Graph, variant: ProtocolVariant, v: int) -> list[tuple[int | None, Fraction]]:
    nbrs = g.neighbors(v).tolist()
    if isinstance(variant, Regular):
        if not nbrs:
            return [(None, Fraction(1))]
        return [(w, Fraction(1, len(nbrs))) for w in nbrs]
    D = variant.D
    opts: list[tuple[int | None, Fraction]] = [(w, Fraction(1, D)) for w in nbrs]
    if D > len(nbrs):
        opts.append((None, Fraction(D - len(nbrs), D)))
    return opts


def matching_distribution(g: Graph, variant: ProtocolVariant) -> dict[tuple[tuple[int, int], ...], Fraction]:
    """Exact law of one round's matching, by enumerating all activation
    patterns and proposal choices."""
    _check_variant(g, variant)
    if g.n > ENUM_MAX_N or g.d_max > ENUM_MAX_DEGREE:
        raise GraphError(f"enumeration limited to n <= {ENUM_MAX_N}, d <= {ENUM_MAX_DEGREE}")
    options = [_node_options(g, variant, v) for v in range(g.n)]
    terms = math.prod(1 + len(o) for o in options)
    if terms > ENUM_MAX_TERMS:
        raise GraphError(f"enumeration needs {terms} terms (> {ENUM_MAX_TERMS})")

    dist: dict[tuple[tuple[int, int], ...], Fraction] = {}
    half = Fraction(1, 2)

    def rec(v: int, active: list[bool], proposals: list[tuple[int, int]], prob: Fraction) -> None:
        if v == g.n:
            hits: dict[int, list[int]] = {}
            for u, w in proposals:
                if not active[w]:
                    hits.setdefault(w, []).append(u)
            key = tuple(sorted((min(w, us[0]), max(w, us[0])) for w, us in hits.items() if len(us) == 1))
            dist[key] = dist.get(key, Fraction(0)) + prob
            return
        active.append(False)
        rec(v + 1, active, proposals, prob * half)
        active[-1] = True
        for w, pw in options[v]:
            if w is None:
                rec(v + 1, active, proposals, prob * half * pw)
            else:
                proposals.append((v, w))
                rec(v + 1, active, proposals, prob * half * pw)
                proposals.pop()
        active.pop()

    rec(0, [], [], Fraction(1))
    return dist


def enumerate_expected_matrix(g: Graph, variant: ProtocolVariant | None = None) -> np.ndarray:
    """E[M] computed exactly in rational arithmetic, returned as floats."""
    variant = variant or Regular()
    dist = matching_distribution(g, variant)
    n = g.n
    acc = [[Fraction(0)] * n for _ in range(n)]
    for pairs, prob in dist.items():
        matched = set()
        for u, v in pairs:
            acc[u][v] += prob / 2
            acc[v][u] += prob / 2
            acc[u][u] += prob / 2
            acc[v][v] += prob / 2
            matched.update((u, v))
        for w in range(n):
            if w not in matched:
                acc[w][w] += prob
    return np.array([[float(x) for x in row] for row in acc])


def lemma1_formula(g: Graph) -> np.ndarray:
    """(1 - dbar/4) I + (dbar/4) P for a (lifted-)regular graph."""
    P = random_walk_matrix(g)
    d = int(g.lifted_degree()[0])
    db = dbar(d)
    return (1 - db / 4) * np.eye(g.n) + (db / 4) * P


def monte_carlo_expected_matrix(
    g: Graph, variant: ProtocolVariant, trials: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical mean of sampled matching matrices and its per-entry standard error.

    Each entry of M is 1/2 times an indicator (off-diagonal) or 1 minus
    that (diagonal), so it suffices to count matched pairs and nodes.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = g.n
    pair_hits = np.zeros((n, n))
    node_hits = np.zeros(n)
    for _ in range(trials):
        m = sample_matching(g, variant, rng)
        if m.pairs:
            u, v = np.array(m.pairs).T
            pair_hits[u, v] += 1
            pair_hits[v, u] += 1
            node_hits[u] += 1
            node_hits[v] += 1
    freq = pair_hits / trials
    node_freq = node_hits / trials
    mean = 0.5 * freq
    mean[np.diag_indices(n)] = 1 - 0.5 * node_freq
    p = freq.copy()
    p[np.diag_indices(n)] = node_freq
    if trials > 1:
        var = 0.25 * p * (1 - p) * trials / (trials - 1)
        se = np.sqrt(var / trials)
    else:
        se = np.zeros_like(mean)
    return mean, se


def expected_sandwich(g: Graph, P_power: np.ndarray, variant: ProtocolVariant | None = None) -> np.ndarray:
    """E[M X M] for a fixed matrix X, by exact enumeration of the matching law."""
    variant = variant or Regular()
    dist = matching_distribution(g, variant)
    out = np.zeros_like(P_power, dtype=float)
    for pairs, prob in dist.items():
        M = Matching(g.n, pairs).matrix()
        out += float(prob) * (M @ P_power @ M)
    return out


def check_domination(g: Graph, ell: int, variant: ProtocolVariant | None = None, tol: float = 1e-10) -> CheckResult:
    """E[M P^l M] <= (1 - dbar/8) P^l + (dbar/8) P^(l+1) in the PSD order."""
    from .spectral import eigendecompose

    if ell < 0:
        raise ValueError("walk length must be >= 0")
    variant = variant or Regular()
    P = random_walk_matrix(g)
    d = int(g.lifted_degree()[0])
    db = dbar(d)
    Pl = np.linalg.matrix_power(P, ell)
    expect = expected_sandwich(g, Pl, variant)
    bound = (1 - db / 8) * Pl + (db / 8) * (Pl @ P)
    diff = bound - expect
    min_eig = float(eigendecompose(0.5 * (diff + diff.T), method="jacobi").eigenvalues[-1])
    return CheckResult(
        name=f"domination n={g.n} l={ell}",
        passed=min_eig >= -tol,
        details={"min_eigenvalue": min_eig, "dbar": db},
    )


# -- matching traces ---------------------------------------------------------

def format_trace(matchings: Sequence[Matching]) -> str:
    return "".join(" ".join(f"{u}-{v}" for u, v in m.pairs) + "\n" for m in matchings)


def parse_trace(text: str, n: int) -> list[Matching]:
    out = []
    for line in text.splitlines():
        pairs = []
        for tok in line.split():
            u, _, v = tok.partition("-")
            pairs.append((int(u), int(v)))
        out.append(Matching.from_pairs(n, pairs))
    return out


def write_trace(matchings: Sequence[Matching], path: str | Path) -> None:
    Path(path).write_text(format_trace(matchings))


def read_trace(path: str | Path, n: int) -> list[Matching]:
    return parse_trace(Path(path).read_text(), n)
