"""Node-local clustering protocol: ids, seeding, sparse averaging and query."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import Graph, Partition, VolumeConvention
from .matching import Matching, ProtocolVariant, Regular, format_trace, sample_matching

NodeState = dict[int, float]

UNLABELED = -1


@dataclass
class ProtocolConfig:
    beta: float = 0.5
    C_T: float = 5.0
    T_override: int | None = None
    rng_seed: int = 0
    variant: ProtocolVariant = field(default_factory=Regular)
    convention: VolumeConvention = VolumeConvention.PAPER_LITERAL

    def __post_init__(self) -> None:
        if not 0 < self.beta <= 0.5:
            raise ValueError(f"beta={self.beta} must lie in (0, 1/2]")
        if self.C_T <= 0:
            raise ValueError("C_T must be positive")
        if self.T_override is not None and self.T_override < 0:
            raise ValueError("T_override must be >= 0")

    @staticmethod
    def id_space(n: int) -> int:
        return n**3

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "C_T": self.C_T,
            "T_override": self.T_override,
            "rng_seed": self.rng_seed,
            "variant": self.variant.describe(),
            "convention": self.convention.value,
        }


def seed_trials(beta: float) -> int:
    """ceil((3/beta) ln(1/beta)) Bernoulli trials per node."""
    return math.ceil(3 / beta * math.log(1 / beta))


def assign_ids(n: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Uniform ids in [1, n^3], redrawing collisions; returns (ids, redraws)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    high = n**3
    ids = rng.integers(1, high + 1, size=n, dtype=np.int64)
    seen: set[int] = set()
    redraws = 0
    for v in range(n):
        x = int(ids[v])
        while x in seen:
            redraws += 1
            x = int(rng.integers(1, high + 1))
        ids[v] = x
        seen.add(x)
    return ids, redraws


@dataclass
class Seeding:
    seeds: list[tuple[int, int]]  # (node, id), ascending id
    states: list[NodeState]
    trials: int
    activations: int  # successful trials, counted with multiplicity


def seeding(n: int, ids: np.ndarray, beta: float, rng: np.random.Generator) -> Seeding:
    trials = seed_trials(beta)
    hits = rng.random((n, trials)) < 1.0 / n
    per_node = hits.sum(axis=1)
    active = np.flatnonzero(per_node > 0)
    states: list[NodeState] = [{} for _ in range(n)]
    for v in active.tolist():
        states[v] = {int(ids[v]): 1.0}
    seeds = sorted(((int(v), int(ids[v])) for v in active), key=lambda t: t[1])
    return Seeding(seeds=seeds, states=states, trials=trials, activations=int(per_node.sum()))


def merge_states(a: NodeState, b: NodeState) -> tuple[NodeState, NodeState]:
    merged: NodeState = {}
    for w, x in a.items():
        y = b.get(w)
        merged[w] = x / 2 if y is None else (x + y) / 2
    for w, y in b.items():
        if w not in a:
            merged[w] = y / 2
    return merged, dict(merged)


def averaging_round(states: list[NodeState], m: Matching) -> tuple[list[NodeState], int]:
    """One round of pairwise merges; returns new states and words sent.

    Each endpoint sends its whole state, one word per (prefix, suffix) entry.
    """
    out = list(states)
    words = 0
    for u, v in m.pairs:
        words += len(states[u]) + len(states[v])
        out[u], out[v] = merge_states(states[u], states[v])
    return out, words


def run_averaging(
    g: Graph, states: list[NodeState], T: int, variant: ProtocolVariant, rng: np.random.Generator
) -> tuple[list[NodeState], list[Matching], int]:
    if T < 0:
        raise ValueError("T must be >= 0")
    matchings = []
    words = 0
    for _ in range(T):
        m = sample_matching(g, variant, rng)
        states, w = averaging_round(states, m)
        matchings.append(m)
        words += w
    return states, matchings, words


def replay_averaging(states: list[NodeState], matchings: Sequence[Matching]) -> tuple[list[NodeState], int]:
    words = 0
    for m in matchings:
        states, w = averaging_round(states, m)
        words += w
    return states, words


def query_threshold(beta: float, n: int) -> float:
    return 1.0 / (math.sqrt(2 * beta) * n)


def query(state: NodeState, beta: float, n: int) -> tuple[int, bool]:
    """(label, labeled). Without a qualifying entry the label falls back to the
    smallest prefix held, or UNLABELED for an empty state."""
    thr = query_threshold(beta, n)
    qualifying = [w for w, x in state.items() if x >= thr]
    if qualifying:
        return min(qualifying), True
    return (min(state) if state else UNLABELED), False


@dataclass
class RunTrace:
    config: ProtocolConfig
    n: int
    T: int
    ids: np.ndarray
    id_redraws: int
    seeds: list[tuple[int, int]]
    seed_trials: int
    matchings: list[Matching]
    words_exchanged: int
    final_states: list[NodeState]
    labels: np.ndarray
    labeled: np.ndarray

    @property
    def unlabeled_count(self) -> int:
        return int(np.count_nonzero(~self.labeled))

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "n": self.n,
            "T": self.T,
            "ids": self.ids.tolist(),
            "idRedraws": self.id_redraws,
            "seeds": [list(s) for s in self.seeds],
            "seedTrials": self.seed_trials,
            "wordsExchanged": self.words_exchanged,
            "labels": self.labels.tolist(),
            "labeled": self.labeled.astype(int).tolist(),
            "unlabeledCount": self.unlabeled_count,
        }

    def write(self, stem: str | Path) -> dict[str, Path]:
        """Writes ``<stem>.json``, ``<stem>.matchings`` and ``<stem>.states.csv``."""
        stem = Path(stem)
        paths = {
            "trace": stem.with_suffix(".json"),
            "matchings": stem.with_suffix(".matchings"),
            "states": stem.with_suffix(".states.csv"),
        }
        paths["trace"].write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")
        paths["matchings"].write_text(format_trace(self.matchings))
        rows = ["node,prefix,suffix"]
        for v, st in enumerate(self.final_states):
            rows += [f"{v},{w},{x:.12g}" for w, x in sorted(st.items())]
        paths["states"].write_text("\n".join(rows) + "\n")
        return paths


def label_all(states: Sequence[NodeState], beta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    res = [query(st, beta, n) for st in states]
    return np.array([r[0] for r in res], dtype=np.int64), np.array([r[1] for r in res], dtype=bool)


def resolve_rounds(g: Graph, planted: Partition, cfg: ProtocolConfig) -> int:
    if cfg.T_override is not None:
        return cfg.T_override
    from .spectral import gap_report, graph_spectrum

    return gap_report(g, planted, graph_spectrum(g), cfg.convention, C_T=cfg.C_T).T


def run_full(g: Graph, planted: Partition, cfg: ProtocolConfig, T: int | None = None) -> RunTrace:
    """ids -> seeding -> T averaging rounds -> query, all from ``cfg.rng_seed``.

    ``T`` defaults to ``cfg.T_override`` or, failing that, the round count
    derived from the spectral gap of ``g`` with respect to ``planted``.
    """
    if T is None:
        T = resolve_rounds(g, planted, cfg)
    rng = np.random.default_rng(cfg.rng_seed)
    ids, redraws = assign_ids(g.n, rng)
    seed = seeding(g.n, ids, cfg.beta, rng)
    states, matchings, words = run_averaging(g, seed.states, T, cfg.variant, rng)
    labels, labeled = label_all(states, cfg.beta, g.n)
    return RunTrace(
        config=cfg,
        n=g.n,
        T=T,
        ids=ids,
        id_redraws=redraws,
        seeds=seed.seeds,
        seed_trials=seed.trials,
        matchings=matchings,
        words_exchanged=words,
        final_states=states,
        labels=labels,
        labeled=labeled,
    )


def replay_run(g: Graph, trace_json: dict, matchings: Sequence[Matching], cfg: ProtocolConfig) -> RunTrace:
    """Re-executes averaging and query from a recorded trace (ids, seeds, matchings)."""
    n = trace_json["n"]
    if n != g.n:
        raise ValueError(f"trace is for n={n}, graph has n={g.n}")
    for t, m in enumerate(matchings):
        if not m.is_valid(g):
            raise ValueError(f"round {t} matching is not a matching of this graph")
    ids = np.array(trace_json["ids"], dtype=np.int64)
    seeds = [(int(v), int(i)) for v, i in trace_json["seeds"]]
    states: list[NodeState] = [{} for _ in range(n)]
    for v, i in seeds:
        states[v] = {i: 1.0}
    states, words = replay_averaging(states, matchings)
    labels, labeled = label_all(states, cfg.beta, n)
    return RunTrace(
        config=cfg,
        n=n,
        T=len(matchings),
        ids=ids,
        id_redraws=int(trace_json.get("idRedraws", 0)),
        seeds=seeds,
        seed_trials=trace_json.get("seedTrials", seed_trials(cfg.beta)),
        matchings=list(matchings),
        words_exchanged=words,
        final_states=states,
        labels=labels,
        labeled=labeled,
    )
