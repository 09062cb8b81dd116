"""Named verification suites run by ``lbcluster verify``."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import fixtures
from .analysis import (
    coverage_probability,
    dense_from_trace,
    equivalence_check,
    lemma3_trace,
    lemma5_check,
    mass_conservation_error,
)
from .checks import CheckResult
from .config import ExperimentConfig
from .graph import VolumeConvention, brute_force_rho, make_clustered_regular
from .matching import (
    AlmostRegularEmulation,
    Regular,
    check_domination,
    enumerate_expected_matrix,
    lemma1_formula,
    matching_distribution,
    monte_carlo_expected_matrix,
)
from .protocol import run_full
from .spectral import cheeger_check, cluster_basis, gap_report, good_nodes, graph_spectrum


def _rng(cfg: ExperimentConfig, *tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.master_seed, *tag]))


def _fixture_graph(cfg: ExperimentConfig, tag: int):
    return make_clustered_regular(cfg.n, cfg.k, cfg.d, cfg.cross_swaps, _rng(cfg, tag))


def lemma1_exact(cfg: ExperimentConfig) -> list[CheckResult]:
    out = []
    for name in ("K2", "K3", "C4"):
        g = fixtures.enumeration_fixtures()[name]
        err = float(np.abs(enumerate_expected_matrix(g) - lemma1_formula(g)).max())
        out.append(CheckResult(f"lemma1-exact {name}", err <= 1e-12, {"max_abs_error": err}))
        if name in ("K2", "K3"):
            d = g.d_max
            same = matching_distribution(g, Regular()) == matching_distribution(g, AlmostRegularEmulation(d))
            out.append(CheckResult(f"emulation D=d equals regular {name}", same))
    return out


def lemma1_mc(cfg: ExperimentConfig, trials: int = 100_000) -> list[CheckResult]:
    g, _ = make_clustered_regular(100, 1, 3, 0, _rng(cfg, 11))
    mean, se = monte_carlo_expected_matrix(g, Regular(), trials, _rng(cfg, 12))
    formula = lemma1_formula(g)
    ok = np.abs(mean - formula) <= 4 * se
    frac = float(ok.mean())
    return [CheckResult("lemma1-mc n=100 d=3", frac >= 0.99, {"fraction_within_4se": frac, "trials": trials})]


def eq4_domination(cfg: ExperimentConfig) -> list[CheckResult]:
    out = []
    for name, g in fixtures.enumeration_fixtures().items():
        for ell in (0, 1, 2):
            r = check_domination(g, ell)
            r.name = f"eq4 {name} l={ell}"
            out.append(r)
    return out


def cheeger(cfg: ExperimentConfig) -> list[CheckResult]:
    out = []
    for name, g in fixtures.cheeger_fixtures().items():
        spec = graph_spectrum(g, method="jacobi")
        for k in (2, 3):
            if k > g.n:
                continue
            for conv in VolumeConvention:
                rho, _ = brute_force_rho(g, k, conv)
                r = cheeger_check(spec, k, rho)
                r.name = f"cheeger {name} k={k} {conv.value}"
                out.append(r)
    return out


def sparse_dense(cfg: ExperimentConfig, corrupt: bool = False) -> list[CheckResult]:
    g, p = _fixture_graph(cfg, 21)
    pcfg = cfg.protocol()
    trace = run_full(g, p, pcfg)
    dense = dense_from_trace(g, trace)
    if corrupt and trace.seeds:
        v = next(v for v, st in enumerate(trace.final_states) if st)
        sid = next(iter(trace.final_states[v]))
        trace.final_states[v] = {**trace.final_states[v], sid: trace.final_states[v][sid] + 1e-6}
    eq = equivalence_check(trace, dense, tol=1e-12)
    mass = mass_conservation_error(dense)
    return [eq, CheckResult("dense mass conservation", mass <= 1e-12, {"max_error": mass, "T": trace.T})]


def _good_start(cfg: ExperimentConfig):
    g, p = _fixture_graph(cfg, 31)
    spec = graph_spectrum(g)
    gap = gap_report(g, p, spec, cfg.volume_convention(), C_T=cfg.C_T)
    basis = cluster_basis(spec, p)
    good = good_nodes(basis, cfg.C_good, cfg.beta, g.n).good
    return g, p, spec, gap, basis, good


def lemma3(cfg: ExperimentConfig) -> list[CheckResult]:
    g, p, spec, gap, _, good = _good_start(cfg)
    if not len(good):
        return [CheckResult("lemma3", False, {"reason": "no good node"})]
    T = cfg.T_override or gap.T
    tr = lemma3_trace(g, spec, p.k, int(good[0]), cfg.runs, T, cfg.master_seed)
    mean, se, bound = tr.dist_q[T], tr.dist_q_se[T], tr.bound[T]
    return [CheckResult("lemma3 at t=T", mean <= bound + 3 * se, {"mean": mean, "se": se, "bound": bound, "T": T})]


def lemma5(cfg: ExperimentConfig) -> list[CheckResult]:
    g, p, spec, gap, basis, good = _good_start(cfg)
    if not len(good):
        return [CheckResult("lemma5", False, {"reason": "no good node"})]
    T = cfg.T_override or gap.T
    return [lemma5_check(g, spec, basis, p, int(good[0]), cfg.beta, cfg.runs, T, cfg.master_seed, cfg.ratio_cap, cfg.C_good)]


def coverage(cfg: ExperimentConfig, executions: int = 1000) -> list[CheckResult]:
    _, p = _fixture_graph(cfg, 41)
    est = coverage_probability(p, cfg.beta, executions, cfg.master_seed)
    return [
        CheckResult(
            "seed coverage",
            est.passed,
            {"fraction": est.covered_fraction, "bound": est.bound, "sigma": est.sigma},
        )
    ]


SUITES: dict[str, Callable[..., list[CheckResult]]] = {
    "lemma1-exact": lemma1_exact,
    "lemma1-mc": lemma1_mc,
    "eq4-domination": eq4_domination,
    "cheeger": cheeger,
    "sparse-dense": sparse_dense,
    "lemma3": lemma3,
    "lemma5": lemma5,
    "coverage-probability": coverage,
}
