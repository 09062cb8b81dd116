"""Command-line entry point: generate | spectra | run | verify | sweep.

Exit codes: 0 success, 1 verification failure, 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .analysis import theorem_report
from .config import ConfigError, ExperimentConfig
from .graph import (
    Graph,
    GraphError,
    Partition,
    lift_to_regular,
    make_clustered_regular,
    read_edge_list,
    read_partition,
    validate,
    write_edge_list,
    write_partition,
)
from .matching import read_trace
from .protocol import replay_run, run_full
from .spectral import (
    SpectralError,
    cluster_basis,
    gap_report,
    good_nodes,
    graph_spectrum,
    write_basis_csv,
    write_spectrum_csv,
)
from .suites import SUITES

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SWEEP_AXES = {"cross_swaps": "cross_swaps", "crossSwaps": "cross_swaps", "T": "T_override", "n": "n", "C_T": "C_T"}


def _dump(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(v: Any) -> Any:
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(f"{float(v):.12g}")
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _round_floats(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.12g}") if math.isfinite(x) else str(x)
    return obj


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# -- config plumbing ---------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' config file; flags override it")
    group = p.add_argument_group("experiment config")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        group.add_argument(flag, dest=f"cfg_{f.name}", default=None, metavar=f.name, help=f"default: {f.default}")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {f.name: getattr(args, f"cfg_{f.name}") for f in fields(ExperimentConfig)}
    return cfg.override({k: v for k, v in overrides.items() if v is not None})


def _provenance(cfg: ExperimentConfig) -> dict[str, Any]:
    """Config as embedded in artifacts; the output directory is left out so
    that reruns into different directories stay byte-identical."""
    d = cfg.to_json()
    d.pop("out")
    return d


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_inputs(args: argparse.Namespace, cfg: ExperimentConfig) -> tuple[Graph, Partition]:
    g = read_edge_list(args.graph)
    p = read_partition(args.partition)
    if p.n != g.n:
        raise GraphError(f"partition has {p.n} nodes, graph has {g.n}")
    if cfg.D is not None:
        g = lift_to_regular(g, cfg.D)
    return g, p


def _generator_rng(cfg: ExperimentConfig, *tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.master_seed, *tag]))


# -- subcommands -------------------------------------------------------------

def cmd_generate(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    g, p = make_clustered_regular(cfg.n, cfg.k, cfg.d, cfg.cross_swaps, _generator_rng(cfg))
    out = _out_dir(cfg)
    write_edge_list(g, out / "graph.txt")
    write_partition(p, out / "partition.txt")
    rep = validate(g)
    _dump(
        {
            "generator": "clustered-regular",
            "masterSeed": cfg.master_seed,
            "config": _provenance(cfg),
            "m": g.m,
            "crossEdges": int(np.count_nonzero(p.assignment[g.edges[:, 0]] != p.assignment[g.edges[:, 1]])),
            "valid": rep.ok,
        },
        out / "provenance.json",
    )
    print(f"wrote {out / 'graph.txt'} (n={g.n}, m={g.m}) and {out / 'partition.txt'}")
    return EXIT_OK


def cmd_spectra(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    g, p = _load_inputs(args, cfg)
    out = _out_dir(cfg)
    spec = graph_spectrum(g)
    write_spectrum_csv(spec, out / "spectrum.csv")
    try:
        gap = gap_report(g, p, spec, cfg.volume_convention(), cfg.C_T, cfg.well_clustered_constant)
        payload: dict[str, Any] = gap.to_json()
        print(f"upsilon={_fmt(gap.upsilon)} gapScore={_fmt(gap.gap_score)} T={gap.T}")
    except SpectralError as exc:
        payload = {"error": {"type": "SpectralError", "message": str(exc)}}
        print(f"gap undefined: {exc}")
    payload["config"] = _provenance(cfg)
    _dump(_round_floats(payload), out / "gap.json")
    try:
        basis = cluster_basis(spec, p)
        good = good_nodes(basis, cfg.C_good, cfg.beta, g.n)
        write_basis_csv(basis, good, out / "basis.csv")
        print(f"epsilon={_fmt(basis.epsilon)} good={len(good.good)}/{g.n}")
    except SpectralError as exc:
        print(f"cluster basis undefined: {exc}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    g, p = _load_inputs(args, cfg)
    out = _out_dir(cfg)
    pcfg = cfg.protocol()
    spec = graph_spectrum(g)
    try:
        gap = gap_report(g, p, spec, cfg.volume_convention(), cfg.C_T, cfg.well_clustered_constant)
    except SpectralError:
        gap = None
    try:
        basis = cluster_basis(spec, p)
    except SpectralError:
        basis = None

    if args.replay:
        trace_path = Path(args.replay)
        trace_json = json.loads(trace_path.read_text())
        matchings = read_trace(args.replay_matchings or trace_path.with_suffix(".matchings"), g.n)
        trace = replay_run(g, trace_json, matchings, pcfg)
    else:
        if cfg.T_override is not None:
            T = cfg.T_override
        elif gap is not None:
            T = gap.T
        else:
            raise ConfigError("the gap is undefined for this graph; set --T-override")
        trace = run_full(g, p, pcfg, T=T)

    trace.write(out / "run")
    report = theorem_report(trace, p, basis=basis, gap=gap, C_good=cfg.C_good)
    report["experiment"] = _provenance(cfg)
    _dump(_round_floats(report), out / "report.json")
    mis = report["misclassification"]
    print(
        f"T={trace.T} seeds={len(trace.seeds)} misclassification={_fmt(mis['fraction'])} "
        f"unlabeled={trace.unlabeled_count} words={trace.words_exchanged}"
    )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    suite = SUITES[args.suite]
    results = suite(cfg, corrupt=True) if args.suite == "sparse-dense" and args.corrupt else suite(cfg)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    out = _out_dir(cfg)
    _dump(
        _round_floats(
            {
                "suite": args.suite,
                "passed": ok,
                "config": _provenance(cfg),
                "checks": [{"name": r.name, "passed": bool(r.passed), "details": r.details} for r in results],
            }
        ),
        out / f"verify-{args.suite}.json",
    )
    print(f"{args.suite}: {'PASS' if ok else 'FAIL'} ({sum(r.passed for r in results)}/{len(results)})")
    return EXIT_OK if ok else EXIT_FAIL


def sweep_point(cfg: ExperimentConfig, trial: int) -> dict[str, Any]:
    """One (axis value, trial) cell. Seeds depend on (masterSeed, trial) only,
    so every axis value sees the same graph and protocol randomness."""
    from .analysis import misclassification

    g_rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, trial, 0]))
    proto_seed = int(np.random.SeedSequence([cfg.master_seed, trial, 1]).generate_state(1)[0])
    g, p = make_clustered_regular(cfg.n, cfg.k, cfg.d, cfg.cross_swaps, g_rng)
    if cfg.D is not None:
        g = lift_to_regular(g, cfg.D)
    spec = graph_spectrum(g)
    try:
        gap = gap_report(g, p, spec, cfg.volume_convention(), cfg.C_T, cfg.well_clustered_constant)
        ups = gap.upsilon
        T = cfg.T_override if cfg.T_override is not None else gap.T
    except SpectralError:
        if cfg.T_override is None:
            raise
        ups, T = math.nan, cfg.T_override
    trace = run_full(g, p, cfg.protocol(rng_seed=proto_seed), T=T)
    mis = misclassification(trace.labels, trace.labeled, p)
    return {"trial": trial, "misclassification": mis.fraction, "words": trace.words_exchanged, "upsilon": ups, "T": T}


def _sweep_task(task: tuple[ExperimentConfig, Any, int]) -> dict[str, Any]:
    cfg, value, trial = task
    row = sweep_point(cfg, trial)
    row["value"] = value
    return row


def _parse_axis_values(axis: str, text: str) -> list[Any]:
    field = SWEEP_AXES[axis]
    cast = float if field == "C_T" else int
    try:
        values = [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"malformed values for axis {axis}: {text!r}") from None
    if not values:
        raise ConfigError("sweep needs at least one value")
    return values


def cmd_sweep(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    if args.axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {args.axis!r}; choose from {', '.join(SWEEP_AXES)}")
    field = SWEEP_AXES[args.axis]
    values = _parse_axis_values(args.axis, args.values)
    tasks = [(cfg.override({field: v}), v, trial) for v in values for trial in range(cfg.trials)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    out = _out_dir(cfg)
    lines = ["value,trial,misclassification,words,upsilon,T"]
    for r in rows:
        lines.append(f"{r['value']},{r['trial']},{_fmt(r['misclassification'])},{r['words']},{_fmt(r['upsilon'])},{r['T']}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    _dump({"axis": field, "values": values, "config": _provenance(cfg)}, out / "sweep.json")
    for v in values:
        med = float(np.median([r["misclassification"] for r in rows if r["value"] == v]))
        print(f"{args.axis}={v}: median misclassification {_fmt(med)}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbcluster", description="Distributed graph clustering by random-matching load balancing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a clustered regular graph")
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    for name, func, help_ in (
        ("spectra", cmd_spectra, "spectrum, gap report and cluster basis"),
        ("run", cmd_run, "run the protocol and write a theorem report"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("graph", help="edge-list file")
        p.add_argument("partition", help="partition file")
        _add_config_flags(p)
        p.set_defaults(func=func)
        if name == "run":
            p.add_argument("--replay", help="trace JSON from an earlier run to re-execute")
            p.add_argument("--replay-matchings", help="matching trace (default: next to the trace JSON)")

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--corrupt", action="store_true", help="sparse-dense only: perturb one suffix (negative control)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="vary one parameter over a list of values")
    p.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return args.func(args, cfg)
    except (ConfigError, GraphError, SpectralError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
