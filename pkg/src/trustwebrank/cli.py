"""Command-line entry point.

Subcommands: ``simulate``, ``trust``, ``evaluate``, ``synth``, ``demo-naive``.
Every subcommand accepts ``--seed``, ``--beta``, ``--config``, ``--out`` and
``--format``. Parameters are resolved as defaults < config file < flags.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime failure;
failures print a single ``trustwebrank: error: kind=... message=...`` line.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import dataset as dsmod
from . import metric
from .evaluate import EvalConfig, Evaluator
from .graph import TrustGraph, load_edgelist
from .simulate import SWEEP_COLUMNS, SimulationConfig, sweep, sweep_rows

log = logging.getLogger("trustwebrank")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# keys accepted in --config files, and the parser dest each one maps to
CONFIG_KEYS = {
    # simulation
    "n_agents", "mean_degree", "eta", "gamma", "u_thr", "steps", "runs", "seed",
    "normalization", "strategy", "walk_cutoff", "tol", "sign_follows_utility", "workers",
    "degrees", "etas", "beta",
    # metric
    "max_iter", "drop_tol", "indirect_mode", "dense_threshold",
    # dataset / evaluation
    "test_fraction", "k_cf", "min_common", "cf_centered", "k_neighbourhood", "top_n", "beta_grid",
    "tw_mode", "overlap_all_ratings", "ratings", "trust",
    # synthesis
    "n_communities", "users_per_community", "items_per_community", "ratings_per_user",
    "own_item_prob", "popularity_exponent", "trust_out_degree", "cross_trust_prob",
    "taste_noise", "connectors_per_community", "connector_out_degree", "connector_ratings",
    # naive demo
    "graph", "edges",
    "format", "out",
}


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--config", type=Path, default=None, help="flat JSON key/value file")
    p.add_argument("--out", type=Path, default=None, help="output directory (default .)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="trustwebrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", parents=[common], help="trust-dynamics sweeps")
    p.add_argument("--eta", dest="etas", type=_floats, default=None, help="comma-separated")
    p.add_argument("--degree", dest="degrees", type=_floats, default=None, help="comma-separated")
    p.add_argument("--n-agents", dest="n_agents", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--u-thr", dest="u_thr", type=float, default=None)
    p.add_argument("--strategy", choices=("exact", "iterative", "truncated"), default=None)
    p.add_argument("--normalization", choices=("bootstrap", "strict"), default=None)
    p.add_argument("--walk-cutoff", dest="walk_cutoff", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--sign-follows-utility", dest="sign_follows_utility",
                   action="store_const", const=True, default=None)

    p = sub.add_parser("trust", parents=[common], help="compute T~ and S~ for an edge list")
    p.add_argument("edges", type=Path)
    p.add_argument("--strategy", choices=("exact", "iterative", "truncated"), default=None)
    p.add_argument("--walk-cutoff", dest="walk_cutoff", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--n-agents", dest="n_agents", type=int, default=None)
    p.add_argument("--normalization", choices=("strict", "bootstrap"), default=None)
    p.add_argument("--indirect-mode", dest="indirect_mode", choices=("neighbours", "reach"),
                   default=None)

    p = sub.add_parser("evaluate", parents=[common], help="TW vs CF vs SA on a dataset")
    p.add_argument("--ratings", type=Path, default=None)
    p.add_argument("--trust", type=Path, default=None)
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=None)
    p.add_argument("--walk-cutoff", dest="walk_cutoff", type=int, default=None)
    p.add_argument("--top-n", dest="top_n", type=int, default=None)
    p.add_argument("--k-neighbourhood", dest="k_neighbourhood", type=int, default=None)
    p.add_argument("--k-cf", dest="k_cf", type=int, default=None)
    p.add_argument("--beta-grid", dest="beta_grid", type=_floats, default=None)
    p.add_argument("--overlap-all-ratings", dest="overlap_all_ratings",
                   action="store_const", const=True, default=None)

    p = sub.add_parser("synth", parents=[common], help="write a planted-community dataset")
    p.add_argument("--communities", dest="n_communities", type=int, default=None)
    p.add_argument("--users-per-community", dest="users_per_community", type=int, default=None)
    p.add_argument("--items-per-community", dest="items_per_community", type=int, default=None)
    p.add_argument("--ratings-per-user", dest="ratings_per_user", type=int, default=None)
    p.add_argument("--trust-out-degree", dest="trust_out_degree", type=int, default=None)
    p.add_argument("--cross-trust-prob", dest="cross_trust_prob", type=float, default=None)
    p.add_argument("--connectors-per-community", dest="connectors_per_community", type=int,
                   default=None)

    p = sub.add_parser("demo-naive", parents=[common],
                       help="show the degenerate undamped recursion")
    p.add_argument("--graph", choices=("primitive", "bipartite", "chain"), default=None)
    p.add_argument("--edges", type=Path, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    return parser


def resolve(args) -> dict:
    """Merge config-file values under explicitly given flags."""
    params = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a flat JSON object")
        unknown = sorted(set(data) - CONFIG_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for key, value in data.items():
            if isinstance(value, (dict, list)) and key not in ("beta_grid", "etas", "degrees"):
                raise UsageError(f"config key {key!r} must be a scalar")
            params[key] = value
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        params[key] = value
    for key in ("beta_grid", "etas", "degrees"):
        if key in params and not isinstance(params[key], list):
            params[key] = _floats(params[key])
    return params


# -- output helpers ------------------------------------------------------------


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _pick(params, cls):
    names = {f.name for f in fields(cls)}
    return {k: v for k, v in params.items() if k in names}


# -- subcommands -----------------------------------------------------------------


def cmd_simulate(params, out: Path, fmt: str):
    base = SimulationConfig(**_pick(params, SimulationConfig))
    degrees = params.get("degrees") or [base.mean_degree]
    etas = params.get("etas") or [base.eta]
    results = sweep(base, degrees, etas)
    rows = sweep_rows(results)
    sidecar = {**asdict(base), "degrees": list(degrees), "etas": list(etas)}
    if fmt == "json":
        atomic_write(out / "simulate.json", _json_text(rows))
    else:
        atomic_write(out / "simulate.csv", _csv_text(rows, SWEEP_COLUMNS))
    atomic_write(out / "simulate_config.json", _json_text(sidecar))
    for (d, eta), res in sorted(results.items()):
        print(f"d={d} eta={eta} t={base.steps} same={res.mean_same[-1]:.4f} "
              f"cross={res.mean_cross[-1]:.4f} phi={res.mean_phi[-1]:.4f}")


def cmd_trust(params, out: Path, fmt: str):
    g = load_edgelist(params["edges"], params.get("n_agents"))
    beta = params.get("beta", metric.DEFAULT_BETA)
    strategy = params.get("strategy", "exact")
    S = metric.normalize_direct(g, params.get("normalization", "strict"))
    if strategy == "exact":
        tt = metric.indirect_trust_exact(S, beta, params.get("dense_threshold", metric.DENSE_THRESHOLD))
    elif strategy == "iterative":
        tt = metric.indirect_trust_iterative(S, beta, params.get("tol", 1e-8), params.get("max_iter"))
    else:
        L = params.get("walk_cutoff") or metric.walk_cutoff_for(beta, params.get("tol", 1e-8))
        tt = metric.indirect_trust_truncated(S, beta, L, None, params.get("drop_tol", metric.DROP_TOL))
    St = metric.normalize_indirect(tt, params.get("indirect_mode", "neighbours"),
                                   params.get("drop_tol", metric.DROP_TOL))
    if fmt == "json":
        def triples(m):
            m = metric.sp.coo_matrix(m)
            order = np.lexsort((m.col, m.row))
            return [[int(m.row[k]), int(m.col[k]), float(m.data[k])] for k in order if m.data[k] != 0]

        atomic_write(out / "trust.json", _json_text({
            "n": g.n_agents, "beta": beta, "strategy": tt.strategy, "residual": tt.residual,
            "indirect_trust": triples(tt.toarray()), "normalized_indirect_trust": triples(St.values),
        }))
    else:
        atomic_write(out / "indirect_trust.tsv",
                     metric.format_matrix_dump(tt.toarray(), beta, tt.strategy, tt.residual))
        atomic_write(out / "normalized_indirect_trust.tsv",
                     metric.format_matrix_dump(St.values, beta, f"{tt.strategy}+normalized",
                                               tt.residual))
    print(f"n={g.n_agents} beta={beta} strategy={tt.strategy} residual={tt.residual:.3e}")


def cmd_evaluate(params, out: Path, fmt: str):
    if "ratings" not in params or "trust" not in params:
        raise UsageError("evaluate needs --ratings and --trust")
    ds = dsmod.load(params["ratings"], params["trust"])
    ds = dsmod.clean(ds)
    ds = dsmod.split(ds, params.get("test_fraction", 0.2), params.get("seed", 0))
    cfg_kwargs = _pick(params, EvalConfig)
    if "beta_grid" in cfg_kwargs:
        cfg_kwargs["beta_grid"] = tuple(cfg_kwargs["beta_grid"])
    cfg = EvalConfig(**cfg_kwargs)
    report = Evaluator(ds, cfg).report()
    log.info("runtime %s", report.runtime)
    body = report.to_dict()
    body["dataset"] = {k: v for k, v in ds.report.items()}
    body["config"] = {**asdict(cfg), "beta_grid": list(cfg.beta_grid)}
    if fmt == "csv":
        flat = [{"key": k, "value": v} for k, v in body.items()
                if not isinstance(v, (dict, list))]
        atomic_write(out / "report.csv", _csv_text(flat, ["key", "value"]))
    else:
        atomic_write(out / "report.json", _json_text(body))
    columns = ["beta", "mae_tw", "mae_tw_shared", "coverage_tw", "n_predicted", "n_shared"]
    atomic_write(out / "beta_sweep.csv", _csv_text(report.beta_grid, columns))
    print(f"mae_tw={report.mae_tw} mae_cf={report.mae_cf} mae_sa={report.mae_sa} "
          f"coverage_tw={report.coverage_tw:.4f} coverage_cf={report.coverage_cf:.4f}")


def cmd_synth(params, out: Path, fmt: str):
    spec = dsmod.CommunitySpec(**_pick(params, dsmod.CommunitySpec))
    ds = dsmod.synthesize_community_dataset(spec)
    buf_r, buf_t = out / "ratings.csv", out / "trust.csv"
    with tempfile.TemporaryDirectory() as tmp:
        r_tmp, t_tmp = Path(tmp) / "r.csv", Path(tmp) / "t.csv"
        ds.save(r_tmp, t_tmp)
        atomic_write(buf_r, r_tmp.read_text(encoding="utf-8"))
        atomic_write(buf_t, t_tmp.read_text(encoding="utf-8"))
    atomic_write(out / "synth_spec.json", _json_text(ds.report["synth"]))
    c = ds.counts()
    print(f"users={c['users']} reviews={c['reviews']} products={c['products']} "
          f"relationships={c['relationships']} share45={ds.star_share():.4f}")


def _demo_graph(name: str) -> TrustGraph:
    if name == "bipartite":
        g = TrustGraph(2)
        g.add_edge(0, 1, 1.0).add_edge(1, 0, 1.0)
    elif name == "chain":
        g = TrustGraph(3)
        g.add_edge(0, 1, 1.0).add_edge(1, 2, 1.0)
    else:
        # 10-node ring with chords: strongly connected and aperiodic
        g = TrustGraph(10)
        for i in range(10):
            g.add_edge(i, (i + 1) % 10, 1.0)
            g.add_edge(i, (i + 2) % 10, 0.5)
    return g


def cmd_demo_naive(params, out: Path, fmt: str):
    if params.get("edges"):
        g = load_edgelist(params["edges"])
    else:
        g = _demo_graph(params.get("graph", "primitive"))
    S = metric.normalize_direct(g, "strict")
    rep = metric.naive_recursion_demo(S, params.get("tol", 1e-10), params.get("max_iter", 10_000))
    body = {
        "n": g.n_agents,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "degeneracy": rep.degeneracy,
        "column_variance": rep.column_variance,
    }
    if fmt == "csv":
        rows = [{"step": k + 1, "column_variance": v} for k, v in enumerate(rep.variance_trace)]
        atomic_write(out / "naive_trace.csv", _csv_text(rows, ["step", "column_variance"]))
    atomic_write(out / "naive.json", _json_text(body))
    print(f"degeneracy={rep.degeneracy} converged={rep.converged} iterations={rep.iterations}")


COMMANDS = {
    "simulate": (cmd_simulate, "csv"),
    "trust": (cmd_trust, "csv"),
    "evaluate": (cmd_evaluate, "json"),
    "synth": (cmd_synth, "csv"),
    "demo-naive": (cmd_demo_naive, "json"),
}


def _fail(kind: str, message: str, code: int) -> int:
    message = " ".join(str(message).split())
    print(f"trustwebrank: error: kind={kind} message={json.dumps(message)}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        params = resolve(args)
        func, default_fmt = COMMANDS[args.command]
        out = Path(params.get("out", "."))
        fmt = params.get("format", default_fmt)
        if fmt not in ("csv", "json"):
            raise UsageError(f"unknown format {fmt!r}")
    except UsageError as exc:
        return _fail("usage", exc, 1)
    try:
        func(params, out, fmt)
    except UsageError as exc:
        return _fail("usage", exc, 1)
    except TypeError as exc:
        # unexpected keyword types from a config file
        return _fail("usage", exc, 1)
    except Exception as exc:  # noqa: BLE001
        return _fail("runtime", f"{type(exc).__name__}: {exc}", 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
