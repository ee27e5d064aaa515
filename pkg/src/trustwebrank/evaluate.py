"""Offline comparison of trust-based (TW), CF and simple-average (SA) prediction.

MAE is normalised by the rating span (4 for 1..5 stars). Each method's MAE
is reported over the records it can predict, and again over the records
all three methods can predict.
"""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataset import RatingsDataset
from .graph import TrustGraph
from .metric import (
    DEFAULT_BETA,
    DROP_TOL,
    indirect_trust_truncated,
    normalize_direct,
    normalize_indirect,
)
from .recommender import STARS, PearsonCF, Ratings, RatingScale, predict_sa, predict_tw

CF_BIAS_NOTE = (
    "overlap_cf is biased upwards: CF neighbours are chosen by co-rated items, "
    "so they share items with the user by definition"
)


@dataclass(frozen=True)
class EvalConfig:
    beta: float = DEFAULT_BETA
    walk_cutoff: int = 50
    drop_tol: float = DROP_TOL
    k_cf: int = 100
    min_common: int = 2
    cf_centered: bool = False
    k_neighbourhood: int = 100
    top_n: int = 20
    beta_grid: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 0.9)
    tw_mode: str = "reach"
    overlap_all_ratings: bool = False


def mae(predictions, truths, scale: RatingScale = STARS) -> float:
    """mean |r - p| divided by the rating span."""
    p = np.asarray(predictions, dtype=np.float64)
    r = np.asarray(truths, dtype=np.float64)
    if p.size == 0:
        raise ValueError("MAE of an empty prediction set")
    if p.shape != r.shape:
        raise ValueError("predictions and truths are not aligned")
    return float(np.mean(np.abs(r - p)) / scale.span)


def overlap(P: set, R: set, N: int) -> float:
    """|P & R| / min(|P|, N)."""
    denom = min(len(P), N)
    if denom == 0:
        raise ValueError("overlap needs a non-empty P and N >= 1")
    return len(P & R) / denom


def most_rated(counter: Counter, N: int) -> set:
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return {item for item, _ in ranked[:N]}


@dataclass
class EvaluationReport:
    mae_tw: float | None
    mae_cf: float | None
    mae_sa: float | None
    coverage_tw: float
    coverage_cf: float
    coverage_sa: float
    mae_tw_common: float | None
    mae_cf_common: float | None
    mae_sa_common: float | None
    n_common: int
    overlap_global: float
    overlap_cf: float
    overlap_tw: float
    top_n: int
    k_neighbourhood: int
    overlap_users: int
    overlap_users_excluded: int
    beta_grid: list
    counts: dict
    runtime: dict = field(default_factory=dict)

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = {
            "mae_tw": self.mae_tw,
            "mae_cf": self.mae_cf,
            "mae_sa": self.mae_sa,
            "coverage_tw": self.coverage_tw,
            "coverage_cf": self.coverage_cf,
            "coverage_sa": self.coverage_sa,
            "mae_tw_common": self.mae_tw_common,
            "mae_cf_common": self.mae_cf_common,
            "mae_sa_common": self.mae_sa_common,
            "n_common": self.n_common,
            "overlap_global": self.overlap_global,
            "overlap_cf": self.overlap_cf,
            "overlap_tw": self.overlap_tw,
            "top_n": self.top_n,
            "k_neighbourhood": self.k_neighbourhood,
            "overlap_users": self.overlap_users,
            "overlap_users_excluded": self.overlap_users_excluded,
            "beta_grid": self.beta_grid,
            "counts": self.counts,
            "notes": [CF_BIAS_NOTE],
        }
        if include_runtime:
            d["runtime"] = self.runtime
        return d


class Evaluator:
    """Trains all three predictors on the training side of a split dataset."""

    def __init__(self, ds: RatingsDataset, config: EvalConfig = EvalConfig()):
        self.ds = ds
        self.config = config
        self.user_ids = ds.users
        self.index = {u: n for n, u in enumerate(self.user_ids.tolist())}
        train = ds.train_mask
        self.train = Ratings(
            (
                (self.index[u], o, r)
                for u, o, r in zip(ds.user[train].tolist(), ds.item[train].tolist(),
                                   ds.stars[train].tolist())
            ),
            STARS,
        )
        test = ds.is_test
        self.test = [
            (self.index[u], o, r)
            for u, o, r in zip(ds.user[test].tolist(), ds.item[test].tolist(),
                               ds.stars[test].tolist())
        ]
        g = TrustGraph(self.user_ids.size)
        for a, b in ds.trust.tolist():
            g.add_edge(self.index[a], self.index[b], 1.0)
        self.graph = g
        self.S = normalize_direct(g, "strict")
        self.cf = PearsonCF(self.train, k=config.k_cf, min_common=config.min_common,
                            centered=config.cf_centered)
        self._tw_cache = {}

    def _source_rows(self):
        rows = {i for i, _, _ in self.test}
        return sorted(rows | set(self._overlap_targets()))

    def indirect(self, beta: float):
        """Truncated T~ for every user that needs predictions or overlaps."""
        key = ("T", beta)
        if key not in self._tw_cache:
            self._tw_cache[key] = indirect_trust_truncated(
                self.S, beta, self.config.walk_cutoff, self._source_rows(), self.config.drop_tol
            )
        return self._tw_cache[key]

    def s_tilde(self, beta: float):
        key = ("S", beta)
        if key not in self._tw_cache:
            self._tw_cache[key] = normalize_indirect(
                self.indirect(beta), self.config.tw_mode, self.config.drop_tol
            )
        return self._tw_cache[key]

    def predictions(self, method: str, beta: float | None = None) -> list:
        if method == "TW":
            St = self.s_tilde(self.config.beta if beta is None else beta)
            return [predict_tw(St, self.train, i, o) for i, o, _ in self.test]
        if method == "CF":
            return [self.cf.predict(i, o) for i, o, _ in self.test]
        if method == "SA":
            return [predict_sa(self.train, o) for _, o, _ in self.test]
        raise ValueError(f"unknown method {method!r}")

    def _mae_over(self, preds, mask):
        p = [pr.value for pr, m in zip(preds, mask) if m]
        r = [t[2] for t, m in zip(self.test, mask) if m]
        return mae(p, r, STARS) if p else None

    def coverage(self, method: str, beta: float | None = None) -> float:
        preds = self.predictions(method, beta)
        return _coverage(preds)

    def _overlap_targets(self) -> list:
        P = self._target_sets()
        return [i for i, items in P.items() if items]

    def _target_sets(self) -> dict:
        if self.config.overlap_all_ratings:
            sets = {}
            for u, o in zip(self.ds.user.tolist(), self.ds.item.tolist()):
                sets.setdefault(self.index[u], set()).add(o)
        else:
            sets = {}
            for i, o, _ in self.test:
                sets.setdefault(i, set()).add(o)
        return sets

    def _neighbourhood_items(self, neighbours, N) -> set:
        counts = Counter()
        for j in neighbours:
            counts.update(self.train.by_user.get(j, {}).keys())
        return most_rated(counts, N)

    def tw_neighbours(self, i, k, beta=None):
        T = self.indirect(self.config.beta if beta is None else beta)
        cols, vals = T.row(i)
        cand = [(-v, j) for j, v in zip(cols.tolist(), vals.tolist()) if j != i and v > 0]
        cand.sort()
        return [j for _, j in cand[:k]]

    def top_n_overlap(self, N: int | None = None, k: int | None = None):
        """Average overlaps (global, CF, TW) over users with a non-empty P_i."""
        N = self.config.top_n if N is None else N
        k = self.config.k_neighbourhood if k is None else k
        if N < 1:
            raise ValueError("N must be >= 1")
        global_counts = Counter()
        for items in self.train.by_user.values():
            global_counts.update(items.keys())
        R_global = most_rated(global_counts, N)
        P = self._target_sets()
        o_g, o_cf, o_tw = [], [], []
        excluded = 0
        for i in range(self.user_ids.size):
            Pi = P.get(i, set())
            if not Pi:
                excluded += 1
                continue
            o_g.append(overlap(Pi, R_global, N))
            o_cf.append(overlap(Pi, self._neighbourhood_items(self.cf.neighbours(i, k), N), N))
            o_tw.append(overlap(Pi, self._neighbourhood_items(self.tw_neighbours(i, k), N), N))
        mean = lambda xs: float(np.mean(xs)) if xs else 0.0  # noqa: E731
        return mean(o_g), mean(o_cf), mean(o_tw), len(o_g), excluded

    def beta_sweep(self, beta_grid=None) -> list[dict]:
        grid = sorted(self.config.beta_grid if beta_grid is None else beta_grid)
        for b in grid:
            if not 0.0 <= b < 1.0:
                raise ValueError(f"beta={b} outside [0, 1)")
        preds = {b: self.predictions("TW", b) for b in grid}
        # records every grid point can predict
        shared = [all(preds[b][n] is not None for b in grid) for n in range(len(self.test))]
        rows = []
        for b in grid:
            covered = [p is not None for p in preds[b]]
            rows.append({
                "beta": float(b),
                "mae_tw": self._mae_over(preds[b], covered),
                "mae_tw_shared": self._mae_over(preds[b], shared),
                "coverage_tw": _coverage(preds[b]),
                "n_predicted": int(sum(covered)),
                "n_shared": int(sum(shared)),
            })
        return rows

    def report(self) -> EvaluationReport:
        t0 = time.perf_counter()
        preds = {m: self.predictions(m) for m in ("TW", "CF", "SA")}
        t_pred = time.perf_counter() - t0
        own = {m: [p is not None for p in ps] for m, ps in preds.items()}
        common = [a and b and c for a, b, c in zip(own["TW"], own["CF"], own["SA"])]
        t1 = time.perf_counter()
        og, ocf, otw, n_users, n_excl = self.top_n_overlap()
        t_ovl = time.perf_counter() - t1
        t2 = time.perf_counter()
        sweep = self.beta_sweep()
        t_sweep = time.perf_counter() - t2
        counts = {
            "test": len(self.test),
            "train": len(self.train),
            "predicted_tw": int(sum(own["TW"])),
            "predicted_cf": int(sum(own["CF"])),
            "predicted_sa": int(sum(own["SA"])),
            **{f"dataset_{k}": v for k, v in self.ds.counts().items()},
        }
        return EvaluationReport(
            mae_tw=self._mae_over(preds["TW"], own["TW"]),
            mae_cf=self._mae_over(preds["CF"], own["CF"]),
            mae_sa=self._mae_over(preds["SA"], own["SA"]),
            coverage_tw=_coverage(preds["TW"]),
            coverage_cf=_coverage(preds["CF"]),
            coverage_sa=_coverage(preds["SA"]),
            mae_tw_common=self._mae_over(preds["TW"], common),
            mae_cf_common=self._mae_over(preds["CF"], common),
            mae_sa_common=self._mae_over(preds["SA"], common),
            n_common=int(sum(common)),
            overlap_global=og,
            overlap_cf=ocf,
            overlap_tw=otw,
            top_n=self.config.top_n,
            k_neighbourhood=self.config.k_neighbourhood,
            overlap_users=n_users,
            overlap_users_excluded=n_excl,
            beta_grid=sweep,
            counts=counts,
            runtime={"predict_s": t_pred, "overlap_s": t_ovl, "beta_sweep_s": t_sweep},
        )


def _coverage(preds) -> float:
    if not preds:
        return 0.0
    return sum(p is not None for p in preds) / len(preds)


def evaluate(ds: RatingsDataset, config: EvalConfig = EvalConfig()) -> EvaluationReport:
    return Evaluator(ds, config).report()


def coverage(method: str, ds: RatingsDataset, config: EvalConfig = EvalConfig()) -> float:
    return Evaluator(ds, config).coverage(method)


def top_n_overlap(ds: RatingsDataset, N: int = 20, k_neighbourhood: int = 100,
                  config: EvalConfig = EvalConfig()):
    """(O^N, O^N_CF, O^N_TW) for a split dataset."""
    og, ocf, otw, _, _ = Evaluator(ds, config).top_n_overlap(N, k_neighbourhood)
    return og, ocf, otw


def beta_sweep(ds: RatingsDataset, beta_grid, config: EvalConfig = EvalConfig()) -> list[dict]:
    return Evaluator(ds, config).beta_sweep(beta_grid)
