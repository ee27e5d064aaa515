"""Rating + trust datasets: loading, cleaning, splitting, synthesis.

File formats
------------
ratings
    CSV ``user_id,item_id,stars[,timestamp]``, optional header, stars 1..5.
trust
    CSV ``truster_id,trustee_id`` (trust is binary, weight 1).
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .graph import TrustGraph, strongly_connected_components


class DatasetFormatError(ValueError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class EmptyDatasetError(ValueError):
    """Cleaning removed every user."""


@dataclass
class RatingsDataset:
    user: np.ndarray
    item: np.ndarray
    stars: np.ndarray
    trust: np.ndarray  # (m, 2) truster, trustee
    timestamp: np.ndarray | None = None
    is_test: np.ndarray | None = None
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        self.user = np.asarray(self.user, dtype=np.int64)
        self.item = np.asarray(self.item, dtype=np.int64)
        self.stars = np.asarray(self.stars, dtype=np.int64)
        self.trust = np.asarray(self.trust, dtype=np.int64).reshape(-1, 2)
        if self.is_test is None:
            self.is_test = np.zeros(self.user.size, dtype=bool)

    @property
    def n_ratings(self) -> int:
        return int(self.user.size)

    @property
    def users(self) -> np.ndarray:
        return np.unique(np.concatenate([self.user, self.trust.ravel()]))

    @property
    def items(self) -> np.ndarray:
        return np.unique(self.item)

    @property
    def train_mask(self) -> np.ndarray:
        return ~self.is_test

    def counts(self) -> dict:
        n_users = int(self.users.size)
        n_items = int(self.items.size)
        cells = n_users * n_items
        return {
            "users": n_users,
            "reviews": self.n_ratings,
            "products": n_items,
            "relationships": int(self.trust.shape[0]),
            "sparsity": 1.0 - self.n_ratings / cells if cells else 1.0,
        }

    def subset(self, keep_ratings, keep_trust) -> "RatingsDataset":
        ts = None if self.timestamp is None else self.timestamp[keep_ratings]
        return RatingsDataset(
            self.user[keep_ratings],
            self.item[keep_ratings],
            self.stars[keep_ratings],
            self.trust[keep_trust],
            ts,
            self.is_test[keep_ratings],
            dict(self.report),
        )

    def star_share(self, values=(4, 5)) -> float:
        if self.n_ratings == 0:
            return 0.0
        return float(np.isin(self.stars, values).mean())

    def save(self, ratings_path, trust_path):
        with open(ratings_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "item_id", "stars"])
            for row in zip(self.user.tolist(), self.item.tolist(), self.stars.tolist()):
                w.writerow(row)
        with open(trust_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["truster_id", "trustee_id"])
            for a, b in self.trust.tolist():
                w.writerow([a, b])


def _is_int(s):
    try:
        int(s)
    except ValueError:
        return False
    return True


def _parse_int(s, path, lineno, what):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        f = float(s)
    except ValueError:
        raise DatasetFormatError(path, lineno, f"bad {what} {s!r}") from None
    if f != int(f):
        raise DatasetFormatError(path, lineno, f"bad {what} {s!r}")
    return int(f)


def load(ratings_path, trust_path) -> RatingsDataset:
    """Read and validate a ratings file and a trust file.

    Duplicate (user, item) ratings keep the last occurrence. Trust edges
    that mention a user without ratings, self-trust and duplicate edges are
    dropped. All of it is counted in ``report["load"]``.
    """
    ratings_path = Path(ratings_path)
    trust_path = Path(trust_path)
    latest: dict[tuple[int, int], tuple[int, float]] = {}
    duplicates = 0
    has_ts = False
    with open(ratings_path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            row = [c.strip() for c in row]
            if lineno == 1 and not _is_int(row[0]):
                continue
            if len(row) not in (3, 4):
                raise DatasetFormatError(ratings_path, lineno, "expected 3 or 4 fields")
            u = _parse_int(row[0], ratings_path, lineno, "user id")
            o = _parse_int(row[1], ratings_path, lineno, "item id")
            r = _parse_int(row[2], ratings_path, lineno, "stars")
            if u < 0 or o < 0:
                raise DatasetFormatError(ratings_path, lineno, "ids must be non-negative")
            if not 1 <= r <= 5:
                raise DatasetFormatError(ratings_path, lineno, f"stars {r} outside 1..5")
            ts = float("nan")
            if len(row) == 4 and row[3]:
                has_ts = True
                try:
                    ts = float(row[3])
                except ValueError:
                    raise DatasetFormatError(ratings_path, lineno, "bad timestamp") from None
            if (u, o) in latest:
                duplicates += 1
                del latest[(u, o)]  # re-insert so order follows the last occurrence
            latest[(u, o)] = (r, ts)

    known = {u for u, _ in latest}
    edges = []
    seen = set()
    unknown = self_loops = dup_edges = 0
    with open(trust_path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            row = [c.strip() for c in row]
            if lineno == 1 and not _is_int(row[0]):
                continue
            if len(row) != 2:
                raise DatasetFormatError(trust_path, lineno, "expected 2 fields")
            a = _parse_int(row[0], trust_path, lineno, "truster id")
            b = _parse_int(row[1], trust_path, lineno, "trustee id")
            if a == b:
                self_loops += 1
                continue
            if a not in known or b not in known:
                unknown += 1
                continue
            if (a, b) in seen:
                dup_edges += 1
                continue
            seen.add((a, b))
            edges.append((a, b))

    keys = list(latest)
    user = np.array([k[0] for k in keys], dtype=np.int64)
    item = np.array([k[1] for k in keys], dtype=np.int64)
    stars = np.array([latest[k][0] for k in keys], dtype=np.int64)
    ts = np.array([latest[k][1] for k in keys]) if has_ts else None
    ds = RatingsDataset(user, item, stars, np.array(edges, dtype=np.int64).reshape(-1, 2), ts)
    ds.report["load"] = {
        "ratings": ds.n_ratings,
        "relationships": len(edges),
        "duplicate_ratings": duplicates,
        "unknown_user_edges": unknown,
        "self_trust_edges": self_loops,
        "duplicate_edges": dup_edges,
    }
    return ds


def largest_scc(users: np.ndarray, trust: np.ndarray) -> set:
    """Members of the biggest strongly connected component of the trust graph."""
    if users.size == 0:
        return set()
    index = {u: n for n, u in enumerate(users.tolist())}
    g = TrustGraph(users.size)
    for a, b in trust.tolist():
        g.add_edge(index[a], index[b], 1.0)
    comps = strongly_connected_components(g)
    return {int(users[n]) for n in comps[0]}


def clean(ds: RatingsDataset) -> RatingsDataset:
    """Drop users with no reviews or no trust relationships, keep the
    largest SCC of the trust graph, and repeat until nothing changes."""
    keep_r = np.ones(ds.n_ratings, dtype=bool)
    keep_t = np.ones(ds.trust.shape[0], dtype=bool)
    rounds = 0
    while True:
        rounds += 1
        reviewers = set(np.unique(ds.user[keep_r]).tolist())
        connected = set(np.unique(ds.trust[keep_t].ravel()).tolist())
        alive = reviewers & connected
        t_ok = keep_t & np.isin(ds.trust[:, 0], list(alive)) & np.isin(ds.trust[:, 1], list(alive))
        core = largest_scc(np.array(sorted(alive), dtype=np.int64), ds.trust[t_ok])
        new_r = keep_r & np.isin(ds.user, list(core))
        new_t = t_ok & np.isin(ds.trust[:, 0], list(core)) & np.isin(ds.trust[:, 1], list(core))
        if np.array_equal(new_r, keep_r) and np.array_equal(new_t, keep_t):
            break
        keep_r, keep_t = new_r, new_t
    out = ds.subset(keep_r, keep_t)
    if out.n_ratings == 0 or out.trust.shape[0] == 0:
        raise EmptyDatasetError("cleaning left no users")
    before = ds.counts()
    out.report["clean"] = {
        **out.counts(),
        "rounds": rounds,
        "removed_users": before["users"] - out.counts()["users"],
        "removed_reviews": before["reviews"] - out.n_ratings,
    }
    return out


def split(ds: RatingsDataset, test_fraction: float = 0.2, seed: int = 0) -> RatingsDataset:
    """Uniform random per-rating train/test split; trust is never split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    is_test = rng.random(ds.n_ratings) < test_fraction
    n_test = int(is_test.sum())
    if n_test == 0 or n_test == ds.n_ratings:
        warnings.warn(
            f"split produced an empty partition (test={n_test}, ratings={ds.n_ratings})",
            RuntimeWarning,
            stacklevel=2,
        )
    out = replace(ds, is_test=is_test, report=dict(ds.report))
    out.report["split"] = {
        "test_fraction": test_fraction,
        "seed": seed,
        "train": ds.n_ratings - n_test,
        "test": n_test,
    }
    return out


# -- synthetic data ------------------------------------------------------------


DEFAULT_STAR_SHARES = (0.05, 0.08, 0.12, 0.35, 0.40)


@dataclass(frozen=True)
class CommunitySpec:
    """Planted-community dataset.

    Users of a community share a latent taste per item; stars come from
    ranking the latent scores against ``star_shares``, so the marginal star
    distribution is fixed by construction. With ``connectors_per_community``
    > 0, regular users trust only connector users, who rate at random and
    trust regular users, so every informative rater is two hops away.
    """

    n_communities: int = 2
    users_per_community: int = 200
    items_per_community: int = 250
    ratings_per_user: int = 10
    own_item_prob: float = 0.9
    popularity_exponent: float = 1.0
    trust_out_degree: int = 10
    cross_trust_prob: float = 0.02
    taste_noise: float = 0.5
    star_shares: tuple = DEFAULT_STAR_SHARES
    connectors_per_community: int = 0
    connector_out_degree: int = 20
    connector_ratings: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.n_communities < 1 or self.users_per_community < 1:
            raise ValueError("need at least one community with one user")
        if abs(sum(self.star_shares) - 1.0) > 1e-9 or len(self.star_shares) != 5:
            raise ValueError("star_shares must be 5 probabilities summing to 1")


def _stars_from_scores(z, shares):
    """Rank-map scores to 1..5 so each star gets its share of the ratings."""
    n = z.size
    order = np.argsort(z, kind="stable")
    bounds = np.round(np.cumsum(shares) * n).astype(np.int64)
    stars = np.empty(n, dtype=np.int64)
    lo = 0
    for s, hi in enumerate(bounds, start=1):
        stars[order[lo:hi]] = s
        lo = hi
    return stars


def _pick(rng, pool, k, exclude=None):
    pool = np.asarray(pool)
    if exclude is not None:
        pool = pool[pool != exclude]
    k = min(k, pool.size)
    return rng.choice(pool, size=k, replace=False) if k else pool[:0]


def synthesize_community_dataset(spec: CommunitySpec = CommunitySpec()) -> RatingsDataset:
    rng = np.random.default_rng(spec.seed)
    C = spec.n_communities
    upc = spec.users_per_community
    ipc = spec.items_per_community
    n_items = C * ipc
    n_regular = C * upc
    cpc = spec.connectors_per_community
    item_comm = np.repeat(np.arange(C), ipc)
    rank = np.tile(np.arange(ipc), C)
    pop = 1.0 / (rank + 1.0) ** spec.popularity_exponent
    taste = rng.standard_normal((C, n_items))

    users, items, scores = [], [], []

    def item_weights(c):
        own = item_comm == c
        w = np.where(own, spec.own_item_prob, (1.0 - spec.own_item_prob) / max(C - 1, 1)) * pop
        if C == 1:
            w = pop.copy()
        return w / w.sum()

    weights = [item_weights(c) for c in range(C)]
    for c in range(C):
        for k in range(upc):
            u = c * upc + k
            chosen = rng.choice(n_items, size=min(spec.ratings_per_user, n_items), replace=False,
                                p=weights[c])
            chosen.sort()
            z = taste[c, chosen] + spec.taste_noise * rng.standard_normal(chosen.size)
            users.append(np.full(chosen.size, u))
            items.append(chosen)
            scores.append(z)

    spread = np.sqrt(1.0 + spec.taste_noise**2)
    connectors = [np.arange(n_regular + c * cpc, n_regular + (c + 1) * cpc) for c in range(C)]
    for c in range(C):
        for u in connectors[c].tolist():
            chosen = rng.choice(n_items, size=min(spec.connector_ratings, n_items), replace=False,
                                p=weights[c])
            chosen.sort()
            users.append(np.full(chosen.size, u))
            items.append(chosen)
            scores.append(spread * rng.standard_normal(chosen.size))

    user = np.concatenate(users) if users else np.zeros(0, dtype=np.int64)
    item = np.concatenate(items) if items else np.zeros(0, dtype=np.int64)
    stars = _stars_from_scores(np.concatenate(scores), spec.star_shares) if scores else item

    members = [np.arange(c * upc, (c + 1) * upc) for c in range(C)]
    edges = set()
    for c in range(C):
        for u in members[c].tolist():
            for k in range(spec.trust_out_degree):
                cross = C > 1 and rng.random() < spec.cross_trust_prob
                if cross:
                    other = (c + 1 + rng.integers(C - 1)) % C
                    target_pool = connectors[other] if cpc else members[other]
                else:
                    target_pool = connectors[c] if cpc else members[c]
                t = _pick(rng, target_pool, 1, exclude=u)
                if t.size:
                    edges.add((u, int(t[0])))
        for v in connectors[c].tolist():
            for t in _pick(rng, members[c], spec.connector_out_degree).tolist():
                edges.add((v, int(t)))
    trust = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    ds = RatingsDataset(user, item, stars, trust)
    ds.report["synth"] = {**asdict(spec), "star_shares": list(spec.star_shares), **ds.counts()}
    return ds
