"""Rating prediction: trust-weighted (TW), user-based CF, and simple average."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .metric import RowNormalizedMatrix


@dataclass(frozen=True)
class RatingScale:
    name: str
    low: float
    high: float
    values: tuple

    @property
    def span(self) -> float:
        return self.high - self.low

    def contains(self, r) -> bool:
        return r in self.values


BINARY = RatingScale("binary", -1.0, 1.0, (-1, 1))
STARS = RatingScale("stars", 1.0, 5.0, (1, 2, 3, 4, 5))
SCALES = {"binary": BINARY, "stars": STARS}


class Ratings:
    """Partial map (agent, object) -> rating on a declared scale."""

    def __init__(self, triples=(), scale: RatingScale | str = STARS):
        self.scale = SCALES[scale] if isinstance(scale, str) else scale
        self.by_user: dict[int, dict[int, float]] = {}
        self.by_item: dict[int, dict[int, float]] = {}
        for user, item, r in triples:
            self.add(user, item, r)

    def add(self, user, item, r):
        if not self.scale.contains(r):
            raise ValueError(f"rating {r} not on the {self.scale.name} scale")
        r = float(r)
        self.by_user.setdefault(user, {})[item] = r
        self.by_item.setdefault(item, {})[user] = r

    def get(self, user, item):
        return self.by_user.get(user, {}).get(item)

    def raters(self, item) -> dict[int, float]:
        return self.by_item.get(item, {})

    def __len__(self):
        return sum(len(v) for v in self.by_user.values())


@dataclass(frozen=True)
class Prediction:
    value: float
    support: int
    method: str


def predict_tw(S_tilde: RowNormalizedMatrix, ratings: Ratings, i: int, o) -> Prediction | None:
    """Trust-weighted mean of the ratings on ``o`` by agents in row i of S~.

    Weights are renormalised over the agents that actually rated ``o``.
    Returns None when none of them did.
    """
    if S_tilde.zero_row[i]:
        return None
    raters = ratings.raters(o)
    if not raters:
        return None
    cols, weights = S_tilde.row(i)
    num = 0.0
    den = 0.0
    support = 0
    for j, w in zip(cols.tolist(), weights.tolist()):
        r = raters.get(j)
        if r is None or w <= 0.0:
            continue
        num += w * r
        den += w
        support += 1
    if support == 0:
        return None
    return Prediction(num / den, support, "TW")


def predict_sa(ratings: Ratings, o) -> Prediction | None:
    raters = ratings.raters(o)
    if not raters:
        return None
    vals = list(raters.values())
    return Prediction(sum(vals) / len(vals), len(vals), "SA")


class PearsonCF:
    """User-based collaborative filtering with Pearson similarity.

    Similarity between two users is the Pearson correlation of their ratings
    over co-rated items (at least ``min_common`` of them). A prediction for
    (i, o) takes the ``k`` most similar positively-correlated raters of o and
    returns their similarity-weighted mean rating::

        p = sum_j sim_ij r_jo / sum_j sim_ij

    With ``centered=True`` the Resnick form is used instead,
    ``mean_i + sum_j sim_ij (r_jo - mean_j) / sum_j sim_ij``, clipped to the
    rating scale.
    """

    def __init__(self, ratings: Ratings, k: int = 100, min_common: int = 2,
                 centered: bool = False):
        self.ratings = ratings
        self.k = k
        self.min_common = min_common
        self.centered = centered
        self.users = sorted(ratings.by_user)
        self.items = sorted(ratings.by_item)
        self._uix = {u: n for n, u in enumerate(self.users)}
        self._iix = {o: n for n, o in enumerate(self.items)}
        rows, cols, vals = [], [], []
        for u, items in ratings.by_user.items():
            for o, r in items.items():
                rows.append(self._uix[u])
                cols.append(self._iix[o])
                vals.append(r)
        shape = (len(self.users), len(self.items))
        self._R = sp.csc_matrix((vals, (rows, cols)), shape=shape)
        self._B = sp.csc_matrix((np.ones(len(vals)), (rows, cols)), shape=shape)
        self._R2 = self._R.multiply(self._R).tocsc()
        self.means = {
            u: sum(items.values()) / len(items) for u, items in ratings.by_user.items()
        }
        self._sim_cache: dict[int, np.ndarray] = {}

    def similarities(self, i) -> np.ndarray:
        """Pearson similarity of user i to every user (0 where undefined)."""
        if i in self._sim_cache:
            return self._sim_cache[i]
        n_users = len(self.users)
        sims = np.zeros(n_users)
        mine = self.ratings.by_user.get(i)
        if mine:
            cols = np.array([self._iix[o] for o in sorted(mine)], dtype=np.int64)
            x = np.array([mine[o] for o in sorted(mine)])
            B = self._B[:, cols]
            R = self._R[:, cols]
            n = np.asarray(B.sum(axis=1)).ravel()
            sx = B @ x
            sxx = B @ (x * x)
            sy = np.asarray(R.sum(axis=1)).ravel()
            syy = np.asarray(self._R2[:, cols].sum(axis=1)).ravel()
            sxy = R @ x
            cov = n * sxy - sx * sy
            var = (n * sxx - sx * sx) * (n * syy - sy * sy)
            ok = (n >= self.min_common) & (var > 1e-12)
            sims[ok] = cov[ok] / np.sqrt(var[ok])
            sims[self._uix[i]] = 0.0
        self._sim_cache[i] = sims
        return sims

    def similarity(self, i, j) -> float:
        if i not in self._uix or j not in self._uix:
            return 0.0
        return float(self.similarities(i)[self._uix[j]])

    def neighbours(self, i, k: int | None = None) -> list:
        """Top-k positively similar users of i, most similar first."""
        k = self.k if k is None else k
        if i not in self._uix:
            return []
        sims = self.similarities(i)
        pos = np.flatnonzero(sims > 0)
        order = sorted(pos.tolist(), key=lambda n: (-sims[n], n))[:k]
        return [self.users[n] for n in order]

    def predict(self, i, o) -> Prediction | None:
        raters = self.ratings.raters(o)
        if not raters or i not in self._uix:
            return None
        sims = self.similarities(i)
        cand = []
        for j in raters:
            if j == i:
                continue
            s = float(sims[self._uix[j]])
            if s > 0:
                cand.append((-s, j))
        if not cand:
            return None
        cand.sort()
        cand = cand[: self.k]
        den = sum(-s for s, _ in cand)
        if not self.centered:
            return Prediction(sum(-s * raters[j] for s, j in cand) / den, len(cand), "CF")
        num = sum(-s * (raters[j] - self.means[j]) for s, j in cand)
        scale = self.ratings.scale
        value = min(scale.high, max(scale.low, self.means[i] + num / den))
        return Prediction(value, len(cand), "CF")


def predict_cf(ratings: Ratings, i, o, k_neighbours: int = 100, min_common: int = 2,
               centered: bool = False) -> Prediction | None:
    """One-off CF prediction; build a :class:`PearsonCF` to predict many pairs."""
    return PearsonCF(ratings, k=k_neighbours, min_common=min_common, centered=centered).predict(i, o)
