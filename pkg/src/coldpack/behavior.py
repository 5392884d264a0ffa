"""User behavior vectors, z-scoring and Euclidean k-means segmentation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import Booking

#: Dimension order of a user vector. This is the coordinate system of every
#: logistic option model, so it must not change between training and scoring.
FEATURES: tuple[str, ...] = (
    "lunch_rate",
    "competition_rate",
    "holiday_rate",
    "caddie_rate",
    "avg_spending",
    "std_spending",
    "avg_course_rating",
    "std_course_rating",
    "avg_num_parties",
    "std_num_parties",
    "avg_party_size",
)


@dataclass(frozen=True, slots=True)
class UserVector:
    lunch_rate: float
    competition_rate: float
    holiday_rate: float
    caddie_rate: float
    avg_spending: float
    std_spending: float
    avg_course_rating: float
    std_course_rating: float
    avg_num_parties: float
    std_num_parties: float
    avg_party_size: float
    n_bookings: int

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURES], dtype=float)


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def spending_stats(bookings: Sequence[Booking]) -> tuple[float, float]:
    """Population mean and sd of ``price_paid``."""
    if not bookings:
        raise ValueError("spending stats need at least one booking")
    return _mean_sd([b.price_paid for b in bookings])


def build_user_vector(bookings: Sequence[Booking], course_ratings: Mapping[str, float]) -> UserVector:
    if not bookings:
        raise ValueError("cannot build a user vector from an empty history")
    n = len(bookings)
    avg_spend, sd_spend = spending_stats(bookings)
    avg_rating, sd_rating = _mean_sd([course_ratings[b.course_id] for b in bookings])
    avg_parties, sd_parties = _mean_sd([b.num_parties for b in bookings])
    return UserVector(
        lunch_rate=sum(b.options.lunch for b in bookings) / n,
        competition_rate=sum(b.options.competition for b in bookings) / n,
        holiday_rate=sum(b.options.holiday for b in bookings) / n,
        caddie_rate=sum(b.options.caddie for b in bookings) / n,
        avg_spending=avg_spend,
        std_spending=sd_spend,
        avg_course_rating=avg_rating,
        std_course_rating=sd_rating,
        avg_num_parties=avg_parties,
        std_num_parties=sd_parties,
        avg_party_size=sum(b.party_size for b in bookings) / n,
        n_bookings=n,
    )


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    sd: np.ndarray

    def apply(self, v: np.ndarray | UserVector) -> np.ndarray:
        x = v.as_array() if isinstance(v, UserVector) else np.asarray(v, dtype=float)
        return (x - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {"features": list(FEATURES), "mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["sd"], dtype=float))


def fit_standardizer(vectors: np.ndarray | Sequence[UserVector]) -> Standardizer:
    """Column-wise z-transform; a constant column keeps sd = 1 so it maps to 0."""
    if len(vectors) and isinstance(vectors[0], UserVector):
        x = np.vstack([v.as_array() for v in vectors])
    else:
        x = np.atleast_2d(np.asarray(vectors, dtype=float))
    if x.shape[0] < 2:
        raise ValueError("need at least 2 vectors to fit a standardizer")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return Standardizer(mean, sd)


@dataclass(frozen=True)
class Clustering:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    inertia_history: tuple[float, ...] = ()
    n_iter: int = 0
    user_ids: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def assignment(self) -> dict[str, int]:
        return {u: int(c) for u, c in zip(self.user_ids, self.labels)}

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "n_iter": self.n_iter,
            "assignment": self.assignment,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Clustering":
        users = tuple(sorted(d["assignment"]))
        return cls(
            centroids=np.asarray(d["centroids"], dtype=float),
            labels=np.array([d["assignment"][u] for u in users], dtype=int),
            inertia=float(d["inertia"]),
            n_iter=int(d["n_iter"]),
            user_ids=users,
        )


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # fewer distinct points than k: pick any unused index
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return x[chosen].copy()


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float):
    history: list[float] = []
    labels = np.zeros(x.shape[0], dtype=int)
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(x, centroids)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(x.shape[0]), labels].sum())
        history.append(inertia)
        for j in range(centroids.shape[0]):
            members = labels == j
            # an empty cluster keeps its centroid; inertia cannot rise
            if members.any():
                centroids[j] = x[members].mean(axis=0)
        if len(history) >= 2:
            prev = history[-2]
            if prev == 0 or (prev - inertia) / prev < tol:
                break
    d2 = _sq_dists(x, centroids)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(x.shape[0]), labels].sum())
    history.append(inertia)
    return centroids, labels, inertia, history, it


def _transfer_pass(x: np.ndarray, labels: np.ndarray, k: int) -> int:
    """Single-point moves that strictly lower inertia (Hartigan's criterion); returns the move count.

    Moving point i from a to b changes inertia by
    n_b/(n_b+1)*|x_i - c_b|^2 - n_a/(n_a-1)*|x_i - c_a|^2.
    """
    counts = np.bincount(labels, minlength=k).astype(float)
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    moves = 0
    for i in range(x.shape[0]):
        a = labels[i]
        if counts[a] <= 1:
            continue
        centroids = sums / np.maximum(counts, 1.0)[:, None]
        d2 = ((centroids - x[i]) ** 2).sum(axis=1)
        remove = counts[a] / (counts[a] - 1) * d2[a]
        add = np.where(counts > 0, counts / (counts + 1), 1.0) * d2
        add[a] = np.inf
        b = int(np.argmin(add))
        if add[b] < remove * (1 - 1e-12):
            labels[i] = b
            counts[a] -= 1
            counts[b] += 1
            sums[a] -= x[i]
            sums[b] += x[i]
            moves += 1
    return moves


def _centroids_of(x: np.ndarray, labels: np.ndarray, old: np.ndarray) -> np.ndarray:
    out = old.copy()
    for j in range(old.shape[0]):
        members = labels == j
        if members.any():
            out[j] = x[members].mean(axis=0)
    return out


def kmeans(
    x: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    n_init: int = 10,
) -> Clustering:
    """Lloyd's algorithm from k-means++ seeds, best of ``n_init`` restarts.

    Each converged Lloyd solution is polished with single-point transfer
    passes and re-run through Lloyd until neither changes anything, which
    escapes many of Lloyd's poor fixed points without raising inertia. Every
    restart draws from its own child of ``np.random.SeedSequence(seed)``, so
    the result depends on the seed and the row order only.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > x.shape[0]:
        raise ValueError(f"k={k} exceeds the number of vectors ({x.shape[0]})")
    best: Clustering | None = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        c0 = _kmeanspp(x, k, rng)
        centroids, labels, inertia, history, n_iter = _lloyd(x, c0, max_iter, tol)
        for _ in range(max_iter):
            labels = labels.copy()
            if not _transfer_pass(x, labels, k):
                break
            centroids = _centroids_of(x, labels, centroids)
            centroids, labels, inertia, more, extra = _lloyd(x, centroids, max_iter, tol)
            history += more
            n_iter += extra
        if best is None or inertia < best.inertia:
            best = Clustering(centroids, labels, inertia, tuple(history), n_iter)
    assert best is not None
    return best


def assign_cluster(v: np.ndarray, clustering: Clustering | np.ndarray) -> int:
    """Nearest centroid; ``argmin`` returns the lowest id on ties."""
    centroids = clustering.centroids if isinstance(clustering, Clustering) else clustering
    d2 = ((centroids - np.asarray(v, dtype=float)) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def clustering_eligible(history: Sequence[Booking]) -> bool:
    """Only users who booked at least two distinct courses enter the clustering fit."""
    return len({b.course_id for b in history}) >= 2


def segment_users(
    vectors: Mapping[str, UserVector],
    k: int = 5,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    n_init: int = 10,
    standardizer: Standardizer | None = None,
) -> tuple[Standardizer, Clustering]:
    """Standardize and cluster users, iterating in sorted user-id order."""
    users = sorted(vectors)
    x = np.vstack([vectors[u].as_array() for u in users])
    std = standardizer or fit_standardizer(x)
    z = std.apply(x)
    cl = kmeans(z, min(k, len(users)), seed=seed, max_iter=max_iter, tol=tol, n_init=n_init)
    return std, Clustering(cl.centroids, cl.labels, cl.inertia, cl.inertia_history, cl.n_iter, tuple(users))
