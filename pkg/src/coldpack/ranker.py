"""Hybrid package ranking: fit all artifacts, score candidates, tune fusion weights.

Scoring a user for a target window runs

    reference selection -> course CF scores -> course filter
    -> packages active in the window -> component scores -> fused score

Each component (price, option, course) is min-max normalized over the
candidate set before the weighted sum, so the weights live on the simplex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .behavior import (
    Clustering,
    Standardizer,
    UserVector,
    assign_cluster,
    build_user_vector,
    clustering_eligible,
    segment_users,
)
from .coursecf import CooccurrenceMatrix, build_cooccurrence, course_scores, filter_courses
from .domain import OPTION_COUNTS, OPTION_FLAGS, Dataset, Package
from .optionsim import OptionModelSet, match_probabilities, train_option_models
from .pricesim import DEFAULT_OMEGA, SeasonalIndex, fit_seasonal_index, price_similarity
from .reference import select_reference

log = logging.getLogger(__name__)

COMPONENTS = ("price", "opt", "course")

#: Which raw score fills each fused slot (price, opt, course) per experimental
#: setting. ``None`` is a constant slot that contributes nothing.
SETTINGS: dict[str, tuple[str | None, str | None, str]] = {
    "jaccard": ("jaccard", "jaccard", "course"),
    "opt_only": (None, "opt", "course"),
    "full_no_r": ("price_no_r", "opt", "course"),
    "full_with_r": ("price", "opt", "course"),
}
DEFAULT_SETTING = "full_with_r"


@dataclass(frozen=True)
class FusionWeights:
    w_p: float = 1 / 3
    w_o: float = 1 / 3
    w_c: float = 1 / 3

    def __post_init__(self):
        if min(self.w_p, self.w_o, self.w_c) < 0:
            raise ValueError("fusion weights must be >= 0")

    @classmethod
    def normalized(cls, w: Sequence[float]) -> "FusionWeights":
        a = np.clip(np.asarray(w, dtype=float), 0.0, None)
        s = a.sum()
        if s <= 0:
            return cls()
        a = a / s
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.w_p, self.w_o, self.w_c])

    def to_dict(self) -> dict:
        return {"w_p": self.w_p, "w_o": self.w_o, "w_c": self.w_c}


@dataclass(frozen=True)
class RecommenderConfig:
    k: int = 5
    top_m: int = 20
    omega: float = DEFAULT_OMEGA
    lam: float = 1e-4
    seed: int = 0
    kmeans_restarts: int = 10
    cutoff: date | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.k, "top_m": self.top_m, "omega": self.omega, "lam": self.lam,
            "seed": self.seed, "kmeans_restarts": self.kmeans_restarts,
            "cutoff": self.cutoff.isoformat() if self.cutoff else None,
            "options": list(OPTION_FLAGS),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RecommenderConfig":
        cutoff = d.get("cutoff")
        return cls(
            k=int(d["k"]), top_m=int(d["top_m"]), omega=float(d["omega"]), lam=float(d["lam"]),
            seed=int(d["seed"]), kmeans_restarts=int(d.get("kmeans_restarts", 10)),
            cutoff=date.fromisoformat(cutoff) if cutoff else None,
        )


@dataclass(frozen=True)
class TrainedRecommender:
    standardizer: Standardizer
    clustering: Clustering
    option_models: OptionModelSet
    cooccurrence: CooccurrenceMatrix
    seasonal_index: SeasonalIndex
    weights: Mapping[str, FusionWeights] = field(default_factory=dict)
    config: RecommenderConfig = field(default_factory=RecommenderConfig)

    def weights_for(self, setting: str = DEFAULT_SETTING) -> FusionWeights:
        return self.weights.get(setting, FusionWeights())

    def with_weights(self, weights: Mapping[str, FusionWeights]) -> "TrainedRecommender":
        merged = dict(self.weights)
        merged.update(weights)
        return TrainedRecommender(self.standardizer, self.clustering, self.option_models,
                                  self.cooccurrence, self.seasonal_index, merged, self.config)


def training_view(ds: Dataset, cutoff: date | None) -> Dataset:
    """Bookings at or before the cutoff; the package catalog is kept whole."""
    if cutoff is None:
        return ds
    return ds.with_bookings(b for b in ds.bookings if b.booked_at <= cutoff)


def fit_recommender(train: Dataset, config: RecommenderConfig = RecommenderConfig()) -> TrainedRecommender:
    """Fit every artifact from ``train``; only bookings at or before ``config.cutoff`` are read."""
    if config.cutoff is not None:
        train = training_view(train, config.cutoff)
    histories = train.bookings_by_user
    if not histories:
        raise ValueError("no training bookings")
    ratings = train.course_ratings
    vectors = {u: build_user_vector(h, ratings) for u, h in histories.items()}
    eligible = {u: vectors[u] for u in vectors if clustering_eligible(histories[u])}
    if len(eligible) < max(2, config.k):
        log.warning("only %d clustering-eligible users; clustering everyone", len(eligible))
        eligible = vectors
    std, clustering = segment_users(eligible, k=config.k, seed=config.seed, n_init=config.kmeans_restarts)
    models = train_option_models(histories, ratings, clustering, std, lam=config.lam)
    cooc = build_cooccurrence(train.bookings, [c.id for c in train.courses])
    catalog = train.packages
    if config.cutoff is not None:
        catalog = [p for p in catalog if p.active_from <= config.cutoff]
    idx = fit_seasonal_index(catalog)
    return TrainedRecommender(std, clustering, models, cooc, idx, {}, config)


# -- scoring -------------------------------------------------------------------


def minmax(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def final_score(components: np.ndarray, weights: FusionWeights | Sequence[float]) -> np.ndarray:
    """Weighted sum of min-max normalized component columns (price, opt, course)."""
    w = weights.as_array() if isinstance(weights, FusionWeights) else np.asarray(weights, dtype=float)
    c = np.atleast_2d(np.asarray(components, dtype=float))
    norm = np.column_stack([minmax(c[:, j]) for j in range(c.shape[1])]) if len(c) else c
    return norm @ w


def rank_order(scores: np.ndarray, ids: Sequence[str]) -> np.ndarray:
    """Indices sorted by descending score, ties to the lower id."""
    return np.array(sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i])), dtype=int)


def jaccard_tokens(p: Package) -> frozenset[str]:
    ov = p.options
    toks = {f for f in OPTION_FLAGS if getattr(ov, f)}
    toks |= {f"{k}={getattr(ov, k)}" for k in OPTION_COUNTS}
    toks.add(f"promotion_type={p.promotion_type}")
    return frozenset(toks)


def jaccard_similarity(p: Package, p_ref: Package) -> float:
    a, b = jaccard_tokens(p), jaccard_tokens(p_ref)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


@dataclass
class CandidateTable:
    """Raw per-candidate scores for one user and window."""

    user_id: str
    package_ids: list[str]
    raw: dict[str, np.ndarray]
    reference: object | None = None
    cold: bool = False

    def __len__(self) -> int:
        return len(self.package_ids)

    def components(self, setting: str = DEFAULT_SETTING) -> np.ndarray:
        if self.cold:
            # cold users are ranked by the option score alone, whatever the setting
            z = np.zeros(len(self))
            return np.column_stack([z, self.raw["opt"], z])
        cols = []
        for src in SETTINGS[setting]:
            cols.append(np.zeros(len(self)) if src is None else self.raw[src])
        return np.column_stack(cols) if cols else np.zeros((0, 3))

    def scores(self, setting: str, weights: FusionWeights | Sequence[float]) -> np.ndarray:
        if not len(self):
            return np.zeros(0)
        w = weights
        if self.cold:
            w = (0.0, 1.0, 0.0)
        return final_score(self.components(setting), w)

    def top(self, setting: str, weights: FusionWeights | Sequence[float], n: int) -> list[str]:
        if not len(self):
            return []
        order = rank_order(self.scores(setting, weights), self.package_ids)
        return [self.package_ids[i] for i in order[:n]]


class Ranker:
    """A trained recommender bound to a dataset: histories up to the cutoff plus the package catalog."""

    def __init__(self, model: TrainedRecommender, dataset: Dataset):
        self.model = model
        self.dataset = dataset
        cutoff = model.config.cutoff
        self.history = training_view(dataset, cutoff).bookings_by_user
        self.packages_by_course: dict[str, list[Package]] = {}
        for p in sorted(dataset.packages, key=lambda p: p.id):
            self.packages_by_course.setdefault(p.course_id, []).append(p)
        self._popular: list[str] | None = None

    def user_state(self, user_id: str) -> tuple[UserVector, np.ndarray, int]:
        vec = build_user_vector(self.history[user_id], self.dataset.course_ratings)
        z = self.model.standardizer.apply(vec)
        return vec, z, assign_cluster(z, self.model.clustering)

    def active_packages(self, courses: Iterable[str], window: tuple[date, date]) -> list[Package]:
        start, end = window
        out = []
        for c in courses:
            out.extend(p for p in self.packages_by_course.get(c, ()) if p.is_active(start, end))
        return sorted(out, key=lambda p: p.id)

    def popular_courses(self) -> list[str]:
        if self._popular is None:
            counts: dict[str, int] = {}
            for hs in self.history.values():
                for b in hs:
                    counts[b.course_id] = counts.get(b.course_id, 0) + 1
            self._popular = sorted(counts, key=lambda c: (-counts[c], c))
        return self._popular

    def candidates(self, user_id: str, window: tuple[date, date]) -> CandidateTable:
        m = self.model
        hist = self.history.get(user_id)
        if not hist:
            return self._cold_candidates(user_id, window)
        vec, z, cluster = self.user_state(user_id)
        ref = select_reference(hist, window[0])
        scores = course_scores(hist, m.cooccurrence)
        courses = filter_courses(scores, m.config.top_m, ref.course_id)
        pkgs = self.active_packages(courses, window)
        ref_pkg = self.dataset.package_by_id[ref.package_id]
        prices = np.array([p.price for p in pkgs], dtype=float)
        months = np.array([p.play_month for p in pkgs], dtype=int)
        idx = np.asarray(m.seasonal_index.values)
        r = idx[months - 1] / m.seasonal_index[ref_pkg.play_month] if len(pkgs) else np.zeros(0)
        sigma = vec.std_spending
        probs = m.option_models.probabilities(z, cluster)
        flags = np.array([p.options.flags() for p in pkgs], dtype=float).reshape(-1, len(OPTION_FLAGS))
        raw = {
            "price": price_similarity(prices, ref_pkg.price, sigma, m.config.omega, r),
            "price_no_r": price_similarity(prices, ref_pkg.price, sigma, m.config.omega, 1.0),
            "opt": match_probabilities(flags, probs).sum(axis=1),
            "course": np.array([scores.get(p.course_id, 0.0) for p in pkgs]),
        }
        ref_tokens = jaccard_tokens(ref_pkg)
        raw["jaccard"] = np.array([_jaccard_sets(jaccard_tokens(p), ref_tokens) for p in pkgs])
        raw = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in raw.items()}
        return CandidateTable(user_id, [p.id for p in pkgs], raw, ref)

    def _cold_candidates(self, user_id: str, window: tuple[date, date]) -> CandidateTable:
        m = self.model
        z = np.zeros_like(m.standardizer.mean)  # standardized population-mean user
        cluster = assign_cluster(z, m.clustering)
        pkgs = self.active_packages(self.popular_courses()[: m.config.top_m], window)
        probs = m.option_models.probabilities(z, cluster)
        flags = np.array([p.options.flags() for p in pkgs], dtype=float).reshape(-1, len(OPTION_FLAGS))
        opt = match_probabilities(flags, probs).sum(axis=1)
        zero = np.zeros(len(pkgs))
        raw = {"opt": opt, "price": zero, "price_no_r": zero, "course": zero, "jaccard": zero}
        return CandidateTable(user_id, [p.id for p in pkgs], raw, None, cold=True)

    def recommend(
        self,
        user_id: str,
        window: tuple[date, date],
        n: int = 5,
        setting: str = DEFAULT_SETTING,
        weights: FusionWeights | None = None,
    ) -> dict:
        """Top-n packages active in ``window`` with a per-component breakdown."""
        table = self.candidates(user_id, window)
        w = weights or self.model.weights_for(setting)
        if not len(table):
            return {"user_id": user_id, "cold_start": table.cold, "recommendations": []}
        scores = table.scores(setting, w)
        comps = table.components(setting)
        order = rank_order(scores, table.package_ids)[:n]
        recs = []
        for i in order:
            recs.append({
                "package_id": table.package_ids[i],
                "score": float(scores[i]),
                "components": dict(zip(COMPONENTS, (float(v) for v in comps[i]))),
            })
        out = {"user_id": user_id, "cold_start": table.cold, "setting": setting,
               "weights": (w.to_dict() if isinstance(w, FusionWeights) else list(w)),
               "recommendations": recs}
        if table.reference is not None:
            out["reference"] = {"course_id": table.reference.course_id, "package_id": table.reference.package_id}
        return out


def _jaccard_sets(a: frozenset, b: frozenset) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 1.0


# -- weight tuning ---------------------------------------------------------------


def simplex_neighbors(w: np.ndarray, step: float) -> list[np.ndarray]:
    """Move ``step`` of mass from coordinate j to i for each ordered pair (6 neighbors)."""
    out = []
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            v = w.copy()
            moved = min(step, v[j])
            v[i] += moved
            v[j] -= moved
            out.append(v / v.sum())
    return out


@dataclass(frozen=True)
class ClimbResult:
    weights: FusionWeights
    value: float
    start_value: float
    trajectory: tuple[float, ...]
    evaluations: int


def hill_climb(
    objective: Callable[[np.ndarray], float],
    start: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    step: float = 0.2,
    min_step: float = 0.01,
    max_rounds: int = 50,
    seed: int = 0,
) -> ClimbResult:
    """Coordinate hill climbing on the 2-simplex.

    Each round evaluates the six neighbors of the current point and moves to
    the best strict improvement; with no improvement the step is halved. Equal
    best neighbors are broken by a seeded shuffle. Stops when the step drops
    below ``min_step`` or after ``max_rounds``.
    """
    rng = np.random.default_rng(seed)
    cur = np.asarray(start, dtype=float)
    cur = cur / cur.sum()
    cache: dict[tuple, float] = {}

    def f(w: np.ndarray) -> float:
        key = tuple(np.round(w, 12))
        if key not in cache:
            cache[key] = float(objective(w))
        return cache[key]

    cur_val = start_val = f(cur)
    traj = [cur_val]
    for _ in range(max_rounds):
        if step < min_step:
            break
        nbrs = simplex_neighbors(cur, step)
        vals = np.array([f(v) for v in nbrs])
        best = vals.max()
        if best > cur_val:
            ties = np.flatnonzero(vals == best)
            pick = int(rng.choice(ties)) if len(ties) > 1 else int(ties[0])
            cur, cur_val = nbrs[pick], float(best)
        else:
            step /= 2
        traj.append(cur_val)
    return ClimbResult(FusionWeights.normalized(cur), cur_val, start_val, tuple(traj), len(cache))


def hill_climb_weights(
    tables: Sequence[CandidateTable],
    truth: Mapping[str, set[str]],
    n: int = 5,
    setting: str = DEFAULT_SETTING,
    step: float = 0.2,
    max_rounds: int = 50,
    seed: int = 0,
) -> ClimbResult:
    """Tune fusion weights for one setting by maximizing EMP@n on a validation split."""
    from .evalharness import emp_at_n

    tables = [t for t in tables if truth.get(t.user_id)]
    if not tables:
        raise ValueError("validation split has no users with truth")
    normed = [_NormedTable(t, setting) for t in tables]

    def objective(w: np.ndarray) -> float:
        recs = {nt.user_id: nt.top(w, n) for nt in normed}
        return emp_at_n(recs, truth, n)

    return hill_climb(objective, step=step, max_rounds=max_rounds, seed=seed)


class _NormedTable:
    """Pre-normalized component matrix for fast repeated top-n under different weights."""

    def __init__(self, t: CandidateTable, setting: str):
        self.user_id = t.user_id
        self.ids = t.package_ids
        c = t.components(setting)
        self.norm = np.column_stack([minmax(c[:, j]) for j in range(3)]) if len(t) else np.zeros((0, 3))
        self.fixed = (0.0, 1.0, 0.0) if t.cold else None
        # lexicographic id rank for tie-breaking
        self.id_rank = np.argsort(np.argsort(np.array(self.ids))) if len(t) else np.zeros(0, int)

    def top(self, w, n: int) -> list[str]:
        if not len(self.ids):
            return []
        s = self.norm @ np.asarray(self.fixed if self.fixed is not None else w, dtype=float)
        order = np.lexsort((self.id_rank, -s))[:n]
        return [self.ids[i] for i in order]
