"""Offline evaluation: temporal split, EMP@n, and the four-setting experiment."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Mapping, Sequence


from .domain import Booking, Dataset
from .ranker import (
    SETTINGS,
    FusionWeights,
    Ranker,
    RecommenderConfig,
    TrainedRecommender,
    fit_recommender,
    hill_climb_weights,
    jaccard_similarity,
)

log = logging.getLogger(__name__)

ALL_SETTINGS = tuple(SETTINGS)

__all__ = [
    "ALL_SETTINGS", "ExperimentReport", "TemporalSplit", "emp_at_n", "emp_curve", "evaluate_model",
    "jaccard_similarity", "run_experiment", "temporal_split", "tune_settings",
]


def emp_at_n(recommendations: Mapping[str, Sequence[str]], truth: Mapping[str, set[str]], n: int) -> float:
    """Mean over users with non-empty truth of |top-n ∩ truth| / |truth|.

    Returns NaN when no user has truth (the metric is undefined, not zero).
    """
    vals = []
    for u, t in truth.items():
        if not t:
            continue
        recs = set(list(recommendations.get(u, ()))[:n])
        vals.append(len(recs & set(t)) / len(t))
    return math.fsum(vals) / len(vals) if vals else float("nan")


def emp_curve(recommendations, truth, n_max: int) -> list[float]:
    return [emp_at_n(recommendations, truth, n) for n in range(1, n_max + 1)]


@dataclass(frozen=True)
class TemporalSplit:
    train: tuple[Booking, ...]
    test: tuple[Booking, ...]
    cutoff: date
    horizon: int
    truth: Mapping[str, set[str]]

    @property
    def window(self) -> tuple[date, date]:
        return self.cutoff + timedelta(days=1), self.cutoff + timedelta(days=self.horizon)


def temporal_split(ds: Dataset, cutoff: date, horizon: int = 15) -> TemporalSplit:
    """Train: booked at or before ``cutoff``. Test: booked in ``(cutoff, cutoff + horizon]``."""
    end = cutoff + timedelta(days=horizon)
    train = tuple(b for b in ds.bookings if b.booked_at <= cutoff)
    test = tuple(b for b in ds.bookings if cutoff < b.booked_at <= end)
    if not train:
        raise ValueError(f"no training bookings at or before {cutoff}")
    if not test:
        raise ValueError(f"no test bookings in ({cutoff}, {end}]")
    truth: dict[str, set[str]] = {}
    for b in test:
        truth.setdefault(b.user_id, set()).add(b.package_id)
    return TemporalSplit(train, test, cutoff, horizon, truth)


@dataclass
class ExperimentReport:
    curves: dict[str, list[float]]
    users: int
    cutoff: date
    horizon: int
    weights: dict[str, FusionWeights] = field(default_factory=dict)
    validation: dict[str, dict[str, float]] = field(default_factory=dict)
    inactive_recommendations: int = 0
    max_candidates: int = 0
    seconds: float = 0.0

    def emp(self, setting: str, n: int) -> float:
        return self.curves[setting][n - 1]

    def relative_improvement(self, a: str, b: str, n: int = 5) -> float | None:
        if a not in self.curves or b not in self.curves:
            return None
        base = self.emp(b, n)
        return self.emp(a, n) / base - 1.0 if base > 0 else None

    def rows(self) -> list[tuple[str, int, float, int]]:
        return [(s, n + 1, v, self.users) for s, c in self.curves.items() for n, v in enumerate(c)]

    def summary(self, n: int = 5) -> dict:
        out = {
            "cutoff": self.cutoff.isoformat(),
            "horizon": self.horizon,
            "users": self.users,
            f"emp_at_{n}": {s: self.emp(s, n) for s in self.curves},
            "weights": {s: w.to_dict() for s, w in self.weights.items()},
            "validation": self.validation,
            "inactive_recommendations": self.inactive_recommendations,
            "max_candidates": self.max_candidates,
        }
        rel = {}
        for a, b in (("full_with_r", "jaccard"), ("full_with_r", "opt_only")):
            rel[f"{a}_vs_{b}"] = self.relative_improvement(a, b, n)
        out[f"relative_improvement_at_{n}"] = rel
        return out


def _tables(ranker: Ranker, users, window):
    return [ranker.candidates(u, window) for u in sorted(users)]


def tune_settings(
    ds: Dataset,
    cutoff: date,
    horizon: int = 15,
    settings: Sequence[str] = ALL_SETTINGS,
    config: RecommenderConfig = RecommenderConfig(),
    n: int = 5,
    step: float = 0.2,
    max_rounds: int = 50,
    model: TrainedRecommender | None = None,
) -> tuple[dict[str, FusionWeights], dict[str, dict[str, float]]]:
    """Hill-climb fusion weights per setting on the window ``(cutoff, cutoff + horizon]``.

    The model must be fitted on bookings up to ``cutoff``; one is fitted when
    not supplied.
    """
    vsplit = temporal_split(ds, cutoff, horizon)
    if model is None:
        model = fit_recommender(ds, _with_cutoff(config, cutoff))
    ranker = Ranker(model, ds)
    tables = _tables(ranker, vsplit.truth, vsplit.window)
    weights, validation = {}, {}
    for s in settings:
        res = hill_climb_weights(tables, vsplit.truth, n, s, step, max_rounds, config.seed)
        weights[s] = res.weights
        validation[s] = {"uniform": res.start_value, "tuned": res.value}
        log.info("tuned %s: %s (EMP@%d %.4f -> %.4f)", s, res.weights, n, res.start_value, res.value)
    return weights, validation


def evaluate_model(
    model: TrainedRecommender,
    ds: Dataset,
    split: TemporalSplit,
    settings: Sequence[str] = ALL_SETTINGS,
    weights: Mapping[str, FusionWeights] | None = None,
    N: int = 20,
) -> ExperimentReport:
    """EMP@1..N per setting for a model fitted on ``split``'s training side."""
    weights = {s: (weights or {}).get(s, model.weights_for(s)) for s in settings}
    ranker = Ranker(model, ds)
    window = split.window
    tables = _tables(ranker, split.truth, window)
    curves: dict[str, list[float]] = {}
    inactive = 0
    pkg = ds.package_by_id
    for s in settings:
        recs = {t.user_id: t.top(s, weights[s], N) for t in tables}
        inactive += sum(not pkg[p].is_active(*window) for r in recs.values() for p in r)
        curves[s] = emp_curve(recs, split.truth, N)
    return ExperimentReport(
        curves=curves,
        users=sum(1 for t in split.truth.values() if t),
        cutoff=split.cutoff,
        horizon=split.horizon,
        weights=dict(weights),
        inactive_recommendations=inactive,
        max_candidates=max((len(t) for t in tables), default=0),
    )


def run_experiment(
    ds: Dataset,
    cutoff: date,
    horizon: int = 15,
    settings: Sequence[str] = ALL_SETTINGS,
    N: int = 20,
    config: RecommenderConfig = RecommenderConfig(),
    tune: bool = True,
    tune_n: int = 5,
    step: float = 0.2,
    max_rounds: int = 50,
) -> ExperimentReport:
    """Train strictly on the training side and report EMP@1..N per setting.

    With ``tune`` the fusion weights of every setting are hill-climbed on a
    validation window ``(cutoff - horizon, cutoff]`` using a model fitted on
    bookings up to ``cutoff - horizon``; otherwise uniform weights are used.
    All settings share reference selection and course filtering.
    """
    if not settings:
        raise ValueError("no settings requested")
    unknown = [s for s in settings if s not in SETTINGS]
    if unknown:
        raise ValueError(f"unknown settings {unknown}")
    t0 = time.perf_counter()
    split = temporal_split(ds, cutoff, horizon)
    train_only = ds.with_bookings(split.train)

    weights: dict[str, FusionWeights] = {s: FusionWeights() for s in settings}
    validation: dict[str, dict[str, float]] = {}
    if tune:
        weights, validation = tune_settings(
            train_only, cutoff - timedelta(days=horizon), horizon, settings, config, tune_n, step, max_rounds
        )
    model = fit_recommender(train_only, _with_cutoff(config, cutoff))
    report = evaluate_model(model, ds, split, settings, weights, N)
    report.validation = validation
    report.seconds = time.perf_counter() - t0
    return report


def _with_cutoff(cfg: RecommenderConfig, cutoff: date) -> RecommenderConfig:
    return RecommenderConfig(cfg.k, cfg.top_m, cfg.omega, cfg.lam, cfg.seed, cfg.kmeans_restarts, cutoff)
