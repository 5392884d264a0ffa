"""Per-segment logistic models of next-booking options and the option similarity score.

For every (cluster, option) cell a binary logistic regression maps a user's
standardized behavior vector to the probability that the *next* booking has
that option. Training holds out each user's last booking as the response and
rebuilds the vector from the earlier history.

The option similarity of a package sums, over the option flags, the
probability that the user's next booking agrees with the package on that
flag: ``P_k`` when the flag is set and ``1 - P_k`` when it is not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .behavior import FEATURES, Clustering, Standardizer, assign_cluster, build_user_vector
from .domain import OPTION_FLAGS, Booking, Package, option_flags

P_MIN = 1e-3
P_MAX = 1.0 - 1e-3
_ONE_BELOW = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray

    def logit(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.coefficients.shape[0]:
            raise ValueError(
                f"dimension mismatch: model has {self.coefficients.shape[0]} coefficients, vector has {u.shape[-1]}"
            )
        return self.intercept + u @ self.coefficients


def sigmoid(z):
    """Logistic function that stays inside the open interval (0, 1) for |z| <= 700."""
    z = np.asarray(z, dtype=float)
    ez = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    out = np.minimum(out, _ONE_BELOW)
    return out if out.ndim else float(out)


def option_probability(m: LogisticModel, u_std: np.ndarray):
    return sigmoid(m.logit(u_std))


# -- fitting ---------------------------------------------------------------


def log_loss(params: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Mean log-loss plus ``lam/2 * ||coef||^2``; ``params[0]`` is the unpenalized intercept."""
    z = params[0] + x @ params[1:]
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * params[1:] @ params[1:])


def log_loss_grad(params: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    z = params[0] + x @ params[1:]
    r = (sigmoid(z) - y) / len(y)
    g = np.empty_like(params)
    g[0] = r.sum()
    g[1:] = x.T @ r + lam * params[1:]
    return g


@dataclass(frozen=True)
class FitInfo:
    n: int
    positives: int
    iterations: int
    initial_loss: float
    final_loss: float
    constant: bool = False


def fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    lam: float = 1e-4,
    lr: float = 0.1,
    max_epochs: int = 500,
    tol: float = 1e-8,
) -> tuple[LogisticModel, FitInfo]:
    """Full-batch gradient descent from zero, halving the step whenever the loss rises.

    All-0 or all-1 responses give a constant model clamped to [P_MIN, P_MAX].
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = x.shape
    pos = int(y.sum())
    if pos == 0 or pos == n:
        p = min(max(pos / n, P_MIN), P_MAX) if n else 0.5
        model = LogisticModel(float(np.log(p / (1 - p))), np.zeros(d))
        loss = log_loss(np.r_[model.intercept, model.coefficients], x, y, lam) if n else 0.0
        return model, FitInfo(n, pos, 0, loss, loss, constant=True)

    params = np.zeros(d + 1)
    loss = initial = log_loss(params, x, y, lam)
    epochs = 0
    for epochs in range(1, max_epochs + 1):
        step = params - lr * log_loss_grad(params, x, y, lam)
        new_loss = log_loss(step, x, y, lam)
        if new_loss > loss:
            lr *= 0.5
            continue
        improvement = loss - new_loss
        params, loss = step, new_loss
        if improvement < tol:
            break
    return LogisticModel(float(params[0]), params[1:].copy()), FitInfo(n, pos, epochs, initial, loss)


@dataclass(frozen=True)
class OptionModelSet:
    models: Mapping[tuple[int, str], LogisticModel]
    info: Mapping[tuple[int, str], FitInfo] = field(default_factory=dict)

    @property
    def clusters(self) -> list[int]:
        return sorted({c for c, _ in self.models})

    def probabilities(self, u_std: np.ndarray, cluster: int) -> np.ndarray:
        """P_k(u) for every option flag, in canonical flag order."""
        if (cluster, OPTION_FLAGS[0]) not in self.models:
            raise KeyError(f"no option models for cluster {cluster}")
        return np.array([option_probability(self.models[cluster, k], u_std) for k in OPTION_FLAGS])

    def to_dict(self) -> dict:
        cells = []
        for (c, k), m in sorted(self.models.items()):
            cell = {
                "cluster": c,
                "option": k,
                "intercept": m.intercept,
                "coefficients": dict(zip(FEATURES, m.coefficients.tolist())),
            }
            fi = self.info.get((c, k))
            if fi is not None:
                cell.update(
                    n=fi.n, positives=fi.positives, iterations=fi.iterations,
                    initial_loss=fi.initial_loss, final_loss=fi.final_loss, constant=fi.constant,
                )
            cells.append(cell)
        return {"features": list(FEATURES), "options": list(OPTION_FLAGS), "cells": cells}

    @classmethod
    def from_dict(cls, d: dict) -> "OptionModelSet":
        models, info = {}, {}
        for cell in d["cells"]:
            key = (int(cell["cluster"]), cell["option"])
            coefs = np.array([cell["coefficients"][f] for f in FEATURES], dtype=float)
            models[key] = LogisticModel(float(cell["intercept"]), coefs)
            if "n" in cell:
                info[key] = FitInfo(
                    cell["n"], cell["positives"], cell["iterations"],
                    cell["initial_loss"], cell["final_loss"], cell["constant"],
                )
        return cls(models, info)


def leave_last_out(history: Sequence[Booking], course_ratings: Mapping[str, float]):
    """(vector of all but the last booking, flags of the last booking)."""
    *rest, last = history
    return build_user_vector(rest, course_ratings), option_flags(last)


def train_option_models(
    histories: Mapping[str, Sequence[Booking]],
    course_ratings: Mapping[str, float],
    clustering: Clustering,
    standardizer: Standardizer,
    lam: float = 1e-4,
    lr: float = 0.1,
    max_epochs: int = 500,
    tol: float = 1e-8,
) -> OptionModelSet:
    """Fit one model per (cluster, option); users with fewer than 2 bookings are skipped.

    Each training row is assigned to the cluster nearest to its standardized
    leave-last-out vector. A cluster that receives no rows gets constant models
    at the pooled base rate.
    """
    rows: dict[int, list[np.ndarray]] = {c: [] for c in range(clustering.k)}
    ys: dict[int, list[tuple[int, ...]]] = {c: [] for c in range(clustering.k)}
    for user in sorted(histories):
        h = histories[user]
        if len(h) < 2:
            continue
        vec, flags = leave_last_out(h, course_ratings)
        z = standardizer.apply(vec)
        c = assign_cluster(z, clustering)
        rows[c].append(z)
        ys[c].append(flags)

    all_y = [f for c in ys for f in ys[c]]
    pooled = np.mean(all_y, axis=0) if all_y else np.full(len(OPTION_FLAGS), 0.5)
    d = len(FEATURES)
    models: dict[tuple[int, str], LogisticModel] = {}
    info: dict[tuple[int, str], FitInfo] = {}
    for c in range(clustering.k):
        x = np.vstack(rows[c]) if rows[c] else np.zeros((0, d))
        y = np.array(ys[c], dtype=float).reshape(-1, len(OPTION_FLAGS))
        for j, k in enumerate(OPTION_FLAGS):
            if len(x) == 0:
                p = min(max(float(pooled[j]), P_MIN), P_MAX)
                models[c, k] = LogisticModel(float(np.log(p / (1 - p))), np.zeros(d))
                info[c, k] = FitInfo(0, 0, 0, 0.0, 0.0, constant=True)
                continue
            models[c, k], info[c, k] = fit_logistic(x, y[:, j], lam, lr, max_epochs, tol)
    return OptionModelSet(models, info)


def match_probabilities(flags: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Per-flag agreement probabilities; ``flags`` may be (5,) or (n, 5)."""
    flags = np.asarray(flags, dtype=float)
    return flags * probs + (1.0 - flags) * (1.0 - probs)


def option_similarity(
    p: Package | Sequence[int],
    u_std: np.ndarray,
    models: OptionModelSet,
    cluster: int,
) -> float:
    flags = option_flags(p) if isinstance(p, Package) else p
    probs = models.probabilities(u_std, cluster)
    return float(match_probabilities(np.asarray(flags), probs).sum())


def weights_table(models: OptionModelSet, cluster: int) -> list[list]:
    """Rows of (attribute, weight per option) for one cluster, with the intercept last."""
    rows = []
    for i, f in enumerate(FEATURES):
        rows.append([f] + [models.models[cluster, k].coefficients[i] for k in OPTION_FLAGS])
    rows.append(["intercept"] + [models.models[cluster, k].intercept for k in OPTION_FLAGS])
    return rows
