"""Seasonal price index, price similarity, and the per-course linear price model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .behavior import spending_stats
from .domain import PROMOTION_TYPES, Booking, Package

DEFAULT_OMEGA = 1000.0


@dataclass(frozen=True)
class SeasonalIndex:
    """Monthly mean package price over the grand mean; index 0 is January."""

    values: tuple[float, ...]

    def __getitem__(self, month: int) -> float:
        return self.values[month - 1]

    def to_dict(self) -> dict:
        return {"monthly": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "SeasonalIndex":
        return cls(tuple(float(v) for v in d["monthly"]))


def fit_seasonal_index(packages: Iterable[Package]) -> SeasonalIndex:
    """Months without any package are imputed to 1."""
    sums = np.zeros(12)
    counts = np.zeros(12)
    for p in packages:
        sums[p.play_month - 1] += p.price
        counts[p.play_month - 1] += 1
    if counts.sum() == 0:
        return SeasonalIndex((1.0,) * 12)
    grand = sums.sum() / counts.sum()
    if grand <= 0:
        return SeasonalIndex((1.0,) * 12)
    vals = []
    for s, c in zip(sums, counts):
        v = (s / c) / grand if c else 1.0
        vals.append(float(v) if v > 0 else 1.0)
    return SeasonalIndex(tuple(vals))


def seasonal_ratio(idx: SeasonalIndex, month_p: int, month_ref: int) -> float:
    return idx[month_p] / idx[month_ref]


def price_similarity(price, ref_price, sigma_u, omega: float = DEFAULT_OMEGA, r=1.0):
    """``1 / (1 + r * |price - ref_price| / (omega + sigma_u))``; broadcasts over arrays."""
    if np.any(np.asarray(omega) <= 0):
        raise ValueError("omega must be > 0")
    gap = np.abs(np.asarray(price, dtype=float) - np.asarray(ref_price, dtype=float))
    out = 1.0 / (1.0 + np.asarray(r, dtype=float) * gap / (omega + np.asarray(sigma_u, dtype=float)))
    return out if out.ndim else float(out)


def user_spending_stats(history: Sequence[Booking]) -> tuple[float, float]:
    """(mean, population sd) of price paid; shares its arithmetic with the user vector."""
    return spending_stats(history)


# -- linear price model ------------------------------------------------------

#: Attribute set A. The binary ones also interact with month and weekday.
PRICE_ATTRIBUTES: tuple[str, ...] = (
    "lunch", "caddie", "competition", "pair_party", "min_party_size", "min_num_parties", "num_laps",
)
INTERACTING_ATTRIBUTES: tuple[str, ...] = ("lunch", "caddie", "competition", "pair_party")


def price_feature_names(interactions: Sequence[str] = ("month", "dow")) -> list[str]:
    names = ["intercept"]
    names += [f"month_{m}" for m in range(2, 13)]
    names += [f"dow_{d}" for d in range(2, 8)]
    names += list(PRICE_ATTRIBUTES)
    names += [f"promo_{t}" for t in PROMOTION_TYPES[1:]] + ["shortness"]
    if "month" in interactions:
        names += [f"month_{m}:{a}" for m in range(2, 13) for a in INTERACTING_ATTRIBUTES]
    if "dow" in interactions:
        names += [f"dow_{d}:{a}" for d in range(2, 8) for a in INTERACTING_ATTRIBUTES]
    return names


def price_features(p: Package, interactions: Sequence[str] = ("month", "dow")) -> np.ndarray:
    """Dummy-coded month / weekday main effects, attributes, promotion, and month/weekday x flag terms.

    The full four-way product of the temporal, attribute and promotional sets is
    too wide for a single course's package count; this keeps the main effects of
    every set plus its pairwise temporal x flag interactions.
    """
    ov = p.options
    month = np.zeros(11)
    if p.play_month > 1:
        month[p.play_month - 2] = 1.0
    dow = np.zeros(6)
    if p.play_dow > 1:
        dow[p.play_dow - 2] = 1.0
    attrs = np.array([getattr(ov, a) for a in PRICE_ATTRIBUTES], dtype=float)
    promo = np.array([1.0 if p.promotion_type == t else 0.0 for t in PROMOTION_TYPES[1:]])
    flags = attrs[: len(INTERACTING_ATTRIBUTES)]
    parts = [np.ones(1), month, dow, attrs, promo, np.array([float(p.shortness)])]
    if "month" in interactions:
        parts.append(np.outer(month, flags).ravel())
    if "dow" in interactions:
        parts.append(np.outer(dow, flags).ravel())
    return np.concatenate(parts)


@dataclass(frozen=True)
class PriceModelFit:
    feature_names: tuple[str, ...]
    coefficients: np.ndarray
    r_squared: float
    predictions: np.ndarray
    prices: np.ndarray
    interactions: tuple[str, ...] = ("month", "dow")

    @property
    def residuals(self) -> np.ndarray:
        return self.prices - self.predictions

    def predict(self, packages: Sequence[Package]) -> np.ndarray:
        x = np.vstack([price_features(p, self.interactions) for p in packages])
        return x @ self.coefficients

    def residual_summary(self) -> dict[str, float]:
        res = self.residuals
        q = np.quantile(self.predictions, [0.25, 0.75])
        low = res[self.predictions <= q[0]]
        high = res[self.predictions >= q[1]]
        return {
            "rmse": float(np.sqrt(np.mean(res**2))),
            "max_abs": float(np.max(np.abs(res))),
            "sd_bottom_quartile": float(low.std()) if len(low) else 0.0,
            "sd_top_quartile": float(high.std()) if len(high) else 0.0,
        }


def fit_price_model(
    packages: Sequence[Package],
    interactions: Sequence[str] = ("month", "dow"),
    ridge: float = 1e-8,
) -> PriceModelFit:
    """Ridge-stabilized least squares of price on :func:`price_features`."""
    names = price_feature_names(interactions)
    if len(packages) < len(names) + 5:
        raise ValueError(f"need at least {len(names) + 5} packages for {len(names)} features, got {len(packages)}")
    x = np.vstack([price_features(p, interactions) for p in packages])
    y = np.array([p.price for p in packages], dtype=float)
    beta = np.linalg.solve(x.T @ x + ridge * np.eye(x.shape[1]), x.T @ y)
    pred = x @ beta
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PriceModelFit(tuple(names), beta, r2, pred, y, tuple(interactions))
