"""Synthetic golf-booking corpus with planted user segments and a linear price truth.

Nothing here is fitted to real marketplace data. The archetype table, the
seasonal multipliers and the lifespan mixture are hand-set defaults chosen to
reproduce the qualitative shapes the recommender is built around: mostly
month-long packages with a tail of short specials, five behavioral segments
of sizes 35/35/10/10/10 %, about 90 % of repeat users spending within 30 % of
their own mean, and prices that are linear in the package features with
noise growing with the price level.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from datetime import date, timedelta
from typing import Mapping

import numpy as np

from .domain import (
    PROMOTION_TYPES,
    Booking,
    Course,
    Dataset,
    OptionVector,
    Package,
)


class ConfigError(ValueError):
    """Invalid generator or run configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Archetype:
    name: str
    # lunch, caddie, competition, holiday, pair_party
    option_rates: tuple[float, float, float, float, float]
    spend: float
    spend_spread: float
    within_sd: float
    price_tolerance: float
    party_sizes: tuple[int, ...]
    party_probs: tuple[float, ...]
    num_parties: tuple[int, ...]
    num_parties_probs: tuple[float, ...]
    rating_pref: float
    course_price_spread: float = 0.2


#: Default segment table (our values; only the segment names and shares come
#: from the reference analysis).
ARCHETYPES: tuple[Archetype, ...] = (
    Archetype("pairs", (0.55, 0.05, 0.05, 0.60, 0.85), 8000, 0.20, 0.04, 0.06,
              (2,), (1.0,), (1,), (1.0,), 3.4),
    Archetype("friends", (0.85, 0.08, 0.12, 0.80, 0.05), 9000, 0.20, 0.04, 0.06,
              (4, 3), (0.8, 0.2), (1, 2), (0.7, 0.3), 3.5),
    Archetype("refined", (0.60, 0.80, 0.10, 0.40, 0.15), 11000, 0.20, 1.20, 0.15,
              (4, 3), (0.6, 0.4), (1,), (1.0,), 4.3, 2.0),
    Archetype("competitors", (0.70, 0.08, 0.85, 0.70, 0.05), 9500, 0.20, 0.04, 0.06,
              (4,), (1.0,), (3, 4, 5, 6), (0.3, 0.3, 0.2, 0.2), 3.6),
    Archetype("casual", (0.15, 0.03, 0.05, 0.20, 0.30), 6500, 0.20, 0.04, 0.06,
              (3,), (1.0,), (1,), (1.0,), 2.8),
)

#: Monthly price multipliers, January first; spring and autumn peaks.
DEFAULT_SEASONAL: tuple[float, ...] = (0.88, 0.89, 0.98, 1.08, 1.12, 1.02, 0.94, 0.93, 1.00, 1.10, 1.09, 0.97)

#: Linear price coefficients. Flag premiums are scaled by the month multiplier
#: together with the course base price; the other terms are not.
DEFAULT_COEFFICIENTS: dict[str, float] = {
    "lunch": 900.0,
    "caddie": 3000.0,
    "competition": 700.0,
    "pair_party": 400.0,
    "min_party_size": -120.0,
    "min_num_parties": -80.0,
    "num_laps": 500.0,
    "shortness": 8.0,
    "dow_2": 0.0,
    "dow_3": -100.0,
    "dow_4": 0.0,
    "dow_5": 150.0,
    "dow_6": 1000.0,
    "dow_7": 800.0,
    "promo_early_bird": -500.0,
    "promo_last_minute": -900.0,
    "promo_member": -300.0,
}
SEASONAL_TERMS: tuple[str, ...] = ("lunch", "caddie", "competition", "pair_party")
NOISE_REFERENCE_PRICE = 10000.0

_HOLIDAYS_MD = ((1, 1), (1, 2), (1, 3), (1, 14), (2, 11), (3, 20), (4, 29), (5, 3), (5, 4), (5, 5),
                (7, 16), (9, 17), (9, 22), (10, 8), (11, 3), (11, 23), (12, 23))


@dataclass(frozen=True)
class GeneratorConfig:
    n_users: int = 10000
    n_courses: int = 200
    n_packages_per_course_month: int = 10
    months: int = 12
    holdout_days: int = 30
    start: date = date(2012, 6, 1)
    cluster_mix: tuple[float, ...] = (0.35, 0.35, 0.10, 0.10, 0.10)
    price_noise_sd: float = 400.0
    bookings_per_user_year: float = 4.5
    seed: int = 1
    n_regions: int = 10
    seasonal_index: tuple[float, ...] = DEFAULT_SEASONAL
    min_price: int = 1000
    option_strength: float = 1.0

    def validate(self) -> None:
        for name in ("n_users", "n_courses", "n_packages_per_course_month", "months", "n_regions"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.holdout_days < 0:
            raise ConfigError("holdout_days", "must be >= 0")
        if len(self.cluster_mix) != len(ARCHETYPES):
            raise ConfigError("cluster_mix", f"needs {len(ARCHETYPES)} proportions")
        if any(p < 0 for p in self.cluster_mix) or abs(math.fsum(self.cluster_mix) - 1.0) > 1e-9:
            raise ConfigError("cluster_mix", f"proportions must be >= 0 and sum to 1 (got {math.fsum(self.cluster_mix):g})")
        if self.price_noise_sd < 0:
            raise ConfigError("price_noise_sd", "must be >= 0")
        if self.bookings_per_user_year <= 0:
            raise ConfigError("bookings_per_user_year", "must be > 0")
        if len(self.seasonal_index) != 12 or any(v <= 0 for v in self.seasonal_index):
            raise ConfigError("seasonal_index", "needs 12 positive multipliers")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must fit in 64 unsigned bits")

    @property
    def history_end(self) -> date:
        """Last day of the ``months``-long history period (the default evaluation cutoff)."""
        y, m = divmod(self.start.month - 1 + self.months, 12)
        return date(self.start.year + y, m + 1, 1) - timedelta(days=1)

    @property
    def end(self) -> date:
        return self.history_end + timedelta(days=self.holdout_days)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = self.start.isoformat()
        d["cluster_mix"] = list(self.cluster_mix)
        d["seasonal_index"] = list(self.seasonal_index)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown generator setting")
        kw = dict(d)
        try:
            if "start" in kw and not isinstance(kw["start"], date):
                kw["start"] = date.fromisoformat(str(kw["start"]))
            for name in ("cluster_mix", "seasonal_index"):
                if name in kw:
                    kw[name] = tuple(float(v) for v in kw[name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(name if "name" in locals() else "start", str(exc)) from exc
        return cls(**kw)


@dataclass(frozen=True)
class PricingGroundTruth:
    coefficients: Mapping[str, float]
    base_price: float
    seasonal_index: tuple[float, ...]
    course_base: Mapping[str, float] = field(default_factory=dict)
    noise_sd: float = 0.0
    min_price: int = 0

    def to_dict(self) -> dict:
        return {
            "coefficients": dict(self.coefficients),
            "base_price": self.base_price,
            "seasonal_index": list(self.seasonal_index),
            "course_base": dict(self.course_base),
            "noise_sd": self.noise_sd,
            "noise_reference_price": NOISE_REFERENCE_PRICE,
            "seasonal_terms": list(SEASONAL_TERMS),
            "min_price": self.min_price,
        }


def normalized_seasonal(values) -> tuple[float, ...]:
    v = np.asarray(values, dtype=float)
    return tuple((v / v.mean()).tolist())


def sample_package_lifespan(rng: np.random.Generator) -> int:
    """Days between ``active_from`` and ``active_to``.

    Mixture: 25 % short specials (1-10 days), 65 % month-long plans (20-31),
    10 % long-running plans (32-90). The CDF at 31 days is 0.90.
    """
    u = rng.random()
    if u < 0.25:
        return int(rng.integers(1, 11))
    if u < 0.90:
        return int(rng.integers(20, 32))
    return int(rng.integers(32, 91))


def price_level(pkg: Package, gt: PricingGroundTruth) -> float:
    """Noise-free ground-truth price."""
    coef = gt.coefficients
    ov = pkg.options
    seasonal = gt.course_base.get(pkg.course_id, gt.base_price)
    seasonal += sum(coef.get(k, 0.0) * getattr(ov, k) for k in SEASONAL_TERMS)
    level = gt.seasonal_index[pkg.play_month - 1] * seasonal
    level += coef.get("min_party_size", 0.0) * ov.min_party_size
    level += coef.get("min_num_parties", 0.0) * ov.min_num_parties
    level += coef.get("num_laps", 0.0) * ov.num_laps
    level += coef.get("shortness", 0.0) * pkg.shortness
    level += coef.get(f"dow_{pkg.play_dow}", 0.0)
    level += coef.get(f"promo_{pkg.promotion_type}", 0.0)
    return level


def ground_truth_price(pkg: Package, gt: PricingGroundTruth, rng: np.random.Generator | None = None) -> int:
    """Linear price plus Gaussian noise whose sd is proportional to the price level."""
    level = price_level(pkg, gt)
    noise = 0.0
    if rng is not None and gt.noise_sd > 0:
        noise = rng.normal(0.0, gt.noise_sd * max(level, 0.0) / NOISE_REFERENCE_PRICE)
    return max(gt.min_price, int(round(level + noise)))


def holiday_calendar(start: date, end: date) -> frozenset[date]:
    out = set()
    for y in range(start.year, end.year + 1):
        for m, d in _HOLIDAYS_MD:
            day = date(y, m, d)
            if start <= day <= end:
                out.add(day)
    return frozenset(out)


def _month_starts(start: date, end: date) -> list[date]:
    out, cur = [], date(start.year, start.month, 1)
    while cur <= end:
        out.append(cur)
        cur = date(cur.year + cur.month // 12, cur.month % 12 + 1, 1)
    return out


def _days_in_month(d: date) -> int:
    nxt = date(d.year + d.month // 12, d.month % 12 + 1, 1)
    return (nxt - d).days


def _pick(rng: np.random.Generator, values, probs):
    return values[int(rng.choice(len(values), p=probs))]


def _logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p / (1 - p))


def generate_dataset(cfg: GeneratorConfig) -> tuple[Dataset, PricingGroundTruth, dict[str, int]]:
    """Build courses, packages and bookings; returns (dataset, price truth, planted segment per user)."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    start, end = cfg.start, cfg.end
    holidays = holiday_calendar(start - timedelta(days=31), end + timedelta(days=120))

    def is_holiday(d: date) -> bool:
        return d.isoweekday() >= 6 or d in holidays

    # -- courses
    courses, course_base = [], {}
    regions = rng.integers(0, cfg.n_regions, size=cfg.n_courses)
    for i in range(cfg.n_courses):
        cid = f"C{i + 1:04d}"
        rating = float(np.clip(round(rng.normal(3.5, 0.6), 1), 1.0, 5.0))
        base = 7500.0 * math.exp(0.30 * (rating - 3.5) + rng.normal(0.0, 0.30))
        courses.append(Course(cid, rating, f"R{regions[i] + 1:02d}"))
        course_base[cid] = round(base, 2)
    gt = PricingGroundTruth(
        coefficients=dict(DEFAULT_COEFFICIENTS),
        base_price=7500.0,
        seasonal_index=normalized_seasonal(cfg.seasonal_index),
        course_base=course_base,
        noise_sd=cfg.price_noise_sd,
        min_price=cfg.min_price,
    )

    # -- packages
    packages: list[Package] = []
    month_starts = _month_starts(start, end)
    pid = 0
    for c in courses:
        caddie_p = float(np.clip(0.10 + 0.15 * (c.rating - 3.0), 0.03, 0.6))
        for ms in month_starts:
            for _ in range(cfg.n_packages_per_course_month):
                pid += 1
                active_from = ms + timedelta(days=int(rng.integers(_days_in_month(ms))))
                life = sample_package_lifespan(rng)
                active_to = active_from + timedelta(days=life)
                window = [active_from + timedelta(days=k) for k in range(life + 1)]
                hol_days = [d for d in window if is_holiday(d)]
                work_days = [d for d in window if not is_holiday(d)]
                holiday = int(rng.random() < 0.45)
                if holiday and not hol_days:
                    holiday = 0
                elif not holiday and not work_days:
                    holiday = 1
                eligible = hol_days if holiday else work_days
                play_day = eligible[int(rng.integers(len(eligible)))]
                short = life <= 10
                promo = _pick(rng, PROMOTION_TYPES, (0.35, 0.10, 0.45, 0.10) if short else (0.60, 0.20, 0.05, 0.15))
                ov = OptionVector(
                    lunch=int(rng.random() < 0.5),
                    caddie=int(rng.random() < caddie_p),
                    competition=int(rng.random() < 0.2),
                    holiday=holiday,
                    pair_party=int(rng.random() < 0.25),
                    min_party_size=_pick(rng, (1, 2, 3, 4), (0.25, 0.35, 0.25, 0.15)),
                    min_num_parties=_pick(rng, (1, 2, 3), (0.80, 0.12, 0.08)),
                    num_laps=_pick(rng, (2, 1), (0.9, 0.1)),
                )
                pkg = Package(
                    id=f"P{pid:07d}",
                    course_id=c.id,
                    active_from=active_from,
                    active_to=active_to,
                    play_month=active_from.month,
                    play_dow=play_day.isoweekday(),
                    options=ov,
                    price=0,
                    promotion_type=promo,
                    shortness=life,
                )
                packages.append(_with_price(pkg, ground_truth_price(pkg, gt, rng)))

    # per-course package arrays for the booking choice model
    n_c = len(courses)
    course_index = {c.id: i for i, c in enumerate(courses)}
    by_course: list[list[Package]] = [[] for _ in range(n_c)]
    for p in packages:
        by_course[course_index[p.course_id]].append(p)
    arrays = [_package_arrays(ps) for ps in by_course]
    mean_price = np.array([a["price"].mean() for a in arrays])
    ratings = np.array([c.rating for c in courses])

    # -- users and bookings
    season = np.asarray(gt.seasonal_index)
    mix = np.asarray(cfg.cluster_mix) / math.fsum(cfg.cluster_mix)
    total_days = (end - start).days + 1
    years = total_days / 365.25
    labels: dict[str, int] = {}
    bookings: list[Booking] = []
    for ui in range(cfg.n_users):
        uid = f"U{ui + 1:06d}"
        a_idx = int(rng.choice(len(ARCHETYPES), p=mix))
        arch = ARCHETYPES[a_idx]
        labels[uid] = a_idx
        region = int(rng.integers(cfg.n_regions))
        spend = arch.spend * math.exp(rng.normal(0.0, arch.spend_spread))
        props = 1.0 / (1.0 + np.exp(-(_logit(arch.option_rates) + rng.normal(0.0, 0.4, size=5))))
        fav_month = int(rng.integers(1, 13))

        # home courses: same region, near the user's price level and rating taste
        w = np.where(regions == region, 1.0, 0.03)
        w *= np.exp(-np.log(mean_price / spend) ** 2 / (2 * arch.course_price_spread**2))
        w *= np.exp(-((ratings - arch.rating_pref) ** 2) / (2 * 0.6**2))
        w = w / w.sum()
        n_home = min(int(3 + rng.poisson(2.0)), int(np.count_nonzero(w)), n_c)
        home = rng.choice(n_c, size=n_home, replace=False, p=w)
        home_w = rng.gamma(1.0, 1.0, size=n_home) + 0.05
        home_logw = np.log(home_w / home_w.sum())
        cand = _concat([arrays[h] for h in home], home_logw)

        n_book = int(rng.poisson(cfg.bookings_per_user_year * years))
        for _ in range(n_book):
            play = _seasonal_day(rng, start, total_days, fav_month)
            want_holiday = rng.random() < props[3]
            play = _shift_to(play, want_holiday, is_holiday, start, end)
            if play is None:
                continue
            party = _pick(rng, arch.party_sizes, arch.party_probs)
            nparties = _pick(rng, arch.num_parties, arch.num_parties_probs)
            t = play.toordinal()
            ok = (
                (cand["from"] <= t) & (cand["to"] >= t)
                & (cand["holiday"] == int(want_holiday))
                & (cand["min_party"] <= party) & (cand["min_parties"] <= nparties)
            )
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                continue
            target = spend * season[play.month - 1] * math.exp(rng.normal(0.0, arch.within_sd))
            logp = np.log(cand["price"][idx] / target)
            util = cand["logw"][idx] - logp**2 / (2 * arch.price_tolerance**2)
            flags = cand["flags"][idx]
            lp = np.log(props[[0, 1, 2, 4]])
            lq = np.log(1 - props[[0, 1, 2, 4]])
            util = util + cfg.option_strength * (flags * lp + (1 - flags) * lq).sum(axis=1)
            util = util + rng.gumbel(size=idx.size)
            chosen: Package = cand["pkgs"][idx[int(np.argmax(util))]]
            lead = int(rng.integers(0, 11))
            booked = max(chosen.active_from, play - timedelta(days=lead))
            bookings.append(
                Booking(uid, chosen.course_id, chosen.id, booked, play, chosen.price,
                        chosen.options, party, nparties)
            )

    ds = Dataset.build(courses, packages, bookings, holidays)
    return ds, gt, labels


def _with_price(p: Package, price: int) -> Package:
    return Package(p.id, p.course_id, p.active_from, p.active_to, p.play_month, p.play_dow,
                   p.options, price, p.promotion_type, p.shortness)


def _package_arrays(ps: list[Package]) -> dict:
    return {
        "pkgs": ps,
        "from": np.array([p.active_from.toordinal() for p in ps]),
        "to": np.array([p.active_to.toordinal() for p in ps]),
        "holiday": np.array([p.options.holiday for p in ps]),
        "min_party": np.array([p.options.min_party_size for p in ps]),
        "min_parties": np.array([p.options.min_num_parties for p in ps]),
        "price": np.array([p.price for p in ps], dtype=float),
        # lunch, caddie, competition, pair_party
        "flags": np.array([[p.options.lunch, p.options.caddie, p.options.competition, p.options.pair_party]
                           for p in ps], dtype=float).reshape(-1, 4),
    }


def _concat(parts: list[dict], logw: np.ndarray) -> dict:
    out = {k: np.concatenate([p[k] for p in parts]) for k in parts[0] if k != "pkgs"}
    out["pkgs"] = [pkg for p in parts for pkg in p["pkgs"]]
    out["logw"] = np.concatenate([np.full(len(p["pkgs"]), lw) for p, lw in zip(parts, logw)])
    return out


def _seasonal_day(rng: np.random.Generator, start: date, total_days: int, fav_month: int) -> date:
    """Uniform day over the span, thinned by a cosine preference around ``fav_month``."""
    while True:
        d = start + timedelta(days=int(rng.integers(total_days)))
        w = (1.0 + 0.8 * math.cos(2 * math.pi * (d.month - fav_month) / 12)) / 1.8
        if rng.random() < w:
            return d


def _shift_to(d: date, holiday: bool, is_holiday, start: date, end: date) -> date | None:
    """Nearest day to ``d`` (forward first) whose holiday status matches."""
    for k in range(0, 15):
        for cand in (d + timedelta(days=k), d - timedelta(days=k)):
            if start <= cand <= end and is_holiday(cand) == holiday:
                return cand
    return None


# -- diagnostics -------------------------------------------------------------


def lifespans(ds: Dataset) -> np.ndarray:
    return np.array([(p.active_to - p.active_from).days for p in ds.packages])


def spend_adherence(ds: Dataset, band: float = 0.30, min_bookings: int = 2) -> float:
    """Fraction of repeat users whose every booking price is within ``band`` of their own mean."""
    ok = total = 0
    for bs in ds.bookings_by_user.values():
        if len(bs) < min_bookings:
            continue
        prices = np.array([b.price_paid for b in bs], dtype=float)
        mean = prices.mean()
        total += 1
        ok += bool(np.all(np.abs(prices - mean) <= band * mean))
    return ok / total if total else float("nan")
