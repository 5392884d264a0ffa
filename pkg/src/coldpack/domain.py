"""Core records shared by every stage: courses, packages, bookings, datasets.

Money is held as integer minor currency units (cents). Dates are ``datetime.date``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from functools import cached_property
from typing import Iterable, NamedTuple

#: Binary option flags summed over by the option similarity, in canonical order.
OPTION_FLAGS: tuple[str, ...] = ("lunch", "caddie", "competition", "holiday", "pair_party")

#: Integer-valued package attributes (all >= 1).
OPTION_COUNTS: tuple[str, ...] = ("min_party_size", "min_num_parties", "num_laps")

PROMOTION_TYPES: tuple[str, ...] = ("none", "early_bird", "last_minute", "member")


@dataclass(frozen=True, slots=True)
class OptionVector:
    lunch: int = 0
    caddie: int = 0
    competition: int = 0
    holiday: int = 0
    pair_party: int = 0
    min_party_size: int = 1
    min_num_parties: int = 1
    num_laps: int = 2

    def flags(self) -> tuple[int, ...]:
        return (self.lunch, self.caddie, self.competition, self.holiday, self.pair_party)


@dataclass(frozen=True, slots=True)
class Course:
    id: str
    rating: float
    region: str = ""


@dataclass(frozen=True, slots=True)
class Package:
    id: str
    course_id: str
    active_from: date
    active_to: date
    play_month: int
    play_dow: int
    options: OptionVector
    price: int
    promotion_type: str = "none"
    shortness: int = 0

    def is_active(self, start: date, end: date) -> bool:
        """True when the active window intersects ``[start, end]``."""
        return self.active_from <= end and self.active_to >= start


@dataclass(frozen=True, slots=True)
class Booking:
    user_id: str
    course_id: str
    package_id: str
    booked_at: date
    play_date: date
    price_paid: int
    options: OptionVector
    party_size: int = 1
    num_parties: int = 1


def option_flags(p: Package | Booking | OptionVector) -> tuple[int, ...]:
    """Project onto the flag subset, ordered (lunch, caddie, competition, holiday, pair_party)."""
    ov = p if isinstance(p, OptionVector) else p.options
    return ov.flags()


class Violation(NamedTuple):
    entity: str
    id: str
    rule: str


@dataclass(frozen=True)
class Dataset:
    courses: tuple[Course, ...]
    packages: tuple[Package, ...]
    bookings: tuple[Booking, ...]
    holiday_calendar: frozenset[date] = field(default_factory=frozenset)

    @classmethod
    def build(
        cls,
        courses: Iterable[Course],
        packages: Iterable[Package],
        bookings: Iterable[Booking],
        holiday_calendar: Iterable[date] = (),
    ) -> "Dataset":
        """Construct with bookings sorted by ``booked_at`` (stable)."""
        return cls(
            tuple(courses),
            tuple(packages),
            tuple(sorted(bookings, key=lambda b: b.booked_at)),
            frozenset(holiday_calendar),
        )

    @cached_property
    def course_by_id(self) -> dict[str, Course]:
        return {c.id: c for c in self.courses}

    @cached_property
    def package_by_id(self) -> dict[str, Package]:
        return {p.id: p for p in self.packages}

    @cached_property
    def course_ratings(self) -> dict[str, float]:
        return {c.id: c.rating for c in self.courses}

    @cached_property
    def bookings_by_user(self) -> dict[str, list[Booking]]:
        out: dict[str, list[Booking]] = {}
        for b in self.bookings:
            out.setdefault(b.user_id, []).append(b)
        return out

    def with_bookings(self, bookings: Iterable[Booking]) -> "Dataset":
        return Dataset.build(self.courses, self.packages, bookings, self.holiday_calendar)

    def is_holiday(self, d: date) -> bool:
        return d.isoweekday() >= 6 or d in self.holiday_calendar


def _check_options(entity: str, eid: str, ov: OptionVector, out: list[Violation]) -> None:
    for name in OPTION_FLAGS:
        if getattr(ov, name) not in (0, 1):
            out.append(Violation(entity, eid, f"{name} flag not in {{0,1}}"))
    for name in OPTION_COUNTS:
        if getattr(ov, name) < 1:
            out.append(Violation(entity, eid, f"{name} < 1"))


def validate_dataset(d: Dataset) -> list[Violation]:
    """Return every type-invariant violation; empty list means the dataset is well formed."""
    out: list[Violation] = []

    seen: set[str] = set()
    for c in d.courses:
        if c.id in seen:
            out.append(Violation("course", c.id, "duplicate course id"))
        seen.add(c.id)
        if not 1.0 <= c.rating <= 5.0:
            out.append(Violation("course", c.id, "rating outside [1, 5]"))

    seen = set()
    for p in d.packages:
        if p.id in seen:
            out.append(Violation("package", p.id, "duplicate package id"))
        seen.add(p.id)
        if p.course_id not in d.course_by_id:
            out.append(Violation("package", p.id, f"unknown course {p.course_id}"))
        if p.active_from > p.active_to:
            out.append(Violation("package", p.id, "active_to before active_from"))
        if p.shortness != (p.active_to - p.active_from).days:
            out.append(Violation("package", p.id, "shortness != active_to - active_from"))
        if p.price < 0:
            out.append(Violation("package", p.id, "negative price"))
        if not 1 <= p.play_month <= 12:
            out.append(Violation("package", p.id, "play_month outside 1..12"))
        if not 1 <= p.play_dow <= 7:
            out.append(Violation("package", p.id, "play_dow outside 1..7"))
        _check_options("package", p.id, p.options, out)

    prev: date | None = None
    for i, b in enumerate(d.bookings):
        bid = f"{b.user_id}/{b.package_id}#{i}"
        pkg = d.package_by_id.get(b.package_id)
        if b.course_id not in d.course_by_id:
            out.append(Violation("booking", bid, f"unknown course {b.course_id}"))
        if pkg is None:
            out.append(Violation("booking", bid, f"unknown package {b.package_id}"))
        else:
            if pkg.course_id != b.course_id:
                out.append(Violation("booking", bid, "course differs from package course"))
            if not pkg.active_from <= b.play_date <= pkg.active_to:
                out.append(Violation("booking", bid, "play_date outside package active window"))
        if b.price_paid < 0:
            out.append(Violation("booking", bid, "negative price_paid"))
        if b.party_size < 1 or b.num_parties < 1:
            out.append(Violation("booking", bid, "party_size/num_parties < 1"))
        _check_options("booking", bid, b.options, out)
        if prev is not None and b.booked_at < prev:
            out.append(Violation("booking", bid, "bookings not sorted by booked_at"))
        prev = b.booked_at
    return out
