"""Reference course and reference package selection.

The reference course is the one the user played most around the target
season; the reference package is the last package booked on that course.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

from .domain import Booking


@dataclass(frozen=True)
class ReferenceSelection:
    course_id: str
    package_id: str
    score: float
    selected_at: date


def month_distance(a: int, b: int) -> int:
    d = abs(a - b) % 12
    return min(d, 12 - d)


def month_kernel(distance: int) -> float:
    """1 at distance 0, 0 at distance 6 (opposite season)."""
    return (1.0 + math.cos(math.pi * distance / 6.0)) / 2.0


def seasonal_course_score(bookings: Iterable[Booking], target_month: int) -> float:
    return math.fsum(month_kernel(month_distance(b.play_date.month, target_month)) for b in bookings)


def select_reference(history: Sequence[Booking], target_date: date) -> ReferenceSelection:
    """Pick the seasonally best course, then its most recently booked package.

    Course ties go to the course with the most recent booking, then the lower
    course id. Package ties (same ``booked_at``) go to the lower package id.
    """
    if not history:
        raise ValueError("reference selection needs at least one booking")
    by_course: dict[str, list[Booking]] = {}
    for b in history:
        by_course.setdefault(b.course_id, []).append(b)

    def course_key(cid: str):
        bs = by_course[cid]
        score = seasonal_course_score(bs, target_date.month)
        latest = max(b.booked_at for b in bs)
        # max over (score, recency), then min course id
        return (-round(score, 12), -latest.toordinal(), cid)

    best = min(by_course, key=course_key)
    bs = by_course[best]
    last = min(bs, key=lambda b: (-b.booked_at.toordinal(), b.package_id))
    score = seasonal_course_score(bs, target_date.month)
    return ReferenceSelection(best, last.package_id, score, target_date)
