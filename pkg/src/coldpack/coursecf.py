"""Item-item collaborative filtering over parent courses."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import Booking


@dataclass(frozen=True)
class CooccurrenceMatrix:
    """Symmetric distinct-user co-booking counts; the diagonal holds per-course user counts."""

    course_ids: tuple[str, ...]
    counts: np.ndarray

    @cached_property
    def index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.course_ids)}

    def __getitem__(self, pair: tuple[str, str]) -> int:
        i, j = pair
        return int(self.counts[self.index[i], self.index[j]])

    @cached_property
    def cosine(self) -> np.ndarray:
        diag = np.diag(self.counts).astype(float)
        norm = np.sqrt(np.outer(diag, diag))
        with np.errstate(divide="ignore", invalid="ignore"):
            cos = np.where(norm > 0, self.counts / np.where(norm > 0, norm, 1.0), 0.0)
        return cos

    def density(self) -> float:
        n = len(self.course_ids)
        return float(np.count_nonzero(self.counts)) / (n * n) if n else 0.0

    def save_csv(self, path: str | Path) -> None:
        """Upper-triangle (i, j, count) triplets, diagonal included, zeros omitted."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "count"])
            for c in self.course_ids:
                w.writerow([c, c, int(self.counts[self.index[c], self.index[c]])])
            iu, ju = np.nonzero(np.triu(self.counts, k=1))
            for i, j in zip(iu.tolist(), ju.tolist()):
                w.writerow([self.course_ids[i], self.course_ids[j], int(self.counts[i, j])])

    @classmethod
    def load_csv(cls, path: str | Path) -> "CooccurrenceMatrix":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        ids = tuple(r["i"] for r in rows if r["i"] == r["j"])
        idx = {c: k for k, c in enumerate(ids)}
        m = np.zeros((len(ids), len(ids)), dtype=np.int64)
        for r in rows:
            i, j, v = idx[r["i"]], idx[r["j"]], int(r["count"])
            m[i, j] = m[j, i] = v
        return cls(ids, m)


def build_cooccurrence(bookings: Iterable[Booking], course_ids: Sequence[str] | None = None) -> CooccurrenceMatrix:
    """Count, for every course pair, the distinct users who booked both."""
    user_courses: dict[str, set[str]] = {}
    for b in bookings:
        user_courses.setdefault(b.user_id, set()).add(b.course_id)
    if course_ids is None:
        course_ids = sorted({c for cs in user_courses.values() for c in cs})
    ids = tuple(course_ids)
    index = {c: i for i, c in enumerate(ids)}
    m = np.zeros((len(ids), len(ids)), dtype=np.int64)
    for cs in user_courses.values():
        idx = np.array(sorted(index[c] for c in cs), dtype=np.intp)
        m[np.ix_(idx, idx)] += 1
    return CooccurrenceMatrix(ids, m)


def course_scores(history: Iterable[Booking] | Iterable[str], m: CooccurrenceMatrix) -> dict[str, float]:
    """Mean cosine between each course and the user's distinct booked courses.

    Booked courses stay in the map: rebooking a favourite course is normal.
    """
    booked = {h.course_id if isinstance(h, Booking) else h for h in history}
    rows = sorted(m.index[c] for c in booked if c in m.index)
    if not rows:
        return {}
    scores = m.cosine[rows].mean(axis=0)
    return dict(zip(m.course_ids, scores.tolist()))


def filter_courses(scores: Mapping[str, float], top_m: int = 20, reference_course: str | None = None) -> list[str]:
    """Top ``top_m`` courses by score (ties to the lower id); the reference course is always kept."""
    if top_m < 1:
        raise ValueError("top_m must be >= 1")
    ranked = sorted(scores, key=lambda c: (-scores[c], c))[:top_m]
    if reference_course is not None and reference_course not in ranked:
        ranked.append(reference_course)
    return ranked
