"""CSV persistence for datasets.

Layout of a dataset directory::

    manifest.json   {"format_version": 1, "courses": ..., "packages": ..., "bookings": ..., "holidays": ...}
    courses.csv     course_id,rating,region
    packages.csv    package_id,course_id,active_from,active_to,play_month,play_dow,
                    lunch,caddie,competition,holiday,pair_party,
                    min_party_size,min_num_parties,num_laps,price,promotion_type,shortness
    bookings.csv    user_id,course_id,package_id,booked_at,play_date,price_paid,
                    lunch,caddie,competition,holiday,pair_party,
                    min_party_size,min_num_parties,num_laps,party_size,num_parties
    holidays.csv    date

All files are UTF-8 with a header row, ISO-8601 dates and ``\\n`` line endings.
Files written by :func:`save_dataset` are in canonical form, so loading and
saving again reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import json
from datetime import date
from pathlib import Path

from .domain import OPTION_COUNTS, OPTION_FLAGS, Booking, Course, Dataset, OptionVector, Package

FORMAT_VERSION = 1

_OPT_COLS = list(OPTION_FLAGS) + list(OPTION_COUNTS)
COURSE_COLUMNS = ["course_id", "rating", "region"]
PACKAGE_COLUMNS = (
    ["package_id", "course_id", "active_from", "active_to", "play_month", "play_dow"]
    + _OPT_COLS
    + ["price", "promotion_type", "shortness"]
)
BOOKING_COLUMNS = (
    ["user_id", "course_id", "package_id", "booked_at", "play_date", "price_paid"]
    + _OPT_COLS
    + ["party_size", "num_parties"]
)
HOLIDAY_COLUMNS = ["date"]


class DatasetLoadError(Exception):
    """Raised when a dataset file cannot be read or parsed."""


def _options(row: dict[str, str]) -> OptionVector:
    return OptionVector(**{k: int(row[k]) for k in _OPT_COLS})


def _opt_values(ov: OptionVector) -> list[str]:
    return [str(getattr(ov, k)) for k in _OPT_COLS]


def _read_rows(path: Path, columns: list[str], parse):
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetLoadError(f"cannot open {path}: {exc}") from exc
    out = []
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise DatasetLoadError(f"{path.name}: missing columns {missing}")
        # row numbers are 1-based file lines, header is line 1
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(parse(row))
            except (ValueError, TypeError, KeyError) as exc:
                raise DatasetLoadError(f"{path.name}: bad row at line {lineno}: {exc}") from exc
    return out


def _parse_course(row):
    return Course(row["course_id"], float(row["rating"]), row["region"])


def _parse_package(row):
    return Package(
        id=row["package_id"],
        course_id=row["course_id"],
        active_from=date.fromisoformat(row["active_from"]),
        active_to=date.fromisoformat(row["active_to"]),
        play_month=int(row["play_month"]),
        play_dow=int(row["play_dow"]),
        options=_options(row),
        price=int(row["price"]),
        promotion_type=row["promotion_type"],
        shortness=int(row["shortness"]),
    )


def _parse_booking(row):
    return Booking(
        user_id=row["user_id"],
        course_id=row["course_id"],
        package_id=row["package_id"],
        booked_at=date.fromisoformat(row["booked_at"]),
        play_date=date.fromisoformat(row["play_date"]),
        price_paid=int(row["price_paid"]),
        options=_options(row),
        party_size=int(row["party_size"]),
        num_parties=int(row["num_parties"]),
    )


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset from a directory or a manifest file path."""
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetLoadError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetLoadError(f"unsupported format_version {manifest.get('format_version')!r}")
    root = manifest_path.parent
    courses = _read_rows(root / manifest["courses"], COURSE_COLUMNS, _parse_course)
    packages = _read_rows(root / manifest["packages"], PACKAGE_COLUMNS, _parse_package)
    bookings = _read_rows(root / manifest["bookings"], BOOKING_COLUMNS, _parse_booking)
    holidays = _read_rows(
        root / manifest["holidays"], HOLIDAY_COLUMNS, lambda r: date.fromisoformat(r["date"])
    )
    return Dataset.build(courses, packages, bookings, holidays)


def _write(path: Path, columns: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def save_dataset(d: Dataset, out_dir: str | Path) -> Path:
    """Write the four CSVs plus ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "courses.csv", COURSE_COLUMNS, ([c.id, repr(c.rating), c.region] for c in d.courses))
    _write(
        out / "packages.csv",
        PACKAGE_COLUMNS,
        (
            [p.id, p.course_id, p.active_from.isoformat(), p.active_to.isoformat(),
             str(p.play_month), str(p.play_dow)]
            + _opt_values(p.options)
            + [str(p.price), p.promotion_type, str(p.shortness)]
            for p in d.packages
        ),
    )
    _write(
        out / "bookings.csv",
        BOOKING_COLUMNS,
        (
            [b.user_id, b.course_id, b.package_id, b.booked_at.isoformat(),
             b.play_date.isoformat(), str(b.price_paid)]
            + _opt_values(b.options)
            + [str(b.party_size), str(b.num_parties)]
            for b in d.bookings
        ),
    )
    _write(out / "holidays.csv", HOLIDAY_COLUMNS, ([h.isoformat()] for h in sorted(d.holiday_calendar)))
    manifest = {
        "format_version": FORMAT_VERSION,
        "courses": "courses.csv",
        "packages": "packages.csv",
        "bookings": "bookings.csv",
        "holidays": "holidays.csv",
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return mpath
