import hashlib
from pathlib import Path

import pytest

from builders import two_user_dataset
from coldpack.dataio import DatasetLoadError, load_dataset, save_dataset
from coldpack.synthgen import GeneratorConfig, generate_dataset

FILES = ("courses.csv", "packages.csv", "bookings.csv", "holidays.csv", "manifest.json")


def digests(d: Path) -> dict[str, str]:
    return {f: hashlib.sha256((d / f).read_bytes()).hexdigest() for f in FILES}


def test_round_trip_is_byte_identical(tmp_path):
    ds, _, _ = generate_dataset(GeneratorConfig(n_users=60, n_courses=5, seed=4))
    save_dataset(ds, tmp_path / "a")
    again = load_dataset(tmp_path / "a")
    assert again == ds
    save_dataset(again, tmp_path / "b")
    assert digests(tmp_path / "a") == digests(tmp_path / "b")


def test_load_accepts_manifest_path(tmp_path):
    manifest = save_dataset(two_user_dataset(), tmp_path)
    assert load_dataset(manifest) == load_dataset(tmp_path)


def test_corrupted_row_reports_line_number(tmp_path):
    save_dataset(two_user_dataset(), tmp_path)
    path = tmp_path / "bookings.csv"
    lines = path.read_text().splitlines()
    lines[2] = lines[2].replace("2013-05-04", "2013-13-04")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetLoadError, match="bookings.csv: bad row at line 3"):
        load_dataset(tmp_path)


def test_missing_column_and_manifest(tmp_path):
    save_dataset(two_user_dataset(), tmp_path)
    text = (tmp_path / "courses.csv").read_text().replace("rating", "stars")
    (tmp_path / "courses.csv").write_text(text)
    with pytest.raises(DatasetLoadError, match="missing columns"):
        load_dataset(tmp_path)
    with pytest.raises(DatasetLoadError, match="cannot read manifest"):
        load_dataset(tmp_path / "nowhere")
