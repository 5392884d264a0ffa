"""Model directory layout.

::

    model/
      manifest.json          config snapshot, data location, artifact sha256 hashes
      standardizer.json
      clustering.json        centroids, inertia, user -> cluster
      option_models.json     per (cluster, option): intercept, 11 coefficients, fit metadata
      cooccurrence.csv       (i, j, count) triplets, upper triangle incl. diagonal
      seasonal_index.json
      weights.json           fusion weights per setting (uniform until tuned)
      option_weights.csv     per-cluster weights report (not hashed)
      centroids.csv, assignments.csv
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from .behavior import FEATURES, Clustering, Standardizer
from .coursecf import CooccurrenceMatrix
from .domain import OPTION_FLAGS
from .optionsim import OptionModelSet, weights_table
from .pricesim import SeasonalIndex
from .ranker import FusionWeights, RecommenderConfig, TrainedRecommender

ARTIFACTS = {
    "standardizer": "standardizer.json",
    "clustering": "clustering.json",
    "option_models": "option_models.json",
    "cooccurrence": "cooccurrence.csv",
    "seasonal_index": "seasonal_index.json",
}
WEIGHTS_FILE = "weights.json"


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_weights(weights: dict[str, FusionWeights], path: Path) -> None:
    dump_json({s: w.to_dict() for s, w in sorted(weights.items())}, path)


def load_weights(path: Path) -> dict[str, FusionWeights]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    return {s: FusionWeights(w["w_p"], w["w_o"], w["w_c"]) for s, w in raw.items()}


def write_profile(clustering: Clustering, out: Path) -> None:
    with (out / "centroids.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "size"] + list(FEATURES))
        sizes = [int((clustering.labels == j).sum()) for j in range(clustering.k)]
        for j, row in enumerate(clustering.centroids.tolist()):
            w.writerow([j, sizes[j]] + row)
    with (out / "assignments.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "cluster"])
        for u, c in sorted(clustering.assignment.items()):
            w.writerow([u, c])


def write_option_weights(models: OptionModelSet, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "attribute"] + list(OPTION_FLAGS))
        for c in models.clusters:
            for row in weights_table(models, c):
                w.writerow([c, row[0]] + [f"{v:.4f}" for v in row[1:]])


def save_model(model: TrainedRecommender, out_dir: str | Path, data_manifest: str | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(model.standardizer.to_dict(), out / ARTIFACTS["standardizer"])
    dump_json(model.clustering.to_dict(), out / ARTIFACTS["clustering"])
    dump_json(model.option_models.to_dict(), out / ARTIFACTS["option_models"])
    model.cooccurrence.save_csv(out / ARTIFACTS["cooccurrence"])
    dump_json(model.seasonal_index.to_dict(), out / ARTIFACTS["seasonal_index"])
    weights = dict(model.weights) or {"full_with_r": FusionWeights()}
    save_weights(weights, out / WEIGHTS_FILE)
    write_profile(model.clustering, out)
    write_option_weights(model.option_models, out / "option_weights.csv")
    manifest = {
        "format_version": 1,
        "config": model.config.to_dict(),
        "data": data_manifest,
        "artifacts": {k: {"path": v, "sha256": sha256(out / v)} for k, v in ARTIFACTS.items()},
        "weights": WEIGHTS_FILE,
    }
    path = out / "manifest.json"
    dump_json(manifest, path)
    return path


def load_model(model_dir: str | Path) -> tuple[TrainedRecommender, dict]:
    root = Path(model_dir)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    art = {k: root / v["path"] for k, v in manifest["artifacts"].items()}
    for k, p in art.items():
        if sha256(p) != manifest["artifacts"][k]["sha256"]:
            raise ValueError(f"artifact {p.name} does not match its manifest hash")

    def read(p: Path):
        return json.loads(p.read_text(encoding="utf-8"))

    model = TrainedRecommender(
        standardizer=Standardizer.from_dict(read(art["standardizer"])),
        clustering=Clustering.from_dict(read(art["clustering"])),
        option_models=OptionModelSet.from_dict(read(art["option_models"])),
        cooccurrence=CooccurrenceMatrix.load_csv(art["cooccurrence"]),
        seasonal_index=SeasonalIndex.from_dict(read(art["seasonal_index"])),
        weights=load_weights(root / manifest.get("weights", WEIGHTS_FILE)),
        config=RecommenderConfig.from_dict(manifest["config"]),
    )
    return model, manifest
