"""``coldpack`` command line.

Exit codes: 0 success, 1 runtime failure, 2 configuration or validation error.
Every command that writes a directory also writes ``run_config.json`` there.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from datetime import date, timedelta
from pathlib import Path

import tomli

from . import __version__
from .dataio import DatasetLoadError, load_dataset, save_dataset
from .domain import Dataset, validate_dataset
from .evalharness import ALL_SETTINGS, evaluate_model, run_experiment, temporal_split, tune_settings
from .persist import WEIGHTS_FILE, dump_json, load_model, save_model, save_weights, write_profile
from .pricesim import fit_price_model, price_feature_names
from .ranker import SETTINGS, Ranker, RecommenderConfig, fit_recommender
from .reference import select_reference
from .report import scatter_svg, write_experiment
from .synthgen import ConfigError, GeneratorConfig, generate_dataset

log = logging.getLogger("coldpack")


class ValidationFailed(Exception):
    def __init__(self, violations):
        self.violations = violations
        lines = [f"{v.entity} {v.id}: {v.rule}" for v in violations[:20]]
        more = f"\n... {len(violations) - 20} more" if len(violations) > 20 else ""
        super().__init__(f"dataset failed validation ({len(violations)} violations):\n" + "\n".join(lines) + more)


# -- config helpers ------------------------------------------------------------


def read_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc


def _section(cfg: dict, name: str) -> dict:
    if name in cfg and isinstance(cfg[name], dict):
        return dict(cfg[name])
    return {k: v for k, v in cfg.items() if not isinstance(v, dict)}


def generator_config(cfg: dict, args) -> GeneratorConfig:
    d = _section(cfg, "generator")
    for key in ("seed", "n_users", "n_courses", "months"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    try:
        gen = GeneratorConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError("generator", str(exc)) from exc
    gen.validate()
    return gen


def recommender_config(cfg: dict, args, cutoff: date | None = None) -> RecommenderConfig:
    d = RecommenderConfig().to_dict()
    d.pop("options")
    d.update(_section(cfg, "model"))
    for key in ("k", "top_m", "omega", "lam", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    if cutoff is not None:
        d["cutoff"] = cutoff.isoformat()
    try:
        rc = RecommenderConfig.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("model", str(exc)) from exc
    if rc.k < 1:
        raise ConfigError("k", "must be >= 1")
    if rc.top_m < 1:
        raise ConfigError("top_m", "must be >= 1")
    if rc.omega <= 0:
        raise ConfigError("omega", "must be > 0")
    return rc


def _date(s: str) -> date:
    try:
        return date.fromisoformat(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an ISO date: {s}") from exc


def _window(s: str) -> tuple[date, date]:
    try:
        a, b = s.split(":")
        return date.fromisoformat(a), date.fromisoformat(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"window must be START:END ISO dates, got {s}") from exc


def _settings(s: str) -> list[str]:
    if s == "all":
        return list(ALL_SETTINGS)
    out = [x.strip() for x in s.split(",") if x.strip()]
    bad = [x for x in out if x not in SETTINGS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown settings {bad}; choose from {', '.join(SETTINGS)} or all")
    return out


def load_valid(path: str) -> Dataset:
    ds = load_dataset(path)
    violations = validate_dataset(ds)
    if violations:
        raise ValidationFailed(violations)
    return ds


def _snapshot(out: Path, command: str, **values) -> None:
    out.mkdir(parents=True, exist_ok=True)
    snap = {"command": command, "version": __version__}
    for k, v in values.items():
        if hasattr(v, "to_dict"):
            v = v.to_dict()
        elif isinstance(v, date):
            v = v.isoformat()
        elif isinstance(v, Path):
            v = str(v)
        snap[k] = v
    dump_json(snap, out / "run_config.json")


def _default_cutoff(ds: Dataset) -> date:
    """Last day of the month before the month of the final booking."""
    last = ds.bookings[-1].booked_at
    return date(last.year, last.month, 1) - timedelta(days=1)


# -- commands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = generator_config(read_config(args.config), args)
    out = Path(args.out)
    t0 = time.perf_counter()
    ds, gt, labels = generate_dataset(cfg)
    save_dataset(ds, out)
    dump_json(gt.to_dict(), out / "ground_truth.json")
    from .synthgen import ARCHETYPES

    with (out / "planted_labels.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "segment", "segment_name"])
        for u in sorted(labels):
            w.writerow([u, labels[u], ARCHETYPES[labels[u]].name])
    _snapshot(out, "gen", generator=cfg)
    log.info("generated %d packages, %d bookings in %.1fs", len(ds.packages), len(ds.bookings),
             time.perf_counter() - t0)
    return 0


def cmd_profile(args) -> int:
    from .behavior import build_user_vector, clustering_eligible, segment_users

    ds = load_valid(args.data)
    cutoff = args.cutoff
    hist = ds.bookings_by_user if cutoff is None else {
        u: [b for b in bs if b.booked_at <= cutoff] for u, bs in ds.bookings_by_user.items()
    }
    vecs = {u: build_user_vector(h, ds.course_ratings) for u, h in hist.items() if h and clustering_eligible(h)}
    _, cl = segment_users(vecs, k=args.k, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_profile(cl, out)
    _snapshot(out, "profile", data=args.data, k=args.k, seed=args.seed, cutoff=cutoff)
    log.info("clustered %d users into %d segments (inertia %.2f)", len(vecs), cl.k, cl.inertia)
    return 0


def _train(ds: Dataset, rc: RecommenderConfig, out: Path, data_path: str):
    model = fit_recommender(ds, rc)
    save_model(model, out, str(Path(data_path).resolve()))
    log.info("co-occurrence density %.3f", model.cooccurrence.density())
    return model


def cmd_train(args) -> int:
    cfg = read_config(args.config)
    ds = load_valid(args.data)
    cutoff = args.cutoff or _default_cutoff(ds)
    rc = recommender_config(cfg, args, cutoff)
    out = Path(args.out)
    _train(ds, rc, out, args.data)
    _snapshot(out, "train", data=args.data, model=rc)
    return 0


def cmd_tune(args) -> int:
    model, manifest = load_model(args.model)
    ds = load_valid(args.val)
    settings = args.settings
    weights, validation = tune_settings(
        ds, model.config.cutoff, args.horizon, settings, model.config, n=args.n,
        step=args.step, model=model,
    )
    path = Path(args.model) / WEIGHTS_FILE
    save_weights({**model.weights, **weights}, path)
    out = {s: {**weights[s].to_dict(), "emp_uniform": validation[s]["uniform"], "emp_tuned": validation[s]["tuned"]}
           for s in settings}
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_recommend(args) -> int:
    model, manifest = load_model(args.model)
    data = args.data or manifest.get("data")
    if not data:
        raise ConfigError("data", "model manifest has no data path; pass --data")
    ds = load_valid(data)
    result = Ranker(model, ds).recommend(args.user, args.window, args.n, args.setting)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    cfg = read_config(args.config)
    ds = load_valid(args.data)
    rc = recommender_config(cfg, args)
    report = run_experiment(ds, args.cutoff, args.horizon, args.settings, args.N, rc, tune=not args.no_tune)
    out = Path(args.out)
    write_experiment(report, out)
    _snapshot(out, "eval", data=args.data, model=rc, cutoff=args.cutoff, horizon=args.horizon,
              settings=args.settings, N=args.N, tune=not args.no_tune)
    log.info("evaluated %d users in %.1fs", report.users, report.seconds)
    return 0


def cmd_price_report(args) -> int:
    ds = load_valid(args.data)
    pkgs = [p for p in ds.packages if p.course_id == args.course]
    if not pkgs:
        raise ConfigError("course", f"no packages for course {args.course}")
    fit = None
    for inter in (("month", "dow"), ("month",), ()):
        if len(pkgs) >= len(price_feature_names(inter)) + 5:
            fit = fit_price_model(pkgs, inter)
            break
    if fit is None:
        raise ConfigError("course", f"course {args.course} has only {len(pkgs)} packages")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / f"price_{args.course}.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["package_id", "true_price", "predicted_price"])
        for p, y, yhat in zip(pkgs, fit.prices, fit.predictions):
            w.writerow([p.id, int(y), f"{yhat:.2f}"])
    (out / f"price_{args.course}.svg").write_text(
        scatter_svg(fit.prices.tolist(), fit.predictions.tolist(), f"Course {args.course}: true vs predicted price",
                    "true price", "predicted price"),
        encoding="utf-8",
    )
    summary = {"course": args.course, "packages": len(pkgs), "features": len(fit.feature_names),
               "interactions": list(fit.interactions), "r_squared": fit.r_squared, **fit.residual_summary()}
    dump_json(summary, out / f"price_{args.course}.json")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_explain_ref(args) -> int:
    ds = load_valid(args.data)
    hist = [b for b in ds.bookings_by_user.get(args.user, []) if b.booked_at < args.date]
    if not hist:
        raise ConfigError("user", f"user {args.user} has no bookings before {args.date}")
    from .reference import seasonal_course_score

    ref = select_reference(hist, args.date)
    by_course: dict[str, list] = {}
    for b in hist:
        by_course.setdefault(b.course_id, []).append(b)
    print(json.dumps({
        "user": args.user,
        "target_date": args.date.isoformat(),
        "reference_course": ref.course_id,
        "reference_package": ref.package_id,
        "course_scores": {c: seasonal_course_score(bs, args.date.month) for c, bs in sorted(by_course.items())},
    }, indent=2, sort_keys=True))
    return 0


def cmd_pipeline(args) -> int:
    cfg = read_config(args.config)
    gen = generator_config(cfg, args)
    out = Path(args.out)
    ev = _section(cfg, "eval")
    horizon = int(args.horizon or ev.get("horizon", 15))
    N = int(args.N or ev.get("N", 20))
    settings = args.settings or list(ev.get("settings", ALL_SETTINGS))
    cutoff = gen.history_end
    stage = "gen"
    timings = {}
    try:
        t = time.perf_counter()
        data = out / "data"
        ds, gt, labels = generate_dataset(gen)
        save_dataset(ds, data)
        dump_json(gt.to_dict(), data / "ground_truth.json")
        timings[stage] = time.perf_counter() - t

        stage = "train"
        t = time.perf_counter()
        vcut = cutoff - timedelta(days=horizon)
        rc_val = recommender_config(cfg, args, vcut)
        split = temporal_split(ds, cutoff, horizon)
        train_only = ds.with_bookings(split.train)
        vmodel = _train(train_only, rc_val, out / "model_val", str(data))
        timings[stage] = time.perf_counter() - t

        stage = "tune"
        t = time.perf_counter()
        weights, validation = tune_settings(train_only, vcut, horizon, settings, rc_val, model=vmodel)
        timings[stage] = time.perf_counter() - t

        stage = "eval"
        t = time.perf_counter()
        rc = recommender_config(cfg, args, cutoff)
        model = fit_recommender(train_only, rc).with_weights(weights)
        save_model(model, out / "model", str(data.resolve()))
        report = evaluate_model(model, ds, split, settings, weights, N)
        report.validation = validation
        timings[stage] = time.perf_counter() - t

        stage = "report"
        write_experiment(report, out / "report")
    except (ValueError, KeyError) as exc:
        raise RuntimeError(f"pipeline stage '{stage}' failed: {exc}") from exc
    _snapshot(out, "pipeline", generator=gen, model=rc, horizon=horizon, N=N, settings=settings)
    for k, v in timings.items():
        log.info("stage %s: %.1fs", k, v)
    log.info("peak candidates per user: %d; users evaluated: %d", report.max_candidates, report.users)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coldpack", description="Hybrid recommender for short-lived booking packages")
    p.add_argument("--log-level", default="INFO")
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def model_flags(sp):
        sp.add_argument("--config", help="TOML config file; flags override it")
        sp.add_argument("--k", type=int)
        sp.add_argument("--top-m", dest="top_m", type=int)
        sp.add_argument("--omega", type=float)
        sp.add_argument("--lam", type=float)
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-users", dest="n_users", type=int)
    sp.add_argument("--n-courses", dest="n_courses", type=int)
    sp.add_argument("--months", type=int)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("profile", parents=[common], help="cluster users and write centroids/assignments")
    sp.add_argument("--data", required=True)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cutoff", type=_date)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("train", parents=[common], help="fit all model artifacts")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--cutoff", type=_date)
    model_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("tune", parents=[common], help="hill-climb fusion weights on the window after the model cutoff")
    sp.add_argument("--model", required=True)
    sp.add_argument("--val", required=True, help="dataset directory or manifest holding the validation window")
    sp.add_argument("--horizon", type=int, default=15)
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--step", type=float, default=0.2)
    sp.add_argument("--settings", type=_settings, default=list(ALL_SETTINGS))
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("recommend", parents=[common], help="top-n packages for one user")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data")
    sp.add_argument("--user", required=True)
    sp.add_argument("--window", type=_window, required=True)
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--setting", choices=list(SETTINGS), default="full_with_r")
    sp.set_defaults(func=cmd_recommend)

    sp = sub.add_parser("eval", parents=[common], help="run the four-setting offline experiment")
    sp.add_argument("--data", required=True)
    sp.add_argument("--cutoff", type=_date, required=True)
    sp.add_argument("--horizon", type=int, default=15)
    sp.add_argument("--settings", type=_settings, default=list(ALL_SETTINGS))
    sp.add_argument("--N", type=int, default=20)
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-tune", action="store_true")
    model_flags(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("price-report", parents=[common], help="fit the linear price model for one course")
    sp.add_argument("--data", required=True)
    sp.add_argument("--course", required=True)
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_price_report)

    sp = sub.add_parser("explain-ref", parents=[common], help="show reference course/package selection")
    sp.add_argument("--data", required=True)
    sp.add_argument("--user", required=True)
    sp.add_argument("--date", type=_date, required=True)
    sp.set_defaults(func=cmd_explain_ref)

    sp = sub.add_parser("pipeline", parents=[common], help="gen -> train -> tune -> eval -> report")
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n-users", dest="n_users", type=int)
    sp.add_argument("--n-courses", dest="n_courses", type=int)
    sp.add_argument("--months", type=int)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--settings", type=_settings)
    sp.add_argument("--k", type=int)
    sp.add_argument("--top-m", dest="top_m", type=int)
    sp.add_argument("--omega", type=float)
    sp.add_argument("--lam", type=float)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValidationFailed, DatasetLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
