"""CSV, JSON and standalone SVG outputs. SVGs carry their data as a leading comment."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .evalharness import ExperimentReport

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H, PAD = 640, 420, 60


def _scale(v, lo, hi, a, b):
    return a + (b - a) * ((v - lo) / (hi - lo) if hi > lo else 0.5)


def _axes(title: str, xlabel: str, ylabel: str, xlim, ylim) -> list[str]:
    x0, x1, y0, y1 = PAD, W - 20, H - PAD, 30
    out = [
        f'<text x="{W / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.0f}" y="{H - 15}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="15" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {(y0 + y1) / 2:.0f})">{ylabel}</text>',
    ]
    for t in np.linspace(*xlim, 5):
        x = _scale(t, *xlim, x0, x1)
        out.append(f'<text x="{x:.1f}" y="{y0 + 16}" text-anchor="middle" font-size="10">{t:.4g}</text>')
    for t in np.linspace(*ylim, 5):
        y = _scale(t, *ylim, y0, y1)
        out.append(f'<text x="{x0 - 6}" y="{y + 3:.1f}" text-anchor="end" font-size="10">{t:.4g}</text>')
    return out


def _svg(body: list[str], data_comment: str) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- data\n{data_comment.replace('--', '- -')}\n-->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def line_chart_svg(curves: Mapping[str, Sequence[float]], title: str, xlabel: str, ylabel: str) -> str:
    n_max = max(len(c) for c in curves.values())
    ymax = max(max(c) for c in curves.values()) or 1.0
    xlim, ylim = (1, n_max), (0.0, ymax * 1.05)
    body = _axes(title, xlabel, ylabel, xlim, ylim)
    for i, (name, c) in enumerate(curves.items()):
        col = _COLORS[i % len(_COLORS)]
        pts = " ".join(
            f"{_scale(n + 1, *xlim, PAD, W - 20):.1f},{_scale(v, *ylim, H - PAD, 30):.1f}" for n, v in enumerate(c)
        )
        body.append(f'<polyline fill="none" stroke="{col}" stroke-width="2" points="{pts}"/>')
        body.append(f'<text x="{PAD + 10}" y="{45 + 15 * i}" fill="{col}" font-size="12">{name}</text>')
    rows = ["setting,n,value"] + [f"{s},{n + 1},{v!r}" for s, c in curves.items() for n, v in enumerate(c)]
    return _svg(body, "\n".join(rows))


def scatter_svg(x: Sequence[float], y: Sequence[float], title: str, xlabel: str, ylabel: str) -> str:
    lo = float(min(min(x), min(y)))
    hi = float(max(max(x), max(y)))
    lim = (lo, hi)
    body = _axes(title, xlabel, ylabel, lim, lim)
    body.append(
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - 20}" y2="30" stroke="#999" stroke-dasharray="4 3"/>'
    )
    for a, b in zip(x, y):
        body.append(
            f'<circle cx="{_scale(a, *lim, PAD, W - 20):.1f}" cy="{_scale(b, *lim, H - PAD, 30):.1f}" '
            f'r="2.5" fill="#1f77b4" fill-opacity="0.6"/>'
        )
    rows = [f"{xlabel},{ylabel}"] + [f"{a!r},{b!r}" for a, b in zip(x, y)]
    return _svg(body, "\n".join(rows))


def write_experiment(report: ExperimentReport, out_dir: str | Path, n: int = 5) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"curves": out / "emp_curves.csv", "svg": out / "emp_curves.svg", "summary": out / "summary.json"}
    with paths["curves"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setting", "n", "emp", "users"])
        for s, k, v, users in report.rows():
            w.writerow([s, k, repr(v), users])
    paths["svg"].write_text(
        line_chart_svg(report.curves, "EMP@n by setting", "n (list length)", "EMP@n"), encoding="utf-8"
    )
    paths["summary"].write_text(json.dumps(report.summary(n), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
