"""Benchmark harness: runs quantizer variants over synthetic cases and
emits deterministic CSV (RFC 4180), JSON summaries, and static SVG bar
charts.

Wall-clock timings are only written to the CSV when HBVLA_TIMING=1;
otherwise the ms column is 0.0 so that repeated runs with the same seeds
are byte-identical.
"""

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import baseline_plain_sign, plain_sign_avg_bits
from .errors import ConfigurationError
from .pipeline import QuantConfig, quantize_layer
from .synth import calibration, generate_case
from .tensor import make_rng

CSV_COLUMNS = ("case", "method", "fro_error", "proxy_error", "avg_bits", "ms")
_METHODS = ("plain-sign", "haar-noperm", "hbvla")


@dataclass(frozen=True)
class BenchCase:
    """One synthetic benchmark instance."""

    name: str
    generator: str
    dims: tuple[int, int]
    seed: int
    methods: tuple[str, ...] = _METHODS
    path: str | None = None
    config: dict = field(default_factory=dict)


def load_suite(path):
    """Parse a suite JSON file into (cases, base QuantConfig)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    base_cfg = make_config(doc.get("config", {}))
    cases = []
    for entry in doc.get("cases", []):
        methods = tuple(entry.get("methods", _METHODS))
        for method in methods:
            if method not in _METHODS:
                raise ConfigurationError(f"unknown method: {method!r}")
        cases.append(BenchCase(
            name=entry["name"], generator=entry["generator"],
            dims=tuple(entry["dims"]), seed=int(entry["seed"]),
            methods=methods, path=entry.get("path"),
            config=entry.get("config", {})))
    if not cases:
        raise ConfigurationError("suite contains no cases")
    return cases, base_cfg


def make_config(overrides: dict) -> QuantConfig:
    """QuantConfig from a JSON dict; every field optional."""
    cfg = QuantConfig()
    unknown = set(overrides) - set(cfg.__dataclass_fields__)
    if unknown:
        raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _timing_enabled() -> bool:
    return os.environ.get("HBVLA_TIMING", "") == "1"


def run_case(case: BenchCase, base_cfg: QuantConfig,
             calib_tokens: int = 512) -> list[dict]:
    """Run every method of one case; returns one row dict per method."""
    cfg = replace(base_cfg, **case.config) if case.config else base_cfg
    cfg.validate()
    w = generate_case(case.generator, case.dims, case.seed, case.path)
    x = calibration(make_rng(case.seed + 1), w.shape[1], calib_tokens)
    rows = []
    for method in case.methods:
        start = time.perf_counter()
        if method == "plain-sign":
            what = baseline_plain_sign(w)
            fro = float(np.sqrt(np.sum((w - what) ** 2)))
            proxy = float(np.sqrt(np.sum(((w - what) @ x) ** 2)))
            bits = plain_sign_avg_bits(*w.shape)
        else:
            mcfg = cfg if method == "hbvla" else replace(cfg, permute=False)
            _, report = quantize_layer(w, x, cfg=mcfg)
            fro, proxy, bits = report.fro_error, report.proxy_error, report.avg_bits
        ms = (time.perf_counter() - start) * 1e3 if _timing_enabled() else 0.0
        rows.append({"case": case.name, "method": method, "fro_error": fro,
                     "proxy_error": proxy, "avg_bits": bits, "ms": ms})
    return rows


def run_suite(cases: list[BenchCase], base_cfg: QuantConfig,
              threads: int | None = None) -> list[dict]:
    """Run all cases (parallel across cases) and sort rows deterministically."""
    if threads is None:
        threads = int(os.environ.get("HBVLA_THREADS", "0") or 0)
    if threads < 1:
        threads = min(4, os.cpu_count() or 1)
    if threads == 1 or len(cases) == 1:
        nested = [run_case(c, base_cfg) for c in cases]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(lambda c: run_case(c, base_cfg), cases))
    rows = [row for group in nested for row in group]
    rows.sort(key=lambda r: (r["case"], r["method"]))
    return rows


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_COLUMNS})


def _svg_bar_chart(path, title: str, groups: list[str],
                   series: dict[str, list[float]]) -> None:
    """Minimal grouped bar chart, written as a static SVG."""
    width, height, margin = 640, 360, 50
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    top = max((max(vals) for vals in series.values() if vals), default=1.0)
    top = top if top > 0 else 1.0
    colors = ("#4878cf", "#ee854a", "#6acc65", "#d65f5f")
    n_groups, n_series = max(len(groups), 1), max(len(series), 1)
    group_w = plot_w / n_groups
    bar_w = 0.8 * group_w / n_series
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" font-family="sans-serif" font-size="11">',
             f'<text x="{width / 2}" y="20" text-anchor="middle" '
             f'font-size="14">{title}</text>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
             f'y2="{height - margin}" stroke="black"/>',
             f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
             f'y2="{height - margin}" stroke="black"/>']
    for gi, group in enumerate(groups):
        gx = margin + gi * group_w
        parts.append(f'<text x="{gx + group_w / 2}" y="{height - margin + 16}" '
                     f'text-anchor="middle">{group}</text>')
        for si, (label, vals) in enumerate(sorted(series.items())):
            val = vals[gi]
            bar_h = plot_h * val / top
            x = gx + 0.1 * group_w + si * bar_w
            y = height - margin - bar_h
            parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
                         f'height="{bar_h:.1f}" fill="{colors[si % len(colors)]}"/>')
    for si, label in enumerate(sorted(series)):
        parts.append(f'<rect x="{width - margin - 120}" y="{margin + 16 * si}" '
                     f'width="10" height="10" fill="{colors[si % len(colors)]}"/>')
        parts.append(f'<text x="{width - margin - 105}" y="{margin + 16 * si + 9}">'
                     f'{label}</text>')
    parts.append(f'<text x="{margin - 6}" y="{margin - 8}" text-anchor="end">'
                 f'{top:.3g}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


def write_svg_charts(rows: list[dict], directory) -> list[str]:
    """One bar chart per metric, grouped by case with one bar per method."""
    os.makedirs(directory, exist_ok=True)
    cases = sorted({r["case"] for r in rows})
    methods = sorted({r["method"] for r in rows})
    written = []
    for metric in ("fro_error", "proxy_error", "avg_bits"):
        series = {}
        for method in methods:
            by_case = {r["case"]: r[metric] for r in rows if r["method"] == method}
            series[method] = [float(by_case.get(c, 0.0)) for c in cases]
        path = os.path.join(directory, f"{metric}.svg")
        _svg_bar_chart(path, metric, cases, series)
        written.append(path)
    return written
