"""Run outputs: RFC 4180 CSV tables, a JSON manifest and an SVG line chart.

Everything written here is byte-for-byte reproducible from the same inputs:
floats go out via ``repr``, JSON keys are sorted and no timestamps are
recorded.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

SCHEMA = 1


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            values = [row[h] for h in header] if isinstance(row, dict) else row
            w.writerow([_cell(v) for v in values])
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def write_manifest(path, config: dict, **sections) -> Path:
    """Manifest with the schema version, the config and its hash, plus any
    result sections (residual table, t_min, C1, bound verdict, ...)."""
    payload = {"schema": SCHEMA, "config": config, "config_hash": config_hash(config)}
    payload.update(sections)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload))
    return path


def read_manifest(path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unsupported manifest schema {data.get('schema')!r}")
    return data


# -- svg -------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _ticks(lo, hi, k=4):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / k for i in range(k + 1)]


def line_chart_svg(x, series: dict, title="", xlabel="t", width=640, panel_height=180) -> str:
    """One stacked panel per series, shared x axis; no external resources."""
    x = np.asarray(x, dtype=float)
    left, right, top, gap = 70, 20, 30, 40
    pw = width - left - right
    height = top + len(series) * (panel_height + gap) + 20
    xlo, xhi = (float(x.min()), float(x.max())) if len(x) else (0.0, 1.0)
    xspan = xhi - xlo or 1.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    for i, (name, ys) in enumerate(series.items()):
        ys = np.asarray(ys, dtype=float)
        y0 = top + i * (panel_height + gap)
        finite = ys[np.isfinite(ys)]
        ylo, yhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
        if yhi == ylo:
            ylo, yhi = ylo - 0.5 * (abs(ylo) or 1.0), yhi + 0.5 * (abs(yhi) or 1.0)
        sx = lambda v: left + (v - xlo) / xspan * pw  # noqa: E731
        sy = lambda v: y0 + panel_height - (v - ylo) / (yhi - ylo) * panel_height  # noqa: E731
        out.append(f'<rect x="{left}" y="{y0}" width="{pw}" height="{panel_height}" '
                   'fill="none" stroke="#888"/>')
        for v in _ticks(ylo, yhi):
            out.append(f'<text x="{left - 4}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
        for v in _ticks(xlo, xhi):
            out.append(f'<text x="{sx(v):.1f}" y="{y0 + panel_height + 14}" '
                       f'text-anchor="middle">{v:.3g}</text>')
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, ys) if math.isfinite(b))
        color = _COLORS[i % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + 6}" y="{y0 + 14}" fill="{color}">{escape(name)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 4}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, x, series: dict, title="", xlabel="t") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(line_chart_svg(x, series, title, xlabel))
    return path
