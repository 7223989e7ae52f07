"""Deterministic CSV reports with an embedded configuration header, plus tiny SVG charts."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v + 0.0, ".12g")
    if v is None:
        return ""
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(fmt(x) for x in np.asarray(v).ravel().tolist())
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return fmt(v) if not math.isfinite(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class Report:
    name: str
    config: dict
    columns: list
    rows: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    plot: tuple | None = None       # (x column, [y columns], log-x?)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# report: {self.name}\n")
        for k in sorted(self.config):
            buf.write(f"# config {k} = {json.dumps(_jsonable(self.config[k]), sort_keys=True)}\n")
        for k in sorted(self.results):
            buf.write(f"# result {k} = {fmt(self.results[k])}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        return buf.getvalue()

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def write(self, out_dir: str | Path, svg: bool = False) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.name}.csv"
        path.write_text(self.to_csv())
        paths = [path]
        if svg and self.plot is not None:
            xcol, ycols, logx = self.plot
            xs = [float(v) for v in self.column(xcol)]
            series = {c: (xs, [float(v) for v in self.column(c)]) for c in ycols}
            sp = out / f"{self.name}.svg"
            sp.write_text(line_chart(series, self.name, xcol, logx=logx))
            paths.append(sp)
        return paths


def read_csv_report(text: str) -> tuple[dict, list, list]:
    """Inverse of Report.to_csv.

    Returns ({"report": name, "config": {key: decoded JSON}, "results":
    {key: string}}, columns, string rows).
    """
    meta = {"report": None, "config": {}, "results": {}}
    body = []
    for line in text.splitlines():
        if line.startswith("# report: "):
            meta["report"] = line[len("# report: "):]
        elif line.startswith("# config "):
            key, _, val = line[len("# config "):].partition(" = ")
            meta["config"][key] = json.loads(val)
        elif line.startswith("# result "):
            key, _, val = line[len("# result "):].partition(" = ")
            meta["results"][key] = val
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def line_chart(series: dict, title: str, xlabel: str, logx: bool = False, width: int = 640,
               height: int = 400) -> str:
    """A static SVG line chart; non-finite points are skipped."""
    pad = 50
    pts = {}
    for name, (xs, ys) in series.items():
        p = [(math.log10(x) if logx else x, y) for x, y in zip(xs, ys)
             if math.isfinite(y) and math.isfinite(x) and (x > 0 or not logx)]
        pts[name] = p
    allp = [q for p in pts.values() for q in p]
    if not allp:
        allp = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(q[0] for q in allp), max(q[0] for q in allp)
    y0, y1 = min(q[1] for q in allp), max(q[1] for q in allp)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{title}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">'
           f'{"log10 " if logx else ""}{xlabel}</text>',
           f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{x0:.3g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{x1:.3g}</text>',
           f'<text x="5" y="{height - pad}" font-size="10">{y0:.3g}</text>',
           f'<text x="5" y="{pad}" font-size="10">{y1:.3g}</text>']
    for i, (name, p) in enumerate(pts.items()):
        c = colors[i % len(colors)]
        if p:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
            out.append(f'<polyline fill="none" stroke="{c}" points="{path}"/>')
        out.append(f'<text x="{width - pad}" y="{pad + 15 * i}" fill="{c}" text-anchor="end">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

