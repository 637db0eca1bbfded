"""CSV and self-contained SVG output for metrics reports."""

from __future__ import annotations

import csv
import math
import xml.etree.ElementTree as ET

from .experiments import MetricsReport, MetricsRow

COLUMNS = ("task", "method", "grid_key", "alpha", "replications", "mcp", "pfi", "medl_or_size", "runtime_seconds")


def _num(v: float) -> str:
    # repr gives the shortest string that parses back to the same double
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def csv_rows(report: MetricsReport):
    yield list(COLUMNS)
    for r in report.rows:
        yield [r.task, r.method, r.grid_key, _num(r.alpha), str(r.replications), _num(r.mcp), _num(r.pfi), _num(r.medl_or_size), _num(r.runtime_seconds)]


def emit_csv(report: MetricsReport, path) -> None:
    if not report.rows:
        raise ValueError("report is empty")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(csv_rows(report))


def read_csv(path) -> list[dict]:
    """Parse an emitted CSV back into typed records."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rec["alpha"] = float(rec["alpha"])
            rec["replications"] = int(rec["replications"])
            for key in ("mcp", "pfi", "medl_or_size", "runtime_seconds"):
                rec[key] = float(rec[key])
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# SVG

PANEL_W, PANEL_H = 260, 200
MARGIN = dict(left=50, right=15, top=30, bottom=40)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22")


def _panels(report: MetricsReport):
    length = "mean set size" if report.task == "classification" else "median length"
    panels = [("coverage", lambda r: r.mcp), ("finite fraction", lambda r: r.pfi), (length, lambda r: r.medl_or_size)]
    if report.task == "figure1":
        panels.insert(2, ("coverage given finite", lambda r: r.cond_coverage))
    return panels


def _series(report: MetricsReport):
    """Group rows into lines: x is the first grid axis, the rest label the series."""
    lines: dict[str, list[tuple[float, MetricsRow]]] = {}
    for r in report.rows:
        x_name, x_val = r.grid[0] if r.grid else ("grid", 0)
        rest = ",".join(f"{k}={v}" for k, v in r.grid[1:])
        label = f"{r.method} {rest}".strip()
        lines.setdefault(label, []).append((float(x_val), r))
    return lines, (report.rows[0].grid[0][0] if report.rows[0].grid else "grid")


def _finite(vals):
    return [v for v in vals if math.isfinite(v)]


def emit_svg(report: MetricsReport, path) -> None:
    """One panel per metric, one polyline per series, shared legend."""
    if not report.rows:
        raise ValueError("report is empty")
    panels = _panels(report)
    lines, x_name = _series(report)
    legend_h = 16 * len(lines) + 10
    width = PANEL_W * len(panels)
    height = PANEL_H + legend_h
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height), viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")

    xs = sorted({x for pts in lines.values() for x, _ in pts})
    x_lo, x_hi = xs[0], xs[-1]
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    plot_w = PANEL_W - MARGIN["left"] - MARGIN["right"]
    plot_h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]

    for i, (title, metric) in enumerate(panels):
        ox = i * PANEL_W + MARGIN["left"]
        oy = MARGIN["top"]
        vals = _finite(metric(r) for pts in lines.values() for _, r in pts)
        y_lo, y_hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
        if title in ("coverage", "finite fraction", "coverage given finite"):
            y_lo, y_hi = min(y_lo, 1 - report.alpha - 0.05, 0.0 if title == "finite fraction" else 1.0), 1.0
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

        def px(x):
            return ox + (x - x_lo) / (x_hi - x_lo) * plot_w

        def py(y):
            return oy + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

        g = ET.SubElement(svg, "g", {"font-family": "sans-serif", "font-size": "10"})
        ET.SubElement(g, "text", x=str(ox + plot_w / 2), y=str(oy - 10), **{"text-anchor": "middle", "font-size": "12"}).text = title
        ET.SubElement(g, "line", x1=str(ox), y1=str(oy + plot_h), x2=str(ox + plot_w), y2=str(oy + plot_h), stroke="black")
        ET.SubElement(g, "line", x1=str(ox), y1=str(oy), x2=str(ox), y2=str(oy + plot_h), stroke="black")
        for x in xs:
            ET.SubElement(g, "line", x1=f"{px(x):.2f}", y1=str(oy + plot_h), x2=f"{px(x):.2f}", y2=str(oy + plot_h + 4), stroke="black")
            ET.SubElement(g, "text", x=f"{px(x):.2f}", y=str(oy + plot_h + 15), **{"text-anchor": "middle"}).text = f"{x:g}"
        for frac in (0.0, 0.5, 1.0):
            y = y_lo + frac * (y_hi - y_lo)
            ET.SubElement(g, "text", x=str(ox - 5), y=f"{py(y) + 3:.2f}", **{"text-anchor": "end"}).text = f"{y:.3g}"
        ET.SubElement(g, "text", x=str(ox + plot_w / 2), y=str(oy + plot_h + 30), **{"text-anchor": "middle"}).text = x_name
        if title.startswith("coverage"):
            yt = py(1 - report.alpha)
            ET.SubElement(g, "line", x1=str(ox), y1=f"{yt:.2f}", x2=str(ox + plot_w), y2=f"{yt:.2f}", stroke="gray", **{"stroke-dasharray": "4 3"})

        for j, (label, pts) in enumerate(lines.items()):
            color = COLORS[j % len(COLORS)]
            coords = [(px(x), py(metric(r))) for x, r in sorted(pts, key=lambda t: t[0]) if math.isfinite(metric(r))]
            if not coords:
                continue
            ET.SubElement(g, "polyline", points=" ".join(f"{a:.2f},{b:.2f}" for a, b in coords), fill="none", stroke=color, **{"stroke-width": "1.5"})
            for a, b in coords:
                ET.SubElement(g, "circle", cx=f"{a:.2f}", cy=f"{b:.2f}", r="2.5", fill=color)

    legend = ET.SubElement(svg, "g", {"font-family": "sans-serif", "font-size": "11"})
    for j, label in enumerate(lines):
        y = PANEL_H + 10 + 16 * j
        color = COLORS[j % len(COLORS)]
        ET.SubElement(legend, "line", x1="20", y1=str(y), x2="40", y2=str(y), stroke=color, **{"stroke-width": "2"})
        ET.SubElement(legend, "text", x="46", y=str(y + 4)).text = label

    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
