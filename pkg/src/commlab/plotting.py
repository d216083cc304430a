"""Minimal SVG line charts, written with the stdlib XML tree so the output is
always well formed."""

from __future__ import annotations

import xml.etree.ElementTree as ET

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(x) -> str:
    return f"{x:.2f}"


def _ticks(lo, hi, count=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_chart_svg(series, title="", xlabel="", ylabel="", width=640, height=420,
                   xlim=None, ylim=None, log_x=False) -> str:
    """One polyline per entry of ``series`` (a mapping of name to ``(x, y)``
    points), plus axes, ticks and a legend."""
    import math

    tx = (lambda x: math.log10(x)) if log_x else (lambda x: x)
    pts = {name: [(tx(x), y) for x, y in s if not log_x or x > 0] for name, s in series.items()}
    xs = [x for s in pts.values() for x, _ in s] or [0.0, 1.0]
    ys = [y for s in pts.values() for _, y in s] or [0.0, 1.0]
    x0, x1 = (tx(xlim[0]), tx(xlim[1])) if xlim else (min(xs), max(xs))
    y0, y1 = ylim if ylim else (min(ys), max(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    left, right, top, bottom = 70, 170, 40, 60
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    if title:
        t = ET.SubElement(svg, "text", x=_fmt(left + pw / 2), y="22", attrib={"text-anchor": "middle", "font-size": "15"})
        t.text = title
    axes = ET.SubElement(svg, "g", stroke="black", attrib={"stroke-width": "1"})
    ET.SubElement(axes, "line", x1=_fmt(left), y1=_fmt(top + ph), x2=_fmt(left + pw), y2=_fmt(top + ph))
    ET.SubElement(axes, "line", x1=_fmt(left), y1=_fmt(top), x2=_fmt(left), y2=_fmt(top + ph))
    labels = ET.SubElement(svg, "g", attrib={"font-size": "11"})
    for x in _ticks(x0, x1):
        ET.SubElement(axes, "line", x1=_fmt(sx(x)), y1=_fmt(top + ph), x2=_fmt(sx(x)), y2=_fmt(top + ph + 5))
        t = ET.SubElement(labels, "text", x=_fmt(sx(x)), y=_fmt(top + ph + 18), attrib={"text-anchor": "middle"})
        t.text = f"{10 ** x:.3g}" if log_x else f"{x:.3g}"
    for y in _ticks(y0, y1):
        ET.SubElement(axes, "line", x1=_fmt(left - 5), y1=_fmt(sy(y)), x2=_fmt(left), y2=_fmt(sy(y)))
        t = ET.SubElement(labels, "text", x=_fmt(left - 8), y=_fmt(sy(y) + 4), attrib={"text-anchor": "end"})
        t.text = f"{y:.3g}"
    if xlabel:
        t = ET.SubElement(svg, "text", x=_fmt(left + pw / 2), y=_fmt(height - 15), attrib={"text-anchor": "middle", "font-size": "13"})
        t.text = xlabel
    if ylabel:
        t = ET.SubElement(svg, "text", x="18", y=_fmt(top + ph / 2), attrib={
            "text-anchor": "middle", "font-size": "13", "transform": f"rotate(-90 18 {_fmt(top + ph / 2)})"})
        t.text = ylabel

    for idx, (name, s) in enumerate(pts.items()):
        color = PALETTE[idx % len(PALETTE)]
        ET.SubElement(svg, "polyline", fill="none", stroke=color, attrib={
            "stroke-width": "2", "points": " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in s),
            "data-series": name})
        ly = top + 14 + 18 * idx
        ET.SubElement(svg, "line", x1=_fmt(left + pw + 15), y1=_fmt(ly), x2=_fmt(left + pw + 40), y2=_fmt(ly),
                      stroke=color, attrib={"stroke-width": "2"})
        t = ET.SubElement(svg, "text", x=_fmt(left + pw + 46), y=_fmt(ly + 4), attrib={"font-size": "12"})
        t.text = name
    return ET.tostring(svg, encoding="unicode")


def write_svg(path, text) -> None:
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        fh.write(text)
        fh.write("\n")
