"""
SVG - Grafici a linee autosufficienti (assi, tick, polilinee, legenda)
"""

import math
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

WIDTH, HEIGHT = 640, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 40, 50
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
N_TICKS = 5


def _ticks(lo: float, hi: float, count: int = N_TICKS) -> List[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _limits(values: Sequence[float]) -> Tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_chart(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    """
    Documento SVG con una polilinea per serie

    Args:
        series: nome -> (x, y); i punti non finiti vengono saltati
        title, x_label, y_label: testi del grafico
    """
    xs = [x for x_values, _ in series.values() for x in x_values]
    ys = [y for _, y_values in series.values() for y in y_values]
    x_lo, x_hi = _limits(xs)
    y_lo, y_hi = _limits(ys)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    root = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": str(WIDTH),
        "height": str(HEIGHT),
        "viewBox": f"0 0 {WIDTH} {HEIGHT}",
        "font-family": "sans-serif",
        "font-size": "12",
    })
    ET.SubElement(root, "rect", {"width": str(WIDTH), "height": str(HEIGHT), "fill": "white"})
    ET.SubElement(root, "text", {"x": str(WIDTH / 2), "y": "22", "text-anchor": "middle",
                                 "font-size": "15"}).text = title

    axes = ET.SubElement(root, "g", {"stroke": "black", "stroke-width": "1"})
    bottom = MARGIN_TOP + plot_h
    ET.SubElement(axes, "line", {"x1": str(MARGIN_LEFT), "y1": str(bottom),
                                 "x2": str(MARGIN_LEFT + plot_w), "y2": str(bottom)})
    ET.SubElement(axes, "line", {"x1": str(MARGIN_LEFT), "y1": str(MARGIN_TOP),
                                 "x2": str(MARGIN_LEFT), "y2": str(bottom)})

    for x in _ticks(x_lo, x_hi):
        ET.SubElement(axes, "line", {"x1": f"{px(x):.2f}", "y1": str(bottom),
                                     "x2": f"{px(x):.2f}", "y2": str(bottom + 5)})
        ET.SubElement(root, "text", {"x": f"{px(x):.2f}", "y": str(bottom + 18),
                                     "text-anchor": "middle"}).text = f"{x:.4g}"
    for y in _ticks(y_lo, y_hi):
        ET.SubElement(axes, "line", {"x1": str(MARGIN_LEFT - 5), "y1": f"{py(y):.2f}",
                                     "x2": str(MARGIN_LEFT), "y2": f"{py(y):.2f}"})
        ET.SubElement(root, "text", {"x": str(MARGIN_LEFT - 8), "y": f"{py(y) + 4:.2f}",
                                     "text-anchor": "end"}).text = f"{y:.4g}"

    ET.SubElement(root, "text", {"x": str(MARGIN_LEFT + plot_w / 2), "y": str(HEIGHT - 10),
                                 "text-anchor": "middle"}).text = x_label
    ET.SubElement(root, "text", {"x": "16", "y": str(MARGIN_TOP + plot_h / 2), "text-anchor": "middle",
                                 "transform": f"rotate(-90 16 {MARGIN_TOP + plot_h / 2})"}).text = y_label

    legend_x = MARGIN_LEFT + plot_w + 15
    for i, (name, (x_values, y_values)) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(x_values, y_values)
                          if math.isfinite(x) and math.isfinite(y))
        ET.SubElement(root, "polyline", {"points": points, "fill": "none", "stroke": color,
                                         "stroke-width": "2"})
        legend_y = MARGIN_TOP + 10 + 20 * i
        ET.SubElement(root, "line", {"x1": str(legend_x), "y1": str(legend_y), "x2": str(legend_x + 20),
                                     "y2": str(legend_y), "stroke": color, "stroke-width": "2"})
        ET.SubElement(root, "text", {"x": str(legend_x + 26), "y": str(legend_y + 4)}).text = name

    return ET.tostring(root, encoding="unicode")


def write_svg(path: Union[str, Path], document: str) -> str:
    Path(path).write_text('<?xml version="1.0" encoding="UTF-8"?>\n' + document + "\n", encoding="utf-8",
                          newline="\n")
    return str(path)
