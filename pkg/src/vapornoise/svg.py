"""Minimal deterministic SVG plots from sweep CSV files.

Purely cosmetic output: line plots become one ``<polyline>`` per series and
heatmaps one ``<rect class="cell">`` per grid cell, so the structure is
plain XML with no external dependencies and identical bytes across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .tableio import read_csv

__all__ = ["PlotSpec", "emit_svg"]

_WIDTH = 800
_HEIGHT = 560
_MARGIN = 64

_SERIES_COLORS = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf",
)

# Anchor colors for the heatmap ramp (dark blue -> yellow).
_RAMP = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: a line plot of y columns vs x, or a value heatmap."""

    kind: str
    x: str
    y: tuple[str, ...] = ()
    value: str | None = None
    group: str | None = None
    log_x: bool = False
    log_y: bool = False
    title: str = ""

    def __post_init__(self):
        if self.kind not in ("line", "heatmap"):
            raise ValueError(f"kind must be 'line' or 'heatmap', got {self.kind!r}")
        if self.kind == "line" and not self.y:
            raise ValueError("line plots need at least one y column")
        if self.kind == "heatmap" and not self.value:
            raise ValueError("heatmaps need a value column; for axes use x and y[0]")
        if self.kind == "heatmap" and len(self.y) != 1:
            raise ValueError("heatmaps take exactly one y column")


def _parse(value: str) -> float | None:
    if value is None or value == "":
        return None
    try:
        return float(value)
    except ValueError:
        return None


def _check_columns(header: list[str], wanted: list[str], path) -> None:
    missing = [name for name in wanted if name not in header]
    if missing:
        raise ValueError(f"{path}: missing column(s) {missing}; have {header}")


def _axis_ticks(lo: float, hi: float, log: bool, n: int = 5) -> list[float]:
    if log:
        lo_e, hi_e = math.floor(lo), math.ceil(hi)
        span = max(hi_e - lo_e, 1)
        step = max(1, round(span / (n - 1)))
        return [float(e) for e in range(lo_e, hi_e + 1, step)]
    if hi == lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def _fmt_tick(value: float, log: bool) -> str:
    if log:
        return f"1e{value:g}"
    return f"{value:.4g}"


class _Canvas:
    def __init__(self, title: str):
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
            f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
            f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        ]
        if title:
            self.parts.append(
                f'<text x="{_WIDTH / 2:g}" y="24" text-anchor="middle" '
                f'font-family="sans-serif" font-size="16">{_escape(title)}</text>'
            )

    def frame(self):
        x0, y0 = _MARGIN, _MARGIN
        x1, y1 = _WIDTH - _MARGIN, _HEIGHT - _MARGIN
        self.parts.append(
            f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
            'fill="none" stroke="black" stroke-width="1"/>'
        )

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def _scaler(lo: float, hi: float, out_lo: float, out_hi: float):
    span = hi - lo
    if span == 0:
        mid = 0.5 * (out_lo + out_hi)
        return lambda v: mid
    return lambda v: out_lo + (v - lo) / span * (out_hi - out_lo)


def _line_svg(header, rows, spec: PlotSpec, path) -> str:
    _check_columns(header, [spec.x, *spec.y] + ([spec.group] if spec.group else []), path)
    series: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for row in rows:
        x = _parse(row[spec.x])
        if x is None:
            continue
        if spec.log_x:
            if x <= 0:
                continue
            x = math.log10(x)
        group = row[spec.group] if spec.group else ""
        for col in spec.y:
            y = _parse(row[col])
            if y is None:
                continue
            if spec.log_y:
                if y <= 0:
                    continue
                y = math.log10(y)
            series.setdefault((group, col), []).append((x, y))
    points = [pt for pts in series.values() for pt in pts]
    if not points:
        raise ValueError(f"{path}: no plottable data for {spec.x} vs {spec.y}")
    xs = [pt[0] for pt in points]
    ys = [pt[1] for pt in points]
    to_px = _scaler(min(xs), max(xs), _MARGIN, _WIDTH - _MARGIN)
    to_py = _scaler(min(ys), max(ys), _HEIGHT - _MARGIN, _MARGIN)

    canvas = _Canvas(spec.title)
    canvas.frame()
    for tick in _axis_ticks(min(xs), max(xs), spec.log_x):
        px = to_px(tick)
        canvas.parts.append(
            f'<line x1="{px:.2f}" y1="{_HEIGHT - _MARGIN}" x2="{px:.2f}" '
            f'y2="{_HEIGHT - _MARGIN + 6}" stroke="black"/>'
        )
        canvas.parts.append(
            f'<text x="{px:.2f}" y="{_HEIGHT - _MARGIN + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt_tick(tick, spec.log_x)}</text>'
        )
    for tick in _axis_ticks(min(ys), max(ys), spec.log_y):
        py = to_py(tick)
        canvas.parts.append(
            f'<line x1="{_MARGIN - 6}" y1="{py:.2f}" x2="{_MARGIN}" y2="{py:.2f}" '
            'stroke="black"/>'
        )
        canvas.parts.append(
            f'<text x="{_MARGIN - 10}" y="{py + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt_tick(tick, spec.log_y)}</text>'
        )
    for index, ((group, col), pts) in enumerate(sorted(series.items())):
        color = _SERIES_COLORS[index % len(_SERIES_COLORS)]
        coords = " ".join(f"{to_px(x):.2f},{to_py(y):.2f}" for x, y in pts)
        label = f"{col}" + (f" [{group}]" if group else "")
        canvas.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{coords}"><title>{_escape(label)}</title></polyline>'
        )
        canvas.parts.append(
            f'<text x="{_WIDTH - _MARGIN - 4}" y="{_MARGIN + 16 + 14 * index}" '
            f'text-anchor="end" font-family="sans-serif" font-size="11" '
            f'fill="{color}">{_escape(label)}</text>'
        )
    canvas.parts.append(
        f'<text x="{_WIDTH / 2:g}" y="{_HEIGHT - 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_escape(spec.x)}</text>'
    )
    return canvas.finish()


def _ramp_color(fraction: float) -> str:
    fraction = min(max(fraction, 0.0), 1.0)
    scaled = fraction * (len(_RAMP) - 1)
    low = int(scaled)
    high = min(low + 1, len(_RAMP) - 1)
    t = scaled - low
    rgb = tuple(
        round(_RAMP[low][i] + t * (_RAMP[high][i] - _RAMP[low][i])) for i in range(3)
    )
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def _heatmap_svg(header, rows, spec: PlotSpec, path) -> str:
    y_col = spec.y[0]
    _check_columns(header, [spec.x, y_col, spec.value], path)
    cells: list[tuple[float, float, float]] = []
    for row in rows:
        x = _parse(row[spec.x])
        y = _parse(row[y_col])
        value = _parse(row[spec.value])
        if x is None or y is None or value is None:
            continue
        cells.append((x, y, value))
    if not cells:
        raise ValueError(f"{path}: no plottable cells for heatmap")
    xs = sorted({c[0] for c in cells})
    ys = sorted({c[1] for c in cells})
    x_index = {v: i for i, v in enumerate(xs)}
    y_index = {v: i for i, v in enumerate(ys)}
    values = [c[2] for c in cells]
    lo, hi = min(values), max(values)
    cell_w = (_WIDTH - 2 * _MARGIN) / len(xs)
    cell_h = (_HEIGHT - 2 * _MARGIN) / len(ys)

    canvas = _Canvas(spec.title)
    for x, y, value in cells:
        px = _MARGIN + x_index[x] * cell_w
        py = _HEIGHT - _MARGIN - (y_index[y] + 1) * cell_h
        fraction = 0.5 if hi == lo else (value - lo) / (hi - lo)
        canvas.parts.append(
            f'<rect class="cell" x="{px:.2f}" y="{py:.2f}" width="{cell_w:.2f}" '
            f'height="{cell_h:.2f}" fill="{_ramp_color(fraction)}">'
            f"<title>{spec.x}={x:g}, {y_col}={y:g}, {spec.value}={value:g}</title></rect>"
        )
    canvas.frame()
    canvas.parts.append(
        f'<text x="{_WIDTH / 2:g}" y="{_HEIGHT - 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{_escape(spec.x)}</text>'
    )
    canvas.parts.append(
        f'<text x="16" y="{_HEIGHT / 2:g}" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 16 {_HEIGHT / 2:g})" '
        f'text-anchor="middle">{_escape(y_col)}</text>'
    )
    return canvas.finish()


def emit_svg(csv_path: str | Path, spec: PlotSpec, out_path: str | Path) -> Path:
    """Render one CSV as an SVG file per the plot spec.

    Raises :class:`ValueError` for missing columns, empty input, or rows
    with nothing plottable.
    """
    header, rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: CSV has a header but no data rows")
    if spec.kind == "line":
        text = _line_svg(header, rows, spec, csv_path)
    else:
        text = _heatmap_svg(header, rows, spec, csv_path)
    out_path = Path(out_path)
    out_path.write_text(text, encoding="utf-8")
    return out_path
