"""
Report - CSV tables, polyline SVG charts and the coloured validation table.
"""

import csv
import io
import math
import os
import sys
from pathlib import Path
from typing import Any, List, NamedTuple, Optional, Sequence, TextIO, Union

from .intensity import IntensitySample
from .validation import FAIL, INSUFFICIENT, PASS, ValidationReport

PathLike = Union[str, Path]


# ANSI color codes
class Colors:
    RESET = "\033[0m"
    BOLD = "\033[1m"
    DIM = "\033[2m"

    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    CYAN = "\033[36m"


def supports_color(stream: Optional[TextIO] = None) -> bool:
    """Check if the output stream supports colors."""
    if os.environ.get("NO_COLOR"):
        return False
    if os.environ.get("FORCE_COLOR"):
        return True
    stream = stream or sys.stdout
    return hasattr(stream, "isatty") and stream.isatty()


def c(text: str, *colors: str, stream: Optional[TextIO] = None) -> str:
    """Apply colors to text if supported."""
    if not supports_color(stream):
        return text
    return f"{''.join(colors)}{text}{Colors.RESET}"


def format_value(value: Any) -> str:
    """CSV field: floats with 17 significant digits, None as an empty field."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def write_text(text: str, path: Optional[PathLike]) -> None:
    """Write the whole document at once; stdout when no path is given."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def write_csv(path: Optional[PathLike], header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    write_text(render_csv(header, rows), path)


INTENSITY_HEADER = ("u", "lambda1", "lambda2", "regime1", "regime2", "series_terms", "quad_err")


def intensity_rows(samples: Sequence[IntensitySample]) -> List[List[Any]]:
    return [
        [
            s.u,
            s.lambda1,
            s.lambda2,
            str(s.regime1),
            str(s.regime2),
            s.quality.series_terms_used,
            s.quality.quadrature_estimate_error,
        ]
        for s in samples
    ]


class Series(NamedTuple):
    """One polyline; None values break the line."""
    name: str
    x: Sequence[float]
    y: Sequence[Optional[float]]


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _finite(values: Sequence[Optional[float]]) -> List[float]:
    return [v for v in values if v is not None and math.isfinite(v)]


def render_svg(
    title: str,
    series: Sequence[Series],
    x_label: str = "u",
    y_label: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """
    Line chart as a standalone SVG document.

    Args:
        title: Chart title.
        series: Polylines to draw, one colour each.
        x_label: Label of the horizontal axis.
        y_label: Label of the vertical axis.
        width: Document width in pixels.
        height: Document height in pixels.

    Returns:
        SVG text; identical input gives identical output.
    """
    margin = 50
    xs = [x for s in series for x in s.x]
    ys = [y for s in series for y in _finite(s.y)]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(0.0, min(ys)), max(ys)) if ys else (0.0, 1.0)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    def px(x: float) -> float:
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def py(y: float) -> float:
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{x_label}</text>',
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {height / 2:.1f})">{y_label}</text>',
        f'<text x="{margin - 4}" y="{height - margin + 4}" text-anchor="end" font-family="sans-serif" font-size="10">{y_lo:.3g}</text>',
        f'<text x="{margin - 4}" y="{margin + 4}" text-anchor="end" font-family="sans-serif" font-size="10">{y_hi:.3g}</text>',
        f'<text x="{margin}" y="{height - margin + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{x_lo:.3g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{x_hi:.3g}</text>',
    ]
    for index, s in enumerate(series):
        colour = _PALETTE[index % len(_PALETTE)]
        segment: List[str] = []
        segments: List[List[str]] = []
        for x, y in zip(s.x, s.y):
            if y is None or not math.isfinite(y):
                if segment:
                    segments.append(segment)
                segment = []
                continue
            segment.append(f"{px(x):.2f},{py(y):.2f}")
        if segment:
            segments.append(segment)
        for points in segments:
            lines.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{" ".join(points)}"/>')
        lines.append(
            f'<text x="{width - margin - 4}" y="{margin + 14 * (index + 1)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{colour}">{s.name}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path: PathLike, title: str, series: Sequence[Series], **kwargs: Any) -> None:
    write_text(render_svg(title, series, **kwargs), path)


_STATUS_COLORS = {PASS: Colors.GREEN, FAIL: Colors.RED, INSUFFICIENT: Colors.YELLOW}

VALIDATION_HEADER = ("quantity", "analytic", "mc", "std_err", "z", "status")


def validation_rows(report: ValidationReport) -> List[List[Any]]:
    return [[r.quantity, r.analytic, r.mc, r.std_err, r.z, r.status] for r in report.rows]


def render_table(report: ValidationReport, stream: Optional[TextIO] = None) -> str:
    """Aligned validation table with coloured statuses and a verdict line."""
    def cell(value: Optional[float], spec: str) -> str:
        return "" if value is None else format(value, spec)

    width = max([len("quantity"), *(len(r.quantity) for r in report.rows)])
    out = [
        c(f"{'quantity':<{width}}  {'analytic':>14}  {'mc':>14}  {'std_err':>10}  {'z':>7}  status", Colors.BOLD, stream=stream),
        "-" * (width + 62),
    ]
    for r in report.rows:
        status = c(r.status, _STATUS_COLORS[r.status], stream=stream)
        out.append(
            f"{r.quantity:<{width}}  {cell(r.analytic, '14.8g'):>14}  {cell(r.mc, '14.8g'):>14}  "
            f"{cell(r.std_err, '10.3g'):>10}  {cell(r.z, '7.2f'):>7}  {status}"
        )
    verdict = (
        c("PASSED", Colors.GREEN, Colors.BOLD, stream=stream)
        if report.passed
        else c("FAILED", Colors.RED, Colors.BOLD, stream=stream)
    )
    out.append("")
    out.append(
        f"{verdict}: {len(report.failures)} failing of {len(report.decisive_rows)} decisive rows "
        f"(budget {report.false_alarm_budget}), {len(report.rows) - len(report.decisive_rows)} insufficient"
    )
    return "\n".join(out) + "\n"
