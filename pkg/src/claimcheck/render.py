"""Deterministic raster artifacts: affinity heatmaps, score-distribution
plots, and the machine/human-readable reports.

Everything here paints uint8 pixel arrays and writes PNGs through a
fixed stdlib-zlib encoder: no text rendering libraries, no timestamps,
no float-formatting drift, so identical inputs give byte-identical
files. Curves are filled step histograms (never kernel density
estimates); calibration curves are painted first, case curves on top.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    HIST_BINS,
    HIST_RANGE,
    ScoreDistributions,
    VerdictReport,
    histogram_masses,
)

# Figure palette (echoes the published figures' legends).
BLUE = (0x20, 0x40, 0xC0)
GREEN = (0x30, 0xA0, 0x30)
RED = (0xC0, 0x30, 0x30)
YELLOW = (0xC0, 0xB0, 0x30)
BLACK = (0, 0, 0)
WHITE = (255, 255, 255)

LABEL_COLOR_CYCLE = (GREEN, RED, BLUE, YELLOW)


def write_png(path: str | Path, rgb: np.ndarray) -> None:
    """Encode an HxWx3 uint8 array as a fixed-layout PNG (filter 0,
    zlib level 6, no ancillary chunks)."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[0], rgb.shape[1]
    raw = b"".join(b"\x00" + rgb[r].tobytes() for r in range(h))

    def chunk(tag: bytes, data: bytes) -> bytes:
        body = tag + data
        return (struct.pack(">I", len(data)) + body
                + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    payload = (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
               + chunk(b"IDAT", zlib.compress(raw, 6))
               + chunk(b"IEND", b""))
    Path(path).write_bytes(payload)


# --------------------------------------------------------------------------
# tiny 5x7 bitmap font (uppercase, digits, punctuation)
# --------------------------------------------------------------------------

_FONT = {
    "A": (0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "B": (0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E),
    "C": (0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E),
    "D": (0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E),
    "E": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F),
    "F": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10),
    "G": (0x0E, 0x11, 0x10, 0x10, 0x13, 0x11, 0x0F),
    "H": (0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "I": (0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "J": (0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C),
    "K": (0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11),
    "L": (0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F),
    "M": (0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11),
    "N": (0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11),
    "O": (0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "P": (0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10),
    "Q": (0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D),
    "R": (0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11),
    "S": (0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E),
    "T": (0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04),
    "U": (0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "V": (0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04),
    "W": (0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11),
    "X": (0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11),
    "Y": (0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04),
    "Z": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F),
    "0": (0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E),
    "1": (0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "2": (0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F),
    "3": (0x0E, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0E),
    "4": (0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02),
    "5": (0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E),
    "6": (0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E),
    "7": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08),
    "8": (0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E),
    "9": (0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C),
    "-": (0x00, 0x00, 0x00, 0x0E, 0x00, 0x00, 0x00),
    ".": (0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C),
    "(": (0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02),
    ")": (0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08),
    " ": (0, 0, 0, 0, 0, 0, 0),
}


def draw_text(canvas: np.ndarray, x: int, y: int, text: str,
              color=BLACK) -> None:
    """Paint 5x7 glyphs with 1px spacing; unknown chars render as space."""
    for ch in text.upper():
        glyph = _FONT.get(ch, _FONT[" "])
        for r, row in enumerate(glyph):
            for c in range(5):
                if row & (1 << (4 - c)):
                    rr, cc = y + r, x + c
                    if 0 <= rr < canvas.shape[0] and 0 <= cc < canvas.shape[1]:
                        canvas[rr, cc] = color
        x += 6


def _blend(canvas: np.ndarray, rows, cols, color, alpha: float) -> None:
    region = canvas[rows, cols].astype(np.float64)
    mixed = (1.0 - alpha) * region + alpha * np.array(color, dtype=np.float64)
    canvas[rows, cols] = np.rint(mixed).astype(np.uint8)


# --------------------------------------------------------------------------
# affinity heatmap
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HeatmapStyle:
    """Blue-to-green ramp over [0, 1] plus identity-tag strip colors."""

    cell_size: int = 8
    low_color: tuple[int, int, int] = BLUE
    high_color: tuple[int, int, int] = GREEN
    label_colors: dict[str, tuple[int, int, int]] | None = None


def _ramp(value: float, style: HeatmapStyle) -> tuple[int, int, int]:
    t = min(1.0, max(0.0, value))
    return tuple(
        int(round((1.0 - t) * lo + t * hi))
        for lo, hi in zip(style.low_color, style.high_color))


def label_color_map(labels, style: HeatmapStyle) -> dict:
    """First-appearance order: first tag green, second red, then cycle."""
    if style.label_colors is not None:
        return dict(style.label_colors)
    mapping: dict[str, tuple[int, int, int]] = {}
    for lab in labels:
        if lab not in mapping:
            mapping[lab] = LABEL_COLOR_CYCLE[len(mapping)
                                             % len(LABEL_COLOR_CYCLE)]
    return mapping


def render_heatmap(matrix, style: HeatmapStyle, path: str | Path) -> dict:
    """Write the n-cell x n-cell similarity raster with a one-cell label
    strip on the top and left; returns figure metadata (clamp count)."""
    n = matrix.n
    cs = style.cell_size
    size = (n + 1) * cs
    canvas = np.full((size, size, 3), 255, dtype=np.uint8)
    colors = label_color_map(matrix.labels, style)

    clamped = int(np.sum((matrix.values < 0.0) | (matrix.values > 1.0)))
    for i in range(n):
        strip = colors[matrix.labels[i]]
        canvas[(i + 1) * cs:(i + 2) * cs, 0:cs] = strip  # left strip
        canvas[0:cs, (i + 1) * cs:(i + 2) * cs] = strip  # top strip
        for j in range(n):
            canvas[(i + 1) * cs:(i + 2) * cs, (j + 1) * cs:(j + 2) * cs] = \
                _ramp(float(matrix.values[i, j]), style)

    write_png(path, canvas)
    return {
        "path": str(path),
        "cells_clamped": clamped,
        "color_scale": "[0, 1] blue to green",
        "sort_key": matrix.sort_key,
        "label_colors": {lab: "#%02X%02X%02X" % rgb
                         for lab, rgb in colors.items()},
    }


# --------------------------------------------------------------------------
# score-distribution plot
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionStyle:
    width: int = 560
    height: int = 360
    margin_left: int = 46
    margin_right: int = 14
    margin_top: int = 14
    margin_bottom: int = 48
    fill_alpha: float = 0.45


_CURVES = (
    ("calibration genuine", "calibration", "genuine", BLUE),
    ("calibration impostor", "calibration", "impostor", YELLOW),
    ("case genuine", "case", "genuine", GREEN),
    ("case impostor", "case", "impostor", RED),
)


def render_distributions(case: ScoreDistributions,
                         calibration: ScoreDistributions | None,
                         path: str | Path,
                         style: DistributionStyle = DistributionStyle()
                         ) -> dict:
    """Draw up to four filled step histograms over similarity in [-1, 1]."""
    sides = {"case": case, "calibration": calibration}
    curves = []
    for name, which, side, color in _CURVES:
        dist = sides[which]
        if dist is None:
            continue
        scores = getattr(dist, side)
        if scores.size == 0:
            continue
        curves.append((name, histogram_masses(scores), color))
    if not curves:
        raise ValueError("nothing to plot: all score samples are empty")

    w, h = style.width, style.height
    x0, x1 = style.margin_left, w - style.margin_right
    y0, y1 = style.margin_top, h - style.margin_bottom
    canvas = np.full((h, w, 3), 255, dtype=np.uint8)

    peak = max(float(m.max()) for _, m, _ in curves)
    bin_edges = np.linspace(HIST_RANGE[0], HIST_RANGE[1], HIST_BINS + 1)

    def to_x(s: float) -> int:
        return int(round(x0 + (s - HIST_RANGE[0])
                         / (HIST_RANGE[1] - HIST_RANGE[0]) * (x1 - x0)))

    def to_y(mass: float) -> int:
        return int(round(y1 - mass / peak * (y1 - y0)))

    for name, masses, color in curves:
        for b in range(HIST_BINS):
            if masses[b] == 0:
                continue
            cx0, cx1 = to_x(bin_edges[b]), to_x(bin_edges[b + 1])
            top = to_y(float(masses[b]))
            _blend(canvas, slice(top, y1), slice(cx0, cx1), color,
                   style.fill_alpha)
            canvas[max(top - 1, y0):top + 1, cx0:cx1] = color  # step edge

    # axes, ticks, labels
    canvas[y1, x0:x1 + 1] = BLACK
    canvas[y0:y1 + 1, x0] = BLACK
    for tick in (-1.0, -0.5, 0.0, 0.5, 1.0):
        tx = to_x(tick)
        canvas[y1:y1 + 4, tx] = BLACK
        text = f"{tick:g}"
        draw_text(canvas, tx - 3 * len(text), y1 + 7, text)
    draw_text(canvas, (x0 + x1) // 2 - 30, h - 14, "SIMILARITY")

    ly = y0 + 6
    for name, _, color in curves:
        canvas[ly:ly + 8, x0 + 8:x0 + 16] = color
        draw_text(canvas, x0 + 22, ly, name)
        ly += 13

    write_png(path, canvas)
    return {"path": str(path), "curves": [name for name, _, _ in curves],
            "bins": HIST_BINS, "peak_mass": peak}


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def _fmt(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def write_report(report: VerdictReport, figures: dict[str, dict],
                 json_path: str | Path, md_path: str | Path) -> None:
    """Write the schema-versioned JSON report and the Markdown summary."""
    payload = report.to_dict()
    payload["figures"] = figures
    Path(json_path).write_text(json.dumps(payload, indent=2) + "\n")

    lines = [
        f"# Verdict report: {report.case_name}",
        "",
        f"- descriptor: `{report.descriptor}`",
        f"- verdict: **{report.verdict}**",
        f"- thresholds: tau_same={report.thresholds.tau_same:g}, "
        f"tau_diff={report.thresholds.tau_diff:g}",
        f"- overlap(case impostor, calibration genuine): "
        f"{_fmt(report.overlap_impostor_calibration_genuine)}",
        f"- overlap(case impostor, calibration impostor): "
        f"{_fmt(report.overlap_impostor_calibration_impostor)}",
        f"- d'(case genuine vs case impostor): {_fmt(report.d_prime_case)}",
        "",
    ]
    if report.reasons:
        lines += ["## Notes", ""] + [f"- {r}" for r in report.reasons] + [""]

    lines += ["## Score samples", ""]
    for which, dist in (("case", report.case),
                        ("calibration", report.calibration)):
        if dist is None:
            lines.append(f"- {which}: not provided")
            continue
        g, i = dist.side_stats("genuine"), dist.side_stats("impostor")
        lines.append(
            f"- {which}: genuine n={g['count']} mean={_fmt(g['mean'])} "
            f"std={_fmt(g['std'])}; impostor n={i['count']} "
            f"mean={_fmt(i['mean'])} std={_fmt(i['std'])}")
    lines.append("")

    lines += ["## Quality-confound rank correlations", "",
              "| metric | spearman(quality, mean similarity) |",
              "|---|---|"]
    for metric, value in report.confounds.items():
        note = report.confound_reasons.get(metric)
        cell = _fmt(value) if value is not None else f"n/a ({note})"
        lines.append(f"| {metric} | {cell} |")
    lines.append("")

    if figures:
        lines += ["## Figures", ""]
        for name, meta in figures.items():
            lines.append(f"- {name}: `{meta['path']}`")
        lines.append("")

    Path(md_path).write_text("\n".join(lines))
