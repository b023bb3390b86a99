# report_generator.py
# Uses reportlab to render an experiment report as a one-page PDF table.
import logging
import os
from typing import Any, Dict, List

from reportlab.lib.colors import HexColor
from reportlab.lib.pagesizes import A4
from reportlab.lib.units import cm
from reportlab.pdfgen import canvas

logger = logging.getLogger(__name__)

# --- Constants ---
PAGE_WIDTH, PAGE_HEIGHT = A4
MARGIN = 1 * cm
CONTENT_WIDTH = PAGE_WIDTH - 2 * MARGIN
HEADER_COLOR = HexColor("#F79646")
ROW_SHADE = HexColor("#F2F2F2")
FONT_NAME = "Helvetica"
FONT_BOLD = "Helvetica-Bold"
ROW_HEIGHT = 14
TABLE_COLUMNS = ["n", "mean_error", "sd_error", "rmse", "coverage", "mean_h", "ks"]


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.5g}"
    return str(value)


# --- Drawing Utilities ---

def _draw_header(c: canvas.Canvas, title: str):
    c.setFillColor(HEADER_COLOR)
    c.rect(0, PAGE_HEIGHT - 2 * cm, PAGE_WIDTH, 2 * cm, fill=1, stroke=0)
    c.setFillColorRGB(1, 1, 1)
    c.setFont(FONT_BOLD, 14)
    c.drawCentredString(PAGE_WIDTH / 2, PAGE_HEIGHT - 1.3 * cm, title)


def _draw_lines(c: canvas.Canvas, lines: List[str], y: float) -> float:
    c.setFillColorRGB(0, 0, 0)
    c.setFont(FONT_NAME, 9)
    for line in lines:
        c.drawString(MARGIN, y, line)
        y -= 12
    return y


def _draw_table(c: canvas.Canvas, rows: List[Dict[str, Any]], y: float) -> float:
    col_width = CONTENT_WIDTH / len(TABLE_COLUMNS)
    c.setFillColor(HEADER_COLOR)
    c.rect(MARGIN, y - 4, CONTENT_WIDTH, ROW_HEIGHT, fill=1, stroke=0)
    c.setFillColorRGB(1, 1, 1)
    c.setFont(FONT_BOLD, 9)
    for i, name in enumerate(TABLE_COLUMNS):
        c.drawString(MARGIN + i * col_width + 3, y, name)
    y -= ROW_HEIGHT
    c.setFont(FONT_NAME, 9)
    for index, row in enumerate(rows):
        if index % 2:
            c.setFillColor(ROW_SHADE)
            c.rect(MARGIN, y - 4, CONTENT_WIDTH, ROW_HEIGHT, fill=1, stroke=0)
        c.setFillColorRGB(0, 0, 0)
        for i, name in enumerate(TABLE_COLUMNS):
            c.drawString(MARGIN + i * col_width + 3, y, _fmt(row.get(name)))
        y -= ROW_HEIGHT
    return y


# --- Main PDF Generation Function ---

def render_report_pdf(report, path: str) -> None:
    """
    Writes the per-n table of an ExperimentReport and its run metadata to `path`.
    The canvas is created with invariant=1, so identical reports give identical bytes.
    A failed render removes the partial file and re-raises.
    """
    data = report.to_dict()
    plan = data["plan"]
    grid = plan.get("grid", {})
    logger.info("Rendering PDF report: %s", path)
    try:
        c = canvas.Canvas(path, pagesize=A4, invariant=1)
        c.setTitle(f"Monte Carlo report: {plan['density']}")
        _draw_header(c, f"{plan['density']} / {plan['kernel']} kernel / {plan['estimator']}")

        y = PAGE_HEIGHT - 3 * cm
        meta = [
            f"seed {plan['master_seed']}, {plan['replicates']} replicates, CI level {plan['ci_level']}",
            f"grid mode {grid.get('mode')}, L mode {grid.get('l_mode')}",
            f"rate slope {_fmt(data['rate_slope'])} (stderr {_fmt(data['rate_slope_stderr'])}), "
            f"sqrt(log n)-adjusted {_fmt(data['adjusted_slope'])}",
        ]
        y = _draw_lines(c, meta, y) - 10
        y = _draw_table(c, data["rows"], y) - 10

        notes = [f"n={r['n']}: {r['status']}" for r in data["rows"] if r["status"] != "ok"]
        notes += [f"n={r['n']}: ks omitted ({r['ks_reason']})" for r in data["rows"] if r.get("ks_reason")]
        _draw_lines(c, notes, y)

        c.showPage()
        c.save()
        logger.info("-> PDF report written.")
    except Exception as e:
        logger.error("[ERROR] failed to render PDF report: %s", e)
        if os.path.exists(path):
            os.remove(path)
        raise
