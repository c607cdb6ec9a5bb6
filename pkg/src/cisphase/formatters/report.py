"""Run reports: the YAML record written by every command and its optional PDF rendering."""

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from reportlab.lib.colors import HexColor
from reportlab.lib.enums import TA_JUSTIFY
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

EXIT_OK = 0
EXIT_INCOMPLETE = 2


@dataclass
class RunReport:
    """What one CLI command did: echo, provenance, outputs and headline numbers."""

    command: List[str]
    scenario_digest: str
    outputs: Dict[str, str] = field(default_factory=dict)
    result: Dict[str, Any] = field(default_factory=dict)
    starts: List[Dict[str, Any]] = field(default_factory=list)
    skipped: int = 0
    budget_exhausted: int = 0
    warnings: List[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_INCOMPLETE if self.skipped or self.budget_exhausted else EXIT_OK

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": list(self.command),
            "scenario_digest": self.scenario_digest,
            "outputs": dict(self.outputs),
            "result": _plain(self.result),
            "starts": _plain(self.starts),
            "skipped": self.skipped,
            "budget_exhausted": self.budget_exhausted,
            "warnings": list(self.warnings),
            "exit_code": self.exit_code,
        }

    def write_yaml(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=False), encoding="utf-8")
        return path


def _plain(value):
    """numpy scalars/arrays to builtins so safe_dump accepts them."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "tolist"):
        return _plain(value.tolist())
    return value


def sanitize_text(text: str) -> str:
    """Escape markup characters for reportlab Paragraphs."""
    text = re.sub(r"<[^>]*>", "", str(text))
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _number(value: Optional[float], digits: int = 10) -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return f"{value:.{digits}g}"


def _vector(values) -> str:
    if values is None:
        return "-"
    return "[" + ", ".join(f"{v:.6g}" for v in values) + "]"


def write_run_report_pdf(output_path: Path, title: str, report: RunReport) -> Path:
    """One-page PDF: headline table (x*, Solve Time (sec), log(f)), per-start table, outputs."""
    doc = SimpleDocTemplate(
        str(output_path),
        pagesize=letter,
        leftMargin=0.8 * inch,
        rightMargin=0.8 * inch,
        topMargin=0.8 * inch,
        bottomMargin=0.8 * inch,
    )
    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        "CustomTitle", parent=styles["Title"], fontSize=16, spaceAfter=14, textColor=HexColor("#2C3E50")
    )
    heading_style = ParagraphStyle(
        "CustomHeading", parent=styles["Heading1"], fontSize=13, spaceAfter=8, spaceBefore=12,
        textColor=HexColor("#2980B9"),
    )
    body_style = ParagraphStyle(
        "CustomBody", parent=styles["Normal"], fontSize=9, leading=12, alignment=TA_JUSTIFY, spaceAfter=6
    )
    table_style = TableStyle([
        ("BACKGROUND", (0, 0), (-1, 0), HexColor("#2980B9")),
        ("TEXTCOLOR", (0, 0), (-1, 0), HexColor("#FFFFFF")),
        ("FONTSIZE", (0, 0), (-1, -1), 8),
        ("GRID", (0, 0), (-1, -1), 0.25, HexColor("#BDC3C7")),
        ("VALIGN", (0, 0), (-1, -1), "MIDDLE"),
    ])

    story = [Paragraph(sanitize_text(title), title_style)]
    story.append(Paragraph(sanitize_text("Command: " + " ".join(report.command)), body_style))
    story.append(Paragraph(sanitize_text(f"Scenario digest: {report.scenario_digest}"), body_style))
    story.append(Spacer(1, 0.1 * inch))

    result = report.result
    if "x_star" in result:
        story.append(Paragraph("Result", heading_style))
        headline = [["x*", "Solve Time (sec)", "log(f)"],
                    [_vector(result.get("x_star")), _number(result.get("wall_time"), 4),
                     _number(result.get("log_objective"))]]
        table = Table(headline, hAlign="LEFT")
        table.setStyle(table_style)
        story.append(table)
    elif result:
        story.append(Paragraph("Result", heading_style))
        for key, value in result.items():
            story.append(Paragraph(sanitize_text(f"{key}: {value}"), body_style))

    if report.starts:
        story.append(Paragraph("Starts", heading_style))
        rows = [["start", "observer", "x0", "x*", "objective", "error"]]
        for rec in report.starts:
            rows.append([
                str(rec.get("start", "")),
                "" if rec.get("observer") is None else str(rec["observer"]),
                _vector(rec.get("x0")),
                _vector(rec.get("x_star")),
                _number(rec.get("objective")),
                sanitize_text(rec.get("error") or "")[:60],
            ])
        table = Table(rows, hAlign="LEFT", repeatRows=1)
        table.setStyle(table_style)
        story.append(table)

    if report.warnings:
        story.append(Paragraph("Warnings", heading_style))
        for warning in report.warnings:
            story.append(Paragraph("• " + sanitize_text(warning), body_style))

    story.append(Paragraph("Outputs", heading_style))
    for name, path in report.outputs.items():
        story.append(Paragraph(sanitize_text(f"{name}: {path}"), body_style))

    doc.build(story)
    return Path(output_path)
