"""
Report export for laboratory runs.

This module writes pydantic reports as canonical JSON, density-of-states
histograms as CSV for external plotting, and a short markdown summary of
any report.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd
from jinja2 import Environment, StrictUndefined
from pydantic import BaseModel

from src.core.config import config_loader
from src.core.models import Histogram

from .schema_validation import validate_report


class ExportFormat(Enum):
    """Supported report output formats."""
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "markdown"


_MARKDOWN_TEMPLATE = """# {{ title }}

| field | value |
|-------|-------|
{% for key, value in rows %}| {{ key }} | {{ value }} |
{% endfor %}"""


class ReportExporter:
    """Exports reports to JSON, CSV and markdown."""

    def __init__(self, indent: Optional[int] = None):
        self.indent = indent if indent is not None else config_loader.get_report_settings().json_indent
        self.environment = Environment(undefined=StrictUndefined, keep_trailing_newline=True, autoescape=False)
        self.templates = {
            ExportFormat.MARKDOWN: self.environment.from_string(_MARKDOWN_TEMPLATE),
        }

    def to_json(self, report: BaseModel, schema: Optional[str] = None) -> str:
        """
        Canonical JSON text of a report.

        Keys are sorted so identical runs give byte-identical files. When a
        schema name is given the payload is validated before rendering.

        Args:
            report: Any pydantic report
            schema: Schema name under docs/schemas, without suffix

        Returns:
            JSON text ending in a newline
        """
        payload = report.model_dump(mode='json')
        if schema is not None:
            validate_report(payload, schema)
        return json.dumps(payload, indent=self.indent, sort_keys=True) + '\n'

    def histogram_frame(self, histogram: Histogram) -> pd.DataFrame:
        edges = histogram.bin_edges
        return pd.DataFrame({
            'bin_left': edges[:-1],
            'bin_right': edges[1:],
            'count': histogram.counts,
        })

    def to_csv(self, histogram: Histogram) -> str:
        """Histogram as CSV with columns bin_left, bin_right, count."""
        return self.histogram_frame(histogram).to_csv(index=False, lineterminator='\n', float_format='%.17g')

    def to_markdown(self, report: BaseModel, title: Optional[str] = None) -> str:
        """One-table markdown summary of the report's scalar fields."""
        payload: Dict[str, Any] = report.model_dump(mode='json')
        rows = [(key, value) for key, value in sorted(payload.items()) if not isinstance(value, (dict, list))]
        return self.templates[ExportFormat.MARKDOWN].render(
            title=title or type(report).__name__,
            rows=rows,
        )

    def export(self, report: Any, format_type: ExportFormat = ExportFormat.JSON, schema: Optional[str] = None) -> str:
        """
        Render a report in the requested format.

        Raises:
            ValueError: If format_type is not supported or does not fit the report
        """
        if isinstance(format_type, str):
            try:
                format_type = ExportFormat(format_type)
            except ValueError:
                raise ValueError(f"Unsupported export format: {format_type}")

        if format_type is ExportFormat.CSV:
            if not isinstance(report, Histogram):
                raise ValueError("CSV export is only available for histograms")
            return self.to_csv(report)
        if format_type is ExportFormat.MARKDOWN:
            if schema is not None:
                validate_report(report.model_dump(mode='json'), schema)
            return self.to_markdown(report)
        return self.to_json(report, schema)

    def export_to_file(
        self,
        report: Any,
        output_path: Path,
        format_type: ExportFormat = ExportFormat.JSON,
        schema: Optional[str] = None,
    ) -> Path:
        """
        Export a report to a file, creating parent directories.

        Returns:
            Path to the created file
        """
        content = self.export(report, format_type=format_type, schema=schema)
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
        return output_path
