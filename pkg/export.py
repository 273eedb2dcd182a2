import io
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional, Union

import pandas as pd
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side

from bench import COLUMNS, SUMMARY_COLUMNS

logger = logging.getLogger(__name__)

Target = Union[str, Path, io.TextIOBase]


class ReportExporter:
    """Writes bench tables and simulator traces"""

    def __init__(self, float_format: Optional[str] = None):
        self.float_format = float_format
        self.datetime_format = '%Y-%m-%d %H:%M:%S'

    def rows_to_csv(self, rows: pd.DataFrame) -> str:
        """Bench rows as CSV text; an empty frame still carries the header"""
        buffer = io.StringIO()
        rows.reindex(columns=COLUMNS).to_csv(buffer, index=False, float_format=self.float_format,
                                             lineterminator='\n')
        return buffer.getvalue()

    def summary_to_csv(self, summary: pd.DataFrame) -> str:
        buffer = io.StringIO()
        summary.reindex(columns=SUMMARY_COLUMNS).to_csv(buffer, index=False, float_format=self.float_format,
                                                        lineterminator='\n')
        return buffer.getvalue()

    def write_rows_csv(self, rows: pd.DataFrame, target: Target):
        _write_text(target, self.rows_to_csv(rows))

    def write_summary_csv(self, summary: pd.DataFrame, target: Target):
        _write_text(target, self.summary_to_csv(summary))

    def export_to_excel(self, rows: pd.DataFrame, summary: pd.DataFrame, config: Optional[dict] = None) -> bytes:
        """Workbook with Runs, Summary and (optionally) Config sheets"""
        buffer = io.BytesIO()

        with pd.ExcelWriter(buffer, engine='openpyxl') as writer:
            rows.reindex(columns=COLUMNS).to_excel(writer, sheet_name='Runs', index=False)
            summary.reindex(columns=SUMMARY_COLUMNS).to_excel(writer, sheet_name='Summary', index=False)
            if config:
                settings = pd.DataFrame(
                    [{'setting': key, 'value': json.dumps(value, default=str)} for key, value in config.items()]
                    + [{'setting': 'exported_at', 'value': datetime.now().strftime(self.datetime_format)}]
                )
                settings.to_excel(writer, sheet_name='Config', index=False)
            self._format_excel_worksheets(writer)

        buffer.seek(0)
        return buffer.getvalue()

    def write_excel(self, rows: pd.DataFrame, summary: pd.DataFrame, target: Union[str, Path],
                    config: Optional[dict] = None):
        Path(target).write_bytes(self.export_to_excel(rows, summary, config))
        logger.info("wrote workbook %s", target)

    def trace_to_jsonl(self, messages: Iterable) -> str:
        return ''.join(json.dumps(message.to_dict(), sort_keys=True) + '\n' for message in messages)

    def write_trace_jsonl(self, messages: Iterable, target: Target):
        _write_text(target, self.trace_to_jsonl(messages))

    def _format_excel_worksheets(self, writer):
        """Header styling, borders and column widths on every sheet"""
        workbook = writer.book

        header_font = Font(bold=True, color='FFFFFF')
        header_fill = PatternFill(start_color='366092', end_color='366092', fill_type='solid')
        header_alignment = Alignment(horizontal='center', vertical='center')
        thin = Side(style='thin')
        border = Border(left=thin, right=thin, top=thin, bottom=thin)

        for sheet_name in workbook.sheetnames:
            worksheet = workbook[sheet_name]

            for cell in worksheet[1]:
                cell.font = header_font
                cell.fill = header_fill
                cell.alignment = header_alignment
                cell.border = border

            for column in worksheet.columns:
                longest = max((len(str(cell.value)) for cell in column if cell.value is not None), default=0)
                worksheet.column_dimensions[column[0].column_letter].width = min(longest + 2, 50)

            for row in worksheet.iter_rows(min_row=2):
                for cell in row:
                    if cell.value is not None:
                        cell.border = border


def _write_text(target: Target, text: str):
    if hasattr(target, 'write'):
        target.write(text)
    else:
        Path(target).write_text(text, encoding='utf-8')
