"""
Analysis reports: JSON/human rendering, CSV and Excel export
"""
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter

from .series import Status, Verdict

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def package_versions() -> Dict[str, str]:
    """Versions of the numerical stack, recorded in every report"""
    import mpmath
    import openpyxl
    import scipy
    from . import __version__
    return {'birthchain': __version__, 'numpy': np.__version__, 'scipy': scipy.__version__,
            'pandas': pd.__version__, 'mpmath': mpmath.__version__, 'openpyxl': openpyxl.__version__}


def jsonable(value: Any) -> Any:
    """Plain JSON types: numpy scalars unwrapped, tuples as lists, NaN as null"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, Status):
        return value.value
    if value is None or isinstance(value, str):
        return value
    # mpf and other number-likes
    try:
        return jsonable(float(value))
    except (TypeError, ValueError):
        return str(value)


@dataclass
class ReportEntry:
    """One criterion or quantity: verdict (if any), value(s), diagnostics, error object"""
    name: str
    verdict: Optional[Verdict] = None
    value: Any = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None

    def __post_init__(self):
        self.value = jsonable(self.value)
        self.error = jsonable(self.error)
        if self.verdict is not None:
            self.diagnostics = jsonable({**self.verdict.diagnostics, **self.diagnostics})
            self.verdict = Verdict(self.verdict.status, self.diagnostics)
        else:
            self.diagnostics = jsonable(self.diagnostics)

    @property
    def status(self) -> Optional[str]:
        return None if self.verdict is None else self.verdict.status.value

    def to_dict(self) -> Dict[str, Any]:
        return {'verdict': self.status, 'value': self.value,
                'diagnostics': self.diagnostics, 'error': self.error}

    @classmethod
    def from_dict(cls, name: str, data: Dict[str, Any]) -> 'ReportEntry':
        diagnostics = dict(data.get('diagnostics') or {})
        verdict = None if data.get('verdict') is None else Verdict(Status(data['verdict']), diagnostics)
        return cls(name, verdict, data.get('value'), diagnostics, data.get('error'))


@dataclass
class AnalysisReport:
    model_echo: Dict[str, Any]
    parameters: Dict[str, Any]
    entries: Dict[str, ReportEntry]
    versions: Dict[str, str] = field(default_factory=dict)
    wall_time: float = 0.0
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.model_echo = jsonable(self.model_echo)
        self.parameters = jsonable(self.parameters)
        self.warnings = list(self.warnings)

    @property
    def verdicts(self) -> Dict[str, str]:
        return {name: e.status for name, e in self.entries.items() if e.verdict is not None}

    @property
    def quantities(self) -> Dict[str, Any]:
        return {name: e.value for name, e in self.entries.items()
                if e.verdict is None and e.error is None}

    @property
    def errors(self) -> Dict[str, Dict[str, Any]]:
        return {name: e.error for name, e in self.entries.items() if e.error is not None}

    def __getitem__(self, name: str) -> ReportEntry:
        return self.entries[name]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema': SCHEMA_VERSION,
            'model_echo': self.model_echo,
            'N': self.parameters.get('N'),
            'parameters': self.parameters,
            'verdicts': self.verdicts,
            'quantities': self.quantities,
            'entries': {name: e.to_dict() for name, e in self.entries.items()},
            'versions': self.versions,
            'wall_time': self.wall_time,
            'warnings': self.warnings,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AnalysisReport':
        entries = {name: ReportEntry.from_dict(name, e) for name, e in data['entries'].items()}
        return cls(data['model_echo'], data['parameters'], entries, dict(data.get('versions', {})),
                   float(data.get('wall_time', 0.0)), list(data.get('warnings', [])))

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> 'AnalysisReport':
        return cls.from_dict(json.loads(text))

    def to_human(self, digits: int = 6) -> str:
        """Plain-text rendering carrying every field of the JSON form"""
        lines = [f"Model: {self.model_echo.get('name', '?')}"]
        lines += [f"  {k}: {_fmt(v, digits)}" for k, v in self.model_echo.items() if k != 'name']
        lines.append("Parameters:")
        lines += [f"  {k}: {_fmt(v, digits)}" for k, v in self.parameters.items()]
        lines.append("Entries:")
        for name, entry in self.entries.items():
            head = f"  {name}"
            if entry.verdict is not None:
                head += f": {entry.status}"
            if entry.value is not None:
                head += f" value={_fmt(entry.value, digits)}"
            lines.append(head)
            for k, v in entry.diagnostics.items():
                lines.append(f"      {k}: {_fmt(v, digits)}")
            if entry.error is not None:
                lines.append(f"      error: {_fmt(entry.error, digits)}")
        if self.warnings:
            lines.append("Warnings:")
            lines += [f"  {w}" for w in self.warnings]
        lines.append("Versions: " + ", ".join(f"{k} {v}" for k, v in self.versions.items()))
        lines.append(f"Wall time: {self.wall_time:.{digits}g} s")
        return "\n".join(lines)


def _fmt(value: Any, digits: int) -> str:
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    if isinstance(value, list):
        return "[" + ", ".join(_fmt(v, digits) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_fmt(v, digits)}" for k, v in value.items()) + "}"
    return str(value)


class ReportGenerator:
    """CSV and Excel exports of analysis reports and sequence tables"""

    def __init__(self, digits: int = 6):
        self.digits = digits
        self.colors = {
            'Holds': 'C6EFCE',         # light green
            'Inconclusive': 'FFEB9C',  # light yellow
            'Fails': 'FFC7CE',         # light red
            'Error': 'D9D9D9',         # gray
        }

    def verdict_frame(self, report: AnalysisReport) -> pd.DataFrame:
        """One row per entry: verdict, value, certificate, error"""
        rows = []
        for name, entry in report.entries.items():
            rows.append({
                'entry': name,
                'verdict': entry.status or ('Error' if entry.error else ''),
                'value': _fmt(entry.value, 17) if isinstance(entry.value, (list, dict)) else entry.value,
                'certificate': entry.diagnostics.get('certificate'),
                'error': None if entry.error is None else entry.error.get('message'),
            })
        return pd.DataFrame(rows, columns=['entry', 'verdict', 'value', 'certificate', 'error'])

    def generate_csv(self, frame: pd.DataFrame, output_path: str) -> str:
        frame.to_csv(output_path, index=False)
        logger.info("CSV written to %s", output_path)
        return output_path

    def get_statistics(self, report: AnalysisReport) -> Dict[str, Any]:
        counts = {status.value: 0 for status in Status}
        for status in report.verdicts.values():
            counts[status] += 1
        total = sum(counts.values())
        return {
            'total_verdicts': total,
            'counts': counts,
            'percentages': {k: (v / total * 100 if total else 0.0) for k, v in counts.items()},
            'errors': len(report.errors),
            'quantities': len(report.quantities),
        }

    def generate_excel(self, report: AnalysisReport, output_path: str,
                       sequences: Optional[pd.DataFrame] = None) -> str:
        """Excel workbook: colour-coded entry table, Summary sheet, optional Sequences sheet"""
        wb = Workbook()
        ws = wb.active
        ws.title = "Analysis"

        ws.merge_cells('A1:E1')
        title = ws['A1']
        title.value = f"Single birth analysis - {report.model_echo.get('name', '?')}"
        title.font = Font(size=16, bold=True)
        title.alignment = Alignment(horizontal='center', vertical='center')

        ws.merge_cells('A2:E2')
        subtitle = ws['A2']
        subtitle.value = f"Truncation N = {report.parameters.get('N')}"
        subtitle.font = Font(size=12, italic=True)
        subtitle.alignment = Alignment(horizontal='center')

        frame = self.verdict_frame(report)
        headers = ['Entry', 'Verdict', 'Value', 'Certificate', 'Error']
        for col, header in enumerate(headers, start=1):
            cell = ws.cell(row=4, column=col)
            cell.value = header
            cell.font = Font(bold=True, color='FFFFFF')
            cell.fill = PatternFill(start_color='366092', end_color='366092', fill_type='solid')
            cell.alignment = Alignment(horizontal='center', vertical='center')

        for idx, row in enumerate(frame.itertuples(index=False), start=5):
            ws.cell(row=idx, column=1).value = row.entry
            verdict_cell = ws.cell(row=idx, column=2)
            verdict_cell.value = row.verdict
            verdict_cell.font = Font(bold=True)
            color = self.colors.get(row.verdict)
            if color:
                verdict_cell.fill = PatternFill(start_color=color, end_color=color, fill_type='solid')
            value = row.value
            if isinstance(value, float) and math.isinf(value):
                value = 'inf' if value > 0 else '-inf'
            ws.cell(row=idx, column=3).value = value
            ws.cell(row=idx, column=4).value = row.certificate
            ws.cell(row=idx, column=5).value = row.error

        for col, width in enumerate([22, 14, 40, 24, 40], start=1):
            ws.column_dimensions[get_column_letter(col)].width = width

        summary = wb.create_sheet("Summary")
        stats = self.get_statistics(report)
        summary_data = [
            ['Summary Statistics', ''],
            ['Verdicts', stats['total_verdicts']],
        ]
        summary_data += [[f'{k}', v] for k, v in stats['counts'].items()]
        summary_data += [['Errors', stats['errors']], ['Quantities', stats['quantities']], ['', ''],
                         ['Percentages', '']]
        summary_data += [[f'{k} %', f"{v:.1f}%"] for k, v in stats['percentages'].items()]
        summary_data += [['', ''], ['Wall time (s)', round(report.wall_time, 3)]]
        summary_data += [[k, v] for k, v in report.versions.items()]
        for row_idx, row_data in enumerate(summary_data, start=1):
            for col_idx, value in enumerate(row_data, start=1):
                cell = summary.cell(row=row_idx, column=col_idx)
                cell.value = value
                if col_idx == 1 and value:
                    cell.font = Font(bold=True)
        summary.column_dimensions['A'].width = 25
        summary.column_dimensions['B'].width = 15

        if sequences is not None:
            seq = wb.create_sheet("Sequences")
            clean = sequences.replace([np.inf, -np.inf], np.nan)
            seq.append(list(clean.columns))
            for record in clean.itertuples(index=False):
                seq.append([None if isinstance(x, float) and math.isnan(x) else x for x in record])

        wb.save(output_path)
        logger.info("Excel report written to %s", output_path)
        return output_path

    def create_excel_report(self, report: AnalysisReport, outputs_dir: str = 'outputs',
                            sequences: Optional[pd.DataFrame] = None) -> str:
        """Timestamped workbook inside outputs_dir"""
        Path(outputs_dir).mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        name = str(report.model_echo.get('name', 'model')).replace(' ', '_')
        output_path = str(Path(outputs_dir) / f"birthchain_{name}_{timestamp}.xlsx")
        return self.generate_excel(report, output_path, sequences)
