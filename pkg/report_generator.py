import datetime
import io
import math
from pathlib import Path

import pandas as pd
from docx import Document
from docx.oxml import parse_xml
from docx.oxml.ns import nsdecls


class WordReportGenerator:
    def __init__(self, report):
        self.report = report
        self.doc = Document()

    def _add_heading(self, text, level=1):
        self.doc.add_heading(text, level)

    def _add_paragraph(self, text, bold=False):
        p = self.doc.add_paragraph()
        runner = p.add_run(text)
        if bold:
            runner.bold = True
        return p

    @staticmethod
    def _format_value(val):
        if val is None or (isinstance(val, float) and math.isnan(val)):
            return "-"
        if isinstance(val, float):
            # errors in scientific notation, orders with two decimals
            return f"{val:.4E}" if abs(val) < 0.1 else f"{val:.2f}"
        return str(val)

    def _create_table_from_df(self, df, header_bg_color="E7E6E6", column_map=None, index_label=None):
        if df.empty:
            self.doc.add_paragraph("Нет данных.")
            return

        if column_map:
            cols_to_keep = [c for c in column_map.keys() if c in df.columns]
            df = df[cols_to_keep].rename(columns=column_map)
        if index_label is not None:
            df = df.reset_index().rename(columns={'index': index_label})

        table = self.doc.add_table(rows=1, cols=len(df.columns))
        table.style = 'Table Grid'

        hdr_cells = table.rows[0].cells
        for i, col_name in enumerate(df.columns):
            hdr_cells[i].text = str(col_name)
            shading_elm = parse_xml(r'<w:shd {} w:fill="{}"/>'.format(nsdecls('w'), header_bg_color))
            hdr_cells[i]._tc.get_or_add_tcPr().append(shading_elm)
            for paragraph in hdr_cells[i].paragraphs:
                for run in paragraph.runs:
                    run.font.bold = True

        for _, row in df.iterrows():
            row_cells = table.add_row().cells
            for i, val in enumerate(row):
                row_cells[i].text = self._format_value(None if pd.isna(val) else val)

    def generate(self):
        meta = self.report.metadata
        self.doc.add_heading(f"Сходимость: {meta.get('name', 'эксперимент')}", 0)
        self.doc.add_paragraph(f"Дата генерации: {datetime.datetime.now().strftime('%d.%m.%Y %H:%M')}")

        self._add_parameters_section()
        self._add_table_section()
        self._add_slopes_section()
        if self.report.diagnostics:
            self._add_diagnostics_section()

        buffer = io.BytesIO()
        self.doc.save(buffer)
        buffer.seek(0)
        return buffer

    def save(self, path):
        path = Path(path)
        path.write_bytes(self.generate().getvalue())
        return path

    def _add_parameters_section(self):
        self._add_heading("1. Параметры эксперимента", 1)
        meta = self.report.metadata
        potential = meta.get('potential', {})
        lines = [
            f"Потенциал: {potential.get('name', '-')}, масштабы δ = {meta.get('delta_tags', [])}",
            f"ε = {meta.get('epsilon')}, T = {meta.get('T')}, Δt = {meta.get('dt')}",
            f"Правило перевыборки: {meta.get('oversampling', '-')}",
            f"Сетка сравнения: {meta.get('fine_nodes')} узлов",
        ]
        for line in lines:
            self.doc.add_paragraph(line)
        ref = self.report.reference
        self._add_paragraph(f"Эталон: {ref.get('method')} "
                            f"({', '.join(f'{k}={v}' for k, v in ref.items() if k != 'method')})", bold=True)

    def _add_table_section(self):
        self._add_heading("2. Относительные ошибки и порядки сходимости", 1)
        self._create_table_from_df(self.report.table_frame(), index_label="Метод / величина")

    def _add_slopes_section(self):
        self._add_heading("3. Глобальные наклоны (МНК по log H)", 1)
        rows = [{'method': method, 'L2': slopes.get('L2'), 'H1': slopes.get('H1')}
                for method, slopes in self.report.slopes.items()]
        self._create_table_from_df(pd.DataFrame(rows), column_map={
            'method': 'Метод',
            'L2': 'Наклон L2',
            'H1': 'Наклон H1',
        })

    def _add_diagnostics_section(self):
        self._add_heading("4. Диагностика", 1)
        for key, value in self.report.diagnostics.items():
            if isinstance(value, dict):
                self._add_paragraph(key, bold=True)
                for sub, sub_value in value.items():
                    self.doc.add_paragraph(f"{sub}: {self._format_value(sub_value)}", style='List Bullet')
            else:
                self.doc.add_paragraph(f"{key}: {self._format_value(value)}")
