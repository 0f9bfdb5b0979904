#!/usr/bin/env python3
"""
Печать сохранённого отчёта о сходимости: параметры, таблица, наклоны, диагностика.
Запуск: python scripts/summarize_report.py results/table1 [--json]
"""
import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

import numpy as np
import pandas as pd

from analysis import METRICS, load_report


def summary_dict(report) -> dict:
    """Средние порядки и наклоны по методам."""
    out = {}
    for method in report.methods:
        out[method] = {}
        for metric in METRICS:
            orders = report.orders[method][metric]
            out[method][metric] = {
                'finest_error': report.results[method][-1][f"err_{metric}"],
                'mean_order': float(np.mean(orders)) if orders else None,
                'slope': report.slopes[method][metric],
            }
    return out


def main():
    parser = argparse.ArgumentParser(description="Сводка отчёта о сходимости")
    parser.add_argument("report", type=str, help="Папка с report.json или путь к нему")
    parser.add_argument("--json", action="store_true", help="Вывести сводку в JSON")
    args = parser.parse_args()

    try:
        report = load_report(args.report)
    except FileNotFoundError as e:
        print(f"Ошибка: {e}")
        sys.exit(1)

    summary = summary_dict(report)
    if args.json:
        print(json.dumps(summary, indent=2, ensure_ascii=False))
        return

    meta = report.metadata
    print("=" * 60)
    print(f"ОТЧЁТ: {meta.get('name')}  ({report.generated_at})")
    print("=" * 60)
    print(f"  Потенциал: {meta.get('potential')}")
    print(f"  eps = {meta.get('epsilon')}, T = {meta.get('T')}, dt = {meta.get('dt')}")
    print(f"  Перевыборка: {meta.get('oversampling')}")
    print(f"  Эталон: {report.reference}")

    print("\nТАБЛИЦА:")
    with pd.option_context('display.float_format', '{:.4e}'.format, 'display.width', 160):
        print(report.table_frame().to_string())

    print("\nСРЕДНИЕ ПОРЯДКИ И НАКЛОНЫ:")
    for method, metrics in summary.items():
        for metric, row in metrics.items():
            mean = f"{row['mean_order']:.2f}" if row['mean_order'] is not None else "-"
            slope = f"{row['slope']:.2f}" if row['slope'] is not None else "-"
            print(f"  {method:16s} {metric}: ошибка {row['finest_error']:.4e}, "
                  f"средний порядок {mean}, наклон {slope}")

    saturation = report.diagnostics.get('temporal_saturation', {})
    if saturation:
        print("\nПРОВЕРКА dt/2 НА САМОМ МЕЛКОМ H:")
        for method, row in saturation.items():
            print(f"  {method:16s} изменение ошибки {100 * row['relative_change']:.1f}%")


if __name__ == "__main__":
    main()
