#!/usr/bin/env python3
"""
Создаёт пресеты экспериментов (таблицы сходимости, убывание базиса, экспорт базиса).
Запуск: python3 create_preset_configs.py
Результат: configs/*.json рядом со скриптом.
"""
import json
from pathlib import Path

OUTPUT = Path(__file__).parent / "configs"

T_FINAL = 0.5

# H = pi/64 ... pi/256 и pi/96 ... pi/384
SWEEP_COARSE = [128, 192, 256, 384, 512]
SWEEP_FINE = [192, 256, 384, 512, 768]


def table1():
    """Гладкий потенциал, eps = 1/8, delta = 1/10. Эталон TSSP на 2^15 точках."""
    return {
        'name': 'table1',
        'potential': {'name': 'smooth', 'delta': 0.1},
        'epsilon': 1 / 8,
        'T': T_FINAL,
        'dt': 2.5e-5,
        'n_coarse': SWEEP_COARSE,
        'fine_nodes': 12288,   # кратно lcm(n_coarse) = 1536
        'methods': ['fem-cn', 'msfem-localized'],
        'oversampling': {'c': 3},
        'reference': {'method': 'tssp', 'resolution': 32768, 'dt': 2.5e-6},
        'log_stride': 1000,
    }


def table2():
    """Гладкий потенциал, eps = 1/32, delta = 1/24."""
    return {
        'name': 'table2',
        'potential': {'name': 'smooth', 'delta': 1 / 24},
        'epsilon': 1 / 32,
        'T': T_FINAL,
        'dt': 1e-5,
        'n_coarse': SWEEP_FINE,
        'fine_nodes': 24576,
        'methods': ['fem-cn', 'msfem-localized'],
        'oversampling': {'c': 3},
        'reference': {'method': 'tssp', 'resolution': 16384, 'dt': 1e-6},
        'log_stride': 5000,
    }


def table3():
    """Разрывный потенциал, eps = 1/8, delta1 = 1/5, delta2 = 1/10. Эталон: глобальный OC MsFEM."""
    return {
        'name': 'table3',
        'potential': {'name': 'discontinuous', 'delta1': 0.2, 'delta2': 0.1},
        'epsilon': 1 / 8,
        'T': T_FINAL,
        'dt': 2.5e-5,
        'n_coarse': SWEEP_COARSE,
        'fine_nodes': 12288,
        'methods': ['tssp', 'fem-cn', 'msfem-localized'],
        'oversampling': {'c': 2},
        # 2048 * 12 = 24576 = 2 * fine_nodes
        'reference': {'method': 'msfem-global', 'n_coarse': 2048, 'refine_factor': 12,
                      'dt': 1e-5, 'truncate': 1e-14},
        'log_stride': 1000,
    }


def table4():
    """Разрывный потенциал, eps = 1/32, delta1 = 1/40, delta2 = 1/25."""
    return {
        'name': 'table4',
        'potential': {'name': 'discontinuous', 'delta1': 1 / 40, 'delta2': 1 / 25},
        'epsilon': 1 / 32,
        'T': T_FINAL,
        'dt': 1e-5,
        'n_coarse': SWEEP_FINE,
        'fine_nodes': 24576,
        'methods': ['tssp', 'fem-cn', 'msfem-localized'],
        'oversampling': {'c': 2},
        'reference': {'method': 'msfem-global', 'n_coarse': 2048, 'refine_factor': 12,
                      'dt': 5e-6, 'truncate': 1e-14},
        'log_stride': 5000,
    }


def decay():
    return {
        'name': 'decay',
        'potential': {'name': 'smooth', 'delta': 0.1},
        'epsilon': 1 / 8,
        'decay': {'n_coarse': 64, 'refine_factor': 32, 'nodes': 5, 'gap_layers': [1, 2, 3, 4, 5, 6, 7, 8]},
    }


def basis():
    return {
        'name': 'basis',
        'potential': {'name': 'smooth', 'delta': 0.1},
        'epsilon': 1 / 8,
        'basis': {'n_coarse': 16, 'refine_factor': 8, 'kind': 'localized', 'm': 2, 'format': 'csv'},
    }


PRESETS = {
    'table1': table1,
    'table2': table2,
    'table3': table3,
    'table4': table4,
    'decay': decay,
    'basis': basis,
}


def main():
    OUTPUT.mkdir(parents=True, exist_ok=True)
    for name, build in PRESETS.items():
        path = OUTPUT / f"{name}.json"
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(build(), fh, indent=2, ensure_ascii=False)
            fh.write("\n")
        print(f"Создан: {path}")


if __name__ == "__main__":
    main()
