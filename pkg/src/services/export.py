"""
Export Service - Quartet

Writes sweep rows and reports as CSV or JSON. Floats go out with repr()
so every value round-trips exactly; nothing time-dependent is written, so
the same rows always produce the same bytes.
"""

import csv
import json
import logging
import os
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

logger = logging.getLogger('quartet.export')


def plain(value: Any) -> Any:
    """numpy scalars/arrays and enums to built-in JSON types."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    return value


def format_cell(value: Any) -> str:
    value = plain(value)
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def columns_of(rows: Sequence[Dict]) -> List[str]:
    """Union of row keys in first-seen order."""
    cols: List[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    return cols


def write_csv(path: str, rows: Sequence[Dict], columns: Optional[Sequence[str]] = None,
              header: Optional[Dict[str, Any]] = None) -> str:
    """Rows to CSV; header entries become leading '# key=value' lines."""
    columns = list(columns) if columns else columns_of(rows)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as f:
        for key, val in (header or {}).items():
            f.write(f"# {key}={format_cell(val)}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(c)) for c in columns])
    logger.debug(f"wrote {len(rows)} rows to {path}")
    return path


def write_json(path: str, payload: Any) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as f:
        json.dump(plain(payload), f, indent=2)
        f.write('\n')
    logger.debug(f"wrote {path}")
    return path


def write_table(out_dir: str, stem: str, rows: Sequence[Dict], fmt: str = 'csv',
                columns: Optional[Sequence[str]] = None,
                header: Optional[Dict[str, Any]] = None) -> str:
    """<out_dir>/<stem>.csv or .json; JSON keeps the header as a 'meta' object."""
    if fmt == 'json':
        payload: Dict[str, Any] = {'rows': list(rows)}
        if header:
            payload = {'meta': header, 'rows': list(rows)}
        return write_json(os.path.join(out_dir, f"{stem}.json"), payload)
    return write_csv(os.path.join(out_dir, f"{stem}.csv"), rows, columns=columns, header=header)


def read_csv(path: str) -> Dict[str, Any]:
    """Inverse of write_csv for numeric tables: {'header': {...}, 'rows': [...]}."""
    header: Dict[str, str] = {}
    with open(path, 'r', newline='') as f:
        lines = f.read().splitlines()
    body: List[str] = []
    for line in lines:
        if line.startswith('# ') and not body:
            key, _, val = line[2:].partition('=')
            header[key] = val
        else:
            body.append(line)
    reader = csv.DictReader(body)
    rows = [{k: _parse_cell(v) for k, v in row.items()} for row in reader]
    return {'header': header, 'rows': rows}


def _parse_cell(text: str) -> Any:
    if text == '':
        return None
    try:
        return float(text)
    except ValueError:
        return text

