"""Deterministic CSV emission: 17 significant digits, '#' metadata lines"""

import csv
import io
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

NAN_SENTINEL = "nan"


def format_value(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if np.isnan(x):
        return NAN_SENTINEL
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, '.17g')


def render(columns: Sequence[str], rows: Iterable[Sequence], metadata: Optional[Mapping[str, object]] = None) -> str:
    buffer = io.StringIO()
    for key, value in (metadata or {}).items():
        buffer.write(f"# {key}: {value}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(x) for x in row])
    return buffer.getvalue()


def write_csv(columns: Sequence[str], rows: Iterable[Sequence],
              metadata: Optional[Mapping[str, object]] = None,
              out: Optional[Union[str, Path]] = None) -> str:
    """Render, and write to out when given"""
    text = render(columns, rows, metadata)
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


def column_table(columns: Mapping[str, np.ndarray]):
    """(names, rows) from equal-length column arrays"""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    return names, data.tolist()


def read_csv(path: Union[str, Path]):
    """(metadata, header, float rows) of a file written by write_csv"""
    metadata, header, rows = {}, None, []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                metadata[key.strip()] = value.strip()
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(x) for x in line.split(",")])
    return metadata, header, np.array(rows)
