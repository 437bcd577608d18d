"""
Report Output - JSON documents and one-line summaries

Every JSON artifact is written with sorted keys and a trailing newline so
identical runs produce identical bytes.
"""
import json
from pathlib import Path
from typing import Dict, Iterable, Union

import numpy as np
import pandas as pd

SUMMARY_COLUMNS = ["method", "avg_drop", "avg_increase", "insertion_auc", "deletion_auc", "num_images"]


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def dumps(document: Dict) -> str:
    return json.dumps(_plain(document), sort_keys=True, indent=2) + "\n"


def write_json(document: Dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(dumps(document), encoding="utf-8")
    return path


def write_report(report, path: Union[str, Path]) -> Path:
    """MetricReport (anything with to_dict) -> JSON file."""
    return write_json(report.to_dict(), path)


def summary_frame(reports: Iterable) -> pd.DataFrame:
    return pd.DataFrame([r.summary() for r in reports], columns=SUMMARY_COLUMNS)


def summary_row(report) -> str:
    """Tab-separated method, avg_drop, avg_increase, insertion, deletion, images."""
    row = summary_frame([report]).iloc[0]
    return "\t".join([
        str(row["method"]),
        f"{row['avg_drop']:.4f}",
        f"{row['avg_increase']:.4f}",
        f"{row['insertion_auc']:.6f}",
        f"{row['deletion_auc']:.6f}",
        str(int(row["num_images"])),
    ])


def summary_header() -> str:
    return "\t".join(SUMMARY_COLUMNS)
