"""
Training History - per-epoch loss and accuracy as a JSON array
"""
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd

HISTORY_COLUMNS = ["epoch", "loss", "accuracy"]


def history_frame(history: Sequence[Dict]) -> pd.DataFrame:
    frame = pd.DataFrame(list(history), columns=HISTORY_COLUMNS)
    return frame.astype({"epoch": "int64", "loss": "float64", "accuracy": "float64"})


def history_path_for(weights_path: Union[str, Path]) -> Path:
    """model.gmarw -> model.history.json, next to the weights."""
    weights_path = Path(weights_path)
    return weights_path.with_name(weights_path.stem + ".history.json")


def write_history(history: Sequence[Dict], path: Union[str, Path]) -> Path:
    """Write [{epoch, loss, accuracy}, ...]."""
    path = Path(path)
    history_frame(history).to_json(path, orient="records", double_precision=15, indent=2)
    return path


def read_history(path: Union[str, Path]) -> List[Dict]:
    frame = pd.read_json(Path(path), orient="records")
    if frame.empty:
        return []
    return history_frame(frame.to_dict(orient="records")).to_dict(orient="records")
