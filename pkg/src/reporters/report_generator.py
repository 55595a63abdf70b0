"""
Report generator for training, evaluation and search results.
"""

import json
from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..analyzers.evaluation import AggregateReport, EvalReport
from ..training.search import Trial
from ..utils.logger import setup_logger

RESULT_COLUMNS = ["method", "model_size", "k", "mean", "std"]
TRIAL_COLUMNS = ["trial", "emb", "hidden", "heads", "layers", "dropout", "gamma", "lr", "spe_k",
                 "val_loss", "acc1", "acc3", "acc5"]

ResultEntry = Tuple[str, int, AggregateReport]


class ReportGenerator:
    """Builds result tables and writes them as CSV or JSON."""

    def __init__(self):
        self.logger = setup_logger(__name__)

    def fit_metrics_json(self, metrics: Dict[str, Any]) -> str:
        """Per-fit metrics document: fit, seed, val_loss, acc@k."""
        return json.dumps(self._make_serializable(metrics), indent=2) + "\n"

    def results_frame(self, entries: Sequence[ResultEntry]) -> pd.DataFrame:
        """Long layout, one row per (method, model size, k)."""
        rows = [
            (method, size, k, aggregate.mean[k], aggregate.std[k])
            for method, size, aggregate in entries
            for k in aggregate.ks
        ]
        return pd.DataFrame(rows, columns=RESULT_COLUMNS)

    def table_frame(self, entries: Sequence[ResultEntry]) -> pd.DataFrame:
        """
        Wide layout, one row per (method, model size), accuracy as mean±std in percent.
        """
        rows = []
        for method, size, aggregate in entries:
            row: Dict[str, Any] = {"method": method, "model_size": size}
            for k in aggregate.ks:
                row[f"acc@{k}"] = f"{100 * aggregate.mean[k]:.1f}±{100 * aggregate.std[k]:.1f}"
            rows.append(row)
        return pd.DataFrame(rows)

    def trial_frame(self, trials: Sequence[Trial]) -> pd.DataFrame:
        rows = []
        for trial in trials:
            row = trial.row()
            row["emb"] = row.pop("d_model")
            rows.append(row)
        frame = pd.DataFrame(rows)
        columns = [c for c in TRIAL_COLUMNS if c in frame.columns]
        extra = [c for c in frame.columns if c not in columns]
        return frame[columns + extra]

    def eval_frame(self, report: EvalReport) -> pd.DataFrame:
        return pd.DataFrame(
            [(k, report.accuracy[k], report.hits[k], report.valid_positions) for k in report.ks],
            columns=["k", "accuracy", "hits", "positions"],
        )

    def prefix_accuracy_frame(self, report: EvalReport) -> pd.DataFrame:
        """Accuracy@1 per number of activities in the prefix."""
        return pd.DataFrame(
            [
                (length, report.prefix_counts[length], accuracy)
                for length, accuracy in report.prefix_accuracy.items()
            ],
            columns=["prefix_length", "positions", "acc@1"],
        )

    def save_frame(self, frame: pd.DataFrame, file_path: str) -> Path:
        output_path = Path(file_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(output_path, index=False, lineterminator="\n")
        self.logger.info(f"Report saved to {file_path}", rows=len(frame))
        return output_path

    def load_frame(self, file_path: Union[str, Path]) -> pd.DataFrame:
        """
        Read a table written by ``save_frame``.

        Only empty cells count as missing, so the method label ``None`` stays a string.
        """
        return pd.read_csv(file_path, keep_default_na=False, na_values=[""])

    def _make_serializable(self, obj: Any) -> Any:
        """
        Convert numpy scalars and arrays to plain Python values.

        Args:
            obj: Object to make serializable

        Returns:
            Serializable object
        """
        if isinstance(obj, np.generic):
            return obj.item()
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, dict):
            return {str(key): self._make_serializable(value) for key, value in obj.items()}
        elif isinstance(obj, (list, tuple)):
            return [self._make_serializable(item) for item in obj]
        else:
            return obj

    def save_report(self, content: str, file_path: str) -> Path:
        """
        Save report content to file.

        Args:
            content: Report content
            file_path: Output file path
        """
        output_path = Path(file_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(content, encoding="utf-8")
        self.logger.info(f"Report saved to {file_path}")
        return output_path
