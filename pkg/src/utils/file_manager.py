"""
File Manager for writing analysis results
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

FORMATS = ("json", "csv")


def _to_builtin(value: Any) -> Any:
    """json.dump fallback for numpy scalars, arrays and enums"""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, "value"):
        return value.value
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


class FileManager:
    """Manages result file operations"""

    def __init__(self, config: Dict[str, Any]):
        """
        Initialize file manager

        Args:
            config: Configuration dictionary
        """
        self.config = config
        output_config = config.get("output", {})
        self.output_dir = Path(output_config.get("directory", "output"))
        self.format = output_config.get("format", "json")
        if self.format not in FORMATS:
            raise ValueError(f"Unknown output format: {self.format}")

        # Create output directory if it doesn't exist
        self.output_dir.mkdir(parents=True, exist_ok=True)

        logger.info(f"File Manager initialized - output dir: {self.output_dir}")

    def resolve_path(self, default_name: str, out: Optional[Union[str, Path]] = None) -> Path:
        """Explicit --out path, or the default name inside the output directory"""
        if out is not None:
            path = Path(out)
            path.parent.mkdir(parents=True, exist_ok=True)
            return path
        return self.output_dir / default_name

    @staticmethod
    def sibling(path: Path, suffix: str) -> Path:
        """extrema.csv -> extrema_segments.csv"""
        return path.with_name(f"{path.stem}_{suffix}{path.suffix}")

    def save_json(self, data: Any, path: Union[str, Path]) -> str:
        """
        Save a JSON document

        Args:
            data: JSON-serializable payload (numpy scalars are converted)
            path: Target file

        Returns:
            Path to saved file
        """
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(data, f, indent=2, default=_to_builtin, allow_nan=True)
                f.write("\n")
            logger.info(f"Results saved to: {path}")
            return str(path)
        except Exception as e:
            logger.error(f"Error saving JSON: {e}")
            raise

    def save_csv(self, rows: Sequence[Dict[str, Any]], path: Union[str, Path], header: Optional[List[str]] = None) -> str:
        """
        Save rows as CSV with a header row

        Args:
            rows: One dictionary per row
            path: Target file
            header: Column order (keys of the first row if omitted)

        Returns:
            Path to saved file
        """
        try:
            header = header or (list(rows[0].keys()) if rows else [])
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_cell(row.get(key)) for key in header])
            logger.info(f"Table saved to: {path} ({len(rows)} rows)")
            return str(path)
        except Exception as e:
            logger.error(f"Error saving CSV: {e}")
            raise

    def save(
        self,
        payload: Any,
        rows: Sequence[Dict[str, Any]],
        path: Union[str, Path],
        fmt: Optional[str] = None,
        header: Optional[List[str]] = None,
    ) -> str:
        """JSON payload or CSV rows depending on the output format"""
        fmt = fmt or self.format
        if fmt == "json":
            return self.save_json(payload, path)
        return self.save_csv(rows, path, header)

    def load_json(self, path: Union[str, Path]) -> Any:
        try:
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
        except Exception as e:
            logger.error(f"Error loading JSON: {e}")
            raise
