"""
Results Store
Append-only JSONL persistence of experiment result rows
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.jsonl"


def dump_row(row: Dict) -> str:
    """Canonical single-line JSON; equal rows give equal bytes"""
    return json.dumps(row, sort_keys=True, separators=(",", ":"), allow_nan=True)


class ResultsStore:
    """
    One JSON object per line under the results directory

    Rows are only ever appended. Each carries the experiment id, the config
    content hash and a ``status`` of ``ok`` or ``failed:<stage>``.
    """

    def __init__(self, results_dir: Union[str, Path]):
        self.results_dir = Path(results_dir)
        self.path = self.results_dir / RESULTS_FILE

    def append(self, rows: List[Dict]) -> int:
        """
        Append rows and flush

        Args:
            rows: Result rows

        Returns:
            int: number of rows written
        """
        if not rows:
            return 0
        for row in rows:
            if "status" not in row or "config_hash" not in row:
                raise ValueError(f"result row is missing status or config_hash: {row}")
        self.results_dir.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as f:
            for row in rows:
                f.write(dump_row(row) + "\n")
            f.flush()
        logger.info("Appended %d result rows to %s", len(rows), self.path)
        return len(rows)

    def read(self, experiment_id: Optional[str] = None) -> List[Dict]:
        """All rows in file order, optionally only one experiment's"""
        if not self.path.exists():
            return []
        rows = []
        with open(self.path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as e:
                    logger.warning("Skipping unreadable result line %d: %s", line_no, e)
                    continue
                if experiment_id is None or row.get("experiment_id") == experiment_id:
                    rows.append(row)
        return rows

    def failures(self) -> List[Dict]:
        return [row for row in self.read() if row.get("status", "ok") != "ok"]
