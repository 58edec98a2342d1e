"""
Comparison Report
Aligned text and CSV tables over result rows of one dataset
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from rich import box
from rich.console import Console
from rich.table import Table

from ..decoding.cascade import CASCADE_MODES
from ..decoding.joint_decode import ENSEMBLE_VARIANTS
from ..errors import ConfigError

logger = logging.getLogger(__name__)

MISSING = "-"
METRICS = ("wer", "bleu")
FAMILY_LAYOUTS = {
    "cascade": [f"cascade:{mode}" for mode in CASCADE_MODES],
    "ensemble": [f"joint:{variant}" for variant in ENSEMBLE_VARIANTS],
}


@dataclass
class ComparisonReport:
    title: str
    header: List[str]
    rows: List[List[str]]
    notes: List[str] = field(default_factory=list)

    def render(self, width: int = 160) -> str:
        table = Table(title=self.title, box=box.ASCII, show_header=True)
        for i, name in enumerate(self.header):
            table.add_column(name, justify="left" if i < self._label_columns() else "right")
        for row in self.rows:
            table.add_row(*row)
        console = Console(file=io.StringIO(), record=True, width=width, color_system=None)
        console.print(table)
        for note in self.notes:
            console.print(note, markup=False, highlight=False)
        return console.export_text()

    def _label_columns(self) -> int:
        return 1 if self.header and self.header[0] == "split" else 2

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buffer.getvalue()

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"txt": out_dir / "report.txt", "csv": out_dir / "report.csv"}
        paths["txt"].write_text(self.render(), encoding="utf-8")
        paths["csv"].write_text(self.to_csv(), encoding="utf-8")
        logger.info("Wrote %s and %s", paths["txt"], paths["csv"])
        return paths


def _fmt(value) -> str:
    return MISSING if value is None else f"{float(value):.2f}"


def _splits(rows: Sequence[Dict]) -> List[str]:
    order = ["train", "dev", "test"]
    seen = {row["split"] for row in rows if row.get("split")}
    return [s for s in order if s in seen] + sorted(seen - set(order))


def _family(systems: Sequence[str]) -> Optional[str]:
    for name, members in FAMILY_LAYOUTS.items():
        if systems and all(s in members for s in systems):
            return name
    return None


def _inversions(rows: Sequence[Dict]) -> List[str]:
    """Joint systems scoring below the end-to-end model on the same split"""
    notes = []
    ok = [r for r in rows if r.get("status") == "ok" and r.get("bleu") is not None]
    for split in _splits(ok):
        e2e = [r["bleu"] for r in ok if r["split"] == split and r.get("system") == "e2e"]
        if not e2e:
            continue
        for row in ok:
            if row["split"] == split and str(row.get("system", "")).startswith("joint") and row["bleu"] < max(e2e):
                notes.append(
                    f"inversion: {row['experiment_id']}/{row['system']} BLEU {row['bleu']:.2f} "
                    f"< e2e BLEU {max(e2e):.2f} on {split}"
                )
    return notes


def compare_report(rows: Sequence[Dict]) -> ComparisonReport:
    """
    Tabulate result rows

    Rows of the cascade modes or of the joint ensemble variants are laid out
    with one column per mode/variant (BLEU per split); any other mix gets one
    line per (experiment, system) with WER and BLEU per split. Missing cells
    are rendered as "-".

    Args:
        rows: Result rows sharing one dataset id

    Returns:
        ComparisonReport

    Raises:
        ConfigError: rows from more than one dataset
    """
    if not rows:
        raise ValueError("no result rows to report")
    datasets = sorted({str(row.get("dataset_id")) for row in rows})
    if len(datasets) > 1:
        raise ConfigError(f"rows mix dataset ids {datasets}; report one dataset at a time")

    ok_rows = [r for r in rows if r.get("status") == "ok"]
    splits = _splits(rows)
    title = f"dataset {datasets[0]}"
    family = _family([r["system"] for r in ok_rows]) if len(ok_rows) == len(rows) else None

    if family is not None:
        columns = [s for s in FAMILY_LAYOUTS[family] if any(r["system"] == s for r in ok_rows)]
        header = ["split"] + [c.split(":", 1)[1] for c in columns]
        table_rows = []
        for split in splits:
            cells = {r["system"]: r.get("bleu") for r in ok_rows if r["split"] == split}
            table_rows.append([split] + [_fmt(cells.get(c)) for c in columns])
        return ComparisonReport(f"{title} (BLEU)", header, table_rows, _inversions(rows))

    header = ["experiment", "system"] + [f"{split} {m.upper()}" for split in splits for m in METRICS]
    with_status = any(r.get("status") != "ok" for r in rows)
    if with_status:
        header.append("status")
    keys: List[tuple] = []
    for row in rows:
        key = (row.get("experiment_id", MISSING), row.get("system", MISSING))
        if key not in keys:
            keys.append(key)
    table_rows = []
    for key in keys:
        mine = [r for r in rows if (r.get("experiment_id", MISSING), r.get("system", MISSING)) == key]
        by_split = {r["split"]: r for r in mine if r.get("split")}
        cells = [str(key[0]), str(key[1])]
        for split in splits:
            row = by_split.get(split, {})
            cells.extend(_fmt(row.get(m)) for m in METRICS)
        if with_status:
            failed = [r["status"] for r in mine if r.get("status") != "ok"]
            cells.append(failed[-1] if failed else "ok")
        table_rows.append(cells)
    return ComparisonReport(title, header, table_rows, _inversions(rows))
