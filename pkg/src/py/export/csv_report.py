import csv
from pathlib import Path
from typing import Sequence

from constants import LOG_PREFIX_EXPORT
from export.records import ReportRecord
from logger import logger


def write_records(path: Path, records: Sequence[ReportRecord], columns: Sequence[str]) -> Path:
    """Write one CSV report; the header is written even when there are no rows.

    Raises:
        ValueError: If a record belongs to another schema.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for record in records:
            if list(record.columns) != list(columns):
                raise ValueError(f"{type(record).__name__} does not match the columns {list(columns)}")
            writer.writerow(record.to_row())
    logger.info(f"{LOG_PREFIX_EXPORT}: wrote {path} ({len(records)} rows)")
    return path


def read_records(path: Path) -> list:
    """Rows of a report as dicts keyed by column name, values left as text."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
