from __future__ import annotations

import hashlib
from typing import Iterable, List, Sequence, TypeAlias

import numpy as np

from constants import FLOAT_FORMAT

FloatRow: TypeAlias = List[str]


def format_float(value: float) -> str:
    """Format a float with 17 significant digits so CSV output round-trips exactly.

    Args:
        value: The number to format. Booleans and integers are written as-is.

    Returns:
        The textual representation used in every report file.
    """
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT % float(value)


def format_row(values: Iterable[object]) -> FloatRow:
    """Format a mixed row of strings and numbers for csv.writer."""
    return [v if isinstance(v, str) else format_float(v) for v in values]


def fingerprint(text: str) -> str:
    """Calculate a stable identifier for a configuration document.

    Args:
        text: The configuration text exactly as read.

    Returns:
        Hex sha256 digest of the text.

    Raises:
        ValueError: If text is empty.
    """
    if not text:
        raise ValueError("Configuration text cannot be empty")
    sha = hashlib.sha256(usedforsecurity=False)
    sha.update(text.encode("utf-8"))
    return sha.hexdigest()


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Seeded generator; distinct streams give independent draws for the same run seed."""
    return np.random.default_rng([int(seed), int(stream)])


def parse_float_list(text: str) -> List[float]:
    """Parse "0.4, 0.2 0.1" into [0.4, 0.2, 0.1].

    Raises:
        ValueError: If an entry is not a number or the list is empty.
    """
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected a non-empty list of numbers")
    return [float(p) for p in parts]


def is_strictly_increasing(values: Sequence[float]) -> bool:
    arr = np.asarray(values, dtype=float)
    return bool(arr.ndim == 1 and arr.size >= 2 and np.all(np.diff(arr) > 0))
