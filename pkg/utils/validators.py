"""
Validation of command-line values: algorithm tags, export formats, CSV
columns and numeric ranges.
"""
import re
from pathlib import Path
from typing import List, Optional

import pandas as pd

from core.inducer import KNOWN_TAGS

EXPORT_FORMATS = ("dot", "json")
COST_MODES = ("unit", "random")

# Built from the inducer's tag table
TAG_REGEX = re.compile(r"^(?:" + "|".join(re.escape(t) for t in KNOWN_TAGS) + r")$")


def normalize_tag(tag: str) -> Optional[str]:
    """
    Normalize an algorithm tag.

    Args:
        tag: Tag as typed by the user

    Returns:
        Lower-case tag if it is well formed, None otherwise
    """
    tag = tag.strip().lower()
    return tag if TAG_REGEX.match(tag) else None


def is_valid_tag(tag: str) -> bool:
    return normalize_tag(tag) is not None


def split_tags(text: str) -> List[str]:
    """
    Split a comma separated tag list, keeping order and dropping duplicates.

    Args:
        text: e.g. "c45, pc45,ec45"

    Returns:
        List of raw tags
    """
    seen = []
    for part in text.split(","):
        part = part.strip()
        if part and part not in seen:
            seen.append(part)
    return seen


def is_valid_format(fmt: str) -> bool:
    return fmt.lower() in EXPORT_FORMATS


def is_valid_cost_mode(mode: str) -> bool:
    return mode in COST_MODES


def csv_columns(path: Path | str) -> List[str]:
    """Header of a CSV file, stripped of surrounding spaces."""
    header = pd.read_csv(path, nrows=0, skipinitialspace=True)
    return [str(c).strip() for c in header.columns]


def missing_columns(path: Path | str, columns: List[str]) -> List[str]:
    """
    Columns from `columns` absent from the CSV header.

    Args:
        path: CSV file
        columns: Required column names

    Returns:
        Missing names, in the given order
    """
    present = set(csv_columns(path))
    return [c for c in columns if c not in present]


def is_probability(value: float) -> bool:
    return 0.0 <= value <= 1.0
