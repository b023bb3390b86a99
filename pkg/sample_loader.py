# sample_loader.py
# Reads an observation file: one real per line, falling back to a single-column CSV with a header.
import io
import logging
import os
from typing import List, Optional

import numpy as np
import pandas as pd

from errors import MalformedInputError
from estimators import Sample

logger = logging.getLogger(__name__)


def _parse_plain_lines(text: str) -> Optional[List[float]]:
    """One number per line, blank lines ignored. Returns None if any line is not a number."""
    values = []
    for line in text.splitlines():
        item = line.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            return None
    return values


def _parse_single_column_csv(text: str) -> List[float]:
    """A CSV with a header row and exactly one column of numbers."""
    try:
        frame = pd.read_csv(io.StringIO(text), skip_blank_lines=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MalformedInputError(f"input is neither one number per line nor a readable CSV: {e}") from None
    if frame.shape[1] != 1:
        raise MalformedInputError(f"CSV input must have exactly one column, found {frame.shape[1]}")
    column = pd.to_numeric(frame.iloc[:, 0], errors="coerce")
    bad = column.isna()
    if bad.any():
        first = int(np.flatnonzero(bad.to_numpy())[0])
        raise MalformedInputError(f"CSV row {first + 2} is not a number: '{frame.iloc[first, 0]}'")
    return column.astype(float).tolist()


def load_sample(path: str) -> Sample:
    """
    Loads the observations in `path`. Plain lines are tried first; if that fails the
    file is read as a single-column CSV. Non-finite values are rejected as malformed.
    Fewer than two observations raise SampleTooSmallError.
    """
    logger.info("Reading sample from: %s", os.path.basename(path))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as e:
        raise MalformedInputError(f"cannot read input file '{path}': {e}") from None

    # 1. Plain numbers
    values = _parse_plain_lines(text)
    if values is not None:
        logger.info("  -> %d observations read as plain lines.", len(values))
    else:
        # 2. Fallback to CSV with header
        logger.info("  -> Not plain numbers; trying single-column CSV.")
        values = _parse_single_column_csv(text)
        logger.info("  -> %d observations read from CSV.", len(values))

    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise MalformedInputError("input contains non-finite values (nan or inf)")
    return Sample.from_values(arr)
