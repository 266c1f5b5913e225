"""Embedded reference datasets, checksum-verified on load."""

from __future__ import annotations

import hashlib
from importlib import resources

import numpy as np

from ..dataset import Dataset
from ..errors import ChecksumMismatch, ConfigError

CHECKSUMS = {
    "newcomb.csv": "00dbf870a0bcca99a6ea5f98d5f585f528af204a2a5b920a3ea59b6730abe984",
    "phones.csv": "5e7e129dcefeede37a2e31d626c3aea0d2b760a5b566e29af3a3d6cf424942ed",
}

# mean of the 24 recorded years; the prior mean (1.87, 0.03) is on this scale
PHONES_YEAR_CENTER = 61.5
PHONES_PRIOR_ROWS = 3
PHONES_OUTLIER_YEARS = tuple(range(63, 71))


def path(name: str):
    if name not in CHECKSUMS:
        raise ConfigError(f"unknown embedded dataset {name!r}")
    return resources.files(__name__).joinpath(name)


def verify(name: str) -> bytes:
    data = path(name).read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    if digest != CHECKSUMS[name]:
        raise ChecksumMismatch(f"{name}: sha256 {digest} does not match the recorded {CHECKSUMS[name]}")
    return data


def verify_all() -> None:
    for name in CHECKSUMS:
        verify(name)


def _table(name: str):
    from ..io import read_table

    verify(name)
    with resources.as_file(path(name)) as p:
        return read_table(p)


def newcomb() -> Dataset:
    """66 passage-time measurements as a location dataset."""
    t = _table("newcomb.csv")
    return Dataset.location(t["time"])


def phones():
    """Log call counts (millions) against centred year.

    Returns ``(year, y, X)`` where ``X = [1, year - 61.5]``.
    """
    t = _table("phones.csv")
    year = t["year"]
    y = np.log(10.0 * t["calls"])
    X = np.column_stack([np.ones_like(year), year - PHONES_YEAR_CENTER])
    return year, y, X
