from __future__ import annotations

import numpy as np
import pytest

from blastgp.seqdata import DnaRecord
from blastgp.trees import build_constant_table


def make_record(bases, qual=2.0, x=0.5, y=0.5, rid="t.read1") -> DnaRecord:
    """Build a 36-base record; scalar qual is broadcast, strings are repeated."""
    if len(bases) < 36:
        bases = (bases * 36)[:36]
    if isinstance(qual, (int, float)):
        qual = (float(qual),) * 36
    return DnaRecord(rid, bases, tuple(qual), x, y)


@pytest.fixture
def table():
    # fresh per test: parsing foreign constants appends to the table
    return build_constant_table(np.random.default_rng(12345))


@pytest.fixture
def rng():
    return np.random.default_rng(991)
