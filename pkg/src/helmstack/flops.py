"""Nonzero-counting FLOP ledger.

One unit is charged per stored nonzero touched by a sparse product, plus
fixed per-cell surcharges for smoothing steps. Counts are integers, so the
ledger is additive and bit-for-bit reproducible.
"""
from __future__ import annotations

from collections import Counter
from typing import Dict


class FlopLedger:
    """Accumulates FLOP units per category."""

    def __init__(self) -> None:
        self._counts: Counter = Counter()

    def add(self, category: str, units: int) -> None:
        self._counts[category] += int(units)

    def total(self, exclude: tuple = ()) -> int:
        return sum(v for k, v in self._counts.items() if k not in exclude)

    def get(self, category: str) -> int:
        return self._counts.get(category, 0)

    def snapshot(self) -> Dict[str, int]:
        return dict(sorted(self._counts.items()))

    def reset(self) -> None:
        self._counts.clear()

    def merge(self, other: "FlopLedger") -> None:
        for k in sorted(other._counts):
            self._counts[k] += other._counts[k]

    def __repr__(self) -> str:
        return f"FlopLedger({self.snapshot()})"
