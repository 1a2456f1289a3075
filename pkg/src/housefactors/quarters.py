"""Quarterly calendar arithmetic.

Every series in the package lives on an axis of :class:`QuarterId` values.
Quarters are totally ordered by (year, quarter) and map to a flat integer
index so gap checks and range slicing stay trivial.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UsageError

_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


@dataclass(frozen=True, order=True)
class QuarterId:
    """One calendar quarter, e.g. 1987Q3."""

    year: int
    quarter: int

    def __post_init__(self):
        if self.quarter not in (1, 2, 3, 4):
            raise UsageError(f"quarter must be in 1..4, got {self.quarter}")

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}"

    def to_index(self) -> int:
        """Flat index on the quarterly number line (4 per year)."""
        return self.year * 4 + (self.quarter - 1)

    @staticmethod
    def from_index(index: int) -> "QuarterId":
        return QuarterId(index // 4, index % 4 + 1)

    @staticmethod
    def parse(text: str) -> "QuarterId":
        m = _QUARTER_RE.match(text.strip())
        if m is None:
            raise UsageError(f"cannot parse quarter {text!r}; expected e.g. 1987Q3")
        return QuarterId(int(m.group(1)), int(m.group(2)))

    def successor(self) -> "QuarterId":
        return QuarterId.from_index(self.to_index() + 1)


def quarter_range(start: QuarterId, end: QuarterId) -> tuple[QuarterId, ...]:
    """Inclusive, gap-free run of quarters from start to end."""
    if end < start:
        raise UsageError(f"quarter range end {end} precedes start {start}")
    return tuple(
        QuarterId.from_index(i) for i in range(start.to_index(), end.to_index() + 1)
    )
