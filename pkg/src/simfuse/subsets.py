"""Subset masks over representations and Gray-code enumeration.

Bit ``m`` of a mask refers to the gallery's m-th representation in
lexicographic name order, so masks are reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

MAX_REPRESENTATIONS = 24  # 2^24-1 subsets; beyond this the search is refused


@dataclass(frozen=True, order=True)
class SubsetMask:
    """Non-empty subset of the M representations, as a bit mask."""

    bits: int
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= MAX_REPRESENTATIONS:
            raise ValueError(f"m must be in [1, {MAX_REPRESENTATIONS}], got {self.m}")
        if not 0 < self.bits < (1 << self.m):
            raise ValueError(f"mask {self.bits:#x} is empty or out of range for m={self.m}")

    @property
    def size(self) -> int:
        """Number of selected representations (popcount)."""
        return self.bits.bit_count()

    def members(self) -> tuple[int, ...]:
        """Selected representation indices, ascending."""
        return tuple(i for i in range(self.m) if self.bits >> i & 1)

    def contains(self, index: int) -> bool:
        return bool(self.bits >> index & 1)

    def names(self, repr_names) -> tuple[str, ...]:
        return tuple(repr_names[i] for i in self.members())

    @classmethod
    def from_indices(cls, indices, m: int) -> "SubsetMask":
        bits = 0
        for i in indices:
            if not 0 <= i < m:
                raise ValueError(f"representation index {i} out of range for m={m}")
            bits |= 1 << i
        return cls(bits=bits, m=m)

    @classmethod
    def from_names(cls, names, repr_names) -> "SubsetMask":
        order = {name: i for i, name in enumerate(repr_names)}
        try:
            indices = [order[n] for n in names]
        except KeyError as exc:
            raise ValueError(f"unknown representation name {exc.args[0]!r}") from exc
        return cls.from_indices(indices, len(repr_names))


def gray_value(i: int) -> int:
    """i-th binary-reflected Gray code."""
    return i ^ (i >> 1)


def enumerate_subsets(m: int) -> Iterator[SubsetMask]:
    """Yield every non-empty mask over m representations exactly once.

    The order is the binary-reflected Gray sequence, so consecutive masks
    differ in exactly one bit; an incremental accumulator therefore needs a
    single matrix add or subtract per step.
    """
    if not 1 <= m <= MAX_REPRESENTATIONS:
        raise ValueError(f"m must be in [1, {MAX_REPRESENTATIONS}], got {m}")
    for i in range(1, 1 << m):
        yield SubsetMask(bits=gray_value(i), m=m)
