"""Partitions of a time interval with exact rational arithmetic.

A partition is an ordered tuple of positive rationals; its total is their
sum.  The join of two partitions is concatenation, which partitions the sum
of the totals.  A partition p refines q (same total) when the parts of p
group consecutively, with exact sums, into the parts of q.  Refinement is
decided exactly, which is why parts are `Fraction`s and never floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator


@dataclass(frozen=True, order=True)
class Partition:
    parts: tuple[Fraction, ...]

    def __post_init__(self):
        if any(p <= 0 for p in self.parts):
            raise ValueError(f"parts must be positive, got {self.parts}")

    @property
    def total(self) -> Fraction:
        return sum(self.parts, Fraction(0))

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.parts)

    def __str__(self) -> str:
        return "(" + ",".join(str(p) for p in self.parts) + ")"

    def cuts(self) -> tuple[Fraction, ...]:
        """Interior cumulative sums, excluding the total itself."""
        out, acc = [], Fraction(0)
        for p in self.parts[:-1]:
            acc += p
            out.append(acc)
        return tuple(out)


def partition(parts: Iterable) -> Partition:
    return Partition(tuple(Fraction(p) for p in parts))


def parse_partition(text: str) -> Partition:
    """Parse a comma-separated list of rationals such as '1/4,1/4,1/2'."""
    return partition(s.strip() for s in text.split(","))


def uniform(total, n: int) -> Partition:
    t = Fraction(total)
    return Partition((t / n,) * n)


def empty() -> Partition:
    return Partition(())


def join(p: Partition, q: Partition) -> Partition:
    """Concatenation; partitions the sum of the two totals."""
    return Partition(p.parts + q.parts)


def refines(p: Partition, q: Partition) -> bool:
    """Whether the parts of p group consecutively into the parts of q."""
    if p.total != q.total:
        raise ValueError(f"totals differ: {p.total} vs {q.total}")
    it = iter(p.parts)
    for target in q.parts:
        acc = Fraction(0)
        while acc < target:
            try:
                acc += next(it)
            except StopIteration:
                return False
        if acc != target:
            return False
    return next(it, None) is None


def grouping(p: Partition, q: Partition) -> list[Partition]:
    """Split p into consecutive sub-partitions summing to the parts of q."""
    if not refines(p, q):
        raise ValueError(f"{p} does not refine {q}")
    out, i = [], 0
    for target in q.parts:
        acc, start = Fraction(0), i
        while acc < target:
            acc += p.parts[i]
            i += 1
        out.append(Partition(p.parts[start:i]))
    return out


def common_refinement(p: Partition, q: Partition) -> Partition:
    """Overlay of the cut points of two partitions of the same total."""
    if p.total != q.total:
        raise ValueError(f"totals differ: {p.total} vs {q.total}")
    points = sorted(set(p.cuts()) | set(q.cuts()) | {p.total})
    parts, prev = [], Fraction(0)
    for pt in points:
        parts.append(pt - prev)
        prev = pt
    return Partition(tuple(parts))


def coarsenings(p: Partition) -> list[Partition]:
    """All partitions obtained by merging consecutive parts of p."""
    n = len(p)
    if n == 0:
        return [p]
    out = []
    for mask in range(1 << (n - 1)):
        parts, acc = [], p.parts[0]
        for i in range(1, n):
            if mask >> (i - 1) & 1:
                parts.append(acc)
                acc = p.parts[i]
            else:
                acc += p.parts[i]
        parts.append(acc)
        out.append(Partition(tuple(parts)))
    return out
