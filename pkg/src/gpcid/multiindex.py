"""Multi-index sets: graded basis indices and constant-sum enumeration."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "CapacityError",
    "GradedIndexSet",
    "graded_basis_indices",
    "ConstantSumIterator",
    "next_constant_sum",
    "count_constant_sum",
    "multinomial_coefficient",
    "DEFAULT_SIZE_GUARD",
]

DEFAULT_SIZE_GUARD = 10**8


class CapacityError(RuntimeError):
    """An enumeration would exceed the configured size guard."""


def count_constant_sum(m: int, p: int) -> int:
    """``|{i in N^p : |i| = m}| = C(m + p - 1, m)``."""
    if p <= 0:
        return 1 if m == 0 else 0
    return math.comb(m + p - 1, m)


@dataclass(frozen=True)
class GradedIndexSet:
    """All multi-indices of total degree ``<= d`` over ``n`` variables.

    ``indices[i]`` is the multi-index of the ``i``-th basis function. Order is
    total degree ascending, then lexicographically descending, so the zero
    index comes first and ``(1, 0, ..)`` precedes ``(0, 1, ..)``.
    """

    n: int
    d: int
    indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def position(self, index: Sequence[int]) -> int:
        """Linear position of a multi-index."""
        hits = np.flatnonzero((self.indices == np.asarray(index)).all(axis=1))
        if not len(hits):
            raise KeyError(tuple(index))
        return int(hits[0])


def _compositions_desc(total: int, n: int) -> Iterator[tuple[int, ...]]:
    # compositions of `total` into n parts, lexicographically descending
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions_desc(total - first, n - 1):
            yield (first,) + rest


def graded_basis_indices(n: int, d: int, size_guard: int = DEFAULT_SIZE_GUARD) -> GradedIndexSet:
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    p = math.comb(n + d, d)
    if p > size_guard:
        raise CapacityError(f"basis size {p} exceeds guard {size_guard}")
    rows = [c for deg in range(d + 1) for c in _compositions_desc(deg, n)]
    indices = np.array(rows, dtype=np.int64).reshape(p, n)
    indices.setflags(write=False)
    return GradedIndexSet(n, d, indices)


class ConstantSumIterator:
    """Streaming enumeration of ``{i in N^p : |i| = m}`` by push and fork.

    Starting from all ``m`` items in the last slot, each step either *pushes*
    one item out of the last slot into its neighbour (when the last slot is
    non-empty) or *forks* the trailing non-empty slot before it: one item moves
    to the preceding slot and the rest go back to the last slot. The result is
    lexicographically ascending order, which also lets :meth:`seek` jump to any
    rank directly so disjoint ranges can be processed independently.

    Memory is O(p) regardless of the size of the set.
    """

    def __init__(self, m: int, p: int, start: int = 0):
        if m < 0 or p < 1:
            raise ValueError(f"need m >= 0 and p >= 1, got m={m}, p={p}")
        self.m = m
        self.p = p
        self.total = count_constant_sum(m, p)
        self._state: list[int] | None = None
        self._exhausted = False
        self.seek(start)

    def seek(self, rank: int) -> None:
        """Position the iterator so the next emission has lexicographic ``rank``."""
        if rank < 0:
            raise ValueError("rank must be non-negative")
        if rank >= self.total:
            self._state, self._pending, self._exhausted = None, False, True
            return
        state = [0] * self.p
        remaining = self.m
        for slot in range(self.p - 1):
            # completions left for slots after this one, for each value of this slot
            value = 0
            while True:
                block = count_constant_sum(remaining - value, self.p - slot - 1)
                if rank < block:
                    break
                rank -= block
                value += 1
            state[slot] = value
            remaining -= value
        state[-1] = remaining
        self._state = state
        self._pending = True
        self._exhausted = False

    def _advance(self) -> bool:
        s = self._state
        p = self.p
        if p == 1:
            return False
        if s[-1] > 0:
            # push
            s[-1] -= 1
            s[-2] += 1
            return True
        # fork the trailing non-empty slot (never the last one here)
        k = p - 2
        while k >= 0 and s[k] == 0:
            k -= 1
        if k <= 0:
            return False
        items = s[k]
        s[k] = 0
        s[k - 1] += 1
        s[-1] = items - 1
        return True

    def next(self) -> tuple[int, ...] | None:
        if self._exhausted:
            return None
        if self._pending:
            self._pending = False
            return tuple(self._state)
        if not self._advance():
            self._exhausted = True
            return None
        return tuple(self._state)

    def __iter__(self):
        while (item := self.next()) is not None:
            yield item


def next_constant_sum(it: ConstantSumIterator) -> tuple[int, ...] | None:
    """Next multi-index of ``it`` or ``None`` once the set is exhausted."""
    return it.next()


def multinomial_coefficient(m: int, index: Sequence[int]) -> int:
    """``m! / prod(i_k!)`` as an exact integer."""
    if any(i < 0 for i in index) or sum(index) != m:
        raise ValueError(f"multi-index {tuple(index)} does not sum to {m}")
    out = 1
    left = m
    for i in index:
        if i:
            out *= math.comb(left, i)
            left -= i
    return out
