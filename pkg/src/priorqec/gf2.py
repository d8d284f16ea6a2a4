"""Bit-packed linear algebra over GF(2).

Rows and vectors are stored as Python integers, bit ``j`` holding entry ``j``.
Callers should only rely on index-level access (``v[j]``, ``M[i, j]``) and the
array conversions; the packing is an implementation detail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


def _mask(n: int) -> int:
    return (1 << n) - 1


@dataclass(frozen=True)
class BitVector:
    length: int
    word: int = 0

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.word < 0 or self.word >> self.length:
            raise ValueError("word has bits outside the vector length")

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls(length, 0)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> BitVector:
        word = 0
        n = 0
        for n, b in enumerate(bits, start=1):
            if b not in (0, 1, True, False):
                raise ValueError(f"entry {b!r} is not a GF(2) value")
            if b:
                word |= 1 << (n - 1)
        return cls(n, word)

    @classmethod
    def from_support(cls, length: int, support: Iterable[int]) -> BitVector:
        word = 0
        for j in support:
            if not 0 <= j < length:
                raise IndexError(j)
            word |= 1 << j
        return cls(length, word)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, j: int) -> int:
        if j < 0:
            j += self.length
        if not 0 <= j < self.length:
            raise IndexError(j)
        return (self.word >> j) & 1

    def __iter__(self) -> Iterator[int]:
        w = self.word
        for _ in range(self.length):
            yield w & 1
            w >>= 1

    def __xor__(self, other: BitVector) -> BitVector:
        if self.length != other.length:
            raise DimensionError(f"length {self.length} vs {other.length}")
        return BitVector(self.length, self.word ^ other.word)

    def __and__(self, other: BitVector) -> BitVector:
        if self.length != other.length:
            raise DimensionError(f"length {self.length} vs {other.length}")
        return BitVector(self.length, self.word & other.word)

    def weight(self) -> int:
        return self.word.bit_count()

    def support(self) -> list[int]:
        return [j for j, b in enumerate(self) if b]

    def dot(self, other: BitVector) -> int:
        """Overlap parity of two vectors."""
        return (self & other).weight() & 1

    def any(self) -> bool:
        return self.word != 0

    def to_array(self) -> np.ndarray:
        return np.fromiter(self, dtype=np.uint8, count=self.length)

    @classmethod
    def from_array(cls, arr: Sequence[int] | np.ndarray) -> BitVector:
        return cls.from_bits(int(x) for x in np.asarray(arr).ravel())

    def __repr__(self) -> str:
        return f"BitVector({''.join(str(b) for b in self)})"


@dataclass(frozen=True)
class BitMatrix:
    n_rows: int
    n_cols: int
    rows: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.rows) != self.n_rows:
            raise ValueError("row count does not match n_rows")
        m = _mask(self.n_cols)
        if any(r < 0 or r & ~m for r in self.rows):
            raise ValueError("row has bits outside n_cols")

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> BitMatrix:
        return cls(n_rows, n_cols, (0,) * n_rows)

    @classmethod
    def identity(cls, n: int) -> BitMatrix:
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_array(cls, arr: Sequence[Sequence[int]] | np.ndarray) -> BitMatrix:
        a = np.asarray(arr, dtype=np.int64)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        if np.any((a != 0) & (a != 1)):
            raise ValueError("entries must be 0 or 1")
        rows = tuple(BitVector.from_bits(r).word for r in a)
        return cls(a.shape[0], a.shape[1], rows)

    @classmethod
    def from_rows(cls, n_cols: int, rows: Iterable[BitVector | int]) -> BitMatrix:
        words = tuple(r.word if isinstance(r, BitVector) else int(r) for r in rows)
        return cls(len(words), n_cols, words)

    def to_array(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        for i, r in enumerate(self.rows):
            out[i] = BitVector(self.n_cols, r).to_array()
        return out

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        if not (0 <= i < self.n_rows and 0 <= j < self.n_cols):
            raise IndexError(ij)
        return (self.rows[i] >> j) & 1

    def row(self, i: int) -> BitVector:
        return BitVector(self.n_cols, self.rows[i])

    def column(self, j: int) -> BitVector:
        if not 0 <= j < self.n_cols:
            raise IndexError(j)
        word = 0
        for i, r in enumerate(self.rows):
            word |= ((r >> j) & 1) << i
        return BitVector(self.n_rows, word)

    def column_words(self) -> list[int]:
        """Each column packed as an integer over the row index."""
        return [self.column(j).word for j in range(self.n_cols)]

    def transpose(self) -> BitMatrix:
        return BitMatrix(self.n_cols, self.n_rows, tuple(self.column_words()))

    def row_weights(self) -> list[int]:
        return [BitVector(self.n_cols, r).weight() for r in self.rows]

    def __matmul__(self, other: BitMatrix | BitVector):
        if isinstance(other, BitVector):
            return mat_vec(self, other)
        return mat_mul(self, other)

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(b) for b in self.row(i)) for i in range(self.n_rows))
        return f"BitMatrix({self.n_rows}x{self.n_cols}: {body})"


def _parity(x: int) -> int:
    return x.bit_count() & 1


def mat_vec(m: BitMatrix, v: BitVector) -> BitVector:
    if v.length != m.n_cols:
        raise DimensionError(f"matrix has {m.n_cols} columns, vector has length {v.length}")
    word = 0
    for i, r in enumerate(m.rows):
        word |= _parity(r & v.word) << i
    return BitVector(m.n_rows, word)


def mat_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.n_cols != b.n_rows:
        raise DimensionError(f"{a.shape} @ {b.shape}")
    out = []
    for r in a.rows:
        acc = 0
        j = 0
        while r:
            if r & 1:
                acc ^= b.rows[j]
            r >>= 1
            j += 1
        out.append(acc)
    return BitMatrix(a.n_rows, b.n_cols, tuple(out))


def row_reduce(m: BitMatrix) -> tuple[BitMatrix, list[int], BitMatrix]:
    """Reduced row-echelon form.

    Returns ``(reduced, pivot_cols, transform)`` with ``transform @ m == reduced``.
    """
    rows = list(m.rows)
    trans = [1 << i for i in range(m.n_rows)]
    pivots: list[int] = []
    r = 0
    for col in range(m.n_cols):
        bit = 1 << col
        piv = next((i for i in range(r, m.n_rows) if rows[i] & bit), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        trans[r], trans[piv] = trans[piv], trans[r]
        for i in range(m.n_rows):
            if i != r and rows[i] & bit:
                rows[i] ^= rows[r]
                trans[i] ^= trans[r]
        pivots.append(col)
        r += 1
        if r == m.n_rows:
            break
    return (
        BitMatrix(m.n_rows, m.n_cols, tuple(rows)),
        pivots,
        BitMatrix(m.n_rows, m.n_rows, tuple(trans)),
    )


def rank(m: BitMatrix) -> int:
    return len(row_reduce(m)[1])


def in_row_space(m: BitMatrix, v: BitVector) -> bool:
    """True iff ``v`` is a GF(2) combination of the rows of ``m``."""
    if v.length != m.n_cols:
        raise DimensionError(f"matrix has {m.n_cols} columns, vector has length {v.length}")
    reduced, pivots, _ = row_reduce(m)
    w = v.word
    for i, col in enumerate(pivots):
        if (w >> col) & 1:
            w ^= reduced.rows[i]
    return w == 0


def solve_restricted(m: BitMatrix, s: BitVector, allowed_cols: Sequence[int]) -> BitVector | None:
    """Solve ``m @ e == s`` with ``e`` supported on ``allowed_cols``.

    Columns are eliminated in the order given; free columns are set to zero so
    the returned solution is deterministic. Returns ``None`` when ``s`` is not
    reachable from the allowed columns.
    """
    if s.length != m.n_rows:
        raise DimensionError(f"syndrome length {s.length}, matrix has {m.n_rows} rows")
    allowed = list(allowed_cols)
    if any(not 0 <= c < m.n_cols for c in allowed):
        raise IndexError("allowed column out of range")
    if len(set(allowed)) != len(allowed):
        raise ValueError("allowed_cols contains duplicates")

    k = len(allowed)
    # restricted rows with the syndrome bit appended at position k
    aug = []
    for i, r in enumerate(m.rows):
        word = 0
        for t, c in enumerate(allowed):
            word |= ((r >> c) & 1) << t
        word |= ((s.word >> i) & 1) << k
        aug.append(word)

    pivots: list[int] = []
    r = 0
    for t in range(k):
        bit = 1 << t
        piv = next((i for i in range(r, len(aug)) if aug[i] & bit), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        for i in range(len(aug)):
            if i != r and aug[i] & bit:
                aug[i] ^= aug[r]
        pivots.append(t)
        r += 1

    rhs = 1 << k
    if any(aug[i] & rhs for i in range(r, len(aug))):
        return None
    word = 0
    for i, t in enumerate(pivots):
        if aug[i] & rhs:
            word |= 1 << allowed[t]
    return BitVector(m.n_cols, word)
