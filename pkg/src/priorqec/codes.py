"""Planar surface codes as CSS code objects.

Both constructors index data qubits row-major over their grid, with index 0
at the top-left corner. ``CssCode.coords[i]`` gives the grid position of
qubit ``i``. Z-type checks (rows of ``hz``) detect bit flips; the weight-2
(rotated) or weight-3 (unrotated) Z checks sit on the top and bottom edges.
``logical_z`` is always the leftmost column of data qubits and
``logical_x`` the top row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Literal

from .gf2 import BitMatrix, BitVector, mat_vec, rank

Sector = Literal["x_flip", "z_flip"]

MAX_ORACLE_QUBITS = 26


@dataclass(frozen=True)
class CssCode:
    name: str
    n: int
    k: int
    d: int
    hz: BitMatrix
    hx: BitMatrix
    logical_z: BitVector
    logical_x: BitVector
    coords: tuple[tuple[int, int], ...] = field(default=(), compare=False)

    @property
    def label(self) -> str:
        return f"{self.name}_d{self.d}"

    def index_map(self) -> dict[int, tuple[int, int]]:
        return dict(enumerate(self.coords))

    def check_weight_histogram(self) -> dict[str, dict[int, int]]:
        out = {}
        for key, h in (("hz", self.hz), ("hx", self.hx)):
            hist: dict[int, int] = {}
            for w in h.row_weights():
                hist[w] = hist.get(w, 0) + 1
            out[key] = dict(sorted(hist.items()))
        return out

    def stabilizer_partner(self, qubit: int) -> int | None:
        """Qubit sharing a weight-2 X check with ``qubit``, if any.

        A flip on the partner has the same Z syndrome as a flip on ``qubit``.
        """
        for i in range(self.hx.n_rows):
            row = self.hx.row(i)
            if row.weight() == 2 and row[qubit]:
                return next(j for j in row.support() if j != qubit)
        return None


@dataclass(frozen=True)
class TannerGraph:
    check_to_bits: tuple[tuple[int, ...], ...]
    bit_to_checks: tuple[tuple[int, ...], ...]

    @property
    def n_checks(self) -> int:
        return len(self.check_to_bits)

    @property
    def n_bits(self) -> int:
        return len(self.bit_to_checks)


def tanner(h: BitMatrix) -> TannerGraph:
    c2b = tuple(tuple(h.row(i).support()) for i in range(h.n_rows))
    b2c: list[list[int]] = [[] for _ in range(h.n_cols)]
    for i, bits in enumerate(c2b):
        for j in bits:
            b2c[j].append(i)
    return TannerGraph(c2b, tuple(tuple(c) for c in b2c))


def _check_distance(d: int) -> None:
    if not isinstance(d, int) or d < 2:
        raise ValueError(f"distance must be an integer >= 2, got {d!r}")


def rotated_surface(d: int) -> CssCode:
    """Rotated surface code ``[[d^2, 1, d]]``.

    Qubit ``(r, c)`` has index ``r * d + c``. The bulk face with top-left
    corner ``(r, c)`` is a Z check when ``r + c`` is even, an X check
    otherwise. Weight-2 Z checks close the top and bottom edges, weight-2 X
    checks the left and right edges. With this colouring qubit 0 shares a
    weight-2 X check with qubit ``d`` directly below it.
    """
    _check_distance(d)
    n = d * d
    q = lambda r, c: r * d + c  # noqa: E731
    z_rows: list[int] = []
    x_rows: list[int] = []
    for r in range(d - 1):
        for c in range(d - 1):
            word = (1 << q(r, c)) | (1 << q(r, c + 1)) | (1 << q(r + 1, c)) | (1 << q(r + 1, c + 1))
            (z_rows if (r + c) % 2 == 0 else x_rows).append(word)
    for c in range(d - 1):
        # top/bottom edges: weight-2 Z where the adjacent face is X
        if c % 2 == 1:
            z_rows.append((1 << q(0, c)) | (1 << q(0, c + 1)))
        if (d - 2 + c) % 2 == 1:
            z_rows.append((1 << q(d - 1, c)) | (1 << q(d - 1, c + 1)))
    for r in range(d - 1):
        # left/right edges: weight-2 X where the adjacent face is Z
        if r % 2 == 0:
            x_rows.append((1 << q(r, 0)) | (1 << q(r + 1, 0)))
        if (r + d - 2) % 2 == 0:
            x_rows.append((1 << q(r, d - 1)) | (1 << q(r + 1, d - 1)))
    return CssCode(
        name="rotated",
        n=n,
        k=1,
        d=d,
        hz=BitMatrix(len(z_rows), n, tuple(z_rows)),
        hx=BitMatrix(len(x_rows), n, tuple(x_rows)),
        logical_z=BitVector.from_support(n, [q(r, 0) for r in range(d)]),
        logical_x=BitVector.from_support(n, [q(0, c) for c in range(d)]),
        coords=tuple((r, c) for r in range(d) for c in range(d)),
    )


def unrotated_surface(d: int) -> CssCode:
    """Unrotated planar surface code ``[[d^2 + (d-1)^2, 1, d]]``.

    Sites live on a ``(2d-1) x (2d-1)`` grid; data qubits are the sites with
    ``i + j`` even, indexed row-major. Ancilla sites with ``i`` even and
    ``j`` odd are Z checks, those with ``i`` odd and ``j`` even are X checks.
    Every check touches its 3 or 4 nearest data qubits, so no two single
    flips share a Z syndrome.
    """
    _check_distance(d)
    size = 2 * d - 1
    coords = tuple((i, j) for i in range(size) for j in range(size) if (i + j) % 2 == 0)
    index = {ij: t for t, ij in enumerate(coords)}
    n = len(coords)

    def star(i: int, j: int) -> int:
        word = 0
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            t = index.get((i + di, j + dj))
            if t is not None:
                word |= 1 << t
        return word

    z_rows = [star(i, j) for i in range(0, size, 2) for j in range(1, size, 2)]
    x_rows = [star(i, j) for i in range(1, size, 2) for j in range(0, size, 2)]
    return CssCode(
        name="unrotated",
        n=n,
        k=1,
        d=d,
        hz=BitMatrix(len(z_rows), n, tuple(z_rows)),
        hx=BitMatrix(len(x_rows), n, tuple(x_rows)),
        logical_z=BitVector.from_support(n, [index[(i, 0)] for i in range(0, size, 2)]),
        logical_x=BitVector.from_support(n, [index[(0, j)] for j in range(0, size, 2)]),
        coords=coords,
    )


FAMILIES = {"rotated": rotated_surface, "unrotated": unrotated_surface}


def build_code(family: str, d: int) -> CssCode:
    try:
        ctor = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown code family {family!r}; choose from {sorted(FAMILIES)}") from None
    return ctor(d)


def min_logical_weight(code: CssCode, sector: Sector = "x_flip") -> int:
    """Brute-force distance of one error sector.

    For ``x_flip`` this is the smallest weight of a bit-flip pattern with
    trivial Z syndrome and odd overlap with ``logical_z``; ``z_flip`` is the
    dual. Candidates are scanned in order of increasing weight, so the first
    hit is the minimum.
    """
    if code.n > MAX_ORACLE_QUBITS:
        raise ValueError(f"exhaustive search limited to n <= {MAX_ORACLE_QUBITS}, got n={code.n}")
    if sector == "x_flip":
        checks, logical = code.hz, code.logical_z
    elif sector == "z_flip":
        checks, logical = code.hx, code.logical_x
    else:
        raise ValueError(f"unknown sector {sector!r}")
    cols = checks.column_words()
    lz = logical.word
    for w in range(1, code.n + 1):
        for support in combinations(range(code.n), w):
            syn = 0
            par = 0
            for j in support:
                syn ^= cols[j]
                par ^= (lz >> j) & 1
            if syn == 0 and par:
                return w
    raise ValueError("code has no nontrivial logical operator in this sector")


def check_css(code: CssCode) -> None:
    """Assert the CSS and logical-operator invariants; raises ``AssertionError``."""
    from .gf2 import in_row_space, mat_mul

    assert not any(mat_mul(code.hx, code.hz.transpose()).rows), "hx . hz^T != 0"
    assert rank(code.hx) + rank(code.hz) == code.n - code.k, "rank condition failed"
    assert not mat_vec(code.hx, code.logical_z).any(), "logical_z fails an X check"
    assert not mat_vec(code.hz, code.logical_x).any(), "logical_x fails a Z check"
    assert not in_row_space(code.hz, code.logical_z), "logical_z is a stabilizer"
    assert not in_row_space(code.hx, code.logical_x), "logical_x is a stabilizer"
    assert code.logical_x.dot(code.logical_z) == 1, "logicals commute"
