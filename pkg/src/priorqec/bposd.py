"""Belief propagation with ordered-statistics (OSD-0) fallback.

BP is sum-product in the log-likelihood-ratio domain with a flooding
schedule. When the BP hard decision does not reproduce the syndrome, OSD-0
ranks columns by BP posterior flip probability and solves the syndrome
equation on the most likely independent column set. The soft output is
always the BP posterior of the last iteration.

Columns whose soft values tie are ordered by a key hashed from the syndrome
(``tie_break="hashed"``, the default) rather than by column index, so the
arbitrary choice between equally likely corrections does not systematically
favour low-index qubits. ``tie_break="index"`` restores plain index order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _backend
from ._fallback import INDEX_TIES, Graph, soft_order
from .codes import TannerGraph
from .gf2 import BitMatrix, BitVector, DimensionError, mat_vec, rank, solve_restricted

log = logging.getLogger(__name__)

P_MIN = 1e-12
DEFAULT_MAX_ITER = 50
DEFAULT_TIE_SEED = 0
TIE_BREAKS = ("hashed", "index")


class PriorVector:
    """Per-qubit flip probabilities, clamped to ``[P_MIN, 1 - P_MIN]``."""

    __slots__ = ("_p",)

    def __init__(self, p: Sequence[float] | np.ndarray):
        arr = np.array(p, dtype=np.float64).ravel()
        if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise ValueError("priors must be probabilities in [0, 1]")
        if np.any(arr >= 0.5):
            log.info("priors >= 0.5 at sites %s; BP soft outputs degrade near 1/2",
                     np.flatnonzero(arr >= 0.5).tolist())
        np.clip(arr, P_MIN, 1.0 - P_MIN, out=arr)
        arr.setflags(write=False)
        self._p = arr

    @classmethod
    def uniform(cls, n: int, p: float) -> PriorVector:
        return cls(np.full(n, p))

    @property
    def p(self) -> np.ndarray:
        return self._p

    def llr(self) -> np.ndarray:
        return np.log((1.0 - self._p) / self._p)

    def key(self) -> bytes:
        return self._p.tobytes()

    def __len__(self) -> int:
        return len(self._p)

    def __getitem__(self, i):
        return self._p[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, PriorVector) and np.array_equal(self._p, other._p)

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"PriorVector({np.array2string(self._p, precision=4)})"


@dataclass(frozen=True)
class DecodeResult:
    correction: BitVector
    soft: tuple[float, ...]
    bp_converged: bool
    osd_used: bool
    iterations: int


def _as_bits(s, length: int) -> np.ndarray:
    if isinstance(s, BitVector):
        arr = s.to_array()
    else:
        arr = np.asarray(s, dtype=np.uint8).ravel()
    if arr.shape[0] != length:
        raise DimensionError(f"syndrome length {arr.shape[0]}, expected {length}")
    return arr


def _graph_from_tanner(graph: TannerGraph) -> Graph:
    h = np.zeros((graph.n_checks, graph.n_bits), dtype=np.uint8)
    for c, bits in enumerate(graph.check_to_bits):
        h[c, list(bits)] = 1
    return Graph(h)


class BpOsdDecoder:
    """Reusable decoder bound to one check matrix.

    ``decode_batch`` is the fast path used by the enumeration and
    closed-loop experiments.
    """

    def __init__(
        self,
        h: BitMatrix | np.ndarray,
        max_iter: int = DEFAULT_MAX_ITER,
        backend: str | None = None,
        tie_break: str = "hashed",
        tie_seed: int = DEFAULT_TIE_SEED,
    ):
        if max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
        if tie_seed < 0:
            raise ValueError("tie_seed must be non-negative")
        self.h = h if isinstance(h, BitMatrix) else BitMatrix.from_array(h)
        self.graph = Graph(self.h.to_array())
        self.max_iter = max_iter
        self.tie_break = tie_break
        self.tie_seed = tie_seed
        self._seed = INDEX_TIES if tie_break == "index" else tie_seed
        self.kernels = _backend.kernels if backend is None else _backend.get(backend)

    @property
    def n(self) -> int:
        return self.h.n_cols

    def decode_batch(self, syndromes: np.ndarray, priors: PriorVector):
        """Decode rows of a ``(count, m)`` uint8 array.

        Returns ``(corrections, soft, converged, iterations)``.
        """
        if len(priors) != self.n:
            raise DimensionError(f"{len(priors)} priors for {self.n} qubits")
        syn = np.atleast_2d(np.asarray(syndromes, dtype=np.uint8))
        if syn.shape[1] != self.h.n_rows:
            raise DimensionError(f"syndrome length {syn.shape[1]}, expected {self.h.n_rows}")
        return self.kernels.bposd_batch(self.graph, syn, priors.llr(), self.max_iter, self._seed)

    def decode(self, s: BitVector | np.ndarray, priors: PriorVector) -> DecodeResult:
        syn = _as_bits(s, self.h.n_rows)
        corr, soft, conv, iters = self.decode_batch(syn[None, :], priors)
        return DecodeResult(
            correction=BitVector.from_array(corr[0]),
            soft=tuple(float(x) for x in soft[0]),
            bp_converged=bool(conv[0]),
            osd_used=not bool(conv[0]),
            iterations=int(iters[0]),
        )


@lru_cache(maxsize=32)
def _cached_decoder(h: BitMatrix, max_iter: int, tie_break: str) -> BpOsdDecoder:
    return BpOsdDecoder(h, max_iter, tie_break=tie_break)


def bp_decode(graph: TannerGraph, s: BitVector | np.ndarray, priors: PriorVector, max_iter: int = DEFAULT_MAX_ITER):
    """Plain BP. Returns ``(soft, hard, converged, iterations)``."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if len(priors) != graph.n_bits:
        raise DimensionError(f"{len(priors)} priors for {graph.n_bits} bits")
    g = _graph_from_tanner(graph)
    syn = _as_bits(s, graph.n_checks)
    post, hard, ok, iters = _backend.kernels.bp_decode(g, syn, priors.llr(), max_iter)
    soft = 1.0 / (1.0 + np.exp(post))
    return soft, BitVector.from_array(hard), bool(ok), int(iters)


def osd0(h: BitMatrix, s: BitVector, soft: Sequence[float], tie_keys: Sequence[int] | None = None) -> BitVector:
    """Order-0 OSD: solve ``h @ e == s`` on the most likely independent columns.

    Columns are ranked by descending soft value; ties go to the lower
    ``tie_keys`` entry, or the lower index when no keys are given.
    """
    soft = np.asarray(soft, dtype=np.float64)
    if soft.shape[0] != h.n_cols:
        raise DimensionError(f"{soft.shape[0]} soft values for {h.n_cols} columns")
    order = soft_order(soft, None if tie_keys is None else np.asarray(tie_keys, dtype=np.uint64))
    target = rank(h)
    chosen: list[int] = []
    basis: list[tuple[int, int]] = []  # (pivot bit, reduced column word)
    cols = h.column_words()
    for j in order:
        if len(chosen) == target:
            break
        w = cols[j]
        for pbit, pw in basis:
            if w & pbit:
                w ^= pw
        if w:
            basis.append((w & -w, w))
            chosen.append(int(j))
    e = solve_restricted(h, s, chosen)
    if e is None:
        raise ValueError("syndrome is not in the column space of the check matrix")
    return e


def decode(
    h: BitMatrix,
    s: BitVector | np.ndarray,
    priors: PriorVector,
    max_iter: int = DEFAULT_MAX_ITER,
    tie_break: str = "hashed",
) -> DecodeResult:
    """BP, falling back to OSD-0 when BP does not reproduce the syndrome."""
    return _cached_decoder(h, max_iter, tie_break).decode(s, priors)


def syndrome_consistent(h: BitMatrix, s: BitVector, result: DecodeResult) -> bool:
    return mat_vec(h, result.correction) == s
