"""Independent bit-flip noise: sampling, exact probabilities, enumeration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Mapping

import numpy as np

from .gf2 import BitVector, DimensionError

MAX_UNBOUNDED_QUBITS = 20
MAX_ENUMERATION = 50_000_000


@dataclass(frozen=True)
class ErrorModel:
    """Each qubit flips independently at ``base_rate`` unless overridden."""

    n: int
    base_rate: float
    overrides: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("n must be non-negative")
        object.__setattr__(self, "overrides", dict(self.overrides))
        for q, p in self.overrides.items():
            if not 0 <= q < self.n:
                raise ValueError(f"override site {q} outside [0, {self.n})")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"override rate {p} is not a probability")
        if not 0.0 <= self.base_rate <= 1.0:
            raise ValueError(f"base rate {self.base_rate} is not a probability")

    def rates(self) -> np.ndarray:
        return effective_rates(self)

    def log_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """``(log r_i, log(1 - r_i))``; zero rates map to ``-inf``."""
        r = effective_rates(self)
        with np.errstate(divide="ignore"):
            return np.log(r), np.log1p(-r)


def effective_rates(model: ErrorModel) -> np.ndarray:
    r = np.full(model.n, float(model.base_rate))
    for q, p in model.overrides.items():
        r[q] = p
    return r


def sample_errors(model: ErrorModel, rng: np.random.Generator, count: int) -> np.ndarray:
    """``(count, n)`` uint8 array of independent samples."""
    return (rng.random((count, model.n)) < effective_rates(model)).astype(np.uint8)


def sample_error(model: ErrorModel, rng: np.random.Generator) -> BitVector:
    return BitVector.from_array(sample_errors(model, rng, 1)[0])


def log_probabilities(model: ErrorModel, words: np.ndarray) -> np.ndarray:
    """Log-probability of each packed error word (bit ``i`` = qubit ``i``).

    Terms are accumulated qubit by qubit in index order, so the value for a
    given error does not depend on how it was enumerated.
    """
    log_r, log_q = model.log_tables()
    words = np.asarray(words, dtype=np.uint64)
    acc = np.zeros(words.shape, dtype=np.float64)
    for i in range(model.n):
        bit = ((words >> np.uint64(i)) & np.uint64(1)).astype(bool)
        acc += np.where(bit, log_r[i], log_q[i])
    return acc


def error_probability(model: ErrorModel, e: BitVector) -> float:
    if e.length != model.n:
        raise DimensionError(f"error length {e.length}, model has {model.n} qubits")
    log_r, log_q = model.log_tables()
    acc = 0.0
    for i, b in enumerate(e):
        acc += float(log_r[i] if b else log_q[i])
    return math.exp(acc)


def count_errors(n: int, max_weight: int | None) -> int:
    if max_weight is None or max_weight >= n:
        return 2**n
    return sum(math.comb(n, w) for w in range(max(max_weight, -1) + 1))


def _check_feasible(n: int, max_weight: int | None) -> None:
    if max_weight is not None and max_weight < 0:
        raise ValueError("max_weight must be non-negative")
    if max_weight is None and n > MAX_UNBOUNDED_QUBITS:
        raise ValueError(f"unbounded enumeration limited to n <= {MAX_UNBOUNDED_QUBITS}, got {n}")
    if n > 63:
        raise ValueError("packed enumeration supports at most 63 qubits")
    total = count_errors(n, max_weight)
    if total > MAX_ENUMERATION:
        raise ValueError(f"{total} errors exceeds the enumeration limit of {MAX_ENUMERATION}")


def error_words(n: int, max_weight: int | None = None) -> np.ndarray:
    """All errors as packed uint64 words.

    Unbounded: ``0 .. 2^n - 1`` in integer order. Capped: by weight, then
    lexicographically by support.
    """
    _check_feasible(n, max_weight)
    if max_weight is None:
        return np.arange(2**n, dtype=np.uint64)
    chunks = [np.zeros(1, dtype=np.uint64)]
    pows = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
    for w in range(1, min(max_weight, n) + 1):
        count = math.comb(n, w)
        idx = np.fromiter(combinations(range(n), w), dtype=np.dtype((np.int64, w)), count=count)
        chunks.append(np.bitwise_or.reduce(pows[idx], axis=1))
    return np.concatenate(chunks)


def enumerate_errors(n: int, max_weight: int | None = None) -> Iterator[BitVector]:
    """Stream every error once, in the order of :func:`error_words`."""
    for w in error_words(n, max_weight):
        yield BitVector(n, int(w))


def weight_distribution(rates: np.ndarray) -> np.ndarray:
    """Poisson-binomial pmf of the number of flips."""
    dist = np.zeros(len(rates) + 1)
    dist[0] = 1.0
    for k, p in enumerate(rates, start=1):
        dist[1 : k + 1] = dist[1 : k + 1] * (1.0 - p) + dist[:k] * p
        dist[0] *= 1.0 - p
    return dist


def tail_probability(model: ErrorModel, max_weight: int) -> float:
    """Probability that more than ``max_weight`` qubits flip."""
    dist = weight_distribution(effective_rates(model))
    if max_weight + 1 >= len(dist):
        return 0.0
    return math.fsum(dist[max(max_weight + 1, 0) :])
