"""Logical failure probabilities of a bit-flip memory experiment.

Every error in the enumeration is decoded through a cache keyed by
``(priors, syndrome)``; decoding is a pure function of those two, so each
distinct syndrome is decoded once per prior vector. Probabilities are summed
with ``math.fsum`` so the total does not depend on enumeration order.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .bposd import DEFAULT_MAX_ITER, DEFAULT_TIE_SEED, BpOsdDecoder, PriorVector
from .codes import CssCode
from .gf2 import BitVector, mat_vec
from .noise import MAX_UNBOUNDED_QUBITS, ErrorModel, error_words, log_probabilities, tail_probability

log = logging.getLogger(__name__)

EXACT_MAX_QUBITS = MAX_UNBOUNDED_QUBITS
DEFAULT_CAP = 6
DEFAULT_EPS_GRID = (1e-3, 2e-3, 5e-3, 1e-2)
DEFAULT_P_STAR = 1.0 / 3.0


class DecoderContractError(RuntimeError):
    """A correction failed to reproduce the syndrome it was decoded from."""


class Case(str, Enum):
    IDENTICAL_QUBITS = "identical_qubits"
    UNKNOWN_BAD_QUBIT = "unknown_bad_qubit"
    KNOWN_BAD_QUBIT = "known_bad_qubit"

    @classmethod
    def parse(cls, value: str | int | Case) -> Case:
        if isinstance(value, Case):
            return value
        aliases = {"1": cls.IDENTICAL_QUBITS, "2": cls.UNKNOWN_BAD_QUBIT, "3": cls.KNOWN_BAD_QUBIT}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def number(self) -> int:
        return list(Case).index(self) + 1


@dataclass(frozen=True)
class CaseSpec:
    case_id: Case
    epsilon: float
    p_star: float = DEFAULT_P_STAR
    bad_site: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "case_id", Case.parse(self.case_id))

    def build(self, n: int) -> tuple[ErrorModel, PriorVector]:
        """The (truth model, decoder priors) pair this case describes."""
        iid = ErrorModel(n, self.epsilon)
        bad = ErrorModel(n, self.epsilon, {self.bad_site: self.p_star})
        if self.case_id is Case.IDENTICAL_QUBITS:
            model, prior_model = iid, iid
        elif self.case_id is Case.UNKNOWN_BAD_QUBIT:
            model, prior_model = bad, iid
        else:
            model, prior_model = bad, bad
        return model, PriorVector(prior_model.rates())


@dataclass
class FailureRecord:
    code: str
    distance: int
    case_id: str
    epsilon: float
    failure_probability: float
    tail_bound: float
    syndrome_cache_hits: int
    wall_time: float
    seed: int | None = None
    max_weight: int | None = None

    def as_row(self) -> dict:
        return {
            "code": self.code,
            "d": self.distance,
            "case": self.case_id,
            "epsilon": self.epsilon,
            "failure": self.failure_probability,
            "tail": self.tail_bound,
            "seed": "" if self.seed is None else self.seed,
        }

    def to_dict(self) -> dict:
        return asdict(self)


CSV_FIELDS = ("code", "d", "case", "epsilon", "failure", "tail", "seed")


class DecodeCache:
    """``(priors, syndrome word) -> correction word`` for one code."""

    def __init__(
        self,
        code: CssCode,
        max_iter: int = DEFAULT_MAX_ITER,
        tie_break: str = "hashed",
        tie_seed: int = DEFAULT_TIE_SEED,
    ):
        self.code = code
        self.decoder = BpOsdDecoder(code.hz, max_iter, tie_break=tie_break, tie_seed=tie_seed)
        self._store: dict[bytes, dict[int, int]] = {}
        self._col_words = np.array(code.hz.column_words(), dtype=np.uint64)
        self.decodes = 0

    def corrections(self, syndromes: np.ndarray, priors: PriorVector) -> np.ndarray:
        """Correction words for an array of distinct syndrome words."""
        table = self._store.setdefault(priors.key(), {})
        syndromes = np.asarray(syndromes, dtype=np.uint64)
        missing = [int(s) for s in syndromes if int(s) not in table]
        if missing:
            m = self.code.hz.n_rows
            arr = np.array(missing, dtype=np.uint64)
            bits = ((arr[:, None] >> np.arange(m, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)
            corr, _, _, _ = self.decoder.decode_batch(bits, priors)
            words = pack_rows(corr)
            check = syndrome_words(words, self._col_words)
            if not np.array_equal(check, arr):
                raise DecoderContractError("decoder returned a correction with the wrong syndrome")
            table.update(zip(missing, (int(w) for w in words)))
            self.decodes += len(missing)
        return np.array([table[int(s)] for s in syndromes], dtype=np.uint64)


def pack_rows(bits: np.ndarray) -> np.ndarray:
    bits = np.atleast_2d(bits).astype(np.uint64)
    shifts = np.arange(bits.shape[1], dtype=np.uint64)
    return np.bitwise_or.reduce(bits << shifts, axis=1) if bits.shape[1] else np.zeros(len(bits), np.uint64)


def syndrome_words(errors: np.ndarray, col_words: np.ndarray) -> np.ndarray:
    errors = np.asarray(errors, dtype=np.uint64)
    out = np.zeros(errors.shape, dtype=np.uint64)
    zero = np.uint64(0)
    for i, cw in enumerate(col_words):
        bit = (errors >> np.uint64(i)) & np.uint64(1)
        out ^= np.where(bit.astype(bool), cw, zero)
    return out


def parity_words(words: np.ndarray, mask: int) -> np.ndarray:
    x = np.asarray(words, dtype=np.uint64) & np.uint64(mask)
    out = np.zeros(x.shape, dtype=np.uint8)
    while np.any(x):
        out ^= (x & np.uint64(1)).astype(np.uint8)
        x = x >> np.uint64(1)
    return out


@dataclass
class _Enumeration:
    words: np.ndarray
    unique_syndromes: np.ndarray
    inverse: np.ndarray
    logical_parity: np.ndarray


@lru_cache(maxsize=8)
def _enumerate(code: CssCode, max_weight: int | None) -> _Enumeration:
    words = error_words(code.n, max_weight)
    syn = syndrome_words(words, np.array(code.hz.column_words(), dtype=np.uint64))
    uniq, inv = np.unique(syn, return_inverse=True)
    return _Enumeration(words, uniq, inv.ravel(), parity_words(words, code.logical_z.word))


def logical_failure(code: CssCode, e: BitVector, c: BitVector) -> bool:
    """True iff the residual ``e ^ c`` flips the logical Z eigenvalue."""
    residual = e ^ c
    if mat_vec(code.hz, residual).any():
        raise DecoderContractError("residual error has a nonzero syndrome")
    return bool(residual.dot(code.logical_z))


def _failure(
    code: CssCode,
    model: ErrorModel,
    priors: PriorVector,
    max_weight: int | None,
    cache: DecodeCache | None,
    label: str,
    use_cache: bool = True,
) -> FailureRecord:
    if model.n != code.n or len(priors) != code.n:
        raise ValueError("model/prior length does not match the code")
    t0 = time.perf_counter()
    cache = cache or DecodeCache(code)
    en = _enumerate(code, max_weight)
    if use_cache:
        corr = cache.corrections(en.unique_syndromes, priors)[en.inverse]
        hits = len(en.words) - len(en.unique_syndromes)
    else:
        corr = np.empty_like(en.words)
        syn = en.unique_syndromes[en.inverse]
        for k, s in enumerate(syn):
            fresh = DecodeCache(code, cache.decoder.max_iter, cache.decoder.tie_break, cache.decoder.tie_seed)
            corr[k] = fresh.corrections(np.array([s], dtype=np.uint64), priors)[0]
        hits = 0
    fail = (en.logical_parity ^ parity_words(corr, code.logical_z.word)).astype(bool)
    logp = log_probabilities(model, en.words[fail])
    failure = math.fsum(np.exp(logp).tolist())
    tail = 0.0 if max_weight is None else tail_probability(model, max_weight)
    return FailureRecord(
        code=code.name,
        distance=code.d,
        case_id=label,
        epsilon=model.base_rate,
        failure_probability=failure,
        tail_bound=tail,
        syndrome_cache_hits=hits,
        wall_time=time.perf_counter() - t0,
        max_weight=max_weight,
    )


def exact_failure_probability(
    code: CssCode,
    model: ErrorModel,
    priors: PriorVector,
    cache: DecodeCache | None = None,
    label: str = "custom",
    use_cache: bool = True,
) -> FailureRecord:
    if code.n > EXACT_MAX_QUBITS:
        raise ValueError(
            f"exact enumeration limited to n <= {EXACT_MAX_QUBITS} (got {code.n}); "
            "use capped_failure_probability"
        )
    return _failure(code, model, priors, None, cache, label, use_cache)


def capped_failure_probability(
    code: CssCode,
    model: ErrorModel,
    priors: PriorVector,
    max_weight: int = DEFAULT_CAP,
    cache: DecodeCache | None = None,
    label: str = "custom",
) -> FailureRecord:
    """Failure summed over errors of weight <= ``max_weight``; the rest goes to ``tail_bound``."""
    return _failure(code, model, priors, max_weight, cache, label)


def evaluate(code, model, priors, cache=None, label="custom", max_weight=DEFAULT_CAP) -> FailureRecord:
    """Exact when the code is small enough, weight-capped otherwise."""
    if code.n <= EXACT_MAX_QUBITS:
        return exact_failure_probability(code, model, priors, cache, label)
    return capped_failure_probability(code, model, priors, max_weight, cache, label)


def run_case(code: CssCode, spec: CaseSpec, cache: DecodeCache | None = None, max_weight: int = DEFAULT_CAP) -> FailureRecord:
    model, priors = spec.build(code.n)
    return evaluate(code, model, priors, cache, spec.case_id.value, max_weight)


def fit_scaling(points: Iterable[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares line through ``(log eps, log f)``.

    Returns ``(exponent, intercept, rms_residual)``.
    """
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two points to fit a scaling exponent")
    if np.any(pts <= 0):
        raise ValueError("all epsilon and failure values must be positive")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(x) == 0:
        raise ValueError("epsilon values must not all coincide")
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


@dataclass
class ScalingFit:
    code: str
    distance: int
    case_id: str
    exponent: float
    intercept: float
    residual: float


def sweep(
    code: CssCode,
    cases: Sequence[Case | str | int] = tuple(Case),
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    p_star: float = DEFAULT_P_STAR,
    bad_site: int = 0,
    max_weight: int = DEFAULT_CAP,
    cache: DecodeCache | None = None,
) -> tuple[list[FailureRecord], list[ScalingFit]]:
    cache = cache or DecodeCache(code)
    records: list[FailureRecord] = []
    fits: list[ScalingFit] = []
    for case in map(Case.parse, cases):
        rows = [run_case(code, CaseSpec(case, eps, p_star, bad_site), cache, max_weight) for eps in eps_grid]
        for r in rows:
            log.info("%s d=%d %s eps=%g failure=%.3e tail=%.1e (%.2fs)", r.code, r.distance,
                     r.case_id, r.epsilon, r.failure_probability, r.tail_bound, r.wall_time)
        records.extend(rows)
        exp_, icpt, res = fit_scaling([(r.epsilon, r.failure_probability) for r in rows])
        fits.append(ScalingFit(code.name, code.d, case.value, exp_, icpt, res))
    return records, fits


def lemma_errors(code: CssCode, known_sites: Iterable[int], n2: int) -> np.ndarray:
    """Packed errors with any support on ``known_sites`` plus <= ``n2`` flips elsewhere."""
    known = sorted(set(known_sites))
    others = [q for q in range(code.n) if q not in known]
    known_words = [0]
    for q in known:
        known_words += [w | (1 << q) for w in known_words]
    out = []
    for w in range(n2 + 1):
        for extra in combinations(others, w):
            e = sum(1 << q for q in extra)
            out.extend(k | e for k in known_words)
    return np.array(out, dtype=np.uint64)


def lemma_counterexamples(
    code: CssCode, known_sites: Iterable[int], n2: int, priors: PriorVector, enforce_bound: bool = True
) -> list[BitVector]:
    """Errors in the lemma class that the decoder fails to correct."""
    known = sorted(set(known_sites))
    if any(not 0 <= q < code.n for q in known):
        raise ValueError("known site outside the code")
    if n2 < 0:
        raise ValueError("n2 must be non-negative")
    if enforce_bound and len(known) + 2 * n2 >= code.d:
        raise ValueError(f"need n1 + 2*n2 < d, got {len(known)} + 2*{n2} >= {code.d}")
    words = lemma_errors(code, known, n2)
    col_words = np.array(code.hz.column_words(), dtype=np.uint64)
    syn = syndrome_words(words, col_words)
    uniq, inv = np.unique(syn, return_inverse=True)
    corr = DecodeCache(code).corrections(uniq, priors)[inv.ravel()]
    lz = code.logical_z.word
    fail = (parity_words(words, lz) ^ parity_words(corr, lz)).astype(bool)
    return [BitVector(code.n, int(w)) for w in words[fail]]


def lemma_check(code: CssCode, known_sites: Iterable[int], n2: int, priors: PriorVector) -> bool:
    """True iff every error in the lemma class is corrected without logical failure."""
    return not lemma_counterexamples(code, known_sites, n2, priors)
