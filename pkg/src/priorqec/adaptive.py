"""Closed-loop prior learning and in-situ gate calibration.

Both loops run one memory cycle per round: sample an error, measure the
syndrome, decode with the live priors, then feed the decoder output back.
Learning folds the BP soft output into the priors with a fixed gain.
Calibration additionally nudges a control angle using only whether the
correction touched the target qubit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bposd import P_MIN, BpOsdDecoder, DecodeResult, PriorVector
from .codes import CssCode, unrotated_surface
from .experiments import DEFAULT_EPS_GRID, DecodeCache, FailureRecord, ScalingFit, evaluate, fit_scaling
from .gf2 import BitVector, DimensionError
from .noise import ErrorModel, effective_rates

log = logging.getLogger(__name__)

DEFAULT_GAIN = 0.01
DEFAULT_GAIN_THETA = 0.02
DEFAULT_THETA_TARGET = math.pi / 3
DEFAULT_THETA0 = 0.3
DEFAULT_BACKGROUND = 1e-3
FULL_HISTORY_LIMIT = 10_000
HISTORY_STRIDE = 10
CALIBRATION_FIELDS = ("round", "theta", "theta_tot", "b_t", "prior_target", "prior_median_others")


def history_stride(rounds: int) -> int:
    return 1 if rounds <= FULL_HISTORY_LIMIT else HISTORY_STRIDE


def _check_gain(gain: float) -> None:
    if not 0.0 < gain <= 1.0:
        raise ValueError(f"gain must lie in (0, 1], got {gain}")


def kalman_update(priors: PriorVector, soft: Sequence[float] | np.ndarray, gain: float) -> PriorVector:
    """``p + gain * (b - p)``, clamped to the prior bounds."""
    _check_gain(gain)
    b = np.asarray(soft, dtype=np.float64)
    if b.shape != (len(priors),):
        raise DimensionError(f"{b.shape} soft values for {len(priors)} priors")
    if np.any(~np.isfinite(b)) or np.any(b < 0) or np.any(b > 1):
        raise ValueError("soft values must be probabilities")
    p = priors.p
    return PriorVector(np.clip(p + gain * (b - p), P_MIN, 1.0 - P_MIN))


@dataclass
class LearningState:
    """Live priors plus a (possibly strided) record of past ones."""

    priors: PriorVector
    gain: float = DEFAULT_GAIN
    round: int = 0
    stride: int = 1
    history: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        _check_gain(self.gain)
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def advance(self, soft: np.ndarray) -> None:
        self.priors = kalman_update(self.priors, soft, self.gain)
        self.round += 1
        if self.round % self.stride == 0:
            self.history.append(self.priors.p.copy())


def _syndrome(code: CssCode, e: np.ndarray) -> np.ndarray:
    return (code.hz.to_array().astype(np.int64) @ e % 2).astype(np.uint8)


def memory_round(
    code: CssCode,
    truth: ErrorModel,
    state: LearningState,
    rng: np.random.Generator,
    decoder: BpOsdDecoder | None = None,
) -> tuple[LearningState, DecodeResult, BitVector]:
    """One idle cycle: sample, decode with the live priors, update them in place."""
    if truth.n != code.n:
        raise DimensionError("truth model does not match the code")
    decoder = decoder or BpOsdDecoder(code.hz)
    e = (rng.random(code.n) < effective_rates(truth)).astype(np.uint8)
    result = decoder.decode(_syndrome(code, e), state.priors)
    state.advance(np.asarray(result.soft))
    return state, result, BitVector.from_array(e)


def _sweep_priors(
    code: CssCode,
    truth_for: Callable[[float], ErrorModel],
    priors_for: Callable[[float], PriorVector],
    eps_grid: Sequence[float],
    label: str,
) -> tuple[list[FailureRecord], ScalingFit]:
    cache = DecodeCache(code)
    rows = [evaluate(code, truth_for(eps), priors_for(eps), cache, label) for eps in eps_grid]
    slope, icpt, res = fit_scaling([(r.epsilon, r.failure_probability) for r in rows])
    return rows, ScalingFit(code.name, code.d, label, slope, icpt, res)


@dataclass
class LearningRun:
    seed: int
    rounds: int
    history: np.ndarray  # (snapshots, n) priors after every stride-th round
    final_priors: PriorVector
    soft_on_support: np.ndarray  # BP soft values at sites where the correction is 1
    before: list[FailureRecord]
    after: list[FailureRecord]
    fit_before: ScalingFit
    fit_after: ScalingFit
    fit_unfloored: ScalingFit  # learned priors used as-is, no background floor

    @property
    def mean_soft_on_support(self) -> float:
        return float(self.soft_on_support.mean()) if self.soft_on_support.size else float("nan")


def run_learning(
    code: CssCode,
    truth: ErrorModel,
    gain: float = DEFAULT_GAIN,
    rounds: int = 2000,
    seed: int = 0,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    sweep_overrides: dict[int, float] | None = None,
    floor_at_background: bool = True,
) -> LearningRun:
    """Learn priors from uniform ``truth.base_rate``, then compare decoders.

    The comparison sweeps the background rate over ``eps_grid`` with the
    bad sites of ``truth`` (or ``sweep_overrides``) kept fixed, decoding once
    with the starting priors and once with the learned ones.

    With a fixed gain the estimate for a rarely flipped qubit decays far
    below its true rate between hits, so by default the learned priors are
    raised to at least the sweep's background rate. ``fit_unfloored`` always
    records the sweep with the learned vector used as-is.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rng = np.random.default_rng(seed)
    decoder = BpOsdDecoder(code.hz)
    initial = PriorVector.uniform(code.n, max(truth.base_rate, P_MIN))
    state = LearningState(initial, gain, stride=history_stride(rounds))
    on_support: list[np.ndarray] = []
    for _ in range(rounds):
        _, result, _ = memory_round(code, truth, state, rng, decoder)
        support = result.correction.support()
        if support:
            on_support.append(np.asarray(result.soft)[list(support)])
    learned = state.priors
    overrides = dict(truth.overrides if sweep_overrides is None else sweep_overrides)

    def truth_for(eps: float) -> ErrorModel:
        return ErrorModel(code.n, eps, overrides)

    before, fit_b = _sweep_priors(code, truth_for, lambda eps: initial, eps_grid, "initial_priors")
    def floored(eps: float) -> PriorVector:
        return PriorVector(np.maximum(learned.p, eps))

    raw, fit_raw = _sweep_priors(code, truth_for, lambda eps: learned, eps_grid, "learned_priors_raw")
    if floor_at_background:
        after, fit_a = _sweep_priors(code, truth_for, floored, eps_grid, "learned_priors")
    else:
        after, fit_a = raw, fit_raw
    log.info("learning seed=%d: exponent %.3f -> %.3f", seed, fit_b.exponent, fit_a.exponent)
    return LearningRun(
        seed=seed,
        rounds=rounds,
        history=np.array(state.history),
        final_priors=learned,
        soft_on_support=np.concatenate(on_support) if on_support else np.zeros(0),
        before=before,
        after=after,
        fit_before=fit_b,
        fit_after=fit_a,
        fit_unfloored=fit_raw,
    )


def gate_flip_probability(theta_tot: float) -> float:
    return math.sin(theta_tot / 2.0) ** 2


def drift_sign(theta_target: float) -> float:
    """Sign of the angle gain: positive iff ``sin(theta_target / 2) > 0``."""
    return 1.0 if math.sin(theta_target / 2.0) > 0 else -1.0


@dataclass
class CalibrationState:
    """Control angle, live priors and the hidden gate offset."""

    theta: float
    theta0: float
    theta_target: float
    gain_theta: float
    learning: LearningState
    target_qubit: int = 0
    history: list[tuple] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not -math.pi < self.theta_target < math.pi:
            raise ValueError("theta_target must lie in (-pi, pi)")
        if not 0 <= self.target_qubit < len(self.learning.priors):
            raise ValueError("target qubit outside the code")

    @property
    def p_target(self) -> float:
        return gate_flip_probability(self.theta_target)

    @property
    def theta_tot(self) -> float:
        return self.theta + self.theta0

    def angle_step(self, b: int) -> float:
        """Change in ``theta`` after observing ``b``."""
        return -drift_sign(self.theta_target) * abs(self.gain_theta) * (b - self.p_target)


def calibration_round(
    code: CssCode,
    state: CalibrationState,
    background: ErrorModel,
    rng: np.random.Generator,
    decoder: BpOsdDecoder | None = None,
) -> CalibrationState:
    """Apply the miscalibrated gate, decode, then update angle and priors in place."""
    q = state.target_qubit
    rates = effective_rates(background)
    if background.n != code.n:
        raise DimensionError("background model does not match the code")
    if rates[q] != 0.0:
        raise ValueError("background must not flip the target qubit; the gate supplies that channel")
    decoder = decoder or BpOsdDecoder(code.hz)
    # theta0 is used only here, to draw the physical flip
    e = (rng.random(code.n) < rates).astype(np.uint8)
    e[q] = rng.random() < gate_flip_probability(state.theta_tot)
    result = decoder.decode(_syndrome(code, e), state.learning.priors)
    b = int(result.correction[q])
    state.theta += state.angle_step(b)
    state.learning.advance(np.asarray(result.soft))
    t = state.learning.round
    if t % state.learning.stride == 0:
        p = state.learning.priors.p
        others = np.delete(p, q)
        state.history.append((t, state.theta, state.theta_tot, b, float(p[q]), float(np.median(others))))
    return state


@dataclass
class CalibrationRun:
    seed: int
    history: list[tuple]
    final_theta: float
    window: tuple[int, int]
    window_flip_rate: float  # mean true flip probability over the window
    window_min_prior: float
    records: list[FailureRecord]
    fit: ScalingFit

    def column(self, name: str) -> np.ndarray:
        return np.array([row[CALIBRATION_FIELDS.index(name)] for row in self.history])

    def mean_flip_rate(self, start: int, stop: int) -> float:
        """Mean of ``sin^2(theta_tot / 2)`` over rounds ``start < t <= stop``."""
        t = self.column("round")
        tot = self.column("theta_tot")[(t > start) & (t <= stop)]
        return float(np.mean(np.sin(tot / 2.0) ** 2))


def run_calibration(
    code: CssCode | None = None,
    theta_target: float = DEFAULT_THETA_TARGET,
    theta0: float = DEFAULT_THETA0,
    gain_theta: float = DEFAULT_GAIN_THETA,
    gain: float = DEFAULT_GAIN,
    epsilon: float = DEFAULT_BACKGROUND,
    rounds: int = 4000,
    seed: int = 0,
    theta_initial: float = 0.0,
    target_qubit: int = 0,
    window: tuple[int, int] | None = None,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
) -> CalibrationRun:
    """Calibrate from ``theta_initial``, then sweep the background rate.

    The sweep freezes the target qubit at its mean flip probability over
    ``window`` (default: the second half of the run) and gives the decoder the
    smallest target prior seen in that window, a pessimistic choice.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    code = code or unrotated_surface(4)
    window = window or (rounds // 2, rounds)
    if not 0 <= window[0] < window[1] <= rounds:
        raise ValueError(f"window {window} not inside 0..{rounds}")
    rng = np.random.default_rng(seed)
    decoder = BpOsdDecoder(code.hz)
    learning = LearningState(PriorVector.uniform(code.n, epsilon), gain, stride=history_stride(rounds))
    state = CalibrationState(theta_initial, theta0, theta_target, gain_theta, learning, target_qubit)
    background = ErrorModel(code.n, epsilon, {target_qubit: 0.0})
    for _ in range(rounds):
        calibration_round(code, state, background, rng, decoder)
    run = CalibrationRun(seed, state.history, state.theta, window, 0.0, 0.0, [], None)
    t = run.column("round")
    in_window = (t > window[0]) & (t <= window[1])
    run.window_flip_rate = run.mean_flip_rate(*window)
    run.window_min_prior = float(run.column("prior_target")[in_window].min())

    def priors_for(eps: float) -> PriorVector:
        p = np.full(code.n, eps)
        p[target_qubit] = run.window_min_prior
        return PriorVector(p)

    run.records, run.fit = _sweep_priors(
        code,
        lambda eps: ErrorModel(code.n, eps, {target_qubit: run.window_flip_rate}),
        priors_for,
        eps_grid,
        "post_calibration",
    )
    log.info("calibration seed=%d: flip rate %.4f (target %.4f), exponent %.3f",
             seed, run.window_flip_rate, state.p_target, run.fit.exponent)
    return run
