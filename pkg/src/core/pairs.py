"""Useful pairs (h, beta) and the stopping-index formula.

A pair dominates a sequence when u_k <= h(beta^k) for every k. It is useful
when some u_k exceeds h(0); then

    F(k) = ln(h^{-1}(u_k)) / ln(beta)

is finite on S(u, h) = {k : u_k > h(0)} and floor(F(k)) bounds the greatest
maximizer of u.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from ..errors import (
    CertificateRequiredError,
    DomainError,
    EnvelopeClassError,
    NotUsefulError,
    ParameterError,
    PreconditionError,
    ViolationError,
)
from ..utils.expr import parse
from .sequences import ARGMAX_TOLERANCE, BoundedSequence

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
INVERSION_TOLERANCE = 1e-12
INVERSION_MAX_ITER = 200
MAX_STOP_HORIZON = 100000
MONOTONICITY_SAMPLES = 1001


def _slack(value: float, tolerance: float) -> float:
    return tolerance * max(1.0, abs(value))


@dataclass(frozen=True)
class MonotoneBijection:
    """Strictly increasing continuous function on [0, 1]."""
    func: Callable[[float], float]
    inverse_hint: Optional[Callable[[float], float]] = None
    label: str = "h"

    def __call__(self, x: float) -> float:
        return float(self.func(x))

    @property
    def h0(self) -> float:
        """Value at 0."""
        return self(0.0)

    @property
    def h1(self) -> float:
        """Value at 1."""
        return self(1.0)

    def inverse(self, y: float) -> float:
        """Inverse on [h(0), h(1)]."""
        return inverse_eval(self, y)

    def is_strictly_increasing(self, samples: int = 1001) -> bool:
        """Sampled strict monotonicity on [0, 1]."""
        values = np.array([self(x) for x in np.linspace(0.0, 1.0, samples)])
        return bool(np.all(np.diff(values) > 0))

    @classmethod
    def linear(cls, a: float) -> 'MonotoneBijection':
        """x -> a*x."""
        return cls.affine(a, 0.0)

    @classmethod
    def affine(cls, a: float, c: float) -> 'MonotoneBijection':
        """x -> a*x + c with a > 0."""
        if not a > 0:
            raise ParameterError(f"Affine envelope needs a positive slope, got {a}")
        label = f"{a!r}*x" if c == 0 else f"{a!r}*x + {c!r}"
        return cls(lambda x: a * x + c, lambda y: (y - c) / a, label)

    @classmethod
    def from_expression(cls, text: str, inverse_text: Optional[str] = None,
                        parameters: Optional[Dict[str, float]] = None) -> 'MonotoneBijection':
        """Envelope written in x, with an optional inverse written in y."""
        params = dict(parameters or {})
        expr = parse(text, ["x", *params])
        func = lambda x: float(expr.evaluate({"x": x, **params}))
        inverse = None
        if inverse_text:
            inv_expr = parse(inverse_text, ["y", *params])
            inverse = lambda y: float(inv_expr.evaluate({"y": y, **params}))
        return cls(func, inverse, text)


@dataclass(frozen=True)
class UsefulPair:
    """Envelope pair (h, beta) with its verification record."""
    h: MonotoneBijection
    beta: float
    verified_horizon: int = -1
    useful_witness: Optional[int] = None
    support: Tuple[int, ...] = ()
    max_at_start: bool = False
    sequence: Optional[BoundedSequence] = field(default=None, repr=False, compare=False)

    @property
    def is_verified(self) -> bool:
        return self.verified_horizon >= 0

    @property
    def useful(self) -> bool:
        return self.useful_witness is not None

    def envelope(self, k: float) -> float:
        """h(beta^k)."""
        return self.h(self.beta ** k)

    def tail_bound(self, k: int) -> float:
        """Certified bound on sup_{j>k} u_j."""
        return self.envelope(k + 1)

    def to_dict(self) -> Dict[str, Any]:
        """Convert pair to dictionary."""
        return {
            'h': self.h.label,
            'h0': self.h.h0,
            'h1': self.h.h1,
            'beta': self.beta,
            'verified_horizon': self.verified_horizon,
            'useful_witness': self.useful_witness,
            'max_at_start': self.max_at_start,
        }


@dataclass(frozen=True)
class StoppingReport:
    """Value of the stopping formula at one index.

    `floor_F` is the last j with h(beta^j) >= u_k - slack, where slack is
    tolerance * max(1, |u_k|). When u_k lies within slack above an envelope
    value h(beta^j), that j still counts, so `minimal_drop_index` can be one
    more than the exact least j with h(beta^j) < u_k.
    """
    F_value: float
    floor_F: Optional[int]
    minimal_drop_index: Optional[int]
    input_k: int
    slack: float = 0.0

    @property
    def finite(self) -> bool:
        return self.floor_F is not None

    def to_dict(self) -> Dict[str, Any]:
        """Convert report to dictionary."""
        return asdict(self)


@dataclass
class StopResult:
    """Outcome of the adaptive stopping loop."""
    K: int
    max_value: float
    argmax: List[int]
    formula_evaluations: int = 0

    def to_dict(self) -> Dict[str, Any]:
        """Convert result to dictionary."""
        return asdict(self)


class CombineMode(Enum):
    MIN = "min"
    MAX = "max"
    CONVEX = "convex"


def inverse_eval(h: MonotoneBijection, y: float,
                 tolerance: float = INVERSION_TOLERANCE,
                 max_iter: int = INVERSION_MAX_ITER) -> float:
    """x in [0, 1] with h(x) = y, by closed form when available else bisection."""
    h0, h1 = h.h0, h.h1
    slack = _slack(y, TOLERANCE)
    if y < h0 - slack or y > h1 + slack:
        raise DomainError(f"{y} lies outside [h(0), h(1)] = [{h0}, {h1}]")
    if y >= h1:
        return 1.0
    if y <= h0:
        return 0.0
    if h.inverse_hint is not None:
        return float(np.clip(h.inverse_hint(y), 0.0, 1.0))
    try:
        return float(brentq(lambda x: h(x) - y, 0.0, 1.0, xtol=tolerance, maxiter=max_iter))
    except (ValueError, RuntimeError) as e:
        logger.error(f"Inversion of {h.label} at {y} failed: {e}")
        raise DomainError(f"Cannot invert {h.label} at {y}: {e}") from e


def verify_pair(seq: BoundedSequence, h: MonotoneBijection, beta: float, K: int,
                tolerance: float = TOLERANCE) -> UsefulPair:
    """Check u_k <= h(beta^k) on [0, K] and record S(u, h) on that prefix."""
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    h0, h1 = h.h0, h.h1
    if not h1 > h0 or not h.is_strictly_increasing(MONOTONICITY_SAMPLES):
        raise ParameterError(f"{h.label} is not strictly increasing on [0, 1]")

    support: List[int] = []
    first = None
    for k in range(K + 1):
        u = seq.eval(k)
        if k == 0:
            first = u
        bound = h(beta ** k)
        if u > bound + _slack(bound, tolerance):
            logger.error(f"Pair ({h.label}, {beta}) fails at k={k}: {u} > {bound}")
            raise ViolationError(f"{seq.label}_{k} = {u} exceeds h(beta^{k}) = {bound}",
                                 witness=(k, u, bound))
        if u - _slack(u, tolerance) > h0:
            support.append(k)

    max_at_start = first is not None and abs(first - h1) <= _slack(h1, tolerance)
    pair = UsefulPair(
        h=h,
        beta=beta,
        verified_horizon=K,
        useful_witness=support[0] if support else None,
        support=tuple(support),
        max_at_start=max_at_start,
    )
    if pair.useful:
        logger.info(f"Pair ({h.label}, {beta:.6g}) verified on [0, {K}], useful from k={pair.useful_witness}")
    else:
        logger.info(f"Pair ({h.label}, {beta:.6g}) verified on [0, {K}] but not useful")
    return replace(pair, sequence=seq.with_tail_bound(pair.tail_bound))


def verify_until_useful(seq: BoundedSequence, h: MonotoneBijection, beta: float, max_horizon: int,
                        tolerance: float = TOLERANCE) -> UsefulPair:
    """Verify (h, beta) up to the first term above h(0), reading no further."""
    h0 = h.h0
    for k in range(max_horizon + 1):
        u = seq.eval(k)
        if u - _slack(u, tolerance) > h0:
            return verify_pair(seq, h, beta, k, tolerance)
    raise NotUsefulError(f"No term of {seq.label} exceeds h(0) = {h0} within [0, {max_horizon}]")


def beta_infimum(seq: BoundedSequence, h: MonotoneBijection, K: int) -> float:
    """Least beta making (h, beta) dominate u on [0, K]; 0 if any beta works."""
    h0, h1 = h.h0, h.h1
    best = 0.0
    for k in range(K + 1):
        u = seq.eval(k)
        if k == 0:
            if u > h1 + _slack(h1, TOLERANCE):
                raise EnvelopeClassError(f"{seq.label}_0 = {u} exceeds h(1) = {h1}")
            continue
        if u >= h1:
            raise EnvelopeClassError(f"{seq.label}_{k} = {u} reaches h(1) = {h1}")
        if u - _slack(u, TOLERANCE) > h0:
            best = max(best, math.exp(math.log(inverse_eval(h, u)) / k))
    return best


def beta_interval(seq: BoundedSequence, h: MonotoneBijection, K: int) -> Tuple[float, bool]:
    """(beta_inf, closed): admissible betas form [beta_inf, 1) or (0, 1)."""
    lower = beta_infimum(seq, h, K)
    return lower, lower > 0


def combine(h1: MonotoneBijection, h2: MonotoneBijection,
            mode: Union[CombineMode, str], t: Optional[float] = None) -> MonotoneBijection:
    """Pointwise min, max or convex combination of two envelopes."""
    mode = CombineMode(mode)
    if mode is CombineMode.CONVEX:
        if t is None or not 0.0 <= t <= 1.0:
            raise ParameterError(f"Convex combination needs t in [0, 1], got {t}")
        return MonotoneBijection(lambda x: t * h1(x) + (1.0 - t) * h2(x),
                                 label=f"{t!r}*({h1.label}) + {1.0 - t!r}*({h2.label})")
    if t is not None:
        raise ParameterError("t is only meaningful for convex combinations")
    if mode is CombineMode.MIN:
        return MonotoneBijection(lambda x: min(h1(x), h2(x)), label=f"min({h1.label}, {h2.label})")
    return MonotoneBijection(lambda x: max(h1(x), h2(x)), label=f"max({h1.label}, {h2.label})")


def _last_index_above(pair: UsefulPair, u: float, start: int, slack: float) -> int:
    j = start
    while pair.envelope(j + 1) >= u - slack and j < MAX_STOP_HORIZON:
        j += 1
    while j > 0 and pair.envelope(j) < u - slack:
        j -= 1
    return j


def formula_F(seq: BoundedSequence, k: int, pair: UsefulPair,
              tolerance: float = TOLERANCE) -> StoppingReport:
    """Stopping formula at k; +inf outside S(u, h)."""
    if not pair.is_verified:
        raise CertificateRequiredError(f"Pair ({pair.h.label}, {pair.beta}) has not been verified")
    u = seq.eval(k)
    h0, h1 = pair.h.h0, pair.h.h1
    slack = _slack(u, tolerance)
    if u - slack <= h0:
        return StoppingReport(math.inf, None, None, k, slack)
    if k == 0 and abs(u - h1) <= _slack(h1, tolerance):
        return StoppingReport(0.0, 0, 1, k, slack)

    x = inverse_eval(pair.h, min(u, h1))
    F = math.log(x) / math.log(pair.beta)
    # The float value of F can land just below an exact integer; the drop index
    # is decided on the envelope itself.
    floor_F = _last_index_above(pair, u, max(int(math.floor(F)), 0), slack)
    logger.debug(f"F({k}) = {F!r}, floor {floor_F}")
    return StoppingReport(F, floor_F, floor_F + 1, k, slack)


def solve_stop(seq: BoundedSequence, pair: UsefulPair,
               tolerance: float = TOLERANCE,
               argmax_tolerance: float = ARGMAX_TOLERANCE,
               max_horizon: int = MAX_STOP_HORIZON,
               prefetch: Optional[Callable[[range], None]] = None) -> StopResult:
    """Enumerate u until the stopping index of the current record term.

    `prefetch` is handed the indices still to read whenever the stopping
    index is finite. A later record may lower the index, so terms handed
    out that way can lie past the returned K.
    """
    if not pair.is_verified:
        raise CertificateRequiredError(f"Pair ({pair.h.label}, {pair.beta}) has not been verified")
    if not pair.useful:
        raise NotUsefulError(f"Pair ({pair.h.label}, {pair.beta}) is not useful for {seq.label}")
    if pair.max_at_start:
        first = seq.eval(0)
        logger.info(f"{seq.label}_0 = h(1): the first term is the maximum")
        return StopResult(K=0, max_value=first, argmax=[0], formula_evaluations=0)

    stop: float = math.inf
    record = -math.inf
    argmax: List[int] = []
    evaluations = 0
    k = 0
    while k <= stop:
        if k > max_horizon:
            raise NotUsefulError(f"No finite stopping index for {seq.label} within {max_horizon} terms")
        if prefetch is not None and stop < math.inf:
            prefetch(range(k, int(stop) + 1))
        u = seq.eval(k)
        bound = pair.envelope(k)
        if u > bound + _slack(bound, tolerance):
            logger.error(f"Pair violated at k={k}: {u} > {bound}")
            raise ViolationError(f"{seq.label}_{k} = {u} exceeds h(beta^{k}) = {bound}",
                                 witness=(k, u, bound))
        if u > record + argmax_tolerance:
            record = u
            argmax = [k]
            report = formula_F(seq, k, pair, tolerance)
            evaluations += 1
            if report.finite:
                stop = min(stop, report.floor_F)
        elif abs(u - record) <= argmax_tolerance:
            argmax.append(k)
        k += 1

    logger.info(f"Stopped {seq.label} at K={int(stop)}: max {record} at {argmax}")
    return StopResult(K=int(stop), max_value=record, argmax=argmax, formula_evaluations=evaluations)


def optimal_affine(prefix: Sequence[float], K_s: int, N_c: int, c: float,
                   tolerance: float = ARGMAX_TOLERANCE) -> Tuple[float, float]:
    """(a, b) with u_k <= a*b^k + c on the prefix and equality at K_s."""
    values = np.asarray(prefix, dtype=float)
    if values.size < N_c + 1:
        raise PreconditionError(f"Prefix must cover [0, {N_c}], got {values.size} terms")
    if not 0 <= K_s < N_c:
        raise ParameterError(f"Need 0 <= K_s < N_c, got K_s={K_s}, N_c={N_c}")
    top = values[K_s]
    if top < values.max() - tolerance or np.any(values[K_s + 1:] >= top - tolerance):
        raise PreconditionError(f"K_s={K_s} is not the greatest prefix maximizer")
    if not c < top:
        raise ParameterError(f"c={c} must lie below u_K_s = {top}")
    if np.any(values[N_c:] > c):
        raise ParameterError(f"c={c} must dominate the terms from N_c={N_c} on")

    ks = np.arange(K_s + 1, N_c + 1)
    gamma = float(np.max((top - values[ks]) / (K_s - ks)))
    gap = top - c
    b = math.exp(gamma / gap)
    a = gap * math.exp(-K_s * gamma / gap)
    logger.debug(f"Optimal affine envelope: a={a!r}, b={b!r}, c={c!r}")
    return a, b


def affine_pair(seq: BoundedSequence, a: float, b: float, c: float, K: int) -> UsefulPair:
    """Verify the pair (x -> a*x + c, b) on [0, K]."""
    return verify_pair(seq, MonotoneBijection.affine(a, c), b, K)
