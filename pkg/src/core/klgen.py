"""KL_gen bound functions and their conversions to and from useful pairs.

A KL_gen function gamma(s, t) is increasing in s and decreasing in t, with no
continuity or sign requirement. A KL_gen-Fin upper bound (gamma, theta)
satisfies phi(T^k(x)) <= gamma(theta(x), k) with theta bounded on X^in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..errors import CertificateRequiredError, ParameterError, PreconditionError
from ..utils.expr import bind_point, parse
from .pairs import MonotoneBijection, UsefulPair, solve_stop, verify_pair
from .sequences import BoundedSequence
from .settings import SolverSettings
from .systems import DynamicalSystem, nu_oracle

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
T_MAX = 10000


@dataclass(frozen=True)
class KLGenFunction:
    """gamma(s, t); `limit` gives the analytic value as t -> infinity when known."""
    func: Callable[[float, float], float]
    monotonicity_checked: bool = False
    label: str = "gamma"
    limit: Optional[Callable[[float], float]] = None

    def __call__(self, s: float, t: float) -> float:
        return float(self.func(s, t))

    def grid(self, s: Any, t: Any) -> np.ndarray:
        """Values on broadcast arrays of s and t."""
        return np.vectorize(self.__call__, otypes=[float])(s, t)

    def infimum(self, s: float, t_max: int = T_MAX) -> float:
        """inf over t >= 0 of gamma(s, t), estimated on t = 0..t_max."""
        estimate = float(np.min(self.grid(s, np.arange(t_max + 1, dtype=float))))
        if self.limit is not None:
            estimate = min(estimate, float(self.limit(s)))
        return estimate

    def check_monotonicity(self, s_grid: Sequence[float], t_grid: Sequence[float],
                           tolerance: float = TOLERANCE) -> bool:
        """Sampled check: increasing in s, decreasing in t."""
        S, T = np.meshgrid(np.sort(s_grid), np.sort(t_grid), indexing='ij')
        values = self.grid(S, T)
        slack = tolerance * np.maximum(1.0, np.abs(values))
        in_s = np.all(np.diff(values, axis=0) >= -slack[1:, :])
        in_t = np.all(np.diff(values, axis=1) <= slack[:, 1:])
        return bool(in_s and in_t)

    def checked(self, s_grid: Sequence[float], t_grid: Sequence[float]) -> 'KLGenFunction':
        """Copy carrying the result of the monotonicity check."""
        ok = self.check_monotonicity(s_grid, t_grid)
        if not ok:
            logger.warning(f"{self.label} is not monotone on the check grid")
        return replace(self, monotonicity_checked=ok)

    @classmethod
    def from_expression(cls, text: str, parameters: Optional[Dict[str, float]] = None) -> 'KLGenFunction':
        """gamma written in s and t."""
        params = dict(parameters or {})
        expr = parse(text, ["s", "t", *params])
        return cls(lambda s, t: float(expr.evaluate({"s": s, "t": t, **params})), label=text)


@dataclass(frozen=True)
class KLGenUpperBound:
    """(gamma, theta) with theta_sup = sup of theta over X^in."""
    gamma: KLGenFunction
    theta: Callable[[np.ndarray], np.ndarray]
    theta_sup: float
    useful_flag: bool = False

    def bound(self, points: Any, k: float) -> np.ndarray:
        """gamma(theta(x), k) for a batch of points."""
        return self.gamma.grid(np.atleast_1d(self.theta(np.atleast_2d(points))), k)

    def to_dict(self) -> Dict[str, Any]:
        """Convert bound to dictionary."""
        return {'gamma': self.gamma.label, 'theta_sup': self.theta_sup, 'useful': self.useful_flag}


@dataclass
class KLGenReport:
    """Sampled verification of a KL_gen-Fin upper bound."""
    passed: bool
    worst_margin: float
    witness: Optional[Tuple[Tuple[float, ...], int]]
    useful: bool
    samples: int
    horizon: int

    def to_dict(self) -> Dict[str, Any]:
        """Convert report to dictionary."""
        return {
            'passed': self.passed,
            'worst_margin': self.worst_margin,
            'witness': None if self.witness is None else [list(self.witness[0]), self.witness[1]],
            'useful': self.useful,
            'samples': self.samples,
            'horizon': self.horizon,
        }


def _affine_through(x0: float, y0: float, x1: float, y1: float) -> Callable[[float], float]:
    slope = (y1 - y0) / (x1 - x0)
    return lambda x: y0 + slope * (x - x0)


def majorize_decreasing(f: Callable[[float], float], m: float, horizon: int = T_MAX,
                        tolerance: float = TOLERANCE,
                        infimum: Optional[float] = None) -> Callable[[float], float]:
    """Strictly decreasing continuous g >= f with inf g = m.

    f is only evaluated at integers. Its infimum is estimated as f(horizon)
    unless a known `infimum` is lower.
    """
    f_at = lru_cache(maxsize=None)(lambda n: float(f(n)))
    head = np.array([f_at(n) for n in range(horizon + 1)])
    rises = np.flatnonzero(np.diff(head) > tolerance * np.maximum(1.0, np.abs(head[1:])))
    if rises.size:
        bad = int(rises[0])
        raise PreconditionError(f"f increases between {bad} and {bad + 1}")
    inf_f = float(head[-1]) if infimum is None else min(float(head[-1]), infimum)
    if m < inf_f - tolerance * max(1.0, abs(inf_f)):
        raise ParameterError(f"m = {m} lies below the estimated infimum {inf_f}")

    if m >= head[0]:
        return lambda x: m + 1.0 / (x + 1.0)

    def staircase(x: float) -> float:
        if x <= 1.0:
            return f_at(0)
        n = int(math.floor(x))
        if x <= n + 0.5:
            return f_at(n - 1)
        return _affine_through(n + 0.5, f_at(n - 1), n + 1.0, f_at(n))(x)

    if m > inf_f + tolerance * max(1.0, abs(inf_f)):
        return lambda x: max(staircase(x) + 1.0 / (x + 1.0), m + 1.0 / (x + 1.0))
    return lambda x: staircase(x) + 1.0 / (x + 1.0)


def sontag_extension(gamma: KLGenFunction, s: float, m: float,
                     t_max: int = T_MAX) -> MonotoneBijection:
    """h with gamma(s, t) <= h(e^{-t}) for t >= 0 and h(0) = m."""
    if not math.isfinite(m):
        raise ParameterError(f"m must be finite, got {m}")
    floor = gamma.infimum(s, t_max)
    if m < floor - TOLERANCE * max(1.0, abs(floor)):
        raise ParameterError(f"m = {m} lies below inf_t gamma({s}, t) = {floor}")
    sigma = majorize_decreasing(lambda t: gamma(s, t), m, t_max, infimum=floor)

    def h(r: float) -> float:
        return m if r <= 0.0 else float(sigma(-math.log(r)))

    return MonotoneBijection(h, label=f"sontag({gamma.label}, s={s:g}, m={m:g})")


def pair_from_klgen(bound: KLGenUpperBound, seq: BoundedSequence, m: float, K: int,
                    t_max: int = T_MAX) -> UsefulPair:
    """The pair (h, e^{-1}) built from gamma(theta_sup, .)."""
    h = sontag_extension(bound.gamma, bound.theta_sup, m, t_max)
    pair = verify_pair(seq, h, math.exp(-1.0), K)
    logger.info(f"KL_gen bound converted to pair with h(0) = {m}, useful={pair.useful}")
    return pair


def klgen_from_pair(pair: UsefulPair, system: DynamicalSystem, horizon: int,
                    samples: int = 1000, settings: Optional[SolverSettings] = None) -> KLGenUpperBound:
    """gamma(s, t) = min(s, h(beta^t)) and theta = orbit supremum."""
    if not pair.is_verified:
        raise CertificateRequiredError(f"Pair ({pair.h.label}, {pair.beta}) has not been verified")
    settings = settings or SolverSettings()
    h0 = pair.h.h0
    gamma = KLGenFunction(
        lambda s, t: min(s, pair.envelope(t)),
        monotonicity_checked=True,
        label=f"min(s, {pair.h.label}({pair.beta:.6g}^t))",
        limit=lambda s: min(s, h0),
    )
    tail = pair.tail_bound(horizon)

    def theta(points: np.ndarray) -> np.ndarray:
        # Terms beyond the horizon are bounded by the pair's tail.
        return np.maximum(system.orbit_values(points, horizon).max(axis=1), tail)

    sampled = float(np.max(theta(system.initial_set.sample(samples))))
    theta_sup = sampled
    if pair.useful:
        seq = nu_oracle(system, settings.grid, settings.refine_rounds, settings)
        checked = verify_pair(seq, pair.h, pair.beta, horizon, settings.tolerance)
        result = solve_stop(checked.sequence, checked, settings.tolerance, settings.argmax_tolerance,
                            settings.max_stop_horizon)
        if result.K > horizon:
            raise CertificateRequiredError(
                f"Horizon {horizon} is below the stopping index {result.K}; theta cannot be certified")
        theta_sup = max(sampled, result.max_value)
        useful = gamma.infimum(theta_sup, settings.klgen_t_max) < result.max_value
    else:
        useful = False

    logger.info(f"Pair converted to KL_gen bound with theta_sup = {theta_sup:.6g}, useful={useful}")
    return KLGenUpperBound(gamma, theta, theta_sup, useful)


def klgen_from_expressions(gamma_text: str, theta_text: str, dim: int,
                           theta_sup: Optional[float] = None,
                           parameters: Optional[Dict[str, float]] = None,
                           system: Optional[DynamicalSystem] = None,
                           samples: int = 1000) -> KLGenUpperBound:
    """Bound given as expressions: gamma in s, t and theta in x1..xd."""
    params = dict(parameters or {})
    gamma = KLGenFunction.from_expression(gamma_text, params)
    theta_expr = parse(theta_text, [f"x{i + 1}" for i in range(dim)] + list(params))

    def theta(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        value = theta_expr.evaluate(bind_point(points, params))
        return np.broadcast_to(np.asarray(value, dtype=float), (points.shape[0],))

    if theta_sup is None:
        if system is None:
            raise ParameterError("theta_sup must be given when no system is available to sample")
        theta_sup = float(np.max(theta(system.initial_set.sample(samples))))
    return KLGenUpperBound(gamma, theta, float(theta_sup))


def verify_klgen_bound(bound: KLGenUpperBound, system: DynamicalSystem, horizon: int,
                       samples: int = 1000, nu_values: Optional[Sequence[float]] = None,
                       t_max: int = T_MAX) -> KLGenReport:
    """Worst margin of gamma(theta(x), k) - phi(T^k(x)) over sampled orbits."""
    points = system.initial_set.sample(samples)
    values = system.orbit_values(points, horizon)
    thetas = np.atleast_1d(bound.theta(points)).astype(float)
    ks = np.arange(horizon + 1, dtype=float)
    margins = bound.gamma.grid(thetas[:, None], ks[None, :]) - values

    i, k = np.unravel_index(int(np.argmin(margins)), margins.shape)
    worst = float(margins[i, k])
    slack = TOLERANCE * max(1.0, abs(float(values[i, k])))
    passed = worst >= -slack
    witness = None if passed else (tuple(float(v) for v in points[i]), int(k))
    if not passed:
        logger.warning(f"KL_gen bound violated at x={witness[0]}, k={k}: margin {worst}")

    peaks = np.asarray(nu_values, dtype=float) if nu_values is not None else values.max(axis=0)
    useful = bool(bound.gamma.infimum(bound.theta_sup, t_max) < float(np.max(peaks)))
    return KLGenReport(passed, worst, witness, useful, int(points.shape[0]), horizon)
