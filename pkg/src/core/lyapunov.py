"""Opt-Lyapunov functions, operator ratios and compatibility certificates.

An Opt-Lyapunov function V takes values in [0, +inf], satisfies
V(T(x)) <= lambda * V(x) and has sup over X^in in (0, 1]. A certificate alpha
links it to the objective: alpha(phi(T^k(x))) <= V(T^k(x)) along orbits from
X^in, with alpha(nu_k) > 0 for some k. Values of +inf are plain `math.inf`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from ..errors import (
    DegenerateInputError,
    DomainError,
    NotUsefulError,
    ParameterError,
    PreconditionError,
    ValueRangeError,
    ViolationError,
)
from ..utils.expr import bind_point, parse
from .pairs import INVERSION_MAX_ITER, MonotoneBijection, UsefulPair, inverse_eval, verify_pair
from .sequences import BoundedSequence
from .settings import SolverSettings
from .systems import DynamicalSystem, InitialSet, nu_oracle

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
FIXED_POINT_DELTA = 1e-8
ORBIT_STEPS = 10
ROOT_TOLERANCE = 1e-15


@dataclass(frozen=True)
class PsdFunction:
    """Extended nonnegative function on R^d acting on batches of points."""
    func: Callable[[np.ndarray], np.ndarray]
    positivity_witness: Optional[Tuple[float, ...]] = None
    label: str = "V"

    def __call__(self, points: Any) -> Any:
        single = np.ndim(points) == 1
        batch = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.broadcast_to(np.asarray(self.func(batch), dtype=float), (batch.shape[0],))
        return float(values[0]) if single else np.array(values)

    @classmethod
    def from_expression(cls, text: str, dim: int, parameters: Optional[Dict[str, float]] = None,
                        positivity_witness: Optional[Tuple[float, ...]] = None) -> 'PsdFunction':
        """V written in x1..xd."""
        params = dict(parameters or {})
        expr = parse(text, [f"x{i + 1}" for i in range(dim)] + list(params))
        return cls(lambda X: expr.evaluate(bind_point(X, params)), positivity_witness, text)


@dataclass(frozen=True)
class OptLyapunovCandidate:
    """A verified Opt-Lyapunov function with its decrement data."""
    V: PsdFunction
    lambda_: float
    V_sup: float
    ratio: float

    def to_dict(self) -> Dict[str, Any]:
        """Convert candidate to dictionary."""
        return {'V': self.V.label, 'lambda': self.lambda_, 'V_sup': self.V_sup, 'ratio': self.ratio}


@dataclass(frozen=True)
class CompatibilityCertificate:
    """Strictly increasing alpha with alpha(interval) = [0, 1]."""
    alpha: Callable[[float], float]
    interval: Tuple[float, float]
    checked_domain: Optional[Tuple[float, float]] = None
    alpha_inverse: Optional[Callable[[float], float]] = None
    label: str = "alpha"

    def __call__(self, s: Any) -> Any:
        if np.ndim(s) == 0:
            return float(self.alpha(float(s)))
        return np.array([float(self.alpha(float(v))) for v in np.ravel(s)]).reshape(np.shape(s))

    def inverse(self, y: float) -> float:
        """Preimage of y in [0, 1] inside the interval."""
        lo, hi = self.interval
        if not -TOLERANCE <= y <= 1.0 + TOLERANCE:
            raise DomainError(f"{y} lies outside alpha(I) = [0, 1]")
        y = min(max(y, 0.0), 1.0)
        if self.alpha_inverse is not None:
            return float(self.alpha_inverse(y))
        if y <= self(lo):
            return lo
        if y >= self(hi):
            return hi
        return float(brentq(lambda s: self(s) - y, lo, hi, xtol=1e-12, maxiter=INVERSION_MAX_ITER))

    def to_dict(self) -> Dict[str, Any]:
        """Convert certificate to dictionary."""
        return {'alpha': self.label, 'interval': list(self.interval),
                'checked_domain': None if self.checked_domain is None else list(self.checked_domain)}


@dataclass
class RatioReport:
    """Sampled operator ratio and the N(T) class check."""
    ratio: float
    in_class_N: bool
    samples_used: int


@dataclass
class CertificateReport:
    """Sampled verification of a compatibility certificate."""
    passed: bool
    worst_margin: float
    witness: Optional[Tuple[Tuple[float, ...], int]]
    monotone: bool
    positive_somewhere: bool
    checked_domain: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        """Convert report to dictionary."""
        return {
            'passed': self.passed,
            'worst_margin': self.worst_margin,
            'witness': None if self.witness is None else [list(self.witness[0]), self.witness[1]],
            'monotone': self.monotone,
            'positive_somewhere': self.positive_somewhere,
            'checked_domain': list(self.checked_domain),
        }


@dataclass(frozen=True)
class ImmediateOptimum:
    """The operator ratio vanished: nu_0 is the optimum and K^s = 0."""
    K_s: int
    nu_opt: float


@dataclass
class YoshizawaResult:
    """Opt-Lyapunov function built from a useful pair, with its certificate."""
    V: PsdFunction
    h_hat: CompatibilityCertificate
    truncated: bool
    V_sup: float


def ambient_box(initial_set: InitialSet, scale: float = 2.0) -> InitialSet:
    """Box around the initial set, enlarged about its centre."""
    lo, hi = initial_set.bounding_box()
    centre, half = (lo + hi) / 2.0, np.maximum((hi - lo) / 2.0, 0.5)
    return InitialSet.box(centre - scale * half, centre + scale * half)


def _sample_points(system: DynamicalSystem, samples: int, seed: int,
                   ambient: Optional[InitialSet], orbit_steps: int = ORBIT_STEPS) -> np.ndarray:
    init = system.initial_set
    start = init.point(init.grid(samples))
    rows = [start]
    current = start
    for _ in range(orbit_steps):
        current = system.step(current)
        rows.append(current)
    rows.append((ambient or ambient_box(init)).sample(samples, seed))
    return np.vstack(rows)


def operator_ratio(P: PsdFunction, system: DynamicalSystem, k: int = 1, samples: int = 1000,
                   seed: int = 0, ambient: Optional[InitialSet] = None) -> RatioReport:
    """Sampled sup of P(T^k(x)) / P(x) over points with P(x) finite and positive."""
    points = _sample_points(system, samples, seed, ambient)
    if P.positivity_witness is not None:
        points = np.vstack([points, np.asarray(P.positivity_witness, dtype=float)[None, :]])
    base = P(points)
    after_one = P(system.iterate(points, 1))
    after_two = P(system.iterate(points, 2))
    after_k = P(system.iterate(points, k))

    usable = np.isfinite(base) & (base > 0)
    if not np.any(usable):
        raise DegenerateInputError(f"No sampled point has {P.label} finite and positive")
    with np.errstate(invalid='ignore'):
        ratio = float(np.max(after_k[usable] / base[usable]))
    in_class = not np.any((after_one <= 0) & (after_two > 0))
    if not in_class:
        logger.warning(f"{P.label} leaves the class N(T): P(T(x)) = 0 but P(T^2(x)) > 0 on a sample")
    return RatioReport(ratio, bool(in_class), int(np.count_nonzero(usable)))


def verify_opt_lyapunov(V: PsdFunction, system: DynamicalSystem, lambda_: float,
                        samples: int = 1000, seed: int = 0, ambient: Optional[InitialSet] = None,
                        tolerance: float = TOLERANCE,
                        fixed_point_delta: float = FIXED_POINT_DELTA) -> OptLyapunovCandidate:
    """Sampled check of the three defining conditions plus fixed-point values."""
    if not 0.0 < lambda_ < 1.0:
        raise ParameterError(f"lambda must lie in (0, 1), got {lambda_}")
    points = _sample_points(system, samples, seed, ambient)
    values = V(points)
    if np.any(np.isnan(values)) or np.any(values < -tolerance):
        i = int(np.flatnonzero(np.isnan(values) | (values < -tolerance))[0])
        raise ViolationError(f"{V.label} is negative at {points[i].tolist()}", witness=tuple(points[i]))

    images = system.step(points)
    after = V(images)
    finite = np.isfinite(values)
    bound = lambda_ * values[finite]
    excess = after[finite] - bound - tolerance * np.maximum(1.0, bound)
    if np.any(excess > 0):
        i = int(np.flatnonzero(finite)[int(np.argmax(excess))])
        logger.error(f"Decrement fails at {points[i].tolist()}: {after[i]} > {lambda_} * {values[i]}")
        raise ViolationError(f"{V.label}(T(x)) > {lambda_} * {V.label}(x) at x = {points[i].tolist()}",
                             witness=tuple(float(v) for v in points[i]))

    moved = np.linalg.norm(images - points, axis=1)
    fixed = (moved <= fixed_point_delta) & finite & (values > 1e-6)
    if np.any(fixed):
        i = int(np.flatnonzero(fixed)[0])
        raise ViolationError(f"{V.label} is finite and nonzero at the fixed point {points[i].tolist()}",
                             witness=tuple(float(v) for v in points[i]))

    init = system.initial_set
    V_sup = float(np.max(V(init.point(init.grid(samples)))))
    if not 0.0 < V_sup <= 1.0 + tolerance:
        raise ValueRangeError(f"sup of {V.label} over X^in is {V_sup}, outside (0, 1]")

    ratio = operator_ratio(V, system, 1, samples, seed, ambient).ratio
    logger.info(f"{V.label} verified with lambda = {lambda_}, sup {V_sup:.6g}, sampled ratio {ratio:.6g}")
    return OptLyapunovCandidate(V, lambda_, min(V_sup, 1.0), ratio)


def certificate_from_margins(nu_opt: float, epsilon: float, eta: float) -> CompatibilityCertificate:
    """alpha(s) = s - nu_opt + min(eta, epsilon)."""
    if not epsilon > 0 or not eta > 0:
        raise ParameterError(f"Margins must be positive, got epsilon={epsilon}, eta={eta}")
    c = min(eta, epsilon)
    return CompatibilityCertificate(
        alpha=lambda s: s - nu_opt + c,
        interval=(nu_opt - c, nu_opt - c + 1.0),
        alpha_inverse=lambda y: y + nu_opt - c,
        label=f"s - {nu_opt!r} + {c!r}",
    )


def verify_certificate(cert: CompatibilityCertificate, V: PsdFunction, system: DynamicalSystem,
                       horizon: int, samples: int = 1000,
                       nu_values: Optional[np.ndarray] = None,
                       tolerance: float = TOLERANCE) -> CertificateReport:
    """Monotonicity, positivity at some nu_k and alpha(phi) <= V along orbits."""
    init = system.initial_set
    points = init.point(init.grid(samples))
    phis = system.orbit_values(points, horizon)
    nus = np.asarray(nu_values, dtype=float) if nu_values is not None else phis.max(axis=0)

    lo_I, hi_I = cert.interval
    domain = (min(lo_I, float(np.min(nus))), max(hi_I, float(np.max(nus))))
    grid = np.linspace(domain[0], domain[1], 1001)
    alphas = cert(grid)
    monotone = bool(np.all(np.diff(alphas) > 0)
                    and abs(cert(lo_I)) <= 1e-6 and abs(cert(hi_I) - 1.0) <= 1e-6)
    positive = bool(np.any(cert(nus) > 0))

    worst, witness = math.inf, None
    current = points
    for k in range(horizon + 1):
        margins = V(current) - cert(phis[:, k])
        margins = np.where(np.isnan(margins), math.inf, margins)
        i = int(np.argmin(margins))
        if margins[i] < worst:
            worst = float(margins[i])
            witness = (tuple(float(v) for v in points[i]), k)
        if k < horizon:
            current = system.step(current)
    passed_pointwise = worst >= -tolerance * max(1.0, abs(worst))
    passed = monotone and positive and passed_pointwise
    if not passed:
        logger.warning(f"Certificate {cert.label} fails: monotone={monotone}, positive={positive}, "
                       f"worst margin {worst} at {witness}")
    return CertificateReport(passed, worst, None if passed_pointwise else witness,
                             monotone, positive, domain)


def pair_from_lyapunov(cand: OptLyapunovCandidate, cert: CompatibilityCertificate,
                       seq: BoundedSequence, K: int) -> Union[UsefulPair, ImmediateOptimum]:
    """The pair (x -> alpha^{-1}(x * V_sup), ratio), or the immediate optimum when ratio is 0."""
    if cand.ratio <= 0:
        nu_0 = seq.eval(0)
        logger.info(f"Operator ratio is 0: nu_0 = {nu_0} is the optimum")
        return ImmediateOptimum(0, nu_0)

    V_sup = cand.V_sup
    h = MonotoneBijection(lambda x: cert.inverse(x * V_sup), label=f"{cert.label}^-1(x*{V_sup:g})")
    try:
        pair = verify_pair(seq, h, cand.ratio, K)
    except ViolationError as e:
        logger.warning(f"Sampled ratio {cand.ratio} too optimistic ({e}); using lambda = {cand.lambda_}")
        pair = verify_pair(seq, h, cand.lambda_, K)
    if not pair.useful:
        raise NotUsefulError(f"Pair from {cand.V.label} is not useful on [0, {K}]")
    return pair


def yoshizawa_construct(pair: UsefulPair, system: DynamicalSystem, k_max: int = 1000,
                        samples: int = 1000) -> YoshizawaResult:
    """V(x) = sup_k beta^{-k} h^{-1}(omega(phi(T^k(x)))), omega clamping to [h(0), h(1)]."""
    if not pair.useful:
        raise NotUsefulError(f"Pair ({pair.h.label}, {pair.beta}) is not useful")
    h, beta = pair.h, pair.beta
    h0, h1 = h.h0, h.h1

    def pull_back(values: np.ndarray) -> np.ndarray:
        clamped = np.clip(values, h0, h1)
        out = np.zeros_like(clamped)
        inside = clamped > h0
        out[inside] = [inverse_eval(h, float(v)) for v in clamped[inside]]
        return out

    def sweep(X: np.ndarray) -> Tuple[np.ndarray, bool]:
        # A diverged orbit is frozen with its last finite term; the sweep is
        # truncated only if some orbit still pulls back above h(0) when it ends.
        current = np.array(X, dtype=float)
        best = pull_back(system.phi(current))
        last_positive = best > 0
        rows = np.arange(current.shape[0])
        for k in range(1, k_max + 1):
            if rows.size == 0:
                break
            nxt = np.asarray(system.map_T(current[rows]), dtype=float).reshape(rows.size, -1)
            finite = np.all(np.isfinite(nxt) & (np.abs(nxt) <= system.divergence_threshold), axis=1)
            if not np.all(finite):
                logger.debug(f"{int(np.sum(~finite))} orbits left the divergence threshold at k={k}")
            rows, nxt = rows[finite], nxt[finite]
            if rows.size == 0:
                break
            current[rows] = nxt
            terms = pull_back(system.phi(nxt))
            last_positive[rows] = terms > 0
            best[rows] = np.maximum(best[rows], terms / beta ** k)
        return best, bool(np.any(last_positive))

    V = PsdFunction(lambda X: sweep(X)[0], label=f"yoshizawa({h.label}, {beta:.6g})")
    init = system.initial_set
    sup_values, truncated = sweep(init.point(init.grid(samples)))
    if truncated:
        logger.warning(f"Supremum not stabilized within k_max = {k_max}; V is a truncation")

    h_hat = CompatibilityCertificate(
        alpha=lambda s: s - h0 if s <= h0 else (inverse_eval(h, s) if s <= h1 else 1.0 + s - h1),
        interval=(h0, h1),
        alpha_inverse=lambda y: h(y),
        label=f"hhat({h.label})",
    )
    return YoshizawaResult(V, h_hat, truncated, float(np.max(sup_values)))


def _locate(x: float, down: Callable[[float], float], up: Callable[[float], float],
            lo: float, hi: float, max_steps: int = 100000) -> Tuple[float, int]:
    """Move x into [lo, hi) and count the steps taken down (positive) or up (negative)."""
    steps = 0
    while x >= hi:
        x = down(x)
        steps += 1
        if steps > max_steps:
            raise PreconditionError("Orbit does not reach the fundamental interval")
    while x < lo:
        x = up(x)
        steps -= 1
        if -steps > max_steps:
            raise PreconditionError("Orbit does not reach the fundamental interval")
    return x, steps


def _numeric_inverse(f: Callable[[float], float], expanding: bool) -> Callable[[float], float]:
    def inverse(y: float) -> float:
        if y <= 0:
            return 0.0
        if expanding:
            lo, hi = 0.0, y
        else:
            lo, hi = y, 2.0 * y
            while f(hi) < y:
                hi *= 2.0
                if hi > 1e12:
                    raise PreconditionError(f"f is not invertible at {y}")
        return float(brentq(lambda x: f(x) - y, lo, hi, xtol=ROOT_TOLERANCE, maxiter=INVERSION_MAX_ITER))
    return inverse


def kappa_conjugacy(f: Callable[[float], float], factor: float, contraction: bool = False,
                    inverse: Optional[Callable[[float], float]] = None, x_max: float = 10.0,
                    samples: int = 1000) -> Callable[[Any], Any]:
    """Strictly increasing g with g(0) = 0 and g(f(x)) = factor * g(x).

    Built on the fundamental interval between 1 and f(1) by an affine seed and
    extended along orbits of f.
    """
    grid = np.linspace(x_max / samples, x_max, samples)
    fx = np.array([f(x) for x in grid])
    if contraction:
        if not 0.0 < factor < 1.0:
            raise PreconditionError(f"Contraction mode needs factor in (0, 1), got {factor}")
        if not np.all(fx < grid):
            bad = float(grid[np.flatnonzero(fx >= grid)[0]])
            raise PreconditionError(f"f(x) < x fails at x = {bad}")
    else:
        if not factor > 1.0:
            raise PreconditionError(f"Expansion mode needs factor > 1, got {factor}")
        if not np.all(fx > grid):
            bad = float(grid[np.flatnonzero(fx <= grid)[0]])
            raise PreconditionError(f"f(x) > x fails at x = {bad}")
    if not np.all(np.diff(fx) > 0):
        raise PreconditionError("f is not strictly increasing on the sample grid")

    f_inv = inverse or _numeric_inverse(f, expanding=not contraction)
    one = float(f(1.0))
    if contraction:
        lo, hi, g_lo, g_hi = one, 1.0, factor, 1.0
        down, up, per_step = f, f_inv, 1.0 / factor
    else:
        lo, hi, g_lo, g_hi = 1.0, one, 1.0, factor
        down, up, per_step = f_inv, f, factor
    slope = (g_hi - g_lo) / (hi - lo)

    def g_scalar(x: float) -> float:
        if x <= 0:
            return 0.0
        y, steps = _locate(float(x), down, up, lo, hi)
        return per_step ** steps * (g_lo + slope * (y - lo))

    def g(x: Any) -> Any:
        if np.ndim(x) == 0:
            return g_scalar(float(x))
        return np.array([g_scalar(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))

    return g


def normalize_rho_decrease(W: PsdFunction, rho: Callable[[float], float], system: DynamicalSystem,
                           lambda_: float, samples: int = 1000,
                           rho_inverse: Optional[Callable[[float], float]] = None,
                           x_max: Optional[float] = None,
                           tolerance: float = TOLERANCE) -> OptLyapunovCandidate:
    """Turn W(T(x)) <= rho(W(x)) into a linear decrease with factor lambda."""
    init = system.initial_set
    points = init.point(init.grid(samples))
    orbit = [points]
    for _ in range(ORBIT_STEPS):
        orbit.append(system.step(orbit[-1]))
    reach = np.vstack(orbit)
    w = W(reach)
    finite = np.isfinite(w)
    if x_max is None:
        x_max = max(1.0, float(np.max(w[finite])) if np.any(finite) else 1.0)
    if abs(rho(0.0)) > tolerance:
        raise PreconditionError(f"rho(0) = {rho(0.0)} must vanish")

    w_next = W(system.step(reach))
    rho_w = np.array([rho(v) if math.isfinite(v) else math.inf for v in w])
    if np.any(w_next > rho_w + tolerance * np.maximum(1.0, np.abs(np.where(finite, rho_w, 0.0)))):
        raise PreconditionError(f"{W.label}(T(x)) <= rho({W.label}(x)) fails on a sample")

    g = kappa_conjugacy(rho, lambda_, contraction=True, inverse=rho_inverse, x_max=x_max)

    def composed(X: np.ndarray) -> np.ndarray:
        values = np.asarray(W(X), dtype=float)
        return np.where(np.isfinite(values), g(np.where(np.isfinite(values), values, 0.0)), math.inf)

    scale = float(np.max(composed(points)))
    if not 0.0 < scale < math.inf:
        raise PreconditionError(f"sup of g({W.label}) over X^in is {scale}")
    V = PsdFunction(lambda X: composed(X) / scale, W.positivity_witness, f"g({W.label})/{scale:.6g}")
    return verify_opt_lyapunov(V, system, lambda_, samples)


def hahn_majorant_pair(system: DynamicalSystem, V: PsdFunction, alpha1: Callable[[float], float],
                       psi: Optional[Callable[[float], float]] = None, samples: int = 1000,
                       K: Optional[int] = None, seq: Optional[BoundedSequence] = None,
                       settings: Optional[SolverSettings] = None, seed: int = 0) -> UsefulPair:
    """Pair (alpha(alpha1^{-1}(x * V_sup)), ratio) from a classical Lyapunov function."""
    settings = settings or SolverSettings()
    psi = psi or (lambda s: s)
    dim = system.dim
    if abs(system.phi(np.zeros(dim))) > TOLERANCE:
        raise PreconditionError("phi(0) must vanish; shift the system first")

    points = _sample_points(system, samples, seed, None)
    norms = np.linalg.norm(points, axis=1)
    lower = np.array([alpha1(r) for r in norms])
    if np.any(lower > V(points) + TOLERANCE * np.maximum(1.0, lower)):
        raise PreconditionError(f"alpha1(|x|) <= {V.label}(x) fails on a sample")

    init = system.initial_set
    V_sup = float(np.max(V(init.point(init.grid(samples)))))
    hi = 1.0
    while alpha1(hi) < V_sup:
        hi *= 2.0
    radius = float(brentq(lambda r: alpha1(r) - V_sup, 0.0, hi, xtol=1e-12)) if V_sup > alpha1(0.0) else 0.0

    # Sampled ball suprema of phi, as a running max over increasing norms.
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(samples, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    ball = directions * (radius * rng.uniform(size=(samples, 1)) ** (1.0 / dim))
    axes = np.linspace(-radius, radius, samples)[:, None] * np.eye(dim)[:, None, :]
    ball = np.vstack([np.zeros((1, dim)), ball, axes.reshape(-1, dim)])
    order = np.argsort(np.linalg.norm(ball, axis=1))
    ball_norms = np.linalg.norm(ball, axis=1)[order]
    running = np.maximum.accumulate(system.phi(ball[order]))
    radii = np.linspace(0.0, radius, samples)
    alpha_phi = running[np.searchsorted(ball_norms, radii, side='right') - 1]
    alpha_grid = alpha_phi + np.array([psi(r) for r in radii])

    def alpha1_inverse(v: float) -> float:
        if v <= alpha1(0.0):
            return 0.0
        if v >= alpha1(radius):
            return radius
        return float(brentq(lambda r: alpha1(r) - v, 0.0, radius, xtol=1e-12))

    h = MonotoneBijection(lambda x: float(np.interp(alpha1_inverse(x * V_sup), radii, alpha_grid)),
                          label=f"hahn({V.label})")
    beta = operator_ratio(V, system, 1, samples, seed).ratio
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"Sampled ratio {beta} of {V.label} is not in (0, 1)")
    seq = seq or nu_oracle(system, settings.grid, settings.refine_rounds, settings)
    return verify_pair(seq, h, beta, settings.horizon if K is None else K)
