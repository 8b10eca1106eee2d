"""Problem triples (X^in, T, phi), static problems P_k and the peaks pipeline.

Initial sets are parameterized (a segment by one scalar, a box by one scalar
per axis) and every static problem is solved in parameter space by a
deterministic grid followed by local refinement around the incumbent.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import NotUsefulError, OrbitDivergenceError, ParameterError
from ..utils.expr import bind_point, parse
from .pairs import UsefulPair, solve_stop, verify_until_useful
from .sequences import BoundedSequence
from .settings import SolverSettings

logger = logging.getLogger(__name__)

BatchMap = Callable[[np.ndarray], np.ndarray]


class InitialSetKind(Enum):
    BOX = "box"
    SEGMENT = "segment"
    FINITE = "finite-list"
    BOX_LINE = "box-intersect-line"


def _as_batch(points: Any) -> np.ndarray:
    return np.atleast_2d(np.asarray(points, dtype=float))


@dataclass(frozen=True)
class InitialSet:
    """Bounded nonempty initial set, described by its parameterization."""
    kind: InitialSetKind
    lower: Tuple[float, ...] = ()
    upper: Tuple[float, ...] = ()
    start: Tuple[float, ...] = ()
    end: Tuple[float, ...] = ()
    points: Tuple[Tuple[float, ...], ...] = ()
    direction: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind is InitialSetKind.BOX:
            if len(self.lower) != len(self.upper) or not self.lower:
                raise ParameterError("Box corners must have the same positive dimension")
            if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
                raise ParameterError(f"Empty box {self.lower} .. {self.upper}")
        elif self.kind is InitialSetKind.SEGMENT:
            if len(self.start) != len(self.end) or not self.start:
                raise ParameterError("Segment endpoints must have the same positive dimension")
        elif self.kind is InitialSetKind.FINITE:
            if not self.points or len({len(p) for p in self.points}) != 1:
                raise ParameterError("Point list must be nonempty with a common dimension")
        elif self.kind is InitialSetKind.BOX_LINE:
            if not len(self.direction) == len(self.lower) == len(self.upper):
                raise ParameterError("Line direction and box corners must share a dimension")
            lo, hi = self._line_range()
            if lo > hi:
                raise ParameterError("The line through the origin misses the box")

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> 'InitialSet':
        return cls(InitialSetKind.BOX, lower=tuple(map(float, lower)), upper=tuple(map(float, upper)))

    @classmethod
    def segment(cls, start: Sequence[float], end: Sequence[float]) -> 'InitialSet':
        return cls(InitialSetKind.SEGMENT, start=tuple(map(float, start)), end=tuple(map(float, end)))

    @classmethod
    def finite(cls, points: Iterable[Sequence[float]]) -> 'InitialSet':
        return cls(InitialSetKind.FINITE, points=tuple(tuple(map(float, p)) for p in points))

    @classmethod
    def box_line(cls, lower: Sequence[float], upper: Sequence[float],
                 direction: Sequence[float]) -> 'InitialSet':
        return cls(InitialSetKind.BOX_LINE, lower=tuple(map(float, lower)),
                   upper=tuple(map(float, upper)), direction=tuple(map(float, direction)))

    @property
    def dim(self) -> int:
        if self.kind is InitialSetKind.SEGMENT:
            return len(self.start)
        if self.kind is InitialSetKind.FINITE:
            return len(self.points[0])
        return len(self.lower)

    def _line_range(self) -> Tuple[float, float]:
        lo, hi = -np.inf, np.inf
        for v, a, b in zip(self.direction, self.lower, self.upper):
            if v == 0:
                if not a <= 0 <= b:
                    return 1.0, 0.0
                continue
            t1, t2 = sorted((a / v, b / v))
            lo, hi = max(lo, t1), min(hi, t2)
        return float(lo), float(hi)

    def parameter_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of the parameter box."""
        if self.kind is InitialSetKind.BOX:
            return np.array(self.lower), np.array(self.upper)
        if self.kind is InitialSetKind.SEGMENT:
            return np.zeros(1), np.ones(1)
        if self.kind is InitialSetKind.FINITE:
            return np.zeros(1), np.array([len(self.points) - 1.0])
        lo, hi = self._line_range()
        return np.array([lo]), np.array([hi])

    @property
    def refinable(self) -> bool:
        return self.kind is not InitialSetKind.FINITE

    def point(self, params: np.ndarray) -> np.ndarray:
        """Map parameter rows to points of the set."""
        params = _as_batch(params)
        if self.kind is InitialSetKind.BOX:
            return params.copy()
        if self.kind is InitialSetKind.SEGMENT:
            start, end = np.array(self.start), np.array(self.end)
            return start + params[:, :1] * (end - start)
        if self.kind is InitialSetKind.FINITE:
            idx = np.clip(np.rint(params[:, 0]).astype(int), 0, len(self.points) - 1)
            return np.array(self.points)[idx]
        return params[:, :1] * np.array(self.direction)

    def grid(self, n: int) -> np.ndarray:
        """Lexicographically ordered parameter grid with about n points."""
        lo, hi = self.parameter_bounds()
        if self.kind is InitialSetKind.FINITE:
            return np.arange(len(self.points), dtype=float)[:, None]
        per_axis = n if lo.size == 1 else max(2, int(round(n ** (1.0 / lo.size))))
        axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.column_stack([m.ravel() for m in mesh])

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        """n random points of the set (the whole list for finite sets)."""
        if self.kind is InitialSetKind.FINITE:
            return np.array(self.points)
        lo, hi = self.parameter_bounds()
        rng = np.random.default_rng(seed)
        return self.point(rng.uniform(lo, hi, size=(n, lo.size)))

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box containing the set."""
        lo, hi = self.parameter_bounds()
        corners = self.point(np.array([lo, hi])) if self.kind is not InitialSetKind.BOX else np.array([lo, hi])
        if self.kind is InitialSetKind.FINITE:
            corners = np.array(self.points)
        return corners.min(axis=0), corners.max(axis=0)

    def to_dict(self) -> Dict[str, Any]:
        """Convert initial set to dictionary."""
        data = {k: list(v) for k, v in asdict(self).items() if k != 'kind' and v}
        data['kind'] = self.kind.value
        return data


@dataclass(frozen=True)
class DynamicalSystem:
    """The triple (X^in, T, phi); T and phi act on batches of points."""
    dim: int
    initial_set: InitialSet
    map_T: BatchMap
    objective_phi: BatchMap
    phi_shift: float = 0.0
    divergence_threshold: float = 1e150
    label: str = "system"

    def step(self, points: Any) -> np.ndarray:
        """T applied once."""
        return self.iterate(points, 1)

    def iterate(self, points: Any, k: int) -> np.ndarray:
        """T^k applied to one point or a batch."""
        single = np.ndim(points) == 1
        current = _as_batch(points)
        origin = current
        for step in range(1, k + 1):
            current = np.asarray(self.map_T(current), dtype=float).reshape(current.shape)
            bad = ~np.all(np.isfinite(current) & (np.abs(current) <= self.divergence_threshold), axis=1)
            if np.any(bad):
                row = int(np.flatnonzero(bad)[0])
                logger.error(f"Orbit of {origin[row].tolist()} diverged at step {step}")
                raise OrbitDivergenceError(f"Orbit of {origin[row].tolist()} diverged at step {step}",
                                           origin[row], step)
        return current[0] if single else current

    def orbit(self, point: Sequence[float], horizon: int) -> np.ndarray:
        """Rows x, T(x), ..., T^horizon(x)."""
        rows = [np.asarray(point, dtype=float)]
        for _ in range(horizon):
            rows.append(self.iterate(rows[-1], 1))
        return np.array(rows)

    def phi(self, points: Any) -> Any:
        """Shifted objective; float for one point, array for a batch."""
        single = np.ndim(points) == 1
        batch = _as_batch(points)
        values = np.broadcast_to(np.asarray(self.objective_phi(batch), dtype=float),
                                 (batch.shape[0],)) - self.phi_shift
        return float(values[0]) if single else np.array(values)

    def values(self, points: Any, k: int) -> Any:
        """phi(T^k(x))."""
        return self.phi(self.iterate(points, k))

    def orbit_values(self, points: Any, horizon: int) -> np.ndarray:
        """Matrix of phi(T^k(x)), one row per point, columns k = 0..horizon."""
        current = _as_batch(points)
        columns = [self.phi(current)]
        for _ in range(horizon):
            current = self.iterate(current, 1)
            columns.append(self.phi(current))
        return np.column_stack(columns)

    def shifted(self) -> 'DynamicalSystem':
        """Copy with phi(0) = 0, recording the subtracted constant."""
        offset = float(np.asarray(self.objective_phi(np.zeros((1, self.dim))), dtype=float).ravel()[0])
        if offset != 0:
            logger.info(f"Shifting objective by phi(0) = {offset}")
        return replace(self, phi_shift=offset)

    @classmethod
    def linear(cls, matrix: Sequence[Sequence[float]], initial_set: InitialSet,
               objective: BatchMap, label: str = "linear") -> 'DynamicalSystem':
        """x -> A x."""
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != initial_set.dim:
            raise ParameterError(f"Matrix of shape {A.shape} does not act on dimension {initial_set.dim}")
        return cls(A.shape[0], initial_set, lambda X: X @ A.T, objective, label=label)

    @classmethod
    def from_expressions(cls, map_texts: Optional[Sequence[str]], objective_text: str,
                         initial_set: InitialSet, parameters: Optional[Dict[str, float]] = None,
                         matrix: Optional[Sequence[Sequence[float]]] = None,
                         label: str = "system") -> 'DynamicalSystem':
        """System whose map and objective are written in x1..xd."""
        params = dict(parameters or {})
        dim = initial_set.dim
        names = [f"x{i + 1}" for i in range(dim)] + list(params)
        objective_expr = parse(objective_text, names)

        def objective(X: np.ndarray) -> np.ndarray:
            value = objective_expr.evaluate(bind_point(X, params))
            return np.broadcast_to(np.asarray(value, dtype=float), (X.shape[0],))

        if matrix is not None:
            return cls.linear(matrix, initial_set, objective, label)
        if map_texts is None or len(map_texts) != dim:
            raise ParameterError(f"Map needs {dim} component expressions")
        components = [parse(text, names) for text in map_texts]

        def map_T(X: np.ndarray) -> np.ndarray:
            bindings = bind_point(X, params)
            return np.column_stack([
                np.broadcast_to(np.asarray(c.evaluate(bindings), dtype=float), (X.shape[0],))
                for c in components
            ])

        return cls(dim, initial_set, map_T, objective, label=label)


@dataclass
class StaticSolveResult:
    """Approximate solution of P_k."""
    k: int
    value: float
    maximizer: Tuple[float, ...]
    resolution: float
    refined: bool
    suspect: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Convert result to dictionary."""
        data = asdict(self)
        data['maximizer'] = list(self.maximizer)
        return data


@dataclass
class PeaksSolution:
    """Solution of the peaks problem on a certified finite horizon."""
    K_bound: int
    nu_opt: float
    k_opt: int
    k_greatest: int
    x_opt: Tuple[float, ...]
    pair_used: UsefulPair
    static_results: List[StaticSolveResult] = field(default_factory=list)
    static_solves: int = 0
    formula_evaluations: int = 0
    phi_shift: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Convert solution to dictionary."""
        return {
            'K_bound': self.K_bound,
            'nu_opt': self.nu_opt,
            'k_opt': self.k_opt,
            'k_greatest': self.k_greatest,
            'x_opt': list(self.x_opt),
            'pair': self.pair_used.to_dict(),
            'formula_evaluations': self.formula_evaluations,
            'static_solves': self.static_solves,
            'phi_shift': self.phi_shift,
            'static_results': [r.to_dict() for r in self.static_results],
        }


def _incumbent(values: np.ndarray, params: np.ndarray) -> Tuple[float, np.ndarray]:
    # np.argmax keeps the first maximum, i.e. the least parameter in grid order.
    i = int(np.argmax(values))
    return float(values[i]), params[i]


def solve_static(system: DynamicalSystem, k: int, grid: int = 1000, refine_rounds: int = 4,
                 refine_points: int = 21) -> StaticSolveResult:
    """Grid search of P_k over the initial set, then local refinement."""
    if grid < 2:
        raise ParameterError(f"Grid needs at least 2 points, got {grid}")
    init = system.initial_set
    lo, hi = init.parameter_bounds()
    params = init.grid(grid)
    best, best_param = _incumbent(system.values(init.point(params), k), params)

    per_axis = grid if lo.size == 1 else max(2, int(round(grid ** (1.0 / lo.size))))
    width = (hi - lo) / (per_axis - 1)
    refined = False
    last_gain = 0.0
    if init.refinable:
        for _ in range(refine_rounds):
            axes = [np.linspace(max(a, c - w), min(b, c + w), refine_points)
                    for a, b, c, w in zip(lo, hi, best_param, width)]
            mesh = np.meshgrid(*axes, indexing='ij')
            local = np.column_stack([m.ravel() for m in mesh])
            value, param = _incumbent(system.values(init.point(local), k), local)
            last_gain = value - best
            if value > best:
                best, best_param = value, param
            width = width * 2.0 / (refine_points - 1)
            refined = True

    suspect = last_gain > 1e-6 * max(1.0, abs(best))
    if suspect:
        logger.warning(f"P_{k}: value still rising after refinement ({best}); the supremum may be unbounded")
    maximizer = tuple(float(v) for v in init.point(best_param)[0])
    logger.debug(f"P_{k}: value {best} at {maximizer}")
    return StaticSolveResult(k, best, maximizer, float(np.max(width)) if width.size else 0.0,
                             refined, suspect)


class NuOracle:
    """Memoized k -> nu_k, one lock per index."""

    def __init__(self, system: DynamicalSystem, grid: int = 1000, refine_rounds: int = 4,
                 refine_points: int = 21, thread_count: int = 1):
        self.system = system
        self.grid = grid
        self.refine_rounds = refine_rounds
        self.refine_points = refine_points
        self.thread_count = max(1, thread_count)
        self.solves = 0
        self._results: Dict[int, StaticSolveResult] = {}
        self._locks: Dict[int, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock_for(self, k: int) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(k, threading.Lock())

    def result(self, k: int) -> StaticSolveResult:
        """Static solution of P_k, solved at most once."""
        with self._lock_for(k):
            if k not in self._results:
                self._results[k] = solve_static(self.system, k, self.grid,
                                                self.refine_rounds, self.refine_points)
                with self._guard:
                    self.solves += 1
            return self._results[k]

    def __call__(self, k: int) -> float:
        return self.result(k).value

    def prefetch(self, ks: Iterable[int]) -> None:
        """Solve several indices concurrently."""
        ks = [k for k in ks if k not in self._results]
        if not ks:
            return
        with ThreadPoolExecutor(max_workers=self.thread_count) as executor:
            list(executor.map(self.result, ks))

    @property
    def results(self) -> List[StaticSolveResult]:
        return [self._results[k] for k in sorted(self._results)]


def nu_oracle(system: DynamicalSystem, grid: int = 1000, refine_rounds: int = 4,
              settings: Optional[SolverSettings] = None) -> BoundedSequence:
    """The sequence nu_k = sup phi(T^k(X^in)), evaluated by static solves."""
    settings = settings or SolverSettings()
    oracle = NuOracle(system, grid, refine_rounds, settings.refine_points, settings.thread_count)
    return BoundedSequence(oracle, label="nu")


def has_fixed_point_obstruction(system: DynamicalSystem, samples: int = 200,
                                delta: float = 1e-8) -> bool:
    """Whether every sampled initial point is an approximate fixed point of T."""
    points = system.initial_set.sample(samples)
    moved = np.linalg.norm(system.step(points) - points, axis=1)
    return bool(np.all(moved <= delta))


def solve_peaks(system: DynamicalSystem, pair: UsefulPair, grid: int = 1000,
                refine_rounds: int = 4, settings: Optional[SolverSettings] = None,
                seq: Optional[BoundedSequence] = None) -> PeaksSolution:
    """Solve the static problems up to the certified stopping index.

    Static problems are solved on demand: with one thread exactly K + 1 of
    them. `seq` reuses a nu sequence whose terms are already solved.
    """
    settings = settings or SolverSettings()
    if has_fixed_point_obstruction(system, delta=settings.fixed_point_delta):
        raise NotUsefulError("Every initial point is fixed by T: nu is constant and no useful pair exists")

    if seq is None or not isinstance(seq.eval_fn, NuOracle):
        seq = nu_oracle(system, grid, refine_rounds, settings)
    oracle: NuOracle = seq.eval_fn  # type: ignore[assignment]
    pair = verify_until_useful(seq, pair.h, pair.beta, settings.horizon, settings.tolerance)

    def ahead(ks: range) -> None:
        oracle.prefetch(ks[:oracle.thread_count])

    result = solve_stop(pair.sequence, pair, settings.tolerance, settings.argmax_tolerance,
                        settings.max_stop_horizon, prefetch=ahead if oracle.thread_count > 1 else None)
    statics = [oracle.result(k) for k in range(result.K + 1)]
    k_opt = result.argmax[0]
    solution = PeaksSolution(
        K_bound=result.K,
        nu_opt=result.max_value + system.phi_shift,
        k_opt=k_opt,
        k_greatest=result.argmax[-1],
        x_opt=statics[k_opt].maximizer,
        pair_used=pair,
        static_results=statics,
        static_solves=oracle.solves,
        formula_evaluations=result.formula_evaluations,
        phi_shift=system.phi_shift,
    )
    logger.info(f"Peaks solved with {oracle.solves} static problems: "
                f"nu_opt={solution.nu_opt:.6g} at k={k_opt}, K={result.K}")
    return solution
