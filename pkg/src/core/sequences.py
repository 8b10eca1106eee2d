"""Finite-horizon analysis of real sequences bounded above.

A sequence is an evaluator k -> u_k with an optional certified tail bound
tau(k) >= sup_{j>k} u_j. Suprema over infinitely many terms are replaced by
tau; without it an analysis is reported as uncertified.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict, field, replace
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..errors import CertificateRequiredError, EvaluationError, PeaksError

if TYPE_CHECKING:
    from .pairs import UsefulPair

logger = logging.getLogger(__name__)

ARGMAX_TOLERANCE = 1e-12


@dataclass(frozen=True)
class BoundedSequence:
    """Evaluator k -> u_k with an optional certified tail bound."""
    eval_fn: Callable[[int], float]
    tail_bound: Optional[Callable[[int], float]] = None
    label: str = "u"

    def eval(self, k: int) -> float:
        """Evaluate u_k, wrapping failures with the offending index."""
        if k < 0:
            raise EvaluationError(f"Negative index {k} for {self.label}", k)
        try:
            value = float(self.eval_fn(k))
        except PeaksError:
            raise
        except Exception as e:
            logger.error(f"Evaluation of {self.label}_{k} failed: {e}")
            raise EvaluationError(f"Cannot evaluate {self.label}_{k}: {e}", k) from e
        if np.isnan(value):
            raise EvaluationError(f"{self.label}_{k} is not a number", k)
        return value

    def __call__(self, k: int) -> float:
        return self.eval(k)

    def prefix(self, K: int) -> np.ndarray:
        """Terms u_0..u_K as an array."""
        return np.array([self.eval(k) for k in range(K + 1)], dtype=float)

    def with_tail_bound(self, tail_bound: Callable[[int], float]) -> 'BoundedSequence':
        """Copy of the sequence carrying a certified tail bound."""
        return replace(self, tail_bound=tail_bound)

    @classmethod
    def from_values(cls, head: Sequence[float], tail: Optional[Callable[[int], float]] = None,
                    tail_bound: Optional[Callable[[int], float]] = None,
                    label: str = "u") -> 'BoundedSequence':
        """Sequence given by a finite head, continued by `tail(k)` (default 0)."""
        values = [float(v) for v in head]

        def _eval(k: int) -> float:
            if k < len(values):
                return values[k]
            return float(tail(k)) if tail is not None else 0.0

        return cls(_eval, tail_bound, label)


@dataclass
class ArgmaxReport:
    """Maximizers of a sequence prefix, with the certification status."""
    horizon: int
    prefix_max: float
    prefix_argmax_set: List[int]
    K_s_candidate: Optional[int]
    certified: bool
    limsup_estimate: Optional[float] = None
    limsup_hit_first: Optional[int] = None
    limsup_exceed_first: Optional[int] = None
    values: List[float] = field(default_factory=list, repr=False)

    @property
    def K(self) -> Optional[int]:
        """Least prefix maximizer."""
        return self.prefix_argmax_set[0] if self.prefix_argmax_set else None

    def to_dict(self) -> Dict[str, Any]:
        """Convert report to dictionary."""
        data = asdict(self)
        data.pop('values')
        return {k: v for k, v in data.items() if v is not None}


def _argmax_indices(values: np.ndarray, tolerance: float) -> List[int]:
    best = float(np.max(values))
    return [int(k) for k in np.flatnonzero(np.abs(values - best) <= tolerance)]


def prefix_argmax(seq: BoundedSequence, K: int, tolerance: float = ARGMAX_TOLERANCE) -> ArgmaxReport:
    """All maximizers of u over [0, K] and whether the tail certifies them."""
    if K < 0:
        raise EvaluationError(f"Horizon must be nonnegative, got {K}", K)
    values = seq.prefix(K)
    best = float(np.max(values))
    argmax = _argmax_indices(values, tolerance)
    report = ArgmaxReport(
        horizon=K,
        prefix_max=best,
        prefix_argmax_set=argmax,
        K_s_candidate=argmax[-1],
        certified=False,
        values=values.tolist(),
    )

    if seq.tail_bound is not None:
        tail = float(seq.tail_bound(K))
        report.certified = tail < best
        report.limsup_estimate = tail
        # Sound for membership only: the true limsup is at most `tail`.
        running = np.maximum.accumulate(values)
        hits = np.flatnonzero(running >= tail)
        exceeds = np.flatnonzero(running > tail)
        report.limsup_hit_first = int(hits[0]) if hits.size else None
        report.limsup_exceed_first = int(exceeds[0]) if exceeds.size else None

    logger.debug(f"{seq.label}: prefix max {best} on [0, {K}] at {argmax}, certified={report.certified}")
    return report


def is_in_delta(seq: BoundedSequence, k: int, strict: bool = False) -> bool:
    """Whether max_{j<=k} u_j dominates the certified tail bound tau(k)."""
    if seq.tail_bound is None:
        raise CertificateRequiredError(f"{seq.label} has no tail bound; membership cannot be certified")
    head_max = float(np.max(seq.prefix(k)))
    tail = float(seq.tail_bound(k))
    return head_max > tail if strict else head_max >= tail


def greatest_maximizer(seq: BoundedSequence, pair: 'UsefulPair') -> int:
    """K_u^s, enumerating up to the stopping index of a verified pair."""
    from .pairs import solve_stop

    result = solve_stop(seq, pair)
    return result.argmax[-1]
