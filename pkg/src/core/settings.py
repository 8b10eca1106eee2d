"""Solver settings loaded from the bundled configuration file."""

import os
import logging
from dataclasses import dataclass, asdict, replace
from pathlib import Path
from typing import Any, Dict, Optional

from ..utils.file_utils import FileUtils

logger = logging.getLogger(__name__)

THREADS_ENV = "PEAKS_THREADS"


@dataclass(frozen=True)
class SolverSettings:
    """Numerical defaults shared by the solver pipelines."""
    grid: int = 1000
    refine_rounds: int = 4
    refine_points: int = 21
    horizon: int = 60
    tolerance: float = 1e-9
    argmax_tolerance: float = 1e-12
    divergence_threshold: float = 1e150
    fixed_point_delta: float = 1e-8
    yoshizawa_k_max: int = 1000
    klgen_t_max: int = 10000
    samples: int = 1000
    max_stop_horizon: int = 100000
    thread_count: int = 1

    def to_dict(self) -> Dict[str, Any]:
        """Convert settings to dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SolverSettings':
        """Create settings from dictionary."""
        return cls(**{k: v for k, v in data.items() if k in cls.__annotations__})

    @classmethod
    def load(cls, config_path: Optional[Path] = None) -> 'SolverSettings':
        """Load defaults from the configuration file and the environment."""
        data = FileUtils.load_json(config_path or FileUtils.get_config_path())
        if data is None:
            logger.warning("Solver configuration unavailable, using built-in defaults")
            settings = cls()
        else:
            settings = cls.from_dict(data.get('solver_defaults', {}))

        threads = os.environ.get(THREADS_ENV)
        if threads:
            try:
                settings = replace(settings, thread_count=max(1, int(threads)))
            except ValueError:
                logger.warning(f"Ignoring non-integer {THREADS_ENV}={threads!r}")
        return settings

    def with_overrides(self, **overrides: Any) -> 'SolverSettings':
        """Return a copy with every non-None override applied."""
        values = {k: v for k, v in overrides.items() if v is not None and k in self.__annotations__}
        return replace(self, **values) if values else self
