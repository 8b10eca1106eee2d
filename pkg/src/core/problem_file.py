"""Problem files: JSON documents describing a system and its certificates."""

import logging
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

from ..errors import ParameterError
from ..utils.expr import constant, parse
from ..utils.file_utils import FileUtils
from .gallery import (
    LYAPUNOV_LAMBDA,
    ArtifactChoice,
    ExampleParams,
    canonical_artifacts,
    closed_forms,
    linear_pair_envelope,
    worked_example_system,
)
from .klgen import KLGenUpperBound, klgen_from_expressions
from .lyapunov import CompatibilityCertificate, PsdFunction
from .pairs import MonotoneBijection
from .settings import SolverSettings
from .systems import DynamicalSystem, InitialSet, InitialSetKind

logger = logging.getLogger(__name__)

SECTIONS = {"system", "example", "pair", "klgen", "lyapunov", "solver"}


def _number(value: Any, name: str) -> float:
    if value is None:
        raise ParameterError(f"Missing numeric field '{name}'")
    return constant(value)


def _vector(values: Any, name: str) -> Tuple[float, ...]:
    if not isinstance(values, (list, tuple)):
        raise ParameterError(f"Field '{name}' must be a list")
    return tuple(_number(v, name) for v in values)


def _initial_set(data: Dict[str, Any]) -> InitialSet:
    try:
        kind = InitialSetKind(data.get('kind'))
    except ValueError:
        raise ParameterError(f"Unknown initial set kind {data.get('kind')!r}")
    if kind is InitialSetKind.BOX:
        return InitialSet.box(_vector(data.get('lower'), 'lower'), _vector(data.get('upper'), 'upper'))
    if kind is InitialSetKind.SEGMENT:
        return InitialSet.segment(_vector(data.get('start'), 'start'), _vector(data.get('end'), 'end'))
    if kind is InitialSetKind.FINITE:
        return InitialSet.finite([_vector(p, 'points') for p in data.get('points') or []])
    return InitialSet.box_line(_vector(data.get('lower'), 'lower'), _vector(data.get('upper'), 'upper'),
                               _vector(data.get('direction'), 'direction'))


@dataclass
class PairSpec:
    """An envelope pair as written in the file, not yet verified."""
    h: MonotoneBijection
    beta: float


@dataclass
class KLGenSpec:
    bound: KLGenUpperBound
    m: Optional[float] = None


@dataclass
class LyapunovSpec:
    """Opt-Lyapunov candidate with its declared factor and certificate."""
    V: PsdFunction
    lambda_: Optional[float] = None
    certificate: Optional[CompatibilityCertificate] = None
    alpha1: Optional[Callable[[float], float]] = None
    psi: Optional[Callable[[float], float]] = None


@dataclass
class ProblemFile:
    """A loaded problem: the system plus optional certificates and solver overrides."""
    system: DynamicalSystem
    parameters: Dict[str, float] = field(default_factory=dict)
    example: Optional[ExampleParams] = None
    pair: Optional[PairSpec] = None
    klgen: Optional[KLGenSpec] = None
    lyapunov: Optional[LyapunovSpec] = None
    solver: Dict[str, Any] = field(default_factory=dict)
    source: Optional[Path] = None

    @classmethod
    def load(cls, filepath: Path) -> 'ProblemFile':
        """Load a problem file; unreadable files are input errors."""
        data = FileUtils.load_json(Path(filepath))
        if data is None:
            raise ParameterError(f"Cannot read problem file {filepath}")
        problem = cls.from_dict(data, Path(filepath))
        logger.info(f"Loaded problem {filepath}: {problem.system.label}")
        return problem

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: Optional[Path] = None) -> 'ProblemFile':
        """Create a problem from its JSON sections."""
        unknown = sorted(set(data) - SECTIONS)
        if unknown:
            raise ParameterError(f"Unknown sections in problem file: {', '.join(unknown)}")
        if ('system' in data) == ('example' in data):
            raise ParameterError("A problem file needs exactly one of 'system' or 'example'")
        for name, section in data.items():
            if not isinstance(section, dict):
                raise ParameterError(f"Section '{name}' must be an object")

        example = None
        if 'example' in data:
            section = data['example']
            example = ExampleParams(_number(section.get('p'), 'p'), _number(section.get('mu'), 'mu'))
            system = worked_example_system(example)
            parameters = {'p': example.p, 'mu': example.mu}
        else:
            system, parameters = cls._system(data['system'])

        problem = cls(system, parameters, example, source=source)
        if 'pair' in data:
            problem.pair = problem._pair(data['pair'])
        if 'klgen' in data:
            problem.klgen = problem._klgen(data['klgen'])
        if 'lyapunov' in data:
            problem.lyapunov = problem._lyapunov(data['lyapunov'])
        if 'solver' in data:
            section = data['solver']
            known = set(SolverSettings.__annotations__)
            extra = sorted(set(section) - known)
            if extra:
                raise ParameterError(f"Unknown solver settings: {', '.join(extra)}")
            problem.solver = dict(section)
        return problem

    @staticmethod
    def _system(section: Dict[str, Any]) -> Tuple[DynamicalSystem, Dict[str, float]]:
        parameters = {k: _number(v, k) for k, v in (section.get('parameters') or {}).items()}
        initial = _initial_set(section.get('initial_set') or {})
        dim = int(section.get('dim', initial.dim))
        if dim != initial.dim:
            raise ParameterError(f"Declared dimension {dim} does not match the initial set ({initial.dim})")
        objective = section.get('objective')
        if not isinstance(objective, str):
            raise ParameterError("The system needs an objective expression")

        spec = section.get('map')
        matrix = None
        texts: Optional[Sequence[str]] = None
        if isinstance(spec, dict) and 'matrix' in spec:
            matrix = [[_number(v, 'matrix') for v in row] for row in spec['matrix']]
        elif isinstance(spec, list):
            texts = [str(t) for t in spec]
        else:
            raise ParameterError("The map must be a matrix or a list of component expressions")
        system = DynamicalSystem.from_expressions(texts, objective, initial, parameters, matrix,
                                                  label=section.get('label', 'system'))
        return system, parameters

    def _require_example(self, what: str) -> ExampleParams:
        if self.example is None:
            raise ParameterError(f"Canonical {what} needs an 'example' section")
        return self.example

    def _pair(self, section: Dict[str, Any]) -> PairSpec:
        if 'canonical' in section:
            params = self._require_example("pair")
            try:
                choice = ArtifactChoice(section['canonical'])
            except ValueError:
                raise ParameterError(f"Unknown canonical pair {section['canonical']!r}")
            if choice is ArtifactChoice.H_ZETA:
                forms = closed_forms(params)
                zeta = _number(section.get('zeta', forms.zeta(2.0)), 'zeta')
                pair = canonical_artifacts(params, choice, zeta)
                return PairSpec(pair.h, pair.beta)
            if choice not in (ArtifactChoice.PAIR_A, ArtifactChoice.PAIR_B):
                raise ParameterError(f"{choice.value} is not a pair")
            h, beta = linear_pair_envelope(closed_forms(params), choice)
            return PairSpec(h, beta)

        h_section = section.get('h') or {}
        kind = h_section.get('kind')
        if kind == 'linear':
            h = MonotoneBijection.linear(_number(h_section.get('a'), 'a'))
        elif kind == 'affine':
            h = MonotoneBijection.affine(_number(h_section.get('a'), 'a'), _number(h_section.get('c'), 'c'))
        elif kind == 'expression':
            h = MonotoneBijection.from_expression(h_section.get('expr', ''), h_section.get('inverse'),
                                                  self.parameters)
        else:
            raise ParameterError(f"Unknown envelope kind {kind!r}")
        return PairSpec(h, _number(section.get('beta'), 'beta'))

    def _klgen(self, section: Dict[str, Any]) -> KLGenSpec:
        theta_sup = section.get('theta_sup')
        bound = klgen_from_expressions(
            section.get('gamma', ''),
            section.get('theta', ''),
            self.system.dim,
            None if theta_sup is None else _number(theta_sup, 'theta_sup'),
            self.parameters,
            self.system,
        )
        m = section.get('m')
        return KLGenSpec(bound, None if m is None else _number(m, 'm'))

    def _lyapunov(self, section: Dict[str, Any]) -> LyapunovSpec:
        if section.get('canonical'):
            params = self._require_example("Lyapunov function")
            forms = closed_forms(params)
            zeta = _number(section.get('zeta', forms.zeta(2.0)), 'zeta')
            return LyapunovSpec(canonical_artifacts(params, ArtifactChoice.LYAPUNOV), LYAPUNOV_LAMBDA,
                                canonical_artifacts(params, ArtifactChoice.CERTIFICATE, zeta))

        V = PsdFunction.from_expression(section.get('V', ''), self.system.dim, self.parameters)
        certificate = None
        if 'certificate' in section:
            certificate = self._certificate(section['certificate'])
        lambda_ = section.get('lambda')
        return LyapunovSpec(
            V,
            None if lambda_ is None else _number(lambda_, 'lambda'),
            certificate,
            self._scalar_function(section.get('alpha1')),
            self._scalar_function(section.get('psi')),
        )

    def _scalar_function(self, text: Optional[str]) -> Optional[Callable[[float], float]]:
        """Function of s written in the expression language."""
        if text is None:
            return None
        params = self.parameters
        expr = parse(text, ["s", *params])
        return lambda s: float(expr.evaluate({"s": s, **params}))

    def _certificate(self, section: Dict[str, Any]) -> CompatibilityCertificate:
        params = self.parameters
        alpha = parse(section.get('alpha', ''), ["s", *params])
        interval = _vector(section.get('interval'), 'interval')
        if len(interval) != 2 or not interval[0] < interval[1]:
            raise ParameterError(f"Certificate interval must be [lo, hi] with lo < hi, got {list(interval)}")
        inverse = None
        if section.get('inverse'):
            inv = parse(section['inverse'], ["y", *params])
            inverse = lambda y: float(inv.evaluate({"y": y, **params}))
        return CompatibilityCertificate(
            alpha=lambda s: float(alpha.evaluate({"s": s, **params})),
            interval=(interval[0], interval[1]),
            alpha_inverse=inverse,
            label=section.get('alpha', 'alpha'),
        )

    def settings(self, base: Optional[SolverSettings] = None) -> SolverSettings:
        """Solver settings with the file's overrides applied."""
        return (base or SolverSettings()).with_overrides(**self.solver)

    def to_dict(self) -> Dict[str, Any]:
        """Summary of the loaded problem."""
        data: Dict[str, Any] = {
            'system': self.system.label,
            'dim': self.system.dim,
            'initial_set': self.system.initial_set.to_dict(),
            'parameters': dict(self.parameters),
        }
        if self.example is not None:
            data['example'] = asdict(self.example)
        if self.pair is not None:
            data['pair'] = {'h': self.pair.h.label, 'beta': self.pair.beta}
        if self.klgen is not None:
            data['klgen'] = self.klgen.bound.to_dict()
        if self.lyapunov is not None:
            data['lyapunov'] = {'V': self.lyapunov.V.label, 'lambda': self.lyapunov.lambda_}
        return data
