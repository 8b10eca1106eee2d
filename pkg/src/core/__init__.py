"""Core functionality for Peaks Solver."""

from .settings import SolverSettings
from .sequences import BoundedSequence, ArgmaxReport, prefix_argmax, is_in_delta, greatest_maximizer
from .pairs import (
    MonotoneBijection,
    UsefulPair,
    verify_pair,
    verify_until_useful,
    beta_infimum,
    combine,
    formula_F,
    solve_stop,
    optimal_affine,
)
from .systems import DynamicalSystem, InitialSet, nu_oracle, solve_static, solve_peaks
from .klgen import (
    KLGenFunction,
    KLGenUpperBound,
    majorize_decreasing,
    sontag_extension,
    pair_from_klgen,
    klgen_from_pair,
    verify_klgen_bound,
)
from .lyapunov import (
    PsdFunction,
    OptLyapunovCandidate,
    CompatibilityCertificate,
    operator_ratio,
    verify_opt_lyapunov,
    verify_certificate,
    pair_from_lyapunov,
    yoshizawa_construct,
    kappa_conjugacy,
    normalize_rho_decrease,
    hahn_majorant_pair,
)
from .gallery import ExampleParams, closed_forms, canonical_artifacts, reproduce_tables
from .problem_file import ProblemFile

__all__ = [
    "SolverSettings",
    "BoundedSequence", "ArgmaxReport", "prefix_argmax", "is_in_delta", "greatest_maximizer",
    "MonotoneBijection", "UsefulPair", "verify_pair", "beta_infimum", "combine", "formula_F",
    "solve_stop", "optimal_affine", "verify_until_useful",
    "DynamicalSystem", "InitialSet", "nu_oracle", "solve_static", "solve_peaks",
    "KLGenFunction", "KLGenUpperBound", "majorize_decreasing", "sontag_extension",
    "pair_from_klgen", "klgen_from_pair", "verify_klgen_bound",
    "PsdFunction", "OptLyapunovCandidate", "CompatibilityCertificate", "operator_ratio",
    "verify_opt_lyapunov", "verify_certificate", "pair_from_lyapunov", "yoshizawa_construct",
    "kappa_conjugacy", "normalize_rho_decrease", "hahn_majorant_pair",
    "ExampleParams", "closed_forms", "canonical_artifacts", "reproduce_tables",
    "ProblemFile",
]
