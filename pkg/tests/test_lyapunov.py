"""Tests for Opt-Lyapunov functions, certificates and the conversions around them."""

import math

import numpy as np
import pytest

from src.core.gallery import (
    LYAPUNOV_LAMBDA,
    ArtifactChoice,
    ExampleParams,
    canonical_artifacts,
    closed_forms,
    zeta_stopping_index,
)
from src.core.lyapunov import (
    CompatibilityCertificate,
    ImmediateOptimum,
    OptLyapunovCandidate,
    PsdFunction,
    certificate_from_margins,
    hahn_majorant_pair,
    kappa_conjugacy,
    normalize_rho_decrease,
    operator_ratio,
    pair_from_lyapunov,
    verify_certificate,
    verify_opt_lyapunov,
    yoshizawa_construct,
)
from src.core.pairs import MonotoneBijection, UsefulPair, formula_F, solve_stop
from src.core.sequences import BoundedSequence
from src.core.settings import SolverSettings
from src.core.systems import DynamicalSystem, InitialSet
from src.errors import (
    DegenerateInputError,
    DomainError,
    ParameterError,
    PreconditionError,
    ValueRangeError,
    ViolationError,
)


@pytest.fixture
def halving():
    """x -> x/2 on [1, 2] with phi(x) = x."""
    return DynamicalSystem.from_expressions(["x1/2"], "x1", InitialSet.box((1.0,), (2.0,)))


@pytest.fixture
def canonical_V(worked_params):
    return canonical_artifacts(worked_params, ArtifactChoice.LYAPUNOV)


class TestOperatorRatio:
    def test_worked_example_ratio(self, canonical_V, worked_system):
        report = operator_ratio(canonical_V, worked_system, samples=300)
        assert report.ratio == pytest.approx(4.0 / 9.0, rel=1e-6)
        assert report.in_class_N
        assert report.samples_used > 0

    def test_class_N_counterexample(self):
        system = DynamicalSystem.from_expressions(["-x1"], "x1", InitialSet.box((-1.0,), (1.0,)))
        P = PsdFunction.from_expression("max(x1, 0)", 1)
        one = operator_ratio(P, system, k=1, samples=200)
        two = operator_ratio(P, system, k=2, samples=200)
        assert one.ratio == 0.0
        assert two.ratio == pytest.approx(1.0)
        assert not one.in_class_N

    def test_positivity_witness_is_used(self):
        system = DynamicalSystem.from_expressions(["x1"], "x1", InitialSet.finite([(0.0,)]))
        P = PsdFunction.from_expression("x1^2", 1, positivity_witness=(1.0,))
        assert operator_ratio(P, system, samples=50).ratio == pytest.approx(1.0)

    def test_zero_function_is_degenerate(self, halving):
        with pytest.raises(DegenerateInputError):
            operator_ratio(PsdFunction.from_expression("0", 1), halving, samples=50)


class TestVerifyOptLyapunov:
    def test_worked_example(self, canonical_V, worked_system):
        cand = verify_opt_lyapunov(canonical_V, worked_system, LYAPUNOV_LAMBDA, samples=300)
        assert cand.V_sup == pytest.approx(1.0)
        assert cand.ratio == pytest.approx(4.0 / 9.0, rel=1e-6)

    def test_one_dimensional(self, halving):
        V = PsdFunction.from_expression("x1^2/4", 1)
        cand = verify_opt_lyapunov(V, halving, 0.5, samples=200)
        assert cand.V_sup == pytest.approx(1.0)
        assert cand.ratio == pytest.approx(0.25)

    def test_decrement_violation(self, halving):
        V = PsdFunction.from_expression("x1^2/4", 1)
        with pytest.raises(ViolationError) as info:
            verify_opt_lyapunov(V, halving, 0.2, samples=200)
        assert info.value.witness is not None

    def test_zero_function_has_no_positive_sup(self, worked_system):
        with pytest.raises(ValueRangeError):
            verify_opt_lyapunov(PsdFunction.from_expression("0", 2), worked_system, 0.5, samples=100)

    def test_sup_above_one(self, halving):
        with pytest.raises(ValueRangeError):
            verify_opt_lyapunov(PsdFunction.from_expression("x1^2", 1), halving, 0.5, samples=100)

    @pytest.mark.parametrize("lambda_", [0.0, 1.0, 1.5])
    def test_lambda_range(self, halving, lambda_):
        with pytest.raises(ParameterError):
            verify_opt_lyapunov(PsdFunction.from_expression("x1^2/4", 1), halving, lambda_)


class TestCertificates:
    def test_margins(self):
        cert = certificate_from_margins(300.0, 0.5, 2.0)
        assert cert(299.5) == pytest.approx(0.0)
        assert cert(300.5) == pytest.approx(1.0)
        assert cert.interval == (299.5, 300.5)
        assert cert.inverse(0.25) == pytest.approx(299.75)

    def test_margins_must_be_positive(self):
        with pytest.raises(ParameterError):
            certificate_from_margins(300.0, 0.0, 1.0)

    def test_inverse_by_bisection(self):
        cert = CompatibilityCertificate(alpha=lambda s: (s - 1.0) ** 3, interval=(1.0, 2.0))
        assert cert.inverse(0.125) == pytest.approx(1.5)
        assert cert.inverse(0.0) == 1.0
        with pytest.raises(DomainError):
            cert.inverse(1.5)

    def test_worked_certificate(self, worked_params, canonical_V, worked_system):
        cert = canonical_artifacts(worked_params, ArtifactChoice.CERTIFICATE)
        report = verify_certificate(cert, canonical_V, worked_system, 12, samples=1000)
        assert report.passed
        assert report.monotone
        assert report.positive_somewhere
        assert report.witness is None

    def test_certificate_never_positive(self, canonical_V, worked_system):
        cert = CompatibilityCertificate(alpha=lambda s: s - 301.0, interval=(301.0, 302.0))
        report = verify_certificate(cert, canonical_V, worked_system, 12, samples=200)
        assert not report.passed
        assert not report.positive_somewhere


class TestPairFromLyapunov:
    def test_immediate_optimum(self):
        V = PsdFunction.from_expression("x1", 1)
        cand = OptLyapunovCandidate(V, 0.5, 1.0, 0.0)
        cert = certificate_from_margins(5.0, 1.0, 1.0)
        result = pair_from_lyapunov(cand, cert, BoundedSequence.from_values([5.0, 1.0, 0.0]), 10)
        assert result == ImmediateOptimum(0, 5.0)

    def test_worked_example_stopping_index(self, worked_params, worked_forms, canonical_V):
        cand = OptLyapunovCandidate(canonical_V, LYAPUNOV_LAMBDA, 1.0, 4.0 / 9.0)
        cert = canonical_artifacts(worked_params, ArtifactChoice.CERTIFICATE)
        seq = worked_forms.sequence()
        pair = pair_from_lyapunov(cand, cert, seq, 60)
        assert pair.beta == pytest.approx(4.0 / 9.0)
        assert pair.useful
        assert formula_F(seq, worked_forms.K_s, pair).floor_F == 8

    def test_tiny_margin_through_centered_sequence(self):
        forms = closed_forms(ExampleParams.from_text(3, "1/1000"))
        assert zeta_stopping_index(forms, forms.zeta(1000.0), forms.K_s) == 31


class TestYoshizawa:
    def test_construction_from_pair_a(self, worked_params, worked_system):
        pair = canonical_artifacts(worked_params, ArtifactChoice.PAIR_A)
        result = yoshizawa_construct(pair, worked_system, k_max=60, samples=200)
        assert 0.0 < result.V_sup <= 1.0 + 1e-9
        assert not result.truncated
        assert result.h_hat.interval == (0.0, 900.0)

        report = verify_certificate(result.h_hat, result.V, worked_system, 20, samples=200)
        assert report.passed

    def test_divergence_after_last_positive_term_is_stable(self, worked_params, worked_system):
        # Orbits grow like (3/2)^k and leave the threshold long before k_max = 1000.
        pair = canonical_artifacts(worked_params, ArtifactChoice.PAIR_A)
        short = yoshizawa_construct(pair, worked_system, k_max=60, samples=200)
        result = yoshizawa_construct(pair, worked_system, samples=200)
        assert not result.truncated
        assert result.V_sup == pytest.approx(short.V_sup)

    def test_divergence_above_h0_is_truncation(self):
        doubling = DynamicalSystem.from_expressions(["2*x1"], "x1", InitialSet.box((1.0,), (2.0,)))
        pair = UsefulPair(MonotoneBijection.linear(4.0), 0.5, useful_witness=0)
        assert yoshizawa_construct(pair, doubling, samples=20).truncated


class TestKappaConjugacy:
    def test_expansion(self):
        g = kappa_conjugacy(lambda x: 2.0 * x, 4.0)
        for x in (0.3, 1.0, 1.7, 5.0):
            assert g(2.0 * x) == pytest.approx(4.0 * g(x), rel=1e-9)
        assert g(0.0) == 0.0
        values = g(np.linspace(0.01, 8.0, 50))
        assert np.all(np.diff(values) > 0)

    def test_contraction(self):
        g = kappa_conjugacy(lambda x: x / 2.0, 0.5, contraction=True, inverse=lambda y: 2.0 * y)
        for x in (0.2, 0.9, 3.0):
            assert g(x / 2.0) == pytest.approx(g(x) / 2.0, rel=1e-9)

    @pytest.mark.parametrize("f, factor, contraction", [
        (lambda x: 2.0 * x, 4.0, True),
        (lambda x: 2.0 * x, 0.5, False),
        (lambda x: x / 2.0, 4.0, False),
    ])
    def test_wrong_mode(self, f, factor, contraction):
        with pytest.raises(PreconditionError):
            kappa_conjugacy(f, factor, contraction=contraction)


class TestNormalizeRhoDecrease:
    def test_linear_rho(self, halving):
        W = PsdFunction.from_expression("x1^2/4", 1)
        cand = normalize_rho_decrease(W, lambda s: s / 2.0, halving, 0.5, samples=200,
                                      rho_inverse=lambda y: 2.0 * y)
        assert cand.lambda_ == 0.5
        assert cand.V_sup == pytest.approx(1.0)

    def test_nonlinear_rho(self):
        system = DynamicalSystem.from_expressions(["x1/(1 + abs(x1))"], "x1",
                                                  InitialSet.box((0.0,), (10.0,)))
        W = PsdFunction.from_expression("abs(x1)", 1)
        cand = normalize_rho_decrease(W, lambda s: s / (1.0 + s), system, 0.5, samples=200,
                                      rho_inverse=lambda y: y / (1.0 - y))
        assert cand.lambda_ == 0.5
        assert cand.V_sup == pytest.approx(1.0)

    def test_rho_must_contract(self):
        system = DynamicalSystem.from_expressions(["x1^2"], "x1", InitialSet.box((0.0,), (0.9,)))
        W = PsdFunction.from_expression("abs(x1)", 1)
        with pytest.raises(PreconditionError):
            normalize_rho_decrease(W, lambda s: s * s, system, 0.5, samples=100, x_max=2.0)

    def test_rho_bound_must_hold(self, halving):
        W = PsdFunction.from_expression("x1^2/4", 1)
        with pytest.raises(PreconditionError):
            normalize_rho_decrease(W, lambda s: s / 8.0, halving, 0.5, samples=100)


class TestHahnMajorant:
    @pytest.fixture
    def settings(self):
        return SolverSettings(grid=200, refine_rounds=2, horizon=20, samples=200)

    def test_one_dimensional(self, halving, settings):
        V = PsdFunction.from_expression("x1^2/4", 1)
        pair = hahn_majorant_pair(halving, V, lambda s: s * s / 4.0, samples=200, settings=settings)
        assert pair.beta == pytest.approx(0.25, rel=1e-6)
        assert pair.useful
        result = solve_stop(pair.sequence, pair)
        assert result.argmax == [0]
        assert result.max_value == pytest.approx(2.0)

    def test_zero_objective_is_not_useful(self, settings):
        system = DynamicalSystem.from_expressions(["x1/2"], "0", InitialSet.box((1.0,), (2.0,)))
        V = PsdFunction.from_expression("x1^2/4", 1)
        pair = hahn_majorant_pair(system, V, lambda s: s * s / 4.0, samples=100, settings=settings)
        assert not pair.useful

    def test_objective_must_vanish_at_origin(self, settings):
        system = DynamicalSystem.from_expressions(["x1/2"], "x1 + 1", InitialSet.box((1.0,), (2.0,)))
        V = PsdFunction.from_expression("x1^2/4", 1)
        with pytest.raises(PreconditionError):
            hahn_majorant_pair(system, V, lambda s: s * s / 4.0, samples=100, settings=settings)

    def test_lower_bound_must_hold(self, halving, settings):
        V = PsdFunction.from_expression("x1^2/4", 1)
        with pytest.raises(PreconditionError):
            hahn_majorant_pair(halving, V, lambda s: s * s, samples=100, settings=settings)


def test_candidate_to_dict(canonical_V):
    data = OptLyapunovCandidate(canonical_V, 0.5, 1.0, 0.25).to_dict()
    assert data['lambda'] == 0.5
    assert not math.isnan(data['ratio'])
