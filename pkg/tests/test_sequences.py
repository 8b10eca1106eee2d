"""Tests for bounded sequences and their maximizers."""

import numpy as np
import pytest

from src.core.pairs import MonotoneBijection, verify_pair
from src.core.sequences import BoundedSequence, greatest_maximizer, is_in_delta, prefix_argmax
from src.errors import CertificateRequiredError, EvaluationError


def test_from_values_continues_with_tail():
    seq = BoundedSequence.from_values([1.0, 3.0], tail=lambda k: -k)
    np.testing.assert_array_equal(seq.prefix(3), [1.0, 3.0, -2.0, -3.0])


def test_evaluation_failures_carry_the_index():
    def broken(k):
        if k == 2:
            raise ValueError("boom")
        return 1.0

    seq = BoundedSequence(broken)
    with pytest.raises(EvaluationError) as info:
        seq.prefix(4)
    assert info.value.k == 2

    with pytest.raises(EvaluationError):
        BoundedSequence(lambda k: float("nan")).eval(0)
    with pytest.raises(EvaluationError):
        seq.eval(-1)


def test_prefix_argmax_worked_example(worked_forms):
    report = prefix_argmax(worked_forms.sequence(), 12)
    assert report.prefix_max == pytest.approx(300.0)
    assert report.prefix_argmax_set == [8]
    assert report.certified


def test_prefix_argmax_constant_sequence():
    report = prefix_argmax(BoundedSequence(lambda k: 5.0), 4)
    assert report.prefix_argmax_set == [0, 1, 2, 3, 4]
    assert report.K == 0
    assert report.K_s_candidate == 4
    assert not report.certified
    assert 'values' not in report.to_dict()
    assert 'limsup_estimate' not in report.to_dict()


def test_prefix_argmax_with_tail_bound():
    seq = BoundedSequence(lambda k: -(k - 3) ** 2, tail_bound=lambda k: -(k - 3) ** 2 if k >= 4 else 0.0)
    report = prefix_argmax(seq, 10)
    assert report.prefix_argmax_set == [3]
    assert report.certified


def test_limsup_membership_indices():
    seq = BoundedSequence.from_values([1.0, 3.0, 3.0, 2.0], tail_bound=lambda k: 3.0)
    report = prefix_argmax(seq, 3)
    assert report.prefix_argmax_set == [1, 2]
    assert not report.certified
    assert report.limsup_hit_first == 1
    assert report.limsup_exceed_first is None


def test_is_in_delta():
    with pytest.raises(CertificateRequiredError):
        is_in_delta(BoundedSequence(lambda k: 1.0), 0)

    geometric = BoundedSequence(lambda k: 10 * 0.5 ** k, tail_bound=lambda k: 10 * 0.5 ** (k + 1))
    assert is_in_delta(geometric, 0, strict=True)

    increasing = BoundedSequence.from_values([1.0, 2.0, 3.0], tail_bound=lambda k: 3.0)
    assert not is_in_delta(increasing, 0)
    assert is_in_delta(increasing, 2)
    assert not is_in_delta(increasing, 2, strict=True)


def test_is_in_delta_worked_example():
    from src.core.gallery import ExampleParams, closed_forms

    seq = closed_forms(ExampleParams.from_text(3, "1/3")).sequence()
    assert is_in_delta(seq, 2)
    assert not is_in_delta(seq, 1)


def test_greatest_maximizer_worked_example(worked_forms):
    seq = worked_forms.sequence()
    pair = verify_pair(seq, MonotoneBijection.linear(600.0), 0.5 ** 0.1, 30)
    assert greatest_maximizer(seq, pair) == 8


def test_greatest_maximizer_single_spike():
    seq = BoundedSequence.from_values([0.0, 7.0])
    pair = verify_pair(seq, MonotoneBijection.linear(20.0), 0.5, 20)
    assert greatest_maximizer(seq, pair) == 1
