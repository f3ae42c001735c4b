from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agids.errors import LengthMismatch
from agids.flows import ClassLabel
from agids.ids.metrics import confusion_matrix, delta, evaluate
from oracles import macro_f1

labels = st.lists(st.integers(0, 2), min_size=1, max_size=60)


@given(st.data())
@settings(max_examples=80, deadline=None)
def test_against_counting_oracle(data):
    truth = data.draw(labels)
    pred = data.draw(st.lists(st.integers(0, 2), min_size=len(truth), max_size=len(truth)))
    m = evaluate(pred, truth)
    assert m.accuracy == pytest.approx(sum(p == t for p, t in zip(pred, truth)) / len(truth))
    assert m.f1_macro == pytest.approx(macro_f1(pred, truth))
    benign = [p for p, t in zip(pred, truth) if t == 0]
    expected_fpr = sum(p != 0 for p in benign) / len(benign) if benign else 0.0
    assert m.fpr == pytest.approx(expected_fpr)
    assert np.asarray(m.confusion).sum() == len(truth)


def test_hand_computed():
    truth = [0, 0, 0, 1, 1, 2]
    pred = [0, 1, 0, 1, 0, 2]
    m = evaluate(pred, truth)
    assert m.accuracy == pytest.approx(4 / 6)
    assert m.fpr == pytest.approx(1 / 3)
    assert m.per_class[ClassLabel.FTP_PATATOR].recall == pytest.approx(0.5)
    assert m.attack_recall == {ClassLabel.FTP_PATATOR: 0.5, ClassLabel.DOS: 1.0}
    assert confusion_matrix(pred, truth, 3).tolist() == [[2, 1, 0], [1, 1, 0], [0, 0, 1]]


def test_absent_class_not_averaged():
    m = evaluate([0, 1, 1], [0, 1, 1])
    assert m.f1_macro == 1.0
    assert m.per_class[ClassLabel.DOS].support == 0


def test_delta_and_errors():
    a = evaluate([0, 1, 1], [0, 1, 0])
    b = evaluate([0, 1, 0], [0, 1, 0])
    d = delta(a, b)
    assert d.d_accuracy == pytest.approx(1 / 3)
    assert d.d_fpr == pytest.approx(-0.5)
    assert d.improved
    with pytest.raises(LengthMismatch):
        evaluate([0], [0, 1])
    with pytest.raises(ValueError):
        evaluate([], [])
