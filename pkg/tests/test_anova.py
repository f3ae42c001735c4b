from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agids.errors import SingleClass
from agids.ids.anova import Direction, FeatureSelection, anova_f, select_features
from oracles import anova_exact


def assert_matches_oracle(x, y, rel=1e-9):
    got = anova_f(x, y)
    for g, e in zip(got, anova_exact(x, y)):
        if e == float("inf"):
            assert g == np.inf
        elif e == 0:
            assert g == pytest.approx(0.0, abs=1e-9)
        else:
            assert abs(g - float(e)) <= rel * float(e)


def test_textbook_example():
    x = np.array([[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]])
    y = [0, 0, 0, 1, 1, 1]
    # between SS 13.5 with 1 dof, within SS 4 with 4 dof
    assert anova_f(x, y)[0] == pytest.approx(13.5)


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_random_instances_match_exact(seed):
    rng = np.random.default_rng(seed)
    n, f = rng.integers(6, 40), rng.integers(1, 6)
    y = rng.integers(0, 3, n)
    y[:3] = [0, 1, 2]
    x = np.round(rng.normal(size=(n, f)) * 10, 3)
    assert_matches_oracle(x, y)


def test_sentinels():
    y = [0, 0, 1, 1]
    x = np.array([[1.0, 7.0, 1.0], [1.0, 7.0, 2.0], [2.0, 7.0, 1.0], [2.0, 7.0, 2.0]])
    f = anova_f(x, y)
    assert f[0] == np.inf  # perfectly separated, no spread inside classes
    assert f[1] == 0.0  # constant
    assert f[2] == 0.0  # identical class means
    with pytest.raises(SingleClass):
        anova_f(x, [0, 0, 0, 0])


@given(st.integers(0, 1000), st.floats(-1e3, 1e3), st.floats(0.5, 20))
@settings(max_examples=40, deadline=None)
def test_affine_invariance(seed, shift, scale):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(30, 3))
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    a, b = anova_f(x, y), anova_f(x * scale + shift, y)
    assert np.allclose(a, b, rtol=1e-6)


def test_select_best_and_worst():
    scores = [3.0, math.inf, 1.0, 3.0, 0.0]
    assert select_features(scores, 2).selected == (1, 0)
    assert select_features(scores, 3, Direction.BEST_K).selected == (1, 0, 3)
    assert select_features(scores, 2, "WorstK").selected == (4, 2)
    assert select_features(scores, 99).selected == (1, 0, 3, 2, 4)
    with pytest.raises(ValueError):
        select_features(scores, 0)


def test_selection_round_trip_and_apply():
    sel = select_features([2.0, math.inf, 0.5], 2)
    back = FeatureSelection.from_dict(sel.to_dict())
    assert back == sel
    m = np.arange(6.0).reshape(2, 3)
    assert sel.apply(m).tolist() == [[1.0, 0.0], [4.0, 3.0]]
