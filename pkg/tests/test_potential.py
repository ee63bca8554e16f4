import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zswkb.errors import ZeroPotential
from zswkb.potential import (FourierPotential, eval_d, eval_diff, extrema, negate,
                             normalize_to_max, translate)

coef = st.floats(-2, 2, allow_nan=False)


@st.composite
def potentials(draw, max_k=4):
    K = draw(st.integers(1, max_k))
    a = draw(st.lists(coef, min_size=K + 1, max_size=K + 1))
    b = draw(st.lists(coef, min_size=K, max_size=K))
    if not any(a[1:]) and not any(b):
        a[1] = 1.0
    return FourierPotential(tuple(a), tuple(b))


def test_eval_examples(cos_v, shifted_v):
    assert eval_d(cos_v, 0.0) == 1.0
    assert abs(eval_d(cos_v, 1j) - math.cosh(1)) < 1e-15
    assert abs(eval_d(cos_v, 1j) - 1.5430806348152437) < 1e-15
    assert abs(eval_d(shifted_v, math.pi) - 1 / 3) < 1e-15


def test_real_argument_gives_real_value(cos_v):
    assert np.isrealobj(eval_d(cos_v, np.linspace(0, 1, 5)))


def test_extrema_examples(cos_v, shifted_v, free_v):
    e = extrema(cos_v)
    assert (e.V0, e.V1) == pytest.approx((1, 0), abs=1e-12)
    e = extrema(shifted_v)
    assert (e.V0, e.V1) == pytest.approx((1, 1 / 3), abs=1e-12)
    e = extrema(free_v)
    assert (e.V0, e.V1) == (0.0, 0.0)


def test_extrema_argmax_values(shifted_v):
    e = extrema(shifted_v)
    for x in e.argmax_points:
        assert abs(abs(eval_d(shifted_v, x)) - e.V0) < 1e-12


def test_normalize_examples(cos_v, shifted_v):
    n = normalize_to_max(cos_v)
    assert n.cos_coeffs == pytest.approx(cos_v.cos_coeffs, abs=1e-15)
    s = normalize_to_max(FourierPotential((0.0,), (1.0,)))
    assert s.cos_coeffs == pytest.approx((0.0, 1.0), abs=1e-12)
    assert s.sin_coeffs == pytest.approx((0.0,), abs=1e-12)
    shifted = translate(shifted_v, -1.0)        # (2 + cos(x - 1)) / 3
    back = normalize_to_max(shifted)
    assert back.cos_coeffs == pytest.approx(shifted_v.cos_coeffs, abs=1e-12)
    assert back.sin_coeffs == pytest.approx((0.0,), abs=1e-12)


def test_normalize_negative_maximum():
    # |V| peaks only at the negative minimum; the result attains V0 at 0
    V = FourierPotential((-0.5, 1.0))
    n = normalize_to_max(V)
    assert abs(eval_d(n, 0.0) - extrema(V).V0) < 1e-12


def test_normalize_zero_raises(free_v):
    with pytest.raises(ZeroPotential):
        normalize_to_max(free_v)


@settings(max_examples=40, deadline=None)
@given(potentials(), st.floats(-3, 3), st.floats(-0.9, 0.9))
def test_schwarz_reflection(V, re, im):
    x = complex(re, im)
    assert abs(eval_d(V, x.conjugate()) - np.conj(eval_d(V, x))) <= 1e-14 * (1 + abs(eval_d(V, x)))


@settings(max_examples=40, deadline=None)
@given(potentials(), st.floats(-3, 3), st.floats(-0.9, 0.9), st.integers(0, 2))
def test_derivative_vs_central_difference(V, re, im, n):
    x, d = complex(re, im), 1e-5
    fd = (eval_d(V, x + d, n) - eval_d(V, x - d, n)) / (2 * d)
    exact = eval_d(V, x, n + 1)
    scale = sum(abs(c) * (k + 1) ** (n + 1) for k, c in enumerate(V.cos_coeffs + V.sin_coeffs))
    assert abs(fd - exact) <= 1e-6 * max(abs(exact), scale)


@settings(max_examples=30, deadline=None)
@given(potentials(), st.floats(0, 6.3))
def test_periodicity_and_translate(V, x):
    assert abs(eval_d(V, x + 2 * math.pi) - eval_d(V, x)) < 1e-12
    T = translate(V, 0.7)
    assert abs(eval_d(T, x) - eval_d(V, x + 0.7)) < 1e-12
    assert abs(eval_d(negate(V), x) + eval_d(V, x)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(potentials(max_k=3))
def test_normalized_value_at_zero(V):
    n = normalize_to_max(V)
    assert abs(eval_d(n, 0.0) - extrema(V).V0) < 1e-12 * max(1, extrema(V).V0)


@settings(max_examples=30, deadline=None)
@given(potentials(), st.floats(0, 6.3), st.floats(-1e-3, 1e-3))
def test_eval_diff_matches_difference(V, x, d):
    assert abs(eval_diff(V, x, d) - (eval_d(V, x + d) - eval_d(V, x))) < 1e-12
