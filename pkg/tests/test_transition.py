import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zswkb.actions import actions_SI
from zswkb.errors import TurningPointOnPath
from zswkb.selftest import random_admissible, trace_identity_error
from zswkb.transition import (CLASSICAL_FORBIDDEN, DIRECT_LIMIT, FORBIDDEN_PAIRS, LeadingTransition,
                              admissible, e_matrix, leading_trace, solve_quantization_A,
                              solve_quantization_B)


def test_e_matrices():
    assert np.array_equal(e_matrix(1), np.array([[1, 1j], [-1j, 1]]))
    for m in range(1, 5):
        assert abs(np.linalg.det(e_matrix(m))) < 1e-15
    assert [np.trace(e_matrix(m)) for m in range(1, 5)] == [2, 0, 0, 2]
    with pytest.raises(ValueError):
        e_matrix(5)


def test_admissible_examples():
    assert admissible([2, 3])
    assert admissible([1])
    assert not admissible([1, 4])
    assert not admissible([2, 2])
    assert not admissible([])
    assert CLASSICAL_FORBIDDEN <= FORBIDDEN_PAIRS
    assert FORBIDDEN_PAIRS - CLASSICAL_FORBIDDEN == {(2, 2), (3, 3)}


def test_admissible_needs_cyclic_check():
    # (1, 2) is allowed but the wrap-around (2, 1) is not
    assert not admissible([1, 2])
    assert admissible([1, 2, 4, 3])
    assert not admissible([1, 2, 3, 4])


def test_single_type_one_trace():
    S, I, h = 0.3, 1.1, 0.2
    r = leading_trace([LeadingTransition(1, 1, S, I, h)])
    assert abs(r.direct - math.exp(S / h) * 2 * math.cos(I / h)) < 1e-12 * math.exp(S / h)
    assert abs(r.closed - r.direct) < 1e-12 * math.exp(S / h)


def test_quarter_period_actions_kill_the_factor():
    h = 0.1
    ts = [LeadingTransition(1, 2, 0.4, math.pi * h / 2, h),
          LeadingTransition(2, 3, 0.4, math.pi * h / 2, h)]
    r = leading_trace(ts)
    assert abs(r.factor) < 1e-14
    assert abs(r.direct) < 1e-12 * math.exp(0.8 / h)


def test_leading_products_are_singular():
    ts = [LeadingTransition(1, 2, 0.4, 0.3, 0.1), LeadingTransition(2, 3, -0.2, 1.7, 0.1)]
    P = ts[1].matrix() @ ts[0].matrix()
    assert abs(np.linalg.det(P)) <= 1e-14 * np.linalg.norm(P) ** 2


def test_direct_product_skipped_on_overflow():
    h = 0.01
    S = (DIRECT_LIMIT + 1) * h
    r = leading_trace([LeadingTransition(1, 1, S, 0.3, h)])
    assert r.direct is None
    assert abs(r.direct_reduced - r.factor) < 1e-12 * 2
    assert abs(r.log_scale - S / h) < 1e-9


def test_trace_identity_many_draws():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(10_000):
        seq = random_admissible(rng)
        S = rng.uniform(-2, 2, len(seq))
        I = rng.uniform(-10, 10, len(seq))
        worst = max(worst, trace_identity_error(seq, S, I, 1.0))
    assert worst <= 1e-12


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), h=st.floats(0.05, 2.0),
       im_scale=st.floats(0.0, 1.0))
def test_trace_identity_complex_actions(seed, h, im_scale):
    rng = np.random.default_rng(seed)
    seq = random_admissible(rng)
    S = rng.uniform(-1, 1, len(seq)) + 1j * rng.uniform(-1, 1, len(seq))
    I = rng.uniform(-3, 3, len(seq)) + 1j * im_scale * h * rng.uniform(-1, 1, len(seq))
    assert trace_identity_error(seq, S, I, h) <= 1e-12


def test_free_potential_gives_kh(free_v):
    h = 0.1
    res = solve_quantization_A(free_v, 0.23, 0.97, h)
    assert [p.k for p in res.predictions] == list(range(3, 10))
    for p in res.predictions:
        assert abs(p.lam - p.k * h) <= 1e-14
        assert p.lam.imag == 0.0


def test_real_window_gives_real_predictions(cos_v):
    res = solve_quantization_A(cos_v, 0.7, 1.3, 0.1)
    assert len(res.predictions) == 5
    assert all(abs(p.lam.imag) <= 1e-10 for p in res.predictions)
    # a conjugated window returns the conjugated values
    lo = solve_quantization_A(cos_v, 0.7 - 0.01j, 1.3 - 0.01j, 0.1)
    hi = solve_quantization_A(cos_v, 0.7 + 0.01j, 1.3 + 0.01j, 0.1)
    for a, b in zip(lo.predictions, hi.predictions):
        assert a.k == b.k
        assert abs(a.lam - np.conj(b.lam)) <= 1e-10


def test_k_range_filters(cos_v):
    res = solve_quantization_A(cos_v, 0.7, 1.3, 0.1, k_range=(11, 12))
    assert [p.k for p in res.predictions] == [11, 12]


def test_window_crossing_real_points_rejected(cos_v):
    # on the imaginary axis the turning points sit on R and I(lambda) is undefined
    with pytest.raises(TurningPointOnPath):
        solve_quantization_A(cos_v, 0.05j, 0.4j, 0.1)


@pytest.mark.parametrize("which, mu0", [("cos", 0.5), ("shifted", 0.6)])
def test_stage_two_shift_is_exponentially_small(cos_v, shifted_v, which, mu0):
    V = cos_v if which == "cos" else shifted_v
    for h in (0.1, 0.05):
        res = solve_quantization_B(V, mu0 - 0.1, mu0 + 0.1, h)
        assert not res.failures
        s1 = [p for p in res.predictions if p.stage == 1]
        s2 = [p for p in res.predictions if p.stage == 2]
        assert len(s1) == len(s2) > 0
        for a, b in zip(s1, s2):
            assert (a.j, a.k) == (b.j, b.k)
            acts = actions_SI(V, a.lam.imag)
            bound = h * math.exp(-sum(acts.S).real / (acts.l * h))
            assert abs(a.lam - b.lam) <= bound
            assert abs(acts.I[a.j - 1] - (a.k + 0.5) * math.pi * h) <= 1e-10


def test_symmetric_gaps_agree(cos_v):
    res = solve_quantization_B(cos_v, 0.4, 0.6, 0.05, stage2=False)
    by_j = {}
    for p in res.predictions:
        by_j.setdefault(p.j, []).append(p.lam)
    assert set(by_j) == {1, 2}
    assert np.allclose(by_j[1], by_j[2], rtol=1e-9, atol=0)
