import cmath
import math

import numpy as np
import pytest

from zswkb.errors import UnsupportedOrder
from zswkb.stokes import (NEAR_RADIUS, branch_cuts, certify_window, trace_all,
                          trace_stokes_line)
from zswkb.turning_points import (TurningPoint, find_turning_points, order_real_points,
                                  real_turning_points, stokes_ray_arguments)

FIDELITY = 1e-8


def indexed_real(V, mu):
    tps = find_turning_points(V, 1j * mu)
    return order_real_points(V, mu, real_turning_points(tps, 1e-7)), tps


def ray_toward(tp, V, lam, target):
    args = stokes_ray_arguments(tp, V, lam).arguments
    return min(args, key=lambda a: abs(cmath.exp(1j * a) - target / abs(target)))


def test_even_point_reaches_next_odd_point(cos_v):
    pts, tps = indexed_real(cos_v, 0.5)
    x2 = next(tp for tp in pts if tp.index == 2)
    assert abs(x2.position - 2 * math.pi / 3) < 1e-12
    a = ray_toward(x2, cos_v, 0.5j, 1.0)
    ln = trace_stokes_line(cos_v, 0.5j, x2, a, tps=pts, source_index=2)
    assert ln.termination.kind == "NearTurningPoint"
    assert ln.termination.index == 3
    assert abs(ln.polyline[-1] - 4 * math.pi / 3) <= NEAR_RADIUS * 1.01
    # the line runs along the real axis
    assert np.max(np.abs(ln.polyline.imag)) < 1e-6
    assert ln.fidelity() <= FIDELITY


def test_vertical_ray_from_x1_keeps_re_z(cos_v):
    pts, tps = indexed_real(cos_v, 0.5)
    x1 = next(tp for tp in pts if tp.index == 1)
    assert abs(x1.position - math.pi / 3) < 1e-12
    a = ray_toward(x1, cos_v, 0.5j, 1j)
    ln = trace_stokes_line(cos_v, 0.5j, x1, a, tps=tps)
    assert ln.polyline[-1].imag > 0.5
    assert ln.fidelity() <= FIDELITY
    assert np.max(np.abs(ln.deviation)) <= FIDELITY * (ln.arclength[-1] + 1e-4)


@pytest.mark.parametrize("lam", [0.5j, 1.0, 0.5j + 0.05, 0.3j, 2.0, 0.7 + 0.02j])
def test_fidelity_and_ray_counts(cos_v, lam):
    tps = find_turning_points(cos_v, lam)
    lines = trace_all(cos_v, lam, tps)
    assert len(lines) == sum(tp.order + 2 for tp in tps)
    for ln in lines:
        assert ln.fidelity() <= FIDELITY
    for tp in tps:
        assert sum(1 for ln in lines if ln.source.position == tp.position) == tp.order + 2


def test_double_points_emit_four_lines(cos_v):
    # lam = i V0: the real points merge pairwise at 0 and pi
    tps = find_turning_points(cos_v, 1j)
    assert [tp.order for tp in tps] == [2, 2]
    lines = trace_all(cos_v, 1j, tps)
    assert len(lines) == 8
    assert max(ln.fidelity() for ln in lines) <= FIDELITY


def test_lambda_one_has_no_real_axis_lines(cos_v):
    tps = find_turning_points(cos_v, 1.0)
    assert not any(tp.is_real for tp in tps)
    lines = trace_all(cos_v, 1.0, tps)
    for ln in lines:
        # every line stays in the half plane of its source
        assert np.all(np.sign(ln.polyline.imag) == np.sign(ln.source.position.imag))
        assert np.min(np.abs(ln.polyline.imag)) > 0.4
    # the vertical rays (argument +-pi/2) escape to the strip boundary
    for ln in lines:
        if abs(abs(ln.initial_argument) - math.pi / 2) < 1e-9:
            assert ln.termination.kind == "StripBoundary"


def test_bounded_real_lines_at_half_i(cos_v):
    cert = certify_window(cos_v, 0.5j)
    assert cert.ok and cert.mode == "B"
    pairs = {(ln.source_index, ln.termination.index) for ln in cert.bounded_lines}
    # 2 -> 3 and 4 -> 1 (through the period), plus their reverses
    assert {(2, 3), (3, 2)} <= pairs
    assert any(p in pairs for p in [(4, 1), (1, 4)])
    for ln in cert.bounded_lines:
        assert np.max(np.abs(ln.polyline.imag)) < 1e-6


def test_bounded_lines_vanish_off_axis(cos_v):
    lam = 0.5j + 0.05
    tps = find_turning_points(cos_v, lam)
    lines = trace_all(cos_v, lam, tps)
    assert not any(ln.bounded for ln in lines)
    assert certify_window(cos_v, lam, mode="B").bounded_lines == []


def test_certify_cases(cos_v, shifted_v):
    assert certify_window(cos_v, 0.5j).ok
    c = certify_window(cos_v, 1.0)
    assert c.ok and c.mode == "A"
    bad = certify_window(cos_v, 1j * (1 + 1e-6))
    assert not bad.ok
    assert any("outside" in v for v in bad.violations)
    assert certify_window(shifted_v, 0.6j).ok
    # mode A with points close to the axis
    near = certify_window(cos_v, 0.05, mode="A")
    assert not near.ok


def test_certify_never_raises(cos_v):
    # lam = 0 is the excluded double-point case; certification reports it
    c = certify_window(cos_v, 0.0, mode="B")
    assert not c.ok


def test_branch_cut_arguments(cos_v):
    cuts = branch_cuts(cos_v, 0.5)
    assert [c.source_index for c in cuts] == [1, 2, 3, 4]
    for c in cuts:
        want = -math.pi / 3 if c.source_index % 2 else 2 * math.pi / 3
        assert abs(cmath.exp(1j * c.initial_argument) - cmath.exp(1j * want)) < 1e-9
        assert c.fidelity() <= FIDELITY


def test_order_three_rejected(cos_v):
    tp = TurningPoint(complex(math.pi / 2), 3, None)
    with pytest.raises(UnsupportedOrder):
        trace_stokes_line(cos_v, 0.5j, tp, 0.0)
