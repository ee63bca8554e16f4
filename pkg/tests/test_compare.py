import math
from pathlib import Path

import numpy as np
import pytest

from zswkb.compare import (Fit, dedupe, edge_margin, fit_exponent, match, run_compare,
                           windows)
from zswkb.config import from_dict, load_config
from zswkb.errors import InsufficientLadder, WindowCertificationFailed
from zswkb.transition import Prediction

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def pred(z, k=0, j=None, stage=1):
    return Prediction("A", complex(z), k, j, 0j, stage)


def test_fit_recovers_power_law():
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    f = fit_exponent(hs, 3.0 * hs ** 2)
    assert f.exponent == pytest.approx(2.0, abs=1e-12)
    assert f.prefactor == pytest.approx(3.0, rel=1e-10)
    assert f.band[0] <= 2.0 <= f.band[1]
    assert not f.exact


def test_fit_band_uses_t_quantile():
    hs = np.array([0.2, 0.1, 0.05])
    rng = np.random.default_rng(3)
    errs = hs ** 1.5 * np.exp(rng.normal(0, 0.1, 3))
    f = fit_exponent(hs, errs)
    # n - 2 = 1 degree of freedom: t_0.975 = 12.706
    assert (f.band[1] - f.band[0]) / 2 == pytest.approx(12.7062 * f.stderr, rel=1e-4)


def test_fit_exact_and_insufficient():
    assert fit_exponent([0.2, 0.1, 0.05], [1e-15, 0.0, 3e-16]).exact
    with pytest.raises(InsufficientLadder):
        fit_exponent([0.2, 0.1], [1e-3, 2e-4])
    with pytest.raises(InsufficientLadder):
        fit_exponent([0.2, 0.1, 0.05], [1e-3, math.nan, 1e-5])


def test_dedupe_keeps_first_label():
    ps = [pred(0.5j, 3, 1), pred(0.5j * (1 + 1e-12), 3, 2), pred(0.6j, 4, 1)]
    out = dedupe(ps)
    assert [(p.j, p.k) for p in out] == [(1, 3), (1, 4)]


def test_match_is_a_bijection():
    preds = [pred(1.0), pred(1.001), pred(2.0)]
    roots = [1.0005, 1.0015, 5.0]
    pairs = match(preds, roots, h=0.1)
    assert len(pairs) == 2
    assert len({p.oracle for p in pairs}) == 2
    assert len({p.pred for p in pairs}) == 2
    # 2.0 has no root within 10 h
    assert all(p.pred != 2.0 for p in pairs)
    assert max(p.distance for p in pairs) <= 0.001


def test_windows_mode_b():
    cfg = from_dict({"mode": "B", "window": {"center": "0.5i", "radius": 0.1, "transverse": 0.03}})
    rect, in_window, inner = windows(cfg, 0.05)
    assert rect.im_min < 0.4 and rect.im_max > 0.6
    assert in_window(0.6j) and not in_window(0.61j)
    assert inner(0.5j + 0.0749j) and not inner(0.5j + 0.0751j)
    assert edge_margin(0.05, 0.1) == 0.025


def test_free_potential_is_exact():
    rep = run_compare(load_config(CONFIGS / "free.yaml"))
    assert rep.fit.exact
    for lv in rep.levels:
        assert lv.pairs and lv.unmatched_oracle == 0 and lv.unmatched_pred == 0
        for p in lv.pairs:
            assert abs(p.oracle - p.k * lv.h) <= 1e-10
    assert "exact" in rep.table()


def test_ladder_too_short():
    with pytest.raises(InsufficientLadder):
        run_compare(from_dict({"h_ladder": [0.2, 0.1]}))


def test_certification_blocks_bad_window():
    cfg = from_dict({"mode": "B", "window": {"center": "1.2i", "radius": 0.1}})
    with pytest.raises(WindowCertificationFailed):
        run_compare(cfg)
