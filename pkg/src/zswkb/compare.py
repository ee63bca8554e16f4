"""Prediction vs oracle comparison over an h ladder, with a log-log error fit."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .actions import action_I
from .config import RunConfig
from .errors import InsufficientLadder, WindowCertificationFailed
from .oracle import Rect, locate_eigenvalues
from .stokes import certify_window
from .transition import solve_quantization_A, solve_quantization_B

MATCH_CUTOFF = 10.0     # in units of h
PRED_PAD = 0.05         # predictions are computed on a slightly larger window
EXACT_FLOOR = 1e-12


@dataclass
class MatchedPair:
    h: float
    pred: complex
    oracle: complex
    distance: float
    j: int | None
    k: int
    stage: int = 1

    def record(self) -> dict:
        return {"h": self.h, "stage": self.stage, "j": self.j, "k": self.k,
                "pred_re": self.pred.real, "pred_im": self.pred.imag,
                "oracle_re": self.oracle.real, "oracle_im": self.oracle.imag,
                "distance": self.distance}


@dataclass
class LevelResult:
    h: float
    stage: int
    pairs: list
    unmatched_pred: int
    unmatched_oracle: int
    n_oracle: int
    n_excluded: int
    quant_residual: float | None = None

    @property
    def max_distance(self) -> float:
        return max((p.distance for p in self.pairs), default=math.nan)

    def record(self) -> dict:
        return {"h": self.h, "stage": self.stage, "n_oracle": self.n_oracle,
                "n_excluded_edge": self.n_excluded, "n_matched": len(self.pairs),
                "unmatched_predictions": self.unmatched_pred,
                "unmatched_oracle": self.unmatched_oracle,
                "max_distance": self.max_distance,
                "quantization_residual": self.quant_residual}


@dataclass
class Fit:
    exponent: float
    stderr: float
    band: tuple
    prefactor: float
    exact: bool = False

    def record(self) -> dict:
        return {"exponent": self.exponent, "stderr": self.stderr,
                "band95": list(self.band), "prefactor": self.prefactor, "exact": self.exact}


@dataclass
class ComparisonReport:
    mode: str
    center: complex
    radius: float
    h_ladder: tuple
    levels: list = field(default_factory=list)
    fit: Fit | None = None
    fits_by_stage: dict = field(default_factory=dict)
    residual_fit: Fit | None = None
    certification: dict = field(default_factory=dict)

    @property
    def pairs(self):
        return [p for lv in self.levels for p in lv.pairs]

    def record(self) -> dict:
        return {"mode": self.mode, "center": [self.center.real, self.center.imag],
                "radius": self.radius, "h_ladder": list(self.h_ladder),
                "levels": [lv.record() for lv in self.levels],
                "fit": self.fit.record() if self.fit else None,
                "fits_by_stage": {str(k): v.record() for k, v in self.fits_by_stage.items()},
                "quantization_residual_fit": self.residual_fit.record() if self.residual_fit else None,
                "certification": self.certification}

    def table(self) -> str:
        rows = [f"mode {self.mode}  center {self.center:g}  radius {self.radius:g}",
                f"{'h':>8} {'stage':>5} {'oracle':>6} {'edge':>5} {'matched':>7} "
                f"{'unm.pred':>8} {'unm.orc':>7} {'max dist':>11} {'quant res':>11}"]
        for lv in self.levels:
            qr = "" if lv.quant_residual is None else f"{lv.quant_residual:.4e}"
            rows.append(f"{lv.h:8.4g} {lv.stage:5d} {lv.n_oracle:6d} {lv.n_excluded:5d} "
                        f"{len(lv.pairs):7d} {lv.unmatched_pred:8d} {lv.unmatched_oracle:7d} "
                        f"{lv.max_distance:11.4e} {qr:>11}")
        for st, f in sorted(self.fits_by_stage.items()):
            if f.exact:
                rows.append(f"stage {st}: exact (all distances <= {EXACT_FLOOR:g})")
                continue
            rows.append(f"stage {st}: exponent {f.exponent:.3f} +- {f.stderr:.3f} "
                        f"(95% [{f.band[0]:.3f}, {f.band[1]:.3f}])")
        if self.residual_fit:
            f = self.residual_fit
            rows.append("quantization residual: exact" if f.exact else
                        f"quantization residual: exponent {f.exponent:.3f} +- {f.stderr:.3f}")
        return "\n".join(rows)


def fit_exponent(hs, errs) -> Fit:
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    if len(hs) < 3:
        raise InsufficientLadder(f"need at least 3 h values, got {len(hs)}")
    if np.all(errs <= EXACT_FLOOR):
        return Fit(math.inf, 0.0, (math.inf, math.inf), 0.0, exact=True)
    if np.any(~np.isfinite(errs)) or np.any(errs <= 0):
        raise InsufficientLadder("missing or zero errors on some ladder rungs")
    r = stats.linregress(np.log(hs), np.log(errs))
    t = stats.t.ppf(0.975, len(hs) - 2)
    return Fit(float(r.slope), float(r.stderr),
               (float(r.slope - t * r.stderr), float(r.slope + t * r.stderr)),
               float(math.exp(r.intercept)))


def dedupe(preds, tol=1e-9):
    """Collapse coincident predictions (symmetric gaps give the same value
    for several j); the first label is kept."""
    out = []
    for p in preds:
        if all(abs(p.lam - q.lam) > tol * max(1.0, abs(q.lam)) for q in out):
            out.append(p)
    return out


def match(preds, roots, h, cutoff=None):
    """Greedy global nearest-neighbour bijection between distinct predicted
    values and distinct oracle roots, cutoff ``MATCH_CUTOFF * h``."""
    cutoff = MATCH_CUTOFF * h if cutoff is None else cutoff
    cand = sorted((abs(p.lam - z), i, s) for i, p in enumerate(preds)
                  for s, z in enumerate(roots) if abs(p.lam - z) <= cutoff)
    used_p, used_s, pairs = set(), set(), []
    for d, i, s in cand:
        if i in used_p or s in used_s:
            continue
        used_p.add(i)
        used_s.add(s)
        p = preds[i]
        pairs.append(MatchedPair(h, p.lam, roots[s], float(d), p.j, p.k, p.stage))
    pairs.sort(key=lambda q: (q.oracle.real, q.oracle.imag, q.pred.real, q.pred.imag))
    return pairs


def edge_margin(h, radius):
    return min(2 * h, radius / 4)


def windows(cfg: RunConfig, h: float):
    """(oracle rect, window test, interior test) for one rung.  The oracle
    rect extends PRED_PAD past the window so every in-window prediction has
    its partner available; edge roots are dropped after matching."""
    c, r = cfg.center, cfg.radius
    m = edge_margin(h, r)
    if cfg.mode == "A":
        rect = Rect(c.real - r - PRED_PAD, c.real + r + PRED_PAD,
                    c.imag - cfg.transverse, c.imag + cfg.transverse)
        offset = lambda z: abs(z.real - c.real)
    else:
        mu0 = c.imag
        rect = Rect(-cfg.transverse, cfg.transverse, mu0 - r - PRED_PAD, mu0 + r + PRED_PAD)
        offset = lambda z: abs(z.imag - mu0)
    return rect, (lambda z: offset(z) <= r), (lambda z: offset(z) <= r - m)


def _predict(cfg: RunConfig, h: float):
    c, r = cfg.center, cfg.radius
    if cfg.mode == "A":
        return solve_quantization_A(cfg.potential, c - r - 2 * PRED_PAD, c + r + 2 * PRED_PAD, h,
                                    cfg.k_range, cfg.newton_tol, quad_tol=cfg.quad_tol)
    mu0 = c.imag
    res = solve_quantization_B(cfg.potential, mu0 - r - 2 * PRED_PAD, mu0 + r + 2 * PRED_PAD, h,
                               cfg.k_range, cfg.stage2, cfg.newton_tol, quad_tol=cfg.quad_tol)
    if cfg.j_range is not None:
        lo, hi = cfg.j_range
        res.predictions = [p for p in res.predictions if lo <= p.j <= hi]
    return res


def run_level(cfg: RunConfig, h: float) -> list[LevelResult]:
    rect, in_window, inner = windows(cfg, h)
    roots = [r.lam for r in locate_eigenvalues(cfg.potential, h, rect)]
    window_roots = [z for z in roots if in_window(z)]
    n_inner = sum(1 for z in window_roots if inner(z))
    preds = _predict(cfg, h).predictions
    out = []
    for stage in sorted({p.stage for p in preds}) or [1]:
        ps = dedupe([p for p in preds if p.stage == stage and rect.contains(p.lam, 1e-9)])
        pairs = match(ps, roots, h)
        kept = [q for q in pairs if inner(q.oracle)]
        matched_pred = {complex(q.pred) for q in pairs}
        up = sum(1 for p in ps if inner(p.lam) and complex(p.lam) not in matched_pred)
        out.append(LevelResult(h, stage, kept, up, n_inner - len(kept),
                               n_inner, len(window_roots) - n_inner))
    if cfg.mode == "A":
        # quantization residual needs no partner: every root in the window counts
        step = 2 * math.pi * h
        res = []
        for z in window_roots:
            I = action_I(cfg.potential, z)[0].real
            res.append(abs(I - step * round(I / step)))
        for lv in out:
            lv.quant_residual = max(res, default=math.nan)
    return out


def run_compare(cfg: RunConfig, certify: bool = True) -> ComparisonReport:
    if len(cfg.h_ladder) < 3:
        raise InsufficientLadder(f"need at least 3 h values, got {len(cfg.h_ladder)}")
    rep = ComparisonReport(cfg.mode, cfg.center, cfg.radius, tuple(cfg.h_ladder))
    if certify and not cfg.potential.is_zero:
        cert = certify_window(cfg.potential, cfg.center, mode=cfg.mode)
        rep.certification = cert.record()
        if not cert.ok:
            raise WindowCertificationFailed("; ".join(cert.violations))
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        per_h = list(pool.map(lambda h: run_level(cfg, h), cfg.h_ladder))
    rep.levels = [lv for lvs in per_h for lv in lvs]
    for stage in sorted({lv.stage for lv in rep.levels}):
        lvs = [lv for lv in rep.levels if lv.stage == stage]
        rep.fits_by_stage[stage] = fit_exponent([lv.h for lv in lvs],
                                                [lv.max_distance for lv in lvs])
    rep.fit = rep.fits_by_stage[min(rep.fits_by_stage)]
    if cfg.mode == "A":
        lvs = [lv for lv in rep.levels if lv.stage == 1]
        rep.residual_fit = fit_exponent([lv.h for lv in lvs], [lv.quant_residual for lv in lvs])
    return rep
