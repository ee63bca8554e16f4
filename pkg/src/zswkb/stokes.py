"""Stokes lines (level curves of Re z) and window certification.

A Stokes line is traced with arclength s as the parameter.  With w^2 = V^2 + lam^2
(z' = i w) the direction dx/ds = |w|/w keeps dz/ds = i|w| purely imaginary,
so Re z is constant along the line.  w is carried in the state together with
x (dw/ds = f'/(2w) dx/ds), which keeps the square root on one sheet without
any separate branch bookkeeping.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .actions import gauss_legendre
from .errors import UnsupportedOrder
from .potential import FourierPotential, eval_d, extrema
from .turning_points import (TurningPoint, f_derivs, find_turning_points,
                             order_real_points, real_turning_points, stokes_ray_arguments)

TWO_PI = 2 * math.pi
START_OFFSET = 1e-4
NEAR_RADIUS = 1e-3
COINCIDE_TUBE = 1e-3
COLLISION_SEP = 1e-2
NEAR_REAL = 0.25
RTOL = 1e-10
MAX_STEP = 0.05
CUT_ARGS = {1: -math.pi / 3, 0: 2 * math.pi / 3}    # odd index -> -pi/3, even -> 2pi/3


@dataclass(frozen=True)
class Termination:
    kind: str                       # StripBoundary, NearTurningPoint, MaxLength, PeriodWrap
    index: int | None = None        # position in the turning point list (NearTurningPoint)
    point: complex | None = None    # the turning point reached (periodic image included)

    def __str__(self):
        return self.kind if self.index is None else f"{self.kind}({self.index})"


@dataclass
class StokesLine:
    source: TurningPoint
    initial_argument: float
    polyline: np.ndarray
    termination: Termination
    source_index: int | None = None
    deviation: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def bounded(self) -> bool:
        return self.termination.kind == "NearTurningPoint"

    @property
    def arclength(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.polyline)))])

    def fidelity(self) -> float:
        """max |Re z(p) - Re z(source)| / (arclength + start offset)."""
        s = self.arclength + START_OFFSET
        return float(np.max(np.abs(self.deviation) / s)) if self.deviation.size else 0.0

    def record(self) -> dict:
        return {"source_index": self.source_index, "arg": self.initial_argument,
                "points": [[float(p.real), float(p.imag)] for p in self.polyline],
                "termination": str(self.termination)}


def _sheet(r, guess):
    return np.where(np.abs(r - guess) <= np.abs(-r - guess), r, -r)


def _z_from_tp(V, lam, tp: TurningPoint, x, w):
    """z(x) - z(tp) on the sheet where sqrt(f)(x) = w, via x = tp + (x - tp) u^2."""
    d = x - tp.position
    ug, wu = gauss_legendre(16)
    u = 0.5 * (ug + 1)
    r = np.sqrt(eval_d(V, tp.position + d * u * u) ** 2 + lam * lam + 0j)
    r = _sheet(r, w * u ** tp.order)
    return 1j * np.sum(0.5 * wu * r * 2 * u * d)


def _start_state(V, lam, tp: TurningPoint, arg: float):
    e = cmath.exp(1j * arg)
    x = tp.position + START_OFFSET * e
    f = complex(eval_d(V, x)) ** 2 + lam * lam
    w = cmath.sqrt(f)
    # pick the sheet whose level-curve direction |w|/w is the ray direction
    if abs(abs(w) / w - e) > abs(-abs(w) / w - e):
        w = -w
    # the ray is only tangent to the line; step across it onto Re z = Re z(tp)
    for _ in range(3):
        g = _z_from_tp(V, lam, tp, x, w).real
        slope = -(w * e).real            # d/dt Re z(x + i e t)
        if slope == 0:
            break
        x = x - 1j * e * g / slope
        w = complex(_sheet(np.sqrt(complex(eval_d(V, x)) ** 2 + lam * lam + 0j), w))
    return x, w


def _re_z_deviation(V, lam, tp: TurningPoint, poly, wvals):
    """Re z(p) - Re z(source) along the polyline, by 3-point Gauss per segment."""
    lam2 = lam * lam
    z0 = _z_from_tp(V, lam, tp, poly[0], wvals[0])
    t, wg = gauss_legendre(3)
    a, b = poly[:-1], poly[1:]
    wa, wb = wvals[:-1], wvals[1:]
    dz = np.zeros(len(a), dtype=complex)
    for tk, wk in zip(t, wg):
        s = 0.5 * (tk + 1)
        xm = a + (b - a) * s
        r = np.sqrt(eval_d(V, xm) ** 2 + lam2 + 0j)
        guess = wa + (wb - wa) * s
        r = _sheet(r, guess)
        dz += 0.5 * wk * r * (b - a)
    z = z0 + np.concatenate([[0.0], np.cumsum(1j * dz)])
    return z.real


def trace_stokes_line(V: FourierPotential, lam: complex, tp: TurningPoint, arg: float,
                      strip_bound: float | None = None, max_len: float = 4 * math.pi,
                      tps: Sequence[TurningPoint] | None = None,
                      source_index: int | None = None) -> StokesLine:
    """Follow the Stokes line leaving ``tp`` in direction ``arg``.

    ``tps`` are the turning points that end a line (default: all points in
    the strip); periodic images are included automatically.
    """
    lam = complex(lam)
    if tp.order not in (1, 2):
        raise UnsupportedOrder(f"turning point of order {tp.order}")
    strip_bound = V.strip if strip_bound is None else strip_bound
    if tps is None:
        tps = find_turning_points(V, lam, strip_bound, verify=False)
    x0, w0 = _start_state(V, lam, tp, arg)
    src = tp.position

    def rhs(s, y):
        x, w = y
        dx = abs(w) / w
        fp = 2 * complex(eval_d(V, x)) * complex(eval_d(V, x, 1))
        return [dx, fp / (2 * w) * dx]

    targets = []
    for i, q in enumerate(tps):
        for m in (-2, -1, 0, 1, 2):
            p = q.position + TWO_PI * m
            targets.append((q.index if q.index is not None else i, p))

    events = []
    labels = []
    for i, p in targets:
        def ev(s, y, p=p):
            return abs(y[0] - p) - NEAR_RADIUS
        ev.terminal, ev.direction = True, -1
        events.append(ev)
        labels.append(Termination("NearTurningPoint", i, p))

    def ev_strip(s, y):
        return strip_bound - abs(y[0].imag)
    ev_strip.terminal, ev_strip.direction = True, -1

    def ev_wrap(s, y):
        return TWO_PI - abs(y[0].real - src.real)
    ev_wrap.terminal, ev_wrap.direction = True, -1
    events += [ev_strip, ev_wrap]
    labels += [Termination("StripBoundary"), Termination("PeriodWrap")]

    sol = solve_ivp(rhs, (0.0, max_len), np.array([x0, w0], dtype=complex), method="RK45",
                    rtol=RTOL, atol=RTOL, max_step=MAX_STEP, events=events, dense_output=False)
    poly = np.concatenate([[src], sol.y[0]])
    wv = sol.y[1]
    term = Termination("MaxLength")
    if sol.status == 1:
        hit = [k for k, te in enumerate(sol.t_events) if len(te)]
        # the earliest event wins (solve_ivp stops at the first terminal one)
        k = min(hit, key=lambda k: sol.t_events[k][0])
        term = labels[k]
        poly = np.concatenate([poly, sol.y_events[k][0][:1]])
        wv = np.concatenate([wv, sol.y_events[k][0][1:2]])
        # y_events already equals the last sample when solve_ivp appends it
        if abs(poly[-1] - poly[-2]) == 0:
            poly, wv = poly[:-1], wv[:-1]
    dev = _re_z_deviation(V, lam, tp, poly[1:], wv)
    return StokesLine(tp, float(arg), poly, term, source_index,
                      np.concatenate([[0.0], dev]))


def trace_all(V: FourierPotential, lam: complex, tps: Sequence[TurningPoint] | None = None,
              strip_bound: float | None = None, max_len: float = 4 * math.pi,
              sources: Sequence[TurningPoint] | None = None) -> list[StokesLine]:
    """Every Stokes line from every source point (n + 2 per point)."""
    strip_bound = V.strip if strip_bound is None else strip_bound
    if tps is None:
        tps = find_turning_points(V, lam, strip_bound, verify=False)
    sources = tps if sources is None else sources
    out = []
    for i, tp in enumerate(sources):
        idx = tp.index if tp.index is not None else i
        for a in stokes_ray_arguments(tp, V, lam).arguments:
            out.append(trace_stokes_line(V, lam, tp, a, strip_bound, max_len, tps, idx))
    return out


@dataclass
class Certification:
    ok: bool
    mode: str
    bounded_lines: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def record(self) -> dict:
        return {"ok": self.ok, "mode": self.mode,
                "bounded_lines": [ln.record() for ln in self.bounded_lines],
                "violations": list(self.violations)}


def _hausdorff_to_segment(poly, a, b):
    d = b - a
    t = np.clip(((poly - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return float(np.max(np.abs(poly - (a + t * d))))


def certify_window(V: FourierPotential, lam: complex, tps: Sequence[TurningPoint] | None = None,
                   tube: float = 0.1, strip_bound: float | None = None,
                   mode: str | None = None) -> Certification:
    """Check the geometric preconditions at a window center.

    Mode A (lam near the real axis): no turning point within ``tube`` of R.
    Mode B (lam = i mu): V1 < mu < V0, an even number of simple near-real
    points with no near collisions, and no bounded Stokes line lying along
    one of the S_j segments [x_{2j-1}, x_{2j}].
    """
    lam = complex(lam)
    strip_bound = V.strip if strip_bound is None else strip_bound
    mode = mode or ("A" if abs(lam.real) >= abs(lam.imag) else "B")
    violations = []
    if tps is None:
        try:
            tps = find_turning_points(V, lam, strip_bound)
        except Exception as exc:      # diagnostic: report, never raise
            return Certification(False, mode, [], [f"turning point search failed: {exc}"])
    if mode == "A":
        near = [tp for tp in tps if abs(tp.position.imag) < tube]
        for tp in near:
            violations.append(f"turning point {tp.position:.6g} within {tube:g} of the real axis")
        return Certification(not violations, mode, [], violations)

    mu = lam.imag
    ex = extrema(V)
    if not ex.V1 < mu < ex.V0:
        violations.append(f"mu = {mu:.12g} outside (V1, V0) = ({ex.V1:.12g}, {ex.V0:.12g})")
    near = sorted((tp for tp in tps if abs(tp.position.imag) < NEAR_REAL),
                  key=lambda tp: tp.position.real)
    if len(near) % 2:
        violations.append(f"odd number ({len(near)}) of near-real turning points")
    if any(tp.order != 1 for tp in near):
        violations.append("non-simple near-real turning point")
    for p, q in zip(near, near[1:] + near[:1]):
        d = q.position - p.position
        d = complex((d.real + math.pi) % TWO_PI - math.pi, d.imag)
        if p is not q and abs(d) < COLLISION_SEP:
            violations.append(f"near collision of turning points {p.position:.6g}, {q.position:.6g}")
    bounded = []
    if not violations:
        try:
            ordered = order_real_points(V, mu, [TurningPoint(complex(tp.position.real, 0.0),
                                                             tp.order, tp.kind) for tp in near])
        except Exception as exc:
            violations.append(f"ordering failed: {exc}")
            ordered = []
        # trace from the actual (possibly slightly complex) points, with circle indices
        idx = {id(tp): o.index for tp, o in zip(near, ordered)}
        sources = [replace(tp, index=idx[id(tp)]) for tp in near] if ordered else []
        stops = sources + [tp for tp in tps if all(tp is not q for q in near)]
        lines = trace_all(V, lam, stops, strip_bound, sources=sources) if sources else []
        bounded = [ln for ln in lines if ln.bounded]
        xs = [tp.position.real for tp in ordered]
        for j in range(len(xs) // 2):
            a, b = xs[2 * j], xs[2 * j + 1]
            for ln in bounded:
                if _hausdorff_to_segment(ln.polyline, a, b) <= COINCIDE_TUBE:
                    violations.append(f"bounded Stokes line from x_{ln.source_index} lies on "
                                      f"the S_{j + 1} contour")
    return Certification(not violations, mode, bounded, violations)


def branch_cuts(V: FourierPotential, mu: float, tps: Sequence[TurningPoint] | None = None,
                strip_bound: float | None = None, max_len: float = 2.0) -> list[StokesLine]:
    """Cuts from odd points along argument -pi/3 and from even points along 2pi/3."""
    lam = 1j * mu
    strip_bound = V.strip if strip_bound is None else strip_bound
    alltps = find_turning_points(V, lam, strip_bound, verify=False)
    if tps is None:
        tps = order_real_points(V, mu, real_turning_points(alltps, 1e-7))
    out = []
    for tp in tps:
        target = CUT_ARGS[tp.index % 2]
        args = stokes_ray_arguments(tp, V, lam).arguments
        a = min(args, key=lambda t: abs(cmath.exp(1j * t) - cmath.exp(1j * target)))
        out.append(trace_stokes_line(V, lam, tp, a, strip_bound, max_len, alltps, tp.index))
    return out
