"""Branch-tracked square roots and the action integrals I, S_j, I_j.

Roots are continued along a sampled path by phase unwrapping: between
consecutive samples the argument of the radicand must change by less than
MAX_PHASE_STEP, otherwise the interval is bisected.  Integrals with square
root endpoint singularities use t = endpoint +- s^2 on each half interval,
which makes the integrand analytic in s so Gauss-Legendre converges
spectrally.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import BranchAmbiguity, SingularEndpoint, TurningPointOnPath
from .potential import FourierPotential, eval_d, eval_diff
from .turning_points import (Kind, TurningPoint, classify_gaps, f_derivs,
                             find_turning_points, order_real_points,
                             real_turning_points)

TWO_PI = 2 * math.pi
MAX_PHASE_STEP = 0.5      # radians of the radicand between samples
MAX_MOD_RATIO = 2.0
MAX_REFINE = 14
CLEARANCE = 1e-3
QUAD_TOL = 1e-12
MAX_NODES = 4096


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@dataclass(frozen=True)
class Path:
    """Piecewise linear path through ``waypoints``.

    ``order`` is the number of samples per segment used when the path is
    handed to the root tracker.
    """

    waypoints: tuple
    order: int = 64

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(complex(w) for w in self.waypoints))
        if len(self.waypoints) < 2:
            raise ValueError("a path needs at least two waypoints")

    def samples(self, order: int | None = None) -> np.ndarray:
        n = order or self.order
        pts = [self.waypoints[0]]
        for a, b in zip(self.waypoints[:-1], self.waypoints[1:]):
            s = np.arange(1, n + 1) / n
            pts.extend(a + (b - a) * s)
        return np.array(pts, dtype=complex)

    @property
    def length(self) -> float:
        w = self.waypoints
        return float(sum(abs(b - a) for a, b in zip(w[:-1], w[1:])))

    def conj(self) -> "Path":
        return Path(tuple(np.conj(self.waypoints)), self.order)

    def reversed(self) -> "Path":
        return Path(self.waypoints[::-1], self.order)


def segment_distance(p: complex, a: complex, b: complex) -> float:
    d = b - a
    if d == 0:
        return abs(p - a)
    t = ((p - a) * d.conjugate()).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * d))


def check_clearance(path: Path, tps: Sequence[TurningPoint], clearance: float = CLEARANCE,
                    endpoints_ok: bool = True, periods=(-1, 0, 1)):
    """Raise TurningPointOnPath if the path passes within ``clearance`` of a
    turning point (or a periodic image) other than at a designated endpoint."""
    w = path.waypoints
    ends = (w[0], w[-1]) if endpoints_ok else ()
    for tp in tps:
        for n in periods:
            p = tp.position + TWO_PI * n
            if any(abs(p - e) < 1e-9 for e in ends):
                continue
            for a, b in zip(w[:-1], w[1:]):
                if segment_distance(p, a, b) < clearance:
                    raise TurningPointOnPath(f"path passes within {clearance:g} of "
                                             f"turning point {p:.6g}")


def continued_root(func: Callable, pts, anchor: complex, power: int = 2,
                   max_refine: int = MAX_REFINE):
    """Continuous determination of func(x)^(1/power) along the sample points.

    Returns (points, values); ``points`` may contain inserted midpoints.  The
    first value equals ``anchor``, which must be one of the power-th roots of
    func(pts[0]).
    """
    pts = np.asarray(pts, dtype=complex)
    for _ in range(max_refine + 1):
        F = np.asarray(func(pts), dtype=complex)
        if np.any(F == 0):
            raise BranchAmbiguity("path runs through a zero of the radicand")
        ratio = F[1:] / F[:-1]
        dphi = np.angle(ratio)
        mod = np.abs(ratio)
        bad = (np.abs(dphi) > MAX_PHASE_STEP) | (mod > MAX_MOD_RATIO) | (mod < 1 / MAX_MOD_RATIO)
        if not bad.any():
            break
        idx = np.nonzero(bad)[0]
        mids = 0.5 * (pts[idx] + pts[idx + 1])
        pts = np.insert(pts, idx + 1, mids)
    else:
        raise BranchAmbiguity("root continuation did not resolve; path too close to a "
                              "turning point")
    phase = cmath.phase(F[0]) + np.concatenate([[0.0], np.cumsum(dphi)])
    vals = np.abs(F) ** (1.0 / power) * np.exp(1j * phase / power)
    # rotate onto the anchor's root of unity
    k = round(cmath.phase(anchor / vals[0]) / (TWO_PI / power))
    vals = vals * cmath.exp(2j * math.pi * k / power)
    if abs(vals[0] - anchor) > 1e-6 * max(abs(anchor), 1e-300):
        raise ValueError("anchor value is not a root of the radicand at the path start")
    return pts, vals


@dataclass
class BranchTrackedSqrt:
    anchor_point: complex
    anchor_value: complex
    path: Path
    points: np.ndarray
    values: np.ndarray

    @property
    def terminal_value(self) -> complex:
        return complex(self.values[-1])


def radicand(V: FourierPotential, lam: complex):
    lam2 = complex(lam) ** 2
    return lambda x: eval_d(V, x) ** 2 + lam2


def track_sqrt(V: FourierPotential, lam: complex, path: Path, anchor_value: complex | None = None,
               tps: Sequence[TurningPoint] | None = None, clearance: float = CLEARANCE
               ) -> BranchTrackedSqrt:
    """Continue (V^2 + lam^2)^(1/2) along ``path`` from its first waypoint.

    Without ``anchor_value`` the principal root at the start is used.
    """
    if tps is not None:
        check_clearance(path, tps, clearance)
    F = radicand(V, lam)
    start = path.waypoints[0]
    if anchor_value is None:
        anchor_value = cmath.sqrt(F(start))
    elif abs(anchor_value ** 2 - F(start)) > 1e-10 * max(1.0, abs(F(start))):
        raise ValueError("anchor_value^2 does not match V^2 + lam^2 at the anchor")
    pts, vals = continued_root(F, path.samples(), anchor_value)
    return BranchTrackedSqrt(start, complex(anchor_value), path, pts, vals)


# ---------------------------------------------------------------------------
# quadrature helpers


def _converge(fn, n0=64, tol=QUAD_TOL, nmax=MAX_NODES):
    """Evaluate fn(n) for n = n0, 2n0, ... until successive results agree."""
    n = n0
    prev = fn(n)
    while True:
        n *= 2
        cur = fn(n)
        scale = max(np.max(np.abs(np.atleast_1d(cur))), 1e-300)
        err = float(np.max(np.abs(np.atleast_1d(cur) - np.atleast_1d(prev))))
        if err <= tol * scale or n >= nmax:
            return cur, err / scale, n
        prev = cur


def endpoint_integral(F: Callable, a: complex, b: complex, anchor_mid: complex,
                      kernels: Sequence[Callable], n: int, F_near: Callable | None = None):
    """Integrals of kernel(root, t) over [a, b] where root = F^(1/2) vanishes
    at both ends like a square root.

    The interval is split at its midpoint m; on each half t = end + (m - end) s^2.
    The root is continued from ``anchor_mid`` at m towards each endpoint.
    ``F_near(end, delta)`` may supply F(end + delta) free of cancellation.
    """
    m = 0.5 * (a + b)
    s, w = gauss_legendre(n)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    order = np.argsort(-s)
    s, w = s[order], w[order]
    total = np.zeros(len(kernels), dtype=complex)
    for end in (a, b):
        delta = (m - end) * s * s
        t = end + delta
        # track in the offset coordinate so that t - end is never recomputed
        if F_near is None:
            func = lambda d, end=end: F(end + d)
        else:
            func = lambda d, end=end: F_near(end, d)
        pts, vals = continued_root(func, np.concatenate([[m - end], delta]), anchor_mid)
        # drop any refinement points, keep the quadrature nodes
        node_vals = _pick(pts, vals, delta)
        jac = 2.0 * (m - end) * s
        # int_end^m, with orientation from a to b
        sign = 1.0 if end == a else -1.0
        for i, k in enumerate(kernels):
            total[i] += sign * np.sum(w * jac * k(node_vals, t))
    return total


def _pick(pts, vals, targets):
    if len(pts) == len(targets) + 1:
        return vals[1:]
    out = np.empty(len(targets), dtype=complex)
    j = 1
    for i, t in enumerate(targets):
        while pts[j] != t:
            j += 1
        out[i] = vals[j]
    return out


def _check_simple_end(F_d1: Callable, x: complex, length: float, scale: float):
    if abs(F_d1(x)) * length < 1e-8 * scale:
        raise SingularEndpoint(f"radicand has a multiple zero at {x:.6g}")


# ---------------------------------------------------------------------------
# mode A


@dataclass
class ActionA:
    lam: complex
    I: complex
    dI: complex
    nodes: int
    error: float


def action_I(V: FourierPotential, lam: complex, clearance: float = CLEARANCE,
             tol: float = QUAD_TOL, check: bool = True) -> tuple[complex, complex]:
    """I(lam) = int_0^{2pi} (V^2 + lam^2)^(1/2) dt and dI/dlam."""
    r = action_I_full(V, lam, clearance, tol, check)
    return r.I, r.dI


def action_I_full(V: FourierPotential, lam: complex, clearance: float = CLEARANCE,
                  tol: float = QUAD_TOL, check: bool = True) -> ActionA:
    lam = complex(lam)
    if check:
        near = find_turning_points(V, lam, min(clearance, V.strip), allow_zero=True, verify=False) \
            if not V.is_zero else []
        if near or lam == 0:
            raise TurningPointOnPath("turning point within clearance of the real axis")
    F = radicand(V, lam)
    anchor = cmath.sqrt(F(0.0))
    if anchor.real < 0:
        anchor = -anchor
    segs = 4

    def compute(n):
        s, w = gauss_legendre(n)
        h = TWO_PI / segs
        t = np.concatenate([(k + 0.5) * h + 0.5 * h * s for k in range(segs)])
        ww = np.tile(0.5 * h * w, segs)
        pts, vals = continued_root(F, np.concatenate([[0.0], t]), anchor)
        r = _pick(pts, vals, t)
        return np.array([np.sum(ww * r), np.sum(ww * lam / r)])

    res, err, n = _converge(compute, tol=tol)
    return ActionA(lam, complex(res[0]), complex(res[1]), n, err)


# ---------------------------------------------------------------------------
# mode B


@dataclass
class ActionSet:
    mode: str
    mu: complex
    l: int
    S: list = field(default_factory=list)
    I: list = field(default_factory=list)
    dS: list = field(default_factory=list)
    dI: list = field(default_factory=list)
    points: list = field(default_factory=list)
    types: list = field(default_factory=list)
    error: float = 0.0

    def records(self) -> list[dict]:
        out = []
        for j in range(self.l):
            for name, val in (("S", self.S[j]), ("I", self.I[j])):
                out.append({"mode": "B", "name": name, "j": j + 1,
                            "value_re": val.real, "value_im": val.imag})
        return out


def ordered_points(V: FourierPotential, mu: complex, tps: Sequence[TurningPoint] | None = None,
                   ) -> list[TurningPoint]:
    """Indexed turning points x_1..x_2l for lam = i mu.

    For real mu these are the real roots; for complex mu the real roots at
    Re mu are continued in the parameter along a straight segment.
    """
    mu = complex(mu)
    mu0 = mu.real
    if tps is None:
        tps = real_turning_points(find_turning_points(V, 1j * mu0))
    base = order_real_points(V, mu0, tps) if all(tp.is_real for tp in tps) else list(tps)
    if mu.imag == 0:
        return base
    return continue_points(V, 1j * mu0, 1j * mu, base)


def continue_points(V: FourierPotential, lam_from: complex, lam_to: complex,
                    tps: Sequence[TurningPoint], steps: int = 8) -> list[TurningPoint]:
    xs = [tp.position for tp in tps]
    for k in range(1, steps + 1):
        lam = lam_from + (lam_to - lam_from) * k / steps
        new = []
        for x in xs:
            for _ in range(30):
                f, df = f_derivs(V, lam, x, 1)
                dx = f / df
                x -= dx
                if abs(dx) < 1e-15:
                    break
            new.append(x)
        xs = new
    out = []
    for tp, x in zip(tps, xs):
        out.append(TurningPoint(complex(x), tp.order, tp.kind, tp.index))
    return out


def actions_SI(V: FourierPotential, mu: complex, tps: Sequence[TurningPoint] | None = None,
               tol: float = QUAD_TOL, clearance: float = CLEARANCE) -> ActionSet:
    """S_j and I_j (with mu-derivatives) for lam = i mu."""
    mu = complex(mu)
    pts = ordered_points(V, mu, tps)
    xs = [tp.position for tp in pts]
    l = len(xs) // 2
    if l == 0 or len(xs) % 2:
        raise ValueError("mode B needs an even, positive number of turning points")
    xs_ext = xs + [xs[0] + TWO_PI]
    mu2 = mu * mu
    FS = lambda t: mu2 - eval_d(V, t) ** 2
    FI = lambda t: eval_d(V, t) ** 2 - mu2
    FI_d1 = lambda t: 2 * eval_d(V, t) * eval_d(V, t, 1)
    # the endpoints are zeros of the radicand, so F(end + d) = +-dV (2V(end) + dV)
    FI_near = lambda e, d: _dsq(V, e, d)
    FS_near = lambda e, d: -_dsq(V, e, d)
    vscale = 1.0 + abs(mu2)
    # contours must keep clear of all other turning points
    if mu.imag != 0:
        others = [tp for tp in find_turning_points(V, 1j * mu, allow_zero=True, verify=False)]
        for a, b in zip(xs_ext[:-1], xs_ext[1:]):
            check_clearance(Path((a, b)), others, clearance)
    for a, b in zip(xs_ext[:-1], xs_ext[1:]):
        _check_simple_end(FI_d1, a, abs(b - a), vscale)
        _check_simple_end(FI_d1, b, abs(b - a), vscale)

    def principal_pos(z):
        r = cmath.sqrt(z)
        return r if r.real >= 0 else -r

    def compute(n):
        out = []
        for j in range(l):
            a, b = xs_ext[2 * j], xs_ext[2 * j + 1]
            m = 0.5 * (a + b)
            out.extend(endpoint_integral(FS, a, b, principal_pos(FS(m)),
                                         (lambda r, t: r, lambda r, t: mu / r), n, FS_near))
            a, b = xs_ext[2 * j + 1], xs_ext[2 * j + 2]
            m = 0.5 * (a + b)
            out.extend(endpoint_integral(FI, a, b, principal_pos(FI(m)),
                                         (lambda r, t: r, lambda r, t: -mu / r), n, FI_near))
        return np.array(out)

    res, err, _ = _converge(compute, n0=32, tol=tol)
    res = res.reshape(l, 4)
    types = []
    if mu.imag == 0:
        types = classify_gaps(pts, mu.real)
    return ActionSet("B", mu, l, list(res[:, 0]), list(res[:, 2]), list(res[:, 1]),
                     list(res[:, 3]), pts, types, err)


def _dsq(V, e, d):
    dv = eval_diff(V, e, d)
    return dv * (2 * eval_d(V, e) + dv)


def s_action_by_continuation(V: FourierPotential, mu: float, j: int,
                             tps: Sequence[TurningPoint] | None = None,
                             tol: float = QUAD_TOL) -> complex:
    """S_j as i * int (V^2 - mu^2)^(1/2) over the S-interval.

    The root is positive just left of x_{2j-1}, carried over the upper half
    plane around x_{2j-1} on a small semicircle, and then used as the anchor
    on the S-interval.  Agreement with actions_SI checks the branch logic.
    """
    pts = ordered_points(V, mu, tps)
    xs = [tp.position for tp in pts]
    a, b = xs[2 * j - 2], xs[2 * j - 1]
    prev = xs[2 * j - 3] if j > 1 else xs[-1] - TWO_PI
    rho = 0.25 * min(abs(b - a), abs(a - prev))
    mu2 = complex(mu) ** 2
    F = lambda t: eval_d(V, t) ** 2 - mu2
    start = a - rho
    r0 = cmath.sqrt(F(start))
    if r0.real < 0:
        r0 = -r0
    theta = np.linspace(math.pi, 0.0, 65)
    arc = a + rho * np.exp(1j * theta)
    m = 0.5 * (a + b)
    line = np.linspace(a + rho, m, 33)[1:]
    _, vals = continued_root(F, np.concatenate([arc, line]), r0)
    anchor = vals[-1]

    def compute(n):
        return endpoint_integral(F, a, b, anchor, (lambda r, t: r,), n,
                                 lambda e, d: _dsq(V, e, d))

    res, _, _ = _converge(compute, n0=32, tol=tol)
    return complex(1j * res[0])
