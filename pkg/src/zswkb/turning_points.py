"""Turning points: zeros of f(x) = V(x)^2 + lambda^2 in the periodic strip.

With zeta = e^{ix} the function f is a Laurent polynomial, so zeta^{2K} f is
an ordinary polynomial of degree 4K and all of its roots come out of one
companion-matrix eigenvalue solve.  An argument-principle count on the strip
boundary is used as an independent completeness check.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (IncompleteSearch, KindMismatch, NonSimpleTurningPoint,
                     OrderingViolation, UnsupportedOrder)
from .potential import FourierPotential, eval_d

TWO_PI = 2 * math.pi
CLUSTER_RADIUS = 1e-6
ORDER_THRESHOLD = 1e-6


class Kind(enum.Enum):
    V_MINUS_MU = "V-mu"
    V_PLUS_MU = "V+mu"
    MIXED = "mixed"


@dataclass(frozen=True)
class TurningPoint:
    position: complex
    order: int = 1
    kind: Kind = Kind.MIXED
    index: int | None = None

    @property
    def is_real(self) -> bool:
        return abs(self.position.imag) < 1e-9

    def record(self) -> dict:
        return {"re": self.position.real, "im": self.position.imag,
                "order": self.order, "kind": self.kind.value, "index": self.index}


@dataclass
class StokesRaySet:
    source: TurningPoint
    arguments: list = field(default_factory=list)


def f_derivs(V: FourierPotential, lam: complex, x, n: int = 2):
    """f, f', ..., f^(n) for f = V^2 + lam^2 (Leibniz on V * V)."""
    d = [eval_d(V, x, k) for k in range(n + 1)]
    out = []
    for m in range(n + 1):
        out.append(sum(math.comb(m, k) * d[k] * d[m - k] for k in range(m + 1)))
    out[0] = out[0] + lam * lam
    return out


def _poly_roots(V: FourierPotential, lam: complex) -> np.ndarray:
    c = V.complex_coefficients()
    d = np.convolve(c, c)
    d[len(d) // 2] += lam * lam
    # ascending powers of zeta from zeta^0 (= zeta^{-2K} times zeta^{2K})
    d = np.trim_zeros(d, "b")
    lead = np.nonzero(d)[0]
    if lead.size == 0:
        return np.zeros(0, dtype=complex)
    d = d[lead[0]:]
    if d.size < 2:
        return np.zeros(0, dtype=complex)
    return np.roots(d[::-1])


def _polish(V, lam, x, maxit=60):
    """Newton on f, switching to f' when the root looks multiple."""
    for _ in range(maxit):
        f, df = f_derivs(V, lam, x, 1)
        if df == 0:
            break
        step = f / df
        x = x - step
        if abs(step) < 1e-15 * max(1.0, abs(x)):
            break
    return x


def _order(V, lam, x, scale):
    ds = f_derivs(V, lam, x, 4)
    for n in range(1, 5):
        if abs(ds[n]) > ORDER_THRESHOLD * scale:
            return n
    return 5


def argument_principle_count(V: FourierPotential, lam: complex, strip_bound: float,
                             samples: int = 2048) -> int:
    """Zeros of f in the strip, from the phase change along both strip edges."""
    scale = _scale(V, lam)
    total = 0.0
    for y, sgn in ((-strip_bound, 1.0), (strip_bound, -1.0)):
        n = samples
        while True:
            t = np.linspace(0.0, TWO_PI, n + 1) + 1j * y
            f = f_derivs(V, lam, t, 0)[0]
            if np.min(np.abs(f)) < 1e-12 * scale:
                raise IncompleteSearch("turning point on the strip boundary")
            jumps = np.angle(f[1:] / f[:-1])
            if np.max(np.abs(jumps)) < 0.5 or n > 2 ** 18:
                break
            n *= 4
        total += sgn * jumps.sum()
    return int(round(total / TWO_PI))


def _scale(V, lam):
    a = sum(abs(c) for c in V.cos_coeffs + V.sin_coeffs)
    return 1.0 + abs(lam) ** 2 + a * a


def kind_of(V: FourierPotential, lam: complex, x: complex) -> Kind:
    mu = -1j * lam
    if mu == 0:
        return Kind.MIXED
    v = eval_d(V, x)
    return Kind.V_MINUS_MU if abs(v - mu) <= abs(v + mu) else Kind.V_PLUS_MU


def find_turning_points(V: FourierPotential, lam: complex, strip_bound: float | None = None,
                        allow_zero: bool = False, simple_only: bool = False,
                        verify: bool = True) -> list[TurningPoint]:
    """All zeros of V^2 + lam^2 with 0 <= Re x < 2pi and |Im x| <= strip_bound.

    Returned points are sorted by real part and carry their order; ``index``
    is left unset (ordering is only meaningful on the imaginary axis, see
    ``order_real_points``).
    """
    lam = complex(lam)
    if lam == 0 and not allow_zero:
        raise ValueError("lambda = 0 makes every zero of V a double turning point")
    if strip_bound is None:
        strip_bound = V.strip
    if strip_bound > V.strip + 1e-12:
        raise ValueError("strip_bound exceeds the potential's working strip")
    if V.is_zero:
        return []
    scale = _scale(V, lam)
    xs = []
    for zeta in _poly_roots(V, lam):
        if zeta == 0:
            continue
        x = -1j * cmath.log(zeta)
        xs.append(complex(x.real % TWO_PI, x.imag))
    xs = [_polish(V, lam, x) for x in xs]
    xs = [complex(x.real % TWO_PI, x.imag) for x in xs]
    clusters: list[list[complex]] = []
    for x in sorted(xs, key=lambda z: (z.real, z.imag)):
        for cl in clusters:
            d = cl[0] - x
            d = complex((d.real + math.pi) % TWO_PI - math.pi, d.imag)
            if abs(d) < CLUSTER_RADIUS:
                cl.append(x)
                break
        else:
            clusters.append([x])
    out = []
    for cl in clusters:
        x = cl[0]
        n = _order(V, lam, x, scale)
        if n >= 2:
            # polish a multiple root through the first derivative
            for _ in range(40):
                ds = f_derivs(V, lam, x, n)
                if ds[n] == 0:
                    break
                step = ds[n - 1] / ds[n]
                x = x - step
                if abs(step) < 1e-15:
                    break
            x = complex(x.real % TWO_PI, x.imag)
        if abs(x.imag) > strip_bound:
            continue
        out.append(TurningPoint(x, n, kind_of(V, lam, x)))
    out.sort(key=lambda tp: (tp.position.real, tp.position.imag))
    if verify:
        expected = argument_principle_count(V, lam, strip_bound)
        got = sum(tp.order for tp in out)
        if expected != got:
            raise IncompleteSearch(f"found {got} turning points (with order), "
                                   f"argument principle says {expected}")
    if simple_only and any(tp.order > 1 for tp in out):
        raise NonSimpleTurningPoint("non-simple turning point for a simple-point window")
    return out


def real_turning_points(tps: Sequence[TurningPoint], tol: float = 1e-9):
    return [tp for tp in tps if abs(tp.position.imag) <= tol]


def order_real_points(V: FourierPotential, mu: float, tps: Sequence[TurningPoint],
                      tol: float = 1e-12) -> list[TurningPoint]:
    """Attach circle indices 1..2l and validate the ordering and kinds.

    Requires the normalization V(0) = V0 > mu, so that 0 sits inside an
    interval where |V| > mu and x_1 is the first point where |V| drops to mu.
    """
    pts = sorted(tps, key=lambda tp: tp.position.real)
    if not pts:
        raise OrderingViolation("no real turning points")
    if len(pts) % 2:
        raise OrderingViolation(f"odd number ({len(pts)}) of real turning points")
    xs = [tp.position.real for tp in pts]
    if xs[0] <= tol:
        raise OrderingViolation("x_1 must be strictly positive")
    if any(b - a <= tol for a, b in zip(xs, xs[1:])) or xs[-1] >= TWO_PI - tol:
        raise OrderingViolation("turning points are not strictly ordered in (0, 2pi)")
    lam = 1j * mu
    if any(tp.order != 1 for tp in pts):
        raise NonSimpleTurningPoint("ordering requires simple real turning points")
    v0 = float(eval_d(V, 0.0))
    if not v0 > abs(mu):
        raise KindMismatch("V(0) must exceed |mu| (normalize the potential first)")
    out = []
    for i, tp in enumerate(pts, start=1):
        fp = f_derivs(V, lam, tp.position.real, 1)[1].real
        if (fp < 0) != (i % 2 == 1):
            raise OrderingViolation(f"x_{i} does not {'enter' if i % 2 else 'leave'} "
                                    "the region |V| < mu")
        out.append(replace(tp, index=i, kind=kind_of(V, lam, tp.position)))
    # between x_{2j} and x_{2j+1} the sign of V is fixed, so both points are
    # zeros of the same factor; x_1 must be a zero of V - mu since V(0) > mu
    kinds = [tp.kind for tp in out]
    if kinds[0] is not Kind.V_MINUS_MU or kinds[-1] is not Kind.V_MINUS_MU:
        raise KindMismatch("x_1 and x_2l must be zeros of V - mu when V(0) = V0")
    for j in range(1, len(kinds) - 1, 2):
        if kinds[j] is not kinds[j + 1]:
            raise KindMismatch(f"x_{j + 1} and x_{j + 2} bound an interval where |V| > mu "
                               "but are zeros of different factors")
    return out


TYPE_OF_KINDS = {
    (Kind.V_MINUS_MU, Kind.V_MINUS_MU): 1,
    (Kind.V_MINUS_MU, Kind.V_PLUS_MU): 2,
    (Kind.V_PLUS_MU, Kind.V_MINUS_MU): 3,
    (Kind.V_PLUS_MU, Kind.V_PLUS_MU): 4,
}


def classify_gaps(tps: Sequence[TurningPoint], mu: float, V: FourierPotential | None = None
                  ) -> list[int]:
    """Transition type of each pair (x_{2j-1}, x_{2j}).

    With ``V`` given the points are (re)ordered and validated first; without
    it they must already carry indices and kinds.
    """
    if V is not None:
        pts = order_real_points(V, mu, tps)
    else:
        pts = sorted(tps, key=lambda tp: tp.position.real)
        xs = [tp.position.real for tp in pts]
        if not xs or len(xs) % 2 or xs[0] <= 0 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise OrderingViolation("turning points must be 0 < x_1 < ... < x_2l")
        if pts[0].kind is not Kind.V_MINUS_MU:
            raise KindMismatch("x_1 must be a zero of V - mu")
    return [TYPE_OF_KINDS[(pts[2 * j].kind, pts[2 * j + 1].kind)]
            for j in range(len(pts) // 2)]


def stokes_ray_arguments(tp: TurningPoint, V: FourierPotential, lam: complex) -> StokesRaySet:
    """Initial directions of the n + 2 Stokes lines leaving a turning point.

    With W = -V^2 the rays of a simple point sit at pi/3 - Arg W'/3 mod 2pi/3,
    those of a double point at pi/4 - Arg W''/4 mod pi/2.  Results are
    folded into (-pi, pi] and sorted.
    """
    n = tp.order
    if n not in (1, 2):
        raise UnsupportedOrder(f"turning point of order {n}")
    ds = f_derivs(V, complex(lam), tp.position, n)
    w = -ds[n]
    base = math.pi / (n + 2) - cmath.phase(w) / (n + 2)
    args = []
    for k in range(n + 2):
        a = base + TWO_PI * k / (n + 2)
        a = (a + math.pi) % TWO_PI - math.pi
        if a <= -math.pi + 1e-15:
            a += TWO_PI
        args.append(a)
    return StokesRaySet(tp, sorted(args))
