"""Real-analytic 2pi-periodic potentials stored as finite trigonometric series."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateExtremumWarning, ZeroPotential

SCAN_POINTS = 4096
POLISH_TOL = 1e-12


@dataclass(frozen=True)
class FourierPotential:
    """V(x) = sum_k a_k cos(kx) + sum_k b_k sin(kx).

    ``cos_coeffs`` holds a_0..a_K, ``sin_coeffs`` holds b_1..b_K.  ``strip``
    is the working half-width of the complex strip; V is entire so this is
    only a bound on where paths are allowed to go.
    """

    cos_coeffs: tuple = (0.0,)
    sin_coeffs: tuple = ()
    strip: float = 1.0

    def __post_init__(self):
        a = tuple(float(c) for c in self.cos_coeffs) or (0.0,)
        b = tuple(float(c) for c in self.sin_coeffs)
        if not self.strip > 0:
            raise ValueError("strip half-width must be positive")
        # trailing zero harmonics carry no information and would break the
        # polynomial degree used by the turning-point search
        K = max(len(a) - 1, len(b))
        a = a + (0.0,) * (K + 1 - len(a))
        b = b + (0.0,) * (K - len(b))
        while K > 0 and a[K] == 0.0 and b[K - 1] == 0.0:
            K -= 1
        object.__setattr__(self, "cos_coeffs", a[:K + 1])
        object.__setattr__(self, "sin_coeffs", b[:K])
        object.__setattr__(self, "strip", float(self.strip))

    @classmethod
    def cosine(cls, amplitude=1.0, offset=0.0, strip=1.0):
        return cls((offset, amplitude), (), strip)

    @classmethod
    def from_config(cls, d: dict) -> "FourierPotential":
        return cls(tuple(d.get("cos", (0.0,))), tuple(d.get("sin", ())),
                   d.get("strip", 1.0))

    def to_config(self) -> dict:
        return {"cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs),
                "strip": self.strip}

    @property
    def degree(self) -> int:
        return len(self.cos_coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not any(self.cos_coeffs) and not any(self.sin_coeffs)

    def _ab(self):
        K = self.degree
        a = np.array(self.cos_coeffs[1:])
        b = np.array(self.sin_coeffs) if K else np.zeros(0)
        return np.arange(1, K + 1), a, b

    def __call__(self, x, n: int = 0):
        return eval_d(self, x, n)

    def complex_coefficients(self) -> np.ndarray:
        """c_{-K..K} with V(x) = sum_m c_m e^{imx}."""
        K = self.degree
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K] = self.cos_coeffs[0]
        for k in range(1, K + 1):
            a, b = self.cos_coeffs[k], self.sin_coeffs[k - 1]
            c[K + k] = 0.5 * (a - 1j * b)
            c[K - k] = 0.5 * (a + 1j * b)
        return c


def eval_d(V: FourierPotential, x, n: int = 0):
    """n-th derivative of V at real or complex x (scalar or array)."""
    x = np.asarray(x)
    k, a, b = V._ab()
    out = np.full(x.shape, V.cos_coeffs[0] if n == 0 else 0.0,
                  dtype=complex if np.iscomplexobj(x) else float)
    if k.size:
        kx = np.multiply.outer(x, k) + n * math.pi / 2
        scale = k.astype(float) ** n
        out = out + (np.cos(kx) * (scale * a)).sum(-1) + (np.sin(kx) * (scale * b)).sum(-1)
    return out[()] if out.ndim == 0 else out


def eval_diff(V: FourierPotential, x, d):
    """V(x + d) - V(x) without cancellation for small d."""
    x, d = np.asarray(x), np.asarray(d)
    k, a, b = V._ab()
    if not k.size:
        return np.zeros(np.broadcast(x, d).shape)[()]
    mid = np.multiply.outer(x + 0.5 * d, k)
    half = np.sin(np.multiply.outer(d, k) * 0.5)
    out = (2 * half * (np.cos(mid) * b - np.sin(mid) * a)).sum(-1)
    return out[()] if out.ndim == 0 else out


def eval(V: FourierPotential, x):
    return eval_d(V, x, 0)


@dataclass
class PotentialExtrema:
    V0: float
    V1: float
    argmax_points: list = field(default_factory=list)
    argmin_points: list = field(default_factory=list)
    critical_points: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)


def _newton_real(f, df, x, tol=POLISH_TOL, maxit=50):
    for _ in range(maxit):
        d = df(x)
        if d == 0.0:
            break
        step = f(x) / d
        x -= step
        if abs(step) < tol:
            break
    return x


def _sign_change_roots(f, df, xs):
    vals = f(xs)
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        lo, hi = xs[i], xs[i + 1]
        r = _newton_real(f, df, 0.5 * (lo + hi))
        if not lo - 1e-9 <= r <= hi + 1e-9:
            # fall back to bisection when Newton wanders off the bracket
            a, b = lo, hi
            fa = f(a)
            for _ in range(80):
                m = 0.5 * (a + b)
                if np.sign(f(m)) == np.sign(fa):
                    a, fa = m, f(m)
                else:
                    b = m
            r = 0.5 * (a + b)
        out.append(r % (2 * math.pi))
    return out


def _dedup(points, tol=1e-9):
    pts = sorted(points)
    out = []
    for p in pts:
        if not out or abs(p - out[-1]) > tol:
            out.append(p)
    if len(out) > 1 and abs(out[0] + 2 * math.pi - out[-1]) <= tol:
        out.pop()
    return out


def extrema(V: FourierPotential, tol: float = 1e-9) -> PotentialExtrema:
    """V0 = max|V|, V1 = min|V| over the circle, with all local extrema of V."""
    if V.is_zero:
        return PotentialExtrema(0.0, 0.0)
    xs = np.linspace(0.0, 2 * math.pi, SCAN_POINTS + 1)
    crit = _dedup(_sign_change_roots(lambda t: eval_d(V, t, 1),
                                     lambda t: eval_d(V, t, 2), xs))
    zeros = _dedup(_sign_change_roots(lambda t: eval_d(V, t, 0),
                                      lambda t: eval_d(V, t, 1), xs))
    scale = max(abs(c) for c in V.cos_coeffs + V.sin_coeffs)
    degenerate = [x for x in crit if abs(eval_d(V, x, 2)) < 1e-8 * scale]
    for x in degenerate:
        warnings.warn(f"degenerate extremum of V at x={x:.12g}", DegenerateExtremumWarning)
    cand = crit + zeros
    absval = np.abs(eval_d(V, np.array(cand), 0))
    V0 = float(absval.max())
    V1 = 0.0 if zeros else float(absval.min())
    argmax = [x for x, v in zip(cand, absval) if abs(v - V0) <= tol * max(1.0, V0)]
    argmin = [x for x, v in zip(cand, absval) if abs(v - V1) <= tol * max(1.0, V0)]
    return PotentialExtrema(V0, V1, argmax, argmin, crit, degenerate)


def translate(V: FourierPotential, s: float) -> FourierPotential:
    """Coefficients of V(. + s), exact up to rounding."""
    k, a, b = V._ab()
    c, sn = np.cos(k * s), np.sin(k * s)
    na, nb = a * c + b * sn, b * c - a * sn
    # rounding residue from the angle-addition formulas is snapped to zero
    tiny = 1e-15 * max([1.0] + [abs(v) for v in V.cos_coeffs + V.sin_coeffs])
    na[np.abs(na) < tiny] = 0.0
    nb[np.abs(nb) < tiny] = 0.0
    return FourierPotential((V.cos_coeffs[0],) + tuple(na), tuple(nb), V.strip)


def negate(V: FourierPotential) -> FourierPotential:
    return FourierPotential(tuple(-c for c in V.cos_coeffs),
                            tuple(-c for c in V.sin_coeffs), V.strip)


def normalize_to_max(V: FourierPotential) -> FourierPotential:
    """Translate V so that V(0) = V0.

    If max|V| is only reached at a negative minimum the potential is negated
    first; V and -V give the same spectrum (conjugation by diag(1, -1)).
    """
    ex = extrema(V)
    if ex.V0 == 0.0:
        raise ZeroPotential("normalize_to_max needs a nonzero potential")
    vals = [float(eval_d(V, x)) for x in ex.argmax_points]
    if max(vals) < ex.V0 * (1 - 1e-9):
        V = negate(V)
        vals = [-v for v in vals]
    xstar = ex.argmax_points[int(np.argmax(vals))]
    return translate(V, xstar)
