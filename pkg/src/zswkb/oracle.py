"""Ground-truth spectrum from the monodromy matrix.

lam is an eigenvalue exactly when tr T(lam) = 2, where T is the fundamental
matrix of u' = (i/h) M(x, lam) u over one period.  Roots of the entire
function f = tr T - 2 are counted by the argument principle and located by
rectangle bisection plus Newton with exact lambda-derivatives.

Eigenvalues may be double (f has a double zero) whenever T is the identity
there, e.g. for every eigenvalue of V = 0 or of V = cos x.  Counts include
multiplicity and records carry it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _kernel
from .errors import ContourThroughZero, CountMismatch, StepLimit
from .potential import FourierPotential, eval_d, extrema

TWO_PI = 2 * math.pi
STEP_CONST = 4
MAX_STEPS = 2 ** 22
TRACE_TOL = 1e-11
COUNT_TOL = 1e-8
ROOT_TOL = 1e-8


@dataclass
class MonodromyResult:
    lam: complex
    h: float
    matrix: np.ndarray
    trace: complex
    det: complex
    steps: int
    dmatrix: np.ndarray | None = None
    d2matrix: np.ndarray | None = None
    growth: float = 1.0

    @property
    def scale(self) -> float:
        """Rounding scale of the trace: the largest entry met while
        propagating (at an eigenvalue T itself is O(1))."""
        return max(1.0, self.growth)

    @property
    def discriminant(self) -> complex:
        return self.trace - 2

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass
class EigenvalueRecord:
    lam: complex
    h: float
    source: str = "oracle"
    multiplicity: int = 1
    trace_residual: float = 0.0
    labels: tuple | None = None
    match_error: float | None = None

    def record(self) -> dict:
        return {"re": self.lam.real, "im": self.lam.imag, "h": self.h,
                "source": self.source, "multiplicity": self.multiplicity,
                "trace_residual": self.trace_residual}


@lru_cache(maxsize=64)
def _samples(V: FourierPotential, n: int):
    dt = TWO_PI / n
    t = np.arange(n) * dt
    v1 = eval_d(V, t + _kernel.NODE1 * dt).astype(complex)
    v2 = eval_d(V, t + _kernel.NODE2 * dt).astype(complex)
    return v1, v2, dt


@lru_cache(maxsize=64)
def _v0(V: FourierPotential) -> float:
    return extrema(V).V0


def initial_steps(V: FourierPotential, lam_abs: float, h: float) -> int:
    return math.ceil(STEP_CONST * (1 + (_v0(V) + lam_abs) / h) * TWO_PI)


def propagate(V: FourierPotential, lam: complex, h: float, steps: int):
    """(Phi(2pi) with its first two lambda-derivatives, growth) on a fixed grid."""
    v1, v2, dt = _samples(V, int(steps))
    return _kernel.propagate(complex(lam), float(h), v1, v2, dt)


def monodromy(V: FourierPotential, lam: complex, h: float, steps: int | None = None,
              tol: float = TRACE_TOL, max_steps: int = MAX_STEPS) -> MonodromyResult:
    """Monodromy matrix with step doubling until the trace settles.

    The convergence test is relative to the rounding scale G, the largest
    entry of Phi along the period: for complex lam the entries grow
    like e^{c/h} and an absolute 1e-11 on the trace is out of reach in
    double precision.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    lam = complex(lam)
    if steps is not None:
        return _result(lam, h, *propagate(V, lam, h, steps), steps)
    n = initial_steps(V, abs(lam), h)
    p, g = propagate(V, lam, h, n)
    while True:
        n2 = 2 * n
        if n2 > max_steps:
            raise StepLimit(f"trace did not converge within {max_steps} steps")
        p2, g2 = propagate(V, lam, h, n2)
        if abs(np.trace(p2[0]) - np.trace(p[0])) < tol * max(1.0, g2):
            return _result(lam, h, p2, g2, n2)
        n, p = n2, p2


def _result(lam, h, p, growth, steps):
    T = p[0].copy()
    return MonodromyResult(lam, h, T, complex(np.trace(T)), complex(np.linalg.det(T)),
                           int(steps), p[1].copy(), p[2].copy(), float(growth))


# ---------------------------------------------------------------------------
# discriminant with a step count fixed per region


@dataclass(frozen=True)
class Rect:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    @classmethod
    def around(cls, center: complex, half_re: float, half_im: float | None = None):
        half_im = half_re if half_im is None else half_im
        return cls(center.real - half_re, center.real + half_re,
                   center.imag - half_im, center.imag + half_im)

    @property
    def width(self):
        return self.re_max - self.re_min

    @property
    def height(self):
        return self.im_max - self.im_min

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def corners(self):
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    def dilate(self, frac: float) -> "Rect":
        dw, dh = frac * self.width, frac * self.height
        return Rect(self.re_min - dw, self.re_max + dw, self.im_min - dh, self.im_max + dh)

    def conj(self) -> "Rect":
        return Rect(self.re_min, self.re_max, -self.im_max, -self.im_min)

    def split(self, frac: float = 0.5):
        if self.width >= self.height:
            x = self.re_min + frac * self.width
            return (Rect(self.re_min, x, self.im_min, self.im_max),
                    Rect(x, self.re_max, self.im_min, self.im_max))
        y = self.im_min + frac * self.height
        return (Rect(self.re_min, self.re_max, self.im_min, y),
                Rect(self.re_min, self.re_max, y, self.im_max))


class Discriminant:
    """f(lam) = tr T(lam) - 2 with f', f'' on one calibrated grid.

    Calibration runs the doubling test at the corners and centre of a
    region and keeps the largest step count, so that contour samples and
    Newton iterates inside the region share one discretization.
    """

    def __init__(self, V: FourierPotential, h: float, tol: float = TRACE_TOL, steps: int | None = None):
        self.V, self.h, self.tol = V, float(h), tol
        self.steps = steps
        self.evaluations = 0

    def calibrate(self, rect: Rect) -> "Discriminant":
        n = 0
        for z in rect.corners() + [rect.center]:
            n = max(n, monodromy(self.V, z, self.h, tol=self.tol).steps)
        self.steps = n
        return self

    def __call__(self, lam: complex):
        if self.steps is None:
            raise RuntimeError("discriminant not calibrated")
        self.evaluations += 1
        p, g = propagate(self.V, lam, self.h, self.steps)
        return (complex(np.trace(p[0])) - 2.0, complex(np.trace(p[1])), complex(np.trace(p[2])),
                max(1.0, g))


# ---------------------------------------------------------------------------
# argument principle


class _NearZero(Exception):
    pass


def _edge_phase(disc: Discriminant, a: complex, b: complex, spacing: float,
                cache: dict, max_depth: int = 40) -> float:
    key = (a, b)
    if key in cache:
        return cache[key]
    if (b, a) in cache:
        return -cache[(b, a)]
    length = abs(b - a)
    n = max(4, math.ceil(length / spacing))
    ts = np.linspace(0.0, 1.0, n + 1)
    seen = []

    def sample(t):
        z = a + (b - a) * t
        f, f1, f2, scale = disc(z)
        if abs(f) <= 1e-14 * scale:
            raise _NearZero(z)
        seen.append((z, f, f1, f2))
        return z, f, f1

    pts = [sample(t) for t in ts]
    total = 0.0
    for i in range(n):
        total += _interval_phase(sample, ts[i], ts[i + 1], pts[i], pts[i + 1], 0, max_depth)
    _reject_zero_on_edge(disc, a, b, seen, spacing)
    cache[key] = total
    return total


def _newton_estimate(disc, z, f, f1, f2, steps=24, radius=math.inf):
    """Newton from a sample towards a nearby zero; None if it leaves ``radius``."""
    z0 = z
    for _ in range(steps):
        if f1 == 0:
            return z
        ratio = f * f2 / (f1 * f1)
        if abs(ratio - 0.5) < 0.25 and f2 != 0:
            # looks like a double zero: Newton on f'
            dz = f1 / f2
        else:
            dz = f / f1
        z = z - dz
        if not abs(z - z0) <= radius:
            return None
        if abs(dz) < 1e-15 * max(1.0, abs(z)):
            break
        f, f1, f2, _ = disc(z)
    return z


def _reject_zero_on_edge(disc, a, b, seen, spacing):
    """Raise _NearZero if a zero of f sits (numerically) on the segment [a, b].

    Phase refinement resolves zeros at any distance it can sample, but a zero
    lying exactly on the contour makes the winding number meaningless.
    """
    for z, f, f1, f2 in seen:
        if f1 == 0 or abs(f / f1) > spacing:
            continue
        zs = _newton_estimate(disc, z, f, f1, f2, radius=4 * spacing)
        if zs is None:
            continue
        g, g1, g2, _ = disc(zs)
        # a double zero is only resolved to ~sqrt(eps); widen the test accordingly
        mult = 2 if abs(g1) <= 1e-3 * abs(g2) * disc.h else 1
        tol = max(1e-8, min(1e-6, 10 * _root_uncertainty(g, g1, g2, mult))) * max(1.0, abs(zs))
        if _seg_dist(zs, a, b) < tol:
            raise _NearZero(zs)


def _seg_dist(p, a, b):
    d = b - a
    t = min(1.0, max(0.0, ((p - a) * d.conjugate()).real / abs(d) ** 2))
    return abs(p - (a + t * d))


def _interval_phase(sample, ta, tb, pa, pb, depth, max_depth):
    za, fa, da = pa
    zb, fb, db = pb
    d = np.angle(fb / fa)
    pred = (0.5 * (da / fa + db / fb) * (zb - za)).imag
    if abs(d) < math.pi / 2 and abs(pred - d) < 0.25:
        return d
    if depth >= max_depth:
        raise _NearZero(0.5 * (za + zb))
    tm = 0.5 * (ta + tb)
    pm = sample(tm)
    return (_interval_phase(sample, ta, tm, pa, pm, depth + 1, max_depth)
            + _interval_phase(sample, tm, tb, pm, pb, depth + 1, max_depth))


def _winding(disc: Discriminant, rect: Rect, spacing: float, cache: dict) -> int:
    c = rect.corners()
    total = 0.0
    for a, b in zip(c, c[1:] + c[:1]):
        total += _edge_phase(disc, a, b, spacing, cache)
    w = total / TWO_PI
    if abs(w - round(w)) > 0.05:
        raise _NearZero(rect.center)
    return int(round(w))


def count_eigenvalues(V: FourierPotential, h: float, rect: Rect, disc: Discriminant | None = None,
                      spacing: float | None = None, dilations: int = 3) -> int:
    """Number of zeros of tr T - 2 inside ``rect``, counted with multiplicity."""
    return _count(V, h, rect, disc, spacing, dilations)[0]


def _count(V, h, rect, disc=None, spacing=None, dilations=3):
    if rect.width <= 0 or rect.height <= 0:
        return 0, rect
    if disc is None:
        disc = Discriminant(V, h, COUNT_TOL).calibrate(rect.dilate(0.05))
    spacing = spacing or h / 8
    cur = rect
    for _ in range(dilations + 1):
        try:
            return _winding(disc, cur, spacing, {}), cur
        except _NearZero:
            cur = cur.dilate(0.01)
    raise ContourThroughZero(f"zero of the discriminant on or near the contour of {rect}")


# ---------------------------------------------------------------------------
# root location


def _polish(disc: Discriminant, z0: complex, mult: int, maxit: int = 60):
    z = complex(z0)
    for _ in range(maxit):
        f, f1, f2, _ = disc(z)
        if mult == 1:
            if f1 == 0:
                return None
            step = f / f1
        else:
            if f2 == 0:
                return None
            step = f1 / f2
        z -= step
        if not np.isfinite(z):
            return None
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            break
    f, f1, f2, scale = disc(z)
    return z, f, f1, f2, scale


def _root_uncertainty(f, f1, f2, mult):
    """Distance to the nearest zero implied by the leftover residual.

    For a double zero the discretisation splits it by about sqrt(2|f/f''|),
    so the residual itself is not a usable acceptance test there."""
    if mult == 1:
        return abs(f / f1) if f1 != 0 else math.inf
    return math.sqrt(2 * abs(f / f2)) if f2 != 0 else math.inf


def _multiplicity(f1, f2, h):
    return 2 if abs(f1) <= 1e-6 * abs(f2) * h else 1


def locate_eigenvalues(V: FourierPotential, h: float, rect: Rect, min_size: float = 1e-9,
                       count_disc: Discriminant | None = None,
                       fine_disc: Discriminant | None = None) -> list[EigenvalueRecord]:
    """All eigenvalues in ``rect`` (after at most a 1% dilation), sorted."""
    count_disc = count_disc or Discriminant(V, h, COUNT_TOL).calibrate(rect.dilate(0.05))
    fine = fine_disc or Discriminant(V, h, TRACE_TOL).calibrate(rect.dilate(0.05))
    n, rect = _count(V, h, rect, count_disc)
    spacing = h / 8
    cache: dict = {}
    out: list[EigenvalueRecord] = []

    def try_root(r, n):
        if n > 2:
            return None
        res = _polish(fine, r.center, n)
        if res is None:
            return None
        z, f, f1, f2, scale = res
        if not r.contains(z, 1e-12 * max(1.0, abs(z))):
            return None
        m = _multiplicity(f1, f2, h)
        if m != n:
            return None
        if _root_uncertainty(f, f1, f2, m) > ROOT_TOL * max(1.0, abs(z)):
            return None
        return EigenvalueRecord(z, h, "oracle", m, abs(f) / scale)

    def count_sub(r):
        return _winding(count_disc, r, spacing, cache)

    def recurse(r, n, depth):
        if n == 0:
            return
        rec = try_root(r, n)
        if rec is not None:
            out.append(rec)
            return
        if max(r.width, r.height) < min_size or depth > 60:
            raise CountMismatch(f"{n} roots in {r} could not be separated", r)
        for frac in (0.47, 0.53, 0.41, 0.59, 0.5):   # off-centre first: symmetry axes carry roots
            r1, r2 = r.split(frac)
            try:
                n1, n2 = count_sub(r1), count_sub(r2)
            except _NearZero:
                continue
            if n1 + n2 == n:
                break
        else:
            raise CountMismatch(f"could not split {r} cleanly", r)
        recurse(r1, n1, depth + 1)
        recurse(r2, n2, depth + 1)

    recurse(rect, n, 0)
    total = sum(r.multiplicity for r in out)
    if total != n:
        raise CountMismatch(f"located {total} roots (with multiplicity), winding count {n}", rect)
    out.sort(key=lambda r: (round(r.lam.real, 12), round(r.lam.imag, 12)))
    return out
