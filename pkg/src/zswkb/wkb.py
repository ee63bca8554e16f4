"""Truncated exact-WKB solutions of (h/i) u' = M u.

u^+ = e^{z/h} C Q(z) S (w_even, w_odd)^T and u^- = e^{-z/h} C Q(z) (w_even, w_odd)^T
with C = [[1, 1], [-1, 1]], S = [[0, 1], [1, 0]],
Q = [[1/H, 1/H], [iH, -iH]] and H^4 = (iV + lam)/(iV - lam).

The amplitudes come from the transport recursion (sigma = +-1)

    (d/dz + 2 sigma/h) w_{2n+1} = (H_z/H) w_{2n},    d/dz w_{2n+2} = (H_z/H) w_{2n+1},

with w_0 = 1 and w_n(z(y)) = 0 at the amplitude base y.  In the x variable
H_z/H dz = psi dx with psi = i lam V' / (2 (V^2 + lam^2)).  Odd orders are
stepped with an exponential (ETD2) rule in z, even orders with the trapezoid
rule in x.  A second sweep on every other node gives a Richardson estimate.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .actions import Path, continued_root, gauss_legendre
from .errors import ExtrapolationOutsidePath, NoMonotonePath
from .potential import FourierPotential, eval_d

C_MAT = np.array([[1, 1], [-1, 1]], dtype=complex)
SWAP = np.array([[0, 1], [1, 0]], dtype=complex)
J_MAT = np.array([[0, 1], [-1, 0]], dtype=complex)
NODES_PER_H = 50
SUBSTEP_PER_H = 400
FD_STEP = 1e-5
DEFAULT_N = 2


def h4(V: FourierPotential, lam: complex):
    lam = complex(lam)

    def F(x):
        iv = 1j * eval_d(V, x)
        return (iv + lam) / (iv - lam)
    return F


def psi(V: FourierPotential, lam: complex, x):
    v = eval_d(V, x)
    return 1j * lam * eval_d(V, x, 1) / (2 * (v * v + lam * lam))


def nu_from_h(V: FourierPotential, lam: complex, x, H):
    """nu with z' = i nu, read off from the eigenvector C Q S e_1 of M.

    Fixing nu this way ties the branch of z to the branch of H, so that u^+
    really grows like e^{z/h}."""
    x = np.asarray(x)
    H = np.asarray(H)
    v = eval_d(V, x)
    a, b = 1 / H - 1j * H, -1 / H - 1j * H
    r0 = -lam * a + 1j * v * b
    r1 = -1j * v * a + lam * b
    return np.where(np.abs(a) >= np.abs(b), r0 / np.where(a == 0, 1, a),
                    r1 / np.where(b == 0, 1, b))


def q_matrix(H):
    return np.array([[1 / H, 1 / H], [1j * H, -1j * H]], dtype=complex)


def _nearest_root(target, value, power=4):
    # the power-th root of ``value`` closest to ``target``
    r = value ** (1.0 / power)
    roots = r * np.exp(2j * np.pi * np.arange(power) / power)
    return roots[np.argmin(np.abs(roots - target))]


def _phi12(q):
    q = np.asarray(q, dtype=complex)
    small = np.abs(q) < 0.1
    qs = np.where(small, 0.1, q)
    e = np.exp(qs)
    p1 = (e - 1) / qs
    p2 = (e - 1 - qs) / qs ** 2
    # series for small arguments
    s1 = np.zeros_like(q)
    s2 = np.zeros_like(q)
    term = np.ones_like(q)
    fact1, fact2 = 1.0, 2.0
    for k in range(12):
        s1 += term / fact1
        s2 += term / fact2
        term = term * q
        fact1 *= k + 2
        fact2 *= k + 3
    return np.where(small, s1, p1), np.where(small, s2, p2)


class HBranch:
    """H continued from an anchor where it is the principal quarter power."""

    def __init__(self, V: FourierPotential, lam: complex, anchor: complex = 0.0,
                 anchor_value: complex | None = None):
        self.V, self.lam = V, complex(lam)
        self.F = h4(V, lam)
        self.anchor = complex(anchor)
        self.anchor_value = (complex(anchor_value) if anchor_value is not None
                             else complex(self.F(self.anchor)) ** 0.25)

    def along(self, pts, start_value=None):
        """(points, H values) continued along the sample points."""
        if start_value is None:
            start_value = self.at(pts[0])
        return continued_root(self.F, pts, start_value, power=4)

    def at(self, x: complex) -> complex:
        if x == self.anchor:
            return self.anchor_value
        seg = Path((self.anchor, x), order=max(16, int(64 * abs(x - self.anchor))))
        _, vals = continued_root(self.F, seg.samples(), self.anchor_value, power=4)
        return complex(vals[-1])


def _z_steps(V, lam, pts, H):
    """z increments i int nu dx between consecutive points (3-point Gauss)."""
    t, w = gauss_legendre(3)
    a, b = pts[:-1], pts[1:]
    out = np.zeros(len(a), dtype=complex)
    for tk, wk in zip(t, w):
        xm = a + (b - a) * (0.5 * (tk + 1))
        Fm = h4(V, lam)(xm)
        Hi = H[:-1] + (H[1:] - H[:-1]) * (0.5 * (tk + 1))
        Hm = np.array([_nearest_root(g, f) for g, f in zip(Hi, Fm)])
        out += 0.5 * wk * nu_from_h(V, lam, xm, Hm) * (b - a)
    return 1j * out


def _resample(path: Path, spacing: float) -> np.ndarray:
    pts = [path.waypoints[0]]
    for a, b in zip(path.waypoints[:-1], path.waypoints[1:]):
        n = max(1, int(math.ceil(abs(b - a) / spacing)))
        pts.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(pts, dtype=complex)


def _sweep(sign, h, N, x, z, ps, nu):
    """Coefficient table w[0..2N+1] on the nodes x."""
    n = len(x)
    w = np.zeros((2 * N + 2, n), dtype=complex)
    w[0] = 1.0
    dz = np.diff(z)
    dx = np.diff(x)
    a = 2 * sign * dz / h
    p1, p2 = _phi12(-a)
    decay = np.exp(-a)
    zp = 1j * nu
    for j in range(1, 2 * N + 2):
        if j % 2:
            G = ps * w[j - 1] / zp
            for k in range(n - 1):
                w[j, k + 1] = (decay[k] * w[j, k]
                               + dz[k] * (G[k] * (p1[k] - p2[k]) + G[k + 1] * p2[k]))
        else:
            g = ps * w[j - 1]
            w[j, 1:] = np.cumsum(0.5 * (g[1:] + g[:-1]) * dx)
    return w


@dataclass
class WKBSolution:
    V: FourierPotential
    lam: complex
    h: float
    sign: int
    N: int
    phase_base: complex
    amplitude_base: complex
    path: Path
    nodes: np.ndarray
    z: np.ndarray
    H: np.ndarray
    nu: np.ndarray
    coeffs: np.ndarray
    error_estimate: float = 0.0
    spacing: float = 0.0

    @property
    def w_even(self):
        return self.coeffs[0::2].sum(0)

    @property
    def w_odd(self):
        return self.coeffs[1::2].sum(0)

    def _nearest(self, x):
        d = np.abs(self.nodes - x)
        k = int(np.argmin(d))
        if d[k] > 2 * self.spacing + 1e-12:
            raise ExtrapolationOutsidePath(f"x = {x} is {d[k]:.3g} away from the coefficient path")
        return k

    def local(self, x: complex, node: int | None = None):
        """(z at the base node, z increment, H, coefficient vector) at x, by a
        short RK4 substep from the nearest node (or from ``node``)."""
        x = complex(x)
        k = self._nearest(x) if node is None else node
        x0 = self.nodes[k]
        z, Hv, w = 0j, self.H[k], self.coeffs[:, k].copy()
        if x == x0:
            return self.z[k], z, Hv, w
        F = h4(self.V, self.lam)
        m = max(1, int(math.ceil(abs(x - x0) * SUBSTEP_PER_H / self.h)))
        dx = (x - x0) / m
        sig = 2 * self.sign / self.h

        def fields(xx, Hguess):
            Hx = _nearest_root(Hguess, F(xx))
            return Hx, 1j * nu_from_h(self.V, self.lam, xx, Hx), psi(self.V, self.lam, xx)

        def rhs(xx, ww, zp, p):
            d = np.empty_like(ww)
            d[0] = 0.0
            d[1::2] = -sig * zp * ww[1::2] + p * ww[0::2]
            d[2::2] = p * ww[1::2][:len(d[2::2])]
            return d

        xc = x0
        for _ in range(m):
            Hm, zpm, pm = fields(xc + 0.5 * dx, Hv)
            H1, zp1, p1 = fields(xc + dx, Hm)
            _, zp0, p0 = fields(xc, Hv)
            k1 = rhs(xc, w, zp0, p0)
            k2 = rhs(xc, w + 0.5 * dx * k1, zpm, pm)
            k3 = rhs(xc, w + 0.5 * dx * k2, zpm, pm)
            k4 = rhs(xc, w + dx * k3, zp1, p1)
            w = w + dx / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            z = z + dx / 6 * (zp0 + 4 * zpm + zp1)
            xc, Hv = xc + dx, H1
        return self.z[k], z, Hv, w

    def __call__(self, x: complex) -> np.ndarray:
        return evaluate_wkb(self, x)


def transport_coefficients(V: FourierPotential, lam: complex, h: float, sign: int, path: Path,
                           N: int = DEFAULT_N, phase_base: complex | None = None,
                           h_anchor: complex = 0.0, h_anchor_value: complex | None = None,
                           spacing: float | None = None) -> WKBSolution:
    """Coefficient table w_0..w_{2N+1} along ``path`` (amplitude base = its start).

    z is measured from ``phase_base`` (default: the amplitude base) along the
    straight segment to the amplitude base.  H is the principal quarter power
    at ``h_anchor`` continued along a straight segment and then the path.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if N < 0:
        raise ValueError("truncation order must be >= 0")
    lam = complex(lam)
    y = path.waypoints[0]
    x0 = y if phase_base is None else complex(phase_base)
    spacing = spacing or min(h / NODES_PER_H, path.length / 64)
    hb = HBranch(V, lam, h_anchor, h_anchor_value)
    x, H = hb.along(_resample(path, spacing))
    nu = nu_from_h(V, lam, x, H)
    z = np.concatenate([[0.0], np.cumsum(_z_steps(V, lam, x, H))])
    if x0 != y:
        seg = Path((y, x0), order=max(16, int(64 * abs(x0 - y))))
        sp, sH = hb.along(seg.samples(), H[0])
        z = z - _z_steps(V, lam, sp, sH).sum()
    ps = psi(V, lam, x)
    w = _sweep(sign, h, N, x, z, ps, nu)
    err = 0.0
    if len(x) >= 5:
        sl = slice(None, None, 2)
        wc = _sweep(sign, h, N, x[sl], z[sl], ps[sl], nu[sl])
        err = float(np.max(np.abs(wc - w[:, sl]))) / 3
    return WKBSolution(V, lam, float(h), sign, N, x0, y, path, x, z, H, nu, w, err, spacing)


build_wkb = transport_coefficients


def _split_eval(sol: WKBSolution, x: complex, node: int | None = None):
    # u = e^{sign z_k/h} * rest, z_k the phase at the base node
    zk, dz, Hv, w = sol.local(x, node)
    we, wo = w[0::2].sum(), w[1::2].sum()
    amp = C_MAT @ q_matrix(Hv)
    if sol.sign > 0:
        amp = amp @ SWAP
    return zk, np.exp(sol.sign * dz / sol.h) * (amp @ np.array([we, wo]))


def evaluate_wkb(sol: WKBSolution, x: complex, node: int | None = None) -> np.ndarray:
    zk, rest = _split_eval(sol, x, node)
    return np.exp(sol.sign * zk / sol.h) * rest


def wronskian(u: Callable, v: Callable, x: complex) -> complex:
    a, b = u(x), v(x)
    return complex(a[0] * b[1] - a[1] * b[0])


def m_matrix(V: FourierPotential, lam: complex, x):
    v = complex(eval_d(V, x))
    return np.array([[-lam, 1j * v], [-1j * v, lam]], dtype=complex)


def ode_residual(sol: WKBSolution, x: complex, step: float = FD_STEP) -> float:
    """||u' - (i/h) M u|| / ||u|| with u' from a fourth-order central
    difference along the path."""
    k = sol._nearest(x)
    j = min(k + 1, len(sol.nodes) - 1)
    i = j - 1
    t = sol.nodes[j] - sol.nodes[i]
    t /= abs(t)
    # one base node for the whole stencil, so the difference never straddles
    # the seam between two substep interpolants
    d = step * t
    # the common factor e^{sign z_k/h} drops out of the relative residual
    up = [_split_eval(sol, x + m * d, k)[1] for m in (-2, -1, 1, 2)]
    du = (up[0] - 8 * up[1] + 8 * up[2] - up[3]) / (12 * d)
    u = _split_eval(sol, x, k)[1]
    r = du - (1j / sol.h) * m_matrix(sol.V, sol.lam, x) @ u
    return float(np.linalg.norm(r) / np.linalg.norm(u))


def det_q_error(sol: WKBSolution) -> float:
    dets = np.linalg.det(np.moveaxis(q_matrix(sol.H), -1, 0))
    return float(np.max(np.abs(dets + 2j)))


def h4_error(sol: WKBSolution) -> float:
    F = h4(sol.V, sol.lam)(sol.nodes)
    return float(np.max(np.abs(sol.H ** 4 - F) / np.maximum(1.0, np.abs(F))))


def conjugate_solution(sol: WKBSolution) -> WKBSolution:
    """The solution of opposite sign built from conjugated data."""
    hv = np.conj(sol.H[0]) ** -1
    return transport_coefficients(sol.V, np.conj(sol.lam), sol.h, -sol.sign, sol.path.conj(),
                                  sol.N, np.conj(sol.phase_base),
                                  h_anchor=np.conj(sol.amplitude_base), h_anchor_value=hv,
                                  spacing=sol.spacing)


def conjugation_error(sol: WKBSolution, xs) -> float:
    """max |u(x) - c i J conj(u'(conj x))| / |u| over xs, u' = conjugate_solution(sol).

    c = +1 for u^+ and -1 for u^-.  The map u -> i J conj(u(conj .)) squares
    to -1, so the two signs cannot both carry the same constant once the
    branch of H on the conjugate data is fixed by H' = 1/conj(H).
    """
    other = conjugate_solution(sol)
    err = 0.0
    for x in xs:
        a = evaluate_wkb(sol, x)
        b = sol.sign * 1j * J_MAT @ np.conj(evaluate_wkb(other, np.conj(x)))
        err = max(err, float(np.linalg.norm(a - b) / np.linalg.norm(a)))
    return err


def monotone_path(V: FourierPotential, lam: complex, sign: int, start: complex, end: complex,
                  step: float = 0.02, h_anchor: complex = 0.0, max_steps: int = 2000,
                  margin: float = 0.05) -> Path:
    """Greedy path from start to end along which sign * Re z strictly increases.

    Each step heads for ``end`` if that direction is admissible, otherwise
    takes the admissible direction closest to it.  Raises NoMonotonePath when
    no admissible direction exists or the walk does not arrive.
    """
    hb = HBranch(V, lam, h_anchor)
    F = hb.F
    p, Hp = complex(start), hb.at(start)
    pts = [p]
    thetas = np.concatenate([[0.0], np.ravel(np.column_stack(
        [np.linspace(0.05, 1.5, 30), -np.linspace(0.05, 1.5, 30)]))])
    for _ in range(max_steps):
        d = end - p
        if abs(d) == 0:
            break
        nu = complex(nu_from_h(V, lam, p, Hp))
        u = d / abs(d)
        stepsize = min(step, abs(d))
        for th in thetas:
            e = u * cmath.exp(1j * th)
            # d(Re z) along e, relative to |nu|
            if sign * (1j * nu * e).real > margin * abs(nu):
                break
        else:
            raise NoMonotonePath(f"no direction increases {'+' if sign > 0 else '-'}Re z at {p}")
        q = p + stepsize * e
        Hp = _nearest_root(Hp, F(q))
        p = q
        pts.append(p)
        if abs(p - end) < 1e-12:
            break
    else:
        raise NoMonotonePath(f"walk from {start} did not reach {end}")
    if abs(pts[-1] - end) > 1e-9:
        raise NoMonotonePath(f"walk from {start} did not reach {end}")
    return Path(tuple(_simplify(pts)))


def _simplify(pts, tol=1e-12):
    # merge collinear consecutive steps
    out = [pts[0]]
    for k in range(1, len(pts) - 1):
        a, b, c = out[-1], pts[k], pts[k + 1]
        if abs(((b - a) * np.conj(c - b)).imag) > tol * abs(b - a) * abs(c - b):
            out.append(b)
    out.append(pts[-1])
    return out
