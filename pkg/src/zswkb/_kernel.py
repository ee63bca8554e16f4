"""Fourth-order commutator-free exponential stepper for the monodromy.

Each step applies two exponentials of traceless 2x2 matrices built from the
potential at the two Gauss nodes of the step.  The lambda-derivatives of the
propagator are carried along, so one sweep returns Phi, dPhi/dlam and
d2Phi/dlam2.
"""
import math

import numba
import numpy as np

SQ3 = math.sqrt(3.0)
NODE1, NODE2 = 0.5 - SQ3 / 6, 0.5 + SQ3 / 6
W_A, W_B = 0.25 + SQ3 / 6, 0.25 - SQ3 / 6
_INVFACT = np.array([1.0 / math.factorial(k) for k in range(24)])


@numba.njit(cache=True, nogil=True)
def _cosh_sinc(q):
    # C = cosh(sqrt q), S = sinh(sqrt q)/sqrt q, and S', S'' in q
    if abs(q) < 0.25:
        c = 0j
        s = 0j
        ds = 0j
        dds = 0j
        t = 1.0 + 0j
        t1 = 0j
        t2 = 0j
        for n in range(10):
            c += t * _INVFACT[2 * n]
            s += t * _INVFACT[2 * n + 1]
            if n >= 1:
                ds += n * t1 * _INVFACT[2 * n + 1]
            if n >= 2:
                dds += n * (n - 1) * t2 * _INVFACT[2 * n + 1]
            t2 = t1
            t1 = t
            t = t * q
        return c, s, ds, dds
    r = np.sqrt(q)
    c = np.cosh(r)
    s = np.sinh(r) / r
    ds = (c - s) / (2 * q)
    dds = (0.5 * s - 3 * ds) / (2 * q)
    return c, s, ds, dds


@numba.njit(cache=True, nogil=True)
def propagate(lam, h, v1, v2, dt):
    """Return p[0..2] = Phi(2pi), dPhi/dlam, d2Phi/dlam2 for u' = (i/h) M u,
    and the largest entry of Phi met along the way (rounding scale)."""
    p = np.zeros((3, 2, 2), np.complex128)
    p[0, 0, 0] = 1.0
    p[0, 1, 1] = 1.0
    g = 1j * dt / h
    e = np.zeros((3, 2, 2), np.complex128)
    nxt = np.zeros((3, 2, 2), np.complex128)
    beta = 0.5 * g
    b11 = -lam * beta
    q1 = -2 * beta * b11
    q2 = 2 * beta * beta
    growth = 1.0
    for k in range(v1.shape[0]):
        for st in range(2):
            if st == 0:
                vm = W_A * v1[k] + W_B * v2[k]
            else:
                vm = W_B * v1[k] + W_A * v2[k]
            b12 = 1j * g * vm
            b21 = -b12
            q = b11 * b11 + b12 * b21
            c, s, ds, dds = _cosh_sinc(q)
            dc = 0.5 * s
            ddc = 0.5 * ds
            e[0, 0, 0] = c + s * b11
            e[0, 0, 1] = s * b12
            e[0, 1, 0] = s * b21
            e[0, 1, 1] = c - s * b11
            a0 = dc * q1
            a1 = ds * q1
            e[1, 0, 0] = a0 + a1 * b11 - s * beta
            e[1, 0, 1] = a1 * b12
            e[1, 1, 0] = a1 * b21
            e[1, 1, 1] = a0 - a1 * b11 + s * beta
            a0 = ddc * q1 * q1 + dc * q2
            a1 = dds * q1 * q1 + ds * q2
            a2 = 2 * ds * q1
            e[2, 0, 0] = a0 + a1 * b11 - a2 * beta
            e[2, 0, 1] = a1 * b12
            e[2, 1, 0] = a1 * b21
            e[2, 1, 1] = a0 - a1 * b11 + a2 * beta
            for i in range(2):
                for j in range(2):
                    s0 = 0j
                    s1 = 0j
                    s2 = 0j
                    for m in range(2):
                        s0 += e[0, i, m] * p[0, m, j]
                        s1 += e[1, i, m] * p[0, m, j] + e[0, i, m] * p[1, m, j]
                        s2 += (e[2, i, m] * p[0, m, j] + 2 * e[1, i, m] * p[1, m, j]
                               + e[0, i, m] * p[2, m, j])
                    nxt[0, i, j] = s0
                    nxt[1, i, j] = s1
                    nxt[2, i, j] = s2
            p[:] = nxt
        for i in range(2):
            for j in range(2):
                a = abs(p[0, i, j])
                if a > growth:
                    growth = a
    return p, growth


@numba.njit(cache=True, nogil=True)
def propagate_path(lam, h, v1, v2, dt, u0):
    """Propagate one vector and record it at every grid point (for Wronskian checks)."""
    n = v1.shape[0]
    out = np.zeros((n + 1, 2), np.complex128)
    out[0] = u0
    g = 1j * dt / h
    beta = 0.5 * g
    b11 = -lam * beta
    u = u0.copy()
    for k in range(n):
        for st in range(2):
            if st == 0:
                vm = W_A * v1[k] + W_B * v2[k]
            else:
                vm = W_B * v1[k] + W_A * v2[k]
            b12 = 1j * g * vm
            q = b11 * b11 - b12 * b12
            c, s, ds, dds = _cosh_sinc(q)
            a = (c + s * b11) * u[0] + s * b12 * u[1]
            b = -s * b12 * u[0] + (c - s * b11) * u[1]
            u[0] = a
            u[1] = b
        out[k + 1] = u
    return out
