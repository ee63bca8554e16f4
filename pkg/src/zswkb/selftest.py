"""Fast invariant suites, one per module, run with a fixed seed.

``selftest(e_table=...)`` swaps in a different set of E-matrices (the
mutation hook) and ``integrator_tol`` tightens the oracle's step-doubling
test; the suites must react to the first and be indifferent to the second.
"""
from __future__ import annotations

import math
import time
import traceback
import zlib
from dataclasses import dataclass, field

import numpy as np

from .actions import Path, action_I
from .oracle import TRACE_TOL, Rect, locate_eigenvalues, monodromy
from .potential import FourierPotential, eval_d, extrema
from .stokes import certify_window
from .transition import E_MATRICES, LeadingTransition, admissible, leading_trace
from .turning_points import find_turning_points, stokes_ray_arguments
from .wkb import transport_coefficients, wronskian

# reference values (computed at 30 digits)
I_COS_1 = 7.64039557805542403580952416434
DI_COS_1 = 5.24411510858423962092967917978
TRACE_REL = 1e-12


@dataclass
class SuiteResult:
    name: str
    ok: bool
    detail: str = ""
    seconds: float = 0.0


@dataclass
class Summary:
    results: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def lines(self):
        for r in self.results:
            yield f"{'PASS' if r.ok else 'FAIL'}  {r.name:<14} {r.seconds:6.2f}s  {r.detail}"

    def record(self) -> dict:
        return {"ok": self.ok, "suites": [{"name": r.name, "ok": r.ok, "detail": r.detail,
                                           "seconds": r.seconds} for r in self.results]}


def random_admissible(rng: np.random.Generator, max_l: int = 6) -> list[int]:
    while True:
        l = int(rng.integers(1, max_l + 1))
        seq = [int(m) for m in rng.integers(1, 5, size=l)]
        if admissible(seq):
            return seq


def trace_identity_error(seq, S, I, h, table=None) -> float:
    """Relative gap between tr(prod) and e^{sum S/h} 2^l prod cos(I/h)."""
    ts = [LeadingTransition(j + 1, m, S[j], I[j], h) for j, m in enumerate(seq)]
    r = leading_trace(ts, table)
    scale = abs(np.exp(r.log_scale)) * 2 ** len(seq) * np.prod([np.cosh((i / h).imag) for i in I])
    ref = r.direct if r.direct is not None else r.direct_reduced * np.exp(r.log_scale)
    return abs(ref - r.closed) / scale


def _check(cond, msg):
    if not cond:
        raise AssertionError(msg)


def suite_potential(rng, **_):
    c = rng.normal(size=4)
    s = np.concatenate([[0.0], rng.normal(size=3)])      # b_0 is unused
    V = FourierPotential(tuple(c), tuple(s[1:]))
    x = rng.uniform(0, 2 * math.pi, 16)
    ref = sum(c[k] * np.cos(k * x) + s[k] * np.sin(k * x) for k in range(4))
    _check(np.max(np.abs(eval_d(V, x) - ref)) < 1e-12, "series evaluation")
    d = 1e-5
    fd = (eval_d(V, x + d) - eval_d(V, x - d)) / (2 * d)
    _check(np.max(np.abs(fd - eval_d(V, x, 1))) < 1e-7, "derivative vs finite difference")
    ex = extrema(FourierPotential((2 / 3, 1 / 3)))
    _check(abs(ex.V0 - 1) < 1e-12 and abs(ex.V1 - 1 / 3) < 1e-12, "extrema of (2+cos)/3")
    return "series, derivative, extrema"


def suite_turning_points(rng, **_):
    V = FourierPotential.cosine(strip=2.0)      # asinh(2) > 1
    for lam in (0.5, 1.0, 2.0):
        tps = find_turning_points(V, lam)
        a = math.asinh(lam)
        want = sorted([complex(math.pi / 2, a), complex(math.pi / 2, -a),
                       complex(3 * math.pi / 2, a), complex(3 * math.pi / 2, -a)],
                      key=lambda z: (z.real, z.imag))
        got = sorted((tp.position for tp in tps), key=lambda z: (round(z.real, 8), z.imag))
        _check(len(got) == 4, f"expected 4 points at lam={lam}, got {len(got)}")
        _check(max(abs(g - w) for g, w in zip(got, want)) < 1e-10, f"closed form at lam={lam}")
        for tp in tps:
            _check(len(stokes_ray_arguments(tp, V, lam).arguments) == tp.order + 2, "ray count")
    return "closed form lam in {0.5, 1, 2}, ray counts"


def suite_actions(rng, **_):
    I, dI = action_I(FourierPotential.cosine(), 1.0)
    _check(abs(I - I_COS_1) < 1e-10 and abs(dI - DI_COS_1) < 1e-10, "I(cos, 1)")
    lam = rng.uniform(0.2, 2.0)
    I0, _ = action_I(FourierPotential((0.0,)), lam)
    _check(abs(I0 - 2 * math.pi * lam) < 1e-12, "free action 2 pi lam")
    return "I(cos, 1) reference, V = 0"


def suite_stokes(rng, **_):
    V = FourierPotential.cosine()
    cert = certify_window(V, 0.5j)
    _check(cert.ok, f"certification at i/2: {cert.violations}")
    _check(len(cert.bounded_lines) >= 2, "bounded real Stokes lines at i/2")
    _check(not certify_window(V, 1j * (1 + 1e-6)).ok, "mu above V0 must fail")
    return f"i/2 certified, {len(cert.bounded_lines)} bounded lines"


def suite_wkb(rng, **_):
    V = FourierPotential.cosine()
    y1, y2 = 1 + 0.6j, 1 - 0.6j
    h = 0.1
    up = transport_coefficients(V, 0.7, h, 1, Path((y1, y2)), 2, phase_base=y1)
    um = transport_coefficients(V, 0.7, h, -1, Path((y2, y1)), 2, phase_base=y1)
    w = wronskian(up, um, 1.0)
    _check(abs(w - 4j) < 0.5 * h, f"Wronskian {w}")
    return f"W = {w:.6f}"


def suite_transition(rng, e_table=None, draws=2000, **_):
    worst = 0.0
    for _ in range(draws):
        seq = random_admissible(rng)
        S = rng.uniform(-2, 2, len(seq))
        I = rng.uniform(-10, 10, len(seq))
        worst = max(worst, trace_identity_error(seq, S, I, 1.0, e_table))
    _check(worst <= TRACE_REL, f"trace identity off by {worst:.3e}")
    for m in range(1, 5):
        _check(abs(np.linalg.det((e_table or E_MATRICES)[m])) < 1e-15, f"det E_{m}")
    return f"{draws} draws, worst {worst:.2e}"


def suite_oracle(rng, integrator_tol=TRACE_TOL, **_):
    V = FourierPotential.cosine()
    worst = 0.0
    for lam in rng.uniform(0.2, 2.0, 4) + 1j * rng.uniform(-0.05, 0.05, 4):
        r = monodromy(V, lam, 0.1, tol=integrator_tol)
        worst = max(worst, abs(r.det - 1))
        rc = monodromy(V, lam.conjugate(), 0.1, tol=integrator_tol)
        _check(abs(rc.trace - r.trace.conjugate()) <= 1e-8 * max(1, abs(r.trace)),
               "trace(conj lam) = conj trace(lam)")
    _check(worst <= 1e-9, f"|det - 1| = {worst:.2e}")
    r0 = monodromy(FourierPotential((0.0,)), 0.37, 0.1, tol=integrator_tol)
    _check(abs(r0.trace - 2 * math.cos(2 * math.pi * 0.37 / 0.1)) < 1e-10, "free trace")
    roots = locate_eigenvalues(FourierPotential((0.0,)), 0.1, Rect(0.05, 0.35, -0.05, 0.05))
    _check(max(abs(r.lam - round(r.lam.real, 1)) for r in roots) < 1e-10, "free eigenvalues kh")
    return f"|det - 1| <= {worst:.1e}"


SUITES = {
    "potential": suite_potential,
    "turning_points": suite_turning_points,
    "branch_actions": suite_actions,
    "stokes": suite_stokes,
    "wkb_core": suite_wkb,
    "transition": suite_transition,
    "oracle": suite_oracle,
}


def selftest(seed: int = 0, e_table=None, integrator_tol: float = TRACE_TOL,
             only=None) -> Summary:
    out = Summary()
    for name, fn in SUITES.items():
        if only and name not in only:
            continue
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        t0 = time.perf_counter()
        try:
            detail, ok = fn(rng, e_table=e_table, integrator_tol=integrator_tol), True
        except Exception as exc:       # noqa: BLE001 - a suite failure is a result
            detail, ok = f"{type(exc).__name__}: {exc}", False
            if not isinstance(exc, AssertionError):
                detail += " | " + traceback.format_exc(limit=1).strip().splitlines()[-1]
        out.results.append(SuiteResult(name, ok, detail, time.perf_counter() - t0))
    return out


def mutated_e_table(m: int = 2, eps: float = 1e-3):
    """E-matrices with one entry of E_m nudged."""
    table = {k: v.copy().astype(complex) for k, v in E_MATRICES.items()}
    table[m][0, 0] += eps
    return table
