"""Leading-order transition matrices and the quantization solvers.

A gap of type m contributes e^{S_j/h} diag(e^{i I_j/h}, e^{-i I_j/h}) E_m to
the monodromy.  For admissible type sequences the trace of the product
collapses to e^{sum S_j/h} 2^l prod cos(I_j/h); both forms are computed so
they can be checked against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .actions import QUAD_TOL, action_I_full, actions_SI, ordered_points
from .errors import DegenerateJacobian, NewtonDivergence
from .potential import FourierPotential

E_MATRICES = {
    1: np.array([[1, 1j], [-1j, 1]]),
    2: np.array([[1, 1j], [1j, -1]]),
    3: np.array([[1, -1j], [-1j, -1]]),
    4: np.array([[1, -1j], [1j, 1]]),
}

# Which factor of V^2 - mu^2 vanishes at the left (odd) and right (even)
# end of each type: '-' for V - mu, '+' for V + mu.
TYPE_KINDS = {1: ("-", "-"), 2: ("-", "+"), 3: ("+", "-"), 4: ("+", "+")}

# Adjacent pairs (m_j, m_{j+1}) that cannot occur.  The interval between
# x_{2j} and x_{2j+1} has a fixed sign of V, so the right kind of gap j must
# equal the left kind of gap j + 1.  This rules out eight pairs; six of them
# are the classical list, the remaining two are (2, 2) and (3, 3).
FORBIDDEN_PAIRS = frozenset(
    (a, b) for a in TYPE_KINDS for b in TYPE_KINDS
    if TYPE_KINDS[a][1] != TYPE_KINDS[b][0]
)
CLASSICAL_FORBIDDEN = frozenset({(1, 4), (4, 1), (1, 3), (2, 1), (4, 2), (3, 4)})

DIRECT_LIMIT = 500.0


def e_matrix(m: int, table: Mapping[int, np.ndarray] | None = None) -> np.ndarray:
    if m not in (1, 2, 3, 4):
        raise ValueError(f"transition type must be 1..4, got {m}")
    return (table or E_MATRICES)[m].astype(complex)


def admissible(types: Sequence[int], forbidden=FORBIDDEN_PAIRS) -> bool:
    """Cyclic adjacency rule plus equal numbers of types 2 and 3."""
    types = list(types)
    if not types or any(m not in (1, 2, 3, 4) for m in types):
        return False
    l = len(types)
    for j in range(l):
        if (types[j], types[(j + 1) % l]) in forbidden:
            return False
    return types.count(2) == types.count(3)


@dataclass
class LeadingTransition:
    j: int
    m: int
    S: complex
    I: complex
    h: float

    def matrix(self, table=None) -> np.ndarray:
        ph = np.exp(1j * self.I / self.h)
        return np.exp(self.S / self.h) * np.diag([ph, 1 / ph]) @ e_matrix(self.m, table)

    def reduced(self, table=None) -> np.ndarray:
        """Matrix without the scalar e^{S/h}."""
        ph = np.exp(1j * self.I / self.h)
        return np.diag([ph, 1 / ph]) @ e_matrix(self.m, table)


@dataclass
class TraceResult:
    log_scale: complex          # sum S_j / h
    factor: complex             # 2^l prod cos(I_j / h)
    direct: complex | None      # tr of the product, None if skipped
    direct_reduced: complex     # tr of the product of reduced matrices

    @property
    def closed(self) -> complex:
        return np.exp(self.log_scale) * self.factor


def leading_trace(transitions: Sequence[LeadingTransition], table=None) -> TraceResult:
    """Trace of T_l ... T_1 two ways.

    ``direct_reduced`` multiplies the matrices without the e^{S/h} scalars
    and is the overflow-safe counterpart of ``factor``.
    """
    if not transitions:
        raise ValueError("empty transition sequence")
    h = transitions[0].h
    if any(t.h != h for t in transitions):
        raise ValueError("inconsistent h across transitions")
    l = len(transitions)
    log_scale = sum(t.S for t in transitions) / h
    factor = 2 ** l * np.prod([np.cos(t.I / h) for t in transitions])
    P = np.eye(2, dtype=complex)
    for t in transitions:
        P = t.reduced(table) @ P
    reduced = complex(np.trace(P))
    direct = None
    if abs(log_scale.real) <= DIRECT_LIMIT:
        D = np.eye(2, dtype=complex)
        for t in transitions:
            D = t.matrix(table) @ D
        direct = complex(np.trace(D))
    return TraceResult(complex(log_scale), complex(factor), direct, reduced)


# ---------------------------------------------------------------------------
# quantization solvers


@dataclass
class Prediction:
    mode: str
    lam: complex
    k: int
    j: int | None = None
    action: complex = 0j
    stage: int = 1

    def record(self) -> dict:
        return {"mode": self.mode, "j": self.j, "k": self.k, "stage": self.stage,
                "lambda_re": self.lam.real, "lambda_im": self.lam.imag,
                "action_value": self.action.real}


@dataclass
class SolveResult:
    predictions: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def _newton(fun, x0, tol, maxit=50, bracket=None):
    """fun(x) -> (f, df, scale).  Returns the root or raises NewtonDivergence."""
    x = complex(x0)
    for _ in range(maxit):
        f, df, scale = fun(x)
        if abs(f) <= tol * scale:
            return x, f
        if df == 0:
            raise DegenerateJacobian(f"zero derivative at {x}")
        x = x - f / df
        if bracket is not None and not bracket(x):
            raise NewtonDivergence(f"Newton left the window at {x}")
    f, _, scale = fun(x)
    if abs(f) <= 1e3 * tol * scale:
        return x, f
    raise NewtonDivergence(f"no convergence from {x0}")


def _segment(a, b, n):
    return [a + (b - a) * t for t in np.linspace(0.0, 1.0, n)]


def solve_quantization_A(V: FourierPotential, lam_a: complex, lam_b: complex, h: float,
                         k_range: tuple[int, int] | None = None, tol: float = 1e-12,
                         samples: int | None = None, quad_tol: float = QUAD_TOL) -> SolveResult:
    """Roots of I(lam) = 2 pi k h for lam on (a neighbourhood of) [lam_a, lam_b]."""
    if samples is None:
        samples = max(16, int(4 * abs(lam_b - lam_a) / h) + 2)
    lams = _segment(complex(lam_a), complex(lam_b), samples)
    acts = [action_I_full(V, l_, tol=quad_tol) for l_ in lams]
    d_min = min(abs(a.dI) for a in acts)
    if d_min < 1e-8:
        raise DegenerateJacobian("dI/dlambda vanishes on the window")
    Ire = np.array([a.I.real for a in acts])
    step = 2 * math.pi * h
    lo, hi = Ire.min(), Ire.max()
    ks = range(math.ceil(lo / step), math.floor(hi / step) + 1)
    if k_range is not None:
        ks = [k for k in ks if k_range[0] <= k <= k_range[1]]
    res = SolveResult()

    def fun_for(k):
        def fun(lam):
            a = action_I_full(V, lam, tol=quad_tol, check=False)
            return a.I - step * k, a.dI, max(1.0, abs(a.I))
        return fun

    for k in ks:
        target = step * k
        i = int(np.searchsorted(Ire, target)) if Ire[-1] >= Ire[0] else \
            int(np.searchsorted(-Ire, -target))
        i = min(max(i, 1), samples - 1)
        t = (target - Ire[i - 1]) / (Ire[i] - Ire[i - 1])
        seed = lams[i - 1] + t * (lams[i] - lams[i - 1])
        try:
            lam, _ = _newton(fun_for(k), seed, tol)
        except (NewtonDivergence, DegenerateJacobian) as exc:
            res.failures.append({"k": k, "error": str(exc)})
            continue
        if np.isreal(lam_a) and np.isreal(lam_b):
            lam = complex(lam.real, lam.imag if abs(lam.imag) > 1e-10 else 0.0)
        res.predictions.append(Prediction("A", lam, k, None, complex(target)))
    return res


def solve_quantization_B(V: FourierPotential, mu_a: float, mu_b: float, h: float,
                         k_range: tuple[int, int] | None = None, stage2: bool = True,
                         tol: float = 1e-12, samples: int | None = None,
                         quad_tol: float = QUAD_TOL) -> SolveResult:
    """Stage 1: I_j(mu) = (k + 1/2) pi h for every gap j.
    Stage 2: 2^l prod cos(I_j/h) = 2 e^{-sum S_j/h}, seeded from stage 1.

    Predictions are returned as lam = i mu.
    """
    if samples is None:
        samples = max(12, int(4 * abs(mu_b - mu_a) / h) + 2)
    mus = np.linspace(mu_a, mu_b, samples)
    sets = [actions_SI(V, m, tol=quad_tol) for m in mus]
    l = sets[0].l
    if any(s.l != l for s in sets):
        raise ValueError("the number of turning points changes across the window")
    res = SolveResult()
    step = math.pi * h
    for j in range(l):
        Ij = np.array([s.I[j].real for s in sets])
        if min(abs(s.dI[j]) for s in sets) < 1e-8:
            raise DegenerateJacobian(f"dI_{j + 1}/dmu vanishes on the window")
        lo, hi = Ij.min(), Ij.max()
        ks = range(math.ceil(lo / step - 0.5), math.floor(hi / step - 0.5) + 1)
        if k_range is not None:
            ks = [k for k in ks if k_range[0] <= k <= k_range[1]]
        order = np.argsort(Ij)
        for k in ks:
            target = (k + 0.5) * step
            seed = float(np.interp(target, Ij[order], mus[order]))

            def fun(mu, j=j, target=target):
                a = actions_SI(V, mu, tol=quad_tol)
                return a.I[j] - target, a.dI[j], max(1.0, abs(a.I[j]))
            try:
                mu1, _ = _newton(fun, seed, tol)
            except (NewtonDivergence, DegenerateJacobian) as exc:
                res.failures.append({"j": j + 1, "k": k, "stage": 1, "error": str(exc)})
                continue
            mu1 = complex(mu1.real, 0.0) if abs(mu1.imag) < 1e-12 else mu1
            res.predictions.append(Prediction("B", 1j * mu1, k, j + 1, complex(target), 1))
            if not stage2:
                continue
            try:
                mu2 = stage2_refine(V, mu1, h, tol, quad_tol)
            except (NewtonDivergence, DegenerateJacobian) as exc:
                res.failures.append({"j": j + 1, "k": k, "stage": 2, "error": str(exc)})
                continue
            res.predictions.append(Prediction("B", 1j * mu2, k, j + 1, complex(target), 2))
    return res


def stage2_function(V: FourierPotential, mu: complex, h: float, quad_tol: float = QUAD_TOL):
    """F(mu) = 2^l prod cos(I_j/h) - 2 exp(-sum S_j/h) and dF/dmu."""
    a = actions_SI(V, mu, tol=quad_tol)
    c = np.cos(np.array(a.I) / h)
    s = np.sin(np.array(a.I) / h)
    dI = np.array(a.dI)
    l = a.l
    prod = np.prod(c)
    dprod = 0j
    for j in range(l):
        dprod += -s[j] * dI[j] / h * np.prod(np.delete(c, j))
    ex = np.exp(-sum(a.S) / h)
    F = 2 ** l * prod - 2 * ex
    dF = 2 ** l * dprod + 2 * ex * sum(a.dS) / h
    return F, dF


def stage2_refine(V: FourierPotential, mu1: complex, h: float, tol: float = 1e-12,
                  quad_tol: float = QUAD_TOL) -> complex:
    F, dF = stage2_function(V, mu1, h, quad_tol)
    a = actions_SI(V, mu1, tol=quad_tol)
    scale = 2.0 ** a.l

    def fun(mu):
        F, dF = stage2_function(V, mu, h, quad_tol)
        return F, dF, scale

    if abs(dF) > 1e-8 * scale / h:
        return _newton(fun, mu1, tol)[0]
    # symmetric gaps make the stage-1 point a critical point of F; split the
    # seed in the direction where F has the right sign
    delta = h * math.exp(-sum(a.S).real / (a.l * h)) / max(abs(a.dI[0]), 1e-12)
    best = None
    for sgn in (1, -1):
        try:
            mu, _ = _newton(fun, mu1 + sgn * delta, tol)
        except (NewtonDivergence, DegenerateJacobian):
            continue
        if best is None or abs(mu - mu1) < abs(best - mu1):
            best = mu
    if best is None:
        raise NewtonDivergence(f"stage-2 refinement failed from {mu1}")
    return best
