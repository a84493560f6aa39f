"""Average peak age with computing preemption.

A stationary policy waits ``g(T)`` after the packet reaches the server (or
until it finishes computing, whichever is first) before generating the next
one. Packet ``j`` survives iff ``C_j <= g(T_j) + T_{j+1}``. By renewal-reward
the average peak age is the ratio::

    E[T + min(g(T), C) + (T + C) 1{success}] / Pr(success)

which is minimised over ``g`` with Dinkelbach iterations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import integrate as _spi

from . import numerics
from .distributions import Deterministic, DistributionSpec, Exponential
from .results import (
    WAIT_FOR_COMPLETION,
    ConvergenceError,
    DinkelbachTrace,
    OptimizationResult,
    UnreachableDeliveryError,
)

DEFAULT_DELTA = 1e-9
MAX_ITER = 100
SNAP_RTOL = 1e-11


@dataclass(frozen=True)
class FixedThreshold:
    theta: float

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("threshold must be non-negative")

    def __call__(self, x):
        return self.theta


@dataclass(frozen=True)
class TransmissionAware:
    """``g(x) = max(0, beta - x)``: wait less after a slow transmission."""

    beta: float

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")

    def __call__(self, x):
        return max(0.0, self.beta - x)


WaitFunction = Union[FixedThreshold, TransmissionAware]


@dataclass(frozen=True)
class WpEvaluation:
    numerator: float
    prob_success: float
    paoi: float


class ExpCTerms(NamedTuple):
    e_min: float
    pr: float
    e_t: float
    e_c: float


def _canonical(g: WaitFunction, T: DistributionSpec) -> WaitFunction:
    # beta below the support of T never waits: same policy as theta = 0
    if isinstance(g, TransmissionAware):
        if math.isinf(g.beta):
            return FixedThreshold(WAIT_FOR_COMPLETION)
        if g.beta <= T.support_lo:
            return FixedThreshold(0.0)
    return g


# generic route: quadrature over the transmission law of the next packet

def _success_given_wait(s, T, C, rel_tol):
    """``E_T'[F_C(T' + s)]``."""
    cdf = C.cdf
    pts = [b - s for b in C.breakpoints()]
    return T.expect(lambda y: cdf(y + s), rel_tol, points=pts)


def _cmass_given_wait(s, T, C, rel_tol):
    """``E_T'[E[C 1{C <= T' + s}]]``."""
    pm = C.partial_mean
    pts = [b - s for b in C.breakpoints()]
    return T.expect(lambda y: pm(y + s), rel_tol, points=pts)


def _generic_terms(g, T, C, rel_tol):
    """``(E[min(g,C)], Pr, E[T 1], E[C 1])`` for any pair of laws."""
    g = _canonical(g, T)
    if isinstance(g, FixedThreshold):
        th = g.theta
        if math.isinf(th):
            return ExpCTerms(C.mean, 1.0, T.mean, C.mean)
        h = _success_given_wait(th, T, C, rel_tol)
        return ExpCTerms(C.expected_min(th), h, T.mean * h,
                         _cmass_given_wait(th, T, C, rel_tol))
    beta = g.beta
    h0 = _success_given_wait(0.0, T, C, rel_tol)
    k0 = _cmass_given_wait(0.0, T, C, rel_tol)
    if isinstance(T, Deterministic):
        s = g(T.value)
        h = _success_given_wait(s, T, C, rel_tol)
        return ExpCTerms(C.expected_min(s), h, T.value * h, _cmass_given_wait(s, T, C, rel_tol))

    inner_tol = rel_tol * 0.1

    def body(x):
        s = beta - x
        h = _success_given_wait(s, T, C, inner_tol)
        k = _cmass_given_wait(s, T, C, inner_tol)
        return T.pdf(x) * np.array([C.expected_min(s), h, x * h, k])

    lo = T.support_lo
    head, _ = _spi.quad_vec(body, lo, beta, epsrel=rel_tol, epsabs=1e-14, limit=400)
    # x >= beta never waits
    tail_p = 1.0 - T.cdf(beta)
    tail_x = T.mean - T.partial_mean(beta)
    return ExpCTerms(
        float(head[0]),
        float(head[1]) + tail_p * h0,
        float(head[2]) + tail_x * h0,
        float(head[3]) + tail_p * k0,
    )


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class WaitTable:
    """Cached ``E[min(s, C)]``, ``E_T'[F_C(T'+s)]`` and ``E_T'[E[C 1{C <= T'+s}]]``.

    These depend on the wait ``s`` only, so a transmission-aware policy with
    any ``beta`` integrates the same three curves against ``f_T(beta - s)``.
    Values live on fixed Gauss-Legendre panels whose edges include every
    point where the curves lose smoothness; only the last, partial panel is
    evaluated afresh per ``beta``.
    """

    def __init__(self, T, C, rel_tol=1e-11):
        self.T, self.C, self.rel_tol = T, C, rel_tol
        lo_c = [C.support_lo, *C.breakpoints()]
        lo_t = [T.support_lo, *T.breakpoints()]
        self.kinks = sorted({b for b in lo_c if b > 0} | {a - b for a in lo_c for b in lo_t if a - b > 0})
        spread = min(_scale(T), _scale(C))
        self.width = 2.0 * spread
        self.covered = 0.0
        self._s = np.empty(0)
        self._w = np.empty(0)
        self._vals = np.empty((0, 3))
        self._ends = np.empty(0)  # right edge of each node's panel

    def curves(self, s):
        T, C, tol = self.T, self.C, self.rel_tol
        return (C.expected_min(s), _success_given_wait(s, T, C, tol), _cmass_given_wait(s, T, C, tol))

    def _panel(self, a, b):
        s = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
        w = 0.5 * (b - a) * _GL_WEIGHTS
        return s, w, np.array([self.curves(x) for x in s])

    def _extend(self, upto):
        hi = max(upto, 2.0 * self.covered, self.width)
        edges = {self.covered, hi, *(k for k in self.kinks if self.covered < k < hi)}
        edges = sorted(edges)
        s_parts, w_parts, v_parts, e_parts = [self._s], [self._w], [self._vals], [self._ends]
        for a, b in zip(edges[:-1], edges[1:]):
            n = max(1, int(math.ceil((b - a) / self.width)))
            for j in range(n):
                pa, pb = a + (b - a) * j / n, a + (b - a) * (j + 1) / n
                s, w, v = self._panel(pa, pb)
                s_parts.append(s)
                w_parts.append(w)
                v_parts.append(v)
                e_parts.append(np.full(s.size, pb))
        self._s = np.concatenate(s_parts)
        self._w = np.concatenate(w_parts)
        self._vals = np.concatenate(v_parts)
        self._ends = np.concatenate(e_parts)
        self.covered = hi

    def head(self, beta):
        """``int_lo^beta f_T(x) [E min, h, x h, k](beta - x) dx``."""
        top = beta - self.T.support_lo
        if top <= 0:
            return np.zeros(4)
        if top > self.covered:
            self._extend(top)
        m = int(np.searchsorted(self._ends, top, side="right"))
        s, w, v = self._s[:m], self._w[:m], self._vals[:m]
        start = float(self._ends[m - 1]) if m else 0.0
        if top > start:
            # partial panel, split at kinks it contains
            cuts = [start, *(k for k in self.kinks if start < k < top), top]
            extra = [self._panel(a, b) for a, b in zip(cuts[:-1], cuts[1:])]
            s = np.concatenate([s, *(e[0] for e in extra)])
            w = np.concatenate([w, *(e[1] for e in extra)])
            v = np.concatenate([v, *(e[2] for e in extra)])
        x = beta - s
        fw = w * self.T.pdf(x)
        return np.array([fw @ v[:, 0], fw @ v[:, 1], fw @ (x * v[:, 1]), fw @ v[:, 2]])


def _scale(D):
    if isinstance(D, Deterministic):
        return max(D.value, 1e-3) if D.value > 0 else 1.0
    return max(D.quantile(0.5) - D.support_lo, 1e-6)


_TABLES: dict = {}


def wait_table(T, C, rel_tol=1e-11) -> WaitTable:
    key = (T, C, rel_tol)
    tab = _TABLES.get(key)
    if tab is None:
        if len(_TABLES) > 64:
            _TABLES.clear()
        tab = _TABLES[key] = WaitTable(T, C, rel_tol)
    return tab


def _tabulated_terms(g, T, C, rel_tol):
    """Same terms as ``_generic_terms`` using a cached ``WaitTable``."""
    g = _canonical(g, T)
    if isinstance(g, FixedThreshold) or isinstance(T, Deterministic):
        return _generic_terms(g, T, C, rel_tol)
    tab = wait_table(T, C, min(rel_tol * 0.1, 1e-11))
    beta = g.beta
    head = tab.head(beta)
    _, h0, k0 = tab.curves(0.0)
    tail_p = 1.0 - T.cdf(beta)
    tail_x = T.mean - T.partial_mean(beta)
    return ExpCTerms(
        float(head[0]),
        float(head[1]) + tail_p * h0,
        float(head[2]) + tail_x * h0,
        float(head[3]) + tail_p * k0,
    )


# exponential computation: everything reduces to one quadrature over T

def _wait_moments(g, T, mu, rel_tol):
    """``E[exp(-mu g)], E[T exp(-mu g)], E[g exp(-mu g)]``."""
    g = _canonical(g, T)
    if isinstance(g, FixedThreshold):
        th = g.theta
        if math.isinf(th):
            return 0.0, 0.0, 0.0
        e = math.exp(-mu * th)
        return e, T.mean * e, th * e
    if isinstance(T, Deterministic):
        s = g(T.value)
        e = math.exp(-mu * s)
        return e, T.value * e, s * e
    beta = g.beta
    lo = T.support_lo

    def body(x):
        s = beta - x
        e = math.exp(-mu * s) * T.pdf(x)
        return np.array([e, x * e, s * e])

    head, _ = _spi.quad_vec(body, lo, beta, epsrel=rel_tol, epsabs=1e-15, limit=400)
    tail_p = 1.0 - T.cdf(beta)
    tail_x = T.mean - T.partial_mean(beta)
    return float(head[0]) + tail_p, float(head[1]) + tail_x, float(head[2])


def closed_forms_exp_C(g: WaitFunction, T: DistributionSpec, mu: float,
                       rel_tol: float = 1e-11) -> ExpCTerms:
    """The four expectations for ``C ~ Exp(mu)`` in terms of transforms of ``T``.

    With ``A = E[e^{-mu g}]``, ``B = E[T e^{-mu g}]``, ``G = E[g e^{-mu g}]``
    and ``L, M`` the transforms of ``T`` at ``mu``::

        E[min(g, C)] = (1 - A) / mu
        Pr           = 1 - L A
        E[T 1]       = E[T] - L B
        E[C 1]       = 1/mu - L A / mu - L G - M A
    """
    lap, wl = T.transforms(mu)
    a, b, gm = _wait_moments(g, T, mu, rel_tol)
    return ExpCTerms(
        (1.0 - a) / mu,
        1.0 - lap * a,
        T.mean - lap * b,
        1.0 / mu - lap * a / mu - lap * gm - wl * a,
    )


def _terms(g, T, C, method, rel_tol):
    if method == "auto":
        method = "exp" if isinstance(C, Exponential) else "generic"
    if method == "exp":
        if not isinstance(C, Exponential):
            raise ValueError("closed forms need exponential computation times")
        return closed_forms_exp_C(g, T, C.rate, rel_tol)
    if method == "generic":
        return _tabulated_terms(g, T, C, rel_tol)
    if method == "adaptive":
        return _generic_terms(g, T, C, rel_tol)
    raise ValueError(f"unknown method {method!r}")


def prob_success(g: WaitFunction, T, C, method="auto", rel_tol=1e-10) -> float:
    return _terms(g, T, C, method, rel_tol).pr


def expected_tc_on_success(g: WaitFunction, T, C, method="auto", rel_tol=1e-10) -> float:
    """``E[(T + C) 1{success}]``."""
    t = _terms(g, T, C, method, rel_tol)
    return t.e_t + t.e_c


def paoi_wp(g: WaitFunction, T, C, method="auto", rel_tol=1e-10) -> WpEvaluation:
    t = _terms(g, T, C, method, rel_tol)
    num = T.mean + t.e_min + t.e_t + t.e_c
    if not t.pr > 0:
        raise UnreachableDeliveryError(f"no packet can be delivered under {g}")
    return WpEvaluation(num, t.pr, num / t.pr)


def dinkelbach_objective(c: float, g: WaitFunction, T, C, method="auto", rel_tol=1e-10) -> float:
    """``numerator - c * Pr(success)``."""
    t = _terms(g, T, C, method, rel_tol)
    return T.mean + t.e_min + t.e_t + t.e_c - c * t.pr


def _search_nodes(T, C, n):
    hi = T.quantile(0.999) + C.quantile(0.999)
    if isinstance(T, Deterministic) and isinstance(C, Deterministic):
        hi = 2.0 * (T.value + C.value)
    nodes = np.linspace(0.0, hi, n)
    return np.unique(np.concatenate((nodes, [T.support_lo])))


def _inner_min(obj, nodes, tol):
    """Minimise ``obj`` over ``nodes`` ∪ {inf} with golden polish; returns (x, val)."""
    vals = [obj(x) for x in nodes]
    i = int(np.argmin(vals))
    best = (float(nodes[i]), vals[i])
    if 0 < i < len(nodes) - 1:
        x, v = numerics.golden_section(obj, nodes[i - 1], nodes[i + 1], tol)
        if v < best[1]:
            best = (x, v)
    elif i == len(nodes) - 1:
        x, v = numerics.golden_section(obj, nodes[i - 1], 4.0 * nodes[i], tol)
        if v < best[1]:
            best = (x, v)
    v_inf = obj(WAIT_FOR_COMPLETION)
    if v_inf < best[1]:
        best = (WAIT_FOR_COMPLETION, v_inf)
    # flat minima: report the smallest threshold reaching the same value
    v0 = vals[0]
    if v0 <= best[1] + SNAP_RTOL * max(1.0, abs(best[1])):
        best = (float(nodes[0]), v0)
    return best


def _dinkelbach(make_g, T, C, delta, max_iter, grid, tol, method, label):
    c = 2.0 * T.mean + 2.0 * C.mean
    nodes = _search_nodes(T, C, grid)
    trace = DinkelbachTrace()
    x = WAIT_FOR_COMPLETION
    for _ in range(max_iter):
        obj = lambda v: dinkelbach_objective(c, make_g(v), T, C, method)
        x, p = _inner_min(obj, nodes, tol)
        trace.append(c, x, p)
        if -delta <= p <= delta:
            trace.converged = True
            break
        c_new = paoi_wp(make_g(x), T, C, method).paoi
        if not c_new < c:
            # no further progress possible at machine precision
            trace.converged = abs(p) <= 1e3 * delta
            break
        c = c_new
    res = OptimizationResult(
        threshold=x,
        paoi=paoi_wp(make_g(x), T, C, method).paoi,
        method=label,
        parameter="theta" if make_g is FixedThreshold else "beta",
        converged=trace.converged,
        iterations=len(trace.iterations),
        residuals=[s.p_of_c for s in trace.iterations],
        trace=trace,
    )
    if not trace.converged:
        raise ConvergenceError(f"{label} did not converge in {max_iter} iterations", res)
    return res


def optimize_fixed_threshold_wp(T, C, delta=DEFAULT_DELTA, max_iter=MAX_ITER,
                                grid=65, tol=1e-9, method="auto") -> OptimizationResult:
    """Best fixed threshold by Dinkelbach iterations from ``c = 2E[T] + 2E[C]``."""
    return _dinkelbach(FixedThreshold, T, C, delta, max_iter, grid, tol, method,
                       "dinkelbach fixed threshold")


def optimize_transmission_aware_wp(T, C, delta=DEFAULT_DELTA, max_iter=MAX_ITER,
                                   grid=65, tol=1e-9, method="auto") -> OptimizationResult:
    """Best ``beta`` for ``g(x) = max(0, beta - x)``, same outer loop."""
    return _dinkelbach(TransmissionAware, T, C, delta, max_iter, grid, tol, method,
                       "dinkelbach transmission-aware")


def gamma_of_c(c: float, lap: float, wl: float, mu: float) -> float:
    """Pointwise minimiser of the parametrised objective for ``C ~ Exp(mu)``.

    For fixed ``c`` the per-``x`` integrand ``e^{-mu g}(c L - M - (1 + L)/mu
    - L (x + g))`` is minimised at ``x + g = (mu c L - mu M - 1) / (mu L)``.
    """
    return (mu * c * lap - mu * wl - 1.0) / (mu * lap)


def optimal_policy_exp_C(T: DistributionSpec, mu: float, delta: float = DEFAULT_DELTA,
                         max_iter: int = MAX_ITER) -> OptimizationResult:
    """Optimal stationary policy when computation is ``Exp(mu)``.

    Iterates ``c <- ratio(max(0, gamma(c) - x))`` from ``c = 2E[T] + 2/mu``
    until ``c`` moves by at most ``delta``. The policy is transmission-aware
    with ``beta = gamma(c*)``; a non-positive ``gamma`` means best effort.
    """
    lap, wl = T.transforms(mu)
    C = Exponential(mu)
    c = 2.0 * T.mean + 2.0 / mu
    trace = DinkelbachTrace()
    converged = False
    for _ in range(max_iter):
        gam = gamma_of_c(c, lap, wl, mu)
        g = TransmissionAware(max(gam, 0.0))
        ev = paoi_wp(g, T, C, "exp")
        trace.append(c, g.beta, ev.numerator - c * ev.prob_success)
        step = c - ev.paoi
        c = ev.paoi
        if abs(step) <= delta:
            converged = True
            break
    trace.converged = converged
    gam = gamma_of_c(c, lap, wl, mu)
    res = OptimizationResult(
        threshold=max(gam, 0.0),
        paoi=c,
        method="exp-computation fixed point",
        parameter="beta",
        converged=converged,
        iterations=len(trace.iterations),
        residuals=[s.p_of_c for s in trace.iterations],
        candidates=[("gamma", gam)],
        trace=trace,
    )
    if not converged:
        raise ConvergenceError(f"fixed point did not converge in {max_iter} iterations", res)
    return res
