"""Average peak age without preemption at the edge server.

A fixed-threshold policy generates the next update ``min(theta, C)`` after the
previous one starts computing. The resulting average peak age is::

    P(theta) = E[min(theta, C)] + 2 E[(C' - theta - T)^+] + 2 E[T] + E[C]

where ``C'`` is the computation time of the packet ahead in the server. The
queueing term carries its factor two exactly once: one wait inflates the
inter-generation gap, the other the system time of the same packet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .distributions import DistributionSpec, Exponential, Deterministic
from .results import WAIT_FOR_COMPLETION, OptimizationResult

RESIDUAL_TOL = 1e-12
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class WopEvaluation:
    paoi: float
    term_min_theta_c: float
    term_wait: float
    constants: float


def _shifted_breaks(C, theta):
    return [b - theta for b in C.breakpoints() if b - theta > 0]


def expected_min_theta_c(theta: float, C: DistributionSpec) -> float:
    return C.expected_min(theta)


def expected_wait_term(theta: float, T: DistributionSpec, C: DistributionSpec,
                       rel_tol: float = numerics.DEFAULT_REL_TOL) -> float:
    """``2 E[(C - theta - T)^+]``; zero when waiting for completion."""
    if math.isinf(theta):
        return 0.0
    excess = C.excess_mean
    return 2.0 * T.expect(lambda x: excess(x + theta), rel_tol,
                          points=_shifted_breaks(C, theta))


def paoi_wop(theta: float, T: DistributionSpec, C: DistributionSpec,
             rel_tol: float = numerics.DEFAULT_REL_TOL) -> WopEvaluation:
    if theta < 0:
        raise ValueError("threshold must be non-negative")
    const = 2.0 * T.mean + C.mean
    e_min = expected_min_theta_c(theta, C)
    wait = expected_wait_term(theta, T, C, rel_tol)
    return WopEvaluation(e_min + wait + const, e_min, wait, const)


def _paoi(theta, T, C, rel_tol=numerics.DEFAULT_REL_TOL):
    return paoi_wop(theta, T, C, rel_tol).paoi


def paoi_wop_randomized(theta_dist: DistributionSpec, T: DistributionSpec,
                        C: DistributionSpec, rel_tol: float = 1e-7) -> float:
    """Average peak age when every threshold is drawn i.i.d. from ``theta_dist``."""
    return theta_dist.expect(lambda th: _paoi(th, T, C, rel_tol * 0.1), rel_tol)


def stationarity_residual(theta: float, T: DistributionSpec, C: DistributionSpec,
                          rel_tol: float = RESIDUAL_TOL) -> float:
    """``2 E_T[F_C(T + theta)] - F_C(theta) - 1``, the slope ``dP/dtheta``."""
    cdf = C.cdf
    ef = T.expect(lambda x: cdf(x + theta), rel_tol, points=_shifted_breaks(C, theta))
    return 2.0 * ef - C.cdf(theta) - 1.0


def second_derivative(theta: float, T: DistributionSpec, C: DistributionSpec,
                      rel_tol: float = 1e-10) -> float:
    """``2 E_T[f_C(T + theta)] - f_C(theta)`` for a continuous ``C``."""
    pdf = C.pdf
    ef = T.expect(lambda x: pdf(x + theta), rel_tol, points=_shifted_breaks(C, theta))
    return 2.0 * ef - C.pdf(theta)


def second_order_ok(theta: float, T: DistributionSpec, C: DistributionSpec,
                    slack: float = 1e-12) -> bool:
    return second_derivative(theta, T, C) >= -slack


def _pick(cands):
    """argmin over ``(theta, paoi)`` pairs; near-ties go to the smaller theta."""
    best = min(p for _, p in cands)
    tol = TIE_RTOL * max(1.0, abs(best))
    return min((th for th, p in cands if p <= best + tol))


def optimal_threshold_exp_C(T: DistributionSpec, mu: float) -> OptimizationResult:
    """Closed-form rule for exponential computation times.

    The slope of ``P`` is ``exp(-mu theta) (1 - 2 L)`` with ``L = E[exp(-mu T)]``,
    so the optimum sits on a boundary: ``0`` if ``L <= 1/2`` else wait for
    completion. ``L == 1/2`` makes ``P`` flat; 0 is returned with ``flat=True``.
    """
    C = Exponential(mu)
    lap = T.transforms(mu).laplace
    flat = abs(lap - 0.5) <= 1e-12
    theta = 0.0 if lap <= 0.5 or flat else WAIT_FOR_COMPLETION
    cands = [(0.0, _paoi(0.0, T, C)), (WAIT_FOR_COMPLETION, _paoi(WAIT_FOR_COMPLETION, T, C))]
    return OptimizationResult(
        threshold=theta,
        paoi=_paoi(theta, T, C),
        method="exp-computation rule",
        flat=flat,
        residuals=[1.0 - 2.0 * lap],
        candidates=cands,
    )


def pz_second_derivative(theta: float, lam: float, C: DistributionSpec) -> float:
    """``lam (1 - F_C(theta)) - f_C(theta)``; equals ``P''`` at stationary points
    when ``T`` is exponential with rate ``lam``."""
    return lam * (1.0 - C.cdf(theta)) - C.pdf(theta)


def threshold_grid(C: DistributionSpec, n: int = numerics.DEFAULT_GRID) -> np.ndarray:
    """Search nodes for theta placed on the quantiles of ``C``."""
    if isinstance(C, Deterministic):
        # P(theta) is constant once theta >= C
        return np.linspace(0.0, C.value, n)
    ps = np.linspace(1e-4, 1.0 - 1e-4, n)
    q = np.array([C.quantile(p) for p in ps])
    return np.unique(np.concatenate(([0.0], q)))


def optimize_threshold_exp_T(lam: float, C: DistributionSpec,
                             grid: int = numerics.DEFAULT_GRID,
                             tol: float = numerics.DEFAULT_BISECT_TOL) -> OptimizationResult:
    """Piecewise bisection for exponential transmission times.

    The zeros of ``pz_second_derivative`` split ``(0, inf)``; on each piece
    where it is positive the slope can vanish at most once, and such a zero is
    a local minimum. Candidates are compared with both boundaries.
    """
    T = Exponential(lam)
    nodes = threshold_grid(C, grid)
    pz = lambda th: pz_second_derivative(th, lam, C)
    cuts = []
    if isinstance(C, Deterministic):
        # density is a point mass at C.value: P''_z > 0 below, 0 above
        cuts.append(C.value)
    else:
        for br in numerics.find_sign_changes(pz, 0.0, 0.0, nodes=nodes):
            cuts.append(numerics.bisect(pz, br, tol))
    edges = [0.0, *cuts, math.inf]
    resid = lambda th: stationarity_residual(th, T, C)

    interior = []
    residuals = []
    last_node = float(nodes[-1])
    for lo, hi in zip(edges[:-1], edges[1:]):
        probe = 0.5 * (lo + hi) if math.isfinite(hi) else max(lo, last_node) + 1.0
        if isinstance(C, Deterministic) and math.isinf(hi):
            continue
        if not pz(probe) > 0:
            continue
        # the slope can only cross zero upwards on this piece
        r_lo = resid(lo)
        if r_lo >= 0:
            continue
        if math.isfinite(hi):
            # a point-mass C jumps at hi; look just inside the piece
            right = math.nextafter(hi, 0.0) if isinstance(C, Deterministic) else hi
            r_hi = resid(right)
        else:
            right = max(lo, last_node) + 1.0
            r_hi = resid(right)
            cap = C.quantile(1.0 - 1e-12) if not isinstance(C, Deterministic) else right
            while r_hi < 0 and right < cap:
                right *= 2.0
                r_hi = resid(right)
        if r_hi <= 0:
            continue
        th = numerics.bisect(resid, (lo, right), tol)
        residuals.append(resid(th))
        if isinstance(C, Deterministic) or second_order_ok(th, T, C):
            interior.append(th)

    cands = [(0.0, _paoi(0.0, T, C))]
    cands += [(th, _paoi(th, T, C)) for th in interior]
    cands.append((WAIT_FOR_COMPLETION, _paoi(WAIT_FOR_COMPLETION, T, C)))
    theta = _pick(cands)
    paoi = dict(cands)[theta]
    flat = len(cands) == 2 and abs(cands[0][1] - cands[1][1]) <= TIE_RTOL * abs(paoi)
    return OptimizationResult(
        threshold=theta,
        paoi=paoi,
        method="piecewise bisection",
        flat=flat,
        residuals=residuals,
        candidates=cands,
    )


def optimize_threshold_general(T: DistributionSpec, C: DistributionSpec,
                               grid: int = 257, tol: float = 1e-9) -> OptimizationResult:
    """Grid search over quantile-placed thresholds plus golden-section polish.

    Works for any pair of distributions; the boundaries 0 and
    wait-for-completion are always among the candidates.
    """
    nodes = threshold_grid(C, grid)
    vals = np.array([_paoi(th, T, C) for th in nodes])
    cands = [(float(th), float(v)) for th, v in zip(nodes, vals)]
    i = int(np.argmin(vals))
    if 0 < i < len(nodes) - 1:
        th, v = numerics.golden_section(lambda t: _paoi(t, T, C), nodes[i - 1], nodes[i + 1], tol)
        cands.append((th, v))
    cands.append((WAIT_FOR_COMPLETION, _paoi(WAIT_FOR_COMPLETION, T, C)))
    theta = _pick(cands)
    paoi = min(p for th, p in cands if th == theta)
    return OptimizationResult(
        threshold=theta,
        paoi=paoi,
        method="grid + golden section",
        iterations=len(nodes),
        candidates=[cands[0], *(c for c in cands[-2:])],
    )


def optimize(T: DistributionSpec, C: DistributionSpec) -> OptimizationResult:
    """Pick the strongest available optimizer for the pair ``(T, C)``."""
    if isinstance(C, Exponential):
        return optimal_threshold_exp_C(T, C.rate)
    if isinstance(T, Exponential):
        return optimize_threshold_exp_T(T.rate, C)
    return optimize_threshold_general(T, C)
