"""Quadrature and one-dimensional root/minimum search helpers."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate as _spi

DEFAULT_REL_TOL = 1e-8
DEFAULT_BISECT_TOL = 1e-10
DEFAULT_GRID = 4096
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message, estimate=math.nan, error=math.inf):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class BadBracketError(ValueError):
    pass


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    sign_lo: int
    sign_hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BadBracketError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.sign_lo not in (-1, 1) or self.sign_hi not in (-1, 1):
            raise BadBracketError("bracket signs must be -1 or +1")
        if self.sign_lo == self.sign_hi:
            raise BadBracketError("bracket endpoints carry the same sign")


def _quad_piece(f, a, b, rel_tol, abs_tol, limit):
    if a == b:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err, info, *rest = _spi.quad(
            f, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=limit, full_output=1
        )
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite integral on [{a}, {b}]", val, err)
    if rest and err > 10.0 * max(rel_tol * abs(val), abs_tol):
        # QUADPACK flags roundoff on tails that are already ~0; only fail when
        # the error bound itself is unacceptable.
        raise QuadratureError(f"quadrature failed on [{a}, {b}]: {rest[0]}", val, err)
    return val, err


def integrate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = DEFAULT_REL_TOL,
    points: Iterable[float] = (),
    abs_tol: float = 1e-14,
    limit: int = 200,
) -> float:
    """Integrate ``f`` over ``[lo, hi)``; ``hi`` may be ``math.inf``.

    ``points`` are interior breakpoints (support edges, kinks). The range is
    split at every one of them so no panel straddles a jump.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    if hi < lo:
        return -integrate(f, hi, lo, rel_tol, points, abs_tol, limit)
    cuts = sorted({float(p) for p in points if lo < p < hi})
    edges = [lo, *cuts]
    if math.isinf(hi):
        # one finite tail start keeps QUADPACK's (0,1] map well conditioned
        if not cuts:
            edges.append(lo + 1.0)
        edges.append(hi)
    else:
        edges.append(hi)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += _quad_piece(f, a, b, rel_tol, abs_tol, limit)[0]
    return total


def bisect(
    f: Callable[[float], float],
    bracket: Bracket | Sequence[float],
    tol: float = DEFAULT_BISECT_TOL,
    max_iter: int = 400,
) -> float:
    """Root of ``f`` inside ``bracket`` to within ``tol`` in the argument."""
    if isinstance(bracket, Bracket):
        lo, hi = bracket.lo, bracket.hi
    else:
        lo, hi = map(float, bracket)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BadBracketError(f"f has the same sign at {lo} and {hi}")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_sign_changes(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    grid: int = DEFAULT_GRID,
    nodes: Sequence[float] | None = None,
) -> list[Bracket]:
    """Brackets around every sign change of ``f`` on a grid.

    An exact zero at a node takes the sign of the node to its left, so a
    root sitting on a node ends up bracketed by ``[root, next node]``.
    """
    if nodes is None:
        if grid < 2:
            raise ValueError("grid must be >= 2")
        xs = np.linspace(lo, hi, grid)
    else:
        xs = np.asarray(nodes, dtype=float)
        if xs.size < 2:
            raise ValueError("need at least two nodes")
    vals = np.array([f(x) for x in xs], dtype=float)
    signs = np.sign(vals)
    # zeros inherit from the left; a leading zero inherits from the first nonzero
    nz = np.flatnonzero(signs)
    if nz.size == 0:
        return []
    signs[: nz[0]] = signs[nz[0]]
    for i in range(1, signs.size):
        if signs[i] == 0:
            signs[i] = signs[i - 1]
    out = []
    for i in np.flatnonzero(signs[:-1] != signs[1:]):
        out.append(Bracket(float(xs[i]), float(xs[i + 1]), int(signs[i]), int(signs[i + 1])))
    return out


def golden_section(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    Endpoints are evaluated too so a monotone ``f`` returns its boundary.
    """
    a, b = float(lo), float(hi)
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    best = min([(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)], key=lambda t: (t[0], t[1]))
    return best[1], best[0]
