"""One-dimensional search primitives used by the tuning algorithms.

``bisect_root`` and ``unimodal_max`` work on scalar callables.
``grid_max_root`` evaluates its function on numpy arrays: every sweep point
is bisected at once, which keeps sweeps with 10^5 points fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from depas.errors import InfeasibleError, UsageError

FOUND = "found"
NO_ROOT_BELOW = "no_root_below"
NO_ROOT_ABOVE = "no_root_above"

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchPrecision:
    """Sweep step ``s1`` for the outer variable, tolerance ``s2`` for the inner search."""

    s1: float
    s2: float

    def __post_init__(self):
        if not (self.s1 > 0 and self.s2 > 0):
            raise UsageError(f"precisions must be positive, got s1={self.s1}, s2={self.s2}")


@dataclass(frozen=True)
class BracketedRoot:
    value: float
    lo: float
    hi: float
    status: str
    iterations: int = 0

    @property
    def bracket_width(self) -> float:
        return self.hi - self.lo


def _check_bracket(lo, hi, tol):
    if not tol > 0:
        raise UsageError(f"tolerance must be positive, got {tol}")
    if not lo < hi:
        raise UsageError(f"empty bracket [{lo}, {hi}]")


def bisect_root(f: Callable[[float], float], lo: float, hi: float, tol: float) -> BracketedRoot:
    """Root of a monotone ``f`` on ``[lo, hi]`` to within ``tol``.

    When ``f`` does not change sign the status tells which side the root
    would be on, read for increasing ``f``: ``no_root_below`` means
    ``f >= 0`` on the whole bracket, ``no_root_above`` means ``f < 0``.
    """
    _check_bracket(lo, hi, tol)
    f_lo, f_hi = f(lo), f(hi)
    if f_lo >= 0 and f_hi >= 0:
        return BracketedRoot(lo, lo, lo, NO_ROOT_BELOW)
    if f_lo < 0 and f_hi < 0:
        return BracketedRoot(hi, hi, hi, NO_ROOT_ABOVE)
    increasing = f_hi >= 0
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (f(mid) >= 0) == increasing:
            hi = mid
        else:
            lo = mid
        it += 1
    return BracketedRoot(0.5 * (lo + hi), lo, hi, FOUND, it)


def bisect_roots(f, lo, hi, tol: float) -> np.ndarray:
    """Vectorised bisection for ``f`` increasing in its argument.

    Returns, element by element, the top of the final bracket, so that
    ``f(result) >= 0`` whenever the bracket straddled the root.  Elements
    where ``f(lo) >= 0`` return ``lo``; elements with ``f(hi) < 0`` return
    ``nan``.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo, hi = lo.copy(), hi.copy()
    below = f(lo) >= 0
    above = f(hi) < 0
    active = ~(below | above)
    while True:
        width = np.where(active, hi - lo, 0.0)
        if not np.any(width > tol):
            break
        mid = 0.5 * (lo + hi)
        ok = f(mid) >= 0
        step = active & (width > tol)
        hi = np.where(step & ok, mid, hi)
        lo = np.where(step & ~ok, mid, lo)
    out = np.where(below, lo, hi)
    return np.where(above, np.nan, out)


def sweep_points(lo: float, hi: float, step: float) -> np.ndarray:
    """``lo, lo + step, ...`` up to and including ``hi``.

    The last point is clamped to ``hi`` when the range is not a multiple of
    ``step``.  Points are computed as ``lo + k * step`` rather than by
    accumulation.
    """
    if not step > 0:
        raise UsageError(f"step must be positive, got {step}")
    if hi < lo:
        raise UsageError(f"empty sweep [{lo}, {hi}]")
    count = int(math.floor((hi - lo) / step * (1.0 + 1e-12)))
    pts = lo + step * np.arange(count + 1)
    pts = pts[pts < hi - 1e-12 * max(1.0, abs(hi))]
    return np.append(pts, hi)


Bound = Union[float, Callable[[np.ndarray], np.ndarray]]


def _resolve(bound: Bound, xs: np.ndarray) -> np.ndarray:
    if callable(bound):
        return np.broadcast_to(np.asarray(bound(xs), dtype=float), xs.shape)
    return np.full(xs.shape, float(bound))


def grid_max_root(f, x_lo: float, x_hi: float, y_lo: Bound, y_hi: Bound,
                  prec: SearchPrecision) -> float:
    """Smallest ``y`` with ``f(x, y) >= 0`` at every swept ``x``.

    ``f(xs, ys)`` takes arrays and must be increasing in ``y``.  The sweep
    covers ``[x_lo, x_hi]`` with step ``prec.s1``; each root is bisected to
    ``prec.s2`` and rounded up to its bracket top.  ``y_lo``/``y_hi`` may be
    callables giving per-``x`` limits.  A sweep point already satisfied at
    ``y_lo`` contributes ``y_lo``.
    """
    xs = sweep_points(x_lo, x_hi, prec.s1)
    lo = _resolve(y_lo, xs)
    hi = _resolve(y_hi, xs)
    roots = bisect_roots(lambda ys: f(xs, ys), lo, hi, prec.s2)
    bad = np.isnan(roots)
    if np.any(bad):
        x_bad = float(xs[np.argmax(bad)])
        raise InfeasibleError(
            f"no y in range satisfies the constraint at x={x_bad}", detail=x_bad
        )
    return float(np.max(roots))


def unimodal_max(f: Callable[[float], float], lo: float, hi: float,
                 tol: float) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal ``f``.

    The interval is treated as open: the search runs on
    ``[lo + tol, hi - tol]``.
    """
    _check_bracket(lo, hi, tol)
    a, b = lo + tol, hi - tol
    if b <= a:
        x = 0.5 * (lo + hi)
        return x, f(x)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    best = max(((fc, c), (fd, d), (f(a), a), (f(b), b)))
    return best[1], best[0]
