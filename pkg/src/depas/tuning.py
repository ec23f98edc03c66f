"""Minimum node count and minimum band width for a target correctness probability.

Two families of algorithms:

* Chernoff: bound-based searches that are fast and conservative.  They
  follow the case analysis of the Chernoff-Hoeffding lower bounds B1/B2.
* Binomial: downward sweeps on the exact probability.  Each starts at the
  Chernoff result and stops at the first infeasible candidate.

Every probe of the load works in rescaled coordinates: the grid
``p = eps + k * s_p`` is the load grid ``L0 + delta + k * s_p * L0``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from depas import probability as prob
from depas.errors import DomainError, InfeasibleError
from depas.numerics import (
    FOUND,
    SearchPrecision,
    bisect_root,
    grid_max_root,
    sweep_points,
    unimodal_max,
)

CHERNOFF = "chernoff"
BINOMIAL = "binomial"

# Inset used when a root search needs to evaluate next to an open endpoint.
_OPEN = 1e-12


@dataclass(frozen=True)
class TuningRequest:
    """Inputs of one tuning run.

    Exactly one of ``delta0`` (Min-n mode) and ``n0`` (Min-delta mode) is
    set.
    """

    desired_load: float = 0.8
    p0: float = 0.99
    delta0: Optional[float] = None
    n0: Optional[int] = None
    s_n: float = 0.1
    s_eps: float = 1e-3
    s_p: float = 1e-3
    method: str = CHERNOFF

    def __post_init__(self):
        if not 0.0 < self.desired_load < 1.0:
            raise DomainError(f"L0 must lie in (0, 1), got {self.desired_load}")
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"P0 must lie in (0, 1), got {self.p0}")
        if (self.delta0 is None) == (self.n0 is None):
            raise DomainError("set exactly one of delta0 and n0")
        if self.delta0 is not None and not 0.0 < self.delta0 < self.desired_load:
            raise DomainError(f"delta0 must lie in (0, L0={self.desired_load}), got {self.delta0}")
        if self.n0 is not None and (int(self.n0) != self.n0 or self.n0 < 1):
            raise DomainError(f"n0 must be a positive integer, got {self.n0}")
        for name in ("s_n", "s_eps", "s_p"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.method not in (CHERNOFF, BINOMIAL):
            raise DomainError(f"unknown method {self.method!r}")

    @property
    def mode(self) -> str:
        return "min_n" if self.delta0 is not None else "min_delta"

    @property
    def eps0(self) -> float:
        return self.delta0 / self.desired_load


@dataclass
class ChernoffDiagnostics:
    # Min-n
    chebyshev_n: Optional[int] = None
    n1_star: Optional[float] = None
    n2_star: Optional[float] = None
    # Min-delta
    g_n0: Optional[float] = None
    p1_star: Optional[float] = None
    p2_star: Optional[float] = None
    p3_star: Optional[float] = None
    eps1_star: Optional[float] = None
    eps2_star: Optional[float] = None
    eps3_star: Optional[float] = None
    eps_star: Optional[float] = None


@dataclass
class BinomialDiagnostics:
    upper_bound: Union[int, float]
    first_infeasible: Optional[Union[int, float]]
    candidates_checked: int
    worst_probability: Optional[float] = None


@dataclass
class TuningResult:
    request: TuningRequest
    value: Union[int, float]
    diagnostics: Union[ChernoffDiagnostics, BinomialDiagnostics]
    wall_time: float = 0.0
    upper_bound_result: Optional["TuningResult"] = field(default=None, repr=False)

    @property
    def display(self) -> str:
        """``n*`` as an integer, ``delta*`` at three decimals."""
        if self.request.mode == "min_n":
            return str(int(self.value))
        return f"{self.value:.3f}"


def _grid_up(x: float, step: float) -> int:
    """Index of the first multiple of ``step`` at or above ``x``."""
    k = x / step
    r = round(k)
    if abs(k - r) <= 1e-9 * max(1.0, abs(k)):
        return int(r)
    return math.ceil(k)


# ---------------------------------------------------------------------------
# Chernoff Min-n


def _bounded_sup_n2(eps0, p0, lo, hi, tol):
    _, value = unimodal_max(lambda p: float(prob._n2(p, eps0, p0)), lo, hi, tol)
    return value


def chernoff_min_n(req: TuningRequest) -> TuningResult:
    if req.delta0 is None:
        raise DomainError("chernoff_min_n needs delta0")
    start = time.perf_counter()
    eps0, p0 = req.eps0, req.p0
    cheb = prob.chebyshev_min_n(eps0, p0)
    diag = ChernoffDiagnostics(chebyshev_n=cheb)
    if eps0 < 1.0 / 3.0:
        try:
            n1 = grid_max_root(
                lambda p, n: prob._b1(p, eps0, n) - p0,
                eps0, 1.0 - 2.0 * eps0, 1.0, float(cheb),
                SearchPrecision(req.s_p, req.s_n),
            )
        except InfeasibleError as exc:
            # The Chebyshev count always dominates; reaching this is a bug.
            raise AssertionError(f"Chebyshev bracket N={cheb} too small: {exc}") from exc
        n2 = _bounded_sup_n2(eps0, p0, 1.0 - 2.0 * eps0, 1.0, req.s_p)
        diag.n1_star, diag.n2_star = n1, n2
        value = prob._ceil(max(n1, n2))
    else:
        # sup over the half-open [eps0, 1): include the closed end explicitly
        n2 = max(
            _bounded_sup_n2(eps0, p0, eps0, 1.0, req.s_p),
            float(prob._n2(eps0, eps0, p0)),
        )
        diag.n2_star = n2
        value = prob._ceil(n2)
    return TuningResult(req, int(value), diag, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Chernoff Min-delta


def _threshold_root(h, lo, hi, target, tol, keep):
    """Bracket end of ``h(p) = target`` on the side named by ``keep``."""
    r = bisect_root(lambda p: float(h(p)) - target, lo, hi, tol)
    if r.status != FOUND:
        raise InfeasibleError(f"threshold function never crosses P0={target} on ({lo}, {hi})")
    return r.hi if keep == "hi" else r.lo


def chernoff_min_delta(req: TuningRequest) -> TuningResult:
    if req.n0 is None:
        raise DomainError("chernoff_min_delta needs n0")
    start = time.perf_counter()
    n0, p0 = int(req.n0), req.p0
    g = prob.feasibility_g(n0)
    if g <= p0:
        raise InfeasibleError(
            f"no solution for n0={n0}, P0={p0}: g(n0)={g:.6g} <= P0", detail=g
        )
    third = 1.0 / 3.0
    prec = SearchPrecision(req.s_p, req.s_eps)

    # Branch 1, p in (p1*, 1/3]: B1 root in eps on (0, p].
    # The kept end of each threshold root sits on the side where the
    # threshold still exceeds P0, so every sweep point has a root.
    p1 = _threshold_root(lambda p: prob._h1(p, n0), _OPEN, third - _OPEN, p0, req.s_p, "hi")
    eps1 = grid_max_root(
        lambda p, e: prob._b1(p, e, n0) - p0, p1, third, 0.0, lambda p: p, prec
    )
    eps1 = max(eps1, p1)

    # Branch 2, p in (1/3, p2*]: B1 root in eps on (0, (1 - p) / 2].
    p2 = _threshold_root(lambda p: prob._h2(p, n0), third + _OPEN, 1.0 - _OPEN, p0, req.s_p, "lo")
    if p2 > third + req.s_p:
        eps2 = grid_max_root(
            lambda p, e: prob._b1(p, e, n0) - p0,
            third + req.s_p, p2, 0.0, lambda p: (1.0 - p) / 2.0, prec,
        )
    else:
        eps2 = 0.0
    eps2 = max(eps2, (1.0 - p2) / 2.0)

    # Branch 3, p in [p3*, 1): B2 root in eps on [(1 - p) / 2, p).
    p3 = _threshold_root(lambda p: prob._h3(p, n0), third + _OPEN, 1.0 - _OPEN, p0, req.s_p, "lo")
    eps3 = grid_max_root(
        lambda p, e: prob._b2(p, e, n0) - p0,
        p3, 1.0 - req.s_p, lambda p: (1.0 - p) / 2.0, lambda p: p, prec,
    )
    eps3 = max(eps3, (1.0 - p3) / 2.0)

    eps_star = max(eps1, eps2, eps3)
    step = req.s_eps * req.desired_load
    delta = _grid_up(eps_star * req.desired_load, step) * step
    diag = ChernoffDiagnostics(
        g_n0=g, p1_star=p1, p2_star=p2, p3_star=p3,
        eps1_star=eps1, eps2_star=eps2, eps3_star=eps3, eps_star=eps_star,
    )
    if not 0.0 < delta < req.desired_load:
        raise InfeasibleError(f"delta*={delta} outside (0, L0)", detail=delta)
    return TuningResult(req, delta, diag, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Binomial sweeps


def load_grid(eps: float, s_p: float) -> np.ndarray:
    """Rescaled probe loads ``eps, eps + s_p, ...`` strictly below 1."""
    k = np.arange(int(math.ceil((1.0 - eps) / s_p)) + 1)
    ps = eps + k * s_p
    return ps[ps < 1.0 - 1e-12]


def worst_case_probability(eps: float, n: int, s_p: float) -> float:
    """Minimum exact correctness probability over the probe-load grid."""
    return float(np.min(prob.correctness_grid(load_grid(eps, s_p), eps, n)))


def _as_chernoff(req: TuningRequest) -> TuningRequest:
    return TuningRequest(
        req.desired_load, req.p0, req.delta0, req.n0, req.s_n, req.s_eps, req.s_p, CHERNOFF
    )


def binomial_min_n(req: TuningRequest, upper: Optional[TuningResult] = None) -> TuningResult:
    """Sweep ``n`` down from the Chernoff result until a probe load fails.

    Returns one above the first failing ``n``, i.e. the smallest ``n`` from
    which every larger candidate up to the start passed.
    """
    if req.delta0 is None:
        raise DomainError("binomial_min_n needs delta0")
    start = time.perf_counter()
    if upper is None:
        upper = chernoff_min_n(_as_chernoff(req))
    eps0 = req.eps0
    top = int(upper.value)
    failed = None
    worst = None
    checked = 0
    for n in range(top, 0, -1):
        checked += 1
        w = worst_case_probability(eps0, n, req.s_p)
        if w < req.p0:
            failed, worst = n, w
            break
    value = failed + 1 if failed is not None else 1
    diag = BinomialDiagnostics(top, failed, checked, worst)
    return TuningResult(req, value, diag, time.perf_counter() - start, upper)


def binomial_min_delta(req: TuningRequest, upper: Optional[TuningResult] = None) -> TuningResult:
    """Sweep ``delta`` down from the Chernoff result in steps of ``s_eps * L0``."""
    if req.n0 is None:
        raise DomainError("binomial_min_delta needs n0")
    start = time.perf_counter()
    if upper is None:
        upper = chernoff_min_delta(_as_chernoff(req))
    step = req.s_eps * req.desired_load
    k_top = _grid_up(upper.value, step)
    n0 = int(req.n0)
    failed_k = None
    worst = None
    checked = 0
    for k in range(k_top, 0, -1):
        checked += 1
        eps = k * step / req.desired_load
        w = worst_case_probability(eps, n0, req.s_p)
        if w < req.p0:
            failed_k, worst = k, w
            break
    k_star = failed_k + 1 if failed_k is not None else 1
    diag = BinomialDiagnostics(
        k_top * step, None if failed_k is None else failed_k * step, checked, worst
    )
    return TuningResult(req, k_star * step, diag, time.perf_counter() - start, upper)


def tune(req: TuningRequest) -> TuningResult:
    if req.mode == "min_n":
        return chernoff_min_n(req) if req.method == CHERNOFF else binomial_min_n(req)
    return chernoff_min_delta(req) if req.method == CHERNOFF else binomial_min_delta(req)


def sweep_values(lo: float, hi: float, step: float) -> list:
    """Inclusive arithmetic grid used by the parameter sweeps."""
    return [float(x) for x in sweep_points(lo, hi, step)]
