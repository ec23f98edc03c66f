"""Closed-form pieces of the DEPAS correctness analysis.

Everything here is a pure function.  Public functions validate their
arguments and raise :class:`~depas.errors.DomainError`; the underscored
array variants skip validation and are what the tuning searches call in
their inner loops.

Loads are fractions of one node's capacity.  Most of the analysis is
carried out in rescaled coordinates ``p = (L - L0) / L0`` and
``eps = delta / L0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import bdtr, bdtrc, gammaln, xlog1py, xlogy

from depas.errors import DomainError

# Relative slack used when deciding whether a float sits on a boundary
# (an integral optimal node count, a band edge).
BOUNDARY_TOL = 1e-9

# Slack for domain checks on the Chernoff-Hoeffding bounds, so that the
# closed domain edges survive float round-off.
_EDGE = 1e-12

# Largest (rows x columns) block materialised by the grid evaluator.
_BLOCK = 2_000_000


@dataclass(frozen=True)
class ScalingPolicy:
    """Desired load ``L0`` and half-width ``delta`` of the variation band."""

    desired_load: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.desired_load < 1.0:
            raise DomainError(f"desired load must lie in (0, 1), got {self.desired_load}")
        if not 0.0 < self.delta < self.desired_load:
            raise DomainError(
                f"delta must lie in (0, L0={self.desired_load}), got {self.delta}"
            )

    @property
    def lower(self) -> float:
        return self.desired_load - self.delta

    @property
    def upper(self) -> float:
        return self.desired_load + self.delta

    @property
    def eps(self) -> float:
        return self.delta / self.desired_load

    def rescale(self, load: float) -> "RescaledPoint":
        return RescaledPoint((load - self.desired_load) / self.desired_load, self.eps)


@dataclass(frozen=True)
class RescaledPoint:
    p: float
    eps: float


@dataclass(frozen=True)
class CorrectnessEvaluation:
    """Exact probability next to the Chernoff-Hoeffding bound that applies.

    ``which_bound`` is ``"B1"``, ``"B2"`` or ``"none"``; ``note`` explains
    why a field is absent.
    """

    exact: Optional[float]
    chernoff_lower: Optional[float]
    which_bound: str
    note: str = ""


def _ceil(x: float) -> int:
    """Ceiling that ignores float noise just above an integer."""
    r = round(x)
    if abs(x - r) <= BOUNDARY_TOL * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


# ---------------------------------------------------------------------------
# Kullback-Leibler divergence


def _kl(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return xlogy(x, x) - xlogy(x, y) + xlogy(1.0 - x, 1.0 - x) - xlog1py(1.0 - x, -y)


def kl_divergence(x: float, y: float) -> float:
    """Divergence ``D[x, y]`` between Bernoulli(x) and Bernoulli(y).

    Uses ``0 ln 0 = 0`` on both terms, so ``x`` may be 0 or 1.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if not 0.0 < y < 1.0:
        raise DomainError(f"y must lie in (0, 1), got {y}")
    if x == y:
        return 0.0
    return max(float(_kl(x, y)), 0.0)


# ---------------------------------------------------------------------------
# Decision-rule quantities


def probability_indicator(load: float, desired_load: float) -> float:
    if desired_load <= 0.0:
        raise DomainError(f"desired load must be positive, got {desired_load}")
    if load < 0.0:
        raise DomainError(f"load must be nonnegative, got {load}")
    return abs(load - desired_load) / desired_load


def scaling_probability(load: float, desired_load: float) -> float:
    """Per-node addition probability; only defined on ``[L0, 2 L0)``.

    Loads at or above ``2 L0`` carry a deterministic part that callers must
    strip first.
    """
    if not 0.0 < desired_load < 1.0:
        raise DomainError(f"desired load must lie in (0, 1), got {desired_load}")
    if not desired_load <= load < 2.0 * desired_load:
        raise DomainError(f"load {load} outside [L0, 2 L0) for L0={desired_load}")
    return (load - desired_load) / desired_load


def optimal_added_nodes(n: int, load: float, desired_load: float) -> float:
    """Fractional node count that would bring the average load to ``desired_load``."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    if not 0.0 < desired_load < 1.0:
        raise DomainError(f"desired load must lie in (0, 1), got {desired_load}")
    if load < desired_load:
        raise DomainError(f"load {load} below desired load {desired_load}")
    return n * (load - desired_load) / desired_load


def band_position(load: float, policy: ScalingPolicy) -> int:
    """-1 at or below the band, +1 at or above it, 0 strictly inside."""
    tol = BOUNDARY_TOL * policy.desired_load
    if load <= policy.lower + tol:
        return -1
    if load >= policy.upper - tol:
        return 1
    return 0


# ---------------------------------------------------------------------------
# Exact correctness probability


def _strict_index_range(p, eps, n):
    """Integers strictly between the two optimal node counts.

    Returns inclusive ``(first, last)`` arrays clipped to ``[0, n]``; an
    optimal count that is an integer up to float noise is itself excluded.
    """
    p = np.asarray(p, dtype=float)
    m_low = n * (p - eps) / (1.0 + eps)
    m_high = n * (p + eps) / (1.0 - eps)
    tol_low = BOUNDARY_TOL * np.maximum(1.0, np.abs(m_low))
    tol_high = BOUNDARY_TOL * np.maximum(1.0, np.abs(m_high))
    first = np.floor(m_low + tol_low) + 1.0
    last = np.ceil(m_high - tol_high) - 1.0
    return np.maximum(first, 0.0), np.minimum(last, float(n))


def _log_binom(n, i):
    return gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)


def correctness_grid(ps, eps: float, n: int) -> np.ndarray:
    """Exact correctness probability for every rescaled load in ``ps``.

    Each binomial term is formed in log space and the admissible terms of a
    row are added smallest first.  Where that sum exceeds one half it is
    replaced by one minus the two binomial tails, which keeps the result
    accurate to the last few ulps when the band holds nearly all the mass.
    """
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    out = np.empty(ps.shape[0])
    i = np.arange(n + 1, dtype=float)
    log_c = _log_binom(float(n), i)
    rows = max(1, _BLOCK // (n + 1))
    for start in range(0, ps.shape[0], rows):
        p = ps[start:start + rows, None]
        first, last = _strict_index_range(p, eps, n)
        log_terms = log_c + xlogy(i, p) + xlog1py(n - i, -p)
        terms = np.where((i >= first) & (i <= last), np.exp(log_terms), 0.0)
        terms.sort(axis=1)
        direct = terms.sum(axis=1)
        f, l, q = first[:, 0], last[:, 0], p[:, 0]
        below = np.where(f > 0, bdtr(np.maximum(f - 1.0, 0.0), n, q), 0.0)
        above = np.where(l < n, bdtrc(np.minimum(l, n - 1.0), n, q), 0.0)
        out[start:start + rows] = np.where(
            (direct > 0.5) & (f <= l), 1.0 - (below + above), direct
        )
    return np.clip(out, 0.0, 1.0)


def correctness_probability(p: float, eps: float, n: int) -> float:
    """Exact correctness probability in rescaled coordinates."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if not 0.0 <= p < 1.0:
        raise DomainError(f"p must lie in [0, 1), got {p}")
    return float(correctness_grid([p], eps, int(n))[0])


def binomial_correctness(load: float, policy: ScalingPolicy, n: int) -> float:
    """Probability that one cycle moves the average load strictly into the band.

    ``load`` must be in the addition regime ``[L0 + delta, 2 L0)``.
    """
    tol = BOUNDARY_TOL * policy.desired_load
    if not policy.upper - tol <= load < 2.0 * policy.desired_load:
        raise DomainError(
            f"load {load} outside [L0+delta, 2 L0) = [{policy.upper}, {2 * policy.desired_load})"
        )
    pt = policy.rescale(load)
    return correctness_probability(max(pt.p, 0.0), pt.eps, n)


# ---------------------------------------------------------------------------
# Chernoff-Hoeffding lower bounds


def _lower_tail(p, eps, n):
    x = np.maximum((p - eps) / (1.0 + eps), 0.0)
    return np.exp(-n * _kl(x, p))


def _upper_tail(p, eps, n):
    x = np.minimum((p + eps) / (1.0 - eps), 1.0)
    return np.exp(-n * _kl(x, p))


def _b1(p, eps, n):
    return 1.0 - _lower_tail(p, eps, n) - _upper_tail(p, eps, n)


def _b2(p, eps, n):
    return 1.0 - _lower_tail(p, eps, n)


def in_b1_domain(p: float, eps: float) -> bool:
    return 0.0 < eps < 1.0 / 3.0 + _EDGE and eps - _EDGE <= p <= 1.0 - 2.0 * eps + _EDGE


def in_b2_domain(p: float, eps: float) -> bool:
    return 0.0 < eps < 1.0 and max(eps, 1.0 - 2.0 * eps) - _EDGE <= p < 1.0


def _check_n(n):
    if not n > 0:
        raise DomainError(f"n must be positive, got {n}")


def bound_b1(pt: RescaledPoint, n: float) -> float:
    """Two-sided lower bound, valid for ``eps < 1/3`` and ``eps <= p <= 1 - 2 eps``.

    ``n`` may be real; the tuning searches bisect over it.
    """
    _check_n(n)
    if not in_b1_domain(pt.p, pt.eps):
        raise DomainError(f"(p={pt.p}, eps={pt.eps}) outside the B1 domain")
    return float(_b1(pt.p, pt.eps, n))


def bound_b2(pt: RescaledPoint, n: float) -> float:
    """One-sided lower bound, valid for ``p >= max(eps, 1 - 2 eps)``."""
    _check_n(n)
    if not in_b2_domain(pt.p, pt.eps):
        raise DomainError(f"(p={pt.p}, eps={pt.eps}) outside the B2 domain")
    return float(_b2(pt.p, pt.eps, n))


def evaluate_correctness(pt: RescaledPoint, n: int) -> CorrectnessEvaluation:
    """Exact probability and the tightest applicable bound at one point.

    B2 is preferred where both bounds are defined, since it never falls
    below B1.
    """
    notes = []
    exact = None
    if pt.eps <= pt.p < 1.0 and 0.0 < pt.eps < 1.0:
        exact = correctness_probability(pt.p, pt.eps, n)
    else:
        notes.append("exact: p outside the addition regime [eps, 1)")
    if in_b2_domain(pt.p, pt.eps):
        bound, which = float(_b2(pt.p, pt.eps, n)), "B2"
    elif in_b1_domain(pt.p, pt.eps):
        bound, which = float(_b1(pt.p, pt.eps, n)), "B1"
    else:
        bound, which = None, "none"
        notes.append(f"bound: (p={pt.p:g}, eps={pt.eps:g}) outside both B1 and B2 domains")
    return CorrectnessEvaluation(exact, bound, which, "; ".join(notes))


# ---------------------------------------------------------------------------
# Threshold functions for the Min-delta analysis


def _h1(p, n0):
    p = np.asarray(p, dtype=float)
    return 1.0 - (1.0 - p) ** n0 - np.exp(-n0 * _kl(np.minimum(2.0 * p / (1.0 - p), 1.0), p))


def _h3(p, n0):
    p = np.asarray(p, dtype=float)
    return 1.0 - np.exp(-n0 * _kl((3.0 * p - 1.0) / (3.0 - p), p))


def _h2(p, n0):
    return _h3(p, n0) - np.asarray(p, dtype=float) ** n0


def threshold_h1(p: float, n0: int) -> float:
    """Limit of B1 as eps approaches p, for p in (0, 1/3)."""
    if not 0.0 < p < 1.0 / 3.0:
        raise DomainError(f"p must lie in (0, 1/3), got {p}")
    return float(_h1(p, n0))


def threshold_h2(p: float, n0: int) -> float:
    """Left limit of the combined bound at eps = (1 - p) / 2, for p in (1/3, 1)."""
    if not 1.0 / 3.0 < p < 1.0:
        raise DomainError(f"p must lie in (1/3, 1), got {p}")
    return float(_h2(p, n0))


def threshold_h3(p: float, n0: int) -> float:
    """Right limit of the combined bound at eps = (1 - p) / 2, for p in (1/3, 1)."""
    if not 1.0 / 3.0 < p < 1.0:
        raise DomainError(f"p must lie in (1/3, 1), got {p}")
    return float(_h3(p, n0))


def feasibility_g(n: float) -> float:
    """``1 - (2/3)^n - (1/3)^n``; a Min-delta request needs ``g(n0) > P0``."""
    if not n > 0:
        raise DomainError(f"n must be positive, got {n}")
    if float(n).is_integer():
        k = int(n)
        return (3**k - 2**k - 1) / 3**k
    return 1.0 - (2.0 / 3.0) ** n - (1.0 / 3.0) ** n


# ---------------------------------------------------------------------------
# Node-count estimates


def _n2(p, eps0, p0):
    return -math.log1p(-p0) / _kl((np.asarray(p, dtype=float) - eps0) / (1.0 + eps0), p)


def n2_explicit(p: float, eps0: float, p0: float) -> float:
    """Real node count at which B2 reaches ``p0``."""
    if not 0.0 < p0 < 1.0:
        raise DomainError(f"P0 must lie in (0, 1), got {p0}")
    if not 0.0 < eps0 < 1.0:
        raise DomainError(f"eps0 must lie in (0, 1), got {eps0}")
    if not eps0 < p < 1.0:
        raise DomainError(f"p must lie in (eps0, 1), got p={p}, eps0={eps0}")
    return float(_n2(p, eps0, p0))


def chebyshev_min_n(eps0: float, p0: float) -> int:
    """Node count from the one-sided Chebyshev inequality.

    Looser than the Chernoff-Hoeffding result; the Min-n search uses it as
    the upper end of its bracket.
    """
    if not 0.0 < eps0 < 1.0:
        raise DomainError(f"eps0 must lie in (0, 1), got {eps0}")
    if not 0.0 < p0 < 1.0:
        raise DomainError(f"P0 must lie in (0, 1), got {p0}")
    odds = p0 / (1.0 - p0)
    if eps0 < 1.0 / 3.0:
        e2 = eps0 * eps0
        first = (p0 * (1.0 + e2) + math.sqrt((1.0 - e2) ** 2 + 4.0 * p0 * p0 * e2)) / (
            8.0 * e2 * (1.0 - p0)
        )
        second = odds * (1.0 - 2.0 * eps0) * (1.0 + eps0) ** 2 / (2.0 * eps0 * (1.0 - eps0) ** 2)
        return _ceil(max(first, second))
    return _ceil(odds * (1.0 - eps0) / eps0)
