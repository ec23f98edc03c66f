"""Independent reference computations used to freeze expected values."""

import itertools
from fractions import Fraction

import mpmath


def enumerate_correctness(load, desired, delta, n):
    """Sum the weight of every one of the 2^n node outcomes landing strictly in the band.

    ``load``, ``desired`` and ``delta`` are Fractions so the band test is exact.
    """
    p = (load - desired) / desired
    pf = float(p)
    lower, upper = desired - delta, desired + delta
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=n):
        m = sum(outcome)
        new_load = Fraction(n) * load / (n + m)
        if lower < new_load < upper:
            total += pf ** m * (1.0 - pf) ** (n - m)
    return total


def kl_mp(x, y):
    x, y = mpmath.mpf(x), mpmath.mpf(y)
    a = 0 if x == 0 else x * mpmath.log(x / y)
    b = 0 if x == 1 else (1 - x) * mpmath.log((1 - x) / (1 - y))
    return a + b


def b1_mp(p, e, n):
    p, e = mpmath.mpf(p), mpmath.mpf(e)
    return 1 - mpmath.exp(-n * kl_mp((p - e) / (1 + e), p)) - mpmath.exp(
        -n * kl_mp((p + e) / (1 - e), p)
    )


def b2_mp(p, e, n):
    p, e = mpmath.mpf(p), mpmath.mpf(e)
    return 1 - mpmath.exp(-n * kl_mp((p - e) / (1 + e), p))


def exact_mp(p, e, n, dps=60):
    """Band probability summed term by term at ``dps`` digits."""
    with mpmath.workdps(dps):
        lo = mpmath.mpf(n) * (mpmath.mpf(p) - e) / (1 + mpmath.mpf(e))
        hi = mpmath.mpf(n) * (mpmath.mpf(p) + e) / (1 - mpmath.mpf(e))
        P = mpmath.mpf(p)
        total = mpmath.mpf(0)
        for m in range(n + 1):
            if lo < m < hi:
                total += mpmath.binomial(n, m) * P ** m * (1 - P) ** (n - m)
        return total
