"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL] criterion N`` line and the
lines are repeated in the terminal summary.
"""

import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from depas import probability as prob
from depas.errors import InfeasibleError
from depas.probability import RescaledPoint, ScalingPolicy
from depas.simulator import estimate_correctness, sample_additions
from depas.tuning import (
    TuningRequest,
    binomial_min_delta,
    binomial_min_n,
    chernoff_min_delta,
    chernoff_min_n,
    sweep_values,
)

from oracles import enumerate_correctness

L0, P0 = 0.8, 0.99


def timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


@pytest.fixture(scope="module")
def goldens():
    """Every golden tuning result, with wall times."""
    out = {}
    for delta0 in (0.05, 0.15):
        req = TuningRequest(L0, P0, delta0=delta0)
        c, tc = timed(chernoff_min_n, req)
        b, tb = timed(binomial_min_n, TuningRequest(L0, P0, delta0=delta0, method="binomial"), c)
        out[("min_n", delta0)] = (c, tc, b, tb + tc)
    for n0 in (100, 1000):
        req = TuningRequest(L0, P0, n0=n0)
        c, tc = timed(chernoff_min_delta, req)
        b, tb = timed(binomial_min_delta, TuningRequest(L0, P0, n0=n0, method="binomial"), c)
        out[("min_delta", n0)] = (c, tc, b, tb + tc)
    return out


def test_criterion_01_min_n_goldens(goldens, record_criterion):
    expected = {0.05: (342, 3, 224, 3), 0.15: (41, 1, 30, 1)}
    ok = True
    parts = []
    for delta0, (ce, ctol, be, btol) in expected.items():
        c, tc, b, tb = goldens[("min_n", delta0)]
        ok &= abs(c.value - ce) <= ctol and abs(b.value - be) <= btol
        ok &= tc < 1.0 and tb < 600.0
        parts.append(f"d={delta0}: chernoff {c.value} in {tc:.3f}s, binomial {b.value} in {tb:.1f}s")
    assert record_criterion(1, "golden Min-n", ok, "; ".join(parts))


def test_criterion_02_min_delta_goldens(goldens, record_criterion):
    expected = {100: (0.094, 0.075), 1000: (0.030, 0.023)}
    ok = True
    parts = []
    for n0, (ce, be) in expected.items():
        c, tc, b, tb = goldens[("min_delta", n0)]
        ok &= abs(c.value - ce) <= 0.002 and abs(b.value - be) <= 0.002
        ok &= tc < 1.0 and tb < 900.0
        parts.append(f"n={n0}: chernoff {c.value:.4f} in {tc:.3f}s, "
                     f"binomial {b.value:.4f} in {tb:.1f}s")
    assert record_criterion(2, "golden Min-delta", ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_03_dominance_chain(record_criterion):
    violations = []
    infeasible = []
    deltas = sweep_values(0.05, 0.15, 0.005)
    for d in deltas:
        c = chernoff_min_n(TuningRequest(L0, P0, delta0=d))
        b = binomial_min_n(TuningRequest(L0, P0, delta0=d, method="binomial"), c)
        cheb = prob.chebyshev_min_n(d / L0, P0)
        if not b.value <= c.value <= cheb:
            violations.append(("delta", d, b.value, c.value, cheb))
    ns = range(25, 1001, 5)
    for n0 in ns:
        try:
            c = chernoff_min_delta(TuningRequest(L0, P0, n0=n0))
        except InfeasibleError:
            infeasible.append(n0)
            continue
        b = binomial_min_delta(TuningRequest(L0, P0, n0=n0, method="binomial"), c)
        if not b.value <= c.value:
            violations.append(("n", n0, b.value, c.value))
    ok = not violations and not infeasible
    detail = (f"{len(deltas)} delta points, {len(ns)} n points, "
              f"{len(violations)} violations, {len(infeasible)} infeasible")
    assert record_criterion(3, "dominance chain", ok, detail), violations[:5]


def test_criterion_04_guarantee_on_verification_grid(goldens, record_criterion):
    step = 8e-4
    checked = 0
    failures = []
    cases = []
    for (mode, key), (c, _, b, _) in goldens.items():
        for r in (c, b):
            if mode == "min_n":
                cases.append((key, int(r.value)))
            else:
                cases.append((r.value, key))
    for delta, n in cases:
        policy = ScalingPolicy(L0, delta)
        k = np.arange(int(math.ceil(L0 / step)) + 1)
        loads = L0 + delta + k * step
        loads = loads[loads < 2 * L0]
        ps = (loads - L0) / L0
        vals = prob.correctness_grid(ps, delta / L0, n)
        checked += len(vals)
        bad = vals < P0
        if bad.any():
            failures.append((delta, n, float(loads[bad][0]), float(vals[bad].min())))
        assert policy.upper == pytest.approx(L0 + delta)
    ok = not failures
    detail = f"{len(cases)} results, {checked} grid loads, {len(failures)} violations"
    assert record_criterion(4, "guarantee on verification grid", ok, detail), failures


def test_criterion_05_bound_soundness(record_criterion):
    rng = np.random.default_rng(20240501)
    start = time.perf_counter()
    triples = 0
    violations = []
    while triples < 600:
        eps = float(rng.uniform(0.005, 0.95))
        p = float(rng.uniform(eps, 1.0))
        n = int(rng.integers(1, 2001))
        pt = RescaledPoint(p, eps)
        if prob.in_b2_domain(p, eps):
            bound = prob.bound_b2(pt, n)
        elif prob.in_b1_domain(p, eps):
            bound = prob.bound_b1(pt, n)
        else:
            continue
        triples += 1
        exact = prob.correctness_probability(p, eps, n)
        if exact < bound:
            violations.append((p, eps, n, exact, bound))
    # B1 where both apply, so the two-sided bound is exercised across its whole domain
    while triples < 1200:
        eps = float(rng.uniform(0.005, 1 / 3))
        p = float(rng.uniform(eps, 1 - 2 * eps))
        n = int(rng.integers(1, 2001))
        triples += 1
        exact = prob.correctness_probability(p, eps, n)
        bound = prob.bound_b1(RescaledPoint(p, eps), n)
        if exact < bound:
            violations.append((p, eps, n, exact, bound))
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < 30.0
    detail = f"{triples} triples, {len(violations)} violations, {elapsed:.2f}s"
    assert record_criterion(5, "bound soundness", ok, detail), violations[:5]


def test_criterion_06_enumeration_oracle(record_criterion):
    desired = Fraction(4, 5)
    deltas = [Fraction(1, 50), Fraction(1, 20), Fraction(1, 10), Fraction(3, 20), Fraction(1, 5),
              Fraction(3, 10)]
    pairs = []
    for delta in deltas:
        for j in range(9):
            # loads spread over the addition regime [L0 + delta, 2 L0)
            load = desired + delta + (desired - delta) * Fraction(j, 9)
            pairs.append((load, delta))
    start = time.perf_counter()
    worst = 0.0
    for load, delta in pairs:
        policy = ScalingPolicy(float(desired), float(delta))
        for n in range(1, 13):
            got = prob.binomial_correctness(float(load), policy, n)
            worst = max(worst, abs(got - enumerate_correctness(load, desired, delta, n)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and elapsed < 60.0 and len(pairs) >= 50
    detail = f"{len(pairs)} pairs x n=1..12, max abs diff {worst:.2e}, {elapsed:.2f}s"
    assert record_criterion(6, "exact enumeration oracle", ok, detail)


@pytest.mark.slow
def test_criterion_07_monte_carlo_agreement(record_criterion):
    trials = 100_000
    start = time.perf_counter()
    points = 0
    outside = []
    skipped = 0
    for n in (2, 5, 10, 50, 100):
        for p in (0.1, 0.3, 0.5, 0.7):
            for eps in (0.1, 0.2):
                if p < eps:
                    # below the band there is nothing to add; the estimator's regime excludes it
                    skipped += 1
                    continue
                policy = ScalingPolicy(L0, eps * L0)
                load = L0 * (1 + p)
                exact = prob.binomial_correctness(load, policy, n)
                q, _ = estimate_correctness(n, load, policy, trials, seed=(n, int(p * 10), int(eps * 10)))
                sigma = math.sqrt(exact * (1 - exact) / trials)
                points += 1
                if abs(q - exact) > 3 * sigma + 1e-12:
                    outside.append((n, p, eps, q, exact))
    elapsed = time.perf_counter() - start
    ok = len(outside) <= 0.01 * points and elapsed < 300.0
    detail = (f"{points} points ({skipped} skipped with p < eps), "
              f"{len(outside)} beyond 3 sigma, {elapsed:.1f}s")
    assert record_criterion(7, "Monte Carlo agreement", ok, detail), outside


def test_criterion_08_unbiased_additions(record_criterion):
    cycles = 100_000
    parts = []
    ok = True
    for n, p, delta, seed in ((4, 0.5, 0.1, 1), (100, 0.25, 0.1, 2), (1000, 0.1, 0.05, 3)):
        load = L0 * (1 + p)
        s = sample_additions(n, load, ScalingPolicy(L0, delta), cycles, seed=seed)
        se = s.std(ddof=1) / math.sqrt(cycles)
        z = (s.mean() - n * p) / se
        ok &= abs(z) <= 4.0
        parts.append(f"n={n}: mean {s.mean():.4f} vs {n * p:g} (z={z:+.2f})")
    assert record_criterion(8, "unbiased additions", ok, "; ".join(parts))


def test_criterion_09_precision_invariance(record_criterion):
    rows = []
    ok = True
    for kwargs in (dict(delta0=0.05), dict(delta0=0.15), dict(n0=100), dict(n0=1000)):
        shown = []
        for s_p in (1e-3, 1e-4, 1e-5):
            req = TuningRequest(L0, P0, s_p=s_p, **kwargs)
            r = chernoff_min_n(req) if req.mode == "min_n" else chernoff_min_delta(req)
            shown.append(r.display if req.mode == "min_n" else f"{r.value:.3f}")
        ok &= len(set(shown)) == 1
        rows.append(f"{kwargs}: {'/'.join(shown)}")
    assert record_criterion(9, "precision invariance", ok, "; ".join(rows))


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "depas", *argv], capture_output=True,
                          check=False)


def test_criterion_10_cli_determinism(tmp_path, record_criterion):
    trace = tmp_path / "trace.csv"
    trace.write_text("cycle,workload\n0,80\n5,100\n12,160\n20,40\n")
    outputs = []
    for k in range(2):
        out = tmp_path / f"sim{k}.csv"
        sim = _cli("simulate", "--trace", str(trace), "--n0", "100", "--delta", "0.094",
                   "--cycles", "40", "--seed", "42", "--out", str(out))
        ver = _cli("verify", "--n", "50", "--load", "1.1", "--delta", "0.1",
                   "--trials", "100000", "--seed", "42")
        outputs.append((sim.returncode, out.read_bytes(), ver.returncode, ver.stdout))
    same = outputs[0] == outputs[1]
    ok = same and outputs[0][0] == 0 and outputs[0][2] == 0 and outputs[0][1] != b""
    detail = (f"simulate {len(outputs[0][1])} bytes, verify {len(outputs[0][3])} bytes, "
              f"{'identical' if same else 'different'}")
    assert record_criterion(10, "CLI determinism", ok, detail)
