"""Cycle-synchronous Monte Carlo execution of the DEPAS decision rule.

Every node sees the exact average load and draws its own uniform number.
All actions of a cycle take effect together at the end of the cycle.
Node capacity is 1, so workloads are given in node-capacity units and
``load = workload / n``.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from depas.errors import DomainError, TraceError, UsageError
from depas.probability import ScalingPolicy, band_position

REMOVE = "remove"
ADD = "add"
NONE = "none"

THREADS_ENV = "DEPAS_TUNE_THREADS"

# Trials per independently seeded substream in estimate_correctness; fixed
# so the estimate does not depend on the thread count.
_BATCH = 20_000
# Largest number of uniforms drawn at once.
_CHUNK = 4_000_000

Seed = Union[None, int, np.random.SeedSequence, np.random.Generator]


def max_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return min(8, os.cpu_count() or 1)


def as_generator(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(seed)


@dataclass(frozen=True)
class SystemState:
    n: int
    workload: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"node count must be a positive integer, got {self.n}")
        if not self.workload >= 0.0:
            raise DomainError(f"workload must be nonnegative, got {self.workload}")

    @property
    def load(self) -> float:
        return self.workload / self.n


@dataclass(frozen=True)
class Action:
    kind: str
    count: int = 0


@dataclass(frozen=True)
class CycleOutcome:
    additions: int
    deterministic_additions: int
    removals: int
    new_state: SystemState
    in_interval: bool


def node_decision(load: float, policy: ScalingPolicy, u: float) -> Action:
    """What one node does this cycle given its uniform draw ``u``.

    A node acts when ``u`` falls below its probability, so the expected
    number of added nodes equals the optimal count.
    """
    if load < 0.0:
        raise DomainError(f"load must be nonnegative, got {load}")
    pos = band_position(load, policy)
    pi = abs(load - policy.desired_load) / policy.desired_load
    if pos < 0:
        return Action(REMOVE, 1) if u < pi else Action(NONE)
    if pos > 0:
        whole = math.floor(pi)
        m = whole + (1 if u < pi - whole else 0)
        return Action(ADD, m) if m > 0 else Action(NONE)
    return Action(NONE)


def _cycle_counts(n: int, load: float, policy: ScalingPolicy, u: np.ndarray):
    """Additions, deterministic additions and removals for each row of draws.

    ``u`` has shape ``(batch, n)``; removals are capped at ``n - 1``.
    """
    batch = u.shape[0]
    zeros = np.zeros(batch, dtype=np.int64)
    pos = band_position(load, policy)
    pi = abs(load - policy.desired_load) / policy.desired_load
    if pos < 0:
        removals = np.minimum(np.count_nonzero(u < pi, axis=1), n - 1)
        return zeros, zeros, removals
    if pos > 0:
        whole = math.floor(pi)
        sure = np.full(batch, n * whole, dtype=np.int64)
        extra = np.count_nonzero(u < pi - whole, axis=1)
        return sure + extra, sure, zeros
    return zeros, zeros, zeros


def run_cycle(state: SystemState, policy: ScalingPolicy, rng: Seed) -> CycleOutcome:
    """One synchronous cycle; the workload is left unchanged."""
    rng = as_generator(rng)
    u = rng.random((1, state.n))
    add, sure, rem = _cycle_counts(state.n, state.load, policy, u)
    additions, removals = int(add[0]), int(rem[0])
    new = SystemState(state.n + additions - removals, state.workload)
    inside = band_position(new.load, policy) == 0
    return CycleOutcome(additions, int(sure[0]), removals, new, inside)


def _count_inside(n, load, policy, trials, ss):
    rng = np.random.default_rng(ss)
    workload = n * load
    inside = 0
    per_chunk = max(1, _CHUNK // n)
    done = 0
    tol = 1e-9 * policy.desired_load
    while done < trials:
        k = min(per_chunk, trials - done)
        add, _, rem = _cycle_counts(n, load, policy, rng.random((k, n)))
        new_load = workload / (n + add - rem)
        inside += int(np.count_nonzero(
            (new_load > policy.lower + tol) & (new_load < policy.upper - tol)
        ))
        done += k
    return inside


def estimate_correctness(n: int, load: float, policy: ScalingPolicy, trials: int,
                         seed: Seed = None) -> Tuple[float, float]:
    """Empirical correctness probability and its standard error.

    Runs ``trials`` independent single cycles from ``n`` nodes at ``load``.
    Trials are split into fixed-size batches, each with its own substream
    of ``seed``, so the result does not depend on the thread count.
    """
    if trials < 1:
        raise UsageError(f"trials must be positive, got {trials}")
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    tol = 1e-9 * policy.desired_load
    if not policy.upper - tol <= load < 2.0 * policy.desired_load:
        raise DomainError(
            f"load {load} outside the addition regime [{policy.upper}, {2 * policy.desired_load})"
        )
    sizes = [_BATCH] * (trials // _BATCH)
    if trials % _BATCH:
        sizes.append(trials % _BATCH)
    children = _seed_sequence(seed).spawn(len(sizes))
    workers = min(max_threads(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(
                lambda job: _count_inside(n, load, policy, job[0], job[1]),
                zip(sizes, children),
            ))
    else:
        counts = [_count_inside(n, load, policy, k, ss) for k, ss in zip(sizes, children)]
    q = sum(counts) / trials
    return q, math.sqrt(q * (1.0 - q) / trials)


def sample_additions(n: int, load: float, policy: ScalingPolicy, cycles: int,
                     seed: Seed = None) -> np.ndarray:
    """Total nodes added in each of ``cycles`` independent cycles from the same state."""
    rng = as_generator(seed)
    out = np.empty(cycles, dtype=np.int64)
    per_chunk = max(1, _CHUNK // n)
    for start in range(0, cycles, per_chunk):
        k = min(per_chunk, cycles - start)
        add, _, _ = _cycle_counts(n, load, policy, rng.random((k, n)))
        out[start:start + k] = add
    return out


# ---------------------------------------------------------------------------
# Workload traces


@dataclass(frozen=True)
class WorkloadTrace:
    """Piecewise-constant workload: each row holds from its cycle until the next row."""

    rows: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        if not self.rows:
            raise TraceError("trace is empty")
        prev = None
        for cycle, workload in self.rows:
            if int(cycle) != cycle or cycle < 0:
                raise TraceError(f"cycle index must be a nonnegative integer, got {cycle}")
            if not workload >= 0.0 or math.isinf(workload):
                raise TraceError(f"workload must be finite and nonnegative, got {workload}")
            if prev is not None and cycle <= prev:
                raise TraceError(f"cycle indices must increase strictly ({prev} then {cycle})")
            prev = cycle

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence]) -> "WorkloadTrace":
        return cls(tuple((int(c), float(w)) for c, w in rows))

    @classmethod
    def parse(cls, text: str) -> "WorkloadTrace":
        reader = csv.reader(io.StringIO(text))
        lines = [r for r in reader if r and not r[0].lstrip().startswith("#")]
        if not lines or [c.strip() for c in lines[0]] != ["cycle", "workload"]:
            raise TraceError("trace must start with the header 'cycle,workload'")
        rows = []
        for lineno, r in enumerate(lines[1:], start=2):
            if len(r) != 2:
                raise TraceError(f"row {lineno}: expected 2 fields, got {len(r)}")
            try:
                c = r[0].strip()
                if not c.isdigit():
                    raise ValueError(c)
                rows.append((int(c), float(r[1])))
            except ValueError:
                raise TraceError(f"row {lineno}: cannot parse {r!r}") from None
        return cls(tuple(rows))

    @classmethod
    def read(cls, path) -> "WorkloadTrace":
        try:
            with open(path, newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise TraceError(f"cannot read trace {path}: {exc}") from exc
        return cls.parse(text)

    @property
    def last_cycle(self) -> int:
        return self.rows[-1][0]

    def workload_at(self, cycle: int) -> float:
        """Workload of the latest row at or before ``cycle`` (the first row before it starts)."""
        value = self.rows[0][1]
        for c, w in self.rows:
            if c > cycle:
                break
            value = w
        return value


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    before: SystemState
    outcome: CycleOutcome


CSV_HEADER = "cycle,n_before,load_before,additions,removals,n_after,load_after,in_interval"


@dataclass
class SimulationReport:
    policy: ScalingPolicy
    records: List[CycleRecord]

    @property
    def in_interval_fraction(self) -> float:
        if not self.records:
            return 0.0
        return sum(r.outcome.in_interval for r in self.records) / len(self.records)

    @property
    def total_additions(self) -> int:
        return sum(r.outcome.additions for r in self.records)

    @property
    def total_removals(self) -> int:
        return sum(r.outcome.removals for r in self.records)

    @property
    def oscillations(self) -> int:
        """Consecutive cycle pairs where one scales out and the other scales in."""
        count = 0
        for a, b in zip(self.records, self.records[1:]):
            if (a.outcome.additions and b.outcome.removals) or (
                a.outcome.removals and b.outcome.additions
            ):
                count += 1
        return count

    def summary(self) -> dict:
        return {
            "cycles": len(self.records),
            "in_interval_fraction": self.in_interval_fraction,
            "total_additions": self.total_additions,
            "total_removals": self.total_removals,
            "oscillations": self.oscillations,
            "final_n": self.records[-1].outcome.new_state.n if self.records else None,
        }

    def csv_lines(self) -> List[str]:
        lines = [CSV_HEADER]
        for r in self.records:
            o = r.outcome
            lines.append(
                f"{r.cycle},{r.before.n},{r.before.load:.6f},{o.additions},{o.removals},"
                f"{o.new_state.n},{o.new_state.load:.6f},{int(o.in_interval)}"
            )
        s = self.summary()
        lines.append(f"# cycles={s['cycles']}")
        lines.append(f"# in_interval_fraction={s['in_interval_fraction']:.6f}")
        lines.append(f"# total_additions={s['total_additions']}")
        lines.append(f"# total_removals={s['total_removals']}")
        lines.append(f"# oscillations={s['oscillations']}")
        lines.append(f"# final_n={s['final_n']}")
        return lines


def run_workload(trace: WorkloadTrace, initial: SystemState, policy: ScalingPolicy,
                 rng: Seed = None, cycles: Optional[int] = None) -> SimulationReport:
    """Replay ``trace`` for ``cycles`` cycles (default: through its last row).

    Each cycle first applies the trace workload to the current node count,
    then runs one decision cycle.
    """
    if not isinstance(trace, WorkloadTrace):
        raise TraceError("trace must be a WorkloadTrace")
    if cycles is None:
        cycles = trace.last_cycle + 1
    if cycles < 1:
        raise UsageError(f"cycles must be positive, got {cycles}")
    rng = as_generator(rng)
    n = initial.n
    records = []
    for c in range(cycles):
        before = SystemState(n, trace.workload_at(c))
        outcome = run_cycle(before, policy, rng)
        records.append(CycleRecord(c, before, outcome))
        n = outcome.new_state.n
    return SimulationReport(policy, records)
