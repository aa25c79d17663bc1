"""Stage profiling, timing-table planning and quasi-real-time pipeline execution.

The flow mirrors a simulation -> quasi-real-time -> stand-alone bring-up:

1. :func:`profile_stage` measures each processing stage.
2. :func:`plan_schedule` packs the stages sequentially into one period and
   emits a :class:`TimingTable` of action times and periods.
3. :func:`run_pipeline` executes the table, either as a deterministic
   discrete-event simulation (``mode="simulate"``) or against the wall
   clock with one thread per stage (``mode="realtime"``), and reports every
   deadline miss without stopping.
"""

from __future__ import annotations

import gc
import heapq
import json
import math
import queue
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

DEFAULT_BUDGET_FACTOR = 1.2
HANG_PERIODS = 10
_SIM_EPS = 1e-12


class ProfilingError(RuntimeError):
    pass


class ScheduleError(ValueError):
    pass


class PipelineError(RuntimeError):
    pass


class PipelineHang(PipelineError):
    pass


# ----------------------------------------------------------------- profiling


@dataclass(frozen=True)
class StageProfile:
    stage_id: str
    median_runtime_s: float
    p95_runtime_s: float
    runs: int

    def __post_init__(self):
        if self.runs < 3:
            raise ValueError("a profile needs at least 3 runs")
        if not self.p95_runtime_s >= self.median_runtime_s > 0:
            raise ValueError("profile must satisfy p95 >= median > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StageProfile":
        return cls(**d)


def profile_stage(
    stage: Callable[[Any], Any],
    representative_input: Any,
    runs: int = 5,
    warmup: int = 1,
    stage_id: str | None = None,
) -> StageProfile:
    """Time ``runs`` executions of ``stage`` after ``warmup`` discarded ones."""
    if runs < 3:
        raise ValueError("runs must be >= 3")
    stage_id = stage_id or getattr(stage, "__name__", "stage")
    times = []
    try:
        for _ in range(warmup):
            stage(representative_input)
        for _ in range(runs):
            t0 = time.perf_counter()
            stage(representative_input)
            times.append(time.perf_counter() - t0)
    except Exception as exc:
        raise ProfilingError("profiling aborted: stage failure") from exc
    floor = time.get_clock_info("perf_counter").resolution
    median = max(float(np.median(times)), floor)
    p95 = max(float(np.percentile(times, 95)), median)
    return StageProfile(stage_id, median, p95, runs)


# ------------------------------------------------------------------ planning


@dataclass(frozen=True)
class TimingEntry:
    stage_id: str
    action_time_s: float
    action_period_s: float
    budget_s: float
    expected_runtime_s: float

    def __post_init__(self):
        if not 0 <= self.action_time_s < self.action_period_s:
            raise ValueError("action_time_s must lie in [0, action_period_s)")


@dataclass
class TimingTable:
    period_s: float
    entries: list[TimingEntry] = field(default_factory=list)
    dependencies: list[tuple[str, str]] = field(default_factory=list)
    budget_factor: float = DEFAULT_BUDGET_FACTOR

    def __post_init__(self):
        ids = [e.stage_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("each stage may appear only once in a timing table")
        self.dependencies = [tuple(d) for d in self.dependencies]

    @property
    def stage_ids(self) -> list[str]:
        return [e.stage_id for e in self.entries]

    def entry(self, stage_id: str) -> TimingEntry:
        for e in self.entries:
            if e.stage_id == stage_id:
                return e
        raise KeyError(stage_id)

    def predecessors(self, stage_id: str) -> list[str]:
        return [a for a, b in self.dependencies if b == stage_id]

    def successors(self, stage_id: str) -> list[str]:
        return [b for a, b in self.dependencies if a == stage_id]

    def to_dict(self) -> dict:
        return {
            "period_s": self.period_s,
            "budget_factor": self.budget_factor,
            "entries": [asdict(e) for e in self.entries],
            "dependencies": [list(d) for d in self.dependencies],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TimingTable":
        return cls(
            period_s=float(d["period_s"]),
            entries=[TimingEntry(**e) for e in d.get("entries", [])],
            dependencies=[tuple(x) for x in d.get("dependencies", [])],
            budget_factor=float(d.get("budget_factor", DEFAULT_BUDGET_FACTOR)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def topological_order(ids: Sequence[str], dependencies: Iterable[tuple[str, str]]) -> list[str]:
    """Kahn's algorithm; ties go to the stage listed first in ``ids``."""
    index = {s: k for k, s in enumerate(ids)}
    succ: dict[str, list[str]] = {s: [] for s in ids}
    indeg = {s: 0 for s in ids}
    for a, b in dependencies:
        if a not in index or b not in index:
            raise ValueError(f"dependency ({a!r}, {b!r}) names an unknown stage")
        succ[a].append(b)
        indeg[b] += 1
    ready = [(index[s], s) for s in ids if indeg[s] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, s = heapq.heappop(ready)
        order.append(s)
        for t in succ[s]:
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(ready, (index[t], t))
    if len(order) != len(ids):
        raise ScheduleError("dependency cycle")
    return order


def plan_schedule(
    profiles: Sequence[StageProfile],
    dependencies: Iterable[tuple[str, str]] = (),
    period_s: float = 1.0,
    budget_factor: float = DEFAULT_BUDGET_FACTOR,
) -> TimingTable:
    """Sequential greedy packing in topological order.

    Each stage is budgeted ``budget_factor * p95`` and starts when the
    budgets of every stage ahead of it have elapsed.  The plan is feasible
    exactly when the budgets sum (``math.fsum``) to at most ``period_s``.
    """
    if not period_s > 0:
        raise ValueError("period_s must be positive")
    if not budget_factor > 0:
        raise ValueError("budget_factor must be positive")
    dependencies = [tuple(d) for d in dependencies]
    by_id = {p.stage_id: p for p in profiles}
    if len(by_id) != len(profiles):
        raise ValueError("duplicate stage ids in profiles")
    order = topological_order([p.stage_id for p in profiles], dependencies)
    budgets = [budget_factor * by_id[s].p95_runtime_s for s in order]
    total = math.fsum(budgets)
    if total > period_s:
        raise ScheduleError(f"period overflow by {total - period_s:.9g} s")
    entries = []
    for k, s in enumerate(order):
        start = math.fsum(budgets[:k])
        entries.append(TimingEntry(s, start, period_s, budgets[k], by_id[s].p95_runtime_s))
    return TimingTable(period_s, entries, dependencies, budget_factor)


# ----------------------------------------------------------------- execution


@dataclass
class StageRecord:
    stage_id: str
    cycle: int
    release_ts: float
    start_ts: float
    end_ts: float
    deadline_ts: float
    deadline_met: bool


@dataclass
class ScheduleReport:
    mode: str
    period_s: float
    cycles: int
    records: list[StageRecord] = field(default_factory=list)
    outputs: list[Any] = field(default_factory=list, repr=False)

    @property
    def miss_count(self) -> int:
        return sum(not r.deadline_met for r in self.records)

    def misses_by_stage(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out.setdefault(r.stage_id, 0)
            out[r.stage_id] += not r.deadline_met
        return out

    def stage_records(self, stage_id: str) -> list[StageRecord]:
        return sorted((r for r in self.records if r.stage_id == stage_id), key=lambda r: r.cycle)

    def to_dict(self) -> dict:
        return {
            "kind": "schedule_report",
            "mode": self.mode,
            "period_s": self.period_s,
            "cycles": self.cycles,
            "miss_count": self.miss_count,
            "misses_by_stage": self.misses_by_stage(),
            "records": [asdict(r) for r in sorted(self.records, key=lambda r: (r.cycle, r.release_ts, r.stage_id))],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _inputs_for(stage_id, table, results, source, cycle):
    preds = table.predecessors(stage_id)
    if not preds:
        return source(cycle) if callable(source) else cycle
    if len(preds) == 1:
        return results[preds[0]]
    return tuple(results[p] for p in preds)


def _check_stages(stages: Mapping[str, Callable], table: TimingTable):
    missing = [s for s in table.stage_ids if s not in stages]
    if missing:
        raise ValueError(f"timing table stage(s) without an implementation: {missing}")
    extra = [s for s in stages if s not in table.stage_ids]
    if extra:
        raise ValueError(f"stage(s) not covered by the timing table: {extra}")


def run_pipeline(
    stages: Mapping[str, Callable[[Any], Any]],
    table: TimingTable,
    cycles: int,
    source: Callable[[int], Any] | None = None,
    mode: str = "realtime",
    durations: Mapping[str, float | Callable[[int], float]] | None = None,
    queue_size: int = 2,
) -> ScheduleReport:
    """Execute ``cycles`` periods of the timing table.

    ``stages`` maps stage id to a one-argument callable.  A stage with no
    predecessor receives ``source(cycle)`` (or the cycle index); one with a
    single predecessor gets that stage's output; several predecessors arrive
    as a tuple in dependency order.  Outputs of stages without successors are
    collected per cycle in ``report.outputs``.

    In ``"simulate"`` mode stage functions still run (for their outputs) but
    time is virtual: each stage takes ``durations[stage_id]`` seconds (a
    number or a function of the cycle), defaulting to its profiled p95.
    """
    if cycles < 0:
        raise ValueError("cycles must be nonnegative")
    _check_stages(stages, table)
    if mode == "simulate":
        return _simulate(stages, table, cycles, source, durations or {})
    if mode == "realtime":
        return _RealtimeRun(stages, table, cycles, source, queue_size).run()
    raise ValueError(f"unknown mode {mode!r}")


def _simulate(stages, table, cycles, source, durations) -> ScheduleReport:
    report = ScheduleReport("simulate", table.period_s, cycles)
    order = sorted(table.entries, key=lambda e: (e.action_time_s, table.stage_ids.index(e.stage_id)))
    sinks = [s for s in table.stage_ids if not table.successors(s)]
    busy_until = {s: 0.0 for s in table.stage_ids}
    for cycle in range(cycles):
        cycle_start = cycle * table.period_s
        results, ends = {}, {}
        for e in order:
            s = e.stage_id
            release = cycle_start + e.action_time_s
            start = max([release, busy_until[s]] + [ends[p] for p in table.predecessors(s)])
            if start - release <= _SIM_EPS * max(1.0, abs(release)):
                start = release  # float rounding in planned offsets, not real lateness
            d = durations.get(s, e.expected_runtime_s)
            d = d(cycle) if callable(d) else d
            results[s] = stages[s](_inputs_for(s, table, results, source, cycle))
            end = start + float(d)
            ends[s] = busy_until[s] = end
            deadline = release + e.budget_s
            report.records.append(StageRecord(s, cycle, release, start, end, deadline, end <= deadline))
        report.outputs.append(results[sinks[0]] if len(sinks) == 1 else {s: results[s] for s in sinks})
    return report


class _RealtimeRun:
    """One worker thread per stage, bounded SPSC data queues per dependency edge,
    and a coordinator (the calling thread) that owns the clock and releases stages."""

    def __init__(self, stages, table, cycles, source, queue_size):
        self.stages, self.table, self.cycles, self.source = stages, table, cycles, source
        self.stop = threading.Event()
        self.reports: queue.Queue = queue.Queue()
        self.tokens = {s: queue.Queue() for s in table.stage_ids}
        self.edges = {d: queue.Queue(maxsize=queue_size) for d in table.dependencies}
        self.sinks = [s for s in table.stage_ids if not table.successors(s)]
        self.t0 = 0.0
        self.n_events = cycles * len(table.entries)

    def _get(self, q):
        while True:
            try:
                return q.get(timeout=0.05)
            except queue.Empty:
                if self.stop.is_set():
                    raise PipelineError("stopped") from None

    def _put(self, q, item):
        while True:
            try:
                return q.put(item, timeout=0.05)
            except queue.Full:
                if self.stop.is_set():
                    raise PipelineError("stopped") from None

    def _worker(self, s):
        fn = self.stages[s]
        preds = self.table.predecessors(s)
        outs = [self.edges[(s, b)] for b in self.table.successors(s)]
        try:
            while True:
                tok = self._get(self.tokens[s])
                if tok is None:
                    return
                cycle = tok
                if not preds:
                    arg = self.source(cycle) if callable(self.source) else cycle
                else:
                    vals = [self._get(self.edges[(p, s)]) for p in preds]
                    arg = vals[0] if len(vals) == 1 else tuple(vals)
                start = time.perf_counter()
                out = fn(arg)
                end = time.perf_counter()
                for q in outs:
                    self._put(q, out)
                self.reports.put(("done", s, cycle, start, end, out))
        except PipelineError:
            return
        except BaseException as exc:  # surfaced by the coordinator
            self.reports.put(("error", s, None, exc))

    def run(self) -> ScheduleReport:
        table = self.table
        report = ScheduleReport("realtime", table.period_s, self.cycles)
        threads = [threading.Thread(target=self._worker, args=(s,), daemon=True, name=f"stage-{s}") for s in table.stage_ids]
        for t in threads:
            t.start()

        events = sorted(
            (c * table.period_s + e.action_time_s, table.stage_ids.index(e.stage_id), e.stage_id, c)
            for c in range(self.cycles)
            for e in table.entries
        )
        released: dict[tuple[str, int], float] = {}
        done: dict[tuple[str, int], tuple] = {}
        # a full collection mid-run stalls every thread; pay it up front and
        # keep the pre-existing heap out of later collections
        gc.collect()
        gc.freeze()
        self.t0 = time.perf_counter() + 0.002
        try:
            for rel, _, s, c in events:
                self._wait_until(self.t0 + rel, released, done)
                released[(s, c)] = rel
                self.tokens[s].put(c)
            while len(done) < len(events):
                self._wait_until(time.perf_counter() + table.period_s, released, done)
        finally:
            gc.unfreeze()
            self.stop.set()
            for s in table.stage_ids:
                self.tokens[s].put(None)

        outputs: dict[int, dict] = {}
        for (s, c), (start, end, out) in done.items():
            e = table.entry(s)
            rel = released[(s, c)]
            deadline = rel + e.budget_s
            start_r, end_r = start - self.t0, end - self.t0
            report.records.append(StageRecord(s, c, rel, start_r, end_r, deadline, end_r <= deadline))
            if s in self.sinks:
                outputs.setdefault(c, {})[s] = out
        for c in range(self.cycles):
            o = outputs.get(c, {})
            report.outputs.append(o.get(self.sinks[0]) if len(self.sinks) == 1 else o)
        report.records.sort(key=lambda r: (r.cycle, r.release_ts))
        return report

    def _wait_until(self, target, released, done):
        while True:
            self._check_hang(released, done)
            remaining = target - time.perf_counter()
            if remaining <= 0:
                return
            try:
                msg = self.reports.get(timeout=min(remaining, 0.05))
            except queue.Empty:
                continue
            if msg[0] == "error":
                raise PipelineError(f"stage {msg[1]} failed: {msg[3]!r}") from msg[3]
            _, s, c, start, end, out = msg
            done[(s, c)] = (start, end, out)
            if len(done) == self.n_events:
                return

    def _check_hang(self, released, done):
        now = time.perf_counter() - self.t0
        limit = HANG_PERIODS * self.table.period_s
        for key, rel in released.items():
            if key not in done and now - rel > limit:
                raise PipelineHang(f"stage hang: {key[0]} (cycle {key[1]})")
