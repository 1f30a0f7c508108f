"""Windowed aggregation over reordered batches.

Every group keeps a ring buffer of its last `window` attr values.  The
aggregate is the windowed sum, recomputed by scanning the window on each
insert; the simulated cost model charges that rescan (window_passes can
multiply it to emulate heavier per-tuple analysis).  Two batch backends
share the store layout: a deterministic cost-model simulation and a
thread-pool executor that measures wall time per logical thread.  Both
must leave the store in exactly the state the serial reference produces,
since all arithmetic is integer and per-group arrival order is preserved
end to end.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datagen import TupleStream
from .errors import ConsistencyError, DataError, ExecutionError, InvalidConfigError
from .partition import ReorderedBatch


@dataclass(frozen=True)
class CostModel:
    """Knobs of the simulated per-tuple cost.

    cost(tuple) = per_tuple_overhead
                + window_passes * per_element_cost * fill_after_insert
    and each batch additionally pays per_iteration_overhead once.
    """

    window_passes: int = 1
    per_element_cost: int = 1
    per_tuple_overhead: int = 1
    per_iteration_overhead: int = 0

    def __post_init__(self) -> None:
        if self.window_passes < 1:
            raise InvalidConfigError(
                f"window_passes must be >= 1, got {self.window_passes}")
        for name in ("per_element_cost", "per_tuple_overhead",
                     "per_iteration_overhead"):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be >= 0")


class WindowStore:
    """Per-group ring buffers of the most recent attr values.

    While a group's window is filling, values append at index fill and
    next_pos stays 0; once full, next_pos points at the oldest value,
    which the next insert overwrites.  Rows belong to disjoint groups,
    so workers handling different groups may write concurrently.
    """

    def __init__(self, n_groups: int, window: int):
        if n_groups < 1:
            raise InvalidConfigError(f"n_groups must be >= 1, got {n_groups}")
        if window < 1:
            raise InvalidConfigError(f"window must be >= 1, got {window}")
        self.n_groups = n_groups
        self.window = window
        self.values = np.zeros((n_groups, window), dtype=np.int64)
        self.next_pos = np.zeros(n_groups, dtype=np.int64)
        self.fill = np.zeros(n_groups, dtype=np.int64)
        self.window_sum = np.zeros(n_groups, dtype=np.int64)

    def contents(self, group: int) -> np.ndarray:
        """Current window of a group in arrival order, oldest first."""
        f = int(self.fill[group])
        p = int(self.next_pos[group])
        idx = (p + np.arange(f)) % self.window
        return self.values[group, idx]

    def copy(self) -> "WindowStore":
        dup = WindowStore(self.n_groups, self.window)
        dup.values[:] = self.values
        dup.next_pos[:] = self.next_pos
        dup.fill[:] = self.fill
        dup.window_sum[:] = self.window_sum
        return dup

    def state_equal(self, other: "WindowStore") -> bool:
        return (self.n_groups == other.n_groups
                and self.window == other.window
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.next_pos, other.next_pos)
                and np.array_equal(self.fill, other.fill)
                and np.array_equal(self.window_sum, other.window_sum))


def ingest_tuple(store: WindowStore, group: int, attr: int,
                 model: CostModel) -> tuple[int, int]:
    """Insert one value and rescan its window; returns (window_sum, cost).

    This is the scalar reference path; the batch backends must agree
    with it bit for bit.
    """
    if not 0 <= group < store.n_groups:
        raise DataError(f"group {group} outside [0, {store.n_groups})")
    w = store.window
    f = int(store.fill[group])
    row = store.values[group]
    if f < w:
        row[f] = attr
        f += 1
        store.fill[group] = f
    else:
        p = int(store.next_pos[group])
        row[p] = attr
        store.next_pos[group] = (p + 1) % w
    # full scan of the occupied slots; extra passes are charged, not re-run,
    # because integer summation is pass-count invariant
    s = int(row[:f].sum())
    store.window_sum[group] = s
    cost = (model.per_tuple_overhead
            + model.window_passes * model.per_element_cost * f)
    return s, cost


@dataclass(frozen=True)
class AggregateTrace:
    """Per-ingest (group, window_sum) pairs in processing order."""

    groups: np.ndarray
    sums: np.ndarray

    def __len__(self) -> int:
        return len(self.groups)

    def for_group(self, group: int) -> np.ndarray:
        return self.sums[self.groups == group]

    def grouped_projection(self) -> tuple[np.ndarray, np.ndarray]:
        """Stable regrouping: per-group subsequences concatenated by id.

        Two traces have identical per-group projections iff these arrays
        match, which avoids a per-group comparison loop.
        """
        order = np.argsort(self.groups, kind="stable")
        return self.groups[order], self.sums[order]


class TraceBuffer:
    """Accumulates trace chunks across batches."""

    def __init__(self) -> None:
        self._groups: list[np.ndarray] = []
        self._sums: list[np.ndarray] = []

    def append(self, groups: np.ndarray, sums: np.ndarray) -> None:
        self._groups.append(groups)
        self._sums.append(sums)

    def build(self) -> AggregateTrace:
        if not self._groups:
            empty = np.empty(0, dtype=np.int64)
            return AggregateTrace(empty, empty.copy())
        return AggregateTrace(np.concatenate(self._groups),
                              np.concatenate(self._sums))


@dataclass(frozen=True)
class IterationReport:
    """Execution record of one batch."""

    per_thread_cost: np.ndarray
    makespan: int
    tuples: int
    imbalance: int
    moves: int = 0
    scanned: int = 0


def _cum0(x: np.ndarray) -> np.ndarray:
    out = np.zeros(len(x) + 1, dtype=np.int64)
    np.cumsum(x, out=out[1:])
    return out


def _ingest_runs(store: WindowStore, run_groups: np.ndarray,
                 starts: np.ndarray, lengths: np.ndarray,
                 attrs: np.ndarray, model: CostModel | None,
                 want_sums: bool, want_costs: bool
                 ) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Vectorized ring update for contiguous same-group runs.

    For each run the window's future contents and per-tuple sums are a
    pure function of (current contents in arrival order) ++ (run values):
    the sum after element i is a difference of two prefix sums of that
    timeline, and the final ring state follows in closed form.
    """
    w = store.window
    g = run_groups
    ln = lengths
    n = len(attrs)
    r = len(g)
    f0 = store.fill[g]
    p0 = store.next_pos[g]

    rep_run = np.repeat(np.arange(r), ln)
    ja = np.arange(n, dtype=np.int64) - starts[rep_run]

    fcum = _cum0(f0)
    total_prior = int(fcum[-1])
    rep_p = np.repeat(np.arange(r), f0)
    jp = np.arange(total_prior, dtype=np.int64) - fcum[:-1][rep_p]
    prior_vals = store.values[g[rep_p], (p0[rep_p] + jp) % w]

    tcum = _cum0(f0 + ln)
    toff = tcum[:-1]
    timeline = np.empty(total_prior + n, dtype=np.int64)
    timeline[toff[rep_p] + jp] = prior_vals
    timeline[toff[rep_run] + f0[rep_run] + ja] = attrs

    cs = _cum0(timeline)
    hi = f0[rep_run] + ja + 1
    base = toff[rep_run]

    sums = None
    if want_sums:
        lo = np.maximum(hi - w, 0)
        sums = cs[base + hi] - cs[base + lo]
    costs = None
    if want_costs:
        if model is None:
            raise InvalidConfigError("cost accounting requires a CostModel")
        costs = (model.per_tuple_overhead
                 + model.window_passes * model.per_element_cost
                 * np.minimum(hi, w))

    # closed-form final state
    total = f0 + ln
    store.fill[g] = np.minimum(total, w)
    store.next_pos[g] = (p0 + np.maximum(total - w, 0)) % w
    final_lo = np.maximum(total - w, 0)
    store.window_sum[g] = cs[tcum[1:]] - cs[toff + final_lo]

    kept = np.minimum(ln, w)
    rep_w = np.repeat(np.arange(r), kept)
    jw = np.arange(int(kept.sum()), dtype=np.int64) - _cum0(kept)[:-1][rep_w]
    t_idx = (ln - kept)[rep_w] + jw
    slot = (p0[rep_w] + f0[rep_w] + t_idx) % w
    store.values[g[rep_w], slot] = attrs[starts[rep_w] + t_idx]

    return sums, costs


def ingest_sequence(store: WindowStore, groups: np.ndarray, attrs: np.ndarray,
                    model: CostModel | None = None, *,
                    assume_grouped: bool = False,
                    want_sums: bool = False, want_costs: bool = False
                    ) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Ingest an ordered tuple sequence; optional per-tuple sums and costs.

    With assume_grouped the caller guarantees each group forms a single
    contiguous run (the reordered-batch layout); otherwise tuples are
    regrouped internally with a stable sort, which preserves per-group
    order and therefore the per-group window evolution.
    """
    n = len(groups)
    if n == 0:
        empty = np.empty(0, dtype=np.int64)
        return (empty if want_sums else None,
                empty.copy() if want_costs else None)
    order = None
    if assume_grouped:
        gs, attrs_g = groups, attrs
    else:
        order = np.argsort(groups, kind="stable")
        gs = groups[order]
        attrs_g = attrs[order]
    starts = np.concatenate(
        ([0], np.flatnonzero(gs[1:] != gs[:-1]) + 1)).astype(np.int64)
    lengths = np.diff(np.concatenate((starts, [n]))).astype(np.int64)
    run_groups = gs[starts]
    if int(run_groups.min()) < 0 or int(run_groups.max()) >= store.n_groups:
        raise DataError(f"group id outside [0, {store.n_groups})")
    if assume_grouped and len(np.unique(run_groups)) != len(run_groups):
        raise ConsistencyError("assume_grouped input has a split group run")
    sums, costs = _ingest_runs(store, run_groups, starts, lengths, attrs_g,
                               model, want_sums, want_costs)
    if order is not None:
        if sums is not None:
            unsorted = np.empty_like(sums)
            unsorted[order] = sums
            sums = unsorted
        if costs is not None:
            unsorted = np.empty_like(costs)
            unsorted[order] = costs
            costs = unsorted
    return sums, costs


def process_batch_sim(reordered: ReorderedBatch, store: WindowStore,
                      model: CostModel,
                      trace: TraceBuffer | None = None) -> IterationReport:
    """Deterministic backend: per-thread cost units from the model.

    Makespan is the maximum per-thread cost plus the per-iteration
    overhead, mirroring a bulk-synchronous kernel launch.
    """
    ind = reordered.indicator
    sums, costs = ingest_sequence(
        store, reordered.groups, reordered.attrs, model,
        assume_grouped=True, want_sums=trace is not None, want_costs=True)
    ccum = _cum0(costs)
    per_thread = ccum[ind[1:]] - ccum[ind[:-1]]
    tpt = np.diff(ind)
    if trace is not None:
        trace.append(reordered.groups, sums)
    return IterationReport(
        per_thread_cost=per_thread,
        makespan=int(per_thread.max()) + model.per_iteration_overhead,
        tuples=len(reordered),
        imbalance=int(tpt.max() - tpt.min()),
    )


def _run_segment(store: WindowStore, groups: list[int], attrs: list[int],
                 lo: int, hi: int, out: list[int] | None) -> None:
    # scalar hot loop; state round-trips through plain ints on purpose
    values = store.values
    next_pos = store.next_pos
    fill = store.fill
    wsum = store.window_sum
    w = store.window
    i = lo
    while i < hi:
        gid = groups[i]
        j = i
        while j < hi and groups[j] == gid:
            j += 1
        f = int(fill[gid])
        p = int(next_pos[gid])
        s = int(wsum[gid])
        row = values[gid]
        for k in range(i, j):
            a = attrs[k]
            if f < w:
                row[f] = a
                s += a
                f += 1
            else:
                s += a - int(row[p])
                row[p] = a
                p += 1
                if p == w:
                    p = 0
            if out is not None:
                out.append(s)
        fill[gid] = f
        next_pos[gid] = p
        wsum[gid] = s
        i = j


def process_batch_parallel(reordered: ReorderedBatch, store: WindowStore,
                           pool_size: int,
                           executor: ThreadPoolExecutor | None = None,
                           trace: TraceBuffer | None = None) -> IterationReport:
    """Worker-pool backend: per-thread cost is measured wall nanoseconds.

    Logical threads are independent units of work; contiguous ranges of
    them are handed to pool workers to keep scheduling overhead off the
    per-thread timings.  Returns only after every logical thread has
    finished, and leaves the store bit-identical to process_batch_sim.
    """
    if pool_size < 1:
        raise InvalidConfigError(f"pool_size must be >= 1, got {pool_size}")
    ind = reordered.indicator
    n_threads = len(ind) - 1
    n = len(reordered)
    if n:
        gmin = int(reordered.groups.min())
        gmax = int(reordered.groups.max())
        if gmin < 0 or gmax >= store.n_groups:
            raise DataError(f"group id outside [0, {store.n_groups})")
    groups_l = reordered.groups.tolist()
    attrs_l = reordered.attrs.tolist()
    ind_l = ind.tolist()
    want = trace is not None
    per_thread = np.zeros(n_threads, dtype=np.int64)
    sums_out = np.empty(n, dtype=np.int64) if want else None

    def work(t_lo: int, t_hi: int) -> tuple[int, list[int]]:
        times = []
        for t in range(t_lo, t_hi):
            lo, hi = ind_l[t], ind_l[t + 1]
            out: list[int] | None = [] if want and hi > lo else None
            began = time.perf_counter_ns()
            if hi > lo:
                _run_segment(store, groups_l, attrs_l, lo, hi, out)
            times.append(time.perf_counter_ns() - began)
            if out is not None:
                sums_out[lo:hi] = out
        return t_lo, times

    n_chunks = min(n_threads, pool_size * 4) or 1
    bounds = np.linspace(0, n_threads, n_chunks + 1).astype(int)
    own_pool = executor is None
    pool = executor if executor is not None else ThreadPoolExecutor(pool_size)
    try:
        futures = [pool.submit(work, int(bounds[c]), int(bounds[c + 1]))
                   for c in range(n_chunks)]
        for fut in futures:
            try:
                t_lo, times = fut.result()
            except Exception as exc:
                for other in futures:
                    other.cancel()
                raise ExecutionError(f"worker failed: {exc}") from exc
            per_thread[t_lo:t_lo + len(times)] = times
    finally:
        if own_pool:
            pool.shutdown(wait=True)
    tpt = np.diff(ind)
    if want:
        trace.append(reordered.groups, sums_out)
    return IterationReport(
        per_thread_cost=per_thread,
        makespan=int(per_thread.max()),
        tuples=n,
        imbalance=int(tpt.max() - tpt.min()),
    )


def serial_reference(stream: TupleStream, window: int,
                     window_passes: int = 1) -> tuple[WindowStore, AggregateTrace]:
    """Single-threaded oracle: ingest the raw stream in order, tracing.

    The result is pass-count invariant; window_passes is validated for
    interface parity with the batch backends.
    """
    CostModel(window_passes=window_passes)
    store = WindowStore(stream.n_groups, window)
    buf = TraceBuffer()
    for g, a in stream.chunks():
        sums, _ = ingest_sequence(store, g, a, want_sums=True)
        buf.append(g, sums)
    return store, buf.build()
