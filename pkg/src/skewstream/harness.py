"""Experiment harness: wires the pipeline and reports per-batch results.

One run streams a dataset in batches through count -> reorder -> balance
-> execute.  Moves decided on batch t are applied after it executes, so
they shape batch t+1; the entry assignment of a batch is never changed
under it.  Reports carry per-iteration rows plus run totals, and on the
simulated backend an identical config reproduces them bit for bit.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

from .balance import BalancerConfig, Policy, get_policy
from .datagen import DatasetKind, DatasetSpec, batches, stream_for
from .engine import (AggregateTrace, CostModel, IterationReport, TraceBuffer,
                     WindowStore, process_batch_parallel, process_batch_sim)
from .errors import DataError, InvalidConfigError
from .partition import (Assignment, apply_moves, count_batch,
                        initial_assignment, reorder_batch)


class Backend(Enum):
    SIM = "sim"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs.

    n_threads is grid_size * block_size, mirroring a launch geometry.
    seed overrides the dataset seed so seed sweeps need not rebuild the
    spec.  trace retains per-ingest aggregates, which costs memory
    proportional to the stream length.
    """

    dataset: DatasetSpec
    batch_size: int = 5000
    window: int = 32
    grid_size: int = 4
    block_size: int = 256
    balancer: BalancerConfig = BalancerConfig()
    cost: CostModel = CostModel()
    backend: Backend = Backend.SIM
    pool_size: int = 4
    seed: int = 0
    trace: bool = False

    @property
    def n_threads(self) -> int:
        return self.grid_size * self.block_size

    def __post_init__(self) -> None:
        for name in ("batch_size", "window", "grid_size", "block_size",
                     "pool_size"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1")


@dataclass
class ExperimentReport:
    """Per-iteration rows plus run totals for one configuration."""

    config: RunConfig
    rows: list[IterationReport]
    total_makespan: int
    total_moves: int
    total_scanned: int
    total_tuples: int
    throughput: float
    normalized_throughput: float | None = None
    store: WindowStore | None = None
    trace: AggregateTrace | None = None
    final_assignment: Assignment | None = None

    @property
    def policy_name(self) -> str:
        return self.config.balancer.policy.value


def run(config: RunConfig) -> ExperimentReport:
    """Execute one configuration over its whole stream."""
    spec = replace(config.dataset, seed=config.seed)
    asg = initial_assignment(spec.n_groups, config.n_threads)
    store = WindowStore(spec.n_groups, config.window)
    policy_fn = get_policy(config.balancer.policy)
    trace_buf = TraceBuffer() if config.trace else None
    parallel = config.backend is Backend.PARALLEL
    executor = ThreadPoolExecutor(config.pool_size) if parallel else None

    rows: list[IterationReport] = []
    applied_prev = 0
    total_moves = total_scanned = total_tuples = total_makespan = 0
    try:
        for batch in batches(stream_for(spec), config.batch_size):
            try:
                stats = count_batch(batch, asg)
                reordered = reorder_batch(batch, asg, stats)
                verdict = policy_fn(stats, asg, reordered, config.balancer)
                if parallel:
                    rep = process_batch_parallel(reordered, store,
                                                 config.pool_size, executor,
                                                 trace_buf)
                else:
                    rep = process_batch_sim(reordered, store, config.cost,
                                            trace_buf)
            except DataError as exc:
                raise DataError(f"iteration {batch.index}: {exc}") from exc
            rows.append(replace(rep, moves=applied_prev,
                                scanned=verdict.scanned_tuples))
            # decided on batch t, in force from batch t+1
            asg = apply_moves(asg, verdict.moves)
            applied_prev = len(verdict.moves)
            total_moves += len(verdict.moves)
            total_scanned += verdict.scanned_tuples
            total_tuples += rep.tuples
            total_makespan += rep.makespan
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    throughput = (total_tuples / total_makespan) if total_makespan > 0 else 0.0
    return ExperimentReport(
        config=config,
        rows=rows,
        total_makespan=total_makespan,
        total_moves=total_moves,
        total_scanned=total_scanned,
        total_tuples=total_tuples,
        throughput=throughput,
        normalized_throughput=(
            1.0 if config.balancer.policy is Policy.NO_BALANCE else None),
        store=store,
        trace=trace_buf.build() if trace_buf is not None else None,
        final_assignment=asg,
    )


_NO_BALANCE_AXES = ("policy", "grid_size", "window_passes")


def _with_axis(base: RunConfig, axis: str, value) -> RunConfig:
    if axis == "policy":
        return replace(base, balancer=replace(base.balancer,
                                              policy=Policy(value)))
    if axis == "grid_size":
        return replace(base, grid_size=int(value))
    if axis == "window_passes":
        return replace(base, cost=replace(base.cost,
                                          window_passes=int(value)))
    raise InvalidConfigError(
        f"unknown sweep axis {axis!r}; choose one of {_NO_BALANCE_AXES}")


def sweep(base: RunConfig, axis: str, values) -> list[ExperimentReport]:
    """Run a series varying one axis, normalizing each point.

    Every point gets a matched no-balance twin (same config, policy
    swapped out) and normalized_throughput is the ratio against it; the
    twin of a no-balance point is itself, pinned to exactly 1.  Twins
    are cached, so a policy sweep pays for one baseline run.
    """
    baselines: dict[RunConfig, float] = {}
    reports = []
    for value in values:
        cfg = _with_axis(base, axis, value)
        rep = run(cfg)
        if cfg.balancer.policy is not Policy.NO_BALANCE:
            twin = replace(cfg, balancer=replace(cfg.balancer,
                                                 policy=Policy.NO_BALANCE))
            if twin not in baselines:
                baselines[twin] = run(twin).throughput
            base_thr = baselines[twin]
            rep.normalized_throughput = (
                rep.throughput / base_thr if base_thr > 0 else 0.0)
        reports.append(rep)
    return reports


_PRESET_KIND = {"ds1": DatasetKind.UNIFORM, "ds2": DatasetKind.ZIPF,
                "ds3": DatasetKind.PERMUTED_ZIPF}

PRESET_NAMES = tuple(f"{ds}-{scale}" for scale in ("full", "desk")
                     for ds in ("ds1", "ds2", "ds3"))


def preset(name: str) -> RunConfig:
    """Named starting points: {ds1,ds2,ds3} x {full,desk}.

    ds1 is uniform, ds2 zipf with the hot groups at low ids, ds3 the
    same zipf mass scattered by a label permutation.  full mirrors the
    reference experiment geometry; desk shrinks it to laptop scale while
    keeping batch/threads and groups/threads ratios comparable.
    """
    parts = name.split("-")
    if len(parts) != 2 or parts[0] not in _PRESET_KIND or parts[1] not in (
            "full", "desk"):
        raise InvalidConfigError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    ds, scale = parts
    kind = _PRESET_KIND[ds]
    if scale == "full":
        spec = DatasetSpec(kind=kind, n_tuples=100_000_000, n_groups=40_000,
                           zipf_exponent=1.0)
        return RunConfig(dataset=spec, batch_size=50_000, window=100,
                         grid_size=4, block_size=256,
                         balancer=BalancerConfig(thread_threshold=1000,
                                                 pot=0.5))
    spec = DatasetSpec(kind=kind, n_tuples=1_000_000, n_groups=4096,
                       zipf_exponent=1.0)
    return RunConfig(dataset=spec, batch_size=5000, window=32,
                     grid_size=4, block_size=256,
                     balancer=BalancerConfig(thread_threshold=50, pot=0.5))


CSV_COLUMNS = ("iter", "policy", "grid", "makespan", "imbalance", "moves",
               "scanned", "tuples", "throughput", "normalized_throughput")


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.9g}"


def write_csv(report: ExperimentReport, path) -> None:
    """Stable-schema dump: one row per iteration, then a total row."""
    policy = report.policy_name
    grid = report.config.grid_size
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for i, row in enumerate(report.rows):
            wr.writerow([i, policy, grid, row.makespan, row.imbalance,
                         row.moves, row.scanned, row.tuples, "", ""])
        wr.writerow(["total", policy, grid, report.total_makespan, "",
                     report.total_moves, report.total_scanned,
                     report.total_tuples, _fmt(report.throughput),
                     _fmt(report.normalized_throughput)])
