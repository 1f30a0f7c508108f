"""Partition-parallel streaming group-by aggregation with load balancing.

A stream of (group, attribute) tuples is processed in batches by a fixed
set of logical threads.  Each batch is counted, reordered thread-major,
optionally rebalanced by moving groups between threads, and executed
against per-group sliding windows.  Costs come from a calibrated model
(simulated backend) or wall-clock measurement (thread pool backend).
"""

from .balance import (POLICIES, BalancerConfig, MoveList, Policy, best_balance,
                      check_all, get_first, get_policy, no_balance, prob_check,
                      shift, shift_local)
from .datagen import (REPLAY_DTYPE, Batch, DatasetKind, DatasetSpec,
                      TupleStream, batches, gen_uniform, gen_zipf,
                      permute_groups, read_replay, relabel_groups, stream_for,
                      write_replay)
from .engine import (AggregateTrace, CostModel, IterationReport, WindowStore,
                     ingest_sequence, ingest_tuple, process_batch_parallel,
                     process_batch_sim, serial_reference)
from .errors import (ConsistencyError, DataError, ExecutionError,
                     InvalidConfigError, InvalidSpecError, SkewStreamError,
                     StaleMoveError)
from .harness import (Backend, ExperimentReport, RunConfig, preset, run,
                      sweep, write_csv)
from .partition import (BACK, FRONT, Assignment, BatchStats, Move,
                        ReorderedBatch, apply_moves, count_batch,
                        initial_assignment, reorder_batch)

__version__ = "0.1.0"

__all__ = [
    "BACK", "FRONT",
    "AggregateTrace", "Assignment", "Backend", "BalancerConfig", "Batch",
    "BatchStats", "ConsistencyError", "CostModel", "DataError", "DatasetKind",
    "DatasetSpec", "ExecutionError", "ExperimentReport", "InvalidConfigError",
    "InvalidSpecError", "IterationReport", "Move", "MoveList", "POLICIES",
    "Policy", "REPLAY_DTYPE", "ReorderedBatch", "RunConfig", "SkewStreamError",
    "StaleMoveError", "TupleStream", "WindowStore", "apply_moves", "batches",
    "best_balance", "check_all", "count_batch", "gen_uniform", "gen_zipf",
    "get_first", "get_policy", "ingest_sequence", "ingest_tuple",
    "initial_assignment", "no_balance", "permute_groups", "preset",
    "prob_check", "process_batch_parallel", "process_batch_sim",
    "read_replay", "relabel_groups", "reorder_batch", "run",
    "serial_reference", "shift", "shift_local", "stream_for", "sweep",
    "write_csv", "write_replay",
]
