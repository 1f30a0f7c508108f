"""Group-to-thread assignment and the two-pass batch reorder.

Each logical thread owns an ordered list of groups.  A batch is made
thread-executable by counting per-group occurrences (pass one) and then
placing tuples so that every thread's tuples form one contiguous segment,
with the thread's groups contiguous inside it in list order (pass two).
Placement is stable: tuples of the same group keep their arrival order,
which the windowed aggregation downstream depends on.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .datagen import Batch, Tuple
from .errors import (ConsistencyError, DataError, InvalidConfigError,
                     StaleMoveError)

FRONT = "front"
BACK = "back"


@dataclass(frozen=True)
class Move:
    """Relocation of one group from thread src to thread dst."""

    group: int
    src: int
    dst: int
    placement: str = BACK


@dataclass(frozen=True)
class BatchStats:
    """Per-group and per-thread tuple counts for one batch."""

    group_counts: np.ndarray
    tpt: np.ndarray


class Assignment:
    """Dense group -> thread map plus per-thread ordered group lists.

    Both views describe the same relation and are kept consistent by
    construction; audit() re-verifies that from scratch.
    """

    def __init__(self, group_to_thread: np.ndarray,
                 thread_to_groups: list[list[int]]):
        self.group_to_thread = np.asarray(group_to_thread, dtype=np.int64)
        self.thread_to_groups = thread_to_groups
        self.n_groups = len(self.group_to_thread)
        self.n_threads = len(thread_to_groups)

    def copy(self) -> "Assignment":
        return Assignment(self.group_to_thread.copy(),
                          [list(lst) for lst in self.thread_to_groups])

    def placement_order(self) -> np.ndarray:
        """Rank of each group in concatenated thread-list order."""
        flat = np.fromiter(
            itertools.chain.from_iterable(self.thread_to_groups),
            dtype=np.int64, count=self.n_groups)
        order = np.empty(self.n_groups, dtype=np.int64)
        order[flat] = np.arange(self.n_groups)
        return order

    def audit(self) -> None:
        seen = np.zeros(self.n_groups, dtype=bool)
        for t, lst in enumerate(self.thread_to_groups):
            for g in lst:
                if g < 0 or g >= self.n_groups:
                    raise ConsistencyError(f"group {g} out of range")
                if seen[g]:
                    raise ConsistencyError(f"group {g} listed twice")
                seen[g] = True
                if self.group_to_thread[g] != t:
                    raise ConsistencyError(
                        f"group {g} listed on thread {t} but mapped to "
                        f"{int(self.group_to_thread[g])}")
        if not seen.all():
            missing = int(np.argmin(seen))
            raise ConsistencyError(f"group {missing} not listed on any thread")

    def dump_lines(self) -> list[str]:
        lines = []
        for t, lst in enumerate(self.thread_to_groups):
            body = " ".join(f"g{g}" for g in lst)
            lines.append(f"thread {t}: {body}" if body else f"thread {t}:")
        return lines


def initial_assignment(n_groups: int, n_threads: int) -> Assignment:
    """Consecutive group ranges per thread, sizes differing by at most one."""
    if n_groups < 1 or n_threads < 1:
        raise InvalidConfigError("need n_groups >= 1 and n_threads >= 1")
    if n_threads > n_groups:
        warnings.warn(
            f"{n_threads} threads for {n_groups} groups; trailing threads "
            f"start empty", stacklevel=2)
    base, rem = divmod(n_groups, n_threads)
    g2t = np.empty(n_groups, dtype=np.int64)
    lists: list[list[int]] = []
    start = 0
    for t in range(n_threads):
        size = base + (1 if t < rem else 0)
        lists.append(list(range(start, start + size)))
        g2t[start:start + size] = t
        start += size
    return Assignment(g2t, lists)


def count_batch(batch: Batch, assignment: Assignment) -> BatchStats:
    """One linear pass producing per-group and per-thread counts."""
    g = batch.groups
    if len(g):
        bad = (g < 0) | (g >= assignment.n_groups)
        if bad.any():
            i = int(np.argmax(bad))
            raise DataError(
                f"tuple {i} has group {int(g[i])}, outside "
                f"[0, {assignment.n_groups})")
    counts = np.bincount(g, minlength=assignment.n_groups).astype(np.int64)
    tpt = np.bincount(assignment.group_to_thread[g],
                      minlength=assignment.n_threads).astype(np.int64)
    return BatchStats(counts, tpt)


@dataclass(frozen=True)
class ReorderedBatch:
    """Batch tuples laid out thread-major with segment offsets.

    indicator has n_threads + 1 entries; thread t owns positions
    [indicator[t], indicator[t + 1]).  The final entry equals the batch
    size, so empty trailing threads are representable.
    """

    groups: np.ndarray
    attrs: np.ndarray
    indicator: np.ndarray

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def n_threads(self) -> int:
        return len(self.indicator) - 1

    def segment(self, t: int) -> tuple[int, int]:
        return int(self.indicator[t]), int(self.indicator[t + 1])

    def tuples(self) -> list[Tuple]:
        return [Tuple(int(g), int(a))
                for g, a in zip(self.groups, self.attrs)]


def reorder_batch(batch: Batch, assignment: Assignment,
                  stats: BatchStats) -> ReorderedBatch:
    """Stable placement of a counted batch into thread segments.

    Reuses the counts from count_batch; the placement key of a tuple is
    its group's rank in concatenated thread-list order, so a stable sort
    on that key yields exactly the two-pass counting-sort layout.
    """
    n = len(batch)
    if int(stats.tpt.sum()) != n or int(stats.group_counts.sum()) != n:
        raise ConsistencyError(
            f"stats sum to {int(stats.tpt.sum())}/{int(stats.group_counts.sum())} "
            f"for a batch of {n}")
    key = assignment.placement_order()[batch.groups]
    perm = np.argsort(key, kind="stable")
    indicator = np.zeros(assignment.n_threads + 1, dtype=np.int64)
    np.cumsum(stats.tpt, out=indicator[1:])
    return ReorderedBatch(batch.groups[perm], batch.attrs[perm], indicator)


def apply_moves(assignment: Assignment, moves: list[Move]) -> Assignment:
    """Apply balancer moves in order, returning a new Assignment."""
    new = assignment.copy()
    g2t = new.group_to_thread
    lists = new.thread_to_groups
    for mv in moves:
        if mv.placement not in (FRONT, BACK):
            raise InvalidConfigError(f"unknown placement {mv.placement!r}")
        if not (0 <= mv.src < new.n_threads and 0 <= mv.dst < new.n_threads):
            raise InvalidConfigError(f"move {mv} names a thread out of range")
        if not (0 <= mv.group < new.n_groups):
            raise InvalidConfigError(f"move {mv} names a group out of range")
        if int(g2t[mv.group]) != mv.src:
            raise StaleMoveError(
                f"group {mv.group} is on thread {int(g2t[mv.group])}, "
                f"not {mv.src}")
        lists[mv.src].remove(mv.group)
        if mv.placement == BACK:
            lists[mv.dst].append(mv.group)
        else:
            lists[mv.dst].insert(0, mv.group)
        g2t[mv.group] = mv.dst
    return new
