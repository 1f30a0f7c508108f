"""Dynamic load-balancing policies over per-thread group assignments.

Each policy inspects one batch's statistics and proposes group moves
that take effect from the next batch.  Four of them repeatedly pair the
most and least loaded threads (tracked by a min/max heap index) and
differ only in how the donor picks a group; the two shift variants relax
load along neighboring thread ids instead.  All policies honor a shared
contract: a group moves at most once per invocation, at most max_moves
moves are emitted, and returned moves are always legal against the
assignment they were computed from.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import InvalidConfigError
from .partition import (BACK, FRONT, Assignment, BatchStats, Move,
                        ReorderedBatch)


class Policy(Enum):
    NO_BALANCE = "no"
    GET_FIRST = "first"
    CHECK_ALL = "all"
    PROB_CHECK = "prob"
    BEST_BALANCE = "best"
    SHIFT = "shift"
    SHIFT_LOCAL = "shiftlocal"


@dataclass(frozen=True)
class BalancerConfig:
    """Tuning knobs shared by every policy.

    thread_threshold is the load gap (in tuples) considered acceptable;
    pot scales prob_check's stopping limit; max_moves defaults to
    4 * n_threads when left unset.
    """

    policy: Policy = Policy.NO_BALANCE
    thread_threshold: int = 1000
    pot: float = 0.5
    max_moves: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.policy, Policy):
            object.__setattr__(self, "policy", Policy(self.policy))
        if self.thread_threshold < 1:
            raise InvalidConfigError(
                f"thread_threshold must be >= 1, got {self.thread_threshold}")
        if not 0 < self.pot <= 1:
            raise InvalidConfigError(f"pot must be in (0, 1], got {self.pot}")
        if self.max_moves is not None and self.max_moves < 1:
            raise InvalidConfigError(
                f"max_moves must be >= 1, got {self.max_moves}")

    def resolved_max_moves(self, n_threads: int) -> int:
        return self.max_moves if self.max_moves is not None else 4 * n_threads


@dataclass(frozen=True)
class MoveList:
    """A policy's verdict for one batch.

    scanned_tuples counts tuple positions the policy examined while
    choosing, its main bookkeeping overhead.  final_tpt is the working
    per-thread load vector after simulating the emitted moves; applying
    the moves to the entry loads via group counts must reproduce it.
    """

    moves: list[Move]
    scanned_tuples: int
    final_tpt: np.ndarray


class LoadIndex:
    """Min and max views over per-thread loads with lazy invalidation.

    update() pushes fresh heap entries; argmin/argmax discard entries
    that disagree with the live load vector.  Ties resolve to the lowest
    thread id in both views.
    """

    def __init__(self, loads: list[int]):
        self.loads = list(loads)
        self._min = [(v, t) for t, v in enumerate(self.loads)]
        self._max = [(-v, t) for t, v in enumerate(self.loads)]
        heapq.heapify(self._min)
        heapq.heapify(self._max)

    def update(self, thread: int, load: int) -> None:
        self.loads[thread] = load
        heapq.heappush(self._min, (load, thread))
        heapq.heappush(self._max, (-load, thread))

    def argmin(self) -> int:
        h = self._min
        while h[0][0] != self.loads[h[0][1]]:
            heapq.heappop(h)
        return h[0][1]

    def argmax(self) -> int:
        h = self._max
        while -h[0][0] != self.loads[h[0][1]]:
            heapq.heappop(h)
        return h[0][1]


class _Working:
    """Copy-on-touch view of the per-thread group lists."""

    __slots__ = ("_orig", "_own")

    def __init__(self, thread_to_groups: list[list[int]]):
        self._orig = thread_to_groups
        self._own: dict[int, list[int]] = {}

    def view(self, t: int) -> list[int]:
        got = self._own.get(t)
        return got if got is not None else self._orig[t]

    def mutable(self, t: int) -> list[int]:
        got = self._own.get(t)
        if got is None:
            got = list(self._orig[t])
            self._own[t] = got
        return got


Picker = Callable[["LoadIndex", "_Working", set[int], int, int],
                  "tuple[int, int] | None"]


def _rebalance_extremes(stats: BatchStats, assignment: Assignment,
                        cfg: BalancerConfig, pick: Picker) -> MoveList:
    """Drain load from the hottest thread toward the coolest.

    pick returns (group, scanned_delta) or None when the donor has
    nothing useful to give, which ends the invocation.
    """
    idx = LoadIndex([int(x) for x in stats.tpt])
    cap = cfg.resolved_max_moves(assignment.n_threads)
    counts = stats.group_counts
    working = _Working(assignment.thread_to_groups)
    moved: set[int] = set()
    moves: list[Move] = []
    scanned = 0
    while len(moves) < cap:
        tmax = idx.argmax()
        tmin = idx.argmin()
        if idx.loads[tmax] - idx.loads[tmin] <= cfg.thread_threshold:
            break
        picked = pick(idx, working, moved, tmax, tmin)
        if picked is None:
            break
        g, delta = picked
        scanned += delta
        c = int(counts[g])
        working.mutable(tmax).remove(g)
        working.mutable(tmin).append(g)
        moves.append(Move(g, tmax, tmin, BACK))
        moved.add(g)
        idx.update(tmax, idx.loads[tmax] - c)
        idx.update(tmin, idx.loads[tmin] + c)
    return MoveList(moves, scanned, np.array(idx.loads, dtype=np.int64))


def no_balance(stats: BatchStats, assignment: Assignment,
               reordered: ReorderedBatch, cfg: BalancerConfig) -> MoveList:
    """Baseline: never move anything."""
    return MoveList([], 0, np.asarray(stats.tpt, dtype=np.int64).copy())


def get_first(stats: BatchStats, assignment: Assignment,
              reordered: ReorderedBatch, cfg: BalancerConfig) -> MoveList:
    """Hand over the donor's first listed group, no questions asked.

    Cheapest possible selection: no scanning at all.  If the first group
    already moved this invocation or carries no tuples, moving it gains
    nothing, so the invocation stops rather than searching deeper.
    """
    counts = stats.group_counts

    def pick(idx, working, moved, tmax, tmin):
        lst = working.view(tmax)
        if not lst:
            return None
        g = lst[0]
        if g in moved or int(counts[g]) == 0:
            return None
        return g, 0

    return _rebalance_extremes(stats, assignment, cfg, pick)


def check_all(stats: BatchStats, assignment: Assignment,
              reordered: ReorderedBatch, cfg: BalancerConfig) -> MoveList:
    """Give away the donor's heaviest group in this batch.

    Selection reads the precomputed group counts, but the accounted
    overhead is a scan of the donor's whole segment, which is what the
    selection costs without that table.  Ties go to the lower group id.
    """
    counts = stats.group_counts
    ind = reordered.indicator

    def pick(idx, working, moved, tmax, tmin):
        best_g = -1
        best_c = -1
        for g in working.view(tmax):
            if g in moved:
                continue
            c = int(counts[g])
            if c > best_c or (c == best_c and g < best_g):
                best_g, best_c = g, c
        if best_c <= 0:
            return None
        return best_g, int(ind[tmax + 1] - ind[tmax])

    return _rebalance_extremes(stats, assignment, cfg, pick)


def prob_check(stats: BatchStats, assignment: Assignment,
               reordered: ReorderedBatch, cfg: BalancerConfig) -> MoveList:
    """Scan the donor's segment until some group looks hot enough.

    The stopping limit is ceil(pot * load / owned_groups): a group whose
    running count reaches it is taken on the spot, so hot groups are
    found after a fraction of the segment.  If nothing reaches the limit
    the hottest group observed is taken instead.
    """

    def pick(idx, working, moved, tmax, tmin):
        owned = working.view(tmax)
        if not owned:
            return None
        limit = math.ceil(cfg.pot * idx.loads[tmax] / len(owned))
        lo, hi = int(reordered.indicator[tmax]), int(reordered.indicator[tmax + 1])
        seg = reordered.groups[lo:hi].tolist()
        seen: dict[int, int] = {}
        for pos, g in enumerate(seg, start=1):
            c = seen.get(g, 0) + 1
            seen[g] = c
            if c >= limit and g not in moved:
                return g, pos
        best_g = -1
        best_c = 0
        for g, c in seen.items():
            if g in moved:
                continue
            if c > best_c or (c == best_c and g < best_g):
                best_g, best_c = g, c
        if best_c <= 0:
            return None
        return best_g, len(seg)

    return _rebalance_extremes(stats, assignment, cfg, pick)


def best_balance(stats: BatchStats, assignment: Assignment,
                 reordered: ReorderedBatch, cfg: BalancerConfig) -> MoveList:
    """Pick the group that most evens out the extreme pair.

    Minimizes |(load_max - c) - (load_min + c)| over the donor's groups,
    ties to the lower id.  A move that fails to strictly shrink the gap
    is not worth the churn, so the invocation stops instead.
    """
    counts = stats.group_counts

    def pick(idx, working, moved, tmax, tmin):
        dmax = idx.loads[tmax]
        dmin = idx.loads[tmin]
        best_g = -1
        best_gap = -1
        for g in working.view(tmax):
            if g in moved:
                continue
            c = int(counts[g])
            gap = abs((dmax - c) - (dmin + c))
            if best_gap < 0 or gap < best_gap or (gap == best_gap and g < best_g):
                best_g, best_gap = g, gap
        if best_gap < 0 or best_gap >= dmax - dmin:
            return None
        return best_g, 0

    return _rebalance_extremes(stats, assignment, cfg, pick)


def shift(stats: BatchStats, assignment: Assignment,
          reordered: ReorderedBatch, cfg: BalancerConfig) -> MoveList:
    """Cascade groups one thread at a time toward the cool end.

    Each pass moves a boundary group between every adjacent pair on the
    id path from the coolest to the hottest thread, then re-evaluates
    the extremes.  Load flows only between neighbors, so convergence
    takes many passes when the hot spot sits far from the cold one.
    """
    loads = [int(x) for x in stats.tpt]
    counts = stats.group_counts
    cap = cfg.resolved_max_moves(assignment.n_threads)
    working = _Working(assignment.thread_to_groups)
    moved: set[int] = set()
    moves: list[Move] = []
    while len(moves) < cap:
        tmax = loads.index(max(loads))
        tmin = loads.index(min(loads))
        if loads[tmax] - loads[tmin] <= cfg.thread_threshold:
            break
        downhill = tmax > tmin
        span = range(tmin + 1, tmax + 1) if downhill else range(tmax, tmin)
        emitted = 0
        for i in span:
            if len(moves) >= cap:
                break
            lst = working.view(i)
            if not lst:
                continue
            g = lst[0] if downhill else lst[-1]
            if g in moved:
                continue
            dst = i - 1 if downhill else i + 1
            working.mutable(i).remove(g)
            if downhill:
                working.mutable(dst).append(g)
            else:
                working.mutable(dst).insert(0, g)
            c = int(counts[g])
            loads[i] -= c
            loads[dst] += c
            moves.append(Move(g, i, dst, BACK if downhill else FRONT))
            moved.add(g)
            emitted += 1
        if emitted == 0:
            break
    return MoveList(moves, 0, np.array(loads, dtype=np.int64))


def shift_local(stats: BatchStats, assignment: Assignment,
                reordered: ReorderedBatch, cfg: BalancerConfig) -> MoveList:
    """One sweep over adjacent thread pairs, no global view at all.

    For each pair (i, i+1) exceeding the threshold, one boundary group
    hops across; updates are immediate so a sweep can relax a slope by
    one step per pair.
    """
    loads = [int(x) for x in stats.tpt]
    counts = stats.group_counts
    cap = cfg.resolved_max_moves(assignment.n_threads)
    thr = cfg.thread_threshold
    working = _Working(assignment.thread_to_groups)
    moved: set[int] = set()
    moves: list[Move] = []
    for i in range(assignment.n_threads - 1):
        if len(moves) >= cap:
            break
        if loads[i] - loads[i + 1] > thr:
            src, dst, take_last = i, i + 1, True
        elif loads[i + 1] - loads[i] > thr:
            src, dst, take_last = i + 1, i, False
        else:
            continue
        lst = working.view(src)
        if not lst:
            continue
        g = lst[-1] if take_last else lst[0]
        if g in moved:
            continue
        working.mutable(src).remove(g)
        if take_last:
            working.mutable(dst).insert(0, g)
        else:
            working.mutable(dst).append(g)
        c = int(counts[g])
        loads[src] -= c
        loads[dst] += c
        moves.append(Move(g, src, dst, FRONT if take_last else BACK))
        moved.add(g)
    return MoveList(moves, 0, np.array(loads, dtype=np.int64))


POLICIES: dict[Policy, Callable[..., MoveList]] = {
    Policy.NO_BALANCE: no_balance,
    Policy.GET_FIRST: get_first,
    Policy.CHECK_ALL: check_all,
    Policy.PROB_CHECK: prob_check,
    Policy.BEST_BALANCE: best_balance,
    Policy.SHIFT: shift,
    Policy.SHIFT_LOCAL: shift_local,
}


def get_policy(policy: Policy | str) -> Callable[..., MoveList]:
    try:
        return POLICIES[Policy(policy)]
    except ValueError:
        names = ", ".join(p.value for p in Policy)
        raise InvalidConfigError(
            f"unknown policy {policy!r}; choose one of: {names}") from None
