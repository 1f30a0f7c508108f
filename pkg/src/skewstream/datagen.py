"""Synthetic tuple streams for the aggregation engine.

A stream is a lazily generated sequence of (group, attr) pairs.  Three
families are supported: a round-robin uniform stream, a zipf-distributed
stream whose low group ids are the hot ones, and a label-permuted zipf
stream where the hot groups are scattered over the id space.  Generation
is chunked so arbitrarily long streams run in constant memory, and every
stream is replayable: iterating twice yields bit-identical data because
all randomness is keyed by DatasetSpec.seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .errors import DataError, InvalidSpecError

CHUNK = 1 << 16

# attr values cover the full signed 32-bit range
ATTR_LOW = -(1 << 31)
ATTR_HIGH = 1 << 31

REPLAY_DTYPE = np.dtype([("group", "<u4"), ("attr", "<i4")])


class Tuple(NamedTuple):
    group: int
    attr: int


class DatasetKind(Enum):
    UNIFORM = "uniform"
    ZIPF = "zipf"
    PERMUTED_ZIPF = "pzipf"


Chunk = tuple[np.ndarray, np.ndarray]


class TupleStream:
    """A replayable stream of tuples, exposed as (groups, attrs) chunks.

    Chunks are int64 arrays of equal length.  The stream knows its total
    length and group-id domain so downstream consumers can size their
    state without a first pass over the data.
    """

    def __init__(self, n_tuples: int, n_groups: int,
                 make_chunks: Callable[[], Iterator[Chunk]]):
        self.n_tuples = n_tuples
        self.n_groups = n_groups
        self._make_chunks = make_chunks

    def chunks(self) -> Iterator[Chunk]:
        """Start a fresh pass over the stream."""
        return self._make_chunks()

    def arrays(self) -> Chunk:
        """Materialize the whole stream; intended for tests and small runs."""
        gs, as_ = [], []
        for g, a in self.chunks():
            gs.append(g)
            as_.append(a)
        if not gs:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty.copy()
        return np.concatenate(gs), np.concatenate(as_)

    def tuples(self) -> Iterator[Tuple]:
        for g, a in self.chunks():
            for i in range(len(g)):
                yield Tuple(int(g[i]), int(a[i]))


@dataclass(frozen=True)
class DatasetSpec:
    """Description of a synthetic stream.

    zipf_exponent is ignored for uniform streams.  For the permuted kind
    the label permutation is seeded independently of the tuple draws so
    the same data can be studied under different labelings.
    """

    kind: DatasetKind
    n_tuples: int
    n_groups: int
    zipf_exponent: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_tuples < 0:
            raise InvalidSpecError(f"n_tuples must be >= 0, got {self.n_tuples}")
        if self.n_groups < 1:
            raise InvalidSpecError(f"n_groups must be >= 1, got {self.n_groups}")
        if self.kind is not DatasetKind.UNIFORM and self.zipf_exponent <= 0:
            raise InvalidSpecError(
                f"zipf_exponent must be > 0, got {self.zipf_exponent}")


@dataclass(frozen=True)
class Batch:
    """A fixed-size slice of a stream, kept as parallel arrays."""

    groups: np.ndarray
    attrs: np.ndarray
    index: int

    def __len__(self) -> int:
        return len(self.groups)

    def tuples(self) -> list[Tuple]:
        return [Tuple(int(g), int(a)) for g, a in zip(self.groups, self.attrs)]


def _chunk_sizes(n_tuples: int) -> Iterator[tuple[int, int]]:
    done = 0
    while done < n_tuples:
        m = min(CHUNK, n_tuples - done)
        yield done, m
        done += m


def gen_uniform(n_tuples: int, n_groups: int, seed: int = 0) -> TupleStream:
    """Round-robin groups: tuple i belongs to group i mod n_groups.

    Per-group counts over any prefix differ by at most one, which makes
    this the balanced control stream.
    """
    if n_tuples < 0 or n_groups < 1:
        raise InvalidSpecError("need n_tuples >= 0 and n_groups >= 1")

    def make() -> Iterator[Chunk]:
        rng = np.random.default_rng(seed)
        for off, m in _chunk_sizes(n_tuples):
            groups = (off + np.arange(m, dtype=np.int64)) % n_groups
            attrs = rng.integers(ATTR_LOW, ATTR_HIGH, size=m, dtype=np.int64)
            yield groups, attrs

    return TupleStream(n_tuples, n_groups, make)


def _zipf_cdf(n_groups: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, n_groups + 1, dtype=np.float64) ** (-exponent)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return cdf


def gen_zipf(n_tuples: int, n_groups: int, exponent: float = 1.0,
             seed: int = 0) -> TupleStream:
    """Skewed stream with P(group = g) proportional to (g + 1) ** -exponent.

    Sampling inverts a precomputed cumulative table with a binary search,
    so each draw costs O(log n_groups) and the table is built once.
    Group 0 is always the most frequent.
    """
    if n_tuples < 0 or n_groups < 1:
        raise InvalidSpecError("need n_tuples >= 0 and n_groups >= 1")
    if exponent <= 0:
        raise InvalidSpecError(f"zipf exponent must be > 0, got {exponent}")
    cdf = _zipf_cdf(n_groups, exponent)

    def make() -> Iterator[Chunk]:
        rng = np.random.default_rng(seed)
        for _, m in _chunk_sizes(n_tuples):
            u = rng.random(m)
            groups = np.searchsorted(cdf, u, side="right").astype(np.int64)
            attrs = rng.integers(ATTR_LOW, ATTR_HIGH, size=m, dtype=np.int64)
            yield groups, attrs

    return TupleStream(n_tuples, n_groups, make)


def relabel_groups(stream: TupleStream, permutation: np.ndarray) -> TupleStream:
    """Apply a group-label permutation; tuple order and attrs are untouched."""
    perm = np.asarray(permutation, dtype=np.int64)
    if perm.shape != (stream.n_groups,) or not np.array_equal(
            np.sort(perm), np.arange(stream.n_groups)):
        raise InvalidSpecError("permutation must be a bijection on group ids")

    def make() -> Iterator[Chunk]:
        for g, a in stream.chunks():
            yield perm[g], a

    return TupleStream(stream.n_tuples, stream.n_groups, make)


def permute_groups(spec: DatasetSpec, perm_seed: int) -> TupleStream:
    """Zipf stream from spec with labels shuffled by a seeded permutation."""
    if spec.kind is DatasetKind.UNIFORM:
        raise InvalidSpecError("permute_groups expects a zipf dataset spec")
    base = gen_zipf(spec.n_tuples, spec.n_groups, spec.zipf_exponent, spec.seed)
    perm = np.random.default_rng(perm_seed).permutation(spec.n_groups)
    return relabel_groups(base, perm)


def _derived_perm_seed(seed: int) -> np.random.SeedSequence:
    # independent of the tuple draws but still a pure function of the seed
    return np.random.SeedSequence(seed, spawn_key=(1,))


def stream_for(spec: DatasetSpec) -> TupleStream:
    """Build the stream a DatasetSpec describes."""
    if spec.kind is DatasetKind.UNIFORM:
        return gen_uniform(spec.n_tuples, spec.n_groups, spec.seed)
    if spec.kind is DatasetKind.ZIPF:
        return gen_zipf(spec.n_tuples, spec.n_groups, spec.zipf_exponent,
                        spec.seed)
    base = gen_zipf(spec.n_tuples, spec.n_groups, spec.zipf_exponent, spec.seed)
    perm = np.random.default_rng(_derived_perm_seed(spec.seed)).permutation(
        spec.n_groups)
    return relabel_groups(base, perm)


def batches(stream: TupleStream, batch_size: int) -> Iterator[Batch]:
    """Re-chunk a stream into consecutive batches of batch_size tuples.

    Every batch is full except possibly the last.  Batch indices count
    from zero.
    """
    if batch_size < 1:
        raise InvalidSpecError(f"batch_size must be >= 1, got {batch_size}")
    held_g: list[np.ndarray] = []
    held_a: list[np.ndarray] = []
    held = 0
    index = 0
    for g, a in stream.chunks():
        pos = 0
        while pos < len(g):
            take = min(batch_size - held, len(g) - pos)
            held_g.append(g[pos:pos + take])
            held_a.append(a[pos:pos + take])
            held += take
            pos += take
            if held == batch_size:
                yield Batch(np.concatenate(held_g), np.concatenate(held_a), index)
                held_g, held_a, held = [], [], 0
                index += 1
    if held:
        yield Batch(np.concatenate(held_g), np.concatenate(held_a), index)


def write_replay(stream: TupleStream, path: str | os.PathLike) -> int:
    """Dump a stream to a flat binary file of (u32 group, i32 attr) records.

    Little-endian, no header.  Returns the number of records written.
    """
    written = 0
    with open(path, "wb") as fh:
        for g, a in stream.chunks():
            if len(g) and (g.min() < 0 or g.max() >= 1 << 32):
                raise DataError("group id out of u32 range")
            if len(a) and (a.min() < ATTR_LOW or a.max() >= ATTR_HIGH):
                raise DataError("attr out of i32 range")
            rec = np.empty(len(g), dtype=REPLAY_DTYPE)
            rec["group"] = g
            rec["attr"] = a
            fh.write(rec.tobytes())
            written += len(g)
    return written


def read_replay(path: str | os.PathLike, n_groups: int | None = None) -> TupleStream:
    """Open a replay file written by write_replay as a stream.

    When n_groups is not given it is inferred as max(group) + 1, which
    costs one extra pass over the file.
    """
    size = os.path.getsize(path)
    if size % REPLAY_DTYPE.itemsize:
        raise DataError(
            f"replay file length {size} is not a multiple of "
            f"{REPLAY_DTYPE.itemsize} bytes")
    n_tuples = size // REPLAY_DTYPE.itemsize
    if n_groups is None:
        if n_tuples == 0:
            raise InvalidSpecError("empty replay file needs explicit n_groups")
        rec = np.memmap(path, dtype=REPLAY_DTYPE, mode="r")
        n_groups = int(rec["group"].max()) + 1
        del rec

    def make() -> Iterator[Chunk]:
        rec = np.memmap(path, dtype=REPLAY_DTYPE, mode="r")
        for off, m in _chunk_sizes(n_tuples):
            part = rec[off:off + m]
            yield (part["group"].astype(np.int64),
                   part["attr"].astype(np.int64))

    return TupleStream(n_tuples, n_groups, make)
