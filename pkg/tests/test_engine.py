import numpy as np
import pytest

from skewstream import (Batch, ConsistencyError, CostModel, ExecutionError,
                        InvalidConfigError, WindowStore, count_batch,
                        gen_zipf, ingest_sequence, ingest_tuple,
                        initial_assignment, process_batch_parallel,
                        process_batch_sim, reorder_batch, serial_reference)
from skewstream import engine
from skewstream.datagen import TupleStream
from skewstream.errors import DataError
from skewstream.partition import ReorderedBatch


def scalar_replay(store: WindowStore, groups, attrs,
                  model: CostModel) -> tuple[list[int], list[int]]:
    sums, costs = [], []
    for g, a in zip(groups, attrs):
        s, c = ingest_tuple(store, int(g), int(a), model)
        sums.append(s)
        costs.append(c)
    return sums, costs


def test_cost_model_validation() -> None:
    with pytest.raises(InvalidConfigError):
        CostModel(window_passes=0)
    with pytest.raises(InvalidConfigError):
        CostModel(per_element_cost=-1)
    with pytest.raises(InvalidConfigError):
        CostModel(per_tuple_overhead=-1)
    with pytest.raises(InvalidConfigError):
        CostModel(per_iteration_overhead=-1)


def test_window_store_validation() -> None:
    with pytest.raises(InvalidConfigError):
        WindowStore(0, 4)
    with pytest.raises(InvalidConfigError):
        WindowStore(4, 0)
    store = WindowStore(2, 3)
    assert store.contents(0).tolist() == []


def test_ingest_tuple_ring_eviction() -> None:
    store = WindowStore(1, 3)
    model = CostModel()
    for v in (5, 7, 9):
        ingest_tuple(store, 0, v, model)
    assert store.contents(0).tolist() == [5, 7, 9]
    assert int(store.next_pos[0]) == 0 and int(store.fill[0]) == 3
    s, cost = ingest_tuple(store, 0, 4, model)
    assert s == 20
    assert store.contents(0).tolist() == [7, 9, 4]
    assert int(store.next_pos[0]) == 1
    assert cost == 1 + 3


def test_ingest_tuple_first_element() -> None:
    store = WindowStore(1, 8)
    s, cost = ingest_tuple(store, 0, 42, CostModel())
    assert s == 42 and cost == 2
    assert int(store.fill[0]) == 1 and int(store.next_pos[0]) == 0


def test_ingest_tuple_full_window_cost() -> None:
    store = WindowStore(1, 100)
    model = CostModel()
    for v in range(100):
        ingest_tuple(store, 0, v, model)
    _, cost = ingest_tuple(store, 0, 1, model)
    assert cost == 101


def test_ingest_tuple_rejects_bad_group() -> None:
    store = WindowStore(2, 3)
    with pytest.raises(DataError):
        ingest_tuple(store, 2, 1, CostModel())
    with pytest.raises(DataError):
        ingest_tuple(store, -1, 1, CostModel())


def test_window_contents_exhaustive_small() -> None:
    model = CostModel()
    for w in (1, 2, 3, 5):
        for n in range(2 * w + 2):
            seq = list(range(1, n + 1))
            store = WindowStore(1, w)
            for v in seq:
                ingest_tuple(store, 0, v, model)
            assert store.contents(0).tolist() == seq[-w:]
            assert int(store.fill[0]) == min(n, w)
            if n < w:
                # a filling window never advances its eviction pointer
                assert int(store.next_pos[0]) == 0
            assert int(store.window_sum[0]) == sum(seq[-w:])

            batch_store = WindowStore(1, w)
            ingest_sequence(batch_store,
                            np.zeros(n, dtype=np.int64),
                            np.asarray(seq, dtype=np.int64))
            assert batch_store.state_equal(store)


def test_ingest_sequence_matches_scalar_everywhere() -> None:
    rng = np.random.default_rng(40)
    model = CostModel(window_passes=2, per_element_cost=3,
                      per_tuple_overhead=5)
    for _ in range(60):
        n_groups = int(rng.integers(1, 9))
        w = int(rng.choice([1, 2, 3, 7]))
        n = int(rng.integers(0, 300))
        groups = rng.integers(0, n_groups, size=n).astype(np.int64)
        attrs = rng.integers(-50, 50, size=n).astype(np.int64)

        ref = WindowStore(n_groups, w)
        ref_sums, ref_costs = scalar_replay(ref, groups, attrs, model)

        store = WindowStore(n_groups, w)
        cut = int(rng.integers(0, n + 1))
        sums, costs = [], []
        for lo, hi in ((0, cut), (cut, n)):
            s, c = ingest_sequence(store, groups[lo:hi], attrs[lo:hi], model,
                                   want_sums=True, want_costs=True)
            sums.extend(s.tolist())
            costs.extend(c.tolist())
        assert store.state_equal(ref)
        assert sums == ref_sums
        assert costs == ref_costs


def test_ingest_sequence_grouped_contract() -> None:
    store = WindowStore(4, 3)
    with pytest.raises(ConsistencyError):
        ingest_sequence(store, np.array([0, 1, 0]), np.array([1, 2, 3]),
                        assume_grouped=True)
    with pytest.raises(DataError):
        ingest_sequence(store, np.array([0, 9]), np.array([1, 2]))


def test_serial_reference_examples() -> None:
    one = TupleStream(1, 3, lambda: iter(
        [(np.array([1], dtype=np.int64), np.array([7], dtype=np.int64))]))
    store, trace = serial_reference(one, window=3)
    assert trace.groups.tolist() == [1] and trace.sums.tolist() == [7]

    ramp = TupleStream(5, 1, lambda: iter(
        [(np.zeros(5, dtype=np.int64),
          np.arange(1, 6, dtype=np.int64))]))
    store, trace = serial_reference(ramp, window=3)
    assert store.contents(0).tolist() == [3, 4, 5]
    assert trace.sums.tolist() == [1, 3, 6, 9, 12]
    with pytest.raises(InvalidConfigError):
        serial_reference(ramp, window=3, window_passes=0)


def make_reordered(segments: list[list[tuple[int, int]]]) -> ReorderedBatch:
    flat = [t for seg in segments for t in seg]
    groups = np.asarray([g for g, _ in flat], dtype=np.int64)
    attrs = np.asarray([a for _, a in flat], dtype=np.int64)
    indicator = np.zeros(len(segments) + 1, dtype=np.int64)
    np.cumsum([len(seg) for seg in segments], out=indicator[1:])
    return ReorderedBatch(groups, attrs, indicator)


def test_process_batch_sim_max_semantics() -> None:
    # window 1 makes every tuple cost the same, so segment length decides
    reordered = make_reordered([[(0, 1)] * 10, [(1, 1)] * 30])
    store = WindowStore(2, 1)
    rep = process_batch_sim(reordered, store, CostModel())
    assert rep.per_thread_cost.tolist() == [20, 60]
    assert rep.makespan == 60
    assert rep.tuples == 40
    assert rep.imbalance == 20


def test_process_batch_sim_empty_batch() -> None:
    reordered = make_reordered([[], []])
    store = WindowStore(2, 4)
    rep = process_batch_sim(reordered, store, CostModel(per_iteration_overhead=7))
    assert rep.per_thread_cost.tolist() == [0, 0]
    assert rep.makespan == 7
    assert rep.imbalance == 0


def test_process_batch_sim_full_window_rate() -> None:
    store = WindowStore(1, 100)
    ingest_sequence(store, np.zeros(100, dtype=np.int64),
                    np.arange(100, dtype=np.int64))
    reordered = make_reordered([[(0, 5)] * 20])
    rep = process_batch_sim(reordered, store, CostModel())
    assert rep.makespan == 20 * 101


def test_process_batch_sim_additivity_and_bounds() -> None:
    rng = np.random.default_rng(41)
    for _ in range(40):
        n_groups = int(rng.integers(1, 10))
        n_threads = int(rng.integers(1, 5))
        w = int(rng.choice([1, 3, 8]))
        n = int(rng.integers(1, 200))
        model = CostModel(window_passes=int(rng.integers(1, 4)))
        asg = initial_assignment(n_groups, min(n_threads, n_groups))
        groups = rng.integers(0, n_groups, size=n).astype(np.int64)
        batch = Batch(groups, rng.integers(-9, 9, size=n).astype(np.int64), 0)
        reordered = reorder_batch(batch, asg, count_batch(batch, asg))

        ref = WindowStore(n_groups, w)
        _, ref_costs = scalar_replay(ref, reordered.groups, reordered.attrs,
                                     model)
        store = WindowStore(n_groups, w)
        rep = process_batch_sim(reordered, store, model)
        assert store.state_equal(ref)
        ind = reordered.indicator
        for t in range(reordered.n_threads):
            assert rep.per_thread_cost[t] == sum(ref_costs[ind[t]:ind[t + 1]])
        total = sum(ref_costs)
        assert rep.makespan == rep.per_thread_cost.max()
        assert total / reordered.n_threads <= rep.makespan <= total


def test_pass_count_scales_scan_cost_only() -> None:
    for fill in (1, 5, 12):
        base = CostModel(window_passes=1)
        ten = CostModel(window_passes=10)
        store1 = WindowStore(1, 12)
        store10 = WindowStore(1, 12)
        seq = np.arange(fill, dtype=np.int64)
        z = np.zeros(fill, dtype=np.int64)
        _, c1 = ingest_sequence(store1, z, seq, base, want_costs=True)
        _, c10 = ingest_sequence(store10, z, seq, ten, want_costs=True)
        assert np.array_equal(c10 - base.per_tuple_overhead,
                              10 * (c1 - base.per_tuple_overhead))
        assert store1.state_equal(store10)


def test_parallel_matches_sim_exactly() -> None:
    rng = np.random.default_rng(42)
    stream = gen_zipf(4000, 64, seed=1)
    asg = initial_assignment(64, 16)
    groups, attrs = stream.arrays()
    for pool_size in (1, 3):
        sim_store = WindowStore(64, 5)
        par_store = WindowStore(64, 5)
        sim_trace = engine.TraceBuffer()
        par_trace = engine.TraceBuffer()
        for lo in range(0, 4000, 500):
            batch = Batch(groups[lo:lo + 500], attrs[lo:lo + 500], lo // 500)
            reordered = reorder_batch(batch, asg, count_batch(batch, asg))
            process_batch_sim(reordered, sim_store, CostModel(), sim_trace)
            rep = process_batch_parallel(reordered, par_store, pool_size,
                                         trace=par_trace)
            assert (rep.per_thread_cost >= 0).all()
            assert rep.makespan >= 0 and rep.tuples == 500
        assert par_store.state_equal(sim_store)
        a, b = sim_trace.build(), par_trace.build()
        assert np.array_equal(a.groups, b.groups)
        assert np.array_equal(a.sums, b.sums)


def test_parallel_rejects_bad_inputs() -> None:
    reordered = make_reordered([[(0, 1)], [(9, 1)]])
    with pytest.raises(DataError):
        process_batch_parallel(reordered, WindowStore(2, 3), pool_size=2)
    with pytest.raises(InvalidConfigError):
        process_batch_parallel(make_reordered([[(0, 1)]]), WindowStore(1, 3),
                               pool_size=0)


def test_parallel_worker_failure_surfaces(monkeypatch) -> None:
    def boom(*args) -> None:
        raise RuntimeError("segment exploded")

    monkeypatch.setattr(engine, "_run_segment", boom)
    reordered = make_reordered([[(0, 1)], [(1, 2)]])
    with pytest.raises(ExecutionError, match="segment exploded"):
        process_batch_parallel(reordered, WindowStore(2, 3), pool_size=2)


def test_trace_grouped_projection_regroups_stably() -> None:
    trace = engine.AggregateTrace(np.array([2, 0, 2, 1, 0]),
                                  np.array([10, 20, 30, 40, 50]))
    g, s = trace.grouped_projection()
    assert g.tolist() == [0, 0, 1, 2, 2]
    assert s.tolist() == [20, 50, 40, 10, 30]
    assert trace.for_group(2).tolist() == [10, 30]
