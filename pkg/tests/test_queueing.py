import numpy as np
import pytest

from swarmoff.model import Task
from swarmoff.queueing import (
    InService,
    QueueEntry,
    QueueFullError,
    QueuePositionError,
    ServerQueue,
)
from swarmoff.verify import _oracle_free0, _oracle_replay, _random_queue_state


def _entry(tid, arrival, t_com, d=1.0):
    task = Task(id=tid, robot_id=0, n=2e5, d=d, t_gen=max(0.0, arrival - 0.05))
    return QueueEntry(task=task, arrival_complete_at=arrival, t_com=t_com, enqueued_at=task.t_gen)


def test_ready_time_empty_queue():
    q = ServerQueue(capacity_M=10)
    assert q.ready_time(1, now=5.0) == 0.0


def test_ready_time_in_service_remainder():
    svc = InService(entry=_entry(1, arrival=0.0, t_com=1.0), started_at=4.6)
    q = ServerQueue(capacity_M=10, in_service=svc)
    assert q.ready_time(1, now=5.2) == pytest.approx(0.4)


def test_ready_time_three_entry_hand_trace():
    # derived step by step: service ends at 10.5; e1 waits for its upload
    # until 10.8, runs to 10.9; e2 is already uploaded, runs 10.9 -> 11.2;
    # e3 starts at 11.2
    svc = InService(entry=_entry(0, arrival=10.0, t_com=0.5), started_at=10.0)
    q = ServerQueue(
        capacity_M=10,
        in_service=svc,
        waiting=(
            _entry(1, arrival=10.8, t_com=0.1),
            _entry(2, arrival=10.2, t_com=0.3),
            _entry(3, arrival=12.0, t_com=0.2),
        ),
    )
    now = 10.1
    assert q.ready_time(1, now) == pytest.approx(0.4)
    assert q.ready_time(2, now) == pytest.approx(10.9 - now)
    assert q.ready_time(3, now) == pytest.approx(11.2 - now)
    assert q.ready_time(4, now) == pytest.approx(12.2 - now)  # waits on e3's upload


def test_ready_time_position_validation():
    q = ServerQueue(capacity_M=10)
    with pytest.raises(QueuePositionError):
        q.ready_time(2, now=0.0)
    with pytest.raises(QueuePositionError):
        q.ready_time(0, now=0.0)


def test_insert_shift_and_full_error():
    q = ServerQueue(capacity_M=2)
    q = q.insert(_entry(1, 0.0, 0.1), 1)
    assert [e.task.id for e in q.waiting] == [1]
    q = q.insert(_entry(2, 0.0, 0.1), 1)
    assert [e.task.id for e in q.waiting] == [2, 1]
    with pytest.raises(QueueFullError):
        q.insert(_entry(3, 0.0, 0.1), 1)
    # original object untouched (functional updates)
    assert q.length == 2


def test_tail_insert_preserves_ready_times():
    q = ServerQueue(
        capacity_M=10,
        waiting=(_entry(1, 0.0, 0.2), _entry(2, 0.5, 0.3)),
    )
    now = 1.0
    before = [q.ready_time(p, now) for p in (1, 2)]
    q2 = q.insert(_entry(9, now, 0.4), 3)
    after = [q2.ready_time(p, now) for p in (1, 2)]
    assert before == after


def test_complete_head_empty_waiting():
    svc = InService(entry=_entry(1, 0.0, 0.5), started_at=0.0)
    q = ServerQueue(capacity_M=10, in_service=svc)
    q2, finished = q.complete_head(now=0.5)
    assert finished.entry.task.id == 1
    assert q2.in_service is None and q2.waiting == ()


def test_complete_head_promotes_ready_upload():
    svc = InService(entry=_entry(1, 0.0, 0.5), started_at=0.0)
    q = ServerQueue(capacity_M=10, in_service=svc, waiting=(_entry(2, 0.2, 0.3),))
    q2, _ = q.complete_head(now=0.5)
    assert q2.in_service.entry.task.id == 2
    assert q2.in_service.started_at == pytest.approx(0.5)


def test_complete_head_idles_for_pending_upload():
    # derived two-event sequence: the head's upload lands at 0.9, after the
    # server frees at 0.5, so service starts exactly at 0.9
    svc = InService(entry=_entry(1, 0.0, 0.5), started_at=0.0)
    q = ServerQueue(capacity_M=10, in_service=svc, waiting=(_entry(2, 0.9, 0.3),))
    q2, _ = q.complete_head(now=0.5)
    assert q2.in_service.started_at == pytest.approx(0.9)
    assert q2.in_service.finishes_at == pytest.approx(1.2)


def test_complete_head_requires_elapsed_service():
    svc = InService(entry=_entry(1, 0.0, 0.5), started_at=0.0)
    q = ServerQueue(capacity_M=10, in_service=svc)
    with pytest.raises(RuntimeError):
        q.complete_head(now=0.2)
    with pytest.raises(RuntimeError):
        ServerQueue(capacity_M=10).complete_head(now=1.0)


def test_schedule_conservation_across_completion():
    svc = InService(entry=_entry(1, 0.0, 0.5), started_at=0.0)
    q = ServerQueue(
        capacity_M=10, in_service=svc, waiting=(_entry(2, 0.1, 0.3), _entry(3, 0.2, 0.2))
    )
    t_done = 0.5
    before = q.ready_time(2, t_done)
    q2, _ = q.complete_head(t_done)
    assert q2.ready_time(1, t_done) == pytest.approx(before)


def test_delta_delays_tail_insert_is_free():
    q = ServerQueue(capacity_M=10, waiting=(_entry(1, 0.0, 0.2), _entry(2, 0.0, 0.3)))
    deltas = q.delta_delays(_entry(9, 1.0, 0.4), 3, now=1.0)
    assert deltas == [(1, 0.0), (2, 0.0)]


def test_delta_delays_head_insert_shifts_everyone():
    # all uploads complete: a head cut-in delays each entry by exactly t_com
    q = ServerQueue(capacity_M=10, waiting=(_entry(1, 0.0, 0.2), _entry(2, 0.0, 0.3)))
    deltas = q.delta_delays(_entry(9, 1.0, 0.4), 1, now=1.0)
    assert [d for _, d in deltas] == pytest.approx([0.4, 0.4])


def test_delta_delays_can_fill_idle_gap():
    # the only waiting entry is stuck until its upload at t=2.0; a short task
    # cut in front runs inside the gap and disturbs nothing
    q = ServerQueue(capacity_M=10, waiting=(_entry(1, 2.0, 0.3),))
    deltas = q.delta_delays(_entry(9, 1.0, 0.5), 1, now=1.0)
    assert deltas == [(1, 0.0)]


def test_delta_delays_matches_full_recompute_oracle():
    rng = np.random.default_rng(123)
    for _ in range(300):
        now = float(rng.uniform(5.0, 50.0))
        q = _random_queue_state(rng, now, m=10, max_len=9)
        entry = _entry(777, now + float(rng.uniform(0, 0.3)), float(rng.uniform(0.05, 0.2)))
        pos = int(rng.integers(1, q.length + 2))
        deltas = q.delta_delays(entry, pos, now)
        free0 = _oracle_free0(q, now)
        before = _oracle_replay(q.waiting, free0)
        hyp = list(q.waiting)
        hyp.insert(pos - 1, entry)
        after = _oracle_replay(hyp, free0)
        del after[pos - 1]
        for (tid, t_add), e, old, new in zip(deltas, q.waiting, before, after):
            assert tid == e.task.id
            assert t_add >= 0.0
            assert t_add == pytest.approx(new[1] - old[1], abs=1e-12)
        # entries ahead of the cut are never disturbed
        for i in range(pos - 1):
            assert deltas[i][1] == 0.0


def test_ready_time_monotone_in_position():
    rng = np.random.default_rng(7)
    for _ in range(200):
        now = float(rng.uniform(5.0, 50.0))
        q = _random_queue_state(rng, now)
        rts = [q.ready_time(p, now) for p in range(1, q.length + 2)]
        assert all(b >= a - 1e-12 for a, b in zip(rts, rts[1:]))
        assert all(r >= 0.0 for r in rts)
