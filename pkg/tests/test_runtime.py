"""Registry, signal bus, delay, and checkpoint machinery."""

import time

import pytest

from conftest import in_thread, join, make_session, spawn
from reclaimbench import AlreadyRegistered, RegistryFull


def test_register_dense_tids(backend):
    with make_session(backend, threads=4) as s:
        tids = sorted(in_thread(s.register) for _ in range(4))
        assert tids == [0, 1, 2, 3]


def test_register_full(backend):
    with make_session(backend, threads=2) as s:
        in_thread(s.register)
        in_thread(s.register)
        with pytest.raises(RegistryFull):
            in_thread(s.register)


def test_register_twice_same_thread(backend):
    with make_session(backend, threads=4) as s:

        def twice():
            s.register()
            s.register()

        with pytest.raises(AlreadyRegistered):
            in_thread(twice)


def test_broadcast_counts_all_alive(backend):
    with make_session(backend, threads=4, scheme="pophp") as s:
        for _ in range(4):
            in_thread(s.register)
        if backend == "c":
            assert s.broadcast(2) == 3
            assert s.counters()["signals_sent"] == 3
        else:
            # virtual sends need live polling peers; exercised in the pop tests
            s.mark_done(1), s.mark_done(2), s.mark_done(3)
            assert s.broadcast(0) == 0


def test_broadcast_skips_terminated_peer(backend):
    with make_session(backend, threads=4, scheme="pophp") as s:
        for _ in range(4):
            in_thread(s.register)
        s.mark_done(3)  # thread 3 has terminated
        if backend == "c":
            assert s.broadcast(0) == 2
        assert not s.alive(3)


def test_broadcast_alone_is_zero(backend):
    with make_session(backend, threads=1) as s:
        in_thread(s.register)
        assert s.broadcast(0) == 0


def test_broadcast_bad_tid(backend):
    with make_session(backend, threads=2) as s:
        in_thread(s.register)
        with pytest.raises(ValueError):
            s.broadcast(7)


@pytest.mark.parametrize("delay_ns,floor_s", [(1_000, 1e-6), (0, 0.0), (10_000, 1e-5)])
def test_post_broadcast_delay(backend, delay_ns, floor_s):
    with make_session(backend, post_broadcast_delay_ns=delay_ns) as s:
        t0 = time.monotonic()
        s.post_broadcast_delay()
        assert time.monotonic() - t0 >= floor_s


def test_checkpoint_restart_per_broadcast(backend):
    """Each broadcast neutralizes the spinning reader exactly once, the
    signal mask is restored after every restore, and no signal is lost."""
    with make_session(backend, threads=2, scheme="nbr") as s:

        def reader():
            tid = s.register()
            return s.checkpoint_probe(tid, 1.0)

        t, box = spawn(reader)
        time.sleep(0.05)
        sender = in_thread(s.register)
        sent = 0
        for _ in range(4):
            sent += 1 if s.broadcast(sender) == 1 else 0
            time.sleep(0.08)
        restarts, mask_ok = join(t, box)
        assert restarts == 4 == sent
        assert mask_ok
        c = s.counters()
        assert c["handler_entries"] == c["signals_sent"] == c["signals_received"] == 4
        assert c["restarts"] == 4


def test_checkpoint_without_signal_runs_straight(backend):
    with make_session(backend, threads=1, scheme="nbr") as s:

        def reader():
            tid = s.register()
            return s.checkpoint_probe(tid, 0.01)

        restarts, mask_ok = in_thread(reader)
        assert restarts == 0 and mask_ok


def test_quiescent_thread_ignores_signal(backend):
    """Between operations (restartable false) the handler returns without
    transferring control."""
    with make_session(backend, threads=2, scheme="nbr") as s:
        stop = {"v": False}

        def idle():
            tid = s.register()
            while not stop["v"]:
                if backend == "py":
                    s.poll(tid)
                time.sleep(0.005)

        t, box = spawn(idle)
        time.sleep(0.05)
        sender = in_thread(s.register)
        assert s.broadcast(sender) == 1
        time.sleep(0.1)
        stop["v"] = True
        join(t, box)
        c = s.counters()
        assert c["handler_entries"] == 1
        assert c["restarts"] == 0
