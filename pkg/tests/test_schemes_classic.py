"""Hazard-pointer, era, and epoch scheme protocols.

Interleaving-sensitive checks run on the Python twin, which exposes hook
points and per-thread state; pure predicates are cross-checked against the
compiled core and a brute-force oracle.
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BACKENDS, in_thread, make_session
from reclaimbench import SessionConfig
from reclaimbench.pybackend import ERA_NONE, PySession, he_can_free


def py_session(**kw):
    base = dict(threads=2, scheme="hp", structure="hm_list", alloc_mode="validate",
                key_range=64, reclaim_freq=8, epoch_freq=4, quarantine_cap=1024,
                mem_budget_bytes=0)
    base.update(kw)
    return PySession(SessionConfig(**base))


# --- pointer reservations ------------------------------------------------------


def test_hp_read_stable_source_publishes_once():
    s = py_session()
    tid = in_thread(s.register)
    cell = {"v": object()}
    got = s.read(tid, lambda: cell["v"], 0)
    assert got is cell["v"]
    assert s.th[tid].fences == 1
    assert s.th[tid].shared_res[0] is cell["v"]


def test_hp_read_retries_when_source_moves():
    s = py_session()
    tid = in_thread(s.register)
    first, second = object(), object()
    cell = {"v": first}
    swapped = {"done": False}

    def swap_once():
        if not swapped["done"]:
            swapped["done"] = True
            cell["v"] = second

    s.hooks["hp_between_load_and_publish"] = swap_once
    got = s.read(tid, lambda: cell["v"], 0)
    assert got is second
    assert s.th[tid].fences == 2  # one publish per iteration
    assert s.th[tid].shared_res[0] is second


def test_hp_read_null_source():
    s = py_session()
    tid = in_thread(s.register)
    assert s.read(tid, lambda: None, 0) is None
    assert s.th[tid].shared_res[0] is None


def test_hp_retire_below_threshold_only_appends():
    s = py_session(reclaim_freq=8)
    tid = in_thread(s.register)
    for _ in range(7):
        s.retire(tid, s.dbg_alloc(8))
    assert s.bag_size(tid) == 7
    assert s.alloc_stats()["frees"] == 0


def test_hp_retire_threshold_frees_all_unreserved():
    s = py_session(reclaim_freq=8)
    tid = in_thread(s.register)
    for _ in range(8):
        s.retire(tid, s.dbg_alloc(8))
    assert s.bag_size(tid) == 0
    assert s.alloc_stats()["frees"] == 8


def test_hp_retire_keeps_peer_reservation():
    s = py_session(reclaim_freq=8, threads=2)
    t0 = in_thread(s.register)
    t1 = in_thread(s.register)
    pinned = s.dbg_alloc(8)
    s.th[t1].shared_res[0] = pinned  # peer holds a published reservation
    s.retire(t0, pinned)
    for _ in range(7):
        s.retire(t0, s.dbg_alloc(8))
    assert s.bag_size(t0) == 1
    assert s.th[t0].bag[0] is pinned
    # once the peer clears, the pass at the next threshold frees it
    s.th[t1].shared_res[0] = None
    for _ in range(7):
        s.retire(t0, s.dbg_alloc(8))
    assert s.bag_size(t0) == 0


def test_hp_clear_is_idempotent():
    s = py_session()
    tid = in_thread(s.register)
    node = s.dbg_alloc(8)
    s.read(tid, lambda: node, 0)
    s.op_end(tid)
    assert s.th[tid].shared_res == [None] * len(s.th[tid].shared_res)
    s.op_end(tid)
    assert s.th[tid].shared_res == [None] * len(s.th[tid].shared_res)


# --- era reservations ------------------------------------------------------------


def test_he_read_skips_publish_when_epoch_stable():
    s = py_session(scheme="he")
    tid = in_thread(s.register)
    node = s.dbg_alloc(8)
    s.read(tid, lambda: node, 0)  # fresh slot publishes once
    assert s.th[tid].fences == 1
    s.read(tid, lambda: node, 0)  # same epoch: no new publish
    assert s.th[tid].fences == 1


def test_he_read_publishes_on_epoch_change():
    s = py_session(scheme="he")
    tid = in_thread(s.register)
    node = s.dbg_alloc(8)
    s.read(tid, lambda: node, 0)
    s.dbg_epoch_add(1)
    s.read(tid, lambda: node, 0)
    assert s.th[tid].fences == 2
    assert s.th[tid].shared_res[0] == s.epoch


def test_he_can_free_spec_values(backend):
    with make_session(backend, threads=1, scheme="he") as s:
        # free when the sole reserved era misses the lifespan entirely
        assert s.he_can_free(0, 0, [2]) is True
        # an era inside [birth, retire] blocks freeing
        assert s.he_can_free(2, 5, [3]) is False
        # empty reservation table frees everything
        assert s.he_can_free(3, 9, [ERA_NONE, ERA_NONE]) is True


@settings(max_examples=300, deadline=None)
@given(
    be=st.integers(0, 16),
    span=st.integers(0, 16),
    eras=st.lists(
        st.one_of(st.integers(0, 16), st.just(ERA_NONE)), min_size=0, max_size=9
    ),
)
def test_he_can_free_matches_brute_force(be, span, eras):
    re_ = be + span
    expected = not any(e != ERA_NONE and be <= e <= re_ for e in eras)
    assert he_can_free(be, re_, eras) == expected
    if "c" in BACKENDS:
        from reclaimbench import _ffi
        import ctypes

        lib = _ffi.load()
        arr = (ctypes.c_uint64 * max(1, len(eras)))(*(eras or [ERA_NONE]))
        got = bool(lib.rb_he_can_free(be, re_, arr, len(eras)))
        assert got == expected


def test_he_retire_bumps_epoch_and_frees():
    s = py_session(scheme="he", reclaim_freq=4)
    tid = in_thread(s.register)
    e0 = s.epoch
    for _ in range(4):
        s.retire(tid, s.dbg_alloc(8))
    assert s.epoch == e0 + 1  # one bump per reclamation pass
    assert s.bag_size(tid) == 0


def test_he_retire_keeps_overlapping_era():
    s = py_session(scheme="he", reclaim_freq=4, threads=2)
    t0 = in_thread(s.register)
    t1 = in_thread(s.register)
    s.th[t1].shared_res[0] = s.epoch  # peer parked on the current era
    victims = [s.dbg_alloc(8) for _ in range(4)]
    for v in victims:
        s.retire(t0, v)
    # all four lifespans contain the peer's reserved era
    assert s.bag_size(t0) == 4
    s.th[t1].shared_res[0] = ERA_NONE
    s.retire(t0, s.dbg_alloc(8))  # bag is over threshold: one retire flushes
    assert s.bag_size(t0) == 0


# --- epochs ------------------------------------------------------------------------


def test_ebr_epoch_bumps_every_freq_ops():
    s = py_session(scheme="ebr", epoch_freq=100)
    tid = in_thread(s.register)
    e0 = s.epoch
    for _ in range(99):
        s.op_begin(tid)
        s.op_end(tid)
    assert s.epoch == e0
    s.op_begin(tid)  # the 100th bumps
    s.op_end(tid)
    assert s.epoch == e0 + 1


def test_ebr_end_op_goes_quiescent():
    s = py_session(scheme="ebr")
    tid = in_thread(s.register)
    s.op_begin(tid)
    assert s.th[tid].reserved_epoch == s.epoch
    s.op_end(tid)
    assert s.th[tid].reserved_epoch == (1 << 64) - 1


def test_ebr_strict_less_than_boundary():
    s = py_session(scheme="ebr", threads=2, reclaim_freq=4)
    t0 = in_thread(s.register)
    t1 = in_thread(s.register)
    s.th[t1].reserved_epoch = 5
    below, at = s.dbg_alloc(8), s.dbg_alloc(8)
    s.th[t0].bag = [below, at]
    below.retire_era, at.retire_era = 3, 5
    below.retired = at.retired = True
    s._ebr_pass(t0)
    assert s.th[t0].bag == [at]  # retire_era == min survives; < min freed


def test_ebr_parked_thread_blocks_reclamation():
    """The documented non-robustness: one pinned epoch starves reclamation."""
    s = py_session(scheme="ebr", threads=2, reclaim_freq=16)
    t0 = in_thread(s.register)
    t1 = in_thread(s.register)
    s.th[t1].reserved_epoch = 0  # parked forever at epoch 0
    for _ in range(400):
        s.op_begin(t0)
        s.retire(t0, s.dbg_alloc(8))
        s.op_end(t0)
    assert s.counters()["peak_retired_nodes"] >= 10 * 16
    assert s.alloc_stats()["frees"] == 0
