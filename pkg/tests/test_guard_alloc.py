"""Allocation facade: accounting, era stamping, poison/quarantine oracle."""

import threading

import pytest

from conftest import in_thread, make_session


def test_alloc_accounting(backend):
    with make_session(backend, threads=1, alloc_mode="release") as s:
        base = s.alloc_stats()["live_bytes"]
        h = s.dbg_alloc(48)
        stats = s.alloc_stats()
        assert stats["live_bytes"] - base == 48 + s.header_size()
        assert stats["allocations"] >= 1
        s.dbg_free(h)
        assert s.alloc_stats()["live_bytes"] == base
        assert s.alloc_stats()["frees"] >= 1


def test_peaks_are_maxima(backend):
    with make_session(backend, threads=1, alloc_mode="release") as s:
        handles = [s.dbg_alloc(100) for _ in range(10)]
        peak = s.alloc_stats()["peak_live_bytes"]
        for h in handles:
            s.dbg_free(h)
        stats = s.alloc_stats()
        assert stats["peak_live_bytes"] == peak
        assert stats["peak_live_bytes"] >= stats["live_bytes"]


def test_birth_era_stamped_under_eras(backend):
    with make_session(backend, threads=1, scheme="he") as s:
        s.dbg_epoch_add(7)
        h = s.dbg_alloc(16)
        assert s.dbg_birth_era(h) == 7


def test_birth_era_zero_without_eras(backend):
    with make_session(backend, threads=1, scheme="hp") as s:
        s.dbg_epoch_add(7)
        h = s.dbg_alloc(16)
        assert s.dbg_birth_era(h) == 0


def test_poison_read_recorded(backend):
    with make_session(backend, threads=1, alloc_mode="validate") as s:
        h = s.dbg_alloc(16)
        s.dbg_write(h, 1234)
        assert s.dbg_checked_read(h) == 1234
        s.dbg_free(h)
        assert s.dbg_checked_read(h) == -1
        assert s.violation_kinds()["poison_access"] == 1


def test_double_free_detected(backend):
    with make_session(backend, threads=1, alloc_mode="validate") as s:
        h = s.dbg_alloc(16)
        s.dbg_free(h)
        s.dbg_free(h)
        assert s.violation_kinds()["double_free"] == 1


def test_release_mode_reads_are_plain(backend):
    with make_session(backend, threads=1, alloc_mode="release") as s:
        h = s.dbg_alloc(16)
        s.dbg_write(h, 7)
        assert s.dbg_checked_read(h) == 7
        assert s.violations() == 0


def test_quarantine_bounded(backend):
    cap = 64
    with make_session(backend, threads=1, alloc_mode="validate",
                      quarantine_cap=cap) as s:
        for _ in range(cap + 32):
            s.dbg_free(s.dbg_alloc(8))
        assert s.alloc_stats()["quarantined"] <= cap


def test_uaf_oracle_catches_unsafe_scheme(backend):
    """A scheme that frees on retire with no synchronization must produce
    recorded violations under concurrent load: the oracle test."""
    with make_session(backend, threads=3, scheme="unsafe", structure="hm_list",
                      alloc_mode="validate", key_range=64) as s:
        outs = []

        def work():
            tid = s.register()
            outs.append(s.worker_run(tid, 1.5, 50, 50, 7, prefill=0.5))

        ts = [threading.Thread(target=work) for _ in range(3)]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
        assert s.violations() > 0


def test_correct_scheme_is_clean_under_same_load(backend):
    with make_session(backend, threads=3, scheme="ebr", structure="hm_list",
                      alloc_mode="validate", key_range=64) as s:
        def work():
            tid = s.register()
            s.worker_run(tid, 0.5, 50, 50, 7, prefill=0.5)

        ts = [threading.Thread(target=work) for _ in range(3)]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
        assert s.violations() == 0


def test_stats_dump_keys(backend):
    with make_session(backend, threads=1) as s:
        stats = s.alloc_stats()
        assert set(stats) == {
            "live_bytes", "peak_live_bytes", "allocations", "frees",
            "quarantined", "peak_retired_nodes",
        }
