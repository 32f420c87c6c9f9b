"""Session over the compiled core: real directed signals, handler-driven
publication, and non-local read-phase restarts."""

from __future__ import annotations

import ctypes
import os
import threading

from . import _ffi
from .descriptors import (
    ALLOC_STAT_NAMES,
    COUNTER_NAMES,
    VIOLATION_KINDS,
    AlreadyRegistered,
    RegistryFull,
    SCHEMES,
    STRUCTURES,
    SessionConfig,
    TrialAborted,
)

_session_lock = threading.Lock()


def signum() -> int:
    lib = _ffi.load()
    return lib.rb_env_init(int(os.environ.get("RECLAIM_SIGNUM", "0") or 0))


class CSession:
    """One configured trial: registry + allocator + scheme + structure.

    The core holds a single process-wide session, so these cannot be nested;
    always close() (or use as a context manager).  close() tears the shared
    structure down, so join every worker thread first.
    """

    backend = "c"

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self._lib = _ffi.load()
        self._lib.rb_env_init(int(os.environ.get("RECLAIM_SIGNUM", "0") or 0))
        ccfg = _ffi.CoreConfig(
            max_threads=cfg.threads,
            scheme=SCHEMES[cfg.scheme],
            structure=STRUCTURES[cfg.structure],
            alloc_validate=1 if cfg.alloc_mode == "validate" else 0,
            key_range=cfg.key_range,
            buckets=cfg.buckets,
            max_hp=cfg.max_hp,
            max_he=cfg.max_he,
            reclaim_freq=cfg.effective_reclaim_freq,
            epoch_freq=cfg.epoch_freq,
            nbr_hi_wm=cfg.nbr_hi_watermark,
            nbr_lo_frac=cfg.nbr_lo_fraction,
            nbr_scan_amort=cfg.nbr_scan_amortization,
            nbr_max_res=cfg.nbr_max_reservations,
            epochpop_c=cfg.epochpop_c,
            delay_ns=cfg.post_broadcast_delay_ns,
            quarantine_cap=cfg.quarantine_cap,
            hm_restart_from_head=cfg.hm_restart_from_head,
            mem_budget_bytes=cfg.mem_budget_bytes,
        )
        if not _session_lock.acquire(timeout=60):
            raise RuntimeError("another core session is still open")
        rc = self._lib.rb_session_open(ctypes.byref(ccfg))
        if rc != 0:
            _session_lock.release()
            raise RuntimeError(f"session open failed: {rc}")
        self._open = True

    # -- lifecycle -------------------------------------------------------
    def close(self):
        if self._open:
            self._lib.rb_session_close()
            self._open = False
            _session_lock.release()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- registry / signal bus --------------------------------------------
    def register(self, handler_kind: int = -1) -> int:
        tid = self._lib.rb_register(handler_kind)
        if tid == -1:
            raise RegistryFull(f"registry holds {self.cfg.threads} threads")
        if tid == -2:
            raise AlreadyRegistered("calling thread already holds a tid")
        if tid < 0:
            raise RuntimeError(f"register failed: {tid}")
        return tid

    def mark_done(self, tid: int):
        self._lib.rb_mark_self_done(tid)

    def alive(self, tid: int) -> bool:
        return bool(self._lib.rb_alive(tid))

    def handler_kind(self, tid: int) -> int:
        return self._lib.rb_handler_kind_of(tid)

    def broadcast(self, tid: int) -> int:
        n = self._lib.rb_broadcast(tid)
        if n < 0:
            raise ValueError(f"bad broadcaster tid {tid}")
        return n

    def post_broadcast_delay(self):
        self._lib.rb_post_broadcast_delay()

    def checkpoint_probe(self, tid: int, spin_s: float) -> tuple[int, bool]:
        r = ctypes.c_int32()
        m = ctypes.c_int32()
        rc = self._lib.rb_checkpoint_probe(
            tid, int(spin_s * 1e9), ctypes.byref(r), ctypes.byref(m)
        )
        if rc != 0:
            raise RuntimeError("probe must run on the registered thread")
        return r.value, bool(m.value)

    def restartable(self, tid: int) -> bool:
        return bool(self._lib.rb_restartable(tid))

    def publish_counter(self, tid: int) -> int:
        return self._lib.rb_publish_counter(tid)

    def announce_ts(self, tid: int) -> int:
        return self._lib.rb_announce_ts(tid)

    def bag_size(self, tid: int) -> int:
        return self._lib.rb_bag_size(tid)

    # -- set operations ----------------------------------------------------
    def _check(self, rc: int) -> bool:
        if rc == -2:
            raise TrialAborted(f"violations={self.violations()}")
        return rc == 1

    def insert(self, tid: int, key: int) -> bool:
        return self._check(self._lib.rb_ds_insert(tid, key))

    def delete(self, tid: int, key: int) -> bool:
        return self._check(self._lib.rb_ds_delete(tid, key))

    def contains(self, tid: int, key: int) -> bool:
        return self._check(self._lib.rb_ds_contains(tid, key))

    def size(self) -> int:
        return self._lib.rb_ds_size_seq()

    def check_structure(self) -> bool:
        return bool(self._lib.rb_ds_check_seq())

    # -- bench -------------------------------------------------------------
    def worker_run(
        self,
        tid: int,
        duration_s: float,
        insert_pct: int,
        delete_pct: int,
        seed: int,
        stall: bool = False,
        prefill: float = 0.0,
    ) -> dict:
        out = (ctypes.c_uint64 * 8)()
        rc = self._lib.rb_worker_run(
            tid, duration_s, insert_pct, delete_pct, seed, int(stall), prefill, out
        )
        if rc != 0:
            raise RuntimeError("worker_run must run on the registered thread")
        return {
            "ops": out[0],
            "inserts_ok": out[1],
            "deletes_ok": out[2],
            "contains_true": out[3],
            "actual_s": out[4] / 1e9,
            "prefilled": out[5],
            "aborted": bool(out[6]),
        }

    def opstream(self, seed: int, tid: int, insert_pct: int, delete_pct: int, n: int):
        kinds = (ctypes.c_uint8 * n)()
        keys = (ctypes.c_uint64 * n)()
        self._lib.rb_opstream(
            seed, tid, insert_pct, delete_pct, self.cfg.key_range, n, kinds, keys
        )
        return [(int(kinds[i]), int(keys[i])) for i in range(n)]

    # -- allocator / stats ---------------------------------------------------
    def header_size(self) -> int:
        return self._lib.rb_header_size()

    def dbg_alloc(self, payload: int) -> int:
        return self._lib.rb_dbg_alloc(payload)

    def dbg_free(self, handle: int, tid: int = 0):
        self._lib.rb_dbg_free(handle, tid)

    def dbg_checked_read(self, handle: int, tid: int = 0) -> int:
        return self._lib.rb_dbg_checked_read(handle, tid)

    def dbg_write(self, handle: int, value: int):
        self._lib.rb_dbg_write(handle, value)

    def dbg_retire(self, tid: int, handle: int):
        self._lib.rb_dbg_retire(tid, handle)

    def dbg_phase(self, tid: int, enter: bool):
        self._lib.rb_dbg_phase(tid, int(enter))

    def dbg_birth_era(self, handle: int) -> int:
        return self._lib.rb_dbg_birth_era(handle)

    def epoch(self) -> int:
        return self._lib.rb_epoch()

    def dbg_epoch_add(self, n: int):
        self._lib.rb_dbg_epoch_add(n)

    def he_can_free(self, birth: int, retire: int, eras) -> bool:
        arr = (ctypes.c_uint64 * len(eras))(*eras)
        return bool(self._lib.rb_he_can_free(birth, retire, arr, len(eras)))

    def counters(self) -> dict:
        out = (ctypes.c_uint64 * 16)()
        self._lib.rb_counters(out)
        return dict(zip(COUNTER_NAMES, [int(x) for x in out[: len(COUNTER_NAMES)]]))

    def alloc_stats(self) -> dict:
        out = (ctypes.c_uint64 * 6)()
        self._lib.rb_alloc_stats(out)
        return dict(zip(ALLOC_STAT_NAMES, [int(x) for x in out]))

    def violations(self) -> int:
        return int(self._lib.rb_violations())

    def violation_kinds(self) -> dict:
        out = (ctypes.c_uint64 * len(VIOLATION_KINDS))()
        self._lib.rb_violation_kinds(out)
        return dict(zip(VIOLATION_KINDS, [int(x) for x in out]))

    def stop(self):
        self._lib.rb_stop()

    def stats_dump(self) -> str:
        pairs = {**self.alloc_stats(), **self.counters()}
        return "\n".join(f"{k}={v}" for k, v in pairs.items())


def sigprobe(samples: int, pin: bool = True) -> dict:
    """Directed-signal latency: send-call cost and send-to-handler-entry."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    lib = _ffi.load()
    lib.rb_env_init(int(os.environ.get("RECLAIM_SIGNUM", "0") or 0))
    send = (ctypes.c_int64 * samples)()
    e2e = (ctypes.c_int64 * samples)()
    rc = lib.rb_sigprobe(samples, int(pin), send, e2e)
    if rc < 0:
        raise RuntimeError(f"sigprobe failed: {rc}")
    return {
        "send_ns": [int(x) for x in send],
        "e2e_ns": [int(x) for x in e2e],
        "pinned": rc == 0,
    }
