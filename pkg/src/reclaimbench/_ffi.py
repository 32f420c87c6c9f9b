"""ctypes binding to the compiled core.

The extension module only exists to carry the shared object; every call goes
through ctypes, which also drops the GIL for the duration of each call (the
worker loops and signal handling rely on that).
"""

from __future__ import annotations

import ctypes
from pathlib import Path

_c = ctypes


class CoreConfig(_c.Structure):
    _fields_ = [
        ("max_threads", _c.c_int32),
        ("scheme", _c.c_int32),
        ("structure", _c.c_int32),
        ("alloc_validate", _c.c_int32),
        ("key_range", _c.c_uint64),
        ("buckets", _c.c_int32),
        ("max_hp", _c.c_int32),
        ("max_he", _c.c_int32),
        ("reclaim_freq", _c.c_int64),
        ("epoch_freq", _c.c_int64),
        ("nbr_hi_wm", _c.c_int64),
        ("nbr_lo_frac", _c.c_double),
        ("nbr_scan_amort", _c.c_int32),
        ("nbr_max_res", _c.c_int32),
        ("epochpop_c", _c.c_double),
        ("delay_ns", _c.c_int64),
        ("quarantine_cap", _c.c_int64),
        ("hm_restart_from_head", _c.c_int32),
        ("mem_budget_bytes", _c.c_uint64),
    ]


def _find_core() -> Path:
    here = Path(__file__).parent
    hits = sorted(here.glob("_core*.so"))
    if not hits:
        raise OSError("compiled core not built (run `pip install -e .`)")
    return hits[0]


_SIGS = {
    "rb_env_init": (_c.c_int, [_c.c_int]),
    "rb_session_open": (_c.c_int, [_c.POINTER(CoreConfig)]),
    "rb_session_close": (None, []),
    "rb_session_active": (_c.c_int, []),
    "rb_register": (_c.c_int, [_c.c_int]),
    "rb_mark_self_done": (_c.c_int, [_c.c_int]),
    "rb_forget_thread_binding": (_c.c_int, []),
    "rb_broadcast": (_c.c_int, [_c.c_int]),
    "rb_post_broadcast_delay": (None, []),
    "rb_alive": (_c.c_int, [_c.c_int]),
    "rb_handler_kind_of": (_c.c_int, [_c.c_int]),
    "rb_counters": (None, [_c.POINTER(_c.c_uint64)]),
    "rb_violations": (_c.c_int64, []),
    "rb_violation_kinds": (None, [_c.POINTER(_c.c_uint64)]),
    "rb_stop": (None, []),
    "rb_checkpoint_probe": (
        _c.c_int,
        [_c.c_int, _c.c_int64, _c.POINTER(_c.c_int32), _c.POINTER(_c.c_int32)],
    ),
    "rb_sigprobe": (
        _c.c_int,
        [_c.c_int, _c.c_int, _c.POINTER(_c.c_int64), _c.POINTER(_c.c_int64)],
    ),
    "rb_header_size": (_c.c_uint32, []),
    "rb_dbg_alloc": (_c.c_uint64, [_c.c_uint32]),
    "rb_dbg_free": (None, [_c.c_uint64, _c.c_int]),
    "rb_dbg_checked_read": (_c.c_int64, [_c.c_uint64, _c.c_int]),
    "rb_dbg_write": (None, [_c.c_uint64, _c.c_uint64]),
    "rb_dbg_retire": (None, [_c.c_int, _c.c_uint64]),
    "rb_dbg_phase": (None, [_c.c_int, _c.c_int]),
    "rb_dbg_birth_era": (_c.c_uint64, [_c.c_uint64]),
    "rb_dbg_epoch_add": (None, [_c.c_uint64]),
    "rb_epoch": (_c.c_uint64, []),
    "rb_alloc_stats": (None, [_c.POINTER(_c.c_uint64)]),
    "rb_he_can_free": (
        _c.c_int,
        [_c.c_uint64, _c.c_uint64, _c.POINTER(_c.c_uint64), _c.c_int],
    ),
    "rb_bag_size": (_c.c_int64, [_c.c_int]),
    "rb_publish_counter": (_c.c_uint64, [_c.c_int]),
    "rb_announce_ts": (_c.c_uint64, [_c.c_int]),
    "rb_restartable": (_c.c_int, [_c.c_int]),
    "rb_ds_insert": (_c.c_int, [_c.c_int, _c.c_uint64]),
    "rb_ds_delete": (_c.c_int, [_c.c_int, _c.c_uint64]),
    "rb_ds_contains": (_c.c_int, [_c.c_int, _c.c_uint64]),
    "rb_ds_size_seq": (_c.c_uint64, []),
    "rb_ds_check_seq": (_c.c_int, []),
    "rb_worker_run": (
        _c.c_int,
        [
            _c.c_int,
            _c.c_double,
            _c.c_int,
            _c.c_int,
            _c.c_uint64,
            _c.c_int,
            _c.c_double,
            _c.POINTER(_c.c_uint64),
        ],
    ),
    "rb_opstream": (
        None,
        [
            _c.c_uint64,
            _c.c_int,
            _c.c_int,
            _c.c_int,
            _c.c_uint64,
            _c.c_int,
            _c.POINTER(_c.c_uint8),
            _c.POINTER(_c.c_uint64),
        ],
    ),
}

_lib = None


def load():
    global _lib
    if _lib is None:
        lib = ctypes.CDLL(str(_find_core()))
        for name, (res, args) in _SIGS.items():
            fn = getattr(lib, name)
            fn.restype = res
            fn.argtypes = args
        _lib = lib
    return _lib
