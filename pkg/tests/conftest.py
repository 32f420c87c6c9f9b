import threading

import pytest

from reclaimbench import SessionConfig, open_session
from reclaimbench.backends import default_backend

BACKENDS = ["c", "py"] if default_backend() == "c" else ["py"]

# small, aggressive defaults so reclamation paths fire constantly in tests
TEST_DEFAULTS = dict(
    threads=2,
    scheme="ebr",
    structure="hm_list",
    alloc_mode="validate",
    key_range=128,
    buckets=16,
    reclaim_freq=32,
    epoch_freq=4,
    nbr_hi_watermark=32,
    nbr_scan_amortization=4,
    quarantine_cap=1 << 14,
    mem_budget_bytes=0,
)


def make_session(backend, **kw):
    cfg = dict(TEST_DEFAULTS)
    cfg.update(kw)
    return open_session(SessionConfig(**cfg), backend)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def in_thread(fn, *args, **kw):
    """Run fn on a fresh thread, re-raising and returning its result."""
    box = {}

    def run():
        try:
            box["result"] = fn(*args, **kw)
        except BaseException as e:
            box["error"] = e

    t = threading.Thread(target=run)
    t.start()
    t.join()
    if "error" in box:
        raise box["error"]
    return box["result"]


def spawn(fn, *args, **kw):
    box = {}

    def run():
        try:
            box["result"] = fn(*args, **kw)
        except BaseException as e:
            box["error"] = e

    t = threading.Thread(target=run)
    t.start()
    return t, box


def join(t, box):
    t.join()
    if "error" in box:
        raise box["error"]
    return box.get("result")
