"""Pure-Python twin of the compiled core.

Same schemes, same structures, same session surface.  Directed signals are
virtual: a sender enqueues a token and the target runs its handler at the
next safe point (every guarded read, op bracket, spin wait, or sleep slice
polls for pending tokens).  Neutralization is a control-flow exception caught
by the operation retry loop, which plays the role of the saved checkpoint.

Besides serving as the fallback when the extension cannot be built, this
backend is the controllable model used by the protocol unit tests: a
`hooks` dict lets a test interleave at named points deterministically.
"""

from __future__ import annotations

import threading
import time
from collections import deque

from .descriptors import (
    ALLOC_STAT_NAMES,
    HANDLER_NBR,
    HANDLER_NONE,
    HANDLER_POP,
    AlreadyRegistered,
    DESCRIPTORS,
    RegistryFull,
    SessionConfig,
    TooManyReservations,
    TrialAborted,
    VIOLATION_KINDS,
)

MASK64 = (1 << 64) - 1
ERA_NONE = MASK64
EPOCH_MAX = MASK64
CANARY_ALIVE = 0xA11CE5A11FE0F00D
CANARY_POISON = 0xDEADBEEFDEADBEEF
HEADER_SIZE = 32
ABORTED = -2


def splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def opstream(seed: int, tid: int, insert_pct: int, delete_pct: int,
             key_range: int, n: int) -> list[tuple[int, int]]:
    """(kind, key) pairs of a worker's op stream; kind 0=insert 1=delete
    2=contains.  Bit-exact mirror of the compiled worker's generator."""
    st = (seed ^ ((0x9E3779B97F4A7C15 * (tid + 1)) & MASK64)) & MASK64
    out = []
    for _ in range(n):
        st, r = splitmix64(st)
        roll = r % 100
        st, r2 = splitmix64(st)
        key = r2 % key_range
        kind = 0 if roll < insert_pct else (1 if roll < insert_pct + delete_pct else 2)
        out.append((kind, key))
    return out


class _Neutralized(Exception):
    """Raised at a safe point of a restartable read phase."""


class _SigToken:
    __slots__ = ("done",)

    def __init__(self):
        self.done = False


class _PollBarrier:
    """Barrier whose waiters keep polling for virtual signals.

    A thread parked in threading.Barrier cannot run its handler, which would
    deadlock a reclaimer waiting for that thread to publish; real signals
    interrupt blocked threads, so the twin must not block uninterruptibly.
    """

    def __init__(self, parties: int):
        self.parties = parties
        self._count = 0
        self._gen = 0
        self._lock = threading.Lock()

    def wait(self, poll):
        with self._lock:
            gen = self._gen
            self._count += 1
            if self._count == self.parties:
                self._count = 0
                self._gen += 1
        while self._gen == gen:
            poll()
            time.sleep(0.0002)


class ListNode:
    __slots__ = ("key", "link", "marked", "lock", "canary", "birth_era",
                 "retire_era", "retired", "size")

    def __init__(self, key, size):
        self.key = key
        self.link = (None, False)  # (successor, mark)
        self.marked = False
        self.lock = threading.Lock()
        self.canary = CANARY_ALIVE
        self.birth_era = 0
        self.retire_era = 0
        self.retired = False
        self.size = size


class TreeNode:
    __slots__ = ("key", "left", "right", "locked", "dead", "is_leaf", "canary",
                 "birth_era", "retire_era", "retired", "size")

    def __init__(self, key, is_leaf, size):
        self.key = key
        self.left = None
        self.right = None
        self.locked = False
        self.dead = False
        self.is_leaf = is_leaf
        self.canary = CANARY_ALIVE
        self.birth_era = 0
        self.retire_era = 0
        self.retired = False
        self.size = size


class _PyThread:
    def __init__(self, n, slots):
        self.alive = True
        self.handler_kind = HANDLER_NONE
        self.pending = deque()
        self.signals_sent = 0
        self.signals_received = 0
        self.handler_entries = 0
        self.restarts = 0
        self.pings_sent = 0
        self.fences = 0
        self.slow_path = 0
        self.passes = 0
        self.piggybacks = 0
        self.local_res = [None] * slots
        self.shared_res = [None] * slots
        self.publish_counter = 0
        self.nbr_row = [None] * slots
        self.restartable = False
        self.reserved_epoch = EPOCH_MAX
        self.op_counter = 0
        self.ebr_retire_counter = 0
        self.bag = []
        self.scan_ts = [0] * n
        self.bookmark_tail = 0
        self.first_lowm = True
        self.retires_since_scan = 0


class PySession:
    backend = "py"

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self.validate = cfg.alloc_mode == "validate"
        n = cfg.threads
        slots = max(cfg.max_hp, cfg.max_he, cfg.nbr_max_reservations)
        self.th = [_PyThread(n, slots) for _ in range(n)]
        self._registered = 0
        self._reg_lock = threading.Lock()
        self._tls = threading.local()
        self.epoch = 0
        self.announce_ts_arr = [0] * n
        self.broadcasts = 0
        self.stop_flag = False
        self._cas_lock = threading.Lock()
        self._alloc_lock = threading.Lock()
        self.live_bytes = 0
        self.peak_live_bytes = 0
        self.allocations = 0
        self.frees = 0
        self.retired_current = 0
        self.peak_retired = 0
        self.quarantine = deque()
        self._violations = dict.fromkeys(VIOLATION_KINDS, 0)
        self.barrier = _PollBarrier(n)
        self.hooks: dict[str, object] = {}
        self._freq = cfg.effective_reclaim_freq
        self._era_scheme = cfg.scheme in ("he", "pophe")
        self._hookish = cfg.scheme in ("hp", "he", "pophp", "pophe", "epochpop")
        self._phases = cfg.scheme in ("nbr", "nbrplus")
        self._init_structure()

    # -- lifecycle ---------------------------------------------------------
    def close(self):
        pass  # everything is garbage collected

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- registry / virtual signal bus --------------------------------------
    def register(self, handler_kind: int = -1) -> int:
        with self._reg_lock:
            if getattr(self._tls, "tid", None) is not None:
                raise AlreadyRegistered("calling thread already holds a tid")
            if self._registered >= self.cfg.threads:
                raise RegistryFull(f"registry holds {self.cfg.threads} threads")
            tid = self._registered
            self._registered += 1
        t = self.th[tid]
        t.handler_kind = (
            handler_kind if handler_kind >= 0
            else DESCRIPTORS[self.cfg.scheme].handler_kind
        )
        if self._era_scheme:
            t.local_res = [ERA_NONE] * len(t.local_res)
            t.shared_res = [ERA_NONE] * len(t.shared_res)
        self._tls.tid = tid
        return tid

    def mark_done(self, tid: int):
        self.th[tid].alive = False

    def alive(self, tid: int) -> bool:
        return self.th[tid].alive

    def handler_kind(self, tid: int) -> int:
        return self.th[tid].handler_kind

    def broadcast(self, tid: int) -> int:
        """Send a virtual signal to every live peer.

        The system model assumes a target executes its handler before the
        directed send completes, so the virtual send blocks until each
        target's next safe point has consumed the token.  Every blocking
        point in this backend polls, which keeps this from deadlocking, but
        it does mean ad-hoc callers must keep their peer threads polling.
        """
        if tid < 0 or tid >= self._registered:
            raise ValueError(f"bad broadcaster tid {tid}")
        me = self.th[tid]
        tokens = []
        for i in range(self._registered):
            if i == tid:
                continue
            t = self.th[i]
            if not t.alive:
                continue
            tok = _SigToken()
            t.pending.append(tok)
            tokens.append((i, tok))
        me.signals_sent += len(tokens)
        self.broadcasts += 1
        deadline = time.monotonic() + 30.0
        for i, tok in tokens:
            while not tok.done:
                if not self.th[i].alive:
                    break
                if not self.th[i].restartable:
                    # safe to stop waiting: until its next safe point the
                    # target touches only reserved nodes, and every discovery
                    # path polls (consuming this token) before reading
                    break
                self.poll(tid)  # serve a concurrent broadcaster meanwhile
                time.sleep(0)
                if time.monotonic() > deadline:
                    raise RuntimeError(
                        f"thread {i} never reached a safe point to take a signal"
                    )
        return len(tokens)

    def post_broadcast_delay(self):
        d = self.cfg.post_broadcast_delay_ns
        if d <= 0:
            return
        end = time.monotonic_ns() + d
        while time.monotonic_ns() < end:
            pass

    def poll(self, tid: int):
        """Safe point: deliver any pending virtual signals on this thread."""
        t = self.th[tid]
        while t.pending:
            try:
                tok = t.pending.popleft()
            except IndexError:
                break
            t.signals_received += 1
            t.handler_entries += 1
            if t.handler_kind == HANDLER_POP:
                t.shared_res = list(t.local_res)
                t.publish_counter += 1
                tok.done = True
            elif t.handler_kind == HANDLER_NBR and t.restartable:
                t.restarts += 1
                tok.done = True
                raise _Neutralized()
            else:
                tok.done = True

    # -- guard allocator ------------------------------------------------------
    def _check_phase_rules(self, tid):
        if (self.validate and 0 <= tid < self._registered
                and self.th[tid].handler_kind == HANDLER_NBR
                and self.th[tid].restartable):
            self.record_violation("alloc_in_read_phase", tid)

    def _account_alloc(self, size):
        self._check_phase_rules(getattr(self._tls, "tid", -1))
        with self._alloc_lock:
            self.live_bytes += size
            self.peak_live_bytes = max(self.peak_live_bytes, self.live_bytes)
            self.allocations += 1

    def _new_list_node(self, key) -> ListNode:
        n = ListNode(key, HEADER_SIZE + 24)
        if self._era_scheme:
            n.birth_era = self.epoch
        self._account_alloc(n.size)
        return n

    def _new_tree_node(self, key, is_leaf) -> TreeNode:
        n = TreeNode(key, is_leaf, HEADER_SIZE + 40)
        if self._era_scheme:
            n.birth_era = self.epoch
        self._account_alloc(n.size)
        return n

    def record_violation(self, kind: str, tid: int):
        with self._alloc_lock:
            self._violations[kind] += 1
        self.stop_flag = True

    def free_node(self, node, tid: int):
        self._check_phase_rules(tid)
        if not self.validate:
            with self._alloc_lock:
                self.live_bytes -= node.size
                self.frees += 1
            return
        if node.canary != CANARY_ALIVE:
            self.record_violation("double_free", tid)
            return
        node.canary = CANARY_POISON
        with self._alloc_lock:
            self.live_bytes -= node.size
            self.frees += 1
            self.quarantine.append(node)
            if len(self.quarantine) > self.cfg.quarantine_cap:
                self.quarantine.popleft()

    def chk(self, node, tid: int) -> bool:
        if self.validate and node.canary != CANARY_ALIVE:
            self.record_violation("poison_access", tid)
            return False
        return True

    # -- scheme: op brackets, read hooks, phases -------------------------------
    def op_begin(self, tid: int):
        self.poll(tid)
        t = self.th[tid]
        if self.cfg.scheme in ("ebr", "epochpop"):
            t.op_counter += 1
            if t.op_counter % self.cfg.epoch_freq == 0:
                with self._cas_lock:
                    self.epoch += 1
            t.reserved_epoch = self.epoch

    def op_end(self, tid: int):
        t = self.th[tid]
        s = self.cfg.scheme
        if s in ("ebr", "epochpop"):
            t.reserved_epoch = EPOCH_MAX
        if s in ("hp", "he"):
            empty = ERA_NONE if s == "he" else None
            t.shared_res = [empty] * len(t.shared_res)
        if s in ("pophp", "pophe", "epochpop"):
            empty = ERA_NONE if s == "pophe" else None
            t.local_res = [empty] * len(t.local_res)
        self.poll(tid)

    def _hook(self, name):
        fn = self.hooks.get(name)
        if fn:
            fn()

    def read(self, tid: int, load, slot: int):
        """Protected read of a mutable cell; `load` re-reads the cell."""
        self.poll(tid)
        t = self.th[tid]
        s = self.cfg.scheme
        if s == "hp":
            while True:
                v = load()
                self._hook("hp_between_load_and_publish")
                t.shared_res[slot] = _node_of(v)
                t.fences += 1
                if load() == v:
                    return v
        if s == "he":
            old = t.shared_res[slot]
            while True:
                v = load()
                e = self.epoch
                if e == old:
                    return v
                self._hook("he_before_publish")
                t.shared_res[slot] = e
                t.fences += 1
                old = e
        if s in ("pophp", "epochpop"):
            while True:
                v = load()
                self._hook("pop_between_load_and_reserve")
                t.local_res[slot] = _node_of(v)
                if load() == v:
                    return v
        if s == "pophe":
            old = t.local_res[slot]
            while True:
                v = load()
                e = self.epoch
                if e == old:
                    return v
                t.local_res[slot] = e
                old = e
        return load()

    def begin_read_phase(self, tid: int):
        t = self.th[tid]
        t.nbr_row = [None] * len(t.nbr_row)
        t.restartable = True
        self.poll(tid)

    def end_read_phase(self, tid: int, recs):
        t = self.th[tid]
        if len(recs) > self.cfg.nbr_max_reservations:
            raise TooManyReservations(
                f"{len(recs)} > configured width {self.cfg.nbr_max_reservations}"
            )
        row = [None] * len(t.nbr_row)
        for i, r in enumerate(recs):
            row[i] = r
        t.nbr_row = row
        t.restartable = False

    # -- retire paths ------------------------------------------------------------
    def _note_retired(self, delta):
        with self._alloc_lock:
            self.retired_current += delta
            if self.retired_current > self.peak_retired:
                self.peak_retired = self.retired_current

    def _collect_hp(self):
        res = set()
        for t in self.th[: self._registered]:
            for v in t.shared_res:
                if v is not None and not isinstance(v, int):
                    res.add(id(v))
        return res

    def _collect_eras(self):
        eras = []
        for t in self.th[: self._registered]:
            for v in t.shared_res:
                eras.append(v if isinstance(v, int) else ERA_NONE)
        return eras

    def _reclaim_by_set(self, tid, limit, reserved_ids):
        t = self.th[tid]
        kept, freed = [], 0
        for node in t.bag[:limit]:
            if id(node) in reserved_ids:
                kept.append(node)
            else:
                self.free_node(node, tid)
                freed += 1
        t.bag = kept + t.bag[limit:]
        self._note_retired(-freed)
        t.passes += 1

    def _reclaim_by_eras(self, tid, limit, eras):
        t = self.th[tid]
        kept, freed = [], 0
        for node in t.bag[:limit]:
            if he_can_free(node.birth_era, node.retire_era, eras):
                self.free_node(node, tid)
                freed += 1
            else:
                kept.append(node)
        t.bag = kept + t.bag[limit:]
        self._note_retired(-freed)
        t.passes += 1

    def _ebr_pass(self, tid):
        min_epoch = min(t.reserved_epoch for t in self.th[: self._registered])
        t = self.th[tid]
        kept, freed = [], 0
        for node in t.bag:
            if node.retire_era < min_epoch:
                self.free_node(node, tid)
                freed += 1
            else:
                kept.append(node)
        t.bag = kept
        self._note_retired(-freed)
        t.passes += 1

    def _self_publish(self, tid):
        t = self.th[tid]
        t.shared_res = list(t.local_res)
        t.publish_counter += 1

    def ping_and_wait(self, tid: int):
        self._self_publish(tid)
        snapshot = [t.publish_counter for t in self.th[: self._registered]]
        delivered = self.broadcast(tid)
        if delivered > 0:
            self.th[tid].pings_sent += delivered
        for i in range(self._registered):
            if i == tid:
                continue
            while self.th[i].publish_counter <= snapshot[i]:
                if not self.th[i].alive:
                    break
                self.poll(tid)  # serve a concurrent reclaimer's ping
                time.sleep(0)

    def _nbr_collect(self):
        res = set()
        for t in self.th[: self._registered]:
            for v in t.nbr_row:
                if v is not None:
                    res.add(id(v))
        return res

    def retire(self, tid: int, node):
        if node.retired:
            self.record_violation("double_retire", tid)
            return
        node.retired = True
        s = self.cfg.scheme
        if s == "unsafe":
            self.free_node(node, tid)
            return
        self._note_retired(1)
        t = self.th[tid]
        cfg = self.cfg
        if s == "none":
            t.bag.append(node)
        elif s == "hp":
            t.bag.append(node)
            if len(t.bag) >= self._freq:
                self._reclaim_by_set(tid, len(t.bag), self._collect_hp())
        elif s == "he":
            node.retire_era = self.epoch
            t.bag.append(node)
            if len(t.bag) >= self._freq:
                with self._cas_lock:
                    self.epoch += 1
                self._reclaim_by_eras(tid, len(t.bag), self._collect_eras())
        elif s == "ebr":
            node.retire_era = self.epoch
            t.bag.append(node)
            t.ebr_retire_counter += 1
            if t.ebr_retire_counter % self._freq == 0:
                self._ebr_pass(tid)
        elif s == "pophp":
            t.bag.append(node)
            if len(t.bag) >= self._freq:
                self.ping_and_wait(tid)
                self._reclaim_by_set(tid, len(t.bag), self._collect_hp())
        elif s == "pophe":
            node.retire_era = self.epoch
            t.bag.append(node)
            if len(t.bag) >= self._freq:
                with self._cas_lock:
                    self.epoch += 1
                self.ping_and_wait(tid)
                self._reclaim_by_eras(tid, len(t.bag), self._collect_eras())
        elif s == "epochpop":
            node.retire_era = self.epoch
            t.bag.append(node)
            t.ebr_retire_counter += 1
            if t.ebr_retire_counter % self._freq == 0:
                self._ebr_pass(tid)
                if cfg.epochpop_c > 0 and len(t.bag) >= cfg.epochpop_c * self._freq:
                    t.slow_path += 1
                    self.ping_and_wait(tid)
                    self._reclaim_by_set(tid, len(t.bag), self._collect_hp())
        elif s == "nbr":
            if len(t.bag) >= cfg.nbr_hi_watermark:
                self.broadcast(tid)
                self.post_broadcast_delay()
                self._reclaim_by_set(tid, len(t.bag), self._nbr_collect())
            t.bag.append(node)
        elif s == "nbrplus":
            self._nbrplus_retire(tid, t, node)
        else:
            t.bag.append(node)

    def _nbrplus_retire(self, tid, t, node):
        cfg = self.cfg
        lo = max(1, int(cfg.nbr_hi_watermark * cfg.nbr_lo_fraction))
        if len(t.bag) >= cfg.nbr_hi_watermark:
            self.announce_ts_arr[tid] += 1
            self.broadcast(tid)
            self.post_broadcast_delay()
            self.announce_ts_arr[tid] += 1
            self._reclaim_by_set(tid, len(t.bag), self._nbr_collect())
            t.first_lowm = True
        elif len(t.bag) >= lo:
            if t.first_lowm:
                t.bookmark_tail = len(t.bag)
                t.scan_ts = list(self.announce_ts_arr)
                t.first_lowm = False
                t.retires_since_scan = 0
            else:
                t.retires_since_scan += 1
                if t.retires_since_scan >= cfg.nbr_scan_amortization:
                    t.retires_since_scan = 0
                    for i in range(self._registered):
                        if i == tid:
                            continue
                        # a complete broadcast strictly inside this episode;
                        # odd snapshots round up so a pre-snapshot broadcast
                        # cannot satisfy the literal "+2"
                        if self.announce_ts_arr[i] >= ((t.scan_ts[i] + 1) & ~1) + 2:
                            t.piggybacks += 1
                            self._reclaim_by_set(tid, t.bookmark_tail,
                                                 self._nbr_collect())
                            t.first_lowm = True
                            break
        t.bag.append(node)

    def quiesce(self, tid: int):
        t = self.th[tid]
        empty = ERA_NONE if self._era_scheme else None
        t.shared_res = [empty] * len(t.shared_res)
        t.local_res = [empty] * len(t.local_res)
        t.nbr_row = [None] * len(t.nbr_row)
        t.reserved_epoch = EPOCH_MAX
        t.restartable = False

    def drain(self, tid: int):
        t = self.th[tid]
        if not t.bag:
            return
        s = self.cfg.scheme
        if s == "hp":
            self._reclaim_by_set(tid, len(t.bag), self._collect_hp())
        elif s == "he":
            with self._cas_lock:
                self.epoch += 1
            self._reclaim_by_eras(tid, len(t.bag), self._collect_eras())
        elif s == "ebr":
            self._ebr_pass(tid)
        elif s in ("pophp", "epochpop"):
            self.ping_and_wait(tid)
            self._reclaim_by_set(tid, len(t.bag), self._collect_hp())
        elif s == "pophe":
            with self._cas_lock:
                self.epoch += 1
            self.ping_and_wait(tid)
            self._reclaim_by_eras(tid, len(t.bag), self._collect_eras())
        elif s == "nbr":
            self.broadcast(tid)
            self.post_broadcast_delay()
            self._reclaim_by_set(tid, len(t.bag), self._nbr_collect())
        elif s == "nbrplus":
            self.announce_ts_arr[tid] += 1
            self.broadcast(tid)
            self.post_broadcast_delay()
            self.announce_ts_arr[tid] += 1
            self._reclaim_by_set(tid, len(t.bag), self._nbr_collect())
            t.first_lowm = True

    # -- structures -------------------------------------------------------------
    def _init_structure(self):
        ds = self.cfg.structure
        if ds in ("lazy_list", "harris_list", "hm_list"):
            self.head, self.tail = self._list_roots()
        elif ds == "hash_table":
            self.bucket_roots = [self._list_roots() for _ in range(self.cfg.buckets)]
        elif ds == "ext_bst":
            root = self._new_tree_node(MASK64, False)
            root.left = self._new_tree_node(MASK64 - 1, True)
            root.right = self._new_tree_node(MASK64, True)
            self.root = root

    def _list_roots(self):
        head = self._new_list_node(0)
        tail = self._new_list_node(MASK64)
        head.link = (tail, False)
        return head, tail

    def _cas_link(self, node, expected, new) -> bool:
        with self._cas_lock:
            if node.link == expected:
                node.link = new
                return True
            return False

    def _cas_tree_child(self, node, attr, expected, new) -> bool:
        with self._cas_lock:
            if getattr(node, attr) is expected:
                setattr(node, attr, new)
                return True
            return False

    def _restart_from_head(self) -> bool:
        if self.cfg.hm_restart_from_head >= 0:
            return bool(self.cfg.hm_restart_from_head)
        return self._phases

    def insert(self, tid, key):
        return self._op_result(self._dispatch(tid, key, "insert"))

    def delete(self, tid, key):
        return self._op_result(self._dispatch(tid, key, "delete"))

    def contains(self, tid, key):
        return self._op_result(self._dispatch(tid, key, "contains"))

    def _op_result(self, rc):
        if rc == ABORTED:
            raise TrialAborted(f"violations={self.violations()}")
        return rc == 1

    def _dispatch(self, tid, key, op):
        self.op_begin(tid)
        try:
            ds = self.cfg.structure
            if ds == "lazy_list":
                fn = getattr(self, f"_lazy_{op}")
                return fn(tid, key)
            if ds == "harris_list":
                if self._hookish:
                    fn = getattr(self, f"_hm_{op}")
                    return fn(tid, self.head, key)
                fn = getattr(self, f"_harris_{op}")
                return fn(tid, key)
            if ds == "hm_list":
                fn = getattr(self, f"_hm_{op}")
                return fn(tid, self.head, key)
            if ds == "hash_table":
                head, _ = self.bucket_roots[key % self.cfg.buckets]
                fn = getattr(self, f"_hm_{op}")
                return fn(tid, head, key)
            if ds == "ext_bst":
                fn = getattr(self, f"_bst_{op}")
                return fn(tid, key)
            raise ValueError(ds)
        finally:
            self.op_end(tid)

    # lazy list: optimistic locking, logical delete flag
    def _lazy_locate(self, tid, key):
        while True:
            pred = self.head
            sp, sc = 0, 1
            curr = self.read(tid, lambda p=pred: p.link[0], sc)
            if not self.chk(curr, tid):
                return None, None
            restart = False
            while curr.key < key:
                pred = curr
                sp, sc = sc, sp
                curr = self.read(tid, lambda p=pred: p.link[0], sc)
                if self._hookish and pred.marked:
                    restart = True
                    break
                if not self.chk(curr, tid):
                    return None, None
            if restart:
                continue
            return pred, curr

    def _lazy_insert(self, tid, key):
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                pred, curr = self._lazy_locate(tid, key)
                if pred is None:
                    if self._phases:
                        self.end_read_phase(tid, [])
                    return ABORTED
                if self._phases:
                    self.end_read_phase(tid, [pred, curr])
                with pred.lock, curr.lock:
                    if not (not pred.marked and not curr.marked
                            and pred.link[0] is curr):
                        continue
                    if curr.key == key:
                        return 0
                    n = self._new_list_node(key)
                    n.link = (curr, False)
                    pred.link = (n, False)
                    return 1
            except _Neutralized:
                continue

    def _lazy_delete(self, tid, key):
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                pred, curr = self._lazy_locate(tid, key)
                if pred is None:
                    if self._phases:
                        self.end_read_phase(tid, [])
                    return ABORTED
                if self._phases:
                    self.end_read_phase(tid, [pred, curr])
                do_retire = False
                with pred.lock, curr.lock:
                    if not (not pred.marked and not curr.marked
                            and pred.link[0] is curr):
                        continue
                    if curr.key != key:
                        return 0
                    curr.marked = True
                    pred.link = (curr.link[0], False)
                    do_retire = True
                if do_retire:
                    self.retire(tid, curr)
                return 1
            except _Neutralized:
                continue

    def _lazy_contains(self, tid, key):
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                restart = False
                curr = self.read(tid, lambda: self.head.link[0], 0)
                s = 1
                if not self.chk(curr, tid):
                    if self._phases:
                        self.end_read_phase(tid, [])
                    return ABORTED
                while curr.key < key:
                    pred = curr
                    curr = self.read(tid, lambda p=pred: p.link[0], s)
                    s = 1 - s
                    if self._hookish and pred.marked:
                        restart = True
                        break
                    if not self.chk(curr, tid):
                        if self._phases:
                            self.end_read_phase(tid, [])
                        return ABORTED
                if restart:
                    continue
                res = 1 if (curr.key == key and not curr.marked) else 0
                if self._phases:
                    self.end_read_phase(tid, [])
                return res
            except _Neutralized:
                continue

    # deferred-unlink list (marked link bits, chain removal in search)
    def _harris_search(self, tid, key):
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                t_node = self.head
                left = self.head
                left_link = None
                sn = 0
                t_link = self.read(tid, lambda: self.head.link, sn)
                while True:
                    if not t_link[1]:
                        left = t_node
                        left_link = t_link
                    t_node = t_link[0]
                    if not self.chk(t_node, tid):
                        if self._phases:
                            self.end_read_phase(tid, [])
                        return None, None, True
                    if t_node is self.tail:
                        break
                    sn = 1 - sn
                    t_link = self.read(tid, lambda n=t_node: n.link, sn)
                    if not (t_link[1] or t_node.key < key):
                        break
                right = t_node
                if self._phases:
                    self.end_read_phase(tid, [left, right])
                if left_link[0] is right:
                    if right is not self.tail and right.link[1]:
                        continue
                    return left, right, False
                if self._cas_link(left, left_link, (right, False)):
                    n = left_link[0]
                    while n is not right:
                        nxt = n.link[0]
                        self.retire(tid, n)
                        n = nxt
                    if right is not self.tail and right.link[1]:
                        continue
                    return left, right, False
            except _Neutralized:
                continue

    def _harris_insert(self, tid, key):
        while True:
            left, right, aborted = self._harris_search(tid, key)
            if aborted:
                return ABORTED
            if right is not self.tail and right.key == key:
                return 0
            n = self._new_list_node(key)
            n.link = (right, False)
            if self._cas_link(left, (right, False), (n, False)):
                return 1
            self.free_node(n, tid)

    def _harris_delete(self, tid, key):
        while True:
            left, right, aborted = self._harris_search(tid, key)
            if aborted:
                return ABORTED
            if right is self.tail or right.key != key:
                return 0
            r_link = right.link
            if r_link[1]:
                continue
            if not self._cas_link(right, r_link, (r_link[0], True)):
                continue
            if self._cas_link(left, (right, False), (r_link[0], False)):
                self.retire(tid, right)
            else:
                self._harris_search(tid, key)
            return 1

    def _harris_contains(self, tid, key):
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                s = 0
                t_node = self.read(tid, lambda: self.head.link, s)[0]
                if not self.chk(t_node, tid):
                    if self._phases:
                        self.end_read_phase(tid, [])
                    return ABORTED
                while t_node is not self.tail and t_node.key < key:
                    s = 1 - s
                    t_node = self.read(tid, lambda n=t_node: n.link, s)[0]
                    if not self.chk(t_node, tid):
                        if self._phases:
                            self.end_read_phase(tid, [])
                        return ABORTED
                res = 1 if (t_node is not self.tail and t_node.key == key
                            and not t_node.link[1]) else 0
                if self._phases:
                    self.end_read_phase(tid, [])
                return res
            except _Neutralized:
                continue

    # unlink-before-pass list (pointer-protection compatible)
    def _hm_search(self, tid, head, key):
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                restart = False
                pred = head
                s_curr, s_next = 1, 2
                curr_link = self.read(tid, lambda p=pred: p.link, s_curr)
                while True:
                    curr = curr_link[0]
                    if not self.chk(curr, tid):
                        if self._phases:
                            self.end_read_phase(tid, [])
                        return None, None, -1
                    if curr.key == MASK64:  # tail sentinel
                        if self._phases:
                            self.end_read_phase(tid, [pred, curr])
                        return pred, curr, 0
                    next_link = self.read(tid, lambda c=curr: c.link, s_next)
                    if next_link[1]:
                        if self._phases:
                            self.end_read_phase(tid, [pred, curr])
                        if not self._cas_link(pred, (curr, False),
                                              (next_link[0], False)):
                            restart = True
                            break
                        self.retire(tid, curr)
                        if self._restart_from_head():
                            restart = True
                            break
                        curr_link = (next_link[0], False)
                        s_curr, s_next = s_next, s_curr
                        continue
                    if curr.key >= key:
                        if self._phases:
                            self.end_read_phase(tid, [pred, curr])
                        return pred, curr, 1 if curr.key == key else 0
                    pred = curr
                    curr_link = next_link
                    s_curr, s_next = s_next, s_curr
                if restart:
                    continue
            except _Neutralized:
                continue

    def _hm_insert(self, tid, head, key):
        while True:
            pred, curr, found = self._hm_search(tid, head, key)
            if found == -1:
                return ABORTED
            if found:
                return 0
            n = self._new_list_node(key)
            n.link = (curr, False)
            if self._cas_link(pred, (curr, False), (n, False)):
                return 1
            self.free_node(n, tid)

    def _hm_delete(self, tid, head, key):
        while True:
            pred, curr, found = self._hm_search(tid, head, key)
            if found == -1:
                return ABORTED
            if not found:
                return 0
            next_link = curr.link
            if next_link[1]:
                continue
            if not self._cas_link(curr, next_link, (next_link[0], True)):
                continue
            if self._cas_link(pred, (curr, False), (next_link[0], False)):
                self.retire(tid, curr)
            else:
                self._hm_search(tid, head, key)
            return 1

    def _hm_contains(self, tid, head, key):
        if self._hookish:
            _, _, found = self._hm_search(tid, head, key)
            return ABORTED if found == -1 else found
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                curr = self.read(tid, lambda h=head: h.link, 0)[0]
                if not self.chk(curr, tid):
                    if self._phases:
                        self.end_read_phase(tid, [])
                    return ABORTED
                while curr.key < key:
                    curr = self.read(tid, lambda c=curr: c.link, 0)[0]
                    if not self.chk(curr, tid):
                        if self._phases:
                            self.end_read_phase(tid, [])
                        return ABORTED
                res = 1 if curr.key == key and not curr.link[1] else 0
                if self._phases:
                    self.end_read_phase(tid, [])
                return res
            except _Neutralized:
                continue

    # leaf-oriented BST: lockless search, versioned-lock updates
    def _bst_child(self, node, key):
        return "left" if key < node.key else "right"

    def _bst_search(self, tid, key, reserve):
        while True:
            try:
                if self._phases:
                    self.begin_read_phase(tid)
                restart = False
                gp, p = None, self.root
                sl = 0
                l = self.read(tid, lambda n=p, k=key: getattr(n, self._bst_child(n, k)), sl)
                # check the anchor before touching l at all: a dead anchor's
                # frozen child pointer may target freed memory
                if p.dead:
                    continue
                if not self.chk(l, tid):
                    if self._phases:
                        self.end_read_phase(tid, [])
                    return None, None, None, True
                while not l.is_leaf:
                    gp, p = p, l
                    sl = (sl + 1) % 3
                    l = self.read(tid, lambda n=p, k=key: getattr(n, self._bst_child(n, k)), sl)
                    if p.dead:
                        restart = True
                        break
                    if not self.chk(l, tid):
                        if self._phases:
                            self.end_read_phase(tid, [])
                        return None, None, None, True
                if restart:
                    continue
                if self._phases:
                    recs = [x for x in (gp, p, l) if x is not None] if reserve else []
                    self.end_read_phase(tid, recs)
                return gp, p, l, False
            except _Neutralized:
                continue

    def _bst_trylock(self, node) -> bool:
        with self._cas_lock:
            if node.locked:
                return False
            node.locked = True
            return True

    def _bst_unlock(self, node):
        node.locked = False

    def _bst_insert(self, tid, key):
        while True:
            gp, p, l, aborted = self._bst_search(tid, key, True)
            if aborted:
                return ABORTED
            if l.key == key:
                return 0
            if not self._bst_trylock(p):
                continue
            try:
                attr = self._bst_child(p, key)
                if p.dead or getattr(p, attr) is not l:
                    continue
                nl = self._new_tree_node(key, True)
                ni = self._new_tree_node(max(key, l.key), False)
                if key < l.key:
                    ni.left, ni.right = nl, l
                else:
                    ni.left, ni.right = l, nl
                setattr(p, attr, ni)
                return 1
            finally:
                self._bst_unlock(p)

    def _bst_delete(self, tid, key):
        while True:
            gp, p, l, aborted = self._bst_search(tid, key, True)
            if aborted:
                return ABORTED
            if l.key != key:
                return 0
            if gp is None:
                return 0
            if not self._bst_trylock(gp):
                continue
            got_p = self._bst_trylock(p)
            try:
                if not got_p:
                    continue
                gattr = self._bst_child(gp, key)
                pattr = self._bst_child(p, key)
                if (gp.dead or p.dead or getattr(gp, gattr) is not p
                        or getattr(p, pattr) is not l):
                    continue
                sibling = p.right if pattr == "left" else p.left
                p.dead = True
                l.dead = True
                setattr(gp, gattr, sibling)
            finally:
                if got_p:
                    self._bst_unlock(p)
                self._bst_unlock(gp)
            self.retire(tid, p)
            self.retire(tid, l)
            return 1

    def _bst_contains(self, tid, key):
        gp, p, l, aborted = self._bst_search(tid, key, False)
        if aborted:
            return ABORTED
        return 1 if l.key == key else 0

    # -- sequential checks ------------------------------------------------------
    def size(self) -> int:
        return self._walk()[0]

    def check_structure(self) -> bool:
        return self._walk()[1]

    def _walk(self):
        ds = self.cfg.structure
        if ds in ("lazy_list", "harris_list", "hm_list"):
            return self._walk_list(self.head, self.tail, None)
        if ds == "hash_table":
            total, ok = 0, True
            for i, (head, tail) in enumerate(self.bucket_roots):
                c, o = self._walk_list(head, tail, i)
                total += c
                ok = ok and o
            return total, ok
        if ds == "ext_bst":
            return self._walk_bst(self.root, 0, MASK64)
        return 0, False

    def _walk_list(self, head, tail, bucket):
        count, ok = 0, True
        prev, first = 0, True
        node = head.link[0]
        while node is not tail:
            live = not node.link[1] and not node.marked
            if live:
                if not first and node.key <= prev:
                    ok = False
                if bucket is not None and node.key % self.cfg.buckets != bucket:
                    ok = False
                prev, first = node.key, False
                count += 1
            node = node.link[0]
        return count, ok

    def _walk_bst(self, node, lo, hi):
        if node.is_leaf:
            if node.key >= MASK64 - 1:
                return 0, True
            return 1, lo <= node.key < hi
        cl, okl = self._walk_bst(node.left, lo, node.key)
        cr, okr = self._walk_bst(node.right, node.key, hi)
        return cl + cr, okl and okr and lo <= node.key <= hi

    # -- bench protocol -----------------------------------------------------------
    def worker_run(self, tid, duration_s, insert_pct, delete_pct, seed,
                   stall=False, prefill=0.0):
        poll = lambda: self.poll(tid)
        self.barrier.wait(poll)
        prefilled = 0
        if tid == 0 and prefill > 0:
            target = int(prefill * self.cfg.key_range)
            st = (seed ^ 0xC0FFEE123456789) & MASK64
            attempts = target * 40 + 1000
            while prefilled < target and attempts:
                attempts -= 1
                st, r = splitmix64(st)
                if self._dispatch(0, r % self.cfg.key_range, "insert") == 1:
                    prefilled += 1
        self.barrier.wait(poll)
        ops = ins_ok = del_ok = ct_true = 0
        aborted = False
        t0 = time.monotonic_ns()
        deadline = t0 + int(duration_s * 1e9)
        if stall:
            self._stall(tid, deadline)
        else:
            st = (seed ^ ((0x9E3779B97F4A7C15 * (tid + 1)) & MASK64)) & MASK64
            budget = self.cfg.mem_budget_bytes
            while True:
                if ops % 64 == 0:
                    if time.monotonic_ns() >= deadline or self.stop_flag:
                        break
                    if budget and self.live_bytes > budget:
                        self.stop_flag = True
                st, r = splitmix64(st)
                roll = r % 100
                st, r2 = splitmix64(st)
                key = r2 % self.cfg.key_range
                if roll < insert_pct:
                    rc = self._dispatch(tid, key, "insert")
                    ins_ok += rc == 1
                elif roll < insert_pct + delete_pct:
                    rc = self._dispatch(tid, key, "delete")
                    del_ok += rc == 1
                else:
                    rc = self._dispatch(tid, key, "contains")
                    ct_true += rc == 1
                if rc == ABORTED:
                    aborted = True
                    break
                ops += 1
        actual = time.monotonic_ns() - t0
        self.barrier.wait(poll)
        self.quiesce(tid)
        self.barrier.wait(poll)
        self.drain(tid)
        self.barrier.wait(poll)
        return {
            "ops": ops,
            "inserts_ok": ins_ok,
            "deletes_ok": del_ok,
            "contains_true": ct_true,
            "actual_s": actual / 1e9,
            "prefilled": prefilled,
            "aborted": aborted,
        }

    def _stall(self, tid, deadline_ns):
        if self._phases:
            while True:
                try:
                    self.begin_read_phase(tid)
                    while time.monotonic_ns() < deadline_ns and not self.stop_flag:
                        time.sleep(0.02)
                        self.poll(tid)
                    self.end_read_phase(tid, [])
                    return
                except _Neutralized:
                    continue
        self.op_begin(tid)
        if self._hookish:
            if self.cfg.structure == "ext_bst":
                self.read(tid, lambda: self.root.left, 0)
            elif self.cfg.structure == "hash_table":
                self.read(tid, lambda: self.bucket_roots[0][0].link, 0)
            else:
                self.read(tid, lambda: self.head.link, 0)
        while time.monotonic_ns() < deadline_ns and not self.stop_flag:
            time.sleep(0.02)
            self.poll(tid)
        self.op_end(tid)

    def opstream(self, seed, tid, insert_pct, delete_pct, n):
        return opstream(seed, tid, insert_pct, delete_pct, self.cfg.key_range, n)

    # -- stats / dbg ---------------------------------------------------------------
    def counters(self) -> dict:
        reg = self.th[: self._registered]
        return {
            "signals_sent": sum(t.signals_sent for t in reg),
            "signals_received": sum(t.signals_received for t in reg),
            "handler_entries": sum(t.handler_entries for t in reg),
            "restarts": sum(t.restarts for t in reg),
            "pings_sent": sum(t.pings_sent for t in reg),
            "fences_on_read_path": sum(t.fences for t in reg),
            "slow_path_triggers": sum(t.slow_path for t in reg),
            "retired_current": self.retired_current,
            "peak_retired_nodes": self.peak_retired,
            "reclaim_passes": sum(t.passes for t in reg),
            "epoch": self.epoch,
            "lowm_piggybacks": sum(t.piggybacks for t in reg),
            "broadcasts": self.broadcasts,
            "violations": self.violations(),
        }

    def alloc_stats(self) -> dict:
        return dict(zip(ALLOC_STAT_NAMES, [
            self.live_bytes, self.peak_live_bytes, self.allocations,
            self.frees, len(self.quarantine), self.peak_retired,
        ]))

    def violations(self) -> int:
        return sum(self._violations.values())

    def violation_kinds(self) -> dict:
        return dict(self._violations)

    def stop(self):
        self.stop_flag = True

    def header_size(self) -> int:
        return HEADER_SIZE

    def dbg_alloc(self, payload: int):
        n = ListNode(None, HEADER_SIZE + payload)
        if self._era_scheme:
            n.birth_era = self.epoch
        n.key = 0
        self._account_alloc(n.size)
        return n

    def dbg_free(self, handle, tid: int = 0):
        self.free_node(handle, tid)

    def dbg_checked_read(self, handle, tid: int = 0) -> int:
        if not self.chk(handle, tid):
            return -1
        return handle.key

    def dbg_write(self, handle, value: int):
        handle.key = value

    def dbg_retire(self, tid, handle):
        self.retire(tid, handle)

    def dbg_phase(self, tid, enter: bool):
        if enter:
            self.begin_read_phase(tid)
        else:
            self.end_read_phase(tid, [])

    def stats_dump(self) -> str:
        pairs = {**self.alloc_stats(), **self.counters()}
        return "\n".join(f"{k}={v}" for k, v in pairs.items())

    def dbg_birth_era(self, handle) -> int:
        return handle.birth_era

    def dbg_epoch_add(self, n: int):
        with self._cas_lock:
            self.epoch += n

    def bag_size(self, tid: int) -> int:
        return len(self.th[tid].bag)

    def publish_counter(self, tid: int) -> int:
        return self.th[tid].publish_counter

    def announce_ts(self, tid: int) -> int:
        return self.announce_ts_arr[tid]

    def restartable(self, tid: int) -> bool:
        return self.th[tid].restartable

    def he_can_free(self, birth, retire, eras) -> bool:
        return he_can_free(birth, retire, eras)

    def checkpoint_probe(self, tid: int, spin_s: float):
        """Spin in a restartable read phase, counting neutralizations."""
        restarts = 0
        deadline = time.monotonic_ns() + int(spin_s * 1e9)
        while True:
            try:
                self.begin_read_phase(tid)
                while time.monotonic_ns() < deadline:
                    self.poll(tid)
                    time.sleep(0)
                self.end_read_phase(tid, [])
                return restarts, True
            except _Neutralized:
                restarts += 1
                continue


def he_can_free(birth: int, retire: int, eras) -> bool:
    for e in eras:
        if e == ERA_NONE or e < birth or e > retire:
            continue
        return False
    return True


def _node_of(v):
    """Protection target of a read value: the node itself, or the node half
    of a (node, mark) link tuple."""
    if isinstance(v, tuple):
        return v[0]
    return v
