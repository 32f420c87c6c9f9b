"""History recording and exhaustive linearizability checking for set ops.

The checker searches for a linearization of a concurrent history that is
consistent with real-time order and with sequential set semantics; suitable
for small histories (tens of ops).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass


@dataclass(frozen=True)
class OpEvent:
    tid: int
    op: str  # insert | delete | contains
    key: int
    result: bool
    inv_ns: int
    ret_ns: int


def seq_apply(state: frozenset, op: str, key: int) -> tuple[frozenset, bool]:
    """Sequential set semantics: the oracle every history is checked against."""
    if op == "insert":
        if key in state:
            return state, False
        return state | {key}, True
    if op == "delete":
        if key not in state:
            return state, False
        return state - {key}, True
    if op == "contains":
        return state, key in state
    raise ValueError(op)


def check_linearizable(history: list[OpEvent], initial=frozenset()) -> bool:
    """True iff some linearization explains every recorded result."""
    n = len(history)
    if n == 0:
        return True
    order = sorted(range(n), key=lambda i: history[i].inv_ns)
    ops = [history[i] for i in order]
    seen: set[tuple[frozenset, frozenset]] = set()

    def candidates(done: frozenset) -> list[int]:
        # an op may go next only if no other pending op returned before it
        # was invoked
        pending = [i for i in range(n) if i not in done]
        out = []
        for i in pending:
            if all(ops[j].ret_ns >= ops[i].inv_ns or j == i for j in pending):
                out.append(i)
        return out

    def dfs(done: frozenset, state: frozenset) -> bool:
        if len(done) == n:
            return True
        key = (done, state)
        if key in seen:
            return False
        seen.add(key)
        for i in candidates(done):
            ev = ops[i]
            nstate, res = seq_apply(state, ev.op, ev.key)
            if res == ev.result:
                if dfs(done | {i}, nstate):
                    return True
        return False

    return dfs(frozenset(), initial)


def record_history(sess, plans: dict[int, list[tuple[str, int]]],
                   sync_start: bool = True) -> list[OpEvent]:
    """Run each thread's (op, key) plan against the session, timestamping
    invocations and responses.  plans maps a slot index (not a tid) to ops;
    threads register themselves."""
    events: list[OpEvent] = []
    ev_lock = threading.Lock()
    barrier = threading.Barrier(len(plans))
    errors: list[BaseException] = []

    def runner(plan):
        try:
            tid = sess.register()
            if sync_start:
                barrier.wait()
            local = []
            for op, key in plan:
                fn = getattr(sess, op)
                inv = time.monotonic_ns()
                res = fn(tid, key)
                ret = time.monotonic_ns()
                local.append(OpEvent(tid, op, key, bool(res), inv, ret))
            with ev_lock:
                events.extend(local)
        except BaseException as e:
            errors.append(e)

    threads = [threading.Thread(target=runner, args=(plan,)) for plan in plans.values()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return events
