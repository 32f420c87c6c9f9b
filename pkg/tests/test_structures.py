"""Set semantics across structures and schemes: sequential oracle replay,
scheme neutrality, structural invariants, and targeted races."""

import threading

import pytest

from conftest import in_thread, join, make_session, spawn
from reclaimbench import InvalidPairing, PairingMatrix, SessionConfig
from reclaimbench.lincheck import seq_apply
from reclaimbench.pybackend import opstream

MATRIX = PairingMatrix()
ALL_PAIRS = MATRIX.pairs()


def replay_sequential(s, tid, trace):
    results = []
    for kind, key in trace:
        fn = (s.insert, s.delete, s.contains)[kind]
        results.append(fn(tid, key))
    return results


def oracle_results(trace):
    state = frozenset()
    out = []
    for kind, key in trace:
        op = ("insert", "delete", "contains")[kind]
        state, res = seq_apply(state, op, key)
        out.append(res)
    return out


@pytest.mark.parametrize("structure,scheme", ALL_PAIRS)
def test_sequential_replay_matches_oracle(backend, structure, scheme):
    n_ops = 4000 if backend == "c" else 1200
    with make_session(backend, threads=1, scheme=scheme, structure=structure,
                      key_range=48, reclaim_freq=16, nbr_hi_watermark=16) as s:
        tid = in_thread(s.register)
        trace = opstream(7, tid, 40, 40, 48, n_ops)
        got = replay_sequential(s, tid, trace)
        assert got == oracle_results(trace)
        assert s.violations() == 0
        assert s.check_structure()


def test_single_thread_traces_identical_across_schemes(backend):
    """Scheme neutrality: reclamation never changes set semantics."""
    for structure in ("lazy_list", "hm_list", "ext_bst"):
        baseline = None
        for scheme in MATRIX.schemes_for(structure):
            with make_session(backend, threads=1, scheme=scheme,
                              structure=structure, key_range=32,
                              reclaim_freq=8, nbr_hi_watermark=8) as s:
                tid = in_thread(s.register)
                trace = opstream(3, tid, 40, 40, 32, 600)
                got = replay_sequential(s, tid, trace)
            if baseline is None:
                baseline = got
            assert got == baseline, (structure, scheme)


def test_insert_twice_and_delete_shapes(backend):
    with make_session(backend, threads=1, structure="ext_bst") as s:
        tid = in_thread(s.register)
        assert s.insert(tid, 5) is True
        assert s.contains(tid, 5) is True
        assert s.insert(tid, 5) is False
        assert s.delete(tid, 5) is True
        assert s.delete(tid, 5) is False
        assert s.contains(tid, 5) is False
        assert s.size() == 0


def test_invalid_pairing_rejected():
    cfg = SessionConfig(threads=1, scheme="hp", structure="lazy_list")
    with pytest.raises(InvalidPairing):
        cfg.validate_pairing()


def test_harris_era_override_gates_pairing():
    assert not PairingMatrix().allows("harris_list", "he")
    assert PairingMatrix(harris_era_override=True).allows("harris_list", "he")


@pytest.mark.parametrize("structure", sorted(set(ds for ds, _ in ALL_PAIRS)))
def test_concurrent_stress_preserves_invariants(backend, structure):
    scheme = "nbrplus" if structure != "hash_table" else "pophp"
    threads = 4 if backend == "c" else 3
    dur = 0.8 if backend == "c" else 0.3
    with make_session(backend, threads=threads, scheme=scheme,
                      structure=structure, key_range=256, buckets=16,
                      reclaim_freq=128, nbr_hi_watermark=128) as s:
        def work():
            tid = s.register()
            return s.worker_run(tid, dur, 40, 40, 17, prefill=0.5)

        boxes = [spawn(work) for _ in range(threads)]
        outs = [join(t, b) for t, b in boxes]
        assert s.violations() == 0
        assert s.check_structure()
        net = sum(o["prefilled"] + o["inserts_ok"] - o["deletes_ok"] for o in outs)
        assert net == s.size()


def test_contains_races_delete_without_faulting(backend):
    """A lookup racing a delete of the same key returns either answer but
    never trips the poison oracle."""
    with make_session(backend, threads=2, scheme="epochpop",
                      structure="lazy_list", key_range=4,
                      alloc_mode="validate") as s:
        rounds = 4000 if backend == "c" else 400
        def mutate():
            tid = s.register()
            for _ in range(rounds):
                s.insert(tid, 1)
                s.delete(tid, 1)
            return s.worker_run(tid, 0.0, 0, 0, 0)

        def observe():
            tid = s.register()
            for _ in range(rounds):
                s.contains(tid, 1)
            return s.worker_run(tid, 0.0, 0, 0, 0)

        b1, b2 = spawn(mutate), spawn(observe)
        join(*b1), join(*b2)
        assert s.violations() == 0


def test_hash_keys_stay_in_their_buckets(backend):
    with make_session(backend, threads=1, structure="hash_table",
                      buckets=8, key_range=64) as s:
        tid = in_thread(s.register)
        for k in range(40):
            s.insert(tid, k)
        assert s.size() == 40
        assert s.check_structure()
