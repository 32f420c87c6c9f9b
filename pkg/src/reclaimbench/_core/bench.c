/* Benchmark worker: prefill, the timed op loop, stall injection, drain. */
#include "core.h"

int rb_hookish_scheme(void) {
    switch (rb_g.cfg.scheme) {
    case RB_SCHEME_HP:
    case RB_SCHEME_HE:
    case RB_SCHEME_POPHP:
    case RB_SCHEME_POPHE:
    case RB_SCHEME_EPOCHPOP:
        return 1;
    default:
        return 0;
    }
}

static _Atomic uintptr_t *rb_first_link(void) {
    switch (rb_g.cfg.structure) {
    case RB_DS_HASH_TABLE:
        return &rb_g.bucket_heads[0]->next;
    case RB_DS_EXT_BST:
        return (_Atomic uintptr_t *)&rb_g.root->left;
    default:
        return &rb_g.head->next;
    }
}

static void rb_sleep_slice(void) {
    struct timespec ts = {0, 20 * 1000 * 1000};
    nanosleep(&ts, NULL); /* returns early on signal delivery, by design */
}

/* Park inside an operation until the deadline.  Under the neutralizing
 * schemes the sleep is restartable: every broadcast lands back at the
 * checkpoint and the thread re-enters its read phase. */
static void rb_stall(int tid, uint64_t deadline_ns) {
    if (rb_g.cfg.scheme == RB_SCHEME_NBR || rb_g.cfg.scheme == RB_SCHEME_NBRPLUS) {
        while (sigsetjmp(rb_g.th[tid].env, 0))
            rb_sig_unblock();
        rb_nbr_begin_read(tid);
        while (rb_now_ns() < deadline_ns &&
               !atomic_load_explicit(&rb_g.stop, memory_order_relaxed))
            rb_sleep_slice();
        rb_nbr_end_read(tid, NULL, 0);
        return;
    }
    rb_op_begin(tid); /* epoch reservation pins reclamation for ebr/epochpop */
    if (rb_hookish_scheme())
        (void)rb_read_ptr(tid, rb_first_link(), 0);
    while (rb_now_ns() < deadline_ns &&
           !atomic_load_explicit(&rb_g.stop, memory_order_relaxed))
        rb_sleep_slice();
    rb_op_end(tid);
}

/* One entry per trial thread; every registered thread must call this (the
 * phases synchronize on the session barrier). */
int rb_worker_run(int tid, double duration_s, int ins_pct, int del_pct,
                  uint64_t seed, int stall_self, double prefill_frac,
                  uint64_t *out) {
    if (tid < 0 || tid != rb_tls_tid)
        return -1;
    uint64_t key_range = rb_g.cfg.key_range;
    pthread_barrier_wait(&rb_g.barrier);

    uint64_t prefilled = 0;
    if (tid == 0 && prefill_frac > 0) {
        uint64_t target = (uint64_t)(prefill_frac * (double)key_range);
        uint64_t st = seed ^ 0xC0FFEE123456789ULL;
        uint64_t attempts = target * 40 + 1000;
        while (prefilled < target && attempts--) {
            uint64_t key = rb_splitmix64(&st) % key_range;
            if (rb_ds_insert(tid, key) == 1)
                prefilled++;
        }
    }
    pthread_barrier_wait(&rb_g.barrier);

    uint64_t ops = 0, ins_ok = 0, del_ok = 0, ct_true = 0;
    int aborted = 0;
    uint64_t t0 = rb_now_ns();
    uint64_t deadline = t0 + (uint64_t)(duration_s * 1e9);
    if (stall_self) {
        rb_stall(tid, deadline);
    } else {
        uint64_t st = seed ^ (0x9E3779B97F4A7C15ULL * (uint64_t)(tid + 1));
        uint64_t budget = rb_g.cfg.mem_budget_bytes;
        for (;;) {
            if ((ops & 127) == 0) {
                if (rb_now_ns() >= deadline ||
                    atomic_load_explicit(&rb_g.stop, memory_order_relaxed))
                    break;
                if (budget && atomic_load_explicit(&rb_g.live_bytes,
                                                   memory_order_relaxed) > budget)
                    atomic_store_explicit(&rb_g.stop, 1, memory_order_release);
            }
            uint64_t roll = rb_splitmix64(&st) % 100;
            uint64_t key = rb_splitmix64(&st) % key_range;
            int rc;
            if (roll < (uint64_t)ins_pct) {
                rc = rb_ds_insert(tid, key);
                ins_ok += rc == 1;
            } else if (roll < (uint64_t)(ins_pct + del_pct)) {
                rc = rb_ds_delete(tid, key);
                del_ok += rc == 1;
            } else {
                rc = rb_ds_contains(tid, key);
                ct_true += rc == 1;
            }
            if (rc == RB_ABORTED) {
                aborted = 1;
                break;
            }
            ops++;
        }
    }
    uint64_t actual = rb_now_ns() - t0;

    pthread_barrier_wait(&rb_g.barrier);
    rb_quiesce_self(tid);
    pthread_barrier_wait(&rb_g.barrier);
    rb_drain_tid(tid);
    pthread_barrier_wait(&rb_g.barrier);

    out[0] = ops;
    out[1] = ins_ok;
    out[2] = del_ok;
    out[3] = ct_true;
    out[4] = actual;
    out[5] = prefilled;
    out[6] = (uint64_t)aborted;
    out[7] = 0;
    return 0;
}

/* Dump the first n (kind, key) pairs of a thread's op stream; the Python
 * side reproduces this exactly for the determinism check. */
void rb_opstream(uint64_t seed, int tid, int ins_pct, int del_pct,
                 uint64_t key_range, int n, uint8_t *kinds, uint64_t *keys) {
    uint64_t st = seed ^ (0x9E3779B97F4A7C15ULL * (uint64_t)(tid + 1));
    for (int i = 0; i < n; i++) {
        uint64_t roll = rb_splitmix64(&st) % 100;
        uint64_t key = rb_splitmix64(&st) % key_range;
        kinds[i] = roll < (uint64_t)ins_pct ? 0
                   : roll < (uint64_t)(ins_pct + del_pct) ? 1
                                                          : 2;
        keys[i] = key;
    }
}
