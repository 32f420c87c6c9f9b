/* Guard allocator: release mode frees for real, validate mode poisons and
 * quarantines so use-after-free shows up as a recorded violation instead of
 * silent corruption. */
#include "core.h"

void rb_alloc_init(void) {
    rb_quarantine *q = &rb_g.quar;
    q->cap = rb_g.cfg.quarantine_cap > 0 ? rb_g.cfg.quarantine_cap : (1 << 20);
    q->ring = calloc((size_t)q->cap, sizeof(rb_hdr *));
    q->head = 0;
    q->count = 0;
    pthread_mutex_init(&q->mu, NULL);
}

void rb_alloc_teardown(void) {
    rb_quarantine *q = &rb_g.quar;
    if (!q->ring)
        return;
    for (int64_t i = 0; i < q->count; i++) {
        int64_t idx = (q->head + i) % q->cap;
        free(q->ring[idx]);
    }
    free(q->ring);
    q->ring = NULL;
    q->count = 0;
    pthread_mutex_destroy(&q->mu);
}

static int rb_scheme_needs_era(int scheme) {
    return scheme == RB_SCHEME_HE || scheme == RB_SCHEME_POPHE;
}

/* Heap traffic is forbidden inside a restartable read phase (a restart
 * would leak or double-free it); validate mode turns the rule into a
 * recorded violation. */
static void rb_check_phase_rules(void) {
    if (!rb_g.cfg.alloc_validate)
        return;
    int tid = rb_tls_tid;
    if (tid < 0 || tid >= atomic_load_explicit(&rb_g.nthreads, memory_order_relaxed) ||
        rb_tls_gen != atomic_load_explicit(&rb_g.session_gen, memory_order_relaxed))
        return;
    if (rb_g.th[tid].handler_kind == RB_HANDLER_NBR &&
        atomic_load_explicit(&rb_g.th[tid].restartable, memory_order_relaxed))
        rb_record_violation(RB_VIOL_ALLOC_IN_READ_PHASE, tid);
}

rb_hdr *rb_alloc(uint32_t payload) {
    rb_check_phase_rules();
    uint32_t size = (uint32_t)sizeof(rb_hdr) + payload;
    rb_hdr *h = malloc(size);
    if (!h)
        return NULL;
    memset(h, 0, size);
    atomic_store_explicit(&h->canary, RB_CANARY_ALIVE, memory_order_relaxed);
    h->birth_era = rb_scheme_needs_era(rb_g.cfg.scheme)
                       ? atomic_load_explicit(&rb_g.epoch, memory_order_relaxed)
                       : 0;
    atomic_store_explicit(&h->retire_era, 0, memory_order_relaxed);
    h->size = size;
    atomic_store_explicit(&h->flags, 0, memory_order_relaxed);
    uint64_t live = atomic_fetch_add_explicit(&rb_g.live_bytes, size,
                                              memory_order_relaxed) + size;
    rb_atomic_max(&rb_g.peak_live_bytes, live);
    atomic_fetch_add_explicit(&rb_g.allocations, 1, memory_order_relaxed);
    return h;
}

static void rb_account_free(rb_hdr *h) {
    atomic_fetch_sub_explicit(&rb_g.live_bytes, h->size, memory_order_relaxed);
    atomic_fetch_add_explicit(&rb_g.frees, 1, memory_order_relaxed);
}

void rb_free_node(rb_hdr *h, int tid) {
    rb_check_phase_rules();
    if (!rb_g.cfg.alloc_validate) {
        rb_account_free(h);
        free(h);
        return;
    }
    uint64_t expect = RB_CANARY_ALIVE;
    if (!atomic_compare_exchange_strong_explicit(&h->canary, &expect, RB_CANARY_POISON,
                                                 memory_order_acq_rel,
                                                 memory_order_acquire)) {
        rb_record_violation(RB_VIOL_DOUBLE_FREE, tid);
        return;
    }
    rb_account_free(h);
    rb_quarantine *q = &rb_g.quar;
    rb_hdr *evicted = NULL;
    pthread_mutex_lock(&q->mu);
    if (q->count == q->cap) {
        evicted = q->ring[q->head];
        q->ring[q->head] = h;
        q->head = (q->head + 1) % q->cap;
    } else {
        q->ring[(q->head + q->count) % q->cap] = h;
        q->count++;
    }
    pthread_mutex_unlock(&q->mu);
    free(evicted);
}

int rb_chk(rb_hdr *h, int tid) {
    if (!rb_g.cfg.alloc_validate)
        return 1;
    if (atomic_load_explicit(&h->canary, memory_order_relaxed) != RB_CANARY_ALIVE) {
        rb_record_violation(RB_VIOL_POISON, tid);
        return 0;
    }
    return 1;
}

/* --- exported API ---------------------------------------------------- */

uint32_t rb_header_size(void) { return (uint32_t)sizeof(rb_hdr); }

uint64_t rb_dbg_alloc(uint32_t payload) { return (uint64_t)(uintptr_t)rb_alloc(payload); }

void rb_dbg_free(uint64_t handle, int tid) { rb_free_node((rb_hdr *)(uintptr_t)handle, tid); }

/* Reads the first payload word through the canary check; -1 on poison. */
int64_t rb_dbg_checked_read(uint64_t handle, int tid) {
    rb_hdr *h = (rb_hdr *)(uintptr_t)handle;
    if (!rb_chk(h, tid))
        return -1;
    return (int64_t) * (uint64_t *)(h + 1);
}

void rb_dbg_write(uint64_t handle, uint64_t value) {
    rb_hdr *h = (rb_hdr *)(uintptr_t)handle;
    *(uint64_t *)(h + 1) = value;
}

void rb_dbg_retire(int tid, uint64_t handle) {
    rb_retire(tid, (rb_hdr *)(uintptr_t)handle);
}

/* single-threaded test hook: enter/leave a read phase without arming a
 * checkpoint (only safe when nothing will signal this thread) */
void rb_dbg_phase(int tid, int enter) {
    if (enter)
        rb_nbr_begin_read(tid);
    else
        rb_nbr_end_read(tid, NULL, 0);
}

uint64_t rb_dbg_birth_era(uint64_t handle) {
    return ((rb_hdr *)(uintptr_t)handle)->birth_era;
}

void rb_dbg_epoch_add(uint64_t n) {
    atomic_fetch_add_explicit(&rb_g.epoch, n, memory_order_relaxed);
}

uint64_t rb_epoch(void) { return atomic_load(&rb_g.epoch); }

void rb_alloc_stats(uint64_t *out) {
    out[0] = atomic_load(&rb_g.live_bytes);
    out[1] = atomic_load(&rb_g.peak_live_bytes);
    out[2] = atomic_load(&rb_g.allocations);
    out[3] = atomic_load(&rb_g.frees);
    out[4] = (uint64_t)rb_g.quar.count;
    out[5] = atomic_load(&rb_g.peak_retired);
}
