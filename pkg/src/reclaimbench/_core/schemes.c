/* The reclamation schemes: leaky baseline, epoch-based, hazard pointers,
 * hazard eras, the publish-on-ping variants, the epoch/ping hybrid, and the
 * neutralization pair. */
#include "core.h"

int rb_scheme_handler_kind(int scheme) {
    switch (scheme) {
    case RB_SCHEME_NBR:
    case RB_SCHEME_NBRPLUS:
        return RB_HANDLER_NBR;
    case RB_SCHEME_POPHP:
    case RB_SCHEME_POPHE:
    case RB_SCHEME_EPOCHPOP:
        return RB_HANDLER_POP;
    default:
        return RB_HANDLER_NONE;
    }
}

static int rb_is_era_scheme(int s) { return s == RB_SCHEME_HE || s == RB_SCHEME_POPHE; }

void rb_scheme_init(void) { atomic_store(&rb_g.epoch, 0); }

void rb_scheme_thread_init(int tid) {
    rb_thread *t = &rb_g.th[tid];
    uintptr_t empty = rb_is_era_scheme(rb_g.cfg.scheme) ? (uintptr_t)RB_ERA_NONE : 0;
    for (int i = 0; i < RB_MAX_SLOTS; i++) {
        atomic_store_explicit(&t->shared_res[i], empty, memory_order_relaxed);
        atomic_store_explicit(&t->local_res[i], empty, memory_order_relaxed);
        atomic_store_explicit(&t->nbr_row[i], 0, memory_order_relaxed);
    }
    atomic_store_explicit(&t->publish_counter, 0, memory_order_relaxed);
    atomic_store_explicit(&t->restartable, 0, memory_order_relaxed);
    atomic_store_explicit(&t->reserved_epoch, RB_EPOCH_MAX, memory_order_relaxed);
    t->op_counter = 0;
    t->ebr_retire_counter = 0;
    t->first_lowm_entry = 1;
    t->bookmark_tail = 0;
    t->retires_since_scan = 0;
    t->bag.items = NULL;
    t->bag.size = 0;
    t->bag.cap = 0;
}

void rb_bag_push(rb_bag *b, rb_hdr *h) {
    if (b->size == b->cap) {
        b->cap = b->cap ? b->cap * 2 : 1024;
        b->items = realloc(b->items, (size_t)b->cap * sizeof(rb_hdr *));
    }
    b->items[b->size++] = h;
}

/* --- op brackets ------------------------------------------------------ */

void rb_op_begin(int tid) {
    rb_thread *t = &rb_g.th[tid];
    switch (rb_g.cfg.scheme) {
    case RB_SCHEME_EBR:
    case RB_SCHEME_EPOCHPOP:
        if (0 == (++t->op_counter % (uint64_t)rb_g.cfg.epoch_freq))
            atomic_fetch_add_explicit(&rb_g.epoch, 1, memory_order_relaxed);
        /* exchange = store + full fence: the reservation must be visible
         * before this thread reads any shared node */
        atomic_exchange_explicit(&t->reserved_epoch,
                                 atomic_load_explicit(&rb_g.epoch, memory_order_relaxed),
                                 memory_order_seq_cst);
        break;
    default:
        break;
    }
}

void rb_op_end(int tid) {
    rb_thread *t = &rb_g.th[tid];
    int s = rb_g.cfg.scheme;
    if (s == RB_SCHEME_EBR || s == RB_SCHEME_EPOCHPOP)
        atomic_store_explicit(&t->reserved_epoch, RB_EPOCH_MAX, memory_order_release);
    if (s == RB_SCHEME_HP || s == RB_SCHEME_HE) {
        uintptr_t empty = s == RB_SCHEME_HE ? (uintptr_t)RB_ERA_NONE : 0;
        int slots = s == RB_SCHEME_HE ? rb_g.cfg.max_he : rb_g.cfg.max_hp;
        for (int i = 0; i < slots; i++)
            atomic_store_explicit(&t->shared_res[i], empty, memory_order_release);
    }
    if (s == RB_SCHEME_POPHP || s == RB_SCHEME_POPHE || s == RB_SCHEME_EPOCHPOP) {
        uintptr_t empty = s == RB_SCHEME_POPHE ? (uintptr_t)RB_ERA_NONE : 0;
        int slots = s == RB_SCHEME_POPHE ? rb_g.cfg.max_he : rb_g.cfg.max_hp;
        for (int i = 0; i < slots; i++)
            atomic_store_explicit(&t->local_res[i], empty, memory_order_relaxed);
    }
}

/* --- read hooks -------------------------------------------------------- */

uintptr_t rb_read_ptr_raw(int tid, _Atomic uintptr_t *src, int slot) {
    rb_thread *t = &rb_g.th[tid];
    switch (rb_g.cfg.scheme) {
    case RB_SCHEME_HP:
        for (;;) {
            uintptr_t v = atomic_load_explicit(src, memory_order_acquire);
            atomic_exchange_explicit(&t->shared_res[slot], rb_unmark(v),
                                     memory_order_seq_cst);
            atomic_fetch_add_explicit(&t->fences_on_read_path, 1, memory_order_relaxed);
            if (atomic_load_explicit(src, memory_order_acquire) == v)
                return v;
        }
    case RB_SCHEME_HE: {
        uint64_t old_era =
            (uint64_t)atomic_load_explicit(&t->shared_res[slot], memory_order_relaxed);
        for (;;) {
            uintptr_t v = atomic_load_explicit(src, memory_order_acquire);
            uint64_t e = atomic_load_explicit(&rb_g.epoch, memory_order_acquire);
            if (e == old_era)
                return v;
            atomic_exchange_explicit(&t->shared_res[slot], (uintptr_t)e,
                                     memory_order_seq_cst);
            atomic_fetch_add_explicit(&t->fences_on_read_path, 1, memory_order_relaxed);
            old_era = e;
        }
    }
    case RB_SCHEME_POPHP:
    case RB_SCHEME_EPOCHPOP:
        for (;;) {
            uintptr_t v = atomic_load_explicit(src, memory_order_acquire);
            /* plain store: only this thread's own signal handler reads it */
            atomic_store_explicit(&t->local_res[slot], rb_unmark(v),
                                  memory_order_relaxed);
            if (atomic_load_explicit(src, memory_order_acquire) == v)
                return v;
        }
    case RB_SCHEME_POPHE: {
        uint64_t old_era =
            (uint64_t)atomic_load_explicit(&t->local_res[slot], memory_order_relaxed);
        for (;;) {
            uintptr_t v = atomic_load_explicit(src, memory_order_acquire);
            uint64_t e = atomic_load_explicit(&rb_g.epoch, memory_order_acquire);
            if (e == old_era)
                return v;
            atomic_store_explicit(&t->local_res[slot], (uintptr_t)e,
                                  memory_order_relaxed);
            old_era = e;
        }
    }
    default:
        return atomic_load_explicit(src, memory_order_acquire);
    }
}

uintptr_t rb_read_ptr(int tid, _Atomic uintptr_t *src, int slot) {
    return rb_unmark(rb_read_ptr_raw(tid, src, slot));
}

/* --- NBR phase markers -------------------------------------------------- */

void rb_nbr_begin_read(int tid) {
    rb_thread *t = &rb_g.th[tid];
    for (int i = 0; i < rb_g.cfg.nbr_max_res; i++)
        atomic_store_explicit(&t->nbr_row[i], 0, memory_order_relaxed);
    atomic_exchange_explicit(&t->restartable, 1, memory_order_seq_cst);
}

void rb_nbr_end_read(int tid, rb_hdr **recs, int n) {
    rb_thread *t = &rb_g.th[tid];
    for (int i = 0; i < rb_g.cfg.nbr_max_res; i++) {
        uintptr_t v = (recs && i < n) ? (uintptr_t)recs[i] : 0;
        atomic_store_explicit(&t->nbr_row[i], v, memory_order_relaxed);
    }
    /* full fence: reservations must be visible to anyone who observes the
     * thread as non-restartable */
    atomic_exchange_explicit(&t->restartable, 0, memory_order_seq_cst);
}

/* --- pointer set scratch ------------------------------------------------ */

#define RB_SET_CAP 2048 /* > 2 * RB_MAX_THREADS * RB_MAX_SLOTS, power of two */

typedef struct {
    uintptr_t slots[RB_SET_CAP];
    int n;
} rb_ptrset;

static void rb_set_init(rb_ptrset *s) {
    memset(s->slots, 0, sizeof(s->slots));
    s->n = 0;
}

static void rb_set_add(rb_ptrset *s, uintptr_t v) {
    if (!v)
        return;
    uint64_t h = (uint64_t)v * 0x9E3779B97F4A7C15ULL;
    for (uint64_t i = (h >> 52) & (RB_SET_CAP - 1);; i = (i + 1) & (RB_SET_CAP - 1)) {
        if (s->slots[i] == v)
            return;
        if (s->slots[i] == 0) {
            s->slots[i] = v;
            s->n++;
            return;
        }
    }
}

static int rb_set_has(const rb_ptrset *s, uintptr_t v) {
    if (!v)
        return 0;
    uint64_t h = (uint64_t)v * 0x9E3779B97F4A7C15ULL;
    for (uint64_t i = (h >> 52) & (RB_SET_CAP - 1);; i = (i + 1) & (RB_SET_CAP - 1)) {
        if (s->slots[i] == v)
            return 1;
        if (s->slots[i] == 0)
            return 0;
    }
}

/* --- reclamation passes -------------------------------------------------- */

static void rb_note_freed(int64_t n) {
    atomic_fetch_sub_explicit(&rb_g.retired_current, n, memory_order_relaxed);
}

static void rb_collect_hp(rb_ptrset *set) {
    int n = atomic_load(&rb_g.nthreads);
    rb_set_init(set);
    for (int i = 0; i < n; i++)
        for (int s = 0; s < rb_g.cfg.max_hp; s++)
            rb_set_add(set, atomic_load_explicit(&rb_g.th[i].shared_res[s],
                                                 memory_order_acquire));
}

/* keep nodes whose handle is reserved; free the rest of bag[0..limit) */
static void rb_reclaim_by_set(int tid, rb_bag *b, int64_t limit, const rb_ptrset *set) {
    int64_t kept = 0, freed = 0;
    for (int64_t i = 0; i < limit; i++) {
        rb_hdr *h = b->items[i];
        if (rb_set_has(set, (uintptr_t)h)) {
            b->items[kept++] = h;
        } else {
            rb_free_node(h, tid);
            freed++;
        }
    }
    for (int64_t i = limit; i < b->size; i++)
        b->items[kept++] = b->items[i];
    b->size = kept;
    rb_note_freed(freed);
    atomic_fetch_add_explicit(&rb_g.th[tid].reclaim_passes, 1, memory_order_relaxed);
}

int rb_he_can_free_eras(uint64_t be, uint64_t re, const uint64_t *eras, int n) {
    for (int i = 0; i < n; i++) {
        uint64_t e = eras[i];
        if (e == RB_ERA_NONE || e < be || e > re)
            continue;
        return 0;
    }
    return 1;
}

static void rb_reclaim_by_eras(int tid, rb_bag *b, int64_t limit,
                               const uint64_t *eras, int nera) {
    int64_t kept = 0, freed = 0;
    for (int64_t i = 0; i < limit; i++) {
        rb_hdr *h = b->items[i];
        uint64_t re = atomic_load_explicit(&h->retire_era, memory_order_relaxed);
        if (rb_he_can_free_eras(h->birth_era, re, eras, nera)) {
            rb_free_node(h, tid);
            freed++;
        } else {
            b->items[kept++] = h;
        }
    }
    for (int64_t i = limit; i < b->size; i++)
        b->items[kept++] = b->items[i];
    b->size = kept;
    rb_note_freed(freed);
    atomic_fetch_add_explicit(&rb_g.th[tid].reclaim_passes, 1, memory_order_relaxed);
}

static int rb_collect_eras(uint64_t *eras, int shared) {
    int n = atomic_load(&rb_g.nthreads);
    int k = 0;
    int slots = rb_g.cfg.max_he;
    for (int i = 0; i < n; i++)
        for (int s = 0; s < slots; s++)
            eras[k++] = (uint64_t)atomic_load_explicit(
                shared ? &rb_g.th[i].shared_res[s] : &rb_g.th[i].local_res[s],
                memory_order_acquire);
    return k;
}

static void rb_ebr_pass(int tid) {
    int n = atomic_load(&rb_g.nthreads);
    uint64_t min_epoch = RB_EPOCH_MAX;
    for (int i = 0; i < n; i++) {
        uint64_t e = atomic_load_explicit(&rb_g.th[i].reserved_epoch,
                                          memory_order_acquire);
        if (e < min_epoch)
            min_epoch = e;
    }
    rb_bag *b = &rb_g.th[tid].bag;
    int64_t kept = 0, freed = 0;
    for (int64_t i = 0; i < b->size; i++) {
        rb_hdr *h = b->items[i];
        if (atomic_load_explicit(&h->retire_era, memory_order_relaxed) < min_epoch) {
            rb_free_node(h, tid);
            freed++;
        } else {
            b->items[kept++] = h;
        }
    }
    b->size = kept;
    rb_note_freed(freed);
    atomic_fetch_add_explicit(&rb_g.th[tid].reclaim_passes, 1, memory_order_relaxed);
}

/* the reclaimer's own reservations are tracked locally too: publish them
 * directly (same thread, so no signal needed) before scanning */
static void rb_self_publish(int tid) {
    rb_thread *t = &rb_g.th[tid];
    int slots = rb_g.cfg.max_hp > rb_g.cfg.max_he ? rb_g.cfg.max_hp : rb_g.cfg.max_he;
    for (int i = 0; i < slots; i++)
        atomic_store_explicit(
            &t->shared_res[i],
            atomic_load_explicit(&t->local_res[i], memory_order_relaxed),
            memory_order_relaxed);
    atomic_fetch_add_explicit(&t->publish_counter, 1, memory_order_release);
}

/* ping every peer, then spin until each live peer has published at least
 * once since the pre-ping counter snapshot (Alg. "collect, ping, wait") */
static void rb_ping_and_wait(int tid) {
    rb_self_publish(tid);
    int n = atomic_load(&rb_g.nthreads);
    uint64_t collected[RB_MAX_THREADS];
    for (int i = 0; i < n; i++)
        collected[i] = atomic_load_explicit(&rb_g.th[i].publish_counter,
                                            memory_order_acquire);
    atomic_thread_fence(memory_order_seq_cst); /* snapshot strictly precedes pings */
    int delivered = rb_broadcast_from(tid);
    if (delivered > 0)
        atomic_fetch_add_explicit(&rb_g.th[tid].pings_sent, (uint64_t)delivered,
                                  memory_order_relaxed);
    for (int i = 0; i < n; i++) {
        if (i == tid)
            continue;
        while (atomic_load_explicit(&rb_g.th[i].publish_counter,
                                    memory_order_acquire) <= collected[i]) {
            if (!atomic_load_explicit(&rb_g.th[i].alive, memory_order_acquire))
                break; /* terminated peers cannot hold references */
            sched_yield();
        }
    }
}

static void rb_nbr_reclaim(int tid, int64_t limit) {
    rb_ptrset set;
    rb_set_init(&set);
    int n = atomic_load(&rb_g.nthreads);
    for (int i = 0; i < n; i++)
        for (int s = 0; s < rb_g.cfg.nbr_max_res; s++)
            rb_set_add(&set, atomic_load_explicit(&rb_g.th[i].nbr_row[s],
                                                  memory_order_acquire));
    rb_reclaim_by_set(tid, &rb_g.th[tid].bag, limit, &set);
}

static int64_t rb_nbr_lo_wm(void) {
    double f = rb_g.cfg.nbr_lo_frac;
    if (f <= 0 || f >= 1)
        f = 0.5;
    int64_t lo = (int64_t)((double)rb_g.cfg.nbr_hi_wm * f);
    return lo > 0 ? lo : 1;
}

static uint64_t rb_round_up_even(uint64_t v) { return (v + 1) & ~1ULL; }

void rb_retire(int tid, rb_hdr *h) {
    rb_thread *t = &rb_g.th[tid];
    uint32_t prev = atomic_fetch_or_explicit(&h->flags, RB_F_RETIRED,
                                             memory_order_acq_rel);
    if (prev & RB_F_RETIRED) {
        rb_record_violation(RB_VIOL_DOUBLE_RETIRE, tid);
        return;
    }
    int scheme = rb_g.cfg.scheme;
    if (scheme == RB_SCHEME_UNSAFE) {
        /* no synchronization at all: exists to prove the oracle catches it */
        rb_free_node(h, tid);
        return;
    }
    int64_t cur = atomic_fetch_add_explicit(&rb_g.retired_current, 1,
                                            memory_order_relaxed) + 1;
    rb_atomic_max(&rb_g.peak_retired, (uint64_t)cur);
    rb_bag *b = &t->bag;
    switch (scheme) {
    case RB_SCHEME_NONE:
        rb_bag_push(b, h); /* tracked leak; reclaimed only at teardown */
        break;
    case RB_SCHEME_HP:
        rb_bag_push(b, h);
        if (b->size >= rb_g.cfg.reclaim_freq) {
            rb_ptrset set;
            rb_collect_hp(&set);
            rb_reclaim_by_set(tid, b, b->size, &set);
        }
        break;
    case RB_SCHEME_HE: {
        atomic_store_explicit(&h->retire_era,
                              atomic_load_explicit(&rb_g.epoch, memory_order_relaxed),
                              memory_order_relaxed);
        rb_bag_push(b, h);
        if (b->size >= rb_g.cfg.reclaim_freq) {
            atomic_fetch_add_explicit(&rb_g.epoch, 1, memory_order_seq_cst);
            uint64_t eras[RB_MAX_THREADS * RB_MAX_SLOTS];
            int k = rb_collect_eras(eras, 1);
            rb_reclaim_by_eras(tid, b, b->size, eras, k);
        }
        break;
    }
    case RB_SCHEME_EBR:
        atomic_store_explicit(&h->retire_era,
                              atomic_load_explicit(&rb_g.epoch, memory_order_relaxed),
                              memory_order_relaxed);
        rb_bag_push(b, h);
        if (0 == (++t->ebr_retire_counter % rb_g.cfg.reclaim_freq))
            rb_ebr_pass(tid);
        break;
    case RB_SCHEME_POPHP:
        rb_bag_push(b, h);
        if (b->size >= rb_g.cfg.reclaim_freq) {
            rb_ping_and_wait(tid);
            rb_ptrset set;
            rb_collect_hp(&set);
            rb_reclaim_by_set(tid, b, b->size, &set);
        }
        break;
    case RB_SCHEME_POPHE: {
        atomic_store_explicit(&h->retire_era,
                              atomic_load_explicit(&rb_g.epoch, memory_order_relaxed),
                              memory_order_relaxed);
        rb_bag_push(b, h);
        if (b->size >= rb_g.cfg.reclaim_freq) {
            atomic_fetch_add_explicit(&rb_g.epoch, 1, memory_order_seq_cst);
            rb_ping_and_wait(tid);
            uint64_t eras[RB_MAX_THREADS * RB_MAX_SLOTS];
            int k = rb_collect_eras(eras, 1);
            rb_reclaim_by_eras(tid, b, b->size, eras, k);
        }
        break;
    }
    case RB_SCHEME_EPOCHPOP:
        atomic_store_explicit(&h->retire_era,
                              atomic_load_explicit(&rb_g.epoch, memory_order_relaxed),
                              memory_order_relaxed);
        rb_bag_push(b, h);
        if (0 == (++t->ebr_retire_counter % rb_g.cfg.reclaim_freq)) {
            rb_ebr_pass(tid);
            double c = rb_g.cfg.epochpop_c;
            if (c > 0 && (double)b->size >= c * (double)rb_g.cfg.reclaim_freq) {
                atomic_fetch_add_explicit(&t->slow_path_triggers, 1,
                                          memory_order_relaxed);
                rb_ping_and_wait(tid);
                rb_ptrset set;
                rb_collect_hp(&set);
                rb_reclaim_by_set(tid, b, b->size, &set);
            }
        }
        break;
    case RB_SCHEME_NBR:
        if (b->size >= rb_g.cfg.nbr_hi_wm) {
            rb_broadcast_from(tid);
            rb_post_delay();
            rb_nbr_reclaim(tid, b->size);
        }
        rb_bag_push(b, h);
        break;
    case RB_SCHEME_NBRPLUS: {
        if (b->size >= rb_g.cfg.nbr_hi_wm) {
            atomic_fetch_add_explicit(&rb_g.announce_ts[tid], 1, memory_order_seq_cst);
            rb_broadcast_from(tid);
            rb_post_delay();
            atomic_fetch_add_explicit(&rb_g.announce_ts[tid], 1, memory_order_seq_cst);
            rb_nbr_reclaim(tid, b->size);
            t->first_lowm_entry = 1;
        } else if (b->size >= rb_nbr_lo_wm()) {
            int n = atomic_load(&rb_g.nthreads);
            if (t->first_lowm_entry) {
                t->bookmark_tail = b->size;
                for (int i = 0; i < n; i++)
                    t->scan_ts[i] =
                        atomic_load_explicit(&rb_g.announce_ts[i], memory_order_acquire);
                t->first_lowm_entry = 0;
                t->retires_since_scan = 0;
            } else if (++t->retires_since_scan >= rb_g.cfg.nbr_scan_amort) {
                t->retires_since_scan = 0;
                for (int i = 0; i < n; i++) {
                    if (i == tid)
                        continue;
                    uint64_t now = atomic_load_explicit(&rb_g.announce_ts[i],
                                                        memory_order_acquire);
                    /* a full broadcast begun and finished inside this episode:
                     * odd snapshots are rounded up so the literal +2 cannot
                     * count a broadcast that started before the snapshot */
                    if (now >= rb_round_up_even(t->scan_ts[i]) + 2) {
                        atomic_fetch_add_explicit(&t->lowm_piggybacks, 1,
                                                  memory_order_relaxed);
                        rb_nbr_reclaim(tid, t->bookmark_tail);
                        t->first_lowm_entry = 1;
                        break;
                    }
                }
            }
        }
        rb_bag_push(b, h);
        break;
    }
    default:
        rb_bag_push(b, h);
        break;
    }
}

/* reset the calling thread's visible reservation state (between phases) */
void rb_quiesce_self(int tid) {
    rb_thread *t = &rb_g.th[tid];
    uintptr_t empty = rb_is_era_scheme(rb_g.cfg.scheme) ? (uintptr_t)RB_ERA_NONE : 0;
    for (int i = 0; i < RB_MAX_SLOTS; i++) {
        atomic_store_explicit(&t->shared_res[i], empty, memory_order_release);
        atomic_store_explicit(&t->local_res[i], empty, memory_order_relaxed);
        atomic_store_explicit(&t->nbr_row[i], 0, memory_order_release);
    }
    atomic_store_explicit(&t->reserved_epoch, RB_EPOCH_MAX, memory_order_release);
    atomic_store_explicit(&t->restartable, 0, memory_order_seq_cst);
}

void rb_drain_tid(int tid) {
    rb_thread *t = &rb_g.th[tid];
    rb_bag *b = &t->bag;
    if (b->size == 0)
        return;
    switch (rb_g.cfg.scheme) {
    case RB_SCHEME_HP: {
        rb_ptrset set;
        rb_collect_hp(&set);
        rb_reclaim_by_set(tid, b, b->size, &set);
        break;
    }
    case RB_SCHEME_HE: {
        atomic_fetch_add_explicit(&rb_g.epoch, 1, memory_order_seq_cst);
        uint64_t eras[RB_MAX_THREADS * RB_MAX_SLOTS];
        int k = rb_collect_eras(eras, 1);
        rb_reclaim_by_eras(tid, b, b->size, eras, k);
        break;
    }
    case RB_SCHEME_EBR:
        rb_ebr_pass(tid);
        break;
    case RB_SCHEME_POPHP:
    case RB_SCHEME_EPOCHPOP: {
        rb_ping_and_wait(tid);
        rb_ptrset set;
        rb_collect_hp(&set);
        rb_reclaim_by_set(tid, b, b->size, &set);
        break;
    }
    case RB_SCHEME_POPHE: {
        atomic_fetch_add_explicit(&rb_g.epoch, 1, memory_order_seq_cst);
        rb_ping_and_wait(tid);
        uint64_t eras[RB_MAX_THREADS * RB_MAX_SLOTS];
        int k = rb_collect_eras(eras, 1);
        rb_reclaim_by_eras(tid, b, b->size, eras, k);
        break;
    }
    case RB_SCHEME_NBR:
        rb_broadcast_from(tid);
        rb_post_delay();
        rb_nbr_reclaim(tid, b->size);
        break;
    case RB_SCHEME_NBRPLUS:
        atomic_fetch_add_explicit(&rb_g.announce_ts[tid], 1, memory_order_seq_cst);
        rb_broadcast_from(tid);
        rb_post_delay();
        atomic_fetch_add_explicit(&rb_g.announce_ts[tid], 1, memory_order_seq_cst);
        rb_nbr_reclaim(tid, b->size);
        t->first_lowm_entry = 1;
        break;
    default:
        break; /* none: tracked leak lives until teardown */
    }
}

/* --- exported unit-test helpers ---------------------------------------- */

int rb_he_can_free(uint64_t be, uint64_t re, const uint64_t *eras, int n) {
    return rb_he_can_free_eras(be, re, eras, n);
}

int64_t rb_bag_size(int tid) { return rb_g.th[tid].bag.size; }

uint64_t rb_publish_counter(int tid) {
    return atomic_load(&rb_g.th[tid].publish_counter);
}

uint64_t rb_announce_ts(int tid) { return atomic_load(&rb_g.announce_ts[tid]); }

int rb_restartable(int tid) { return atomic_load(&rb_g.th[tid].restartable); }
