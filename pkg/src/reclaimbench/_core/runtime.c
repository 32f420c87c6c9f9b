/* Thread registry, signal bus and the process-wide handler. */
#include "core.h"

rb_globals rb_g;
__thread int rb_tls_tid = -1;
__thread uint64_t rb_tls_gen = 0;

static _Atomic int rb_handler_installed = 0;
static int rb_installed_signum = 0;

/* sigprobe target: when set, the handler records arrival timestamps for the
 * probe instead of dispatching reclamation work. */
static _Atomic uintptr_t rb_probe_thread = 0;
static _Atomic uint64_t rb_probe_seq = 0;
static _Atomic uint64_t rb_probe_stamp = 0;

void rb_sig_unblock(void) {
    sigset_t ss;
    sigemptyset(&ss);
    sigaddset(&ss, rb_installed_signum);
    pthread_sigmask(SIG_UNBLOCK, &ss, NULL);
}

static void rb_handler(int sig, siginfo_t *info, void *uctx) {
    (void)sig;
    (void)info;
    (void)uctx;
    pthread_t self = pthread_self();
    if (atomic_load_explicit(&rb_probe_thread, memory_order_acquire) == (uintptr_t)self) {
        atomic_store_explicit(&rb_probe_stamp, rb_now_ns(), memory_order_relaxed);
        atomic_fetch_add_explicit(&rb_probe_seq, 1, memory_order_release);
        return;
    }
    int tid = rb_tls_tid;
    if (tid < 0 || tid >= atomic_load_explicit(&rb_g.nthreads, memory_order_relaxed) ||
        rb_tls_gen != atomic_load_explicit(&rb_g.session_gen, memory_order_relaxed))
        return;
    rb_thread *t = &rb_g.th[tid];
    atomic_fetch_add_explicit(&rb_g.signals_received, 1, memory_order_relaxed);
    atomic_fetch_add_explicit(&t->handler_entries, 1, memory_order_relaxed);
    switch (t->handler_kind) {
    case RB_HANDLER_POP: {
        /* copy local reservations to the shared row, then bump the publish
         * counter with release ordering so a waiting reclaimer that observes
         * the bump also observes the row */
        int slots = rb_g.cfg.max_hp > rb_g.cfg.max_he ? rb_g.cfg.max_hp : rb_g.cfg.max_he;
        for (int i = 0; i < slots; i++) {
            uintptr_t v = atomic_load_explicit(&t->local_res[i], memory_order_relaxed);
            atomic_store_explicit(&t->shared_res[i], v, memory_order_relaxed);
        }
        atomic_fetch_add_explicit(&t->publish_counter, 1, memory_order_release);
        break;
    }
    case RB_HANDLER_NBR:
        if (atomic_load_explicit(&t->restartable, memory_order_relaxed)) {
            atomic_fetch_add_explicit(&t->restarts, 1, memory_order_relaxed);
            /* non-local transfer back to the armed checkpoint; the signal
             * stays blocked until the checkpoint loop unblocks it */
            siglongjmp(t->env, 1);
        }
        break;
    default:
        break;
    }
}

void rb_install_handler(int signum) {
    rb_installed_signum = signum;
    struct sigaction sa;
    memset(&sa, 0, sizeof(sa));
    sa.sa_sigaction = rb_handler;
    sa.sa_flags = SA_SIGINFO | SA_RESTART;
    sigemptyset(&sa.sa_mask);
    sigaction(signum, &sa, NULL);
    atomic_store(&rb_handler_installed, 1);
}

int rb_broadcast_from(int tid) {
    int n = atomic_load_explicit(&rb_g.nthreads, memory_order_acquire);
    if (tid < 0 || tid >= n)
        return -1;
    int delivered = 0;
    for (int i = 0; i < n; i++) {
        if (i == tid)
            continue;
        rb_thread *t = &rb_g.th[i];
        if (!atomic_load_explicit(&t->alive, memory_order_acquire))
            continue;
        int rc = pthread_kill(t->os_thread, rb_installed_signum);
        if (rc != 0) {
            /* zombie or gone: drop it from every future broadcast */
            atomic_store_explicit(&t->alive, 0, memory_order_release);
            continue;
        }
        delivered++;
    }
    atomic_fetch_add_explicit(&rb_g.signals_sent, (uint64_t)delivered, memory_order_relaxed);
    atomic_fetch_add_explicit(&rb_g.broadcasts, 1, memory_order_relaxed);
    return delivered;
}

void rb_post_delay(void) {
    int64_t d = rb_g.cfg.delay_ns;
    if (d <= 0)
        return;
    uint64_t until = rb_now_ns() + (uint64_t)d;
    while (rb_now_ns() < until) {
        /* spin: in-flight IPIs are shorter than a syscall sleep */
    }
}

void rb_record_violation(int kind, int tid) {
    (void)tid;
    if (kind >= 0 && kind < RB_VIOL_KINDS)
        atomic_fetch_add_explicit(&rb_g.violations[kind], 1, memory_order_relaxed);
    atomic_fetch_add_explicit(&rb_g.violations_total, 1, memory_order_relaxed);
    atomic_store_explicit(&rb_g.stop, 1, memory_order_release);
}

/* --- exported API ---------------------------------------------------- */

int rb_env_init(int signum) {
    if (signum <= 0)
        signum = SIGRTMIN;
    if (!atomic_load(&rb_handler_installed) || signum != rb_installed_signum)
        rb_install_handler(signum);
    return signum;
}

int rb_session_open(const rb_config *cfg) {
    if (atomic_load(&rb_g.active))
        return -1;
    atomic_fetch_add(&rb_g.session_gen, 1);
    memset(&rb_g.th, 0, sizeof(rb_g.th));
    rb_g.cfg = *cfg;
    if (rb_g.cfg.max_threads < 1 || rb_g.cfg.max_threads > RB_MAX_THREADS)
        return -2;
    if (rb_g.cfg.max_hp > RB_MAX_SLOTS || rb_g.cfg.max_he > RB_MAX_SLOTS ||
        rb_g.cfg.nbr_max_res > RB_MAX_SLOTS)
        return -3;
    atomic_store(&rb_g.nthreads, 0);
    atomic_store(&rb_g.stop, 0);
    atomic_store(&rb_g.epoch, 0);
    for (int i = 0; i < RB_MAX_THREADS; i++)
        atomic_store(&rb_g.announce_ts[i], 0);
    atomic_store(&rb_g.live_bytes, 0);
    atomic_store(&rb_g.peak_live_bytes, 0);
    atomic_store(&rb_g.allocations, 0);
    atomic_store(&rb_g.frees, 0);
    atomic_store(&rb_g.retired_current, 0);
    atomic_store(&rb_g.peak_retired, 0);
    for (int i = 0; i < RB_VIOL_KINDS; i++)
        atomic_store(&rb_g.violations[i], 0);
    atomic_store(&rb_g.violations_total, 0);
    atomic_store(&rb_g.signals_sent, 0);
    atomic_store(&rb_g.signals_received, 0);
    atomic_store(&rb_g.broadcasts, 0);
    rb_env_init(rb_g.signum ? rb_g.signum : 0);
    rb_alloc_init();
    rb_scheme_init();
    if (rb_ds_init() != 0) {
        rb_alloc_teardown();
        return -4;
    }
    if (rb_g.barrier_ready) {
        pthread_barrier_destroy(&rb_g.barrier);
        rb_g.barrier_ready = 0;
    }
    pthread_barrier_init(&rb_g.barrier, NULL, (unsigned)rb_g.cfg.max_threads);
    rb_g.barrier_ready = 1;
    atomic_store(&rb_g.active, 1);
    return 0;
}

void rb_session_close(void) {
    if (!atomic_load(&rb_g.active))
        return;
    atomic_store(&rb_g.active, 0);
    rb_ds_teardown();
    int n = atomic_load(&rb_g.nthreads);
    for (int i = 0; i < n; i++) {
        rb_bag *b = &rb_g.th[i].bag;
        for (int64_t j = 0; j < b->size; j++)
            free(b->items[j]);
        free(b->items);
        b->items = NULL;
        b->size = b->cap = 0;
    }
    rb_alloc_teardown();
    if (rb_g.barrier_ready) {
        pthread_barrier_destroy(&rb_g.barrier);
        rb_g.barrier_ready = 0;
    }
    atomic_store(&rb_g.nthreads, 0);
    rb_tls_tid = -1;
}

int rb_session_active(void) { return atomic_load(&rb_g.active); }

int rb_register(int handler_kind) {
    if (!atomic_load(&rb_g.active))
        return -10;
    if (rb_tls_tid >= 0 && rb_tls_gen == atomic_load(&rb_g.session_gen))
        return -2; /* AlreadyRegistered */
    int n = atomic_load(&rb_g.nthreads);
    for (;;) {
        if (n >= rb_g.cfg.max_threads)
            return -1; /* RegistryFull */
        if (atomic_compare_exchange_weak(&rb_g.nthreads, &n, n + 1))
            break;
    }
    int tid = n;
    rb_thread *t = &rb_g.th[tid];
    t->os_thread = pthread_self();
    t->handler_kind =
        handler_kind >= 0 ? handler_kind : rb_scheme_handler_kind(rb_g.cfg.scheme);
    rb_scheme_thread_init(tid);
    atomic_store_explicit(&t->alive, 1, memory_order_release);
    rb_tls_tid = tid;
    rb_tls_gen = atomic_load(&rb_g.session_gen);
    return tid;
}

int rb_mark_self_done(int tid) {
    if (tid < 0 || tid >= atomic_load(&rb_g.nthreads))
        return -1;
    atomic_store_explicit(&rb_g.th[tid].alive, 0, memory_order_release);
    return 0;
}

int rb_forget_thread_binding(void) {
    /* lets one OS thread drive several sessions in sequence */
    rb_tls_tid = -1;
    return 0;
}

int rb_broadcast(int from_tid) { return rb_broadcast_from(from_tid); }

void rb_post_broadcast_delay(void) { rb_post_delay(); }

int rb_alive(int tid) {
    if (tid < 0 || tid >= atomic_load(&rb_g.nthreads))
        return 0;
    return atomic_load(&rb_g.th[tid].alive);
}

int rb_handler_kind_of(int tid) {
    if (tid < 0 || tid >= atomic_load(&rb_g.nthreads))
        return -1;
    return rb_g.th[tid].handler_kind;
}

/* Counter snapshot; layout mirrored by the Python binding. */
void rb_counters(uint64_t *out) {
    int n = atomic_load(&rb_g.nthreads);
    uint64_t handler_entries = 0, restarts = 0, fences = 0, pings = 0, slow = 0,
             passes = 0, piggy = 0;
    for (int i = 0; i < n; i++) {
        rb_thread *t = &rb_g.th[i];
        handler_entries += atomic_load(&t->handler_entries);
        restarts += atomic_load(&t->restarts);
        fences += atomic_load(&t->fences_on_read_path);
        pings += atomic_load(&t->pings_sent);
        slow += atomic_load(&t->slow_path_triggers);
        passes += atomic_load(&t->reclaim_passes);
        piggy += atomic_load(&t->lowm_piggybacks);
    }
    out[0] = atomic_load(&rb_g.signals_sent);
    out[1] = atomic_load(&rb_g.signals_received);
    out[2] = handler_entries;
    out[3] = restarts;
    out[4] = pings;
    out[5] = fences;
    out[6] = slow;
    out[7] = (uint64_t)atomic_load(&rb_g.retired_current);
    out[8] = atomic_load(&rb_g.peak_retired);
    out[9] = passes;
    out[10] = atomic_load(&rb_g.epoch);
    out[11] = piggy;
    out[12] = atomic_load(&rb_g.broadcasts);
    out[13] = atomic_load(&rb_g.violations_total);
}

int64_t rb_violations(void) { return (int64_t)atomic_load(&rb_g.violations_total); }

void rb_violation_kinds(uint64_t *out) {
    for (int i = 0; i < RB_VIOL_KINDS; i++)
        out[i] = atomic_load(&rb_g.violations[i]);
}

void rb_stop(void) { atomic_store(&rb_g.stop, 1); }

/* Checkpoint probe: runs a read phase that spins until the deadline, counting
 * neutralization restarts.  Reports whether the signal was unblocked after
 * each restore (the mask assertion from the checkpoint contract). */
int rb_checkpoint_probe(int tid, int64_t spin_ns, int32_t *out_restarts,
                        int32_t *out_mask_ok) {
    if (tid < 0 || tid != rb_tls_tid)
        return -1;
    rb_thread *t = &rb_g.th[tid];
    volatile int32_t restarts = 0;
    volatile int32_t mask_ok = 1;
    uint64_t deadline = rb_now_ns() + (uint64_t)spin_ns;
    while (sigsetjmp(t->env, 0)) {
        /* resumed from the handler: signal must still be blocked here */
        restarts++;
        sigset_t cur;
        pthread_sigmask(SIG_BLOCK, NULL, &cur);
        if (!sigismember(&cur, rb_installed_signum))
            mask_ok = 0;
        rb_sig_unblock();
        pthread_sigmask(SIG_BLOCK, NULL, &cur);
        if (sigismember(&cur, rb_installed_signum))
            mask_ok = 0;
    }
    rb_nbr_begin_read(tid);
    while (rb_now_ns() < deadline) {
        /* restartable spin */
    }
    rb_nbr_end_read(tid, NULL, 0);
    *out_restarts = restarts;
    *out_mask_ok = mask_ok;
    return 0;
}

/* --- signal latency probe -------------------------------------------- */

typedef struct {
    _Atomic int ready;
    _Atomic int done;
    int pin_cpu;
    int pinned;
} rb_probe_ctx;

static void *rb_probe_receiver(void *arg) {
    rb_probe_ctx *ctx = (rb_probe_ctx *)arg;
    if (ctx->pin_cpu >= 0) {
        cpu_set_t set;
        CPU_ZERO(&set);
        CPU_SET(ctx->pin_cpu, &set);
        if (pthread_setaffinity_np(pthread_self(), sizeof(set), &set) != 0)
            ctx->pinned = 0;
    }
    atomic_store_explicit(&rb_probe_thread, (uintptr_t)pthread_self(),
                          memory_order_release);
    atomic_store_explicit(&ctx->ready, 1, memory_order_release);
    while (!atomic_load_explicit(&ctx->done, memory_order_acquire)) {
        /* spin so a running thread receives the IPI path, not the wakeup path */
        sched_yield();
    }
    atomic_store_explicit(&rb_probe_thread, 0, memory_order_release);
    return NULL;
}

int rb_sigprobe(int samples, int pin, int64_t *send_ns, int64_t *e2e_ns) {
    if (samples <= 0)
        return -1;
    rb_env_init(rb_installed_signum ? rb_installed_signum : 0);
    rb_probe_ctx ctx;
    atomic_store(&ctx.ready, 0);
    atomic_store(&ctx.done, 0);
    ctx.pinned = 1;
    long ncpu = sysconf(_SC_NPROCESSORS_ONLN);
    int degraded = 0;
    if (pin && ncpu >= 2) {
        ctx.pin_cpu = 1;
        cpu_set_t set;
        CPU_ZERO(&set);
        CPU_SET(0, &set);
        if (pthread_setaffinity_np(pthread_self(), sizeof(set), &set) != 0)
            degraded = 1;
    } else {
        ctx.pin_cpu = -1;
        degraded = 1;
    }
    pthread_t rec;
    if (pthread_create(&rec, NULL, rb_probe_receiver, &ctx) != 0)
        return -2;
    while (!atomic_load_explicit(&ctx.ready, memory_order_acquire))
        sched_yield();
    if (!ctx.pinned)
        degraded = 1;
    for (int i = 0; i < samples; i++) {
        uint64_t seq0 = atomic_load_explicit(&rb_probe_seq, memory_order_acquire);
        uint64_t t0 = rb_now_ns();
        pthread_kill(rec, rb_installed_signum);
        uint64_t t1 = rb_now_ns();
        while (atomic_load_explicit(&rb_probe_seq, memory_order_acquire) == seq0) {
            /* wait for handler entry on the receiver */
        }
        uint64_t th = atomic_load_explicit(&rb_probe_stamp, memory_order_relaxed);
        send_ns[i] = (int64_t)(t1 - t0);
        e2e_ns[i] = th > t0 ? (int64_t)(th - t0) : 0;
    }
    atomic_store_explicit(&ctx.done, 1, memory_order_release);
    pthread_join(rec, NULL);
    if (pin && ncpu >= 2) {
        cpu_set_t all;
        CPU_ZERO(&all);
        for (long c = 0; c < ncpu; c++)
            CPU_SET((int)c, &all);
        pthread_setaffinity_np(pthread_self(), sizeof(all), &all);
    }
    return degraded;
}
