/* Shared internals of the compiled reclamation core.
 *
 * One process-wide session at a time: a fixed thread registry, one guard
 * allocator, one reclamation scheme instance and one set structure.  All
 * cross-thread state lives in `rb_g` so the signal handler can reach it.
 */
#ifndef RB_CORE_H
#define RB_CORE_H

#define _GNU_SOURCE
#include <errno.h>
#include <pthread.h>
#include <sched.h>
#include <unistd.h>
#include <setjmp.h>
#include <signal.h>
#include <stdatomic.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

#define RB_MAX_THREADS 64
#define RB_MAX_SLOTS 8 /* compile-time cap on MAX_HP / MAX_HE */

#define RB_CANARY_ALIVE 0xA11CE5A11FE0F00DULL
#define RB_CANARY_POISON 0xDEADBEEFDEADBEEFULL
#define RB_ERA_NONE UINT64_MAX
#define RB_EPOCH_MAX UINT64_MAX

/* scheme kinds (wire values shared with Python) */
enum {
    RB_SCHEME_NONE = 0,
    RB_SCHEME_EBR = 1,
    RB_SCHEME_HP = 2,
    RB_SCHEME_HE = 3,
    RB_SCHEME_POPHP = 4,
    RB_SCHEME_POPHE = 5,
    RB_SCHEME_EPOCHPOP = 6,
    RB_SCHEME_NBR = 7,
    RB_SCHEME_NBRPLUS = 8,
    RB_SCHEME_UNSAFE = 9, /* frees on retire; exists to prove the UAF oracle bites */
};

/* structure kinds */
enum {
    RB_DS_LAZY_LIST = 0,
    RB_DS_HARRIS_LIST = 1,
    RB_DS_HM_LIST = 2,
    RB_DS_HASH_TABLE = 3,
    RB_DS_EXT_BST = 4,
};

/* handler kinds */
enum {
    RB_HANDLER_NONE = 0,
    RB_HANDLER_NBR = 1,
    RB_HANDLER_POP = 2,
};

/* violation kinds */
enum {
    RB_VIOL_POISON = 0,
    RB_VIOL_DOUBLE_FREE = 1,
    RB_VIOL_DOUBLE_RETIRE = 2,
    RB_VIOL_ALLOC_IN_READ_PHASE = 3,
    RB_VIOL_KINDS = 4,
};

/* op results */
#define RB_ABORTED (-2)

typedef struct {
    int32_t max_threads;
    int32_t scheme;
    int32_t structure;
    int32_t alloc_validate;
    uint64_t key_range;
    int32_t buckets;
    int32_t max_hp;
    int32_t max_he;
    int64_t reclaim_freq;
    int64_t epoch_freq;
    int64_t nbr_hi_wm;
    double nbr_lo_frac;
    int32_t nbr_scan_amort;
    int32_t nbr_max_res;
    double epochpop_c; /* <=0 disables the slow path */
    int64_t delay_ns;
    int64_t quarantine_cap;
    int32_t hm_restart_from_head; /* -1 auto, 0 off, 1 on */
    uint64_t mem_budget_bytes;    /* 0 = unlimited */
} rb_config;

/* Node header prefixed to every allocation.  canary/birth/retire are the
 * reclamation-visible fields; size and flags are allocator bookkeeping. */
typedef struct {
    _Atomic uint64_t canary;
    uint64_t birth_era;
    _Atomic uint64_t retire_era;
    uint32_t size; /* header + payload bytes */
    _Atomic uint32_t flags;
#define RB_F_RETIRED 1u
} rb_hdr;

/* Set node: one layout serves the lists and is the prefix of the BST node. */
typedef struct rb_node {
    rb_hdr hdr;
    uint64_t key;
    _Atomic uintptr_t next;  /* lists: low bit = mark (harris/hm) */
    _Atomic uint32_t marked; /* lazy list logical deletion */
    _Atomic uint32_t lock;   /* lazy list per-node spinlock */
} rb_node;

typedef struct rb_tnode {
    rb_hdr hdr;
    uint64_t key;
    _Atomic uintptr_t left;
    _Atomic uintptr_t right;
    _Atomic uint64_t ver; /* seqlock: odd = locked */
    _Atomic uint32_t dead;
    uint32_t is_leaf;
} rb_tnode;

/* growable per-thread bag of retired nodes */
typedef struct {
    rb_hdr **items;
    int64_t size;
    int64_t cap;
} rb_bag;

typedef struct {
    /* identity */
    pthread_t os_thread;
    _Atomic int alive;
    int handler_kind;

    /* neutralization */
    sigjmp_buf env;
    _Atomic int restartable;
    _Atomic uint64_t handler_entries;
    _Atomic uint64_t restarts;

    /* reservations: node handles or eras, single writer (this thread / its
     * own handler), read by reclaimers */
    _Atomic uintptr_t shared_res[RB_MAX_SLOTS];
    _Atomic uintptr_t local_res[RB_MAX_SLOTS]; /* POP: plain-stored, handler-copied */
    _Atomic uint64_t publish_counter;

    /* NBR row (width nbr_max_res) + NBR+ episode state */
    _Atomic uintptr_t nbr_row[RB_MAX_SLOTS];
    uint64_t scan_ts[RB_MAX_THREADS];
    int64_t bookmark_tail;
    int first_lowm_entry;
    int64_t retires_since_scan;

    /* EBR */
    _Atomic uint64_t reserved_epoch;
    uint64_t op_counter;

    rb_bag bag;
    int64_t ebr_retire_counter; /* modulo trigger for ebr/epochpop */

    /* stats (single writer) */
    _Atomic uint64_t fences_on_read_path;
    _Atomic uint64_t pings_sent;
    _Atomic uint64_t slow_path_triggers;
    _Atomic uint64_t reclaim_passes;
    _Atomic uint64_t lowm_piggybacks;
} rb_thread;

typedef struct {
    rb_hdr **ring;
    int64_t cap;
    int64_t head; /* next eviction slot */
    int64_t count;
    pthread_mutex_t mu;
} rb_quarantine;

typedef struct {
    rb_config cfg;
    int signum;
    _Atomic int active;
    _Atomic uint64_t session_gen; /* invalidates stale per-thread tids */
    _Atomic int nthreads;
    _Atomic int stop;
    rb_thread th[RB_MAX_THREADS];

    /* global epoch shared by he/pophe/ebr/epochpop */
    _Atomic uint64_t epoch;

    /* NBR+ announce timestamps */
    _Atomic uint64_t announce_ts[RB_MAX_THREADS];

    /* alloc accounting */
    _Atomic uint64_t live_bytes;
    _Atomic uint64_t peak_live_bytes;
    _Atomic uint64_t allocations;
    _Atomic uint64_t frees;
    _Atomic int64_t retired_current;
    _Atomic uint64_t peak_retired;
    rb_quarantine quar;

    /* violations */
    _Atomic uint64_t violations[RB_VIOL_KINDS];
    _Atomic uint64_t violations_total;

    /* runtime counters */
    _Atomic uint64_t signals_sent;
    _Atomic uint64_t signals_received;
    _Atomic uint64_t broadcasts;

    /* structure roots */
    rb_node *head;        /* lists */
    rb_node *tail;        /* lists */
    rb_node **bucket_heads;
    rb_node **bucket_tails;
    rb_tnode *root; /* bst */

    pthread_barrier_t barrier;
    int barrier_ready;
} rb_globals;

extern rb_globals rb_g;

/* --- small helpers -------------------------------------------------- */

static inline uint64_t rb_now_ns(void) {
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (uint64_t)ts.tv_sec * 1000000000ull + (uint64_t)ts.tv_nsec;
}

static inline void rb_atomic_max(_Atomic uint64_t *slot, uint64_t v) {
    uint64_t cur = atomic_load_explicit(slot, memory_order_relaxed);
    while (v > cur &&
           !atomic_compare_exchange_weak_explicit(slot, &cur, v, memory_order_relaxed,
                                                  memory_order_relaxed)) {
    }
}

static inline uintptr_t rb_unmark(uintptr_t p) { return p & ~(uintptr_t)1; }
static inline int rb_is_marked(uintptr_t p) { return (int)(p & 1); }
static inline uintptr_t rb_marked(uintptr_t p) { return p | 1; }

/* splitmix64: the per-thread op stream generator (mirrored in Python) */
static inline uint64_t rb_splitmix64(uint64_t *state) {
    uint64_t z = (*state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/* runtime.c */
void rb_sig_unblock(void);
void rb_install_handler(int signum);
int rb_broadcast_from(int tid);
void rb_post_delay(void);
void rb_record_violation(int kind, int tid);

/* alloc.c */
void rb_alloc_init(void);
void rb_alloc_teardown(void);
rb_hdr *rb_alloc(uint32_t payload);
void rb_free_node(rb_hdr *h, int tid);
int rb_chk(rb_hdr *h, int tid); /* 1 ok, 0 poison (violation recorded) */

/* schemes.c */
void rb_scheme_init(void);
void rb_scheme_thread_init(int tid);
int rb_scheme_handler_kind(int scheme);
void rb_op_begin(int tid);
void rb_op_end(int tid);
uintptr_t rb_read_ptr(int tid, _Atomic uintptr_t *src, int slot);
uintptr_t rb_read_ptr_raw(int tid, _Atomic uintptr_t *src, int slot);
void rb_retire(int tid, rb_hdr *h);
void rb_drain_tid(int tid);
void rb_bag_push(rb_bag *b, rb_hdr *h);
int rb_he_can_free_eras(uint64_t be, uint64_t re, const uint64_t *eras, int n);
void rb_nbr_begin_read(int tid);
void rb_nbr_end_read(int tid, rb_hdr **recs, int n);
void rb_quiesce_self(int tid);
extern __thread int rb_tls_tid;
extern __thread uint64_t rb_tls_gen;

/* sets.c */
int rb_ds_init(void);
void rb_ds_teardown(void);
int rb_ds_insert(int tid, uint64_t key);
int rb_ds_delete(int tid, uint64_t key);
int rb_ds_contains(int tid, uint64_t key);
uint64_t rb_ds_size_seq(void);
int rb_ds_check_seq(void);

#endif /* RB_CORE_H */
