/* Five concurrent sets wired through the scheme hooks: optimistic lazy list,
 * the lock-free marked-pointer list with chain unlinking, its
 * unlink-during-traversal variant, a chaining hash table over the latter,
 * and a leaf-oriented BST with versioned locks and lockless searches. */
#include "core.h"

/* Checkpoint for the neutralizing schemes.  Must expand inline: the saved
 * context is only valid while the enclosing frame is alive, which the ops
 * guarantee by keeping restartable=false outside their read phases. */
#define RB_PHASES (rb_g.cfg.scheme == RB_SCHEME_NBR || rb_g.cfg.scheme == RB_SCHEME_NBRPLUS)
#define RB_CHECKPOINT(tid)                                                  \
    do {                                                                    \
        if (RB_PHASES) {                                                    \
            while (sigsetjmp(rb_g.th[tid].env, 0))                          \
                rb_sig_unblock();                                           \
            rb_nbr_begin_read(tid);                                         \
        }                                                                   \
    } while (0)

static inline void rb_end_read2(int tid, void *a, void *b) {
    if (RB_PHASES) {
        rb_hdr *recs[2] = {(rb_hdr *)a, (rb_hdr *)b};
        rb_nbr_end_read(tid, recs, 2);
    }
}

static inline void rb_end_read3(int tid, void *a, void *b, void *c) {
    if (RB_PHASES) {
        rb_hdr *recs[3] = {(rb_hdr *)a, (rb_hdr *)b, (rb_hdr *)c};
        rb_nbr_end_read(tid, recs, a ? 3 : 2);
    }
}

static inline void rb_end_read0(int tid) {
    if (RB_PHASES)
        rb_nbr_end_read(tid, NULL, 0);
}

static inline int rb_hookish(void) {
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

static rb_node *rb_node_alloc(uint64_t key) {
    rb_hdr *h = rb_alloc((uint32_t)(sizeof(rb_node) - sizeof(rb_hdr)));
    rb_node *n = (rb_node *)h;
    n->key = key;
    atomic_store_explicit(&n->next, 0, memory_order_relaxed);
    atomic_store_explicit(&n->marked, 0, memory_order_relaxed);
    atomic_store_explicit(&n->lock, 0, memory_order_relaxed);
    return n;
}

/* --- lazy list --------------------------------------------------------- */

static void rb_spin_lock(_Atomic uint32_t *l) {
    int spins = 0;
    while (atomic_exchange_explicit(l, 1, memory_order_acquire)) {
        if (++spins > 64) {
            sched_yield();
            spins = 0;
        }
    }
}

static void rb_spin_unlock(_Atomic uint32_t *l) {
    atomic_store_explicit(l, 0, memory_order_release);
}

static int lazy_validate(rb_node *pred, rb_node *curr) {
    return !atomic_load_explicit(&pred->marked, memory_order_acquire) &&
           !atomic_load_explicit(&curr->marked, memory_order_acquire) &&
           atomic_load_explicit(&pred->next, memory_order_acquire) == (uintptr_t)curr;
}

/* traverse to (pred, curr) with curr->key >= key; returns 0 on poison.
 * Pointer/era reservations cannot anchor a step taken from a node that was
 * already unlinked (its next field is frozen, so the re-read validates a
 * stale edge); under those schemes a marked anchor forces a restart. */
static int lazy_locate(int tid, rb_node *head, uint64_t key, rb_node **out_pred,
                       rb_node **out_curr) {
    int anchored = rb_hookish();
retry:;
    rb_node *pred = head;
    int sp = 0, sc = 1;
    rb_node *curr = (rb_node *)rb_read_ptr(tid, &pred->next, sc);
    if (!rb_chk(&curr->hdr, tid))
        return 0;
    while (curr->key < key) {
        pred = curr;
        int tmp = sp;
        sp = sc;
        sc = tmp;
        curr = (rb_node *)rb_read_ptr(tid, &pred->next, sc);
        if (anchored && atomic_load_explicit(&pred->marked, memory_order_acquire))
            goto retry;
        if (!rb_chk(&curr->hdr, tid))
            return 0;
    }
    *out_pred = pred;
    *out_curr = curr;
    return 1;
}

static int lazy_insert(int tid, uint64_t key) {
    for (;;) {
        RB_CHECKPOINT(tid);
        rb_node *pred, *curr;
        if (!lazy_locate(tid, rb_g.head, key, &pred, &curr)) {
            rb_end_read0(tid);
            return RB_ABORTED;
        }
        rb_end_read2(tid, pred, curr);
        rb_spin_lock(&pred->lock);
        rb_spin_lock(&curr->lock);
        if (!lazy_validate(pred, curr)) {
            rb_spin_unlock(&curr->lock);
            rb_spin_unlock(&pred->lock);
            continue;
        }
        int res;
        if (curr->key == key) {
            res = 0;
        } else {
            rb_node *n = rb_node_alloc(key);
            atomic_store_explicit(&n->next, (uintptr_t)curr, memory_order_relaxed);
            atomic_store_explicit(&pred->next, (uintptr_t)n, memory_order_release);
            res = 1;
        }
        rb_spin_unlock(&curr->lock);
        rb_spin_unlock(&pred->lock);
        return res;
    }
}

static int lazy_delete(int tid, uint64_t key) {
    for (;;) {
        RB_CHECKPOINT(tid);
        rb_node *pred, *curr;
        if (!lazy_locate(tid, rb_g.head, key, &pred, &curr)) {
            rb_end_read0(tid);
            return RB_ABORTED;
        }
        rb_end_read2(tid, pred, curr);
        rb_spin_lock(&pred->lock);
        rb_spin_lock(&curr->lock);
        if (!lazy_validate(pred, curr)) {
            rb_spin_unlock(&curr->lock);
            rb_spin_unlock(&pred->lock);
            continue;
        }
        int res;
        if (curr->key != key) {
            res = 0;
            rb_spin_unlock(&curr->lock);
            rb_spin_unlock(&pred->lock);
        } else {
            atomic_store_explicit(&curr->marked, 1, memory_order_release);
            atomic_store_explicit(&pred->next,
                                  atomic_load_explicit(&curr->next, memory_order_relaxed),
                                  memory_order_release);
            res = 1;
            rb_spin_unlock(&curr->lock);
            rb_spin_unlock(&pred->lock);
            rb_retire(tid, &curr->hdr);
        }
        return res;
    }
}

static int lazy_contains(int tid, uint64_t key) {
    int anchored = rb_hookish();
    RB_CHECKPOINT(tid);
retry:;
    rb_node *curr = (rb_node *)rb_read_ptr(tid, &rb_g.head->next, 0);
    int s = 1;
    if (!rb_chk(&curr->hdr, tid)) {
        rb_end_read0(tid);
        return RB_ABORTED;
    }
    while (curr->key < key) {
        rb_node *pred = curr;
        curr = (rb_node *)rb_read_ptr(tid, &pred->next, s);
        s = s ? 0 : 1;
        if (anchored && atomic_load_explicit(&pred->marked, memory_order_acquire))
            goto retry;
        if (!rb_chk(&curr->hdr, tid)) {
            rb_end_read0(tid);
            return RB_ABORTED;
        }
    }
    int res = curr->key == key &&
              !atomic_load_explicit(&curr->marked, memory_order_acquire);
    rb_end_read0(tid);
    return res;
}

/* --- lock-free list with deferred unlinking (marked next pointers) ----- */

/* search: returns the first node with key >= target, unlinking any marked
 * run it passes over; left receives the last unmarked predecessor */
static rb_node *harris_search(int tid, rb_node *head, rb_node *tail, uint64_t key,
                              rb_node **left, int *aborted) {
retry:;
    RB_CHECKPOINT(tid);
    rb_node *t_node = head;
    uintptr_t left_next = 0;
    int sn = 0;
    uintptr_t t_next = rb_read_ptr_raw(tid, &head->next, sn);
    do {
        if (!rb_is_marked(t_next)) {
            *left = t_node;
            left_next = t_next;
        }
        t_node = (rb_node *)rb_unmark(t_next);
        if (!rb_chk(&t_node->hdr, tid)) {
            rb_end_read0(tid);
            *aborted = 1;
            return NULL;
        }
        if (t_node == tail)
            break;
        sn = sn ? 0 : 1;
        t_next = rb_read_ptr_raw(tid, &t_node->next, sn);
    } while (rb_is_marked(t_next) || t_node->key < key);
    rb_node *right = t_node;
    rb_end_read2(tid, *left, right);

    if (left_next == (uintptr_t)right) {
        if (right != tail &&
            rb_is_marked(atomic_load_explicit(&right->next, memory_order_acquire)))
            goto retry;
        return right;
    }
    uintptr_t expect = left_next;
    if (atomic_compare_exchange_strong_explicit(&(*left)->next, &expect,
                                                (uintptr_t)right, memory_order_acq_rel,
                                                memory_order_acquire)) {
        /* the whole marked run is now unreachable and owned by this thread */
        uintptr_t p = left_next;
        while (rb_unmark(p) != (uintptr_t)right) {
            rb_node *n = (rb_node *)rb_unmark(p);
            uintptr_t nx = atomic_load_explicit(&n->next, memory_order_relaxed);
            rb_retire(tid, &n->hdr);
            p = nx;
        }
        if (right != tail &&
            rb_is_marked(atomic_load_explicit(&right->next, memory_order_acquire)))
            goto retry;
        return right;
    }
    goto retry;
}

static int harris_insert(int tid, rb_node *head, rb_node *tail, uint64_t key) {
    for (;;) {
        rb_node *left;
        int aborted = 0;
        rb_node *right = harris_search(tid, head, tail, key, &left, &aborted);
        if (aborted)
            return RB_ABORTED;
        if (right != tail && right->key == key)
            return 0;
        rb_node *n = rb_node_alloc(key);
        atomic_store_explicit(&n->next, (uintptr_t)right, memory_order_relaxed);
        uintptr_t expect = (uintptr_t)right;
        if (atomic_compare_exchange_strong_explicit(&left->next, &expect, (uintptr_t)n,
                                                    memory_order_acq_rel,
                                                    memory_order_acquire))
            return 1;
        rb_free_node(&n->hdr, tid); /* never published */
    }
}

static int harris_delete(int tid, rb_node *head, rb_node *tail, uint64_t key) {
    for (;;) {
        rb_node *left;
        int aborted = 0;
        rb_node *right = harris_search(tid, head, tail, key, &left, &aborted);
        if (aborted)
            return RB_ABORTED;
        if (right == tail || right->key != key)
            return 0;
        uintptr_t rnext = atomic_load_explicit(&right->next, memory_order_acquire);
        if (rb_is_marked(rnext))
            continue; /* another delete owns it; retraverse */
        uintptr_t expect = rnext;
        if (!atomic_compare_exchange_strong_explicit(&right->next, &expect,
                                                     rb_marked(rnext),
                                                     memory_order_acq_rel,
                                                     memory_order_acquire))
            continue;
        /* logically deleted by us; try to unlink physically */
        expect = (uintptr_t)right;
        if (atomic_compare_exchange_strong_explicit(&left->next, &expect, rnext,
                                                    memory_order_acq_rel,
                                                    memory_order_acquire)) {
            rb_retire(tid, &right->hdr);
        } else {
            harris_search(tid, head, tail, key, &left, &aborted);
        }
        return 1;
    }
}

static int harris_contains(int tid, rb_node *head, rb_node *tail, uint64_t key) {
    RB_CHECKPOINT(tid);
    int s = 0;
    rb_node *t_node = (rb_node *)rb_read_ptr(tid, &head->next, s);
    if (!rb_chk(&t_node->hdr, tid)) {
        rb_end_read0(tid);
        return RB_ABORTED;
    }
    while (t_node != tail && t_node->key < key) {
        s = s ? 0 : 1;
        t_node = (rb_node *)rb_read_ptr(tid, &t_node->next, s);
        if (!rb_chk(&t_node->hdr, tid)) {
            rb_end_read0(tid);
            return RB_ABORTED;
        }
    }
    int res = t_node != tail && t_node->key == key &&
              !rb_is_marked(atomic_load_explicit(&t_node->next, memory_order_acquire));
    rb_end_read0(tid);
    return res;
}

/* --- list with unlink-during-traversal (hp-compatible variant) --------- */

static int hm_restart_from_head(void) {
    if (rb_g.cfg.hm_restart_from_head >= 0)
        return rb_g.cfg.hm_restart_from_head;
    return RB_PHASES; /* on when paired with the neutralizing schemes */
}

/* returns 1 if key found; out pred/curr always set, curr unmarked and
 * protected; reserves {pred, curr} when phases are in play */
static int hm_search(int tid, rb_node *head, uint64_t key, rb_node **out_pred,
                     rb_node **out_curr, int *aborted) {
retry:;
    RB_CHECKPOINT(tid);
    rb_node *pred = head;
    int s_pred = 0, s_curr = 1, s_next = 2;
    uintptr_t curr_raw = rb_read_ptr_raw(tid, &pred->next, s_curr);
    for (;;) {
        rb_node *curr = (rb_node *)rb_unmark(curr_raw);
        if (!rb_chk(&curr->hdr, tid)) {
            rb_end_read0(tid);
            *aborted = 1;
            return 0;
        }
        if (curr->key == UINT64_MAX) { /* tail sentinel */
            rb_end_read2(tid, pred, curr);
            *out_pred = pred;
            *out_curr = curr;
            return 0;
        }
        uintptr_t next_raw = rb_read_ptr_raw(tid, &curr->next, s_next);
        if (rb_is_marked(next_raw)) {
            /* curr is logically deleted: unlink it before moving past */
            rb_end_read2(tid, pred, curr);
            uintptr_t expect = (uintptr_t)curr;
            if (!atomic_compare_exchange_strong_explicit(
                    &pred->next, &expect, rb_unmark(next_raw), memory_order_acq_rel,
                    memory_order_acquire))
                goto retry;
            rb_retire(tid, &curr->hdr);
            if (hm_restart_from_head())
                goto retry;
            int tmp = s_curr;
            s_curr = s_next;
            s_next = tmp;
            curr_raw = rb_unmark(next_raw);
            continue;
        }
        if (curr->key >= key) {
            rb_end_read2(tid, pred, curr);
            *out_pred = pred;
            *out_curr = curr;
            return curr->key == key;
        }
        pred = curr;
        int tmp = s_pred;
        s_pred = s_curr;
        s_curr = s_next;
        s_next = tmp;
        curr_raw = next_raw;
    }
}

static int hm_insert(int tid, rb_node *head, uint64_t key) {
    for (;;) {
        rb_node *pred, *curr;
        int aborted = 0;
        if (hm_search(tid, head, key, &pred, &curr, &aborted))
            return 0; /* already present */
        if (aborted)
            return RB_ABORTED;
        rb_node *n = rb_node_alloc(key);
        atomic_store_explicit(&n->next, (uintptr_t)curr, memory_order_relaxed);
        uintptr_t expect = (uintptr_t)curr;
        if (atomic_compare_exchange_strong_explicit(&pred->next, &expect, (uintptr_t)n,
                                                    memory_order_acq_rel,
                                                    memory_order_acquire))
            return 1;
        rb_free_node(&n->hdr, tid);
    }
}

static int hm_delete(int tid, rb_node *head, uint64_t key) {
    for (;;) {
        rb_node *pred, *curr;
        int aborted = 0;
        if (!hm_search(tid, head, key, &pred, &curr, &aborted))
            return aborted ? RB_ABORTED : 0;
        uintptr_t next_raw = atomic_load_explicit(&curr->next, memory_order_acquire);
        if (rb_is_marked(next_raw))
            continue;
        uintptr_t expect = next_raw;
        if (!atomic_compare_exchange_strong_explicit(&curr->next, &expect,
                                                     rb_marked(next_raw),
                                                     memory_order_acq_rel,
                                                     memory_order_acquire))
            continue;
        expect = (uintptr_t)curr;
        if (atomic_compare_exchange_strong_explicit(&pred->next, &expect,
                                                    rb_unmark(next_raw),
                                                    memory_order_acq_rel,
                                                    memory_order_acquire)) {
            rb_retire(tid, &curr->hdr);
        } else {
            hm_search(tid, head, key, &pred, &curr, &aborted);
        }
        return 1;
    }
}

static int hm_contains(int tid, rb_node *head, uint64_t key) {
    if (rb_hookish()) {
        /* pointer/era protection cannot safely cross marked nodes, so the
         * lookup helps unlink them, exactly like the update-path search */
        rb_node *pred, *curr;
        int aborted = 0;
        int found = hm_search(tid, head, key, &pred, &curr, &aborted);
        return aborted ? RB_ABORTED : found;
    }
    RB_CHECKPOINT(tid);
    rb_node *curr = (rb_node *)rb_read_ptr(tid, &head->next, 0);
    if (!rb_chk(&curr->hdr, tid)) {
        rb_end_read0(tid);
        return RB_ABORTED;
    }
    while (curr->key < key) {
        curr = (rb_node *)rb_read_ptr(tid, &curr->next, 0);
        if (!rb_chk(&curr->hdr, tid)) {
            rb_end_read0(tid);
            return RB_ABORTED;
        }
    }
    int res = curr->key == key &&
              !rb_is_marked(atomic_load_explicit(&curr->next, memory_order_acquire));
    rb_end_read0(tid);
    return res;
}

/* --- hash table (chaining over the hp-compatible list) ----------------- */

static rb_node *ht_head(uint64_t key) {
    return rb_g.bucket_heads[key % (uint64_t)rb_g.cfg.buckets];
}

/* --- leaf-oriented BST -------------------------------------------------- */

static rb_tnode *rb_tnode_alloc(uint64_t key, int is_leaf) {
    rb_hdr *h = rb_alloc((uint32_t)(sizeof(rb_tnode) - sizeof(rb_hdr)));
    rb_tnode *n = (rb_tnode *)h;
    n->key = key;
    atomic_store_explicit(&n->left, 0, memory_order_relaxed);
    atomic_store_explicit(&n->right, 0, memory_order_relaxed);
    atomic_store_explicit(&n->ver, 0, memory_order_relaxed);
    atomic_store_explicit(&n->dead, 0, memory_order_relaxed);
    n->is_leaf = is_leaf ? 1u : 0u;
    return n;
}

static int t_trylock(rb_tnode *n) {
    uint64_t v = atomic_load_explicit(&n->ver, memory_order_acquire);
    if (v & 1)
        return 0;
    return atomic_compare_exchange_strong_explicit(&n->ver, &v, v + 1,
                                                   memory_order_acq_rel,
                                                   memory_order_acquire);
}

static void t_unlock(rb_tnode *n) {
    atomic_fetch_add_explicit(&n->ver, 1, memory_order_release);
}

static _Atomic uintptr_t *t_child_slot(rb_tnode *n, uint64_t key) {
    return key < n->key ? &n->left : &n->right;
}

/* lockless descent; out nodes are protected via the read hook; a retired
 * anchor forces a restart so hp/era protection stays checkable */
static int bst_search(int tid, uint64_t key, rb_tnode **out_gp, rb_tnode **out_p,
                      rb_tnode **out_l, int reserve) {
retry:;
    RB_CHECKPOINT(tid);
    rb_tnode *gp = NULL;
    rb_tnode *p = rb_g.root;
    int sl = 0;
    rb_tnode *l = (rb_tnode *)rb_read_ptr(tid, t_child_slot(p, key), sl);
    /* the anchor must be checked before any dereference of l (even its
     * canary): a dead anchor's frozen child pointer may target freed memory */
    if (atomic_load_explicit(&p->dead, memory_order_acquire))
        goto retry;
    if (!rb_chk(&l->hdr, tid))
        goto aborted;
    while (!l->is_leaf) {
        gp = p;
        p = l;
        sl = (sl + 1) % 3;
        l = (rb_tnode *)rb_read_ptr(tid, t_child_slot(p, key), sl);
        if (atomic_load_explicit(&p->dead, memory_order_acquire))
            goto retry;
        if (!rb_chk(&l->hdr, tid))
            goto aborted;
    }
    if (reserve)
        rb_end_read3(tid, gp, p, l);
    else
        rb_end_read0(tid);
    *out_gp = gp;
    *out_p = p;
    *out_l = l;
    return 1;
aborted:
    rb_end_read0(tid);
    return 0;
}

static int bst_insert(int tid, uint64_t key) {
    for (;;) {
        rb_tnode *gp, *p, *l;
        if (!bst_search(tid, key, &gp, &p, &l, 1))
            return RB_ABORTED;
        if (l->key == key)
            return 0;
        if (!t_trylock(p))
            continue;
        _Atomic uintptr_t *slot = t_child_slot(p, key);
        if (atomic_load_explicit(&p->dead, memory_order_acquire) ||
            atomic_load_explicit(slot, memory_order_acquire) != (uintptr_t)l) {
            t_unlock(p);
            continue;
        }
        rb_tnode *nl = rb_tnode_alloc(key, 1);
        rb_tnode *ni = rb_tnode_alloc(key > l->key ? key : l->key, 0);
        if (key < l->key) {
            atomic_store_explicit(&ni->left, (uintptr_t)nl, memory_order_relaxed);
            atomic_store_explicit(&ni->right, (uintptr_t)l, memory_order_relaxed);
        } else {
            atomic_store_explicit(&ni->left, (uintptr_t)l, memory_order_relaxed);
            atomic_store_explicit(&ni->right, (uintptr_t)nl, memory_order_relaxed);
        }
        atomic_store_explicit(slot, (uintptr_t)ni, memory_order_release);
        t_unlock(p);
        return 1;
    }
}

static int bst_delete(int tid, uint64_t key) {
    for (;;) {
        rb_tnode *gp, *p, *l;
        if (!bst_search(tid, key, &gp, &p, &l, 1))
            return RB_ABORTED;
        if (l->key != key)
            return 0;
        if (gp == NULL)
            return 0; /* sentinel leaves are never deleted */
        if (!t_trylock(gp))
            continue;
        if (!t_trylock(p)) {
            t_unlock(gp);
            continue;
        }
        _Atomic uintptr_t *gslot = t_child_slot(gp, key);
        _Atomic uintptr_t *pslot = t_child_slot(p, key);
        if (atomic_load_explicit(&gp->dead, memory_order_acquire) ||
            atomic_load_explicit(&p->dead, memory_order_acquire) ||
            atomic_load_explicit(gslot, memory_order_acquire) != (uintptr_t)p ||
            atomic_load_explicit(pslot, memory_order_acquire) != (uintptr_t)l) {
            t_unlock(p);
            t_unlock(gp);
            continue;
        }
        uintptr_t sibling = atomic_load_explicit(
            pslot == &p->left ? &p->right : &p->left, memory_order_acquire);
        /* flag the bypassed pair before swinging the pointer so traversals
         * standing on them restart instead of following stale children */
        atomic_store_explicit(&p->dead, 1, memory_order_release);
        atomic_store_explicit(&l->dead, 1, memory_order_release);
        atomic_store_explicit(gslot, sibling, memory_order_release);
        t_unlock(p);
        t_unlock(gp);
        rb_retire(tid, &p->hdr);
        rb_retire(tid, &l->hdr);
        return 1;
    }
}

static int bst_contains(int tid, uint64_t key) {
    rb_tnode *gp, *p, *l;
    if (!bst_search(tid, key, &gp, &p, &l, 0))
        return RB_ABORTED;
    return l->key == key;
}

/* --- roots, dispatch, sequential checks --------------------------------- */

static void list_root_init(rb_node **head, rb_node **tail) {
    rb_node *h = rb_node_alloc(0);
    rb_node *t = rb_node_alloc(UINT64_MAX);
    atomic_store_explicit(&h->next, (uintptr_t)t, memory_order_relaxed);
    *head = h;
    *tail = t;
}

int rb_ds_init(void) {
    rb_g.head = rb_g.tail = NULL;
    rb_g.bucket_heads = rb_g.bucket_tails = NULL;
    rb_g.root = NULL;
    switch (rb_g.cfg.structure) {
    case RB_DS_LAZY_LIST:
    case RB_DS_HARRIS_LIST:
    case RB_DS_HM_LIST:
        list_root_init(&rb_g.head, &rb_g.tail);
        return 0;
    case RB_DS_HASH_TABLE: {
        int nb = rb_g.cfg.buckets;
        if (nb <= 0)
            return -1;
        rb_g.bucket_heads = calloc((size_t)nb, sizeof(rb_node *));
        rb_g.bucket_tails = calloc((size_t)nb, sizeof(rb_node *));
        for (int i = 0; i < nb; i++)
            list_root_init(&rb_g.bucket_heads[i], &rb_g.bucket_tails[i]);
        return 0;
    }
    case RB_DS_EXT_BST: {
        rb_g.root = rb_tnode_alloc(UINT64_MAX, 0);
        rb_tnode *l0 = rb_tnode_alloc(UINT64_MAX - 1, 1);
        rb_tnode *l1 = rb_tnode_alloc(UINT64_MAX, 1);
        atomic_store_explicit(&rb_g.root->left, (uintptr_t)l0, memory_order_relaxed);
        atomic_store_explicit(&rb_g.root->right, (uintptr_t)l1, memory_order_relaxed);
        return 0;
    }
    default:
        return -1;
    }
}

static void list_free_all(rb_node *head) {
    uintptr_t p = (uintptr_t)head;
    while (p) {
        rb_node *n = (rb_node *)rb_unmark(p);
        uintptr_t nx = atomic_load_explicit(&n->next, memory_order_relaxed);
        free(n);
        p = nx;
    }
}

static void bst_free_all(rb_tnode *root) {
    if (!root)
        return;
    rb_tnode **stack = malloc(sizeof(rb_tnode *) * 128);
    size_t cap = 128, top = 0;
    stack[top++] = root;
    while (top) {
        rb_tnode *n = stack[--top];
        if (!n->is_leaf) {
            if (top + 2 > cap) {
                cap *= 2;
                stack = realloc(stack, sizeof(rb_tnode *) * cap);
            }
            stack[top++] = (rb_tnode *)atomic_load_explicit(&n->left,
                                                            memory_order_relaxed);
            stack[top++] = (rb_tnode *)atomic_load_explicit(&n->right,
                                                            memory_order_relaxed);
        }
        free(n);
    }
    free(stack);
}

void rb_ds_teardown(void) {
    switch (rb_g.cfg.structure) {
    case RB_DS_LAZY_LIST:
    case RB_DS_HARRIS_LIST:
    case RB_DS_HM_LIST:
        list_free_all(rb_g.head);
        break;
    case RB_DS_HASH_TABLE:
        if (rb_g.bucket_heads) {
            for (int i = 0; i < rb_g.cfg.buckets; i++)
                list_free_all(rb_g.bucket_heads[i]);
            free(rb_g.bucket_heads);
            free(rb_g.bucket_tails);
        }
        break;
    case RB_DS_EXT_BST:
        bst_free_all(rb_g.root);
        break;
    default:
        break;
    }
    rb_g.head = rb_g.tail = NULL;
    rb_g.bucket_heads = rb_g.bucket_tails = NULL;
    rb_g.root = NULL;
}

int rb_ds_insert(int tid, uint64_t key) {
    rb_op_begin(tid);
    int r;
    switch (rb_g.cfg.structure) {
    case RB_DS_LAZY_LIST:
        r = lazy_insert(tid, key);
        break;
    case RB_DS_HARRIS_LIST:
        /* deferred chain unlinking walks over marked nodes, which pointer
         * and era reservations cannot anchor; those schemes get the
         * unlink-before-pass variant on the same list (identical set
         * semantics, hp-compatible physical removal) */
        r = rb_hookish() ? hm_insert(tid, rb_g.head, key)
                         : harris_insert(tid, rb_g.head, rb_g.tail, key);
        break;
    case RB_DS_HM_LIST:
        r = hm_insert(tid, rb_g.head, key);
        break;
    case RB_DS_HASH_TABLE:
        r = hm_insert(tid, ht_head(key), key);
        break;
    case RB_DS_EXT_BST:
        r = bst_insert(tid, key);
        break;
    default:
        r = -1;
    }
    rb_op_end(tid);
    return r;
}

int rb_ds_delete(int tid, uint64_t key) {
    rb_op_begin(tid);
    int r;
    switch (rb_g.cfg.structure) {
    case RB_DS_LAZY_LIST:
        r = lazy_delete(tid, key);
        break;
    case RB_DS_HARRIS_LIST:
        r = rb_hookish() ? hm_delete(tid, rb_g.head, key)
                         : harris_delete(tid, rb_g.head, rb_g.tail, key);
        break;
    case RB_DS_HM_LIST:
        r = hm_delete(tid, rb_g.head, key);
        break;
    case RB_DS_HASH_TABLE:
        r = hm_delete(tid, ht_head(key), key);
        break;
    case RB_DS_EXT_BST:
        r = bst_delete(tid, key);
        break;
    default:
        r = -1;
    }
    rb_op_end(tid);
    return r;
}

int rb_ds_contains(int tid, uint64_t key) {
    rb_op_begin(tid);
    int r;
    switch (rb_g.cfg.structure) {
    case RB_DS_LAZY_LIST:
        r = lazy_contains(tid, key);
        break;
    case RB_DS_HARRIS_LIST:
        r = rb_hookish() ? hm_contains(tid, rb_g.head, key)
                         : harris_contains(tid, rb_g.head, rb_g.tail, key);
        break;
    case RB_DS_HM_LIST:
        r = hm_contains(tid, rb_g.head, key);
        break;
    case RB_DS_HASH_TABLE:
        r = hm_contains(tid, ht_head(key), key);
        break;
    case RB_DS_EXT_BST:
        r = bst_contains(tid, key);
        break;
    default:
        r = -1;
    }
    rb_op_end(tid);
    return r;
}

/* sequential full traversal; only valid while no ops are running */
static uint64_t list_count(rb_node *head, rb_node *tail, int *ok) {
    uint64_t count = 0;
    uint64_t prev_key = 0;
    int first = 1;
    rb_node *n = (rb_node *)rb_unmark(atomic_load(&head->next));
    while (n != tail) {
        int marked_node =
            rb_is_marked(atomic_load(&n->next)) || atomic_load(&n->marked);
        if (!marked_node) {
            if (!first && n->key <= prev_key)
                *ok = 0;
            prev_key = n->key;
            first = 0;
            count++;
        }
        n = (rb_node *)rb_unmark(atomic_load(&n->next));
    }
    return count;
}

static uint64_t bst_count(rb_tnode *n, uint64_t lo, uint64_t hi, int *ok) {
    if (n->is_leaf) {
        if (n->key >= UINT64_MAX - 1)
            return 0; /* sentinels */
        if (n->key < lo || n->key >= hi)
            *ok = 0;
        return 1;
    }
    if (n->key < lo || n->key > hi)
        *ok = 0;
    uint64_t c = 0;
    c += bst_count((rb_tnode *)atomic_load(&n->left), lo, n->key, ok);
    c += bst_count((rb_tnode *)atomic_load(&n->right), n->key, hi, ok);
    return c;
}

uint64_t rb_ds_size_seq(void) {
    int ok = 1;
    switch (rb_g.cfg.structure) {
    case RB_DS_LAZY_LIST:
    case RB_DS_HARRIS_LIST:
    case RB_DS_HM_LIST:
        return list_count(rb_g.head, rb_g.tail, &ok);
    case RB_DS_HASH_TABLE: {
        uint64_t c = 0;
        for (int i = 0; i < rb_g.cfg.buckets; i++)
            c += list_count(rb_g.bucket_heads[i], rb_g.bucket_tails[i], &ok);
        return c;
    }
    case RB_DS_EXT_BST:
        return bst_count(rb_g.root, 0, UINT64_MAX, &ok);
    default:
        return 0;
    }
}

int rb_ds_check_seq(void) {
    int ok = 1;
    switch (rb_g.cfg.structure) {
    case RB_DS_LAZY_LIST:
    case RB_DS_HARRIS_LIST:
    case RB_DS_HM_LIST:
        list_count(rb_g.head, rb_g.tail, &ok);
        break;
    case RB_DS_HASH_TABLE:
        for (int i = 0; i < rb_g.cfg.buckets; i++) {
            rb_node *n =
                (rb_node *)rb_unmark(atomic_load(&rb_g.bucket_heads[i]->next));
            uint64_t prev = 0;
            int first = 1;
            while (n != rb_g.bucket_tails[i]) {
                if (!rb_is_marked(atomic_load(&n->next))) {
                    if (n->key % (uint64_t)rb_g.cfg.buckets != (uint64_t)i)
                        ok = 0; /* key must live in its own bucket */
                    if (!first && n->key <= prev)
                        ok = 0;
                    prev = n->key;
                    first = 0;
                }
                n = (rb_node *)rb_unmark(atomic_load(&n->next));
            }
        }
        break;
    case RB_DS_EXT_BST:
        bst_count(rb_g.root, 0, UINT64_MAX, &ok);
        break;
    default:
        ok = 0;
    }
    return ok;
}
