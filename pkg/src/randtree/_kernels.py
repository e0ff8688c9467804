"""Numba kernels for the single-class event loop.

The Python TreeState in tree_sim is the readable reference engine; these
kernels run the identical algorithm on flat arrays for the Monte Carlo
workloads (millions to billions of events).  All state lives in
preallocated int32 arrays:

* ``parent``, ``child_count``, ``level`` indexed by arena slot;
* ``verts``/``vert_pos``: dense set of alive slots (uniform birth pick);
* ``leaves``/``leaf_pos``: dense set of deletable leaves;
* ``level_counts`` and the running height ``H``.

Event selection is two-stage: birth vs death by aggregate rate, then a
uniform member of the relevant dense set, giving O(1) per event.
"""

import numpy as np
from numba import njit

# terminal codes
TERM_HORIZON = 0
TERM_CAP = 1
TERM_DIED = 2
TERM_LEVELS = 3  # level_counts array exhausted (height cap)


@njit(cache=True, nogil=True)
def run_single(
    lam,
    mu,
    seed,
    t_max,
    max_vertices,
    root_deletable,
    sample_times,  # ascending float64 array (may be empty)
    n_levels_rec,  # per-sample level profile width (0 = off)
    burn_in,  # < 0 disables occupancy accumulation
    kmax_n,
    kmax_h,
    kmax_deg,
    n_batches,
    max_levels,
):
    np.random.seed(seed)

    cap = max_vertices + 1
    parent = np.empty(cap, np.int32)
    child_count = np.zeros(cap, np.int32)
    level = np.empty(cap, np.int32)
    verts = np.empty(cap, np.int32)
    vert_pos = np.empty(cap, np.int32)
    leaves = np.empty(cap, np.int32)
    leaf_pos = np.full(cap, -1, np.int32)
    free_stack = np.empty(cap, np.int32)
    level_counts = np.zeros(max_levels, np.int64)

    n_samples = sample_times.shape[0]
    out_n = np.zeros(n_samples, np.int64)
    out_h = np.zeros(n_samples, np.int64)
    out_deg = np.zeros(n_samples, np.int64)
    out_levels = np.zeros((n_samples, n_levels_rec), np.int64)

    n_hist = np.zeros(kmax_n + 1, np.float64)
    h_hist = np.zeros(kmax_h + 1, np.float64)
    deg_hist = np.zeros(kmax_deg + 1, np.float64)
    batch_sum_n = np.zeros(max(n_batches, 1), np.float64)
    batch_time = np.zeros(max(n_batches, 1), np.float64)
    occ_single = 0.0
    occ_pair = 0.0
    regen_count = 0

    # root
    parent[0] = -1
    level[0] = 0
    verts[0] = 0
    vert_pos[0] = 0
    n_alive = 1
    n_leaf = 0
    if root_deletable:
        leaves[0] = 0
        leaf_pos[0] = 0
        n_leaf = 1
    level_counts[0] = 1
    height = 0
    volume = 1
    free_top = 0
    next_fresh = 1

    t = 0.0
    si = 0
    event_count = 0
    terminal = TERM_HORIZON
    death_time = -1.0
    batch_len = (t_max - burn_in) / n_batches if (burn_in >= 0.0 and n_batches > 0) else 0.0

    while True:
        total = lam * n_alive + mu * n_leaf
        u1 = np.random.random()
        dt = -np.log(1.0 - u1) / total
        t_new = t + dt

        # samples use the state right before their time
        while si < n_samples and sample_times[si] <= t_new and sample_times[si] <= t_max:
            out_n[si] = volume
            out_h[si] = height
            out_deg[si] = child_count[0]
            for j in range(n_levels_rec):
                out_levels[si, j] = level_counts[j]
            si += 1

        # occupancy accumulation over [t, min(t_new, t_max)) after burn-in
        if burn_in >= 0.0:
            hi_t = t_new if t_new < t_max else t_max
            lo_t = t if t > burn_in else burn_in
            if hi_t > lo_t:
                w = hi_t - lo_t
                kn = volume if volume < kmax_n else kmax_n
                n_hist[kn] += w
                kh = height if height < kmax_h else kmax_h
                h_hist[kh] += w
                kd = child_count[0] if child_count[0] < kmax_deg else kmax_deg
                deg_hist[kd] += w
                if volume == 1:
                    occ_single += w
                elif volume == 2:
                    occ_pair += w
                if n_batches > 0:
                    b = int((lo_t - burn_in) / batch_len)
                    if b >= n_batches:
                        b = n_batches - 1
                    batch_sum_n[b] += w * volume
                    batch_time[b] += w

        if t_new > t_max:
            t = t_max
            terminal = TERM_HORIZON
            break
        t = t_new

        u2 = np.random.random() * total
        if u2 < lam * n_alive:
            # birth at a uniformly chosen alive vertex
            if volume >= max_vertices:
                terminal = TERM_CAP
                break
            i = int(np.random.random() * n_alive)
            if i >= n_alive:
                i = n_alive - 1
            v = verts[i]
            if free_top > 0:
                free_top -= 1
                slot = free_stack[free_top]
            else:
                slot = next_fresh
                next_fresh += 1
            lv = level[v] + 1
            if lv >= max_levels:
                terminal = TERM_LEVELS
                break
            parent[slot] = v
            child_count[slot] = 0
            level[slot] = lv
            if child_count[v] == 0 and (v != 0 or root_deletable):
                # v stops being a deletable leaf
                p = leaf_pos[v]
                n_leaf -= 1
                last = leaves[n_leaf]
                leaves[p] = last
                leaf_pos[last] = p
                leaf_pos[v] = -1
            child_count[v] += 1
            level_counts[lv] += 1
            if lv > height:
                height = lv
            verts[n_alive] = slot
            vert_pos[slot] = n_alive
            n_alive += 1
            leaves[n_leaf] = slot
            leaf_pos[slot] = n_leaf
            n_leaf += 1
            volume += 1
        else:
            # death of a uniformly chosen deletable leaf
            i = int(np.random.random() * n_leaf)
            if i >= n_leaf:
                i = n_leaf - 1
            u = leaves[i]
            if u == 0:
                death_time = t
                terminal = TERM_DIED
                break
            v = parent[u]
            p = leaf_pos[u]
            n_leaf -= 1
            last = leaves[n_leaf]
            leaves[p] = last
            leaf_pos[last] = p
            leaf_pos[u] = -1
            p = vert_pos[u]
            n_alive -= 1
            last = verts[n_alive]
            verts[p] = last
            vert_pos[last] = p
            free_stack[free_top] = u
            free_top += 1
            lv = level[u]
            level_counts[lv] -= 1
            if lv == height:
                while height > 0 and level_counts[height] == 0:
                    height -= 1
            child_count[v] -= 1
            if child_count[v] == 0 and (v != 0 or root_deletable):
                leaves[n_leaf] = v
                leaf_pos[v] = n_leaf
                n_leaf += 1
            volume -= 1
            if volume == 1 and burn_in >= 0.0 and t >= burn_in:
                regen_count += 1
        event_count += 1

    # flush samples not reached before the terminal event
    while si < n_samples and sample_times[si] <= t_max:
        out_n[si] = volume
        out_h[si] = height
        out_deg[si] = child_count[0]
        for j in range(n_levels_rec):
            out_levels[si, j] = level_counts[j]
        si += 1

    return (
        out_n,
        out_h,
        out_deg,
        out_levels,
        terminal,
        event_count,
        death_time,
        t,
        n_hist,
        h_hist,
        deg_hist,
        occ_single,
        occ_pair,
        batch_sum_n,
        batch_time,
        regen_count,
    )


@njit(cache=True, nogil=True)
def lifetime_batch(lam, mu, seed, t_cap, max_vertices, n_samples):
    """Draws of the generic-vertex lifetime: a deletable root plus its subtree.

    Returns (tau, censored, cap_hit); censored draws carry tau = t_cap.
    """
    tau = np.empty(n_samples, np.float64)
    censored = np.zeros(n_samples, np.bool_)
    cap_hit = np.zeros(n_samples, np.bool_)
    for i in range(n_samples):
        res = run_single(
            lam,
            mu,
            seed + 1000003 * i,
            t_cap,
            max_vertices,
            True,
            np.empty(0, np.float64),
            0,
            -1.0,
            1,
            1,
            1,
            0,
            4096,
        )
        terminal = res[4]
        if terminal == TERM_DIED:
            tau[i] = res[6]
        else:
            tau[i] = t_cap
            censored[i] = True
            if terminal == TERM_CAP:
                cap_hit[i] = True
    return tau, censored, cap_hit
