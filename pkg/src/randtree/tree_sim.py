"""Exact continuous-time event-driven simulation of the tree-valued chain.

A TreeState stores the rooted tree in a slot arena with a free list; the
set of alive vertices (per class) and the set of deletable leaves (per
ancestor-class/own-class pair) are dense index sets with swap-remove, so
each event costs O(1).  Single-class bulk runs are delegated to the numba
kernels in _kernels; the Python engine here is the readable reference and
the only path for multiclass dynamics.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .errors import CapExceeded, DomainError
from .model_core import ModelParams
from .multiclass import RateMatrices

Params = Union[ModelParams, RateMatrices]


def _as_matrices(params: Params) -> RateMatrices:
    if isinstance(params, RateMatrices):
        return params
    return RateMatrices(
        lam=np.array([[params.lam]]), mu=np.array([[max(params.mu, 1e-300)]])
    )


def derive_stream_seed(seed: int, replica: int) -> int:
    """Replica streams are keyed by (seed, replica), independent of scheduling."""
    return (seed + 1000003 * replica) % (2**31 - 1)


@dataclass
class SimConfig:
    seed: int
    t_max: float
    max_vertices: int = 10_000_000
    sample_times: Sequence[float] = field(default_factory=list)
    record_levels: bool = False
    n_levels_rec: int = 64
    root_class: int = 0

    def __post_init__(self) -> None:
        if not self.t_max > 0:
            raise DomainError("t_max must be > 0")
        if self.max_vertices < 1:
            raise DomainError("max_vertices must be >= 1")
        st = np.asarray(list(self.sample_times), dtype=float)
        if st.size and (st.min() < 0 or st.max() > self.t_max or np.any(np.diff(st) < 0)):
            raise DomainError("sample_times must be ascending within [0, t_max]")
        self.sample_times = st


@dataclass
class Trajectory:
    samples: list  # (t, N, H, root_degree, levels-or-None)
    terminal: str  # "horizon" | "cap"
    event_count: int

    def to_csv(self, path) -> None:
        with_levels = self.samples and self.samples[0][4] is not None
        n_lv = len(self.samples[0][4]) if with_levels else 0
        header = "t,N,H,root_degree" + "".join(f",X{i}" for i in range(n_lv))
        lines = [header]
        for t, n, h, deg, levels in self.samples:
            row = f"{t:.17g},{n},{h},{deg}"
            if with_levels:
                row += "".join(f",{x}" for x in levels)
            lines.append(row)
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass
class LifetimeSample:
    tau: float
    censored: bool
    cap_hit: bool = False


class TreeState:
    """Arena-stored rooted tree with leaf index, level counts and clock."""

    def __init__(self, root_class: int = 0, n_classes: int = 1, root_deletable: bool = False):
        if not 0 <= root_class < n_classes:
            raise DomainError(f"root_class {root_class} out of range")
        self.n_classes = n_classes
        self.root_deletable = root_deletable
        self.parent = [-1]
        self.class_id = [root_class]
        self.child_count = [0]
        self.alive = [True]
        self.level = [0]
        self.free: list[int] = []
        self.verts_by_class = [[] for _ in range(n_classes)]
        self.verts_by_class[root_class].append(0)
        self.vert_pos = [0]
        self.leaf_buckets: dict[tuple[int, int], list[int]] = {}
        self.leaf_pos = [-1]
        self.leaf_key: list[Optional[tuple[int, int]]] = [None]
        self.level_counts = [1]
        self.height = 0
        self.clock = 0.0
        self.volume = 1
        self.event_count = 0
        self.root_dead = False
        if root_deletable:
            self._add_leaf(0, (root_class, root_class))

    # -- leaf index maintenance -------------------------------------------
    def _add_leaf(self, v: int, key: tuple[int, int]) -> None:
        bucket = self.leaf_buckets.setdefault(key, [])
        self.leaf_pos[v] = len(bucket)
        self.leaf_key[v] = key
        bucket.append(v)

    def _remove_leaf(self, v: int) -> None:
        key = self.leaf_key[v]
        bucket = self.leaf_buckets[key]
        p = self.leaf_pos[v]
        last = bucket[-1]
        bucket[p] = last
        self.leaf_pos[last] = p
        bucket.pop()
        self.leaf_pos[v] = -1
        self.leaf_key[v] = None

    def _leaf_eligible(self, v: int) -> bool:
        return self.child_count[v] == 0 and (v != 0 or self.root_deletable)

    def _leaf_bucket_key(self, v: int) -> tuple[int, int]:
        par = self.parent[v]
        anc = self.class_id[par] if par >= 0 else self.class_id[v]
        return (anc, self.class_id[v])

    # -- event application ------------------------------------------------
    def apply_birth(self, v: int, child_class: int) -> int:
        if self.free:
            slot = self.free.pop()
            self.parent[slot] = v
            self.class_id[slot] = child_class
            self.child_count[slot] = 0
            self.alive[slot] = True
            self.level[slot] = self.level[v] + 1
        else:
            slot = len(self.parent)
            self.parent.append(v)
            self.class_id.append(child_class)
            self.child_count.append(0)
            self.alive.append(True)
            self.level.append(self.level[v] + 1)
            self.vert_pos.append(-1)
            self.leaf_pos.append(-1)
            self.leaf_key.append(None)
        if self._leaf_eligible(v):
            self._remove_leaf(v)
        self.child_count[v] += 1
        lv = self.level[slot]
        if lv == len(self.level_counts):
            self.level_counts.append(0)
        self.level_counts[lv] += 1
        if lv > self.height:
            self.height = lv
        vb = self.verts_by_class[child_class]
        self.vert_pos[slot] = len(vb)
        vb.append(slot)
        self._add_leaf(slot, (self.class_id[v], child_class))
        self.volume += 1
        return slot

    def apply_death(self, u: int) -> None:
        if u == 0:
            self._remove_leaf(0)
            self.root_dead = True
            return
        v = self.parent[u]
        self._remove_leaf(u)
        vb = self.verts_by_class[self.class_id[u]]
        p = self.vert_pos[u]
        last = vb[-1]
        vb[p] = last
        self.vert_pos[last] = p
        vb.pop()
        self.alive[u] = False
        self.free.append(u)
        lv = self.level[u]
        self.level_counts[lv] -= 1
        if lv == self.height:
            while self.height > 0 and self.level_counts[self.height] == 0:
                self.height -= 1
        self.child_count[v] -= 1
        if self._leaf_eligible(v):
            self._add_leaf(v, self._leaf_bucket_key(v))
        self.volume -= 1

    # -- diagnostics ------------------------------------------------------
    def root_degree(self) -> int:
        return self.child_count[0]

    def level_profile(self) -> list[int]:
        return list(self.level_counts[: self.height + 1])

    def check_invariants(self) -> None:
        """Full rescan; meant for tests and debug runs."""
        alive = [v for v in range(len(self.parent)) if self.alive[v]]
        assert self.volume == len(alive) == sum(self.level_counts)
        assert self.height == max(self.level[v] for v in alive)
        expected_leaves = {
            v for v in alive if self.child_count[v] == 0 and (v != 0 or self.root_deletable)
        }
        in_buckets = {v for bucket in self.leaf_buckets.values() for v in bucket}
        assert in_buckets == expected_leaves, (in_buckets, expected_leaves)
        for v in alive:
            kids = [u for u in alive if self.parent[u] == v]
            assert self.child_count[v] == len(kids)


def new_tree(root_class: int = 0, n_classes: int = 1, root_deletable: bool = False) -> TreeState:
    """Fresh state: the single root vertex at time 0."""
    return TreeState(root_class=root_class, n_classes=n_classes, root_deletable=root_deletable)


def step(
    state: TreeState,
    params: Params,
    rng: random.Random,
    max_vertices: Optional[int] = None,
) -> tuple[str, int, float]:
    """Execute one event: exponential holding time, then birth or death.

    Returns (kind, vertex, dt).  Raises CapExceeded, leaving the state
    untouched (clock included), when a birth would pass max_vertices.
    """
    rates = _as_matrices(params)
    row_lam = rates.lam.sum(axis=1)
    birth_rates = [len(self_vb) * row_lam[c] for c, self_vb in enumerate(state.verts_by_class)]
    total_birth = float(sum(birth_rates))
    death_items = [
        (key, len(bucket) * rates.mu[key[0], key[1]])
        for key, bucket in state.leaf_buckets.items()
        if bucket
    ]
    total_death = float(sum(w for _, w in death_items))
    total = total_birth + total_death
    if total <= 0:
        raise DomainError("total event rate is zero")
    dt = -math.log(1.0 - rng.random()) / total
    u = rng.random() * total
    if u < total_birth:
        # pick the class of the breeding vertex, then the vertex, then the
        # class of the new edge
        acc = 0.0
        c = 0
        for c, w in enumerate(birth_rates):
            acc += w
            if u < acc:
                break
        if max_vertices is not None and state.volume >= max_vertices:
            raise CapExceeded(f"volume {state.volume} at cap {max_vertices}")
        vb = state.verts_by_class[c]
        v = vb[rng.randrange(len(vb))]
        u2 = rng.random() * row_lam[c]
        acc = 0.0
        child_class = 0
        for child_class in range(state.n_classes):
            acc += rates.lam[c, child_class]
            if u2 < acc:
                break
        state.clock += dt
        state.apply_birth(v, child_class)
        state.event_count += 1
        return ("birth", v, dt)
    u -= total_birth
    acc = 0.0
    key = death_items[-1][0]
    for key, w in death_items:
        acc += w
        if u < acc:
            break
    bucket = state.leaf_buckets[key]
    victim = bucket[rng.randrange(len(bucket))]
    state.clock += dt
    state.apply_death(victim)
    state.event_count += 1
    return ("death", victim, dt)


def tree_weight(state: TreeState, rho: float) -> float:
    """log of the unnormalized stationary weight: N log rho - sum_v log eta(v)!.

    eta(v) counts the leaf children of v; single-class states only.
    """
    if state.n_classes != 1:
        raise DomainError("tree_weight is defined for single-class states")
    if rho <= 0:
        raise DomainError(f"rho must be > 0, got {rho}")
    eta = [0] * len(state.parent)
    for v in range(len(state.parent)):
        if state.alive[v] and state.child_count[v] == 0 and v != 0:
            eta[state.parent[v]] += 1
    log_w = state.volume * math.log(rho)
    for v in range(len(state.parent)):
        if state.alive[v] and eta[v] > 1:
            log_w -= math.lgamma(eta[v] + 1)
    return log_w


def _simulate_python(config: SimConfig, params: Params) -> Trajectory:
    rates = _as_matrices(params)
    state = new_tree(root_class=config.root_class, n_classes=rates.n_classes)
    rng = random.Random(config.seed)
    samples: list = []
    st = config.sample_times
    si = 0
    terminal = "horizon"
    while True:
        snap = (state.volume, state.height, state.root_degree(),
                state.level_profile() if config.record_levels else None)
        t_old = state.clock
        try:
            step(state, rates, rng, max_vertices=config.max_vertices)
        except CapExceeded:
            while si < len(st):
                samples.append((float(st[si]), *snap))
                si += 1
            terminal = "cap"
            break
        t_new = state.clock
        while si < len(st) and st[si] <= t_new:
            samples.append((float(st[si]), *snap))
            si += 1
        if t_new > config.t_max:
            state.event_count -= 1  # the event past the horizon is discarded
            break
    while si < len(st):
        samples.append(
            (float(st[si]), state.volume, state.height, state.root_degree(),
             state.level_profile() if config.record_levels else None)
        )
        si += 1
    return Trajectory(samples=samples, terminal=terminal, event_count=state.event_count)


def simulate(config: SimConfig, params: Params) -> Trajectory:
    """Drive the chain to the horizon, sampling at the configured times.

    Deterministic given (seed, params, config).  Single-class runs use the
    compiled kernel; multiclass runs use the Python engine.
    """
    rates = _as_matrices(params)
    if rates.n_classes > 1:
        return _simulate_python(config, params)
    lam = float(rates.lam[0, 0])
    mu = float(rates.mu[0, 0]) if isinstance(params, RateMatrices) else params.mu
    n_lv = config.n_levels_rec if config.record_levels else 0
    res = _kernels.run_single(
        lam,
        mu,
        derive_stream_seed(config.seed, 0),
        config.t_max,
        config.max_vertices,
        False,
        np.asarray(config.sample_times, dtype=float),
        n_lv,
        -1.0,
        1,
        1,
        1,
        0,
        1 << 16,
    )
    out_n, out_h, out_deg, out_levels, terminal, event_count = res[:6]
    samples = [
        (
            float(t),
            int(out_n[i]),
            int(out_h[i]),
            int(out_deg[i]),
            list(out_levels[i]) if n_lv else None,
        )
        for i, t in enumerate(config.sample_times)
    ]
    word = "cap" if terminal == _kernels.TERM_CAP else "horizon"
    return Trajectory(samples=samples, terminal=word, event_count=int(event_count))


def lifetime_sample(
    params: ModelParams,
    rng: random.Random,
    t_cap: float,
    max_vertices: int = 100_000,
) -> LifetimeSample:
    """One draw of the generic-vertex lifetime (possibly censored at t_cap).

    The sampled vertex runs its own rate-mu death clock whenever it is a
    leaf, while its subtree evolves under the usual dynamics.  A run that
    hits the vertex cap before dying is reported as censored with the cap
    flag: its continuation is overwhelmingly likely to survive forever.
    """
    if params.mu <= 0:
        raise DomainError("lifetime_sample requires mu > 0")
    if t_cap <= 0:
        raise DomainError("t_cap must be > 0")
    state = new_tree(root_deletable=True)
    while True:
        try:
            step(state, params, rng, max_vertices=max_vertices)
        except CapExceeded:
            return LifetimeSample(tau=t_cap, censored=True, cap_hit=True)
        if state.root_dead:
            return LifetimeSample(tau=state.clock, censored=False)
        if state.clock > t_cap:
            return LifetimeSample(tau=t_cap, censored=True)
