"""Community detection on weighted graphs.

Three detectors share one output type, :class:`Partition`:

* :func:`label_propagation` - iterated weighted-majority relabeling;
* :func:`louvain` - greedy modularity maximization with graph contraction;
* :func:`infomap` - the same local-move/contraction scheme, minimizing the
  two-level map equation of an undirected random walk.

:func:`modularity` and :func:`map_equation` evaluate a given partition.
"""
from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .pixelgraph import Graph

__all__ = [
    "Partition", "CommunityStats",
    "label_propagation", "louvain", "infomap",
    "modularity", "map_equation", "is_label_fixed_point",
    "community_stats", "connected_components", "ALGORITHMS",
]

GAIN_TOL = 1e-12
LP_MAX_SWEEPS = 100
# levels up to this many nodes also get a Kernighan-Lin refinement pass
KL_MAX_NODES = 256


@dataclass(frozen=True, eq=False)
class Partition:
    """Node -> community assignment, ids dense in first-occurrence order.

    ``converged`` is False only when label propagation hit its sweep cap.
    ``trace`` holds the quality value after every accepted move when an
    algorithm was run with ``check=True``.
    """
    assignment: np.ndarray
    community_count: int
    converged: bool = True
    trace: tuple = field(default=(), repr=False)

    @classmethod
    def from_labels(cls, labels, converged=True, trace=()) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            return cls(labels, 0, converged, tuple(trace))
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        return cls(rank[inv.ravel()], len(first), converged, tuple(trace))

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.community_count)

    def __len__(self):
        return len(self.assignment)


def _check_cover(g: Graph, part: Partition):
    if len(part.assignment) != g.n_nodes:
        raise ValueError(f"partition covers {len(part.assignment)} nodes, graph has {g.n_nodes}")


def _plogp(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


# --- quality functions -------------------------------------------------------

def modularity(g: Graph, part: Partition) -> float:
    """Q = sum_c [ in_c / W - (tot_c / 2W)^2 ], W the total edge weight."""
    _check_cover(g, part)
    if g.total_weight <= 0:
        raise ValueError("modularity is undefined on a graph with zero total weight")
    c = part.assignment
    k = part.community_count
    src = c[np.repeat(np.arange(g.n_nodes), g.degrees())]
    same = src == c[g.indices]
    # both sums run over the same directed weights so a single community gives exactly 0
    internal = np.bincount(src, weights=np.where(same, g.weights, 0.0), minlength=k) / 2.0
    tot = np.bincount(src, weights=g.weights, minlength=k)
    two_w = tot.sum()
    return float(np.sum(internal / (two_w / 2.0) - (tot / two_w) ** 2))


def map_equation(g: Graph, part: Partition) -> float:
    """Two-level map equation (bits) of the undirected walk with flow p ~ strength."""
    _check_cover(g, part)
    total = g.total_weight
    if total <= 0:
        raise ValueError("map equation is undefined on a graph with zero total weight")
    c = part.assignment
    k = part.community_count
    strength = g.strengths()
    owner = np.repeat(np.arange(g.n_nodes), g.degrees())
    cut = c[owner] != c[g.indices]
    exit_w = np.bincount(c[owner][cut], weights=g.weights[cut], minlength=k)
    flow_w = np.bincount(c, weights=strength, minlength=k)
    two_w = 2.0 * total
    q = exit_w / two_w
    p_mod = flow_w / two_w
    p_node = strength / two_w
    return (_plogp(float(q.sum()))
            - 2.0 * sum(_plogp(x) for x in q.tolist())
            - sum(_plogp(x) for x in p_node.tolist())
            + sum(_plogp(x) for x in (q + p_mod).tolist()))


# --- label propagation ------------------------------------------------------

def label_propagation(g: Graph, seed=0, *, weighted=True, max_sweeps=LP_MAX_SWEEPS) -> Partition:
    """Asynchronous label propagation from the all-distinct labeling.

    Each node in turn takes the label with the largest incident weight among
    its neighbors (edge count when ``weighted`` is False). A node keeps its
    label when that label is among the maxima, otherwise the lowest label
    wins. Node order is reshuffled every sweep.
    """
    n = g.n_nodes
    labels = list(range(n))
    adj = g.adjacency()
    if not weighted:
        adj = [[(j, 1.0) for j, _ in nbrs] for nbrs in adj]
    rng = random.Random(seed)
    order = list(range(n))
    # a node whose neighbors kept their labels would repeat its last decision
    dirty = [True] * n
    converged = False
    for _ in range(max_sweeps):
        rng.shuffle(order)
        changed = False
        for i in order:
            if not dirty[i]:
                continue
            dirty[i] = False
            nbrs = adj[i]
            if not nbrs:
                continue
            score = defaultdict(float)
            for j, w in nbrs:
                score[labels[j]] += w
            best = max(score.values())
            cur = labels[i]
            if score.get(cur, 0.0) >= best:
                continue
            new = min(lab for lab, s in score.items() if s >= best)
            labels[i] = new
            changed = True
            for j, _ in nbrs:
                dirty[j] = True
        if not changed:
            converged = True
            break
    return Partition.from_labels(labels, converged=converged)


def is_label_fixed_point(g: Graph, labels, weighted=True) -> bool:
    """True when every node's label carries maximal incident weight among its neighbors."""
    labels = np.asarray(labels)
    for i in range(g.n_nodes):
        nbrs, wts = g.neighbors(i)
        if len(nbrs) == 0:
            continue
        if not weighted:
            wts = np.ones_like(wts)
        score = defaultdict(float)
        for j, w in zip(nbrs.tolist(), wts.tolist()):
            score[labels[j]] += w
        if score.get(labels[i], 0.0) < max(score.values()):
            return False
    return True


# --- shared local-move / contraction machinery -------------------------------

class _Level:
    """One level of a contracted graph: adjacency dicts plus self-loop weights."""

    def __init__(self, adj, loops):
        self.adj = adj            # list[dict[int, float]], no self entries
        self.loops = loops        # undirected internal weight of each super-node
        self.strength = [sum(a.values()) + 2.0 * l for a, l in zip(adj, loops)]

    @classmethod
    def from_graph(cls, g: Graph):
        adj = [dict(nbrs) for nbrs in g.adjacency()]
        return cls(adj, [0.0] * g.n_nodes)

    def __len__(self):
        return len(self.adj)

    def contract(self, comm):
        """Collapse communities (dense ids) to single nodes."""
        k = max(comm) + 1
        adj = [defaultdict(float) for _ in range(k)]
        loops = [0.0] * k
        for i, nbrs in enumerate(self.adj):
            ci = comm[i]
            loops[ci] += self.loops[i]
            for j, w in nbrs.items():
                cj = comm[j]
                if ci == cj:
                    loops[ci] += w / 2.0
                else:
                    adj[ci][cj] += w
        return _Level([dict(a) for a in adj], loops)


def _dense(labels):
    remap = {}
    return [remap.setdefault(c, len(remap)) for c in labels]


def _multilevel(g: Graph, seed, local_moves, check_value=None):
    """Run ``local_moves`` on successively contracted graphs, then fine-tune.

    ``local_moves(level, rng, comm, on_move)`` improves the community list
    ``comm`` in place and returns whether any node moved. Once contraction
    stalls, single original nodes are moved again starting from the current
    partition; if that helps, contraction resumes from the refined partition.
    ``check_value(labels)`` evaluates a partition on ``g``; when given, it is
    recorded after every accepted move.
    """
    base_level = _Level.from_graph(g)
    rng = random.Random(seed)
    membership = list(range(g.n_nodes))
    trace = []

    def mover(base):
        if check_value is None:
            return None

        def on_move(comm):
            trace.append(check_value([comm[m] for m in base]))
        return on_move

    if check_value is not None:
        trace.append(check_value(membership))
    level = base_level
    while True:
        # coarsening: local moves from singletons on each contracted level
        while True:
            comm = list(range(len(level)))
            if not local_moves(level, rng, comm, mover(membership)):
                break
            comm = _dense(comm)
            membership = [comm[m] for m in membership]
            if max(comm) + 1 == len(level):
                break
            level = level.contract(comm)
        # fine-tuning on the original nodes
        comm = list(membership)
        if not local_moves(base_level, rng, comm, mover(list(range(g.n_nodes)))):
            break
        membership = _dense(comm)
        level = base_level.contract(membership)
    return membership, trace


def _free_ids(comm, n):
    used = set(comm)
    return [c for c in range(n - 1, -1, -1) if c not in used]


# --- louvain -----------------------------------------------------------------

def _modularity_moves(total):
    m2 = 2.0 * total

    def local_moves(level, rng, comm, on_move):
        n = len(level)
        strength = level.strength
        tot = [0.0] * n
        size = [0] * n
        for i, c in enumerate(comm):
            tot[c] += strength[i]
            size[c] += 1
        free = _free_ids(comm, n)
        order = list(range(n))
        rng.shuffle(order)
        any_move = False
        dirty = [True] * n
        full = False
        while True:
            moved = False
            for i in order:
                if not (full or dirty[i]):
                    continue
                dirty[i] = False
                ci = comm[i]
                ki = strength[i]
                links = defaultdict(float)
                for j, w in level.adj[i].items():
                    links[comm[j]] += w
                tot[ci] -= ki
                size[ci] -= 1
                best = ci
                best_gain = links.get(ci, 0.0) - tot[ci] * ki / m2
                for c, w in links.items():
                    gain = w - tot[c] * ki / m2
                    if gain > best_gain + GAIN_TOL:
                        best, best_gain = c, gain
                if size[ci] > 0 and best_gain < -GAIN_TOL and free:
                    best = free.pop()  # alone in a fresh community: gain 0
                tot[best] += ki
                size[best] += 1
                if best != ci:
                    if size[ci] == 0:
                        free.append(ci)
                    comm[i] = best
                    moved = any_move = True
                    for j in level.adj[i]:
                        dirty[j] = True
                    if on_move is not None:
                        on_move(comm)
            if moved:
                full = False
                continue
            if not full:
                full = True  # confirm with one complete sweep
                continue
            if n > KL_MAX_NODES or not _kl_refine(level, comm, tot, size, m2):
                return any_move
            any_move = True
            full = False
            dirty = [True] * n
            free = _free_ids(comm, n)
            if on_move is not None:
                on_move(comm)

    return local_moves


def _kl_refine(level, comm, tot, size, m2):
    """One Kernighan-Lin style pass over single-node moves.

    Each step applies the best available move of a not-yet-moved node, even
    a losing one; afterwards the sequence is cut back to its best prefix.
    Returns True when that prefix strictly improves modularity.
    """
    n = len(level)
    strength = level.strength
    locked = [False] * n
    history = []
    cum = best_cum = 0.0
    best_len = 0

    def apply(i, b):
        a = comm[i]
        tot[a] -= strength[i]
        size[a] -= 1
        tot[b] += strength[i]
        size[b] += 1
        comm[i] = b

    for _ in range(n):
        empty = next((c for c in range(n) if size[c] == 0), None)
        step = None
        for i in range(n):
            if locked[i]:
                continue
            a, ki = comm[i], strength[i]
            links = defaultdict(float)
            for j, w in level.adj[i].items():
                links[comm[j]] += w
            stay = links.get(a, 0.0) - (tot[a] - ki) * ki / m2
            options = [(c, w - tot[c] * ki / m2) for c, w in links.items() if c != a]
            if empty is not None and size[a] > 1:
                options.append((empty, 0.0))
            for b, gain in options:
                delta = gain - stay
                if step is None or delta > step[0] + GAIN_TOL:
                    step = (delta, i, b)
        if step is None:
            break
        delta, i, b = step
        history.append((i, comm[i]))
        apply(i, b)
        locked[i] = True
        cum += delta
        if cum > best_cum + GAIN_TOL:
            best_cum, best_len = cum, len(history)
    for i, a in reversed(history[best_len:]):
        apply(i, a)
    return best_len > 0


def louvain(g: Graph, seed=0, *, check=False) -> Partition:
    """Greedy modularity maximization by local moves and contraction.

    With ``check=True`` the modularity of the working partition is recomputed
    on ``g`` after every accepted move, asserted non-decreasing and stored in
    ``Partition.trace``.
    """
    n = g.n_nodes
    total = g.total_weight
    if n == 0 or total <= 0:
        return Partition.from_labels(range(n))
    check_value = None
    if check:
        check_value = lambda labels: modularity(g, Partition.from_labels(labels))
    membership, trace = _multilevel(g, seed, _modularity_moves(total), check_value)
    if check:
        _assert_monotone(trace, increasing=True)
    return Partition.from_labels(membership, trace=trace)


def _assert_monotone(trace, increasing, tol=1e-9):
    for a, b in zip(trace, trace[1:]):
        if (b < a - tol) if increasing else (b > a + tol):
            raise AssertionError(f"quality moved the wrong way: {a!r} -> {b!r}")


# --- infomap -----------------------------------------------------------------

class _MapState:
    """Per-module exit and flow probabilities plus the running codelength sums.

    Only the module-dependent part of the map equation is tracked; the node
    entropy term is constant under moves.
    """

    def __init__(self, level, comm, two_w):
        n = len(level)
        self.flow = [0.0] * n
        self.exit = [0.0] * n
        for i, c in enumerate(comm):
            self.flow[c] += level.strength[i] / two_w
            out = level.strength[i] - 2.0 * level.loops[i]
            for j, w in level.adj[i].items():
                if comm[j] == c:
                    out -= w
            self.exit[c] += out / two_w
        self.term = [-2.0 * _plogp(e) + _plogp(e + f) for e, f in zip(self.exit, self.flow)]
        self.sum_exit = sum(self.exit)

    def update(self, m, new_exit, new_flow, new_term):
        self.sum_exit += new_exit - self.exit[m]
        self.exit[m], self.flow[m], self.term[m] = new_exit, new_flow, new_term


def _map_moves(total):
    two_w = 2.0 * total
    log2 = math.log2

    def local_moves(level, rng, comm, on_move):
        n = len(level)
        st = _MapState(level, comm, two_w)
        exit_, flow, term = st.exit, st.flow, st.term
        node_flow = [s / two_w for s in level.strength]
        node_out = [(s - 2.0 * l) / two_w for s, l in zip(level.strength, level.loops)]
        adj = [{j: w / two_w for j, w in a.items()} for a in level.adj]
        size = [0] * n
        for c in comm:
            size[c] += 1
        free = _free_ids(comm, n)
        order = list(range(n))
        rng.shuffle(order)
        any_move = False
        dirty = [True] * n
        full = False
        while True:
            moved = False
            for i in order:
                if not (full or dirty[i]):
                    continue
                dirty[i] = False
                a = comm[i]
                links = defaultdict(float)
                for j, w in adj[i].items():
                    links[comm[j]] += w
                fi, oi = node_flow[i], node_out[i]
                w_a = links.pop(a, 0.0)
                # module a once node i has left it
                exit_a = exit_[a] - oi + 2.0 * w_a
                flow_a = flow[a] - fi
                ea = exit_a if exit_a > 0 else 0.0
                eb = ea + flow_a
                term_a = (-2.0 * ea * log2(ea) if ea > 0 else 0.0) + (eb * log2(eb) if eb > 0 else 0.0)
                rest_exit = st.sum_exit - exit_[a] + exit_a
                sx = st.sum_exit
                cur = term[a] + (sx * log2(sx) if sx > 0 else 0.0)
                base = term_a - cur
                if size[a] > 1 and free:
                    links[free[-1]] = 0.0
                best, best_delta, best_vals = a, 0.0, None
                for b, w_b in links.items():
                    exit_b = exit_[b] + oi - 2.0 * w_b
                    flow_b = flow[b] + fi
                    e = exit_b if exit_b > 0 else 0.0
                    ef = e + flow_b
                    term_b = (-2.0 * e * log2(e) if e > 0 else 0.0) + (ef * log2(ef) if ef > 0 else 0.0)
                    sx = rest_exit - exit_[b] + exit_b
                    delta = base + term_b - term[b] + (sx * log2(sx) if sx > 0 else 0.0)
                    if delta < best_delta - GAIN_TOL:
                        best, best_delta, best_vals = b, delta, (exit_b, flow_b, term_b)
                if best != a:
                    if free and best == free[-1]:
                        free.pop()
                    st.update(a, exit_a, flow_a, term_a)
                    st.update(best, *best_vals)
                    size[a] -= 1
                    size[best] += 1
                    if size[a] == 0:
                        free.append(a)
                    comm[i] = best
                    moved = any_move = True
                    for j in adj[i]:
                        dirty[j] = True
                    if on_move is not None:
                        on_move(comm)
            if moved:
                full = False
            elif full:
                return any_move
            else:
                full = True  # confirm with one complete sweep

    return local_moves


def connected_components(g: Graph) -> np.ndarray:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components as cc
    n = g.n_nodes
    mat = csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(n, n))
    return cc(mat, directed=False)[1]


def infomap(g: Graph, seed=0, *, check=False) -> Partition:
    """Greedy two-level map-equation minimization from the singleton partition.

    Local moves and contraction as in :func:`louvain`. The result is compared
    with the connected-components partition (the best one-module-per-component
    solution) and the shorter description is returned.
    """
    n = g.n_nodes
    total = g.total_weight
    if n == 0 or total <= 0:
        return Partition.from_labels(range(n))
    check_value = None
    if check:
        check_value = lambda labels: map_equation(g, Partition.from_labels(labels))
    membership, trace = _multilevel(g, seed, _map_moves(total), check_value)
    if check:
        _assert_monotone(trace, increasing=False)
    found = Partition.from_labels(membership, trace=trace)
    components = Partition.from_labels(connected_components(g), trace=trace)
    if map_equation(g, components) < map_equation(g, found) - GAIN_TOL:
        return components
    return found


ALGORITHMS = {
    "label-propagation": label_propagation,
    "louvain": louvain,
    "infomap": infomap,
}


# --- statistics ----------------------------------------------------------------

@dataclass(frozen=True)
class CommunityStats:
    """Mean and population standard deviation over a batch of partitions."""
    count_mean: float
    count_std: float
    max_size_mean: float
    max_size_std: float
    min_size_mean: float
    min_size_std: float
    n_partitions: int


def community_stats(partitions) -> CommunityStats:
    partitions = list(partitions)
    if not partitions:
        raise ValueError("empty batch")
    counts, maxs, mins = [], [], []
    for p in partitions:
        sizes = p.sizes()
        counts.append(p.community_count)
        maxs.append(int(sizes.max()) if len(sizes) else 0)
        mins.append(int(sizes.min()) if len(sizes) else 0)
    c, mx, mn = (np.asarray(v, dtype=np.float64) for v in (counts, maxs, mins))
    return CommunityStats(float(c.mean()), float(c.std()), float(mx.mean()), float(mx.std()),
                          float(mn.mean()), float(mn.std()), len(partitions))
