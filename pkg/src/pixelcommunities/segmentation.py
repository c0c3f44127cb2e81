"""From graph communities to exactly K connected superpixels."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .communities import ALGORITHMS, Partition
from .imageio import LabImage, Labeling, RgbImage
from .pixelgraph import DEFAULT_RADIUS, DEFAULT_RHO, DEFAULT_SIGMA, PixelGrid, build_pixel_grid

__all__ = [
    "RegionAdjacencyGraph", "MergeResult", "SegmentationResult",
    "partition_to_labeling", "build_rag", "merge_to_k", "segment", "is_four_connected",
    "boundary_overlay",
]


def _four_neighbor_pairs(h, w):
    idx = np.arange(h * w).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:].ravel()])
    return a, b


def _split_components(ids: np.ndarray) -> np.ndarray:
    """Split every id class into its 4-connected components; densified result."""
    h, w = ids.shape
    flat = ids.ravel()
    a, b = _four_neighbor_pairs(h, w)
    same = flat[a] == flat[b]
    n = h * w
    mat = coo_matrix((np.ones(int(same.sum())), (a[same], b[same])), shape=(n, n)).tocsr()
    _, comp = connected_components(mat, directed=False)
    return comp.reshape(h, w)


def partition_to_labeling(part: Partition, grid: PixelGrid) -> Labeling:
    """Project a node partition onto pixels, one region per 4-connected piece.

    Pixels missing from the grid become singleton regions.
    """
    if len(part.assignment) != grid.n_nodes:
        raise ValueError("partition does not cover the grid")
    n = grid.width * grid.height
    ids = np.empty(n, dtype=np.int64)
    missing = np.ones(n, dtype=bool)
    missing[grid.pixels] = False
    ids[grid.pixels] = part.assignment
    ids[missing] = part.community_count + np.arange(int(missing.sum()))
    return Labeling.from_ids(_split_components(ids.reshape(grid.height, grid.width)))


def is_four_connected(lab: Labeling) -> bool:
    return int(_split_components(lab.ids).max()) + 1 == lab.region_count


@dataclass(frozen=True, eq=False)
class RegionAdjacencyGraph:
    """Regions of a labeling with sizes, Lab means and 4-adjacency."""
    labeling: Labeling
    sizes: np.ndarray
    means: np.ndarray            # (k, 3)
    neighbors: tuple             # tuple of frozensets

    @property
    def region_count(self) -> int:
        return len(self.sizes)

    def adjacent_pairs(self):
        return sorted((i, j) for i, nb in enumerate(self.neighbors) for j in nb if i < j)


def build_rag(lab: Labeling, img: LabImage) -> RegionAdjacencyGraph:
    if (lab.height, lab.width) != (img.height, img.width):
        raise ValueError("labeling and image dimensions differ")
    k = lab.region_count
    flat = lab.ids.ravel()
    sizes = np.bincount(flat, minlength=k)
    px = img.pixels.reshape(-1, 3)
    means = np.stack([np.bincount(flat, weights=px[:, c], minlength=k) for c in range(3)], axis=1)
    means /= sizes[:, None]
    a, b = _four_neighbor_pairs(lab.height, lab.width)
    la, lb = flat[a], flat[b]
    diff = la != lb
    pairs = np.unique(np.stack([np.minimum(la[diff], lb[diff]),
                                np.maximum(la[diff], lb[diff])], axis=1), axis=0)
    nbrs = [set() for _ in range(k)]
    for i, j in pairs.tolist():
        nbrs[i].add(j)
        nbrs[j].add(i)
    return RegionAdjacencyGraph(lab, sizes, means, tuple(frozenset(s) for s in nbrs))


@dataclass(frozen=True, eq=False)
class MergeResult:
    labeling: Labeling
    requested_k: int
    initial_count: int

    @property
    def shortfall(self) -> bool:
        """True when fewer regions than requested could be produced."""
        return self.labeling.region_count < self.requested_k


def merge_to_k(rag: RegionAdjacencyGraph, k: int, sigma: float = DEFAULT_SIGMA,
               *, check: bool = False) -> MergeResult:
    """Merge small regions into their most similar neighbor until ``k`` remain.

    Regions below |I|/(10k) go first, then the smallest region is merged
    repeatedly while more than ``k`` regions are left. Every merge picks the
    neighbor with the largest Gaussian similarity between mean colors. Size
    ties go to the lower id; similarity ties to the larger neighbor, then the
    lower id.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    n_pixels = int(rag.sizes.sum())
    count = rag.region_count
    sizes = rag.sizes.astype(np.int64).tolist()
    means = [tuple(m) for m in rag.means.tolist()]
    nbrs = [set(s) for s in rag.neighbors]
    parent = list(range(count))
    merges = []
    alive = [True] * count
    heap = [(s, i) for i, s in enumerate(sizes)]
    heapq.heapify(heap)
    two_s2 = 2.0 * sigma * sigma

    def similarity(i, j):
        mi, mj = means[i], means[j]
        d2 = (mi[0] - mj[0]) ** 2 + (mi[1] - mj[1]) ** 2 + (mi[2] - mj[2]) ** 2
        return math.exp(-d2 / two_s2)

    def pop_smallest():
        while heap:
            s, i = heap[0]
            if alive[i] and sizes[i] == s:
                return s, i
            heapq.heappop(heap)
        return None

    def merge(src):
        best = max(nbrs[src], key=lambda j: (similarity(src, j), sizes[j], -j))
        sa, sb = sizes[src], sizes[best]
        ma, mb = means[src], means[best]
        means[best] = tuple((sa * x + sb * y) / (sa + sb) for x, y in zip(ma, mb))
        sizes[best] = sa + sb
        alive[src] = False
        parent[src] = best
        merges.append((src, best))
        for j in nbrs[src]:
            nbrs[j].discard(src)
            if j != best:
                nbrs[j].add(best)
                nbrs[best].add(j)
        nbrs[src] = set()
        heapq.heappush(heap, (sizes[best], best))

    pre_threshold = n_pixels / (10.0 * k)
    threshold = n_pixels / float(k)
    # phase 1: very small regions; phase 2: below |I|/K; phase 3: anything
    for limit in (pre_threshold, threshold, math.inf):
        while count > k:
            top = pop_smallest()
            if top is None or top[0] >= limit or not nbrs[top[1]]:
                break
            heapq.heappop(heap)
            merge(top[1])
            count -= 1
            if check:
                _check_state(rag, parent, alive, sizes, means)

    roots = list(range(rag.region_count))
    for src, dst in reversed(merges):
        roots[src] = roots[dst]
    ids = np.asarray(roots, dtype=np.int64)[rag.labeling.ids]
    out = Labeling.from_ids(ids)
    return MergeResult(out, k, rag.region_count)


def _check_state(rag, parent, alive, sizes, means):
    """Recompute sizes, means and connectivity of the working merge from scratch."""
    def root(i):
        while parent[i] != i:
            i = parent[i]
        return i
    roots = np.asarray([root(i) for i in range(rag.region_count)])
    assert is_four_connected(Labeling.from_ids(roots[rag.labeling.ids])), \
        "merge produced a disconnected region"
    true_sizes = np.bincount(roots, weights=rag.sizes, minlength=len(sizes))
    sums = np.zeros((len(sizes), 3))
    np.add.at(sums, roots, rag.means * rag.sizes[:, None])
    for i, a in enumerate(alive):
        if a:
            assert true_sizes[i] == sizes[i]
            assert np.allclose(sums[i] / sizes[i], means[i], rtol=0, atol=1e-9)
    assert int(true_sizes.sum()) == int(rag.sizes.sum())


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    labeling: Labeling
    partition: Partition
    grid: PixelGrid
    pre_merge_count: int
    requested_k: int

    @property
    def shortfall(self) -> bool:
        return self.labeling.region_count < self.requested_k


def _detect(grid, algorithm, seed):
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}") from None
    return fn(grid, seed)


def segment(img: LabImage, k: int, *, radius=DEFAULT_RADIUS, rho=DEFAULT_RHO,
            sigma=DEFAULT_SIGMA, algorithm="infomap", seed=0) -> SegmentationResult:
    """Grid -> communities -> connected regions -> RAG merging down to ``k``."""
    return segment_many(img, [k], radius=radius, rho=rho, sigma=sigma,
                        algorithm=algorithm, seed=seed)[0]


def segment_many(img: LabImage, ks, *, radius=DEFAULT_RADIUS, rho=DEFAULT_RHO,
                 sigma=DEFAULT_SIGMA, algorithm="infomap", seed=0):
    """Like :func:`segment` for several K, sharing the grid and the communities."""
    ks = list(ks)
    if any(k < 1 for k in ks):
        raise ValueError("K must be >= 1")
    grid = build_pixel_grid(img, radius, rho, sigma)
    part = _detect(grid, algorithm, seed)
    base = partition_to_labeling(part, grid)
    rag = build_rag(base, img)
    out = []
    for k in ks:
        merged = merge_to_k(rag, k, sigma)
        out.append(SegmentationResult(merged.labeling, part, grid, base.region_count, k))
    return out


def boundary_overlay(img: RgbImage, lab: Labeling, color=(255, 0, 0)) -> RgbImage:
    """Copy of ``img`` with region boundaries (right/bottom crack pixels) painted."""
    ids = lab.ids
    mask = np.zeros(ids.shape, dtype=bool)
    mask[:, :-1] |= ids[:, :-1] != ids[:, 1:]
    mask[:-1] |= ids[:-1] != ids[1:]
    px = np.array(img.pixels)
    px[mask] = color
    return RgbImage(px)
