"""Weighted r-pixel grids.

Two pixels are joined when they share a row or a column and lie at most
``radius`` pixels apart along it. Edges are weighted by a Gaussian of the
Lab distance and kept only when the weight exceeds ``rho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imageio import LabImage

DEFAULT_RADIUS = 5
DEFAULT_RHO = 0.98
DEFAULT_SIGMA = 125.0

__all__ = [
    "Graph", "PixelGrid", "GridStats",
    "edge_weight", "build_pixel_grid", "grid_stats", "write_edge_list",
    "DEFAULT_RADIUS", "DEFAULT_RHO", "DEFAULT_SIGMA",
]


def edge_weight(p, q, sigma: float) -> float:
    """exp(-|p - q|^2 / (2 sigma^2)) for two Lab triples."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d2 = float(np.sum((np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)) ** 2))
    return math.exp(-d2 / (2.0 * sigma * sigma))


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph in CSR form, both edge directions stored.

    Rows are sorted by neighbor id. No self-loops.
    """
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "Graph":
        """Build from ``(u, v, w)`` triples, each undirected edge listed once."""
        edges = list(edges)
        if edges:
            u, v, w = (np.asarray(c) for c in zip(*edges))
        else:
            u = v = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
        return cls._from_arrays(n_nodes, u.astype(np.int64), v.astype(np.int64),
                                w.astype(np.float64))

    @classmethod
    def _from_arrays(cls, n_nodes, u, v, w):
        if np.any(u == v):
            raise ValueError("self-loops are not allowed")
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        wts = np.concatenate([w, w])
        order = np.lexsort((dst, src))
        src, dst, wts = src[order], dst[order], wts[order]
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n_nodes), out=indptr[1:])
        return cls(indptr, dst, wts)

    @property
    def n_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum()) / 2.0

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def strengths(self) -> np.ndarray:
        owner = np.repeat(np.arange(self.n_nodes), self.degrees())
        return np.bincount(owner, weights=self.weights, minlength=self.n_nodes)

    def neighbors(self, i: int):
        a, b = self.indptr[i], self.indptr[i + 1]
        return self.indices[a:b], self.weights[a:b]

    def adjacency(self) -> list[list[tuple[int, float]]]:
        """Plain Python adjacency lists, for the node-sweeping algorithms."""
        idx = self.indices.tolist()
        wts = self.weights.tolist()
        ptr = self.indptr.tolist()
        return [list(zip(idx[ptr[i]:ptr[i + 1]], wts[ptr[i]:ptr[i + 1]]))
                for i in range(self.n_nodes)]

    def edges(self):
        """Yield each undirected edge once as ``(u, v, w)`` with u < v."""
        for u in range(self.n_nodes):
            nbrs, wts = self.neighbors(u)
            for v, w in zip(nbrs.tolist(), wts.tolist()):
                if u < v:
                    yield u, v, w


@dataclass(frozen=True, eq=False)
class PixelGrid(Graph):
    """r-pixel grid over an image. Node ``i`` is pixel ``pixels[i]`` (row-major index)."""
    pixels: np.ndarray
    width: int
    height: int
    radius: int
    rho: float
    sigma: float


@dataclass(frozen=True)
class GridStats:
    vertex_count: int
    edge_count: int
    total_weight: float


def build_pixel_grid(img: LabImage, radius: int = DEFAULT_RADIUS, rho: float = DEFAULT_RHO,
                     sigma: float = DEFAULT_SIGMA) -> PixelGrid:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lab = np.asarray(img.pixels, dtype=np.float64)
    if lab.size == 0:
        raise ValueError("empty image")
    h, w = lab.shape[:2]
    index = np.arange(h * w, dtype=np.int64).reshape(h, w)

    us, vs, ws = [], [], []
    for d in range(1, radius + 1):
        if d < w:
            diff = lab[:, d:] - lab[:, :-d]
            us.append(index[:, :-d].ravel())
            vs.append(index[:, d:].ravel())
            ws.append(np.exp(-np.sum(diff * diff, axis=-1) / (2 * sigma * sigma)).ravel())
        if d < h:
            diff = lab[d:] - lab[:-d]
            us.append(index[:-d].ravel())
            vs.append(index[d:].ravel())
            ws.append(np.exp(-np.sum(diff * diff, axis=-1) / (2 * sigma * sigma)).ravel())
    if us:
        u, v, wt = np.concatenate(us), np.concatenate(vs), np.concatenate(ws)
    else:
        u = v = np.zeros(0, dtype=np.int64)
        wt = np.zeros(0)
    keep = wt > rho
    u, v, wt = u[keep], v[keep], wt[keep]

    if rho > 0:
        pixels = np.unique(np.concatenate([u, v]))
    else:
        pixels = np.arange(h * w, dtype=np.int64)
    local = np.full(h * w, -1, dtype=np.int64)
    local[pixels] = np.arange(len(pixels))
    g = Graph._from_arrays(len(pixels), local[u], local[v], wt)
    return PixelGrid(g.indptr, g.indices, g.weights, pixels=pixels, width=w, height=h,
                     radius=radius, rho=rho, sigma=sigma)


def grid_stats(g: Graph) -> GridStats:
    return GridStats(g.n_nodes, g.n_edges, g.total_weight)


def write_edge_list(g: PixelGrid, path) -> None:
    """Debug dump: one ``u v w`` line per undirected edge, pixel ids row-major."""
    px = g.pixels.tolist()
    with open(path, "w") as f:
        for a, b, wt in g.edges():
            f.write(f"{px[a]} {px[b]} {wt!r}\n")
