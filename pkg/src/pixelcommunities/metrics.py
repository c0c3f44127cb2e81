"""Superpixel quality metrics.

Ground-truth based: boundary recall, undersegmentation error (the bounded
form and the original Levinshtein form). Intrinsic: explained variation and
compactness.

Boundary pixels follow one convention everywhere: a pixel is on a boundary
iff its right or bottom 4-neighbor carries a different id.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from .imageio import LabImage, Labeling

__all__ = [
    "MetricReport", "boundary_pixels", "boundary_recall", "undersegmentation_error",
    "ue_levin", "explained_variation", "compactness", "evaluate", "default_tolerance",
    "CSV_HEADER",
]

CSV_HEADER = ("image", "k_requested", "k_actual", "rec", "ue", "ue_levin", "ev", "co")


def _same_shape(a: Labeling, b: Labeling):
    if a.ids.shape != b.ids.shape:
        raise ValueError(f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}")


def default_tolerance(width: int, height: int) -> int:
    """Boundary-recall tolerance: 0.25% of the image diagonal, rounded half up."""
    return int(math.floor(0.0025 * math.hypot(width, height) + 0.5))


def boundary_pixels(lab: Labeling) -> np.ndarray:
    ids = lab.ids
    mask = np.zeros(ids.shape, dtype=bool)
    mask[:, :-1] |= ids[:, :-1] != ids[:, 1:]
    mask[:-1] |= ids[:-1] != ids[1:]
    return mask


def boundary_recall(gt: Labeling, seg: Labeling, tol: int) -> float:
    """Fraction of GT boundary pixels within Chebyshev distance ``tol`` of a seg boundary pixel."""
    _same_shape(gt, seg)
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    gt_b = boundary_pixels(gt)
    n_gt = int(gt_b.sum())
    if n_gt == 0:
        return 1.0
    seg_b = boundary_pixels(seg)
    if tol > 0 and seg_b.any():
        seg_b = binary_dilation(seg_b, structure=np.ones((2 * tol + 1, 2 * tol + 1), dtype=bool))
    return int((gt_b & seg_b).sum()) / n_gt


def _contingency(gt: Labeling, seg: Labeling):
    """Nonzero overlap cells as (gt id, seg id, |S_j ∩ G_i|) arrays."""
    key = gt.ids.ravel() * seg.region_count + seg.ids.ravel()
    cells, counts = np.unique(key, return_counts=True)
    return cells // seg.region_count, cells % seg.region_count, counts


def undersegmentation_error(gt: Labeling, seg: Labeling) -> float:
    _same_shape(gt, seg)
    _, j, inter = _contingency(gt, seg)
    seg_sizes = seg.sizes()
    leak = np.minimum(inter, seg_sizes[j] - inter)
    return float(leak.sum()) / gt.ids.size


def ue_levin(gt: Labeling, seg: Labeling) -> float:
    _same_shape(gt, seg)
    i, j, _ = _contingency(gt, seg)
    seg_sizes = seg.sizes()
    gt_sizes = gt.sizes()
    covered = np.bincount(i, weights=seg_sizes[j], minlength=gt.region_count)
    return float(np.mean((covered - gt_sizes) / gt_sizes))


def explained_variation(img: LabImage, seg: Labeling) -> float:
    """Share of the image's Lab variance explained by superpixel means (1.0 on flat images)."""
    if (img.height, img.width) != seg.ids.shape:
        raise ValueError("image and labeling dimensions differ")
    px = img.pixels.reshape(-1, 3)
    if np.all(px == px[0]):
        return 1.0
    mu = px.mean(axis=0)
    total = float(np.sum((px - mu) ** 2))
    flat = seg.ids.ravel()
    sizes = seg.sizes()
    sums = np.stack([np.bincount(flat, weights=px[:, c], minlength=seg.region_count)
                     for c in range(3)], axis=1)
    means = sums / sizes[:, None]
    explained = float(np.sum(sizes * np.sum((means - mu) ** 2, axis=1)))
    return min(explained / total, 1.0)


def _perimeters(seg: Labeling) -> np.ndarray:
    """Unit pixel sides on each region's boundary, image border included."""
    padded = np.pad(seg.ids, 1, constant_values=-1)
    inner = padded[1:-1, 1:-1]
    k = seg.region_count
    per = np.zeros(k)
    for nb in (padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]):
        edge = inner != nb
        per += np.bincount(inner[edge], minlength=k)
    return per


def compactness(seg: Labeling) -> float:
    """Size-weighted mean isoperimetric quotient 4*pi*A / P^2."""
    sizes = seg.sizes().astype(np.float64)
    per = _perimeters(seg)
    return float(np.sum(sizes * 4.0 * np.pi * sizes / per ** 2)) / seg.ids.size


@dataclass(frozen=True)
class MetricReport:
    rec: float
    ue: float
    ue_levin: float
    ev: float
    co: float
    k_actual: int
    tolerance_px: int

    def csv_row(self, image_id, k_requested):
        return [str(image_id), str(k_requested), str(self.k_actual),
                *(_fmt(v) for v in (self.rec, self.ue, self.ue_levin, self.ev, self.co))]


def _fmt(x: float) -> str:
    return f"{x:.10f}"


def evaluate(img: LabImage, gt: Labeling, seg: Labeling, tol: int | None = None) -> MetricReport:
    _same_shape(gt, seg)
    if tol is None:
        tol = default_tolerance(seg.width, seg.height)
    return MetricReport(
        rec=boundary_recall(gt, seg, tol),
        ue=undersegmentation_error(gt, seg),
        ue_levin=ue_levin(gt, seg),
        ev=explained_variation(img, seg),
        co=compactness(seg),
        k_actual=seg.region_count,
        tolerance_px=tol,
    )
