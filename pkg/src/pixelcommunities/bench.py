"""Dataset harness: per-image segmentation, worst-ground-truth scoring, statistics tables.

A dataset directory holds ``<stem>.ppm`` images and their ground truths
``<stem>.gt<i>.labels`` (label-map text format). Everything is sorted by stem
so results never depend on discovery or worker order.
"""
from __future__ import annotations

import hashlib
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .communities import ALGORITHMS, community_stats
from .imageio import load_image, read_label_map, rgb_to_lab
from .metrics import CSV_HEADER, evaluate, _fmt
from .pixelgraph import DEFAULT_RADIUS, DEFAULT_RHO, DEFAULT_SIGMA, build_pixel_grid, grid_stats
from .segmentation import segment_many

log = logging.getLogger(__name__)

DEFAULT_KS = (200, 400, 600, 800, 1000, 1500, 2000, 2500, 5000)

# worst value over ground truths: lowest for quality scores, highest for errors
WORST = {"rec": min, "ev": min, "ue": max, "ue_levin": max}


@dataclass
class RunConfig:
    radius: int = DEFAULT_RADIUS
    rho: float = DEFAULT_RHO
    sigma: float = DEFAULT_SIGMA
    algorithm: str = "infomap"
    ks: tuple = DEFAULT_KS
    seed: int = 0
    tol: int | None = None
    jobs: int = 1

    def validate(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        ks = list(self.ks)
        if not ks or any(k < 1 for k in ks) or any(a >= b for a, b in zip(ks, ks[1:])):
            raise ValueError("K list must be non-empty, positive and strictly increasing")
        if self.tol is not None and self.tol < 0:
            raise ValueError("tolerance must be non-negative")
        return self


@dataclass
class DatasetEntry:
    stem: str
    image: Path
    ground_truths: list = field(default_factory=list)


_GT_RE = re.compile(r"^(?P<stem>.+)\.gt(?P<i>\d+)\.labels$")


def discover(dataset_dir) -> list[DatasetEntry]:
    root = Path(dataset_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    entries = {p.stem: DatasetEntry(p.stem, p) for p in root.glob("*.ppm")}
    gts = {}
    for p in root.glob("*.labels"):
        m = _GT_RE.match(p.name)
        if m:
            gts.setdefault(m["stem"], []).append((int(m["i"]), p))
    for stem, items in gts.items():
        if stem in entries:
            entries[stem].ground_truths = [p for _, p in sorted(items)]
    return [entries[s] for s in sorted(entries)]


def image_seed(seed: int, stem: str) -> int:
    digest = hashlib.sha256(f"{seed}:{stem}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def worst_case(reports) -> dict:
    """Collapse per-GT reports to the least favorable value of each metric."""
    out = {name: agg(getattr(r, name) for r in reports) for name, agg in WORST.items()}
    out["co"] = reports[0].co
    out["k_actual"] = reports[0].k_actual
    return out


def evaluate_entry(entry: DatasetEntry, config: RunConfig):
    """Segment one image for every K and score it. Returns a list of row dicts."""
    if not entry.ground_truths:
        raise ValueError(f"{entry.stem}: no ground truth found")
    lab = rgb_to_lab(load_image(entry.image))
    gts = [read_label_map(p) for p in entry.ground_truths]
    for p, gt in zip(entry.ground_truths, gts):
        if (gt.height, gt.width) != (lab.height, lab.width):
            raise ValueError(f"{p.name}: {gt.width}x{gt.height} does not match image "
                             f"{lab.width}x{lab.height}")
    results = segment_many(lab, config.ks, radius=config.radius, rho=config.rho,
                           sigma=config.sigma, algorithm=config.algorithm,
                           seed=image_seed(config.seed, entry.stem))
    rows = []
    for k, res in zip(config.ks, results):
        reports = [evaluate(lab, gt, res.labeling, config.tol) for gt in gts]
        row = worst_case(reports)
        row.update(image=entry.stem, k_requested=k)
        rows.append(row)
    return rows


def _run_entry(args):
    entry, config = args
    try:
        return entry.stem, evaluate_entry(entry, config), None
    except Exception as exc:  # reported per entry, the run continues
        return entry.stem, None, f"{type(exc).__name__}: {exc}"


def map_entries(fn, entries, config: RunConfig):
    jobs = [(e, config) for e in entries]
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(fn, jobs))
    else:
        results = [fn(j) for j in jobs]
    return sorted(results, key=lambda r: r[0])


METRIC_COLUMNS = ("rec", "ue", "ue_levin", "ev", "co")


def aggregate_rows(rows, ks):
    """Per-K mean and population std over images; 'mean'/'std' tagged rows."""
    out = []
    for k in ks:
        sel = [r for r in rows if r["k_requested"] == k]
        if not sel:
            continue
        for tag, fn in (("mean", np.mean), ("std", np.std)):
            agg = {"image": tag, "k_requested": k,
                   "k_actual": float(fn([r["k_actual"] for r in sel]))}
            for name in METRIC_COLUMNS:
                agg[name] = float(fn([r[name] for r in sel]))
            out.append(agg)
    return out


def format_row(row) -> str:
    k_actual = row["k_actual"]
    k_str = str(k_actual) if isinstance(k_actual, (int, np.integer)) else _fmt(k_actual)
    cells = [str(row["image"]), str(row["k_requested"]), k_str]
    cells += [_fmt(row[name]) for name in METRIC_COLUMNS]
    return ",".join(cells)


def evaluate_dataset(dataset_dir, config: RunConfig):
    """Returns (csv text, {stem: error message})."""
    config.validate()
    entries = discover(dataset_dir)
    results = map_entries(_run_entry, entries, config)
    rows, errors = [], {}
    for stem, r, err in results:
        if err is not None:
            errors[stem] = err
            log.warning("%s failed: %s", stem, err)
        else:
            rows.extend(r)
    rows.sort(key=lambda r: (r["k_requested"], r["image"]))
    lines = [",".join(CSV_HEADER)]
    lines += [format_row(r) for r in rows]
    lines += [format_row(r) for r in aggregate_rows(rows, config.ks)]
    return "\n".join(lines) + "\n", errors


# --- statistics tables -------------------------------------------------------

def _load_lab(entry):
    return rgb_to_lab(load_image(entry.image))


def grid_stats_table(dataset_dir, radii=(1, 2, 5), rhos=(0.0, 0.98), sigma=DEFAULT_SIGMA):
    """Mean vertex/edge/weight counts per (radius, rho) over the dataset's images."""
    entries = discover(dataset_dir)
    if not entries:
        raise ValueError(f"no images in {dataset_dir}")
    labs = [_load_lab(e) for e in entries]
    lines = ["radius,rho,vertices,edges,weight"]
    for r in radii:
        for rho in rhos:
            stats = [grid_stats(build_pixel_grid(lab, r, rho, sigma)) for lab in labs]
            v = np.mean([s.vertex_count for s in stats])
            e = np.mean([s.edge_count for s in stats])
            w = np.mean([s.total_weight for s in stats])
            lines.append(f"{r},{rho},{v:.2f},{e:.2f},{w:.2f}")
    return "\n".join(lines) + "\n"


def _community_job(args):
    (entry, r, rho, sigma, algo), seed = args
    lab = _load_lab(entry)
    grid = build_pixel_grid(lab, r, rho, sigma)
    return ALGORITHMS[algo](grid, image_seed(seed, entry.stem))


def community_stats_table(dataset_dir, algorithms=tuple(ALGORITHMS), radii=(2, 5),
                          rhos=(0.0, 0.98), sigma=DEFAULT_SIGMA, seed=0, jobs=1):
    """Mean/std of community count, max size and min size of the pre-merge partitions."""
    entries = discover(dataset_dir)
    if not entries:
        raise ValueError(f"no images in {dataset_dir}")
    lines = ["algorithm,radius,rho,count_mean,count_std,max_mean,max_std,min_mean,min_std"]
    for algo in algorithms:
        for r in radii:
            for rho in rhos:
                work = [((e, r, rho, sigma, algo), seed) for e in entries]
                if jobs > 1 and len(work) > 1:
                    with ProcessPoolExecutor(max_workers=jobs) as pool:
                        parts = list(pool.map(_community_job, work))
                else:
                    parts = [_community_job(w) for w in work]
                s = community_stats(parts)
                lines.append(f"{algo},{r},{rho},{s.count_mean:.2f},{s.count_std:.2f},"
                             f"{s.max_size_mean:.2f},{s.max_size_std:.2f},"
                             f"{s.min_size_mean:.2f},{s.min_size_std:.2f}")
    return "\n".join(lines) + "\n"
