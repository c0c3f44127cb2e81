"""Superpixels from community detection on weighted r-pixel grids."""
from .communities import (Partition, community_stats, infomap, label_propagation, louvain,
                          map_equation, modularity)
from .imageio import (LabImage, Labeling, RgbImage, load_image, read_label_map, rgb_to_lab,
                      write_label_map)
from .metrics import MetricReport, evaluate
from .pixelgraph import PixelGrid, build_pixel_grid, edge_weight, grid_stats
from .segmentation import build_rag, merge_to_k, partition_to_labeling, segment

__version__ = "0.1.0"
