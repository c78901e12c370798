"""Vehicle segmentation, L-shape fitting and multi-model tracking for sparse 2D LIDAR."""

__version__ = "0.1.0"
