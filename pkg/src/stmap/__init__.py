"""Stochastic terrain mapping and landing hazard detection.

Reconstructs Gaussian digital elevation maps from sparse simulated LiDAR
point clouds (Delaunay triangulation + local Gaussian-random-field
regression) and evaluates landing safety with a provably conservative fast
detector, its stochastic extension, an ALHAT-style baseline, and a
brute-force exact oracle.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .grid import GaussianGrid, GeoGrid, PointCloud

__version__ = "0.1.0"

__all__ = ["GeoGrid", "GaussianGrid", "PointCloud", "KERNEL_BACKEND", "__version__"]
