"""Interpolation nodes, Lagrange polynomials and filled Julia sets approximating planar compacts."""
from .geometry import BoundaryMesh, Disk, Polygon, PolyPreimage, Segment, UnionOfDisks, from_json
from .poly import ComplexPoly
from .potential import capacity, default_green, holder_fit, ls_bound_data
from .dynamics import JuliaApprox, approximate, build_Pn, filled_julia_raster
from .metrics import gamma_rate_table, hausdorff, klimek

__version__ = "0.1.0"

__all__ = [
    "BoundaryMesh", "Disk", "Polygon", "PolyPreimage", "Segment", "UnionOfDisks", "from_json",
    "ComplexPoly", "capacity", "default_green", "holder_fit", "ls_bound_data",
    "JuliaApprox", "approximate", "build_Pn", "filled_julia_raster",
    "gamma_rate_table", "hausdorff", "klimek",
]
