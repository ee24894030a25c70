"""Largest inscribed spheres of RIVs from their triangle-mesh boundaries."""

from .bvh import AabbTree, brute_force_distance, inside_test, signed_distance, unsigned_distance
from .inscribed import (
    InscribedSphereResult,
    max_inscribed_radius,
    max_radius_over_rivs,
    voxel_distance_oracle,
)
from .mesh import TriangleMesh, extract_isosurface, riv_isosurface

__all__ = [
    "AabbTree",
    "InscribedSphereResult",
    "TriangleMesh",
    "brute_force_distance",
    "extract_isosurface",
    "inside_test",
    "max_inscribed_radius",
    "max_radius_over_rivs",
    "riv_isosurface",
    "signed_distance",
    "unsigned_distance",
    "voxel_distance_oracle",
]
