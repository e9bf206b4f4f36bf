"""Geometry away from the pole: eikonal distances, off-center balls, Ahlfors and (VC) checks."""

from warpbench.offcenter.cache import FieldCache
from warpbench.offcenter.eikonal import (
    distance_field,
    eikonal_convergence_order,
    fast_march,
    mesh_for_ball,
)
from warpbench.offcenter.volumes import (
    ahlfors_check,
    ball_volume,
    ball_volume_offcenter,
    covering_count_empirical,
    vc_check,
)

__all__ = [
    "FieldCache",
    "ahlfors_check",
    "ball_volume",
    "ball_volume_offcenter",
    "covering_count_empirical",
    "distance_field",
    "eikonal_convergence_order",
    "fast_march",
    "mesh_for_ball",
    "vc_check",
]
