"""Surface reconstruction from raw, un-oriented point clouds.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (
    FieldModel,
    SfreconError,
    TrainingConfig,
    assign_signs,
    chamfer_distance,
    evaluate_meshes,
    export_mesh,
    extract_mesh,
    f_score,
    farthest_point_sampling,
    fit_sphere,
    load_mesh,
    load_points,
    nearest_distances,
    normal_consistency,
    normalize_to_unit_sphere,
    reconstruct,
    sample_mesh_surface,
    sample_synthetic,
    save_points,
    train,
)

__all__ = [
    "FieldModel",
    "SfreconError",
    "TrainingConfig",
    "assign_signs",
    "chamfer_distance",
    "evaluate_meshes",
    "export_mesh",
    "extract_mesh",
    "f_score",
    "farthest_point_sampling",
    "fit_sphere",
    "load_mesh",
    "load_points",
    "nearest_distances",
    "normal_consistency",
    "normalize_to_unit_sphere",
    "reconstruct",
    "sample_mesh_surface",
    "sample_synthetic",
    "save_points",
    "train",
]
