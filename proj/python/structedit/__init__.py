"""Hierarchical shape edit toolkit: part-tree shapes, shape deltas, and a
conditional delta autoencoder, backed by the C++ core."""

try:
    from ._structedit import (
        Delta,
        Model,
        Shape,
        Taxonomy,
        apply_delta,
        build_neighborhoods,
        build_pairs,
        compute_delta,
        generate_dataset,
        geometric_distance,
        identity_delta,
        match_shapes,
        run_experiment,
        shape_distance,
        structural_distance,
        train_model,
    )
except ImportError:  # running against a plain CMake build dir
    from _structedit import (
        Delta,
        Model,
        Shape,
        Taxonomy,
        apply_delta,
        build_neighborhoods,
        build_pairs,
        compute_delta,
        generate_dataset,
        geometric_distance,
        identity_delta,
        match_shapes,
        run_experiment,
        shape_distance,
        structural_distance,
        train_model,
    )

__all__ = [
    "Delta",
    "Model",
    "Shape",
    "Taxonomy",
    "apply_delta",
    "build_neighborhoods",
    "build_pairs",
    "compute_delta",
    "generate_dataset",
    "geometric_distance",
    "identity_delta",
    "match_shapes",
    "run_experiment",
    "shape_distance",
    "structural_distance",
    "train_model",
]
