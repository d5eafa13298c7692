# SPDX-License-Identifier: Apache-2.0
"""BMCoGAN: coupled bidirectional-mapping GAN for generalized zero-shot learning.

Thin wrapper over the C++ core module. The heavy lifting (training,
synthesis, evaluation) happens in `bmcogan._core`.
"""

from bmcogan._core import (  # noqa: F401
    ArgumentError,
    Dataset,
    LoadError,
    NumericError,
    SchemaError,
    ShapeError,
    Trained,
    VersionError,
    __version__,
    harmonic_mean,
    load_checkpoint,
    load_dataset,
    make_toy_dataset,
    per_class_top1,
    train,
    transform_through_d,
)

__all__ = [
    "Dataset",
    "Trained",
    "harmonic_mean",
    "load_checkpoint",
    "load_dataset",
    "make_toy_dataset",
    "per_class_top1",
    "train",
    "transform_through_d",
    "__version__",
]
