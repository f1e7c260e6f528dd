"""Spherical-harmonic Siren location encoders."""

from ._core import (
    DomainError,
    Encoder,
    Error,
    FormatError,
    IoError,
    NumericalError,
    ShapeError,
    __version__,
    angular_distance,
    clip_loss,
    generate_world,
    pca,
    pretrain,
    r2,
    sh_basis,
    similarity_map,
)

__all__ = [
    "DomainError",
    "Encoder",
    "Error",
    "FormatError",
    "IoError",
    "NumericalError",
    "ShapeError",
    "__version__",
    "angular_distance",
    "clip_loss",
    "generate_world",
    "pca",
    "pretrain",
    "r2",
    "sh_basis",
    "similarity_map",
]
