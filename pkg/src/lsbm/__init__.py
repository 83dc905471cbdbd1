"""Clustering in the labeled stochastic block model.

Modules: ``model`` (parameters, graphs, partitions), ``sampler``,
``divergence`` (the error-exponent quantity and its closed forms),
``spectral`` and ``refinement`` (the two stages of the clustering
algorithm), ``evaluation``, ``oracle`` (brute-force references) and ``cli``.
"""

from __future__ import annotations

from .divergence import divergence, dl_plus, error_floor
from .errors import LSBMError
from .model import LabelGraph, ModelParams, Partition, ScaledModelSpec, build_scaled_model, validate
from .refinement import EstimatedParams, estimate_params, improve_once, refine, spectral_partition
from .sampler import sample
from .spectral import SpectralConfig, spectral_stage

__version__ = "0.1.0"

__all__ = [
    "EstimatedParams",
    "LSBMError",
    "LabelGraph",
    "ModelParams",
    "Partition",
    "ScaledModelSpec",
    "SpectralConfig",
    "build_scaled_model",
    "divergence",
    "dl_plus",
    "error_floor",
    "estimate_params",
    "improve_once",
    "refine",
    "sample",
    "spectral_partition",
    "spectral_stage",
    "validate",
]
