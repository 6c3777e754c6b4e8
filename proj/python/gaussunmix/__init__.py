"""Guided encoder-decoder hyperspectral unmixing.

Thin python surface over the C++ core: cube I/O, the simulated-scene
generator, k-means pseudo-ground truths, the three-network model with its
training strategies, and the evaluation metrics.
"""

from ._core import (
    DataError,
    GaussModel,
    HsiCube,
    KMeansResult,
    NumericError,
    SynthConfig,
    build_model,
    build_neighborhood_matrix,
    cube_from_matrix,
    evaluate,
    generate_abundances,
    kmeans,
    load_cube,
    load_external_pgt,
    load_model,
    loss_ce,
    loss_mse,
    loss_psid,
    loss_smooth,
    mix_lmm,
    one_hot_pseudo_gt,
    resample_spectrum,
    save_cube,
    softmax,
    train_blind,
    train_gauss,
    train_gauss_extended,
    train_prime,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "GaussModel",
    "HsiCube",
    "KMeansResult",
    "NumericError",
    "SynthConfig",
    "build_model",
    "build_neighborhood_matrix",
    "cube_from_matrix",
    "evaluate",
    "generate_abundances",
    "kmeans",
    "load_cube",
    "load_external_pgt",
    "load_model",
    "loss_ce",
    "loss_mse",
    "loss_psid",
    "loss_smooth",
    "mix_lmm",
    "one_hot_pseudo_gt",
    "resample_spectrum",
    "save_cube",
    "softmax",
    "train_blind",
    "train_gauss",
    "train_gauss_extended",
    "train_prime",
]
