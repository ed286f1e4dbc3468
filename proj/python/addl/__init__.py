"""Dual-layer image codec with learned content-adaptive downsampling."""

from ._addl import (
    Codec,
    FormatError,
    ModelMismatchError,
    __version__,
    bicubic_resize,
    decode_base,
    encode_base,
    gabor_kernel,
    init_weights,
    psnr,
    train_stage,
)

__all__ = [
    "Codec",
    "FormatError",
    "ModelMismatchError",
    "__version__",
    "bicubic_resize",
    "decode_base",
    "encode_base",
    "gabor_kernel",
    "init_weights",
    "psnr",
    "train_stage",
]
