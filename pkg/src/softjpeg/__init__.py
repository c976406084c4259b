"""JPEG soft decoding with Laplacian, sparse-dictionary and graph smoothness priors."""

from .jpeg_codec import (QuantizedImage, QuantTable, encode_jpeg, hard_decode, parse_jpeg, quantize_image,
                         read_jpeg, read_pgm, write_jpeg, write_pgm)
from .laplacian_prior import LaplacianParams, fit_laplacian, mmse_coefficient, mmse_decode
from .metrics import psnr, ssim
from .soft_decoder import SolverConfig, SolverReport, soft_decode
from .sparse_dict import Dictionary, ksvd_train, load_dict, omp, save_dict

__version__ = "0.1.0"

__all__ = [
    "Dictionary", "LaplacianParams", "QuantTable", "QuantizedImage", "SolverConfig", "SolverReport",
    "encode_jpeg", "fit_laplacian", "hard_decode", "ksvd_train", "load_dict", "mmse_coefficient",
    "mmse_decode", "omp", "parse_jpeg", "psnr", "quantize_image", "read_jpeg", "read_pgm", "save_dict",
    "soft_decode", "ssim", "write_jpeg", "write_pgm",
]
