"""Spectral state-space operator for 2D feature maps.

A learnable convection-diffusion-reaction evolution applied as a global
convolution through its Fourier-domain symbol, with independent brute-force
oracles, analytic gradients, a residual block assembly with flow-matching
helpers, and a wall-clock scaling benchmark against naive self-attention.
"""

from .bench import BenchRecord, attention_forward, fit_scaling_exponent, run_bench
from .block import (
    BlockParams,
    PatchConfig,
    dit_block_forward,
    fm_denoise,
    fm_interpolate,
    fm_loss,
    make_dit_block,
    make_stack,
    patchify,
    stack_forward,
    unpatchify,
)
from .estimator import SpectralOperatorRegressor
from .exceptions import ConfigError, NumericError
from .grad import ParamGrads, fit_operator, pde_ssm_backward
from .grid import FrequencyGrid, hermitian_symmetry_check, make_frequency_grid
from .linalg import mat_exp, mat_exp_frechet, spectral_abscissa
from .operator import (
    ABLATION_PRESETS,
    EmbedParams,
    PdeParams,
    Ssm1dParams,
    embed_symbol,
    evolution_symbol,
    green_symbol,
    init_fit_params,
    kernel_image,
    pde_ssm_forward,
    ssm1d_apply,
    ssm1d_green,
)
from .oracle import (
    finite_diff_grad,
    rk4_evolve_spectrum,
    rk4_ssm1d,
    spatial_circular_conv,
)
from .spectral import dft2, idft2, project_real

__version__ = "0.1.0"

__all__ = [
    "ABLATION_PRESETS",
    "BenchRecord",
    "BlockParams",
    "ConfigError",
    "EmbedParams",
    "FrequencyGrid",
    "NumericError",
    "ParamGrads",
    "PatchConfig",
    "PdeParams",
    "SpectralOperatorRegressor",
    "Ssm1dParams",
    "attention_forward",
    "dft2",
    "dit_block_forward",
    "embed_symbol",
    "evolution_symbol",
    "finite_diff_grad",
    "fit_operator",
    "fit_scaling_exponent",
    "fm_denoise",
    "fm_interpolate",
    "fm_loss",
    "green_symbol",
    "hermitian_symmetry_check",
    "idft2",
    "init_fit_params",
    "kernel_image",
    "make_dit_block",
    "make_frequency_grid",
    "make_stack",
    "mat_exp",
    "mat_exp_frechet",
    "patchify",
    "pde_ssm_backward",
    "pde_ssm_forward",
    "project_real",
    "rk4_evolve_spectrum",
    "rk4_ssm1d",
    "run_bench",
    "spatial_circular_conv",
    "spectral_abscissa",
    "ssm1d_apply",
    "ssm1d_green",
    "stack_forward",
    "unpatchify",
]
