"""Hyperparameter tuning for spectral-mixture kernel ridge regression from few samples."""
from .discretize import GridConfig, distortion_constant, round_spec, sm_grid
from .kernel import GaussianComponent, KernelSpec, RkhsSignal, kernel_eval, kernel_matrix, pdf_eval
from .leverage import pairwise_scores, ridge_leverage, sample_rescale, spectral_check
from .regression import Interpolant, krr_fit, select_kernel
from .sampling import SampleDesign, UniversalDensity, draw_design
from .statdim import alpha_for, sample_budget, statdim_operator

__version__ = "0.1.0"

__all__ = [
    "GridConfig", "distortion_constant", "round_spec", "sm_grid",
    "GaussianComponent", "KernelSpec", "RkhsSignal", "kernel_eval", "kernel_matrix", "pdf_eval",
    "pairwise_scores", "ridge_leverage", "sample_rescale", "spectral_check",
    "Interpolant", "krr_fit", "select_kernel",
    "SampleDesign", "UniversalDensity", "draw_design",
    "alpha_for", "sample_budget", "statdim_operator",
]
