"""Block transforms (DCT, KLT, one-/multi-stage Saab) and their energy compaction."""

from .analysis import (
    CompactionCurve,
    EnergyReport,
    Ordering,
    compare_report,
    cumulative_ac_curve,
    energy_table,
    order_coeffs,
)
from .io import load_blocks, load_kernel, save_blocks, save_kernel, save_pgm
from .linalg import CovarianceAccumulator, EigDecomposition, eig_sym, frobenius_diff
from .residuals import Mode, Plane, ResidualBlockSet, extract_residuals, intra_predict, load_plane, synth_ar1
from .training import ConvergenceParams, ConvergenceTrace, FitReport, convergence_monitor, fit_pipeline
from .transforms import (
    AffineOrthoKernel,
    KltKernel,
    bias_select,
    coefficients_biasfree,
    dct_kernel,
    forward,
    inverse,
    klt_coefficients,
    klt_fit,
    klt_kernel,
    orthonormality_error,
    saab_fit_multistage,
    saab_fit_stage,
)
from .viz import GrayImage, basis_grid, basis_image

__version__ = "0.1.0"
