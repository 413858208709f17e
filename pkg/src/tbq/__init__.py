"""Task-based quantization with hardware-limited scalar ADCs.

The package is organised bottom-up:

``dither``      dithered uniform scalar quantizer and its noise model
``ratedist``    Gaussian distortion-rate function (reverse waterfilling)
``correlation`` sample correlation sequences and their spectra
``task``        task model, MMSE and vector-quantizer bounds
``hardware``    hardware-limited design (combiner, support, digital matrix)
``mimo``        massive-MIMO channel estimation model and estimators
``sim``         Monte-Carlo harness, sweeps and the ``tbq`` command line
"""
from .correlation import CorrelationModel, jakes_correlation
from .dither import ScalarQuantizer, kappa, noise_model_variance, quantize_complex_seq, uniform_level
from .hardware import (
    HLDesign,
    QuantBudget,
    design_hl,
    equal_diag_rotation,
    hl_mse_correlated,
    hl_mse_finite,
    hl_mse_iid,
    hl_waterfill,
    max_useful_pq,
)
from .ratedist import GaussianSourceSpec, gaussian_dr, optimal_marginal_cov, reverse_waterfill
from .task import TaskModel, UnsupportedCase, mmse_avg, mse_opt_vec, mse_task_ignorant

__version__ = "0.1.0"
