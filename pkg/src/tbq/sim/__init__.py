"""Monte-Carlo harness, experiment configuration and sweeps."""
from .config import AXES, ESTIMATORS, SIMULABLE, ConfigError, ExperimentConfig, default_grid
from .montecarlo import MCResult, MMSEEstimator, chunk_seed, ci_half_width, monte_carlo_mse
from .sweep import HEADER, SweepResult, SweepRow, point_settings, run_sweep
