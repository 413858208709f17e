"""Task model and the quantizer-free / vector-quantizer MSE formulas.

A task is the jointly Gaussian pair ``(g_i, y_i)`` where the desired
``K × 1`` vectors ``g_i`` are recovered from ``L × 1`` observations ``y_i``.
The MMSE estimate is linear, ``g̃_i = Γ y_i``.  Samples are correlated in
time through a scalar correlation sequence shared by all entries, so that
``Cov(vec y) = Σ_y ⊗ C``.

Rates ``R`` are bits per observation entry.  Total bits per vector sample are
``L R``.
"""
from dataclasses import dataclass, field

import numpy as np

from .correlation import CorrelationModel
from .linalg import clamp_eigs, eigh_desc, sqrtm_psd
from .ratedist import optimal_marginal_cov, reverse_waterfill

__all__ = [
    "TaskModel",
    "UnsupportedCase",
    "mmse_avg",
    "mse_opt_vec",
    "mse_task_ignorant",
    "random_task",
]


class UnsupportedCase(ValueError):
    """Raised when a closed form is requested outside its validity domain."""


def _herm(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got {M.shape}")
    scale = max(np.linalg.norm(M), 1e-300)
    if np.linalg.norm(M - M.conj().T) > 1e-9 * scale:
        raise ValueError(f"{name} must be Hermitian")
    return 0.5 * (M + M.conj().T)


@dataclass(frozen=True, eq=False)
class TaskModel:
    """Linear-Gaussian recovery task ``(Γ, Σ_y, Σ_g, correlation)``.

    Parameters
    ----------
    gamma : ndarray, shape (K, L)
        LMMSE matrix.
    cov_y : ndarray, shape (L, L)
        Per-sample observation covariance.
    cov_g : ndarray, shape (K, K)
        Per-sample desired-signal covariance.
    correlation : CorrelationModel
    """

    gamma: np.ndarray
    cov_y: np.ndarray
    cov_g: np.ndarray
    correlation: CorrelationModel = field(default_factory=CorrelationModel)

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.gamma, dtype=complex))
        Sy = _herm(self.cov_y, "cov_y")
        Sg = _herm(self.cov_g, "cov_g")
        K, L = G.shape
        if L < K:
            raise ValueError(f"observation size L={L} must be at least K={K}")
        if Sy.shape != (L, L) or Sg.shape != (K, K):
            raise ValueError("covariance shapes do not match gamma")
        for M in (G, Sy, Sg):
            M.setflags(write=False)
        object.__setattr__(self, "gamma", G)
        object.__setattr__(self, "cov_y", Sy)
        object.__setattr__(self, "cov_g", Sg)
        err = np.linalg.eigvalsh(self.error_cov)
        scale = max(np.abs(np.linalg.eigvalsh(Sg)).max(), 1e-300)
        if err.min() < -1e-9 * scale:
            raise ValueError(
                "cov_g - Γ cov_y Γ^H is not positive semidefinite "
                f"(min eigenvalue {err.min():.3g})"
            )

    @property
    def K(self):
        return self.gamma.shape[0]

    @property
    def L(self):
        return self.gamma.shape[1]

    @property
    def estimate_cov(self):
        """Covariance ``Γ Σ_y Γ^H`` of the MMSE estimate."""
        return self.gamma @ self.cov_y @ self.gamma.conj().T

    @property
    def error_cov(self):
        return self.cov_g - self.estimate_cov

    def gamma_tilde(self):
        """``Γ̃ = Γ Σ_y^{1/2}``."""
        return self.gamma @ sqrtm_psd(self.cov_y)

    def singular_values(self):
        """Singular values ``φ_1 ≥ ... ≥ φ_K`` of ``Γ̃``."""
        lam, _ = eigh_desc(self.estimate_cov)
        return np.sqrt(clamp_eigs(lam))


def mmse_avg(task):
    """Average MMSE ``(1/K) tr(Σ_g - Γ Σ_y Γ^H)`` without quantization."""
    return max(float(np.real(np.trace(task.error_cov))) / task.K, 0.0)


def mse_opt_vec(task, R, n_spectrum=1024):
    """Average MSE of the optimal vector quantizer at rate ``R``.

    The MMSE estimate ``g̃`` is compressed with ``L R`` bits per vector
    sample (``(L/K) R`` bits per entry), so the excess over the MMSE is
    ``(1/K) D_G(L R, Γ Σ_y Γ^H, S)``.
    """
    if R < 0:
        raise ValueError("rate must be nonnegative")
    lam = task.singular_values() ** 2
    psd, w = task.correlation.spectrum(n_spectrum)
    if not np.isfinite(R):
        return mmse_avg(task)
    _, D = reverse_waterfill(lam, psd, task.L * R, weights=w)
    return mmse_avg(task) + D / task.K


def mse_task_ignorant(task, R):
    """Average MSE when ``y`` is vector-quantized without regard to the task.

    Only the i.i.d. case has a closed form; correlated tasks raise
    :class:`UnsupportedCase`.
    """
    if not task.correlation.is_white:
        raise UnsupportedCase(
            "task-ignorant MSE is only available for uncorrelated samples"
        )
    if R < 0:
        raise ValueError("rate must be nonnegative")
    if not np.isfinite(R):
        return mmse_avg(task)
    lost = task.cov_y - optimal_marginal_cov(task.L * R, task.cov_y)
    GhG = task.gamma.conj().T @ task.gamma
    return mmse_avg(task) + float(np.real(np.trace(GhG @ lost))) / task.K


def random_task(rng, K, L, correlation=None, residual=0.1):
    """Draw a valid random task.

    ``Σ_y`` is a random positive definite matrix, ``Γ`` has i.i.d.
    complex-Gaussian entries scaled by ``1/sqrt(L)`` and
    ``Σ_g = Γ Σ_y Γ^H + residual · W W^H / K`` with ``W`` complex Gaussian.
    """
    def cgauss(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    X = cgauss(L, 2 * L)
    cov_y = X @ X.conj().T / (2 * L) + 0.05 * np.eye(L)
    gamma = cgauss(K, L) / np.sqrt(L)
    W = cgauss(K, K)
    cov_g = gamma @ cov_y @ gamma.conj().T + residual * W @ W.conj().T / K
    return TaskModel(gamma, cov_y, cov_g, correlation or CorrelationModel())
