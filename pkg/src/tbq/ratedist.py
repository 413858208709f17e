"""Distortion-rate function of proper-complex Gaussian vector sources.

Rates are in bits per source *vector* sample; distortions are summed over the
vector entries.  The scalar power spectral density is handed over as samples
on a frequency grid together with quadrature weights approximating
``(1/2π)∫(·)dω``.  With no weights a uniform periodic grid is assumed, for
which the trapezoidal rule reduces to a plain mean.
"""
from dataclasses import dataclass

import numpy as np

from .linalg import eigh_desc

__all__ = [
    "GaussianSourceSpec",
    "reverse_waterfill",
    "gaussian_dr",
    "optimal_marginal_cov",
]

_MAX_ITER = 200
_EIG_RTOL = 1e-14


def _weights(psd, weights):
    psd = np.atleast_1d(np.asarray(psd, dtype=float))
    if weights is None:
        weights = np.full(psd.shape, 1.0 / psd.size)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != psd.shape:
            raise ValueError("psd and weights must have the same shape")
    if np.any(psd < 0) or np.any(weights < 0):
        raise ValueError("psd samples and weights must be nonnegative")
    return psd, weights


def _rate(logv, w, logz):
    return np.sum(w * np.maximum(logv - logz, 0.0))


def reverse_waterfill(eigs, psd=(1.0,), R=0.0, weights=None):
    """Solve the reverse waterfilling problem.

    Finds ``ζ`` with ``R = Σ_k w_k Σ_i (log2(λ_i S_k / ζ))⁺`` and returns the
    resulting distortion ``D = Σ_k w_k Σ_i min(ζ, λ_i S_k)``.

    Parameters
    ----------
    eigs : array_like
        Nonnegative eigenvalues λ_i of the source covariance.
    psd : array_like
        Nonnegative PSD samples S_k.  Defaults to a flat spectrum.
    R : float
        Rate in bits per vector sample.
    weights : array_like, optional
        Quadrature weights for ``psd``; uniform when omitted.

    Returns
    -------
    zeta : float
        Water level, ``nan`` when the spectrum is identically zero.
    D : float
        Distortion.
    """
    if R < 0 or not np.isfinite(R):
        raise ValueError(f"rate must be a finite nonnegative number, got {R}")
    eigs = np.asarray(eigs, dtype=float).ravel()
    if np.any(eigs < 0):
        raise ValueError("eigenvalues must be nonnegative")
    psd, w = _weights(psd, weights)

    v = np.multiply.outer(eigs, psd).ravel()
    wv = np.broadcast_to(w, (eigs.size, psd.size)).ravel()
    keep = (v > 0) & (wv > 0)
    if not np.any(keep):
        return np.nan, 0.0
    v, wv = v[keep], wv[keep]
    total = float(np.sum(wv * v))
    vmax = float(v.max())
    if R == 0:
        return vmax, total

    logv = np.log2(v)
    # the rate is strictly decreasing in log ζ on (-inf, log vmax]
    hi = np.log2(vmax)
    lo = hi - R / wv.sum() - 1.0
    while _rate(logv, wv, lo) < R:
        lo -= 2.0 * (hi - lo)
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if _rate(logv, wv, mid) > R:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(hi)):
            break
    logz = 0.5 * (lo + hi)
    # polish: within a fixed active set the rate is affine in log ζ
    act = logv > logz
    if np.any(act):
        cand = (np.sum(wv[act] * logv[act]) - R) / np.sum(wv[act])
        if abs(_rate(logv, wv, cand) - R) <= abs(_rate(logv, wv, logz) - R):
            logz = cand
    resid = abs(_rate(logv, wv, logz) - R)
    if resid > 1e-9 * max(1.0, R):
        raise RuntimeError(f"reverse waterfilling did not converge (residual {resid:.3g})")
    zeta = 2.0**logz
    D = float(np.sum(wv * np.minimum(zeta, v)))
    return zeta, D


@dataclass(frozen=True)
class GaussianSourceSpec:
    """Stationary Gaussian vector source ``Σ`` with scalar PSD ``S``.

    ``psd`` and ``weights`` describe the spectrum through quadrature nodes; the
    default is the i.i.d. (flat) case.
    """

    covariance: np.ndarray
    psd: np.ndarray = (1.0,)
    weights: np.ndarray = None

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=complex))
        if cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be square")
        scale = max(np.linalg.norm(cov), 1e-300)
        if np.linalg.norm(cov - cov.conj().T) > 1e-10 * scale:
            raise ValueError("covariance must be Hermitian")
        object.__setattr__(self, "covariance", cov)
        psd, w = _weights(self.psd, self.weights)
        object.__setattr__(self, "psd", psd)
        object.__setattr__(self, "weights", w)

    def eigvals(self):
        lam, _ = eigh_desc(self.covariance)
        if lam.size and lam[-1] < -1e-10 * max(lam[0], 0.0):
            raise ValueError("covariance is not positive semidefinite")
        thr = _EIG_RTOL * max(lam[0], 0.0) if lam.size else 0.0
        return np.where(lam > thr, lam, 0.0)


def gaussian_dr(R, src):
    """Distortion-rate function ``D_G(R, Σ, S)`` of ``src``."""
    return reverse_waterfill(src.eigvals(), src.psd, R, weights=src.weights)[1]


def optimal_marginal_cov(R, cov):
    """Covariance ``U diag((λ_i - ζ)⁺) U^H`` of the optimal reconstruction.

    Valid for sources that are i.i.d. in time (flat PSD).
    """
    lam, U = eigh_desc(np.atleast_2d(np.asarray(cov, dtype=complex)))
    thr = _EIG_RTOL * max(lam[0], 0.0)
    lam = np.where(lam > thr, lam, 0.0)
    zeta, _ = reverse_waterfill(lam, (1.0,), R)
    if np.isnan(zeta):
        return np.zeros_like(U)
    keep = np.maximum(lam - zeta, 0.0)
    return (U * keep) @ U.conj().T
