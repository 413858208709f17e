"""Small Hermitian linear-algebra helpers."""
import numpy as np


def eigh_desc(M):
    """Hermitian eigendecomposition with eigenvalues in descending order."""
    lam, U = np.linalg.eigh(M)
    return lam[::-1], U[:, ::-1]


def clamp_eigs(lam, rtol=1e-12):
    """Zero out negative and numerically negligible eigenvalues."""
    top = max(float(np.max(lam)), 0.0) if lam.size else 0.0
    return np.where(lam > rtol * top, lam, 0.0)


def sqrtm_psd(M):
    """Hermitian square root with eigenvalues clamped at zero."""
    lam, U = np.linalg.eigh(M)
    lam = np.sqrt(clamp_eigs(lam, 0.0))
    return (U * lam) @ U.conj().T


def inv_sqrtm_psd(M, rtol=1e-12):
    """Pseudo-inverse square root; returns ``(M^{-1/2}, rank)``."""
    lam, U = np.linalg.eigh(M)
    lam = clamp_eigs(lam, rtol)
    pos = lam > 0
    inv = np.zeros_like(lam)
    inv[pos] = 1.0 / np.sqrt(lam[pos])
    return (U * inv) @ U.conj().T, int(pos.sum())


def vec(X):
    """Column-stacking vectorization (last two axes), batch-aware."""
    X = np.asarray(X)
    return np.swapaxes(X, -1, -2).reshape(X.shape[:-2] + (-1,))


def unvec(v, rows):
    """Inverse of :func:`vec` for matrices with ``rows`` rows."""
    v = np.asarray(v)
    cols = v.shape[-1] // rows
    return np.swapaxes(v.reshape(v.shape[:-1] + (cols, rows)), -1, -2)
