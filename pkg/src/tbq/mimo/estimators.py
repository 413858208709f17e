"""Quantized channel estimators for the multi-cell uplink.

Besides the vector-quantizer bounds and the general hardware-limited design
(both inherited from the generic task formulas) this module provides two
systems whose analog combiner acts on the antenna dimension only:

* spatial combining ``Ã = U diag(a) V^H C^{-1/2}`` with ``P_T`` ADC pairs per
  pilot slot, ``γ² = 3M̃²/4`` and unit model noise;
* the digital-only baseline ``Ã = I`` with ``γ = 1``.

Both share the estimator ``B̃ = (D²Θ* ⊗ C Ã^H)(Σ_Y ⊗ Ã C Ã^H + σ_q² I)^{-1}``,
applied here in factored form.
"""
import json
import warnings
from dataclasses import dataclass

import numpy as np

from ..dither import ScalarQuantizer, kappa
from ..hardware import (
    QuantBudget,
    _cmat_from_list,
    _cmat_to_list,
    design_hl,
    equal_diag_rotation,
    hl_mse_finite,
    hl_mse_iid,
)
from ..linalg import clamp_eigs, eigh_desc, sqrtm_psd
from ..task import UnsupportedCase, mmse_avg, mse_opt_vec, mse_task_ignorant
from .network import b_phi_coeffs, mimo_task_model, output_covariance, pilot_matrix

__all__ = [
    "SpatialDesign",
    "mimo_mse_mmse",
    "mimo_mse_opt",
    "mimo_mse_ign",
    "mimo_hl",
    "solve_spatial_allocation",
    "spatial_objective",
    "spatial_design",
    "spatial_mse_iid",
    "spatial_mse_finite",
    "digital_only_design",
    "digital_only_mse",
]


def mimo_mse_mmse(net, l, scn):
    """Average MMSE ``(1/N_U) Σ_u (d²_u - φ²_u)`` without quantization."""
    _, phi = b_phi_coeffs(net, l, scn)
    return float(np.mean(net.d[l, l] ** 2 - phi**2))


def mimo_mse_opt(net, l, scn, R, n_spectrum=1024):
    """Optimal vector quantizer: ``μ^MMSE + (1/N_U) D_G(τR, Φ², S)``."""
    return mse_opt_vec(mimo_task_model(net, l, scn), R, n_spectrum)


def mimo_mse_ign(net, l, scn, R):
    """Task-ignorant vector quantizer (uncorrelated antennas only)."""
    if not scn.correlation.is_white:
        raise UnsupportedCase("task-ignorant MSE requires uncorrelated antennas")
    return mse_task_ignorant(mimo_task_model(net, l, scn), R)


def mimo_hl(net, l, scn, budget, materialize=True):
    """Hardware-limited design with general analog combining.

    Returns
    -------
    design : HLDesign or None
        Realized over ``scn.n_antennas`` antennas (``None`` when
        ``materialize`` is false).
    mse : float
        Asymptotic average MSE for uncorrelated antennas, the finite-``N``
        value otherwise.
    """
    task = mimo_task_model(net, l, scn)
    N = scn.n_antennas
    if scn.correlation.is_white:
        mse = hl_mse_iid(task, budget)
    else:
        mse = hl_mse_finite(task, budget, N)
    design = design_hl(task, budget, N) if materialize else None
    return design, mse


def _antenna_eigs(scn, N):
    if scn.correlation.is_white:
        return np.ones(N), np.eye(N)
    lam, V = eigh_desc(scn.correlation.toeplitz(N))
    return clamp_eigs(lam), V


def _user_terms(net, l, scn):
    """Per-user ``(τ d⁴, τ Σ_m d² + σ_W²)`` used by the spatial MSE."""
    tau = scn.n_pilots
    own = net.d[l, l]
    t = tau * np.sum(net.d[l] ** 2, axis=0) + scn.noise_power
    return tau * own**4, t


def _reduction(num_u, den_u, s, t, noise):
    """``Σ_u Σ_i num_u t_i / (den_u s_i + noise)``."""
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    den = np.multiply.outer(den_u, s) + noise
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(den > 0, np.multiply.outer(num_u, t) / den, 0.0)
    return float(np.sum(terms))


def spatial_objective(x, phi, b, lam_c, tau):
    """``Σ_i Σ_u τ φ⁴_u x_i λ_i / (τ φ²_u x_i + b²_u)``."""
    x = np.asarray(x, dtype=float)
    phi, b = np.asarray(phi, float), np.asarray(b, float)
    live = phi > 0
    p2, bb = phi[live] ** 2, b[live] ** 2
    num = tau * np.multiply.outer(x * np.asarray(lam_c, float), p2**2)
    den = tau * np.multiply.outer(x, p2) + bb
    return float(np.sum(num / den))


def solve_spatial_allocation(phi, b, lam_c, tau, levels, kappa_, sigma2, P_T):
    """Optimal squared gains ``a_i²`` of the spatial combiner.

    Maximizes :func:`spatial_objective` subject to
    ``(4κσ²/(3M̃² P_T)) Σ_i a_i² = 1`` and ``a_i² ≥ 0``.  The objective is
    concave in ``x = a²``; the KKT multiplier is found by bisection and each
    ``x_i`` by an inner bisection.

    Parameters
    ----------
    phi, b : array_like
        Per-user coefficients.
    lam_c : array_like
        The ``P_T`` largest eigenvalues of ``C``.
    tau : int
    levels : int
    kappa_ : float
    sigma2 : float
        Largest diagonal entry of ``Σ_Y``.
    P_T : int

    Returns
    -------
    ndarray
        Amplitudes ``a_i`` (nonnegative).
    """
    lam = np.asarray(lam_c, dtype=float)[:P_T]
    if lam.size != P_T:
        raise ValueError("need one eigenvalue per spatial quantizer")
    phi, b = np.asarray(phi, float), np.asarray(b, float)
    live = phi > 0
    X = 3.0 * float(levels) ** 2 * P_T / (4.0 * kappa_ * sigma2)
    if not np.any(live) or not np.any(lam > 0):
        warnings.warn("no user has signal energy; returning a zero allocation", stacklevel=2)
        return np.zeros(P_T)
    p2, bb = phi[live] ** 2, b[live] ** 2
    # gradient of mode i at x: λ_i Σ_u τ φ⁴ b² / (τ φ² x + b²)²
    g0 = lam * np.sum(tau * p2**2 / bb)
    pos = lam > 0
    sb = np.sum(bb)

    def x_of(nu):
        x = np.zeros(P_T)
        act = pos & (g0 > nu)
        if not np.any(act):
            return x
        la = lam[act][:, None]
        lo = np.zeros(la.shape[0])
        hi = np.sqrt(la[:, 0] * sb / (tau * nu))
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            g = np.sum(la * tau * p2**2 * bb / (tau * p2 * mid[:, None] + bb) ** 2, axis=1)
            big = g > nu
            lo = np.where(big, mid, lo)
            hi = np.where(big, hi, mid)
            if np.all(hi - lo <= 1e-15 * hi):
                break
        x[act] = 0.5 * (lo + hi)
        return x

    hi_l = np.log(g0.max())
    lo_l = hi_l - 10.0
    while np.sum(x_of(np.exp(lo_l))) < X:
        lo_l -= 2.0 * (hi_l - lo_l)
    for _ in range(200):
        mid = 0.5 * (lo_l + hi_l)
        if np.sum(x_of(np.exp(mid))) > X:
            lo_l = mid
        else:
            hi_l = mid
        if hi_l - lo_l < 1e-13:
            break
    x = x_of(np.exp(0.5 * (lo_l + hi_l)))
    x *= X / np.sum(x)
    return np.sqrt(x)


def spatial_mse_iid(net, l, scn, budget):
    """Closed-form spatial-combining MSE for uncorrelated antennas.

    ``μ^MMSE + (1/N_U) Σ_u (φ² - r φ⁴ / (φ² + (4κσ²/(3M̃²τ)) b²))``.
    """
    if not scn.correlation.is_white:
        raise UnsupportedCase("closed form needs uncorrelated antennas; use spatial_design")
    base = mimo_mse_mmse(net, l, scn)
    b, phi = b_phi_coeffs(net, l, scn)
    r = budget.ratio
    if r == 0:
        return base + float(np.mean(phi**2))
    sigma2 = float(np.max(np.real(np.diag(output_covariance(net, l, scn)))))
    c = 4.0 * budget.kappa * sigma2 / (3.0 * float(budget.levels) ** 2 * scn.n_pilots)
    den = phi**2 + c * b**2
    with np.errstate(invalid="ignore", divide="ignore"):
        kept = np.where(den > 0, r * phi**4 / den, 0.0)
    return base + float(np.mean(phi**2 - kept))


def _spatial_count(budget, N):
    x = budget.ratio * N
    P_T = int(round(x))
    if abs(x - P_T) > 1e-6 or P_T < 1:
        raise ValueError(f"r*N = {x:g} must be a positive integer number of spatial quantizers")
    if P_T > N:
        raise ValueError("cannot use more spatial quantizers than antennas")
    return P_T


def spatial_mse_finite(net, l, scn, budget, N=None):
    """Spatial-combining MSE with ``N`` antennas and the optimal allocation."""
    N = scn.n_antennas if N is None else N
    P_T = _spatial_count(budget, N)
    lam, _ = _antenna_eigs(scn, N)
    b, phi = b_phi_coeffs(net, l, scn)
    sigma2 = float(np.max(np.real(np.diag(output_covariance(net, l, scn)))))
    a = solve_spatial_allocation(phi, b, lam, scn.n_pilots, budget.levels, budget.kappa,
                                 sigma2, P_T)
    num, den = _user_terms(net, l, scn)
    x = a**2
    red = _reduction(num, den, x, x * lam[:P_T], 1.0)
    Nu = scn.n_users
    return mimo_mse_mmse(net, l, scn) + float(np.sum(phi**2)) / Nu - red / (N * Nu)


@dataclass(eq=False)
class SpatialDesign:
    """Antenna-domain combiner with dithered ADCs and the LMMSE back end.

    The quantizer input for pilot slot ``t`` is ``Ã y_t``; the channel
    estimate is ``B̃ q`` with ``B̃`` applied through eigen-factors of
    ``Σ_Y`` and ``Ã C Ã^H``.
    """

    combiner: np.ndarray
    allocation: np.ndarray
    support: float
    levels: int
    eta: float
    noise_var: float
    predicted_mse: float
    # factors of the digital matrix
    corr: np.ndarray
    cross: np.ndarray    # τ × N_U, equal to Θ^H D²
    uy: np.ndarray
    ly: np.ndarray
    us: np.ndarray
    ls: np.ndarray

    @property
    def n_quantizers(self):
        return self.combiner.shape[0]

    def quantizer(self):
        return ScalarQuantizer(self.support, self.levels, self.eta)

    def combine(self, Y):
        return self.combiner @ np.asarray(Y)

    def estimate(self, Q):
        W = self.us.conj().T @ Q @ self.uy.conj()
        W = W / (np.multiply.outer(self.ls, self.ly) + self.noise_var)
        W = self.us @ W @ self.uy.T
        return self.corr @ self.combiner.conj().T @ W @ self.cross

    def digital_matrix(self):
        """Dense ``B̃`` acting on ``vec`` of the ``P_T × τ`` ADC output."""
        Sy = (self.uy * self.ly) @ self.uy.conj().T
        S = (self.us * self.ls) @ self.us.conj().T
        left = np.kron(self.cross.T, self.corr @ self.combiner.conj().T)
        mid = np.kron(Sy, S) + self.noise_var * np.eye(S.shape[0] * Sy.shape[0])
        return np.linalg.solve(mid.T, left.T).T

    def to_dict(self):
        return {
            "support": self.support,
            "levels": self.levels,
            "eta": self.eta,
            "noise_var": self.noise_var,
            "predicted_mse": self.predicted_mse,
            "allocation": np.asarray(self.allocation).tolist(),
            "combiner": _cmat_to_list(self.combiner),
            "corr": _cmat_to_list(self.corr),
            "cross": _cmat_to_list(self.cross),
            "uy": _cmat_to_list(self.uy),
            "ly": np.asarray(self.ly).tolist(),
            "us": _cmat_to_list(self.us),
            "ls": np.asarray(self.ls).tolist(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        c = _cmat_from_list
        return cls(c(d["combiner"]), np.asarray(d["allocation"], float), float(d["support"]),
                   int(d["levels"]), float(d["eta"]), float(d["noise_var"]),
                   float(d["predicted_mse"]), c(d["corr"]), c(d["cross"]), c(d["uy"]),
                   np.asarray(d["ly"], float), c(d["us"]), np.asarray(d["ls"], float))


def _backend(net, l, scn, N):
    tau, Nu = scn.n_pilots, scn.n_users
    theta = pilot_matrix(tau, Nu)
    Sy = output_covariance(net, l, scn)
    ly, uy = np.linalg.eigh(Sy)
    cross = theta.conj().T * net.d[l, l] ** 2
    C = np.eye(N) if scn.correlation.is_white else scn.correlation.toeplitz(N)
    return C, cross, uy, ly, Sy


def spatial_design(net, l, scn, budget, P_T=None):
    """Realize the spatial-combining system for ``scn.n_antennas`` antennas."""
    N = scn.n_antennas
    if P_T is None:
        P_T = _spatial_count(budget, N)
    elif P_T > N:
        raise ValueError("cannot use more spatial quantizers than antennas")
    elif abs(P_T - budget.ratio * N) > 1e-6:
        raise ValueError("P_T must equal r*N for the given budget")
    lam, V = _antenna_eigs(scn, N)
    b, phi = b_phi_coeffs(net, l, scn)
    C, cross, uy, ly, Sy = _backend(net, l, scn, N)
    sigma2 = float(np.max(np.real(np.diag(Sy))))
    M, kap = budget.levels, budget.kappa
    a = solve_spatial_allocation(phi, b, lam, scn.n_pilots, M, kap, sigma2, P_T)
    lt = lam[:P_T]
    inv = np.zeros(P_T)
    inv[lt > 0] = 1.0 / np.sqrt(lt[lt > 0])
    U = equal_diag_rotation(a**2)
    comb = U @ ((a * inv)[:, None] * V[:, :P_T].conj().T)
    num, den = _user_terms(net, l, scn)
    x = a**2
    red = _reduction(num, den, x, x * lt, 1.0)
    pred = mimo_mse_mmse(net, l, scn) + float(np.sum(phi**2)) / scn.n_users \
        - red / (N * scn.n_users)
    gamma = np.sqrt(3.0) / 2.0 * M
    return SpatialDesign(comb, a, float(gamma), M, budget.eta, 1.0, float(pred),
                         C, cross, uy, ly, U, x)


def _digital_levels(R):
    M = int(np.floor(2.0 ** (R / 2.0) * (1 + 1e-12))) if R < 124 else 2**62
    if M < 2:
        raise ValueError(f"digital-only processing needs R >= 2 (one bit per real ADC), got {R}")
    return M


def digital_only_mse(net, l, scn, R, N=None):
    """MSE of the LMMSE estimator fed by one ADC pair per antenna, ``γ = 1``."""
    N = scn.n_antennas if N is None else N
    M = _digital_levels(R)
    noise = 4.0 / (3.0 * M**2)
    lam, _ = _antenna_eigs(scn, N)
    _, phi = b_phi_coeffs(net, l, scn)
    num, den = _user_terms(net, l, scn)
    red = _reduction(num, den, lam, lam**2, noise)
    Nu = scn.n_users
    return mimo_mse_mmse(net, l, scn) + float(np.sum(phi**2)) / Nu - red / (N * Nu)


def digital_only_design(net, l, scn, R, eta=2.0):
    """Realized digital-only system (``Ã = I``, ``γ = 1``) for simulation."""
    N = scn.n_antennas
    M = _digital_levels(R)
    noise = 4.0 / (3.0 * M**2)
    C, cross, uy, ly, _ = _backend(net, l, scn, N)
    lam, V = _antenna_eigs(scn, N)
    pred = digital_only_mse(net, l, scn, R, N)
    return SpatialDesign(np.eye(N, dtype=complex), np.ones(N), 1.0, M, eta, noise,
                         float(pred), C, cross, uy, ly, V.astype(complex), lam)
