"""Hardware-limited task-based quantizer: analog combiner, identical
dithered scalar ADCs and a linear digital estimator.

The combiner whitens the observations, projects them onto the strongest
modes of ``Γ̃ ⊗ C^{1/2}`` with waterfilled gains and is rotated so every ADC
sees the same input power ``1/r``.  The ADC support then follows as
``γ² = κ/r`` and the quantization error is modeled as white noise with
variance ``4γ²/(3M²)``.
"""
import json
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dither import ScalarQuantizer, kappa
from .linalg import clamp_eigs, eigh_desc, inv_sqrtm_psd, sqrtm_psd
from .task import UnsupportedCase, mmse_avg

__all__ = [
    "QuantBudget",
    "HLDesign",
    "hl_waterfill",
    "equal_diag_rotation",
    "design_hl",
    "hl_mse_iid",
    "hl_mse_finite",
    "hl_mse_correlated",
    "max_useful_pq",
    "mode_gains",
]

DENSE_LIMIT = 16384
_EPS = 1e-9


def varphi(x):
    return np.maximum(np.asarray(x, dtype=float) - 1.0, 0.0)


@dataclass(frozen=True)
class QuantBudget:
    """Rate and hardware budget.

    Parameters
    ----------
    rate : float
        Bits per complex input sample, ``R``.
    ratio : float
        Analog combining ratio ``r`` (quantizers per complex input sample).
        ``0`` means nothing is quantized.
    eta : float
        Support factor.
    """

    rate: float
    ratio: float
    eta: float = 2.0

    def __post_init__(self):
        if not (self.rate >= 0 and np.isfinite(self.rate)):
            raise ValueError(f"rate must be finite and nonnegative, got {self.rate}")
        if not 0 <= self.ratio <= 1:
            raise ValueError(f"combining ratio must lie in [0, 1], got {self.ratio}")
        if self.ratio > 0:
            if self.levels < 2:
                raise ValueError(
                    f"rate {self.rate} with ratio {self.ratio} gives fewer than 2 levels "
                    "(need ratio <= rate/2)"
                )
            kappa(self.eta, self.levels)

    @property
    def levels(self):
        """``M̃ = floor(2^{R/(2r)})``; ``inf`` for an unconstrained budget."""
        if self.ratio == 0:
            return np.inf
        x = self.rate / (2.0 * self.ratio)
        if x >= 62:
            return 2**62
        return int(np.floor(2.0**x * (1 + 1e-12)))

    @property
    def kappa(self):
        return kappa(self.eta, self.levels)

    @property
    def support_sq(self):
        """``γ² = κ/r``."""
        return self.kappa / self.ratio

    @property
    def noise_var(self):
        """Model variance ``4γ²/(3M̃²)`` of each quantizer's error."""
        return 4.0 * self.support_sq / (3.0 * float(self.levels) ** 2)

    def quantizer(self):
        return ScalarQuantizer(np.sqrt(self.support_sq), self.levels, self.eta)

    def split(self, L, n=1):
        """Return ``(P, P_q, P_r)`` for ``n`` samples of dimension ``L``."""
        x = self.ratio * n * L
        P = int(round(x))
        if abs(x - P) > 1e-6:
            raise ValueError(f"r*n*L = {x:g} is not an integer quantizer count")
        P_q = int(np.floor(self.ratio * L + _EPS))
        return P, P_q, P - P_q * n


def hl_waterfill(sv, levels, kappa_, ratio=1.0, weights=None, n_quantizers=None):
    """Waterfill the combiner gains over singular values ``sv``.

    Solves ``(4κ/(3M̃² P)) Σ_l w_l φ(ζ sv_l) = 1`` with ``φ(α) = (α - 1)⁺``
    and returns ``Λ²_l = (4κ/(3M̃² r)) φ(ζ sv_l)``.

    Parameters
    ----------
    sv : array_like
        Nonnegative singular values (one per quantizer by default).
    levels : int
        Quantizer levels ``M̃``.
    kappa_ : float
    ratio : float
        Combining ratio ``r``; only scales ``Λ²``.
    weights : array_like, optional
        Multiplicity of each entry of ``sv`` (defaults to ones).
    n_quantizers : float, optional
        ``P`` in the normalization; defaults to ``len(sv)``.

    Returns
    -------
    zeta : float
    lam2 : ndarray
    """
    sv = np.asarray(sv, dtype=float)
    w = np.ones_like(sv) if weights is None else np.asarray(weights, dtype=float)
    P = sv.size if n_quantizers is None else float(n_quantizers)
    if np.any(sv < 0) or np.any(w < 0):
        raise ValueError("singular values and weights must be nonnegative")
    live = (sv > 0) & (w > 0)
    if not np.any(live):
        raise ValueError("hl_waterfill needs at least one positive singular value")
    c = 4.0 * kappa_ / (3.0 * float(levels) ** 2 * P)

    def excess(z):
        return c * np.sum(w * varphi(z * sv)) - 1.0

    s, ws = sv[live], w[live]
    hi = (1.0 + 1.0 / (c * ws.max())) / s.max()
    lo = 1.0 / s.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    zeta = 0.5 * (lo + hi)
    # exact root for the active set at the bisection point
    act = live & (zeta * sv > 1.0)
    cand = (1.0 / c + np.sum(w[act])) / np.sum(w[act] * sv[act])
    if abs(excess(cand)) <= abs(excess(zeta)):
        zeta = cand
    lam2 = 4.0 * kappa_ / (3.0 * float(levels) ** 2 * ratio) * varphi(zeta * sv)
    return zeta, lam2


def equal_diag_rotation(d):
    """Unitary ``U`` such that ``U diag(d) U^H`` has a constant diagonal.

    Repeatedly rotates the largest and smallest unfinished diagonal entries
    in their 2-D plane so one of them lands on the mean.  At most ``P - 1``
    real Givens rotations are applied.
    """
    d = np.array(d, dtype=float).ravel()
    P = d.size
    U = np.eye(P)
    if P <= 1:
        return U
    m = d.mean()
    tol = 1e-15 * max(np.abs(d).max(), 1e-300)
    open_ = np.abs(d - m) > tol
    while np.count_nonzero(open_) >= 2:
        idx = np.flatnonzero(open_)
        i = idx[np.argmax(d[idx])]
        j = idx[np.argmin(d[idx])]
        span = d[i] - d[j]
        if d[i] - m >= m - d[j]:
            # finish j: s² d_i + c² d_j = m
            s2 = (m - d[j]) / span
            done, other = j, i
        else:
            # finish i: c² d_i + s² d_j = m
            s2 = (d[i] - m) / span
            done, other = i, j
        s2 = min(max(s2, 0.0), 1.0)
        c, s = np.sqrt(1.0 - s2), np.sqrt(s2)
        ui, uj = U[i].copy(), U[j].copy()
        U[i] = c * ui + s * uj
        U[j] = -s * ui + c * uj
        di, dj = d[i], d[j]
        d[i] = c * c * di + s * s * dj
        d[j] = s * s * di + c * c * dj
        d[done] = m
        open_[done] = False
        if abs(d[other] - m) <= tol:
            open_[other] = False
    return U


def max_useful_pq(task):
    """Largest useful number of quantizers per sample, ``rank(Γ̃ Σ_y Γ̃^H)``."""
    Gt = task.gamma_tilde()
    M = Gt @ task.cov_y @ Gt.conj().T
    lam = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    if lam.size == 0 or lam.max() <= 0:
        return 0
    return int(np.count_nonzero(lam > 1e-12 * lam.max()))


def mode_gains(task, n):
    """Gains ``φ_i sqrt(λ_{C,k})`` of all ``(i, k)`` modes, strongest first.

    Returns
    -------
    gains : ndarray, length ``L n``
    order : ndarray of int
        Kronecker index ``i n + k`` of each entry of ``gains``.
    """
    phi = np.zeros(task.L)
    phi[: task.K] = task.singular_values()
    if task.correlation.is_white:
        lam_c = np.ones(n)
    else:
        lam_c = clamp_eigs(np.linalg.eigvalsh(task.correlation.toeplitz(n))[::-1])
    g = np.multiply.outer(phi, np.sqrt(lam_c)).ravel()
    order = np.argsort(-g, kind="stable")
    return g[order], order


class CorrelatedMSE(NamedTuple):
    finite: float
    integral: float


def _iid_weights(K, rL):
    i = np.arange(K)
    return np.clip(rL - i, 0.0, 1.0)


def hl_mse_iid(task, budget):
    """Asymptotic average MSE of the hardware-limited design, i.i.d. samples.

    Mode ``i`` receives ``w_i = clip(rL - (i-1), 0, 1)`` quantizers per sample,
    which covers the fractional remainder term when ``rL`` is not integer.
    """
    if not task.correlation.is_white:
        raise UnsupportedCase("hl_mse_iid requires uncorrelated samples")
    phi = task.singular_values()
    base = mmse_avg(task)
    rL = budget.ratio * task.L
    w = _iid_weights(task.K, rL)
    if rL == 0 or not np.any((phi > 0) & (w > 0)):
        return base + float(np.sum(phi**2)) / task.K
    zeta, _ = hl_waterfill(phi, budget.levels, budget.kappa, weights=w, n_quantizers=rL)
    v = varphi(zeta * phi)
    return base + float(np.sum(phi**2 * (1.0 - w * v / (v + 1.0)))) / task.K


def _finite_excess(gains, P, budget):
    total = float(np.sum(gains**2))
    top = gains[:P]
    if P == 0 or not np.any(top > 0):
        return total
    zeta, _ = hl_waterfill(top, budget.levels, budget.kappa)
    v = varphi(zeta * top)
    return total - float(np.sum(top**2 * v / (v + 1.0)))


def hl_mse_finite(task, budget, n):
    """Average MSE of the hardware-limited design materialized over ``n`` samples.

    Uses the ``P = r n L`` strongest modes of ``Γ̃ ⊗ C_n^{1/2}``; valid for
    any quantizer count.
    """
    P = budget.split(task.L, n)[0] if budget.ratio > 0 else 0
    gains, _ = mode_gains(task, n)
    return mmse_avg(task) + _finite_excess(gains, P, budget) / (n * task.K)


def hl_mse_correlated(task, budget, n, n_spectrum=2048):
    """Average MSE with temporally correlated samples.

    Returns both the finite-``n`` value, computed from the eigenvalues of
    ``C_n``, and the ``n → ∞`` spectral integral.  Requires at least
    ``rank(Γ Σ_y Γ^H)`` quantizers per sample.
    """
    phi = task.singular_values()
    rank = int(np.count_nonzero(phi > 1e-12 * max(phi.max(), 1e-300)))
    P_q = int(np.floor(budget.ratio * task.L + _EPS))
    if P_q < rank:
        raise UnsupportedCase(
            f"closed form needs P_q >= rank = {rank} (got {P_q}); "
            "use hl_mse_finite or Monte-Carlo simulation"
        )
    finite = hl_mse_finite(task, budget, n)
    base = mmse_avg(task)
    s, ws = task.correlation.spectrum(n_spectrum)
    g = np.multiply.outer(phi[:rank], np.sqrt(s)).ravel()
    w = np.broadcast_to(ws, (rank, s.size)).ravel()
    if rank == 0:
        return CorrelatedMSE(finite, base)
    zeta, _ = hl_waterfill(g, budget.levels, budget.kappa, weights=w,
                           n_quantizers=budget.ratio * task.L)
    v = varphi(zeta * g)
    integral = base + float(np.sum(w * g**2 / (v + 1.0))) / task.K
    return CorrelatedMSE(finite, integral)


def _cmat_to_list(M):
    M = np.asarray(M)
    return np.stack([M.real, M.imag], axis=-1).tolist()


def _cmat_from_list(x):
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


@dataclass(frozen=True, eq=False)
class HLDesign:
    """Realized hardware-limited quantizer over ``n`` samples.

    When ``factored`` is true, ``combiner`` is the per-sample ``P_q × L``
    matrix ``A'`` (full combiner ``A' ⊗ I_n``) and ``digital`` is the
    ``K × P_q`` matrix ``B'``.  Otherwise ``combiner`` is ``P × nL`` and
    ``digital`` is ``nK × P`` acting on column-stacked vectors.
    """

    combiner: np.ndarray
    digital: np.ndarray
    support: float
    levels: int
    eta: float
    zeta: float
    lam2: np.ndarray
    predicted_mse: float
    n: int
    factored: bool

    @property
    def n_quantizers(self):
        rows = self.combiner.shape[0]
        return rows * self.n if self.factored else rows

    def quantizer(self):
        return ScalarQuantizer(self.support, self.levels, self.eta)

    def combine(self, Y):
        """Analog combining of observations ``Y`` with shape ``(..., n, L)``."""
        Y = np.asarray(Y)
        if self.factored:
            return Y @ self.combiner.T
        v = np.swapaxes(Y, -1, -2).reshape(Y.shape[:-2] + (-1,))
        return v @ self.combiner.T

    def estimate(self, Q):
        """Digital processing of ADC outputs; returns ``(..., n, K)``."""
        Q = np.asarray(Q)
        if self.factored:
            return Q @ self.digital.T
        g = Q @ self.digital.T
        K = g.shape[-1] // self.n
        return np.swapaxes(g.reshape(g.shape[:-1] + (K, self.n)), -1, -2)

    def full_combiner(self):
        if self.factored:
            return np.kron(self.combiner, np.eye(self.n))
        return self.combiner

    def to_dict(self):
        return {
            "factored": self.factored,
            "n": self.n,
            "support": self.support,
            "levels": self.levels,
            "eta": self.eta,
            "zeta": self.zeta,
            "lambda_sq": np.asarray(self.lam2).tolist(),
            "predicted_mse": self.predicted_mse,
            "combiner": _cmat_to_list(self.combiner),
            "digital": _cmat_to_list(self.digital),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(
            combiner=_cmat_from_list(d["combiner"]),
            digital=_cmat_from_list(d["digital"]),
            support=float(d["support"]),
            levels=int(d["levels"]),
            eta=float(d["eta"]),
            zeta=float(d["zeta"]),
            lam2=np.asarray(d["lambda_sq"], dtype=float),
            predicted_mse=float(d["predicted_mse"]),
            n=int(d["n"]),
            factored=bool(d["factored"]),
        )


def _check_pq(task, budget):
    P_q = int(np.floor(budget.ratio * task.L + _EPS))
    rank = max_useful_pq(task)
    if P_q > rank:
        warnings.warn(
            f"{P_q} quantizers per sample exceed the useful maximum {rank}; "
            "extra quantizers receive no signal energy",
            stacklevel=3,
        )


def design_hl(task, budget, n, factored=None):
    """Build the hardware-limited design for ``n`` samples.

    Parameters
    ----------
    task : TaskModel
    budget : QuantBudget
    n : int
        Number of samples over which the combiner is materialized.
    factored : bool, optional
        Force or forbid the per-sample form ``A = A' ⊗ I_n``.  By default it
        is used whenever the samples are uncorrelated and ``rL`` is an
        integer.

    Returns
    -------
    HLDesign
    """
    if budget.ratio <= 0:
        raise ValueError("a design needs at least one quantizer (ratio > 0)")
    K, L = task.K, task.L
    P, P_q, P_r = budget.split(L, n)
    can_factor = task.correlation.is_white and P_r == 0
    if factored is None:
        factored = can_factor
    elif factored and not can_factor:
        raise ValueError("per-sample form needs uncorrelated samples and integer r*L")
    _check_pq(task, budget)

    Sy_is, _ = inv_sqrtm_psd(task.cov_y)
    U_g, phi_k, Vh = np.linalg.svd(task.gamma @ sqrtm_psd(task.cov_y))
    phi = np.zeros(L)
    phi[:K] = phi_k
    noise = budget.noise_var
    M, kap, r = budget.levels, budget.kappa, budget.ratio
    base = mmse_avg(task)

    if factored:
        top = phi[:P_q]
        zeta, lam2 = hl_waterfill(top, M, kap, ratio=r)
        U = equal_diag_rotation(lam2)
        A = U @ (np.sqrt(lam2)[:, None] * (Vh[:P_q] @ Sy_is))
        k = min(P_q, K)
        gain = np.zeros(P_q)
        gain[:k] = phi[:k] * np.sqrt(lam2[:k]) / (lam2[:k] + noise)
        Bm = np.zeros((K, P_q), dtype=complex)
        Bm[:, :k] = U_g[:, :k] * gain[:k]
        B = Bm @ U.conj().T
        kept = phi[:k] ** 2 * lam2[:k] / (lam2[:k] + noise)
        pred = base + (np.sum(phi**2) - np.sum(kept)) / K
        return HLDesign(A, B, float(np.sqrt(budget.support_sq)), M, budget.eta,
                        float(zeta), lam2, float(pred), int(n), True)

    if n * L > DENSE_LIMIT:
        raise ValueError(
            f"dense combiner of width n*L = {n * L} exceeds {DENSE_LIMIT}; "
            "use the per-sample form or a smaller n"
        )
    if task.correlation.is_white:
        lam_c, V_c = np.ones(n), np.eye(n)
    else:
        lam_c, V_c = eigh_desc(task.correlation.toeplitz(n))
        lam_c = clamp_eigs(lam_c)
    inv_c = np.zeros(n)
    inv_c[lam_c > 0] = 1.0 / np.sqrt(lam_c[lam_c > 0])

    gains, order = mode_gains(task, n)
    sel, g = order[:P], gains[:P]
    i_idx, k_idx = sel // n, sel % n
    zeta, lam2 = hl_waterfill(g, M, kap, ratio=r)
    U = equal_diag_rotation(lam2)

    left = Vh[i_idx] @ Sy_is                      # P × L
    right = (V_c[:, k_idx] * inv_c[k_idx]).conj().T  # P × n
    W = (left[:, :, None] * right[:, None, :]).reshape(P, L * n)
    A = U @ (np.sqrt(lam2)[:, None] * W)

    has_g = i_idx < K
    cols = np.zeros((K * n, P), dtype=complex)
    ug = U_g[:, np.minimum(i_idx, K - 1)]          # K × P
    cols[:] = (ug[:, None, :] * V_c[:, k_idx][None, :, :]).reshape(K * n, P)
    cols *= np.where(has_g, g, 0.0)
    B = (cols * (np.sqrt(lam2) / (lam2 + noise))) @ U.conj().T

    total = float(np.sum(gains**2))
    pred = base + (total - float(np.sum(g**2 * lam2 / (lam2 + noise)))) / (n * K)
    return HLDesign(A, B, float(np.sqrt(budget.support_sq)), M, budget.eta,
                    float(zeta), lam2, float(pred), int(n), False)
