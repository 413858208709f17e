"""Uniform scalar quantizer with non-subtractive uniform dither.

Each complex sample is quantized per real dimension after adding an
independent dither drawn uniformly on ``[-Δ/2, Δ/2]``.  The dither is never
subtracted.  For inputs inside the support the combined error behaves as
additive white noise with per-complex-sample variance ``4γ²/(3M²)``.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ScalarQuantizer",
    "uniform_level",
    "quantize_complex_seq",
    "quantize_with_stats",
    "noise_model_variance",
    "kappa",
]


def kappa(eta, levels):
    """Support inflation factor ``κ = η² / (1 - 2η²/(3M²))``.

    Parameters
    ----------
    eta : float
        Support factor (ratio between support and input standard deviation).
    levels : int or float
        Number of quantization levels per real dimension.  ``np.inf`` is
        accepted and yields ``η²``.

    Returns
    -------
    float
    """
    eta = float(eta)
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if np.isinf(levels):
        return eta**2
    levels = float(levels)
    if not eta < np.sqrt(1.5) * levels:
        raise ValueError(
            f"eta={eta} violates eta < sqrt(3/2)*M = {np.sqrt(1.5) * levels:.6g}; "
            "kappa would not be positive"
        )
    return eta**2 / (1.0 - 2.0 * eta**2 / (3.0 * levels**2))


@dataclass(frozen=True)
class ScalarQuantizer:
    """Identical uniform quantizer applied to each real dimension.

    Parameters
    ----------
    support : float
        Half-width γ of the quantizer support ``[-γ, γ]``.
    levels : int
        Number of output levels M per real dimension (at least 2).
    eta : float, optional
        Support factor used to size γ.  Only validated, not used for
        quantization itself.
    """

    support: float
    levels: int
    eta: float = None

    def __post_init__(self):
        if not (np.isfinite(self.support) and self.support > 0):
            raise ValueError(f"support must be positive and finite, got {self.support}")
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValueError(f"levels must be an integer >= 2, got {self.levels}")
        object.__setattr__(self, "levels", int(self.levels))
        if self.eta is not None:
            kappa(self.eta, self.levels)

    @property
    def spacing(self):
        return 2.0 * self.support / self.levels

    @property
    def alphabet(self):
        """Real output levels in increasing order."""
        l = np.arange(self.levels)
        return -self.support + self.spacing * (l + 0.5)


def uniform_level(x, q):
    """Map real input(s) to the level of the containing cell.

    Inputs beyond the support are clamped to the outermost level
    ``sign(x)(γ - Δ/2)``.

    Parameters
    ----------
    x : float or ndarray
        Real input.
    q : ScalarQuantizer

    Returns
    -------
    float or ndarray
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("uniform_level got non-finite input")
    delta = q.spacing
    cell = np.floor((x + q.support) / delta)
    cell = np.clip(cell, 0, q.levels - 1)
    out = -q.support + delta * (cell + 0.5)
    return out if out.ndim else float(out)


def quantize_with_stats(y, q, rng, dither=True):
    """Quantize a complex array and count overload events.

    Returns
    -------
    out : ndarray of complex
        Quantized samples, same shape as ``y``.
    n_overload : int
        Number of real dimensions whose dithered input left ``[-γ, γ]``.
    """
    y = np.asarray(y, dtype=complex)
    re, im = y.real, y.imag
    if dither:
        half = q.spacing / 2
        re = re + rng.uniform(-half, half, size=y.shape)
        im = im + rng.uniform(-half, half, size=y.shape)
    n_over = int(np.count_nonzero(np.abs(re) > q.support) + np.count_nonzero(np.abs(im) > q.support))
    out = np.asarray(uniform_level(re, q)) + 1j * np.asarray(uniform_level(im, q))
    return out, n_over


def quantize_complex_seq(y, q, rng, dither=True):
    """Dithered quantization of a complex sequence.

    Element ``i`` of the result is
    ``uniform_level(Re(y_i + z_i)) + j uniform_level(Im(y_i + z_i))`` where the
    real and imaginary dither components are i.i.d. uniform on ``[-Δ/2, Δ/2]``.

    Parameters
    ----------
    y : array_like of complex
    q : ScalarQuantizer
    rng : numpy.random.Generator
        Seeded source for the dither.
    dither : bool
        Set to False for plain uniform quantization.
    """
    return quantize_with_stats(y, q, rng, dither=dither)[0]


def noise_model_variance(q):
    """Per-complex-sample variance ``4γ²/(3M²)`` of the dithered-quantizer error."""
    return 4.0 * q.support**2 / (3.0 * q.levels**2)
